//! CSV and JSON outputs of the evaluation and diagnostic commands.

use std::io::Write;

use lintra_core::metrics::EvalReport;
use lintra_core::pca::SpectrumRow;

pub fn eval_csv<W: Write>(report: &EvalReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "id,mse,ssim")?;
    for s in &report.per_image {
        writeln!(w, "{},{},{}", s.id, s.mse, s.ssim)?;
    }
    writeln!(w, "mean,{},{}", report.mean_mse, report.mean_ssim)
}

pub fn spectrum_csv<W: Write>(rows: &[SpectrumRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,eigenvalue,cumulative_fraction")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.index, r.eigenvalue, r.cumulative_fraction)?;
    }
    Ok(())
}

pub fn scatter_csv<W: Write>(rows: &[(f64, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "d_a,d_b")?;
    for (a, b) in rows {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lintra_core::metrics::ImageScore;

    #[test]
    fn eval_csv_has_trailing_mean_row() {
        let report = EvalReport {
            per_image: vec![
                ImageScore {
                    id: "x.png".into(),
                    mse: 0.5,
                    ssim: 1.0,
                },
                ImageScore {
                    id: "y.png".into(),
                    mse: 0.25,
                    ssim: 0.5,
                },
            ],
            mean_mse: 0.375,
            mean_ssim: 0.75,
        };
        let mut out = Vec::new();
        eval_csv(&report, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "id,mse,ssim\nx.png,0.5,1\ny.png,0.25,0.5\nmean,0.375,0.75\n"
        );
    }
}

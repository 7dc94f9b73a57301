use lintra_core::align::Correspondence;
use lintra_core::dataset::{ImageSet, ImageShape};
use lintra_core::pca::{project, reconstruct};
use lintra_core::synth::PowerLawGenerator;
use lintra_core::{fit, Error, FitConfig, Pairing};
use nalgebra::DMatrix;

fn corpus(n: usize, seed: u64) -> ImageSet {
    let shape = ImageShape::new(8, 8, 1).unwrap();
    PowerLawGenerator::new(shape, 64, 1.5, 0.05, 1)
        .unwrap()
        .sample(n, seed, "img")
        .unwrap()
}

#[test]
fn mean_image_maps_to_target_mean() {
    let b = corpus(200, 2);
    let a = corpus(200, 3);
    let config = FitConfig {
        rank: 10,
        ..FitConfig::default()
    };
    let t = fit(&a, &b, &config, None).unwrap();
    let mean = DMatrix::from_row_slice(1, 64, t.basis_a().mean().as_slice());
    let set = ImageSet::new(mean, a.shape(), vec!["mean.png".into()]).unwrap();
    let out = t.translate(&set).unwrap();
    for (x, m) in out.data().iter().zip(t.basis_b().mean().iter()) {
        assert_eq!(*x, m.clamp(0.0, 1.0));
    }
}

#[test]
fn supervised_identity_reproduces_reconstruction() {
    let a = corpus(150, 4);
    let config = FitConfig {
        rank: 12,
        pairing: Pairing::Supervised,
        ..FitConfig::default()
    };
    let t = fit(&a, &a, &config, Some(&Correspondence::identity(150))).unwrap();
    assert_eq!(t.map().iterations_run, 1);
    assert!((&t.map().q - DMatrix::identity(12, 12)).norm() < 1e-5);
    let out = t.translate(&a).unwrap();
    let recon = reconstruct(t.basis_a(), &project(t.basis_a(), &a).unwrap()).unwrap();
    assert!((out.data() - recon.data()).abs().max() < 1e-5);
    assert_eq!(out.ids(), a.ids());
}

#[test]
fn supervised_without_pairs_is_rejected() {
    let a = corpus(20, 5);
    let config = FitConfig {
        rank: 3,
        pairing: Pairing::Supervised,
        ..FitConfig::default()
    };
    assert_eq!(fit(&a, &a, &config, None).unwrap_err(), Error::EmptyPairing);
}

#[test]
fn rank_is_checked_first() {
    let a = corpus(10, 6);
    let config = FitConfig {
        rank: 10,
        ..FitConfig::default()
    };
    assert_eq!(
        fit(&a, &a, &config, None).unwrap_err(),
        Error::RankOutOfRange { rank: 10, max: 9 }
    );
}

#[test]
fn translate_checks_shape() {
    let a = corpus(30, 7);
    let config = FitConfig {
        rank: 4,
        ..FitConfig::default()
    };
    let t = fit(&a, &a, &config, None).unwrap();
    let other = ImageSet::new(
        DMatrix::zeros(1, 16),
        ImageShape::new(4, 4, 1).unwrap(),
        vec!["x".into()],
    )
    .unwrap();
    assert!(matches!(
        t.translate(&other),
        Err(Error::ShapeMismatch { .. })
    ));
}

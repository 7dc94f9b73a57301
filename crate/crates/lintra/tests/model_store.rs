use lintra::model_store::{self, from_bytes, read_header, to_bytes, MAGIC};
use lintra::Error;
use lintra_core::synth::PowerLawGenerator;
use lintra_core::{fit, FitConfig, ImageShape, Translator};

fn translator() -> Translator {
    let shape = ImageShape::new(6, 6, 1).unwrap();
    let g = PowerLawGenerator::new(shape, 36, 1.5, 0.05, 1).unwrap();
    let a = g.sample(80, 2, "a").unwrap();
    let b = g.sample(80, 3, "b").unwrap();
    let config = FitConfig {
        rank: 8,
        ..FitConfig::default()
    };
    fit(&a, &b, &config, None).unwrap().with_created(42)
}

/// Rewrites the file after `edit` changes the array region, keeping checksums valid.
fn patch(bytes: &[u8], edit: impl FnOnce(&mut [u8], &model_store::Header)) -> Vec<u8> {
    let (mut header, end) = read_header(bytes).unwrap();
    let mut region = bytes[end..].to_vec();
    edit(&mut region, &header);
    for e in &mut header.arrays {
        let (o, l) = (e.offset as usize, e.length as usize);
        e.crc32 = crc32fast::hash(&region[o..o + l]);
    }
    let json = serde_json::to_vec(&header).unwrap();
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&region);
    out
}

#[test]
fn round_trip_is_exact_and_deterministic() {
    let t = translator();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model_store::save(&t, &path).unwrap();
    assert_eq!(model_store::load(&path).unwrap(), t);
    assert_eq!(std::fs::read(&path).unwrap(), to_bytes(&t).unwrap());
    assert_eq!(to_bytes(&t).unwrap(), to_bytes(&t.clone()).unwrap());
}

#[test]
fn truncated_file_is_rejected() {
    let bytes = to_bytes(&translator()).unwrap();
    for cut in [4, 10, 40, bytes.len() - 3] {
        assert!(from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    assert!(matches!(
        from_bytes(&bytes[..bytes.len() - 4]),
        Err(Error::Length(_))
    ));
}

#[test]
fn magic_and_version_are_checked() {
    let mut bytes = to_bytes(&translator()).unwrap();
    bytes[7] = b'2';
    assert!(matches!(
        from_bytes(&bytes),
        Err(Error::VersionMismatch { .. })
    ));
    bytes[0] = b'X';
    assert!(matches!(from_bytes(&bytes), Err(Error::BadMagic)));
}

#[test]
fn flipped_bit_fails_checksum() {
    let mut bytes = to_bytes(&translator()).unwrap();
    let n = bytes.len();
    bytes[n - 2] ^= 0x10;
    assert!(matches!(from_bytes(&bytes), Err(Error::Checksum(_))));
}

#[test]
fn non_orthogonal_map_is_rejected() {
    let bytes = to_bytes(&translator()).unwrap();
    let corrupted = patch(&bytes, |region, header| {
        let q = header.arrays.iter().find(|e| e.name == "map.q").unwrap();
        let o = q.offset as usize;
        region[o..o + 4].copy_from_slice(&2.0f32.to_le_bytes());
    });
    assert!(matches!(
        from_bytes(&corrupted),
        Err(Error::Core(lintra_core::Error::NotOrthogonal(_)))
    ));
}

#[test]
fn header_is_inspectable_json() {
    let bytes = to_bytes(&translator()).unwrap();
    let (header, _) = read_header(&bytes).unwrap();
    assert_eq!(header.created, 42);
    assert_eq!(header.map.rank, 8);
    let names: Vec<&str> = header.arrays.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "basis_a.mean",
            "basis_a.components",
            "basis_a.eigenvalues",
            "basis_b.mean",
            "basis_b.components",
            "basis_b.eigenvalues",
            "map.q"
        ]
    );
}

mod corruption {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn reference() -> &'static Vec<u8> {
        static BYTES: OnceLock<Vec<u8>> = OnceLock::new();
        BYTES.get_or_init(|| to_bytes(&translator()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn any_single_byte_change_is_detected_or_harmless(pos in any::<prop::sample::Index>(), xor in 1u8..) {
            let mut bytes = reference().clone();
            let i = pos.index(bytes.len());
            bytes[i] ^= xor;
            // Must never panic; a change that still parses must yield a valid translator.
            if let Ok(t) = from_bytes(&bytes) {
                prop_assert!(t.map().validate(1e-3).is_ok());
            }
        }
    }
}

use std::fs;
use std::path::Path;

use urpca::checkpoint::{decode, encode, load, save, CheckpointMeta};
use urpca::pipeline::init_model;
use urpca::Error;
use urpca_core::rpca::BlockVariant;

#[test]
fn save_then_load_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, variant) in [BlockVariant::PlainConv, BlockVariant::RocAe, BlockVariant::RucAe].into_iter().enumerate() {
        let model = init_model(variant, 3, 256, i as u64).unwrap();
        let path = tmp.path().join(format!("nested/{variant}.ckpt"));
        save(&path, &model, CheckpointMeta { seed: 40 + i as u64 }).unwrap();
        let (back, meta) = load(&path).unwrap();
        assert_eq!(back.config(), model.config());
        assert_eq!(back.params(), model.params());
        assert_eq!(meta.seed, 40 + i as u64);
        assert_eq!(encode(&back, meta), fs::read(&path).unwrap());
    }
}

#[test]
fn header_is_readable_text() {
    let model = init_model(BlockVariant::RocAe, 2, 128, 0).unwrap();
    let bytes = encode(&model, CheckpointMeta { seed: 9 });
    let text = String::from_utf8_lossy(&bytes[..bytes.len() - model.params().len() * 4]);
    assert!(text.starts_with("URPC1\nvariant: roc-ae\nlayers: 2\nn_fft: 128\nkernel: 3\nstride: 1\npad: 1\nseed: 9\n"));
    assert!(text.ends_with(&format!("params: {}\n\n", model.params().len())));
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let model = init_model(BlockVariant::PlainConv, 2, 64, 0).unwrap();
    let bytes = encode(&model, CheckpointMeta::default());
    let p = Path::new("m.ckpt");

    assert!(matches!(decode(p, b"hello world"), Err(Error::BadMagic { .. })));
    let mut v2 = bytes.clone();
    v2[4] = b'2';
    assert!(matches!(decode(p, &v2), Err(Error::VersionMismatch { .. })));
    assert!(matches!(decode(p, &bytes[..bytes.len() - 3]), Err(Error::Truncated { .. })));

    let text = String::from_utf8_lossy(&bytes).replace("layers: 2", "layers: 3");
    let mut relabeled = text.as_bytes()[..text.find("\n\n").unwrap() + 2].to_vec();
    relabeled.extend_from_slice(&bytes[bytes.len() - model.params().len() * 4..]);
    assert!(matches!(decode(p, &relabeled), Err(Error::Format { .. })));

    let no_blank = b"URPC1\nvariant: conv\n".to_vec();
    assert!(matches!(decode(p, &no_blank), Err(Error::Format { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load(Path::new("/nonexistent/dir/model.ckpt")).unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
}

use std::fs;

use nicknet::idx::{encode_idx, load_idx, parse_idx, IMAGES_MAGIC, LABELS_MAGIC};
use nicknet::Error;

fn write_pair(dir: &std::path::Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
    let (i, l) = (dir.join("images.idx"), dir.join("labels.idx"));
    fs::write(&i, images).unwrap();
    fs::write(&l, labels).unwrap();
    (i, l)
}

#[test]
fn two_image_fixture_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let pixels: Vec<u8> = (0..2 * 3 * 2).map(|i| (i * 23) as u8).collect();
    let images = encode_idx(IMAGES_MAGIC, &[2, 3, 2], &pixels);
    let labels = encode_idx(LABELS_MAGIC, &[2], &[7, 1]);
    // Header is the magic then one big-endian u32 per dimension.
    assert_eq!(&images[..8], &[0, 0, 8, 3, 0, 0, 0, 2]);
    let (i, l) = write_pair(dir.path(), &images, &labels);
    let d = load_idx(&i, &l).unwrap();
    assert_eq!((d.len(), d.dim), (2, 6));
    assert_eq!((d.label(0), d.label(1)), (7, 1));
    for (n, &p) in pixels.iter().enumerate() {
        assert_eq!(d.sample(n / 6)[n % 6], f64::from(p) / 255.0);
    }
}

#[test]
fn bad_magic_is_a_format_error() {
    let bytes = encode_idx(0x0000_0802, &[1, 1], &[0]);
    assert!(matches!(parse_idx(&bytes, IMAGES_MAGIC, "x"), Err(Error::Format(_))));
    let swapped = encode_idx(LABELS_MAGIC, &[1], &[0]);
    assert!(matches!(parse_idx(&swapped, IMAGES_MAGIC, "x"), Err(Error::Format(_))));
}

#[test]
fn count_mismatch_is_a_consistency_error() {
    let dir = tempfile::tempdir().unwrap();
    let images = encode_idx(IMAGES_MAGIC, &[2, 1, 1], &[0, 255]);
    let labels = encode_idx(LABELS_MAGIC, &[3], &[0, 1, 2]);
    let (i, l) = write_pair(dir.path(), &images, &labels);
    let err = load_idx(&i, &l).unwrap_err();
    assert!(matches!(err, Error::Consistency(_)), "{err}");
}

#[test]
fn truncated_file_is_an_io_error() {
    let full = encode_idx(IMAGES_MAGIC, &[2, 2, 2], &[1; 8]);
    for cut in [2, 6, 15, full.len() - 1] {
        let err = parse_idx(&full[..cut], IMAGES_MAGIC, "images").unwrap_err();
        assert_eq!(err.kind(), "io", "cut at {cut}: {err}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_idx(&dir.path().join("nope"), &dir.path().join("nope2")).unwrap_err();
    assert_eq!(err.kind(), "io");
}

use actmap::dataset::{
    decode_image, load_manifest, normalize_mos, write_manifest, DatasetError, DatasetManifest, MosNormalization,
};
use actmap::evaluation::make_splits;
use actmap::synthetic::generate_dataset;
use image::{ImageBuffer, Rgba};

fn span(m: &DatasetManifest) -> (f64, f64) {
    let v: Vec<f64> = m.rows().iter().map(|r| r.mos).collect();
    (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[test]
fn manifest_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(dir.path(), 5, 2).unwrap();
    let copy = dir.path().join("copy.csv");
    write_manifest(&copy, &m).unwrap();
    let back = load_manifest(&copy).unwrap();
    assert_eq!(back.rows(), m.rows());
    write_manifest(dir.path().join("copy2.csv"), &back).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(dir.path().join("copy2.csv")).unwrap());
}

#[test]
fn partition_by_reference() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(dir.path(), 7, 4).unwrap();
    let groups = m.by_reference();
    assert_eq!(groups.len(), 7);
    assert!(groups.values().all(|rows| rows.len() == 20));
    let refs: Vec<String> = m.rows().iter().map(|r| r.reference_id.clone()).collect();
    for plan in make_splits(&refs, 5, 3, 1).unwrap() {
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 2, 2]);
        for k in 0..5 {
            let (train, test) = plan.train_test(k);
            assert!(train.is_disjoint(&test));
            assert_eq!(train.len() + test.len(), 7);
        }
    }
}

#[test]
fn per_database_normalization_then_concatenation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = generate_dataset(a.path(), 5, 1).unwrap();
    let mb = generate_dataset(b.path(), 6, 2).unwrap();
    // Put database B on a 1..5 MOS scale first.
    let scaled: Vec<_> = mb
        .rows()
        .iter()
        .cloned()
        .map(|mut r| {
            r.mos = 1.0 + 4.0 * r.mos;
            r
        })
        .collect();
    let mb = DatasetManifest::new(b.path(), scaled).unwrap();
    let na = normalize_mos(&ma, MosNormalization::MinMaxPerDb).unwrap();
    let nb = normalize_mos(&mb, MosNormalization::MinMaxPerDb).unwrap();
    assert_eq!(span(&na), (0.0, 1.0));
    assert_eq!(span(&nb), (0.0, 1.0));
    let mut rows = na.rows().to_vec();
    rows.extend(nb.rows().iter().cloned().map(|mut r| {
        r.pair_id = format!("b_{}", r.pair_id);
        r.reference_id = format!("b_{}", r.reference_id);
        r
    }));
    let joined = DatasetManifest::new(a.path(), rows).unwrap();
    assert_eq!(joined.len(), 220);
    assert_eq!(span(&joined), (0.0, 1.0));
}

#[test]
fn alpha_channel_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgba.png");
    ImageBuffer::from_pixel(2, 2, Rgba([10u8, 20, 30, 255])).save(&path).unwrap();
    assert!(matches!(decode_image(&path), Err(DatasetError::UnsupportedFormat { .. })));
}

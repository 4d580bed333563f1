use std::path::PathBuf;

use rdl_core::data::{augment_hflip, gcn, hflip_mask, load_idx, synth_clusters, write_idx};
use rdl_core::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(serde::Deserialize)]
struct Expected {
    shape: Vec<usize>,
    pixels: Vec<f64>,
    labels: Vec<usize>,
}

#[test]
fn idx_fixture_decodes_to_expected_values() {
    let d = load_idx(&fixture("tiny-images-idx3-ubyte"), &fixture("tiny-labels-idx1-ubyte")).unwrap();
    let e: Expected = serde_json::from_str(&std::fs::read_to_string(fixture("tiny-expected.json")).unwrap()).unwrap();
    assert_eq!(d.images.shape(), &e.shape[..]);
    assert_eq!(d.images.data(), &e.pixels[..]);
    assert_eq!(d.labels, e.labels);
    assert_eq!(d.num_classes, 8);
}

#[test]
fn idx_write_then_load_is_exact_for_byte_values() {
    let d = load_idx(&fixture("tiny-images-idx3-ubyte"), &fixture("tiny-labels-idx1-ubyte")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (i, l) = (dir.path().join("i"), dir.path().join("l"));
    write_idx(&d, &i, &l).unwrap();
    assert_eq!(std::fs::read(&i).unwrap(), std::fs::read(fixture("tiny-images-idx3-ubyte")).unwrap());
    assert_eq!(load_idx(&i, &l).unwrap().images, d.images);
}

#[test]
fn idx_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    let images = std::fs::read(fixture("tiny-images-idx3-ubyte")).unwrap();
    let labels = fixture("tiny-labels-idx1-ubyte");

    let truncated = dir.path().join("trunc");
    std::fs::write(&truncated, &images[..images.len() - 1]).unwrap();
    assert!(matches!(load_idx(&truncated, &labels), Err(Error::Truncated { .. })));

    let mut bad = images.clone();
    bad[3] = 0x01;
    let bad_path = dir.path().join("bad");
    std::fs::write(&bad_path, &bad).unwrap();
    assert!(matches!(load_idx(&bad_path, &labels), Err(Error::BadMagic { .. })));

    let two = dir.path().join("two");
    let mut l = std::fs::read(&labels).unwrap();
    l[7] = 2;
    l.pop();
    std::fs::write(&two, &l).unwrap();
    let img = fixture("tiny-images-idx3-ubyte");
    assert!(matches!(load_idx(&img, &two), Err(Error::CountMismatch { .. })));
}

#[test]
fn synthetic_clusters_are_nearest_centroid_separable() {
    let d = synth_clusters(5, 40, [1, 3, 3], 3.0, 11).unwrap();
    let k = 9;
    let mut centroids = vec![vec![0.0; k]; 5];
    for i in 0..d.len() {
        for (c, v) in centroids[d.labels[i]].iter_mut().zip(d.images.row(i)) {
            *c += v / 40.0;
        }
    }
    let correct = (0..d.len())
        .filter(|&i| {
            let x = d.images.row(i);
            let best = (0..5)
                .min_by(|&a, &b| {
                    let da: f64 = x.iter().zip(&centroids[a]).map(|(p, q)| (p - q).powi(2)).sum();
                    let db: f64 = x.iter().zip(&centroids[b]).map(|(p, q)| (p - q).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == d.labels[i]
        })
        .count();
    assert!(correct as f64 / d.len() as f64 > 0.95);
    assert_eq!(synth_clusters(5, 40, [1, 3, 3], 3.0, 11).unwrap().images, d.images);
}

#[test]
fn gcn_is_idempotent() {
    let d = synth_clusters(3, 10, [2, 4, 4], 1.0, 2).unwrap();
    let once = gcn(&d.images).unwrap();
    let twice = gcn(&once).unwrap();
    for (a, b) in once.data().iter().zip(twice.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    for i in 0..once.rows() {
        let r = once.row(i);
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / r.len() as f64;
        assert!(m.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn flips_happen_about_half_the_time_and_reverse_rows() {
    let mask = hflip_mask(20000, 5);
    let frac = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
    assert!((frac - 0.5).abs() < 0.02, "{}", frac);

    let d = synth_clusters(2, 50, [1, 2, 3], 1.0, 3).unwrap();
    let flipped = augment_hflip(&d.images, 9).unwrap();
    let mask = hflip_mask(d.len(), 9);
    for i in 0..d.len() {
        let (a, b) = (d.images.row(i), flipped.row(i));
        for row in 0..2 {
            for col in 0..3 {
                let want = if mask[i] { a[row * 3 + 2 - col] } else { a[row * 3 + col] };
                assert_eq!(b[row * 3 + col], want);
            }
        }
    }
}

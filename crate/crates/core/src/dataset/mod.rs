//! Datasets in the LEVIR-MCI directory layout.
//!
//! ```text
//! root/
//!   captions_train.json   [{"example_id", "captions": [...], "filename"}, ...]
//!   train/A/<id>.png  train/B/<id>.png  train/label/<id>.png
//!   val/...  test/...
//! ```
//!
//! A LEVIR-CC style `{"images": [...]}` caption file at the root is read when no
//! per-split caption files exist.

mod index;
mod resize;
mod stats;
mod subset;

pub use index::{caption_file_name, load_index, write_captions, CaptionRecord, DatasetIndex, Example, Split};
pub use resize::{bilinear_samples, resize_example, resize_image, resize_mask, TARGET_SIZE};
pub use stats::{mask_stats, normalization_stats, normalization_stats_of, MaskStats, NormalizationStats, HISTOGRAM_BINS};
pub use subset::{filter_tree_examples, make_splits, mentions_trees, split_sizes, SplitAssignment, TREE_KEYWORDS};

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use image::{Rgb, RgbImage};

    use super::*;
    use crate::raster::ChangeMask;
    use crate::Error;

    fn write_example(root: &Path, split: Split, id: &str, changed: u32, shade: u8) {
        for sub in ["A", "B", "label"] {
            fs::create_dir_all(root.join(split.as_str()).join(sub)).unwrap();
        }
        let dir = root.join(split.as_str());
        let a = RgbImage::from_fn(10, 10, |x, y| Rgb([shade, (x * 20) as u8, (y * 25) as u8]));
        let b = RgbImage::from_fn(10, 10, |x, y| Rgb([(x + y) as u8, shade / 2, 200]));
        a.save(dir.join("A").join(format!("{id}.png"))).unwrap();
        b.save(dir.join("B").join(format!("{id}.png"))).unwrap();
        let m = ChangeMask::from_fn(10, 10, |r, c| r * 10 + c < changed).unwrap();
        m.save_png(dir.join("label").join(format!("{id}.png"))).unwrap();
    }

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write_example(root, Split::Train, "b_002", 10, 40);
        write_example(root, Split::Train, "a_001", 30, 90);
        write_example(root, Split::Test, "c_003", 0, 200);
        let caps = |id: &str, c: &[&str]| CaptionRecord {
            example_id: id.into(),
            captions: c.iter().map(|s| s.to_string()).collect(),
            filename: format!("{id}.png"),
        };
        let train = vec![
            caps("a_001", &["trees removed along the road", "some change"]),
            caps("b_002", &["a new hardwood floor", "buildings appear"]),
        ];
        let test = vec![caps("c_003", &["the woods are unchanged"])];
        fs::write(root.join("captions_train.json"), serde_json::to_string(&train).unwrap()).unwrap();
        fs::write(root.join("captions_test.json"), serde_json::to_string(&test).unwrap()).unwrap();
        dir
    }

    #[test]
    fn loads_sorted_deterministic_index() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.sizes(), [2, 0, 1]);
        let ids: Vec<_> = idx.split(Split::Train).iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a_001", "b_002"]);
        assert_eq!(idx.split(Split::Train)[0].captions.len(), 2);
        assert_eq!(idx, load_index(dir.path()).unwrap());
        let pair = idx.split(Split::Test)[0].load_pair().unwrap();
        assert_eq!(pair.ground_truth().unwrap().count(), 0);
    }

    #[test]
    fn missing_mask_names_the_example() {
        let dir = fixture();
        fs::remove_file(dir.path().join("train/label/b_002.png")).unwrap();
        match load_index(dir.path()) {
            Err(Error::MissingFile { example, .. }) => assert_eq!(example, "b_002"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let dir = fixture();
        RgbImage::new(9, 10).save(dir.path().join("test/B/c_003.png")).unwrap();
        assert!(matches!(load_index(dir.path()), Err(Error::Malformed { .. })));
    }

    #[test]
    fn malformed_caption_json_is_rejected() {
        let dir = fixture();
        fs::write(dir.path().join("captions_test.json"), "{not json").unwrap();
        assert!(matches!(load_index(dir.path()), Err(Error::Malformed { .. })));
    }

    #[test]
    fn levir_style_captions_are_read() {
        let dir = fixture();
        fs::remove_file(dir.path().join("captions_train.json")).unwrap();
        fs::remove_file(dir.path().join("captions_test.json")).unwrap();
        let levir = serde_json::json!({"images": [
            {"filepath": "train", "filename": "a_001.png", "split": "train",
             "sentences": [{"raw": " a forest was cut ", "tokens": ["a", "forest", "was", "cut"]}]},
            {"filepath": "test", "filename": "c_003.png", "split": "test",
             "sentences": [{"tokens": ["no", "change"]}]}
        ]});
        fs::write(dir.path().join("LevirCCcaptions.json"), levir.to_string()).unwrap();
        let idx = load_index(dir.path()).unwrap();
        assert_eq!(idx.split(Split::Train)[0].captions, vec!["a forest was cut"]);
        assert_eq!(idx.split(Split::Test)[0].captions, vec!["no change"]);
        assert!(idx.split(Split::Train)[1].captions.is_empty());
    }

    #[test]
    fn tree_filter_is_idempotent() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        let once = filter_tree_examples(&idx);
        assert_eq!(once.sizes(), [1, 0, 1]);
        assert_eq!(filter_tree_examples(&once), once);
    }

    #[test]
    fn captions_round_trip() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        write_captions(&idx, dir.path()).unwrap();
        assert_eq!(load_index(dir.path()).unwrap(), idx);
    }

    #[test]
    fn splits_partition_the_index() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        let s = make_splits(&idx, [0.34, 0.33, 0.33], 5).unwrap();
        assert_eq!(s, make_splits(&idx, [0.34, 0.33, 0.33], 5).unwrap());
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort();
        assert_eq!(all, ["a_001", "b_002", "c_003"]);
        let empty = idx.retain(|_| false);
        assert!(make_splits(&empty, [0.8, 0.1, 0.1], 0).is_err());
    }

    #[test]
    fn mask_stats_fixture() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        let s = mask_stats(&idx, Some(Split::Train)).unwrap();
        assert!((s.mean - 0.2).abs() < 1e-12);
        assert_eq!(s.max, 0.3);
        let all = mask_stats(&idx, None).unwrap();
        let direct: f64 = all.per_example.iter().map(|(_, f)| f).sum::<f64>() / 3.0;
        assert!((all.mean - direct).abs() <= 1e-12);
        assert!(mask_stats(&idx, Some(Split::Val)).is_err());
    }

    #[test]
    fn normalization_matches_two_pass() {
        let dir = fixture();
        let idx = load_index(dir.path()).unwrap();
        let got = normalization_stats(&idx, Split::Train).unwrap();
        let mut values: [Vec<f64>; 3] = Default::default();
        for e in idx.split(Split::Train) {
            for p in [&e.image_a, &e.image_b] {
                for px in image::open(p).unwrap().into_rgb8().pixels() {
                    for c in 0..3 {
                        values[c].push(px.0[c] as f64 / 255.0);
                    }
                }
            }
        }
        for c in 0..3 {
            let n = values[c].len() as f64;
            let mean = values[c].iter().sum::<f64>() / n;
            let var = values[c].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((got.mean[c] - mean).abs() < 1e-9);
            assert!((got.std[c] - var.sqrt()).abs() < 1e-9);
        }
        assert!(normalization_stats(&idx, Split::Val).is_err());
    }
}

//! Synthetic biased datasets and their storage.

mod dataset;
mod generate;

use thiserror::Error;

pub use dataset::{Dataset, Manifest, Role, Scenario, View};
pub use generate::{generate, generate_multi, GenConfig, MultiGenConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid data configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> GenConfig {
        GenConfig {
            n_rows: n,
            seed: 11,
            ..GenConfig::standard(3)
        }
    }

    fn mean(v: &[bool]) -> f64 {
        v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
    }

    #[test]
    fn deterministic_and_row_local() {
        let a = generate(&small(500)).unwrap();
        let b = generate(&small(500)).unwrap();
        assert_eq!(a, b);
        let longer = generate(&small(800)).unwrap();
        assert_eq!(&longer.y[..500], &a.y[..]);
        let other = generate(&GenConfig { seed: 12, ..small(500) }).unwrap();
        assert_ne!(other.y, a.y);
    }

    #[test]
    fn unbiased_config_has_identical_views() {
        let ds = generate(&small(2000)).unwrap();
        assert_eq!(ds.features, ds.biased_features);
        assert_eq!(ds.y, ds.y_biased);
        assert!((mean(ds.a()) - 0.5).abs() < 0.05);
        assert!((mean(&ds.features[0]) - 0.5).abs() < 0.05);
        // q3 = 1 with probability 0.5 + 0.3 when r = 1
        let r = &ds.features[0];
        let q3 = &ds.features[3];
        let on: Vec<bool> = r.iter().zip(q3).filter(|(r, _)| **r).map(|(_, q)| *q).collect();
        assert!((mean(&on) - 0.8).abs() < 0.04);
    }

    #[test]
    fn label_channel_matches_derived_params() {
        let cfg = GenConfig { n_rows: 40_000, ..small(0) }.with_label_bias(0.4);
        let ds = generate(&cfg).unwrap();
        let rows: Vec<usize> = (0..ds.len()).collect();
        let est = crate::bias::estimate_params(&ds.paired(None, &rows), crate::bias::Direction::Forward).unwrap();
        let want = crate::bias::derive_forward_label_params(0.4, 0.1);
        for (e, w) in est.params.cells().iter().zip(want.cells()) {
            assert!((e - w).abs() < 0.015, "{e} vs {w}");
        }
        assert_eq!(ds.features, ds.biased_features);
    }

    #[test]
    fn feature_joints_match_frequencies() {
        let cfg = GenConfig { n_rows: 40_000, ..small(0) }
            .with_historical_bias(0.3)
            .with_measurement_bias(0.2);
        let ds = generate(&cfg).unwrap();
        for feat in 0..=3 {
            let joints = cfg.feature_channel_joints(feat);
            for (slot, a) in [(0, true), (1, false)] {
                let total: f64 = joints[slot].iter().flatten().sum();
                assert!((total - 1.0).abs() < 1e-12);
                let idx: Vec<usize> = (0..ds.len()).filter(|&r| ds.a()[r] == a).collect();
                for v in [false, true] {
                    for t in [false, true] {
                        let c = idx
                            .iter()
                            .filter(|&&r| ds.features[feat][r] == v && ds.biased_features[feat][r] == t)
                            .count() as f64
                            / idx.len() as f64;
                        let p = joints[slot][v as usize][t as usize];
                        assert!((c - p).abs() < 0.015, "feature {feat} a={a} ({v},{t}): {c} vs {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn historical_bias_only_touches_the_protected_group() {
        let cfg = GenConfig { n_rows: 5000, ..small(0) }.with_historical_bias(0.5);
        let ds = generate(&cfg).unwrap();
        for r in 0..ds.len() {
            if !ds.a()[r] {
                for i in 0..4 {
                    assert_eq!(ds.features[i][r], ds.biased_features[i][r]);
                }
                assert_eq!(ds.y[r], ds.y_biased[r]);
            } else {
                assert!(!ds.biased_features[0][r] || ds.features[0][r]);
            }
        }
    }

    #[test]
    fn views_pick_columns() {
        let cfg = GenConfig { n_rows: 300, ..small(0) }
            .with_measurement_bias(0.5)
            .with_label_bias(0.5);
        let ds = generate(&cfg).unwrap();
        let rows: Vec<usize> = (0..300).collect();
        let v = ds.view(Scenario::Measurement, Role::TrainBiased, &rows).unwrap();
        assert_eq!(v.labels, ds.y);
        assert_eq!(v.features[7][0] > 0.5, ds.biased_features[0][7]);
        let v = ds.view(Scenario::Label, Role::TrainBiased, &rows).unwrap();
        assert_eq!(v.labels, ds.y_biased);
        assert_eq!(v.features[7][0] > 0.5, ds.features[0][7]);
        assert_eq!(v.matrix(true).dim(), (300, 5));
        assert_eq!(v.inputs()[3].len(), 5);
        assert!(ds.view(Scenario::Label, Role::TestBiased, &[300]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let cfg = GenConfig { n_rows: 50, ..small(0) }.with_label_bias(0.3);
        let ds = generate(&cfg).unwrap();
        ds.save(&path, Some(&cfg)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,r,q1,q2,q3,y,r_t,q1_t,q2_t,q3_t,y_t"));
        let (back, manifest) = Dataset::load(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(manifest.generator, Some(cfg));
        std::fs::remove_file(path.with_extension("csv.json")).unwrap();
        let (inferred, _) = Dataset::load(&path).unwrap();
        assert_eq!(inferred, ds);
    }

    #[test]
    fn multi_attribute_chain() {
        let cfg = MultiGenConfig {
            base: GenConfig { n_rows: 20_000, ..small(0) },
            ..MultiGenConfig::default()
        };
        let ds = generate_multi(&cfg).unwrap();
        assert_eq!(ds.sensitive_names, ["hc", "bl", "sm"]);
        // positives survive only if every active stage keeps them
        let pos: Vec<usize> = (0..ds.len()).filter(|&r| ds.y[r]).collect();
        let all_on: Vec<usize> = pos.iter().copied().filter(|&r| ds.sensitive.iter().all(|c| c[r])).collect();
        let kept = all_on.iter().filter(|&&r| ds.y_biased[r]).count() as f64 / all_on.len() as f64;
        assert!((kept - 0.6f64.powi(3)).abs() < 0.04, "{kept}");
        assert!(ds.y_biased.iter().zip(&ds.y).all(|(b, u)| !b || *u));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = small(10);
        c.p_q.pop();
        assert!(generate(&c).is_err());
        let c = GenConfig { beta_label: 1.5, ..small(10) };
        assert!(generate(&c).is_err());
    }
}

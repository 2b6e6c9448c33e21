//! Class-incremental runs on synthetic features, averaged over seeds.

use clane::harness::{run_grid, synth_features, Config, LearnerKind, RunReport, Shots, SynthFeatureSpec};

/// Twelve classes in 256 dimensions with shared low-rank nuisance noise.
fn nuisance_spec(seed: u64) -> SynthFeatureSpec {
    SynthFeatureSpec {
        separation: 0.5,
        noise: 0.04,
        nuisance_rank: 4,
        nuisance_scale: 0.2,
        seed,
        ..Default::default()
    }
}

fn runs(kind: LearnerKind, spec: fn(u64) -> SynthFeatureSpec) -> Vec<RunReport> {
    let mut cfg = Config::default();
    cfg.protocol.learners = vec![kind];
    cfg.protocol.shots = Shots::Count(10);
    cfg.protocol.seeds = 1;
    (0..5)
        .flat_map(|seed| {
            cfg.protocol.seed = seed;
            run_grid(&cfg, &synth_features(&spec(seed)).unwrap()).unwrap()
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_final(runs: &[RunReport]) -> f64 {
    mean(runs.iter().map(|r| r.final_accuracy))
}

#[test]
fn separable_clusters_default_spec() {
    let spec = |seed| SynthFeatureSpec {
        seed,
        ..Default::default()
    };
    assert!(mean_final(&runs(LearnerKind::Ncm, spec)) >= 0.99);
    assert!(mean_final(&runs(LearnerKind::ClpLoihi, spec)) >= 0.95);
}

#[test]
fn prototype_learner_matches_nearest_mean_oracle() {
    let ncm = mean_final(&runs(LearnerKind::Ncm, nuisance_spec));
    let clp = mean_final(&runs(LearnerKind::ClpLoihi, nuisance_spec));
    assert!(ncm >= 0.99, "ncm {ncm}");
    assert!(clp >= 0.95, "clp {clp}");
}

#[test]
fn fine_tuning_forgets_the_first_class() {
    let r = runs(LearnerKind::Finetune, nuisance_spec);
    let first = mean(r.iter().map(|r| r.accuracy_matrix.last().unwrap()[0]));
    assert!(mean_final(&r) < 0.3);
    assert!(first < 0.2, "first class {first}");
}

#[test]
fn single_pass_and_matrix_shape() {
    for kind in LearnerKind::ALL {
        for r in runs(kind, nuisance_spec) {
            assert_eq!(r.max_presentations, 1);
            assert_eq!(r.samples_presented, 120);
            for (i, row) in r.accuracy_matrix.iter().enumerate() {
                assert_eq!(row.len(), i + 1);
                assert!(row.iter().all(|a| (0.0..=1.0).contains(a)));
            }
            assert!(r.forgetting.iter().all(|&f| f >= 0.0));
        }
    }
}

//! Class-incremental protocol: per-class train/test split, shot selection,
//! single-pass learning and test-after-each-class evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synth::FeaturesByClass;
use super::{HarnessError, Result};
use crate::agg_norm::NormError;
use crate::baselines::{FeatureSet, Sample};
use crate::learner::{HeadOps, Learner, LearnerError};

/// Training samples presented per class. Written as an integer or `"full"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShotsRepr", into = "ShotsRepr")]
pub enum Shots {
    Count(usize),
    /// Every training sample of the class.
    Full,
}

impl Default for Shots {
    fn default() -> Self {
        Shots::Count(10)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = String;

    fn try_from(r: ShotsRepr) -> std::result::Result<Self, String> {
        match r {
            ShotsRepr::Count(n) => Ok(Shots::Count(n)),
            ShotsRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Shots> for ShotsRepr {
    fn from(s: Shots) -> Self {
        match s {
            Shots::Count(n) => ShotsRepr::Count(n),
            Shots::Full => ShotsRepr::Word("full".into()),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Shots::Full),
            _ => s
                .parse()
                .map(Shots::Count)
                .map_err(|_| format!("shots must be a count or \"full\", got {s:?}")),
        }
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Count(n) => write!(f, "{n}"),
            Shots::Full => f.write_str("full"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub shots: Shots,
    /// Fraction of each class held out from learning for evaluation.
    pub test_fraction: f64,
    /// Seed of the train/test partition; fixed across runs.
    pub split_seed: u64,
    /// Explicit class order; `None` means a shuffle seeded by the run seed.
    pub class_order: Option<Vec<u32>>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            shots: Shots::default(),
            test_fraction: 0.2,
            split_seed: 0,
            class_order: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(HarnessError::Config(format!(
                "test_fraction {} not in (0, 1)",
                self.test_fraction
            )));
        }
        if self.shots == Shots::Count(0) {
            return Err(HarnessError::Config("shots must be at least 1".into()));
        }
        Ok(())
    }
}

/// Indices into one class's sample list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassPlan {
    pub class: u32,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Presentation order and per-class sample indices of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Episode {
    pub steps: Vec<ClassPlan>,
}

fn mix(seed: u64, class: u32) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (class as u64).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

/// Build the episode for `classes` and run `seed`. Every class must have
/// enough samples for a nonempty test split and the requested shots.
pub fn plan_episode(cfg: &ProtocolConfig, classes: &[u32], data: &FeaturesByClass, seed: u64) -> Result<Episode> {
    cfg.validate()?;
    if classes.is_empty() {
        return Err(HarnessError::Config("no classes to learn".into()));
    }
    let order: Vec<u32> = match &cfg.class_order {
        Some(order) => {
            let mut a = order.clone();
            let mut b = classes.to_vec();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(HarnessError::Config(
                    "class_order must be a permutation of the protocol classes".into(),
                ));
            }
            order.clone()
        }
        None => {
            let mut order = classes.to_vec();
            order.sort_unstable();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order
        }
    };
    let mut steps = Vec::with_capacity(order.len());
    for &class in &order {
        let samples = data
            .get(&class)
            .ok_or_else(|| HarnessError::MissingData(format!("no samples for class {class}")))?;
        let n = samples.len();
        if n < 2 {
            return Err(HarnessError::MissingData(format!(
                "class {class} has {n} samples, need at least 2"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.split_seed, class)));
        let n_test = ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n - 1);
        let test = idx[..n_test].to_vec();
        let mut pool = idx[n_test..].to_vec();
        pool.sort_unstable();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, class)));
        let train = match cfg.shots {
            Shots::Full => pool,
            Shots::Count(k) if k <= pool.len() => pool[..k].to_vec(),
            Shots::Count(k) => {
                return Err(HarnessError::MissingData(format!(
                    "class {class} has {} training samples, {k} shots requested",
                    pool.len()
                )))
            }
        };
        steps.push(ClassPlan { class, train, test });
    }
    Ok(Episode { steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub learner: String,
    pub seed: u64,
    pub class_order: Vec<u32>,
    /// Accuracy over the test samples of all classes seen so far, per step.
    pub cumulative_accuracy: Vec<f64>,
    pub final_accuracy: f64,
    /// Row `i` holds per-class accuracy of the first `i + 1` classes.
    pub accuracy_matrix: Vec<Vec<f64>>,
    /// Best accuracy over steps minus final accuracy, per class in order.
    pub forgetting: Vec<f64>,
    pub parameter_count: usize,
    pub prototype_count: usize,
    /// Learn calls made; equals the number of planned training samples.
    pub samples_presented: u64,
    /// Largest number of times any training sample was presented.
    pub max_presentations: u32,
    /// Training samples the learner rejected (all-zero features).
    pub rejected_samples: u64,
    pub head_ops: HeadOps,
}

/// Group samples by label, keeping file order within each class.
pub fn group_by_class(set: &FeatureSet) -> FeaturesByClass {
    let mut out = FeaturesByClass::new();
    for s in &set.samples {
        out.entry(s.label).or_default().push(s.features.clone());
    }
    out
}

/// Flatten grouped features, classes in ascending order. Fails on mixed
/// dimensions.
pub fn to_feature_set(data: &FeaturesByClass) -> Result<FeatureSet> {
    let dim = data.values().flatten().next().map_or(0, |v| v.len());
    let samples = data
        .iter()
        .flat_map(|(&label, vs)| {
            vs.iter().map(move |v| Sample {
                label,
                features: v.clone(),
            })
        })
        .collect();
    Ok(FeatureSet::new(dim, samples)?)
}

fn is_zero_vector(e: &LearnerError) -> bool {
    matches!(e, LearnerError::Norm(NormError::ZeroVector))
}

/// Run one class-incremental episode. Data for every class is checked
/// before any learning happens.
pub fn run_incremental(
    cfg: &ProtocolConfig,
    classes: &[u32],
    data: &FeaturesByClass,
    seed: u64,
    learner: &mut dyn Learner,
) -> Result<RunReport> {
    let episode = plan_episode(cfg, classes, data, seed)?;
    let mut presentations: Vec<Vec<u32>> = episode.steps.iter().map(|s| vec![0; data[&s.class].len()]).collect();
    let mut presented = 0u64;
    let mut rejected = 0u64;
    let mut matrix: Vec<Vec<f64>> = Vec::with_capacity(episode.steps.len());
    let mut cumulative = Vec::with_capacity(episode.steps.len());

    for (step, plan) in episode.steps.iter().enumerate() {
        let samples = &data[&plan.class];
        for &i in &plan.train {
            presentations[step][i] += 1;
            presented += 1;
            match learner.learn(&samples[i], plan.class) {
                Ok(()) => {}
                Err(e) if is_zero_vector(&e) => rejected += 1,
                Err(e) => return Err(e.into()),
            }
        }
        let mut row = Vec::with_capacity(step + 1);
        let (mut hits, mut total) = (0usize, 0usize);
        for seen in &episode.steps[..=step] {
            let test = &data[&seen.class];
            let mut correct = 0;
            for &i in &seen.test {
                match learner.predict(&test[i]) {
                    Ok(label) => correct += (label == seen.class) as usize,
                    Err(e) if is_zero_vector(&e) || matches!(e, LearnerError::Empty) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            hits += correct;
            total += seen.test.len();
            row.push(correct as f64 / seen.test.len() as f64);
        }
        cumulative.push(hits as f64 / total as f64);
        matrix.push(row);
    }

    let last = matrix.last().expect("at least one step").clone();
    let forgetting = (0..last.len())
        .map(|c| {
            let best = matrix[c..].iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
            best - last[c]
        })
        .collect();
    Ok(RunReport {
        learner: learner.name().to_string(),
        seed,
        class_order: episode.steps.iter().map(|s| s.class).collect(),
        final_accuracy: *cumulative.last().expect("at least one step"),
        cumulative_accuracy: cumulative,
        accuracy_matrix: matrix,
        forgetting,
        parameter_count: learner.parameter_count(),
        prototype_count: learner.prototype_count(),
        samples_presented: presented,
        max_presentations: presentations.iter().flatten().copied().max().unwrap_or(0),
        rejected_samples: rejected,
        head_ops: learner.head_ops(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Ncm;

    fn toy(classes: u32, per_class: usize) -> FeaturesByClass {
        (0..classes)
            .map(|c| {
                let samples = (0..per_class)
                    .map(|i| {
                        let mut v = vec![0.0; classes as usize];
                        v[c as usize] = 1.0 + i as f64 * 0.01;
                        v
                    })
                    .collect();
                (c, samples)
            })
            .collect()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let data = toy(4, 50);
        let cfg = ProtocolConfig::default();
        let ep = plan_episode(&cfg, &[0, 1, 2, 3], &data, 3).unwrap();
        for plan in &ep.steps {
            assert_eq!(plan.test.len(), 10);
            assert_eq!(plan.train.len(), 10);
            assert!(plan.train.iter().all(|i| !plan.test.contains(i)));
        }
        // the test split does not depend on the run seed
        let other = plan_episode(&cfg, &[0, 1, 2, 3], &data, 4).unwrap();
        let test_of = |ep: &Episode, c: u32| ep.steps.iter().find(|p| p.class == c).unwrap().test.clone();
        assert_eq!(test_of(&ep, 2), test_of(&other, 2));
    }

    #[test]
    fn class_order_is_a_seeded_permutation() {
        let data = toy(6, 20);
        let cfg = ProtocolConfig::default();
        let classes: Vec<u32> = (0..6).collect();
        let order = |s| -> Vec<u32> {
            plan_episode(&cfg, &classes, &data, s)
                .unwrap()
                .steps
                .iter()
                .map(|p| p.class)
                .collect()
        };
        let mut sorted = order(1);
        assert_eq!(order(1), sorted);
        sorted.sort_unstable();
        assert_eq!(sorted, classes);
        let explicit = ProtocolConfig {
            class_order: Some(vec![5, 4, 3, 2, 1, 0]),
            ..Default::default()
        };
        assert_eq!(plan_episode(&explicit, &classes, &data, 9).unwrap().steps[0].class, 5);
        let bad = ProtocolConfig {
            class_order: Some(vec![5, 4]),
            ..Default::default()
        };
        assert!(plan_episode(&bad, &classes, &data, 9).is_err());
    }

    #[test]
    fn missing_or_short_class_fails_before_learning() {
        let data = toy(3, 20);
        let mut ncm = Ncm::new(3);
        let err = run_incremental(&ProtocolConfig::default(), &[0, 1, 7], &data, 0, &mut ncm);
        assert!(matches!(err, Err(HarnessError::MissingData(_))));
        assert_eq!(ncm.prototype_count(), 0);
        let too_many = ProtocolConfig {
            shots: Shots::Count(17),
            ..Default::default()
        };
        assert!(run_incremental(&too_many, &[0, 1], &data, 0, &mut ncm).is_err());
    }

    #[test]
    fn single_class_run() {
        let data = toy(2, 15);
        let mut ncm = Ncm::new(2);
        let r = run_incremental(&ProtocolConfig::default(), &[1], &data, 0, &mut ncm).unwrap();
        assert_eq!(r.cumulative_accuracy, vec![1.0]);
        assert_eq!(r.accuracy_matrix, vec![vec![1.0]]);
        assert_eq!(r.forgetting, vec![0.0]);
    }

    #[test]
    fn report_shape_and_audit() {
        let data = toy(5, 30);
        let mut ncm = Ncm::new(5);
        let cfg = ProtocolConfig {
            shots: Shots::Count(7),
            ..Default::default()
        };
        let r = run_incremental(&cfg, &[0, 1, 2, 3, 4], &data, 2, &mut ncm).unwrap();
        for (i, row) in r.accuracy_matrix.iter().enumerate() {
            assert_eq!(row.len(), i + 1);
        }
        assert_eq!(r.samples_presented, 35);
        assert_eq!(r.max_presentations, 1);
        assert_eq!(r.final_accuracy, 1.0);
        assert!(r.forgetting.iter().all(|&f| f >= 0.0));
        let full = ProtocolConfig {
            shots: Shots::Full,
            ..Default::default()
        };
        let r = run_incremental(&full, &[0, 1], &data, 2, &mut Ncm::new(5)).unwrap();
        assert_eq!(r.samples_presented, 48);
    }
}

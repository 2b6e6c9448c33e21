use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};

/// Which ids count as "every fourth class".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoldoutRule {
    /// Ids 0, 4, 8, ...
    #[default]
    ZeroBased,
    /// The 4th, 8th, ... class counting from one: ids 3, 7, 11, ...
    OneBased,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub base: Vec<u32>,
    pub holdout: Vec<u32>,
}

/// Hold out every fourth class among the first `4 * (n / 4)` ids.
pub fn split_classes(num_classes: u32, rule: HoldoutRule) -> Result<DatasetSplit> {
    if num_classes < 4 {
        return Err(HarnessError::Config(format!(
            "need at least 4 classes to split, got {num_classes}"
        )));
    }
    let offset = match rule {
        HoldoutRule::ZeroBased => 0,
        HoldoutRule::OneBased => 3,
    };
    let limit = num_classes - num_classes % 4;
    let (holdout, base) = (0..num_classes).partition(|&c| c < limit && c % 4 == offset);
    Ok(DatasetSplit { base, holdout })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_classes() {
        let s = split_classes(50, HoldoutRule::ZeroBased).unwrap();
        assert_eq!(s.holdout, (0..12).map(|i| 4 * i).collect::<Vec<_>>());
        assert_eq!(s.base.len(), 38);
        let o = split_classes(50, HoldoutRule::OneBased).unwrap();
        assert_eq!(o.holdout, (0..12).map(|i| 4 * i + 3).collect::<Vec<_>>());
        assert_eq!(o.base.len(), 38);
    }

    #[test]
    fn small_counts() {
        let s = split_classes(8, HoldoutRule::ZeroBased).unwrap();
        assert_eq!((s.holdout, s.base.len()), (vec![0, 4], 6));
        let s = split_classes(4, HoldoutRule::ZeroBased).unwrap();
        assert_eq!((s.holdout, s.base), (vec![0], vec![1, 2, 3]));
        assert!(split_classes(3, HoldoutRule::ZeroBased).is_err());
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        for n in 4..80 {
            for rule in [HoldoutRule::ZeroBased, HoldoutRule::OneBased] {
                let s = split_classes(n, rule).unwrap();
                assert_eq!(s.holdout.len() as u32, n / 4);
                let mut all: Vec<u32> = s.base.iter().chain(&s.holdout).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }
}

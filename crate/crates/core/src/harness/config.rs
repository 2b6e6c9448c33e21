//! TOML run configuration with `section.key=value` overrides.
//!
//! ```toml
//! [ingest.binning]
//! window_us = 40000
//! [extractor]
//! weights = "net.snnw"
//! [norm]
//! frac_bits = 15
//! [learner.clp]
//! novelty_threshold = 0.3
//! [protocol]
//! learners = ["clp-loihi", "ncm"]
//! shots = 10
//! seeds = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    split_classes, HarnessError, HoldoutRule, LearnerConfig, LearnerKind, ProtocolConfig, Result, Shots,
    SynthEventSpec, SynthFeatureSpec,
};
use crate::agg_norm::{NormConfig, Normalizer};
use crate::event_ingest::{BinningConfig, EventFormat};
use crate::snn::{NetworkGeometry, SyntheticNetParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub binning: BinningConfig,
    /// Sensor size assumed for CSV inputs, which carry none.
    pub csv_width: u16,
    pub csv_height: u16,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            binning: BinningConfig::default(),
            csv_width: 1280,
            csv_height: 800,
        }
    }
}

impl IngestConfig {
    /// Binary files start with their magic; anything else is read as CSV.
    pub fn format_of(&self, bytes: &[u8]) -> EventFormat {
        if bytes.starts_with(b"EVT1") {
            EventFormat::BinaryV1
        } else {
            EventFormat::Csv {
                width: self.csv_width,
                height: self.csv_height,
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    /// Weight file; a seeded random network is used when absent.
    pub weights: Option<PathBuf>,
    /// Seed of the random network.
    pub seed: u64,
    /// Threshold input counts to single spikes.
    pub binary_input: bool,
    pub geometry: NetworkGeometry,
    pub synthetic: SyntheticNetParams,
}

/// Which classes of a dataset the protocol learns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSet {
    #[default]
    All,
    /// Only the held-out classes of the split.
    Holdout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub learners: Vec<LearnerKind>,
    pub shots: Shots,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub class_order: Option<Vec<u32>>,
    pub classes: ClassSet,
    pub holdout_rule: HoldoutRule,
    /// First run seed.
    pub seed: u64,
    /// Runs per learner, with seeds `seed, seed + 1, ...`.
    pub seeds: u64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            learners: vec![LearnerKind::ClpLoihi],
            shots: p.shots,
            test_fraction: p.test_fraction,
            split_seed: p.split_seed,
            class_order: p.class_order,
            classes: ClassSet::All,
            holdout_rule: HoldoutRule::default(),
            seed: 0,
            seeds: 5,
        }
    }
}

impl ProtocolSection {
    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            shots: self.shots,
            test_fraction: self.test_fraction,
            split_seed: self.split_seed,
            class_order: self.class_order.clone(),
        }
    }

    /// Classes to learn among those present in the data.
    pub fn protocol_classes(&self, available: &[u32]) -> Result<Vec<u32>> {
        let mut all = available.to_vec();
        all.sort_unstable();
        all.dedup();
        match self.classes {
            ClassSet::All => Ok(all),
            ClassSet::Holdout => {
                let n = all.last().map_or(0, |&c| c + 1);
                Ok(split_classes(n, self.holdout_rule)?.holdout)
            }
        }
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub features: SynthFeatureSpec,
    pub events: SynthEventSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ingest: IngestConfig,
    pub extractor: ExtractorConfig,
    pub norm: NormConfig,
    pub learner: LearnerConfig,
    pub protocol: ProtocolSection,
    pub synth: SynthConfig,
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// Parse `value` as a TOML value, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Apply one `a.b.c=value` override, creating tables as needed.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("bad override key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override key {key:?}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), override_value(value.trim()));
    Ok(())
}

/// Window length in microseconds from `40ms`, `500us`, `1s` or a bare
/// microsecond count.
pub fn parse_window(text: &str) -> Result<u64> {
    let t = text.trim();
    let (digits, factor) = if let Some(d) = t.strip_suffix("ms") {
        (d, 1_000)
    } else if let Some(d) = t.strip_suffix("us") {
        (d, 1)
    } else if let Some(d) = t.strip_suffix('s') {
        (d, 1_000_000)
    } else {
        (t, 1)
    };
    let v: u64 = digits
        .trim()
        .parse()
        .map_err(|_| config_err(format!("bad window {text:?}")))?;
    match v.checked_mul(factor) {
        Some(us) if us > 0 => Ok(us),
        _ => Err(config_err(format!("window {text:?} must be positive"))),
    }
}

impl Config {
    /// Build from TOML text plus overrides, then validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(config_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = table.try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `path` (or defaults when `None`) and apply overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| HarnessError::File {
                path: p.display().to_string(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        Normalizer::new(self.norm)?;
        self.learner.clp.validate()?;
        self.protocol.protocol_config().validate()?;
        if self.protocol.learners.is_empty() {
            return Err(config_err("protocol.learners is empty"));
        }
        if self.protocol.seeds == 0 {
            return Err(config_err("protocol.seeds must be at least 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::from_toml("", &[]).unwrap(), Config::default());
    }

    #[test]
    fn sections_and_overrides() {
        let text =
            "[protocol]\nlearners = [\"ncm\", \"slda\"]\nshots = \"full\"\n[learner.clp]\nnovelty_threshold = 0.4\n";
        let cfg = Config::from_toml(
            text,
            &[
                "protocol.shots=5".into(),
                "ingest.binning.window_us=10000".into(),
                "protocol.holdout_rule=one-based".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.protocol.learners, vec![LearnerKind::Ncm, LearnerKind::Slda]);
        assert_eq!(cfg.protocol.shots, Shots::Count(5));
        assert_eq!(cfg.learner.clp.novelty_threshold, 0.4);
        assert_eq!(cfg.ingest.binning.window_us, 10_000);
        assert_eq!(cfg.protocol.holdout_rule, HoldoutRule::OneBased);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Config::from_toml("[protocol]\nshotz = 3\n", &[]).is_err());
        assert!(Config::from_toml("", &["norm.lut_bits=2".into()]).is_err());
        assert!(Config::from_toml("", &["protocol.shots=0".into()]).is_err());
        assert!(Config::from_toml("", &["learner.clp.novelty_threshold=1.5".into()]).is_err());
        assert!(Config::from_toml("", &["protocol".into()]).is_err());
        assert!(Config::from_toml("", &["protocol.learners=[\"lda\"]".into()]).is_err());
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("40ms").unwrap(), 40_000);
        assert_eq!(parse_window("2ms").unwrap(), 2_000);
        assert_eq!(parse_window("750us").unwrap(), 750);
        assert_eq!(parse_window("1s").unwrap(), 1_000_000);
        assert_eq!(parse_window("123").unwrap(), 123);
        assert!(parse_window("0ms").is_err());
        assert!(parse_window("fast").is_err());
    }

    #[test]
    fn class_selection() {
        let mut p = ProtocolSection::default();
        let avail: Vec<u32> = (0..50).rev().collect();
        assert_eq!(p.protocol_classes(&avail).unwrap(), (0..50).collect::<Vec<_>>());
        p.classes = ClassSet::Holdout;
        let held = p.protocol_classes(&avail).unwrap();
        assert_eq!(held.len(), 12);
        assert_eq!(held[1], 4);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = Config::default();
        cfg.protocol.shots = Shots::Full;
        cfg.extractor.weights = Some("w.snnw".into());
        cfg.protocol.class_order = Some(vec![2, 0, 1]);
        assert_eq!(Config::from_toml(&cfg.to_toml(), &[]).unwrap(), cfg);
    }
}

//! Sweep configuration as TOML.
//!
//! A materialised config always spells out every field, so a results directory carries
//! the full description of how it was produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_gen::{GenerateOptions, Interval, NoiseFamily, Snr};
use crate::error::{Error, Result};
use crate::nn::{Activation, NetworkConfig, Optimizer, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub ensemble_sizes: Vec<usize>,
    pub orders: Vec<usize>,
    pub noise_families: Vec<NoiseFamily>,
    pub snrs: Vec<Snr>,
    /// Independent seeds per cell.
    pub repeats: usize,
    pub base_seed: u64,
}

impl SweepGrid {
    /// Depths 1..=15, the wide width ladder, m up to 40, every order/family/SNR.
    pub fn full() -> Self {
        SweepGrid {
            depths: (1..=15).collect(),
            widths: vec![6, 8, 10, 16, 20, 30, 50, 80, 140, 300, 600, 1000],
            ensemble_sizes: vec![1, 5, 10, 20, 30, 40],
            orders: vec![2, 3, 4, 5, 7, 10],
            noise_families: NoiseFamily::ALL.to_vec(),
            snrs: vec![Snr::Ratio(10.0), Snr::Ratio(20.0), Snr::Ratio(30.0)],
            repeats: 1,
            base_seed: 0,
        }
    }

    /// A grid sized for a single workstation.
    pub fn desk() -> Self {
        SweepGrid {
            depths: (1..=8).collect(),
            widths: vec![6, 16, 30, 64, 128],
            ensemble_sizes: vec![1, 5, 10, 20],
            orders: vec![2, 3, 5, 7],
            noise_families: vec![NoiseFamily::Gaussian, NoiseFamily::Exponential],
            snrs: vec![Snr::Ratio(10.0), Snr::Ratio(20.0)],
            repeats: 3,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check<T: PartialEq>(name: &'static str, values: &[T]) -> Result<()> {
            if values.is_empty() {
                return Err(Error::invalid(name, "must not be empty"));
            }
            for (i, v) in values.iter().enumerate() {
                if values[..i].contains(v) {
                    return Err(Error::invalid(name, "contains duplicate values"));
                }
            }
            Ok(())
        }
        check("depths", &self.depths)?;
        check("widths", &self.widths)?;
        check("ensemble_sizes", &self.ensemble_sizes)?;
        check("orders", &self.orders)?;
        check("noise_families", &self.noise_families)?;
        check("snrs", &self.snrs)?;
        for (name, values) in [
            ("depths", &self.depths),
            ("widths", &self.widths),
            ("ensemble_sizes", &self.ensemble_sizes),
        ] {
            if values.contains(&0) {
                return Err(Error::invalid(name, "values must be >= 1"));
            }
        }
        if self.orders.contains(&0) {
            return Err(Error::invalid("orders", "a constant signal has no variance to target an SNR against"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be >= 1"));
        }
        Ok(())
    }

    /// Number of (cell, repeat) runs.
    pub fn run_count(&self) -> usize {
        self.depths.len()
            * self.widths.len()
            * self.ensemble_sizes.len()
            * self.orders.len()
            * self.noise_families.len()
            * self.snrs.len()
            * self.repeats
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    /// In-distribution samples per dataset (train + test).
    pub size: usize,
    pub test_fraction: f64,
    pub domain: Interval,
    /// Out-of-distribution inputs are drawn from `ood_domain` minus `domain`.
    pub ood_domain: Option<Interval>,
}

impl Default for DataSettings {
    fn default() -> Self {
        let g = GenerateOptions::default();
        DataSettings {
            size: g.size,
            test_fraction: g.test_fraction,
            domain: g.domain,
            ood_domain: g.ood_domain,
        }
    }
}

impl DataSettings {
    pub fn options(&self, seed: u64) -> GenerateOptions {
        GenerateOptions {
            size: self.size,
            domain: self.domain,
            test_fraction: self.test_fraction,
            ood_domain: self.ood_domain,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSettings {
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        let n = NetworkConfig::default();
        NetworkSettings {
            activation: n.activation,
            dropout_rate: n.dropout_rate,
        }
    }
}

/// [`TrainConfig`] without the seed; `early_stop_patience = 0` disables early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub early_stop_patience: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            early_stop_patience: t.early_stop_patience.unwrap_or(0),
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, train_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            early_stop_patience: (self.early_stop_patience > 0).then_some(self.early_stop_patience),
            train_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    pub data: DataSettings,
    pub network: NetworkSettings,
    pub train: TrainSettings,
}

impl SweepConfig {
    pub fn full() -> Self {
        SweepConfig {
            grid: SweepGrid::full(),
            data: DataSettings::default(),
            network: NetworkSettings::default(),
            train: TrainSettings::default(),
        }
    }

    /// The desk grid with a lighter data and training budget.
    pub fn desk() -> Self {
        SweepConfig {
            grid: SweepGrid::desk(),
            data: DataSettings {
                size: DESK_DATA_SIZE,
                ..DataSettings::default()
            },
            network: NetworkSettings::default(),
            train: TrainSettings {
                epochs: DESK_EPOCHS,
                ..TrainSettings::default()
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::invalid("preset", format!("unknown preset {other:?} (full, desk)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.data.size < 10 {
            return Err(Error::invalid("data.size", "must be >= 10"));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::invalid("data.test_fraction", "must lie in (0, 1)"));
        }
        Interval::new(self.data.domain.lo, self.data.domain.hi)?;
        if let Some(o) = self.data.ood_domain {
            Interval::new(o.lo, o.hi)?;
        }
        if !(0.0..1.0).contains(&self.network.dropout_rate) {
            return Err(Error::invalid("network.dropout_rate", "must lie in [0, 1)"));
        }
        self.train.with_seed(0).validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `key=value` overrides (dotted keys, TOML values; bare words are taken as
    /// strings) and re-validates.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("round trip");
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = parse_toml_value(raw.trim());
            set_dotted(&mut table, key.trim(), value)?;
        }
        let cfg: SweepConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const DESK_DATA_SIZE: usize = 3000;
pub const DESK_EPOCHS: usize = 200;

fn parse_toml_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?}: {part:?} is not a table")))?;
    }
    Err(Error::Config("empty override key".into()))
}

//! Experiment configuration, read from TOML.
//!
//! Every section and field is optional; missing values take the defaults
//! below. Unknown keys are rejected. Relative paths are resolved against
//! the directory holding the config file.
//!
//! ```toml
//! format_version = 1
//!
//! [chemistry]
//! molecules = 100000        # molecules per droplet in sampled runs
//! efficiency = 1.0          # fraction of intended displacements that complete
//! spurious_rate = 0.0       # fraction of inert molecules that react anyway
//! gain = 1000.0             # seesaw gain when replenishment is limited
//! output_cap = 1.0
//! replenishment_excess = true
//! seed = 0
//!
//! [device]
//! k_physical = 784
//! channel_width_um = 200.0
//! footprint_factor = 6
//! # cell_area_mm2 = 0.01   # overrides the geometric estimate
//!
//! [device.timing]           # seconds
//! transport_s = 120.0
//! mult_s = 7200.0
//! merge_s = 3600.0
//! displacement_s = 3600.0
//! threshold_s = 3600.0
//! gate_s = 3600.0
//! translation_s = 3600.0
//! nick_s = 3732.0
//!
//! [network]
//! spec = "model.json"       # network file for infer and compare
//! layer_sizes = [64, 64, 10]
//! readout = "pre-activation" # or "step"
//!
//! [run]
//! mode = "ideal"            # float, ideal, sampled or fluidics
//! trace = "run.trace"
//! report = "report.csv"
//!
//! [training]
//! epochs = 60
//! batch_size = 32
//! learning_rate = 0.1
//! lr_decay = 0.97
//! surrogate_slope = 10.0
//! logit_scale = 5.0
//! init_max = 0.2
//! threshold_init = 0.3
//! min_threshold = 0.001
//! seed = 0
//! holdout = 360
//! split_seed = 0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nicknet_core::ann::{ChemistrySettings, ExecutionMode, Readout, TrainConfig};
use nicknet_core::chem::{ChemistryErrorModel, ChemistryMode};
use nicknet_core::device::{DeviceConfig, Geometry, TimingConstants};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub chemistry: ChemistrySection,
    pub device: DeviceSection,
    pub network: NetworkSection,
    pub run: RunSection,
    pub training: TrainingSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            chemistry: ChemistrySection::default(),
            device: DeviceSection::default(),
            network: NetworkSection::default(),
            run: RunSection::default(),
            training: TrainingSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChemistrySection {
    pub molecules: u64,
    pub efficiency: f64,
    pub spurious_rate: f64,
    pub gain: f64,
    pub output_cap: f64,
    pub replenishment_excess: bool,
    pub seed: u64,
}

impl Default for ChemistrySection {
    fn default() -> Self {
        Self {
            molecules: 100_000,
            efficiency: 1.0,
            spurious_rate: 0.0,
            gain: 1e3,
            output_cap: 1.0,
            replenishment_excess: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    pub k_physical: u32,
    pub channel_width_um: f64,
    pub footprint_factor: u32,
    pub cell_area_mm2: Option<f64>,
    pub timing: TimingSection,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let g = Geometry::PESSIMISTIC;
        Self {
            k_physical: 784,
            channel_width_um: g.channel_width_um,
            footprint_factor: g.footprint_factor,
            cell_area_mm2: None,
            timing: TimingSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub transport_s: f64,
    pub mult_s: f64,
    pub merge_s: f64,
    pub displacement_s: f64,
    pub threshold_s: f64,
    pub gate_s: f64,
    pub translation_s: f64,
    pub nick_s: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        let t = TimingConstants::DEFAULT;
        Self {
            transport_s: t.transport,
            mult_s: t.mult,
            merge_s: t.merge,
            displacement_s: t.displacement,
            threshold_s: t.threshold,
            gate_s: t.gate,
            translation_s: t.translation,
            nick_s: t.nick,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutName {
    #[default]
    PreActivation,
    Step,
}

impl From<ReadoutName> for Readout {
    fn from(r: ReadoutName) -> Self {
        match r {
            ReadoutName::PreActivation => Readout::PreActivation,
            ReadoutName::Step => Readout::Step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub spec: Option<PathBuf>,
    pub layer_sizes: Vec<usize>,
    pub readout: ReadoutName,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            spec: None,
            layer_sizes: vec![64, 64, 10],
            readout: ReadoutName::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Float,
    #[default]
    Ideal,
    Sampled,
    Fluidics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: ModeName,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub surrogate_slope: f64,
    pub logit_scale: f64,
    pub init_max: f64,
    pub threshold_init: f64,
    pub min_threshold: f64,
    pub seed: u64,
    /// Samples held out for evaluation.
    pub holdout: usize,
    pub split_seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            lr_decay: t.lr_decay,
            surrogate_slope: t.surrogate_slope,
            logit_scale: t.logit_scale,
            init_max: t.init_max,
            threshold_init: t.threshold_init,
            min_threshold: t.min_threshold,
            seed: t.seed,
            holdout: 360,
            split_seed: 0,
        }
    }
}

fn check(ok: bool, field: &str, value: impl std::fmt::Display, range: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, format!("{value} is outside {range}")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    check(v > 0.0 && v.is_finite(), field, v, "(0, inf)")
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    check(v >= 0.0 && v.is_finite(), field, v, "[0, inf)")
}

impl ExperimentConfig {
    /// Reads, resolves paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    /// Parses and validates without touching the file system.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(String::new, |s| {
                text[..s.start].lines().count().to_string()
            });
            let field = if field.is_empty() { "<file>".to_string() } else { format!("line {field}") };
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.format_version == FORMAT_VERSION,
            "format_version",
            self.format_version,
            &format!("{{{FORMAT_VERSION}}}"),
        )?;

        let c = &self.chemistry;
        check(c.molecules >= 1, "chemistry.molecules", c.molecules, "[1, inf)")?;
        check(c.efficiency > 0.0 && c.efficiency <= 1.0, "chemistry.efficiency", c.efficiency, "(0, 1]")?;
        check(
            (0.0..1.0).contains(&c.spurious_rate),
            "chemistry.spurious_rate",
            c.spurious_rate,
            "[0, 1)",
        )?;
        positive("chemistry.gain", c.gain)?;
        check(c.output_cap > 0.0 && c.output_cap <= 1.0, "chemistry.output_cap", c.output_cap, "(0, 1]")?;

        let d = &self.device;
        check(d.k_physical >= 1, "device.k_physical", d.k_physical, "[1, inf)")?;
        positive("device.channel_width_um", d.channel_width_um)?;
        check(d.footprint_factor >= 1, "device.footprint_factor", d.footprint_factor, "[1, inf)")?;
        if let Some(a) = d.cell_area_mm2 {
            positive("device.cell_area_mm2", a)?;
        }
        let t = &d.timing;
        for (name, v) in [
            ("transport_s", t.transport_s),
            ("mult_s", t.mult_s),
            ("merge_s", t.merge_s),
            ("displacement_s", t.displacement_s),
            ("threshold_s", t.threshold_s),
            ("gate_s", t.gate_s),
            ("translation_s", t.translation_s),
            ("nick_s", t.nick_s),
        ] {
            nonnegative(&format!("device.timing.{name}"), v)?;
        }

        let n = &self.network;
        check(
            n.layer_sizes.len() >= 2 && !n.layer_sizes.contains(&0),
            "network.layer_sizes",
            format!("{:?}", n.layer_sizes),
            "at least two positive sizes",
        )?;

        let tr = &self.training;
        check(tr.epochs >= 1, "training.epochs", tr.epochs, "[1, inf)")?;
        check(tr.batch_size >= 1, "training.batch_size", tr.batch_size, "[1, inf)")?;
        positive("training.learning_rate", tr.learning_rate)?;
        check(tr.lr_decay > 0.0 && tr.lr_decay <= 1.0, "training.lr_decay", tr.lr_decay, "(0, 1]")?;
        positive("training.surrogate_slope", tr.surrogate_slope)?;
        positive("training.logit_scale", tr.logit_scale)?;
        positive("training.init_max", tr.init_max)?;
        check(
            (0.0..=1.0).contains(&tr.threshold_init),
            "training.threshold_init",
            tr.threshold_init,
            "[0, 1]",
        )?;
        positive("training.min_threshold", tr.min_threshold)?;
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.network.spec {
            join(p);
            if !p.is_file() {
                return Err(Error::config("network.spec", format!("{} does not exist", p.display())));
            }
        }
        for (field, p) in [("run.trace", &mut self.run.trace), ("run.report", &mut self.run.report)] {
            if let Some(p) = p {
                join(p);
                let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                if !dir.is_dir() {
                    return Err(Error::config(field, format!("directory {} does not exist", dir.display())));
                }
            }
        }
        Ok(())
    }

    pub fn error_model(&self) -> ChemistryErrorModel {
        ChemistryErrorModel {
            efficiency: self.chemistry.efficiency,
            spurious_rate: self.chemistry.spurious_rate,
        }
    }

    pub fn chemistry_settings(&self) -> ChemistrySettings {
        ChemistrySettings {
            err: self.error_model(),
            output_cap: self.chemistry.output_cap,
            replenishment_excess: self.chemistry.replenishment_excess,
            gain: self.chemistry.gain,
        }
    }

    pub fn timing(&self) -> TimingConstants {
        let t = &self.device.timing;
        TimingConstants {
            transport: t.transport_s,
            mult: t.mult_s,
            merge: t.merge_s,
            displacement: t.displacement_s,
            threshold: t.threshold_s,
            gate: t.gate_s,
            translation: t.translation_s,
            nick: t.nick_s,
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            channel_width_um: self.device.channel_width_um,
            footprint_factor: self.device.footprint_factor,
            cell_area_mm2: self.device.cell_area_mm2,
        }
    }

    pub fn device_config(&self) -> Result<DeviceConfig> {
        Ok(DeviceConfig::new(self.device.k_physical, self.geometry(), self.timing())?)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            lr_decay: t.lr_decay,
            surrogate_slope: t.surrogate_slope,
            logit_scale: t.logit_scale,
            init_max: t.init_max,
            threshold_init: t.threshold_init,
            min_threshold: t.min_threshold,
            seed: t.seed,
        }
    }

    pub fn execution_mode(&self, mode: ModeName) -> ExecutionMode {
        let (molecules, seed) = (self.chemistry.molecules, self.chemistry.seed);
        match mode {
            ModeName::Float => ExecutionMode::FloatReference,
            ModeName::Ideal => ExecutionMode::IdealChemistry,
            ModeName::Sampled => ExecutionMode::SampledChemistry { molecules, seed },
            ModeName::Fluidics => ExecutionMode::FullFluidics {
                molecules,
                seed,
                chemistry: ChemistryMode::Ideal,
            },
        }
    }
}

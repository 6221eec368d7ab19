//! Closed-form latency and area models of the microcell array, and the
//! design-space sweep built on them.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Durations of each stage of one layer, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConstants {
    /// Moving every droplet through the channels, all stages combined.
    pub transport: f64,
    /// Second nicking of the strands.
    pub mult: f64,
    /// Merging a row into one droplet.
    pub merge: f64,
    pub displacement: f64,
    pub threshold: f64,
    pub gate: f64,
    pub translation: f64,
    pub nick: f64,
}

impl TimingConstants {
    /// Transport is two minutes. The remaining constants are chosen so the
    /// slope of layer latency in the serialization factor is
    /// `transport + mult = 2.0333 h` and the fixed part is
    /// `merge + activation = 6.0367 h`; only those two sums are pinned down by
    /// the published latencies, the split of the fixed part is nominal.
    pub const DEFAULT: Self = Self {
        transport: 120.0,
        mult: 7200.0,
        merge: 3600.0,
        displacement: 3600.0,
        threshold: 3600.0,
        gate: 3600.0,
        translation: 3600.0,
        nick: 3732.0,
    };

    pub fn activation(&self) -> f64 {
        self.displacement + self.threshold + self.gate + self.translation + self.nick
    }

    /// Per-pass cost that repeats with serialization, seconds.
    pub fn per_pass(&self) -> f64 {
        self.transport + self.mult
    }

    /// Cost paid once per layer, seconds.
    pub fn fixed(&self) -> f64 {
        self.merge + self.activation()
    }

    pub fn validated(self) -> Result<Self> {
        let fields = [
            ("transport", self.transport),
            ("mult", self.mult),
            ("merge", self.merge),
            ("displacement", self.displacement),
            ("threshold", self.threshold),
            ("gate", self.gate),
            ("translation", self.translation),
            ("nick", self.nick),
        ];
        for (what, value) in fields {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::OutOfRange {
                    what,
                    value,
                    range: "[0, inf) seconds",
                });
            }
        }
        Ok(self)
    }
}

impl Default for TimingConstants {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Channel geometry of one microcell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub channel_width_um: f64,
    /// Cell side length in channel widths.
    pub footprint_factor: u32,
    /// Fixed per-cell area in mm², replacing the geometric estimate.
    pub cell_area_mm2: Option<f64>,
}

impl Geometry {
    /// 200 µm channels, six channel widths per side: 1.44 mm² per cell.
    pub const PESSIMISTIC: Self = Self {
        channel_width_um: 200.0,
        footprint_factor: 6,
        cell_area_mm2: None,
    };

    /// 35 µm channels in a condensed 3×3 cell, quoted as 0.01 mm² per cell.
    pub const OPTIMISTIC: Self = Self {
        channel_width_um: 35.0,
        footprint_factor: 3,
        cell_area_mm2: Some(0.01),
    };

    /// Same cell as [`Geometry::OPTIMISTIC`] with the exact
    /// `(3 * 0.035 mm)^2 = 0.011025 mm²`.
    pub const OPTIMISTIC_EXACT: Self = Self {
        channel_width_um: 35.0,
        footprint_factor: 3,
        cell_area_mm2: None,
    };

    pub fn cell_area_mm2(&self) -> f64 {
        self.cell_area_mm2.unwrap_or_else(|| {
            let side_mm = f64::from(self.footprint_factor) * self.channel_width_um / 1000.0;
            side_mm * side_mm
        })
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.channel_width_um > 0.0) || !self.channel_width_um.is_finite() {
            return Err(Error::OutOfRange {
                what: "channel_width_um",
                value: self.channel_width_um,
                range: "(0, inf)",
            });
        }
        if self.footprint_factor == 0 {
            return Err(Error::OutOfRange {
                what: "footprint_factor",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if let Some(a) = self.cell_area_mm2 {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::OutOfRange {
                    what: "cell_area_mm2",
                    value: a,
                    range: "(0, inf)",
                });
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceConfig {
    /// Microcells per side of the physical array.
    pub k_physical: u32,
    pub geometry: Geometry,
    pub timing: TimingConstants,
}

impl DeviceConfig {
    pub fn new(k_physical: u32, geometry: Geometry, timing: TimingConstants) -> Result<Self> {
        if k_physical == 0 {
            return Err(Error::arg("k_physical must be at least 1"));
        }
        Ok(Self {
            k_physical,
            geometry: geometry.validated()?,
            timing: timing.validated()?,
        })
    }
}

/// Area of a `k × k` array in mm²: `(factor · k · c)²`.
pub fn area(config: &DeviceConfig) -> f64 {
    let k = f64::from(config.k_physical);
    config.geometry.cell_area_mm2() * k * k
}

/// Passes needed to run a layer of `k_layer` neurons on `k_physical` cells.
pub fn serialization_factor(k_layer: usize, k_physical: usize) -> Result<usize> {
    if k_layer == 0 || k_physical == 0 {
        return Err(Error::arg("layer and array sizes must be at least 1"));
    }
    Ok(k_layer.div_ceil(k_physical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerPlan {
    pub k_layer: usize,
    pub k_physical: usize,
    pub serialization_factor: usize,
}

impl LayerPlan {
    pub fn new(k_layer: usize, k_physical: usize) -> Result<Self> {
        Ok(Self {
            k_layer,
            k_physical,
            serialization_factor: serialization_factor(k_layer, k_physical)?,
        })
    }
}

/// Layer latency in hours: every pass repeats transport and multiplication,
/// merge and activation run once.
pub fn layer_latency(plan: &LayerPlan, timing: &TimingConstants) -> f64 {
    (plan.serialization_factor as f64 * timing.per_pass() + timing.fixed()) / SECONDS_PER_HOUR
}

/// Latency of every layer of a network, input layer first, in hours.
pub fn network_latency(layer_sizes: &[usize], config: &DeviceConfig) -> Result<Vec<f64>> {
    layer_sizes
        .iter()
        .map(|&k| {
            let plan = LayerPlan::new(k, config.k_physical as usize)?;
            Ok(layer_latency(&plan, &config.timing))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedConfig {
    pub name: String,
    pub k_physical: u32,
}

impl NamedConfig {
    pub fn new(name: impl Into<String>, k_physical: u32) -> Self {
        Self {
            name: name.into(),
            k_physical,
        }
    }

    /// The four array sizes of the published sweep.
    pub fn standard_configs() -> Vec<NamedConfig> {
        [196, 49, 16, 4]
            .into_iter()
            .enumerate()
            .map(|(i, k)| NamedConfig::new(alloc::format!("Config-{}", i + 1), k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreSettings {
    pub pessimistic: Geometry,
    pub optimistic: Geometry,
    pub timing: TimingConstants,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        Self {
            pessimistic: Geometry::PESSIMISTIC,
            optimistic: Geometry::OPTIMISTIC,
            timing: TimingConstants::DEFAULT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreRow {
    pub config_name: String,
    pub cells_per_side: u32,
    pub area_pessimistic_cm2: f64,
    pub area_optimistic_cm2: f64,
    /// Latency of the hidden layer.
    pub exec_time_per_layer_hr: f64,
    pub serialization_input: usize,
    pub serialization_hidden: usize,
    pub serialization_output: usize,
    /// Latency of each layer, input layer first.
    pub layer_latencies_hr: Vec<f64>,
}

/// Sweeps array sizes for a network given by its layer widths, input first.
///
/// The reported time per layer is the hidden layer's (for a network without
/// a hidden layer, the input layer's).
pub fn explore(configs: &[NamedConfig], layer_sizes: &[usize], settings: &ExploreSettings) -> Result<Vec<ExploreRow>> {
    if configs.is_empty() {
        return Err(Error::arg("no configurations to explore"));
    }
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::arg("network needs at least an input and an output layer of nonzero width"));
    }
    let input = layer_sizes[0];
    let output = layer_sizes[layer_sizes.len() - 1];
    let hidden = if layer_sizes.len() > 2 { layer_sizes[1] } else { input };
    configs
        .iter()
        .map(|c| {
            let pess = DeviceConfig::new(c.k_physical, settings.pessimistic, settings.timing)?;
            let opt = DeviceConfig::new(c.k_physical, settings.optimistic, settings.timing)?;
            let k = c.k_physical as usize;
            let hidden_plan = LayerPlan::new(hidden, k)?;
            Ok(ExploreRow {
                config_name: c.name.clone(),
                cells_per_side: c.k_physical,
                area_pessimistic_cm2: area(&pess) / 100.0,
                area_optimistic_cm2: area(&opt) / 100.0,
                exec_time_per_layer_hr: layer_latency(&hidden_plan, &settings.timing),
                serialization_input: serialization_factor(input, k)?,
                serialization_hidden: hidden_plan.serialization_factor,
                serialization_output: serialization_factor(output, k)?,
                layer_latencies_hr: network_latency(layer_sizes, &pess)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: u32, g: Geometry) -> DeviceConfig {
        DeviceConfig::new(k, g, TimingConstants::DEFAULT).unwrap()
    }

    #[test]
    fn area_examples() {
        assert!((area(&cfg(196, Geometry::PESSIMISTIC)) / 100.0 - 553.19).abs() < 0.01);
        assert!((area(&cfg(196, Geometry::OPTIMISTIC)) / 100.0 - 3.84).abs() < 0.01);
        let one = area(&cfg(1, Geometry::PESSIMISTIC));
        assert!((one - 1.44).abs() < 1e-12);
        let exact = area(&cfg(1, Geometry::OPTIMISTIC_EXACT));
        assert!((exact - 0.011025).abs() < 1e-12);
    }

    #[test]
    fn area_is_quadratic() {
        let a1 = area(&cfg(10, Geometry::PESSIMISTIC));
        let a2 = area(&cfg(20, Geometry::PESSIMISTIC));
        assert!((a2 / a1 - 4.0).abs() < 1e-12);
        let wide = Geometry {
            channel_width_um: 400.0,
            ..Geometry::PESSIMISTIC
        };
        assert!((area(&cfg(10, wide)) / a1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn serialization_examples() {
        assert_eq!(serialization_factor(784, 196).unwrap(), 4);
        assert_eq!(serialization_factor(10, 4).unwrap(), 3);
        assert_eq!(serialization_factor(10, 16).unwrap(), 1);
        assert!(serialization_factor(0, 16).is_err());
    }

    #[test]
    fn latency_examples() {
        let t = TimingConstants::DEFAULT;
        let lat = |k_layer, k_phys| layer_latency(&LayerPlan::new(k_layer, k_phys).unwrap(), &t);
        assert!((lat(784, 784) - 8.07).abs() < 0.01);
        assert!((lat(784, 196) - 14.17).abs() < 0.1);
        assert!((lat(784, 16) - 105.6).abs() < 0.1);
    }

    #[test]
    fn default_sums() {
        let t = TimingConstants::DEFAULT;
        assert!((t.per_pass() / 3600.0 - 2.0333).abs() < 1e-4);
        assert!((t.fixed() / 3600.0 - 6.0367).abs() < 1e-4);
    }

    #[test]
    fn latency_is_affine_in_serialization() {
        let t = TimingConstants::DEFAULT;
        let pts: Vec<(f64, f64)> = (1..=200)
            .map(|f| {
                let plan = LayerPlan {
                    k_layer: f,
                    k_physical: 1,
                    serialization_factor: f,
                };
                (f as f64, layer_latency(&plan, &t))
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        assert!((slope - t.per_pass() / 3600.0).abs() < 1e-9);
        for (x, y) in pts {
            assert!((y - (slope * x + icpt)).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_in_array_size() {
        let t = TimingConstants::DEFAULT;
        let mut last_lat = f64::INFINITY;
        let mut last_area = 0.0;
        for k in 1..=300u32 {
            let lat = layer_latency(&LayerPlan::new(784, k as usize).unwrap(), &t);
            let a = area(&cfg(k, Geometry::PESSIMISTIC));
            assert!(lat <= last_lat);
            assert!(a >= last_area);
            last_lat = lat;
            last_area = a;
        }
    }

    #[test]
    fn explore_rows() {
        let rows = explore(
            &[NamedConfig::new("full", 784)],
            &[784, 784, 10],
            &ExploreSettings::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].exec_time_per_layer_hr - 8.07).abs() < 0.01);
        assert_eq!(rows[0].layer_latencies_hr.len(), 3);

        assert!(explore(&[], &[784, 10], &ExploreSettings::default()).is_err());
        assert!(explore(&NamedConfig::standard_configs(), &[], &ExploreSettings::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DeviceConfig::new(0, Geometry::PESSIMISTIC, TimingConstants::DEFAULT).is_err());
        let bad = Geometry {
            channel_width_um: 0.0,
            ..Geometry::PESSIMISTIC
        };
        assert!(DeviceConfig::new(4, bad, TimingConstants::DEFAULT).is_err());
        let bad_t = TimingConstants {
            gate: -1.0,
            ..TimingConstants::DEFAULT
        };
        assert!(DeviceConfig::new(4, Geometry::PESSIMISTIC, bad_t).is_err());
    }
}

//! CSV reports. Column order is fixed by the row structs below.

use std::io::Write;

use nicknet_core::ann::CompareReport;
use nicknet_core::device::ExploreRow;
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Serialize)]
struct ExploreCsvRow<'a> {
    config_name: &'a str,
    cells_per_side: u32,
    area_pessimistic_cm2: String,
    area_optimistic_cm2: String,
    exec_time_per_layer_hr: String,
    serialization_input: usize,
    serialization_hidden: usize,
    serialization_output: usize,
}

/// Areas to 4 decimals, hours to 2, as in the published table.
pub fn write_explore<W: Write>(out: W, rows: &[ExploreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(ExploreCsvRow {
            config_name: &r.config_name,
            cells_per_side: r.cells_per_side,
            area_pessimistic_cm2: format!("{:.4}", r.area_pessimistic_cm2),
            area_optimistic_cm2: format!("{:.4}", r.area_optimistic_cm2),
            exec_time_per_layer_hr: format!("{:.2}", r.exec_time_per_layer_hr),
            serialization_input: r.serialization_input,
            serialization_hidden: r.serialization_hidden,
            serialization_output: r.serialization_output,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LayerLatencyRow<'a> {
    config_name: &'a str,
    layer: usize,
    k_layer: usize,
    latency_hr: String,
}

/// One row per configuration and entry of `layer_sizes`.
pub fn write_layer_latencies<W: Write>(out: W, rows: &[ExploreRow], layer_sizes: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        for (layer, (&k_layer, hr)) in layer_sizes.iter().zip(&r.layer_latencies_hr).enumerate() {
            w.serialize(LayerLatencyRow {
                config_name: &r.config_name,
                layer,
                k_layer,
                latency_hr: format!("{hr:.4}"),
            })?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareCsvRow<'a> {
    mode_a: &'a str,
    mode_b: &'a str,
    samples: usize,
    agreement: f64,
    layer: usize,
    max_abs_preactivation_diff: f64,
}

/// One row per pair of modes and layer.
pub fn write_compare<W: Write>(out: W, report: &CompareReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &report.pairs {
        for (layer, &d) in p.max_abs_diff.iter().enumerate() {
            w.serialize(CompareCsvRow {
                mode_a: &p.mode_a,
                mode_b: &p.mode_b,
                samples: p.samples,
                agreement: p.agreement,
                layer,
                max_abs_preactivation_diff: d,
            })?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

//! Discrete-event model of the microfluidic engine.
//!
//! Droplets move between channel segments in timed hops. A `rows × cols`
//! array of microcells (one row per neuron, one column per input) loads a
//! DNA droplet and an enzyme droplet into each cell, mixes them, merges each
//! row into one droplet, runs the reaction pipeline on it and pinches the
//! result back into droplets for the next layer. Every step is appended to
//! an event log, and [`validate`] checks a log against the protocol without
//! access to the simulator.

use core::fmt;

use crate::chem::{EnzymeDose, SolutionState, SsdnaPool};

mod array;
mod event;
mod layer;
mod validate;

pub use array::{FaultPlan, MergeModule, Microcell, MicrocellArray, PipelineOutput, PipelineParams, Valve};
pub use event::{parse_trace, render_trace, DropletId, Event, EventKind, TRACE_HEADER};
pub use layer::{run_layer, LayerJob, LayerRun};
pub use validate::{validate, validate_partial, Rule, TraceSummary, TraceViolation};

/// A channel segment a droplet can occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    /// Off-chip reservoir; any number of droplets may wait here.
    Feed,
    Left { row: usize, col: usize },
    Right { row: usize, col: usize },
    Out { row: usize, col: usize },
    MergeInlet { row: usize, col: usize },
    Pipeline { row: usize },
    Separator { row: usize, slot: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Dna(SolutionState),
    Enzyme(EnzymeDose),
    Pool(SsdnaPool),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Dna(_) => "dna",
            Payload::Enzyme(_) => "enzyme",
            Payload::Pool(_) => "ssdna",
        }
    }

    pub fn as_dna(&self) -> Option<&SolutionState> {
        match self {
            Payload::Dna(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Droplet {
    pub id: DropletId,
    pub payload: Payload,
    pub position: Segment,
    pub created_at: f64,
}

/// Why the simulator refused an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolViolation {
    SlotOccupied { row: usize, col: usize, slot: &'static str },
    NotLoaded { row: usize, col: usize },
    Unmixed { row: usize, col: usize },
    NotMerged { row: usize },
    NoPipelineOutput { row: usize },
    OutOfBounds { row: usize, col: usize },
}

impl fmt::Display for ProtocolViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolViolation::SlotOccupied { row, col, slot } => {
                write!(f, "{slot} slot of cell ({row}, {col}) is occupied")
            }
            ProtocolViolation::NotLoaded { row, col } => write!(f, "cell ({row}, {col}) is not loaded"),
            ProtocolViolation::Unmixed { row, col } => write!(f, "cell ({row}, {col}) has not mixed"),
            ProtocolViolation::NotMerged { row } => write!(f, "row {row} has no merged droplet"),
            ProtocolViolation::NoPipelineOutput { row } => {
                write!(f, "row {row} has no pipeline output to separate")
            }
            ProtocolViolation::OutOfBounds { row, col } => write!(f, "cell ({row}, {col}) is outside the array"),
        }
    }
}

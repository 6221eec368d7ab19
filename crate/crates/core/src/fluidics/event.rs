use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DropletId(pub u64);

impl fmt::Display for DropletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! event_kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum EventKind {
            $($variant),*
        }

        impl EventKind {
            pub const ALL: &'static [EventKind] = &[$(EventKind::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(EventKind::$variant => $name),*
                }
            }
        }

        impl FromStr for EventKind {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(EventKind::$variant),)*
                    _ => Err(Error::arg(alloc::format!("unknown event kind {s:?}"))),
                }
            }
        }
    };
}

event_kinds! {
    LayerBegin => "layer_begin",
    ValveRCloseLOpen => "valve_r_close_l_open",
    DnaTransit => "dna_transit",
    DnaEnterLeft => "dna_enter_left",
    ValveLCloseROpen => "valve_l_close_r_open",
    EnzymeTransit => "enzyme_transit",
    EnzymeEnterRight => "enzyme_enter_right",
    ValvesOpen => "valves_open",
    CoExitMix => "co_exit_mix",
    MergeYOpen => "merge_y_open",
    MergeYCollect => "merge_y_collect",
    MergeZOpen => "merge_z_open",
    MergeZArrive => "merge_z_arrive",
    MergeDone => "merge_done",
    StageDisplacement => "stage_displacement",
    StageThreshold => "stage_threshold",
    StageGate => "stage_gate",
    StageTranslation => "stage_translation",
    StageNick => "stage_nick",
    SeparateEmit => "separate_emit",
}

impl EventKind {
    /// Position of a per-cell protocol step, 1 through 6.
    pub fn microcell_step(self) -> Option<u8> {
        Some(match self {
            EventKind::ValveRCloseLOpen => 1,
            EventKind::DnaEnterLeft => 2,
            EventKind::ValveLCloseROpen => 3,
            EventKind::EnzymeEnterRight => 4,
            EventKind::ValvesOpen => 5,
            EventKind::CoExitMix => 6,
            _ => return None,
        })
    }

    /// Position of a reaction pipeline stage, 1 through 5.
    pub fn pipeline_stage(self) -> Option<u8> {
        Some(match self {
            EventKind::StageDisplacement => 1,
            EventKind::StageThreshold => 2,
            EventKind::StageGate => 3,
            EventKind::StageTranslation => 4,
            EventKind::StageNick => 5,
            _ => return None,
        })
    }

    /// Which of (row, col, droplet) a record of this kind must carry.
    pub fn required_fields(self) -> (bool, bool, bool) {
        use EventKind::*;
        match self {
            LayerBegin => (true, false, false),
            ValveRCloseLOpen | ValveLCloseROpen | ValvesOpen => (true, true, false),
            DnaTransit | DnaEnterLeft | EnzymeTransit | EnzymeEnterRight | CoExitMix => (true, true, true),
            MergeYOpen | MergeZOpen => (true, false, false),
            MergeYCollect | MergeZArrive => (true, true, true),
            MergeDone => (true, false, true),
            StageDisplacement | StageThreshold | StageGate | StageTranslation | StageNick => (true, false, true),
            SeparateEmit => (true, true, true),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of the trace: `time_s event_kind row col droplet_id`.
///
/// Absent fields print as `-`. For `layer_begin` the row field holds the
/// layer index; for `separate_emit` the col field is the emission slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub droplet: Option<DropletId>,
}

impl Event {
    pub fn new(time_s: f64, kind: EventKind) -> Self {
        Self {
            time_s,
            kind,
            row: None,
            col: None,
            droplet: None,
        }
    }

    pub fn at(mut self, row: usize, col: usize) -> Self {
        self.row = Some(row);
        self.col = Some(col);
        self
    }

    pub fn in_row(mut self, row: usize) -> Self {
        self.row = Some(row);
        self
    }

    pub fn with(mut self, droplet: DropletId) -> Self {
        self.droplet = Some(droplet);
        self
    }
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), ToString::to_string)
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6}\t{}\t{}\t{}\t{}",
            self.time_s,
            self.kind,
            opt(&self.row),
            opt(&self.col),
            opt(&self.droplet)
        )
    }
}

impl FromStr for Event {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::arg(alloc::format!("expected 5 fields, found {}", fields.len())));
        }
        let time_s: f64 = fields[0]
            .parse()
            .map_err(|_| Error::arg(alloc::format!("bad time {:?}", fields[0])))?;
        if !time_s.is_finite() {
            return Err(Error::arg("time must be finite"));
        }
        let kind: EventKind = fields[1].parse()?;
        let num = |s: &str| -> Result<Option<u64>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::arg(alloc::format!("bad field {s:?}")))
            }
        };
        Ok(Event {
            time_s,
            kind,
            row: num(fields[2])?.map(|v| v as usize),
            col: num(fields[3])?.map(|v| v as usize),
            droplet: num(fields[4])?.map(DropletId),
        })
    }
}

/// Header written at the top of every trace file.
pub const TRACE_HEADER: &str = "# nicknet-trace v1\n# time_s\tevent_kind\trow\tcol\tdroplet_id";

/// Renders events in the trace text format, header included.
pub fn render_trace(events: &[Event]) -> String {
    use core::fmt::Write;
    let mut out = String::with_capacity(events.len() * 40 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{e}");
    }
    out
}

/// Parses trace text; `#` comments and blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| l.parse().map_err(|e: Error| Error::arg(alloc::format!("line {}: {e}", i + 1))))
        .collect()
}

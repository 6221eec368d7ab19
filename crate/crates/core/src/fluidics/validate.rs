//! Protocol checker for event traces.
//!
//! Works from the records alone: it replays droplet positions from the
//! movement events and tracks a small state machine per cell, merge module
//! and pipeline.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{DropletId, Event, EventKind, Segment};

/// Arrival times closer than this count as simultaneous.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    RecordFormat,
    ClockMonotonic,
    MicrocellGrammar,
    MergeGrammar,
    MergeEqualArrival,
    PipelineGrammar,
    MutualExclusion,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::RecordFormat,
        Rule::ClockMonotonic,
        Rule::MicrocellGrammar,
        Rule::MergeGrammar,
        Rule::MergeEqualArrival,
        Rule::PipelineGrammar,
        Rule::MutualExclusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::RecordFormat => "record-format",
            Rule::ClockMonotonic => "clock-monotonic",
            Rule::MicrocellGrammar => "microcell-grammar",
            Rule::MergeGrammar => "merge-grammar",
            Rule::MergeEqualArrival => "merge-equal-arrival",
            Rule::PipelineGrammar => "pipeline-grammar",
            Rule::MutualExclusion => "mutual-exclusion",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceViolation {
    pub rule: Rule,
    /// Index of the offending record, or `None` for end-of-trace checks.
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} violated at record {}: {}", self.rule, i, self.message),
            None => write!(f, "{} violated at end of trace: {}", self.rule, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceSummary {
    pub events: usize,
    pub layers: usize,
    pub cells_mixed: usize,
    pub merges: usize,
    pub pipelines: usize,
    pub separations: usize,
    pub end_time_s: f64,
}

#[derive(Debug, Clone)]
enum MergeState {
    Idle,
    Collecting(BTreeMap<usize, DropletId>),
    Arriving {
        collected: BTreeMap<usize, DropletId>,
        arrived: BTreeSet<usize>,
        at: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy)]
struct PipelineState {
    stage: u8,
    droplet: DropletId,
    next_slot: usize,
}

#[derive(Default)]
struct Checker {
    cells: BTreeMap<(usize, usize), u8>,
    merges: BTreeMap<usize, MergeState>,
    pipelines: BTreeMap<usize, PipelineState>,
    position: BTreeMap<DropletId, Segment>,
    occupants: BTreeMap<Segment, BTreeSet<DropletId>>,
    touched: BTreeSet<Segment>,
    summary: TraceSummary,
}

type Check = core::result::Result<(), (Rule, String)>;

fn fail(rule: Rule, msg: impl Into<String>) -> Check {
    Err((rule, msg.into()))
}

impl Checker {
    fn place(&mut self, d: DropletId, seg: Segment) {
        self.remove(d);
        self.position.insert(d, seg);
        self.occupants.entry(seg).or_default().insert(d);
        self.touched.insert(seg);
    }

    fn remove(&mut self, d: DropletId) {
        if let Some(old) = self.position.remove(&d) {
            if let Some(set) = self.occupants.get_mut(&old) {
                set.remove(&d);
            }
        }
    }

    fn clear_segment(&mut self, seg: Segment) {
        if let Some(set) = self.occupants.remove(&seg) {
            for d in set {
                self.position.remove(&d);
            }
        }
    }

    fn close_group(&mut self) -> Check {
        let touched = core::mem::take(&mut self.touched);
        for seg in touched {
            if seg == Segment::Feed {
                continue;
            }
            if let Some(set) = self.occupants.get(&seg) {
                if set.len() > 1 {
                    let ids: Vec<_> = set.iter().map(|d| d.0).collect();
                    return fail(Rule::MutualExclusion, alloc::format!("{seg:?} holds droplets {ids:?}"));
                }
            }
        }
        Ok(())
    }

    fn finish_layer(&self) -> Check {
        for (&(r, c), &step) in &self.cells {
            if step != 0 && step != 6 {
                return fail(
                    Rule::MicrocellGrammar,
                    alloc::format!("cell ({r}, {c}) stopped after step {step}"),
                );
            }
        }
        for (r, m) in &self.merges {
            if !matches!(m, MergeState::Idle) {
                return fail(Rule::MergeGrammar, alloc::format!("merge of row {r} never completed"));
            }
        }
        for (r, p) in &self.pipelines {
            if p.stage != 0 && p.stage != 5 {
                return fail(
                    Rule::PipelineGrammar,
                    alloc::format!("pipeline of row {r} stopped after stage {}", p.stage),
                );
            }
        }
        Ok(())
    }

    fn step(&mut self, e: &Event, strict: bool) -> Check {
        use EventKind::*;
        let row = e.row.unwrap_or(0);
        let col = e.col.unwrap_or(0);
        let id = e.droplet.unwrap_or(DropletId(0));

        if let Some(s) = e.kind.microcell_step() {
            let last = self.cells.get(&(row, col)).copied().unwrap_or(0);
            let expected = if last == 0 || last == 6 { 1 } else { last + 1 };
            if s != expected {
                return fail(
                    Rule::MicrocellGrammar,
                    alloc::format!("cell ({row}, {col}) got step {s} ({}) but expected step {expected}", e.kind),
                );
            }
            self.cells.insert((row, col), s);
        }

        match e.kind {
            LayerBegin => {
                if strict {
                    self.finish_layer()?;
                }
                self.cells.clear();
                self.merges.clear();
                self.pipelines.clear();
                self.position.clear();
                self.occupants.clear();
                self.touched.clear();
                self.summary.layers += 1;
            }
            DnaTransit | EnzymeTransit => {
                let (need, seg) = if e.kind == DnaTransit {
                    (1, Segment::Left { row, col })
                } else {
                    (3, Segment::Right { row, col })
                };
                let step = self.cells.get(&(row, col)).copied().unwrap_or(0);
                if step != need {
                    return fail(
                        Rule::MicrocellGrammar,
                        alloc::format!("{} through cell ({row}, {col}) while it is at step {step}", e.kind),
                    );
                }
                self.place(id, seg);
            }
            DnaEnterLeft => self.place(id, Segment::Left { row, col }),
            EnzymeEnterRight => self.place(id, Segment::Right { row, col }),
            CoExitMix => {
                self.clear_segment(Segment::Left { row, col });
                self.clear_segment(Segment::Right { row, col });
                self.place(id, Segment::Out { row, col });
                self.summary.cells_mixed += 1;
            }
            MergeYOpen => match self.merges.get(&row) {
                None | Some(MergeState::Idle) => {
                    self.merges.insert(row, MergeState::Collecting(BTreeMap::new()));
                }
                Some(_) => return fail(Rule::MergeGrammar, alloc::format!("row {row} opened Y twice")),
            },
            MergeYCollect => {
                let Some(MergeState::Collecting(collected)) = self.merges.get_mut(&row) else {
                    return fail(
                        Rule::MergeGrammar,
                        alloc::format!("row {row} collected outside the Y phase"),
                    );
                };
                if collected.insert(col, id).is_some() {
                    return fail(Rule::MergeGrammar, alloc::format!("cell ({row}, {col}) collected twice"));
                }
                if self.position.get(&id) != Some(&Segment::Out { row, col }) {
                    return fail(
                        Rule::MergeGrammar,
                        alloc::format!("droplet {id} is not a mixed output of cell ({row}, {col})"),
                    );
                }
                self.place(id, Segment::MergeInlet { row, col });
            }
            MergeZOpen => {
                let collected = match self.merges.get_mut(&row) {
                    Some(MergeState::Collecting(c)) if !c.is_empty() => core::mem::take(c),
                    _ => {
                        return fail(
                            Rule::MergeGrammar,
                            alloc::format!("row {row} opened Z before the Y phase collected"),
                        )
                    }
                };
                self.merges.insert(
                    row,
                    MergeState::Arriving {
                        collected,
                        arrived: BTreeSet::new(),
                        at: None,
                    },
                );
            }
            MergeZArrive => {
                let Some(MergeState::Arriving { collected, arrived, at }) = self.merges.get_mut(&row) else {
                    return fail(Rule::MergeGrammar, alloc::format!("row {row} arrival outside the Z phase"));
                };
                if collected.get(&col) != Some(&id) || !arrived.insert(col) {
                    return fail(
                        Rule::MergeGrammar,
                        alloc::format!("unexpected arrival of droplet {id} from column {col}"),
                    );
                }
                match *at {
                    None => *at = Some(e.time_s),
                    Some(t) if libm::fabs(t - e.time_s) > TIME_EPS => {
                        return fail(
                            Rule::MergeEqualArrival,
                            alloc::format!("row {row} arrivals at {t} s and {} s", e.time_s),
                        )
                    }
                    Some(_) => {}
                }
                self.remove(id);
            }
            MergeDone => {
                let Some(MergeState::Arriving { collected, arrived, .. }) = self.merges.get(&row) else {
                    return fail(Rule::MergeGrammar, alloc::format!("row {row} finished without a Z phase"));
                };
                if arrived.len() != collected.len() {
                    return fail(
                        Rule::MergeEqualArrival,
                        alloc::format!(
                            "row {row} merged with {} of {} droplets arrived",
                            arrived.len(),
                            collected.len()
                        ),
                    );
                }
                self.merges.insert(row, MergeState::Idle);
                if self.pipelines.get(&row).is_some_and(|p| p.stage != 5) {
                    return fail(Rule::PipelineGrammar, alloc::format!("row {row} merged mid-pipeline"));
                }
                self.pipelines.insert(
                    row,
                    PipelineState {
                        stage: 0,
                        droplet: id,
                        next_slot: 0,
                    },
                );
                self.place(id, Segment::Pipeline { row });
                self.summary.merges += 1;
            }
            StageDisplacement | StageThreshold | StageGate | StageTranslation | StageNick => {
                let s = e.kind.pipeline_stage().expect("stage event");
                let Some(p) = self.pipelines.get_mut(&row) else {
                    return fail(Rule::PipelineGrammar, alloc::format!("row {row} has no merged droplet"));
                };
                if s != p.stage + 1 {
                    return fail(
                        Rule::PipelineGrammar,
                        alloc::format!("row {row} got stage {s} ({}) after stage {}", e.kind, p.stage),
                    );
                }
                p.stage = s;
                if e.kind == StageNick {
                    let old = p.droplet;
                    p.droplet = id;
                    self.remove(old);
                    self.place(id, Segment::Pipeline { row });
                    self.summary.pipelines += 1;
                } else if p.droplet != id {
                    return fail(
                        Rule::PipelineGrammar,
                        alloc::format!("row {row} stage {s} acts on droplet {id}, expected {}", p.droplet),
                    );
                }
            }
            SeparateEmit => {
                let Some(p) = self.pipelines.get_mut(&row) else {
                    return fail(Rule::PipelineGrammar, alloc::format!("row {row} separated without a pipeline"));
                };
                if p.stage != 5 || p.next_slot != col {
                    return fail(
                        Rule::PipelineGrammar,
                        alloc::format!("row {row} emitted slot {col} out of order"),
                    );
                }
                p.next_slot += 1;
                if col == 0 {
                    self.clear_segment(Segment::Pipeline { row });
                }
                self.place(id, Segment::Separator { row, slot: col });
                self.summary.separations += 1;
            }
            ValveRCloseLOpen | ValveLCloseROpen | ValvesOpen => {}
        }
        Ok(())
    }
}

fn check_format(e: &Event) -> Check {
    let (row, col, droplet) = e.kind.required_fields();
    if row != e.row.is_some() || col != e.col.is_some() || droplet != e.droplet.is_some() {
        return fail(
            Rule::RecordFormat,
            alloc::format!("{} record has the wrong fields present", e.kind),
        );
    }
    if !e.time_s.is_finite() || e.time_s < 0.0 {
        return fail(Rule::RecordFormat, alloc::format!("bad timestamp {}", e.time_s));
    }
    Ok(())
}

fn run(events: &[Event], strict: bool) -> core::result::Result<TraceSummary, TraceViolation> {
    let mut ck = Checker::default();
    let mut last = f64::NEG_INFINITY;
    let at = |i: usize| move |(rule, message)| TraceViolation {
        rule,
        index: Some(i),
        message,
    };
    for (i, e) in events.iter().enumerate() {
        check_format(e).map_err(at(i))?;
        if e.time_s < last {
            return Err(at(i)((
                Rule::ClockMonotonic,
                alloc::format!("time {} s after {} s", e.time_s, last),
            )));
        }
        if e.time_s > last {
            ck.close_group().map_err(at(i.saturating_sub(1)))?;
        }
        last = e.time_s;
        ck.step(e, strict).map_err(at(i))?;
    }
    ck.close_group().map_err(at(events.len().saturating_sub(1)))?;
    if strict {
        ck.finish_layer().map_err(|(rule, message)| TraceViolation {
            rule,
            index: None,
            message,
        })?;
    }
    ck.summary.events = events.len();
    ck.summary.end_time_s = events.last().map_or(0.0, |e| e.time_s);
    Ok(ck.summary)
}

/// Checks a complete trace: every protocol that starts must finish.
pub fn validate(events: &[Event]) -> core::result::Result<TraceSummary, TraceViolation> {
    run(events, true)
}

/// Like [`validate`], but allows protocols still in flight at the end.
pub fn validate_partial(events: &[Event]) -> core::result::Result<TraceSummary, TraceViolation> {
    run(events, false)
}

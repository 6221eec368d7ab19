use alloc::vec::Vec;

use super::{Droplet, DropletId, Event, EventKind, Payload, ProtocolViolation, Segment};
use crate::chem::{self, ActivationParams, ChemistryErrorModel, ChemistryMode};
use crate::device::TimingConstants;
use crate::rng::derive_seed;
use crate::{Error, FractionalValue, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valve {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Microcell {
    pub row: usize,
    pub col: usize,
    pub valve_l: Valve,
    pub valve_r: Valve,
    pub left_slot: Option<Droplet>,
    pub right_slot: Option<Droplet>,
    /// Mixed droplet waiting in the exit channel.
    pub output: Option<Droplet>,
    ready_at: f64,
}

/// Merge module S and reaction pipeline P of one row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeModule {
    pub y_open: bool,
    pub z_open: bool,
    pub merged: Option<Droplet>,
    pub processed: Option<Droplet>,
    ready_at: f64,
}

/// Deliberate protocol faults, for exercising the trace validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaultPlan {
    /// Drop the "close L, open R" valve step of this cell.
    pub skip_valve_step: Option<(usize, usize)>,
    /// Park a second DNA droplet in this cell's left slot.
    pub double_occupy: Option<(usize, usize)>,
    /// Open this row's Z valves before the Y phase has collected.
    pub merge_z_before_y: Option<usize>,
    /// Delay one droplet on this row's merge path.
    pub skew_merge_arrival: Option<usize>,
    /// Drop the threshold stage of this row's pipeline.
    pub skip_pipeline_stage: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub err: ChemistryErrorModel,
    /// Molecules in the fresh DNA droplet nicked for the next layer.
    pub fresh_total: u64,
    pub mode: ChemistryMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub droplet: Droplet,
    /// Fraction of released fragments: the neuron's dot product.
    pub pre_activation: f64,
    pub output: FractionalValue,
}

/// A `rows × cols` grid of microcells with a merge module per row.
#[derive(Debug, Clone)]
pub struct MicrocellArray {
    rows: usize,
    cols: usize,
    cells: Vec<Microcell>,
    merge_modules: Vec<MergeModule>,
    timing: TimingConstants,
    hop: f64,
    clock: f64,
    log: Vec<Event>,
    next_id: u64,
    faults: FaultPlan,
}

impl MicrocellArray {
    /// An array whose outputs fan out to `rows` droplets each.
    pub fn new(rows: usize, cols: usize, timing: TimingConstants) -> Result<Self> {
        Self::with_fanout(rows, cols, rows, timing)
    }

    pub fn square(k: usize, timing: TimingConstants) -> Result<Self> {
        Self::new(k, k, timing)
    }

    /// `fanout` is the number of droplets each row output is pinched into.
    /// It sets the hop time: one layer makes `2 * rows + cols + fanout`
    /// hops, which together take `timing.transport`.
    pub fn with_fanout(rows: usize, cols: usize, fanout: usize, timing: TimingConstants) -> Result<Self> {
        if rows == 0 || cols == 0 || fanout == 0 {
            return Err(Error::arg("array dimensions and fanout must be at least 1"));
        }
        let timing = timing.validated()?;
        let cells = (0..rows * cols)
            .map(|i| Microcell {
                row: i / cols,
                col: i % cols,
                valve_l: Valve::Open,
                valve_r: Valve::Open,
                left_slot: None,
                right_slot: None,
                output: None,
                ready_at: 0.0,
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            cells,
            merge_modules: (0..rows).map(|_| MergeModule::default()).collect(),
            timing,
            hop: timing.transport / (2 * rows + cols + fanout) as f64,
            clock: 0.0,
            log: Vec::new(),
            next_id: 0,
            faults: FaultPlan::default(),
        })
    }

    /// Continue a previous simulation's clock and droplet numbering.
    pub fn resume(mut self, clock: f64, next_id: u64) -> Self {
        self.clock = clock;
        self.next_id = next_id;
        self
    }

    pub fn with_faults(mut self, faults: FaultPlan) -> Self {
        self.faults = faults;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn next_droplet_id(&self) -> u64 {
        self.next_id
    }

    /// Duration of one segment hop, seconds.
    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn events(&self) -> &[Event] {
        &self.log
    }

    pub fn into_events(self) -> Vec<Event> {
        self.log
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Microcell> {
        (row < self.rows && col < self.cols).then(|| &self.cells[row * self.cols + col])
    }

    pub fn merge_module(&self, row: usize) -> Option<&MergeModule> {
        self.merge_modules.get(row)
    }

    /// Records a marker that a new layer starts at the current clock.
    pub fn begin_layer(&mut self, layer: usize) {
        self.commit(alloc::vec![Event::new(self.clock, EventKind::LayerBegin).in_row(layer)]);
    }

    /// A new droplet waiting in the feed reservoir.
    pub fn new_droplet(&mut self, payload: Payload) -> Droplet {
        Droplet {
            id: self.fresh_id(),
            payload,
            position: Segment::Feed,
            created_at: self.clock,
        }
    }

    fn fresh_id(&mut self) -> DropletId {
        let id = DropletId(self.next_id);
        self.next_id += 1;
        id
    }

    fn cell_mut(&mut self, row: usize, col: usize) -> Result<&mut Microcell> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::Protocol(ProtocolViolation::OutOfBounds { row, col }));
        }
        Ok(&mut self.cells[row * self.cols + col])
    }

    fn push(&self, buf: &mut Vec<Event>, e: Event) {
        if e.kind == EventKind::ValveLCloseROpen
            && self.faults.skip_valve_step.is_some_and(|(r, c)| Some(r) == e.row && Some(c) == e.col)
        {
            return;
        }
        if e.kind == EventKind::StageThreshold && self.faults.skip_pipeline_stage.is_some_and(|r| Some(r) == e.row) {
            return;
        }
        buf.push(e);
    }

    fn commit(&mut self, mut buf: Vec<Event>) {
        // Stable, so simultaneous events keep their emission order.
        buf.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        if let Some(last) = buf.last() {
            self.clock = self.clock.max(last.time_s);
        }
        self.log.extend(buf);
    }

    fn check_pair(dna: &Droplet, enzyme: &Droplet) -> Result<()> {
        if !matches!(dna.payload, Payload::Dna(_)) {
            return Err(Error::arg(alloc::format!("expected a dna droplet, got {}", dna.payload.kind())));
        }
        if !matches!(enzyme.payload, Payload::Enzyme(_)) {
            return Err(Error::arg(alloc::format!(
                "expected an enzyme droplet, got {}",
                enzyme.payload.kind()
            )));
        }
        Ok(())
    }

    fn mix(&self, dna: &Droplet, enzyme: &Droplet) -> Result<Payload> {
        let (Payload::Dna(s), Payload::Enzyme(d)) = (&dna.payload, &enzyme.payload) else {
            unreachable!("payload kinds are checked on load");
        };
        Ok(Payload::Dna(chem::nick_site_b(s, d, self.cols)?))
    }

    /// Loads and mixes a single cell with the six-step valve sequence.
    pub fn run_microcell_protocol(&mut self, row: usize, col: usize, dna: Droplet, enzyme: Droplet) -> Result<&Droplet> {
        Self::check_pair(&dna, &enzyme)?;
        let cell = self.cell_mut(row, col)?;
        if cell.left_slot.is_some() || cell.output.is_some() {
            return Err(Error::Protocol(ProtocolViolation::SlotOccupied { row, col, slot: "left" }));
        }
        if cell.right_slot.is_some() {
            return Err(Error::Protocol(ProtocolViolation::SlotOccupied { row, col, slot: "right" }));
        }
        let payload = self.mix(&dna, &enzyme)?;
        let (t, hop) = (self.clock, self.hop);
        let mixed = Droplet {
            id: self.fresh_id(),
            payload,
            position: Segment::Out { row, col },
            created_at: t + 2.0 * hop,
        };
        let mut buf = Vec::with_capacity(6);
        self.push(&mut buf, Event::new(t, EventKind::ValveRCloseLOpen).at(row, col));
        self.push(&mut buf, Event::new(t + hop, EventKind::DnaEnterLeft).at(row, col).with(dna.id));
        self.push(&mut buf, Event::new(t + hop, EventKind::ValveLCloseROpen).at(row, col));
        self.push(&mut buf, Event::new(t + 2.0 * hop, EventKind::EnzymeEnterRight).at(row, col).with(enzyme.id));
        self.push(&mut buf, Event::new(t + 2.0 * hop, EventKind::ValvesOpen).at(row, col));
        self.push(&mut buf, Event::new(t + 2.0 * hop, EventKind::CoExitMix).at(row, col).with(mixed.id));
        self.commit(buf);

        let ready = mixed.created_at + self.timing.mult;
        let cell = self.cell_mut(row, col)?;
        cell.valve_l = Valve::Open;
        cell.valve_r = Valve::Open;
        cell.output = Some(mixed);
        cell.ready_at = ready;
        Ok(cell.output.as_ref().expect("just stored"))
    }

    /// Loads one DNA and one enzyme droplet into every cell (steps 1–4).
    ///
    /// Both vectors are row-major, `rows * cols` long. Each column is fed a
    /// train of droplets spaced one cell apart; the first droplet travels
    /// furthest, so all of them park on the same hop.
    pub fn load_array(&mut self, dna: Vec<Droplet>, enzymes: Vec<Droplet>) -> Result<()> {
        let n = self.rows * self.cols;
        if dna.len() != n || enzymes.len() != n {
            return Err(Error::arg(alloc::format!(
                "expected {n} droplets of each kind, got {} dna and {} enzyme",
                dna.len(),
                enzymes.len()
            )));
        }
        for (d, e) in dna.iter().zip(&enzymes) {
            Self::check_pair(d, e)?;
        }
        for c in &self.cells {
            if c.left_slot.is_some() || c.output.is_some() {
                return Err(Error::Protocol(ProtocolViolation::SlotOccupied {
                    row: c.row,
                    col: c.col,
                    slot: "left",
                }));
            }
            if c.right_slot.is_some() {
                return Err(Error::Protocol(ProtocolViolation::SlotOccupied {
                    row: c.row,
                    col: c.col,
                    slot: "right",
                }));
            }
        }

        let (rows, cols, hop) = (self.rows, self.cols, self.hop);
        let t0 = self.clock;
        let mut buf = Vec::new();
        for c in 0..n {
            self.push(&mut buf, Event::new(t0, EventKind::ValveRCloseLOpen).at(c / cols, c % cols));
        }
        let t1 = t0 + rows as f64 * hop;
        self.schedule_trains(&mut buf, &dna, t0, EventKind::DnaTransit, EventKind::DnaEnterLeft);
        if let Some((r, c)) = self.faults.double_occupy {
            let intruder = DropletId(u64::MAX - (r * cols + c) as u64);
            buf.push(Event::new(t1, EventKind::DnaEnterLeft).at(r, c).with(intruder));
        }
        for c in 0..n {
            self.push(&mut buf, Event::new(t1, EventKind::ValveLCloseROpen).at(c / cols, c % cols));
        }
        let t2 = t1 + rows as f64 * hop;
        self.schedule_trains(&mut buf, &enzymes, t1, EventKind::EnzymeTransit, EventKind::EnzymeEnterRight);
        self.commit(buf);
        self.clock = self.clock.max(t2);

        for (i, (mut d, mut e)) in dna.into_iter().zip(enzymes).enumerate() {
            let (row, col) = (i / cols, i % cols);
            d.position = Segment::Left { row, col };
            e.position = Segment::Right { row, col };
            let cell = &mut self.cells[i];
            cell.left_slot = Some(d);
            cell.right_slot = Some(e);
            cell.valve_l = Valve::Closed;
            cell.valve_r = Valve::Open;
        }
        Ok(())
    }

    fn schedule_trains(&self, buf: &mut Vec<Event>, droplets: &[Droplet], start: f64, transit: EventKind, park: EventKind) {
        let (rows, cols) = (self.rows, self.cols);
        for s in 0..rows {
            let t = start + (s + 1) as f64 * self.hop;
            for col in 0..cols {
                for m in 0..=s {
                    // Droplet m of the train is bound for row rows-1-m.
                    let target = rows - 1 - m;
                    let id = droplets[target * cols + col].id;
                    let kind = if s == rows - 1 { park } else { transit };
                    self.push(buf, Event::new(t, kind).at(s - m, col).with(id));
                }
            }
        }
    }

    /// Opens both valves of every loaded cell; the pairs leave together and
    /// mix (steps 5–6).
    pub fn release_and_mix(&mut self) -> Result<()> {
        for c in &self.cells {
            if c.left_slot.is_none() || c.right_slot.is_none() {
                return Err(Error::Protocol(ProtocolViolation::NotLoaded { row: c.row, col: c.col }));
            }
        }
        let t = self.clock;
        let ready = t + self.timing.mult;
        let mut buf = Vec::with_capacity(2 * self.cells.len());
        for i in 0..self.cells.len() {
            let (row, col) = (self.cells[i].row, self.cells[i].col);
            let payload = {
                let c = &self.cells[i];
                self.mix(c.left_slot.as_ref().expect("loaded"), c.right_slot.as_ref().expect("loaded"))?
            };
            let id = self.fresh_id();
            self.push(&mut buf, Event::new(t, EventKind::ValvesOpen).at(row, col));
            self.push(&mut buf, Event::new(t, EventKind::CoExitMix).at(row, col).with(id));
            let cell = &mut self.cells[i];
            cell.left_slot = None;
            cell.right_slot = None;
            cell.valve_l = Valve::Open;
            cell.valve_r = Valve::Open;
            cell.output = Some(Droplet {
                id,
                payload,
                position: Segment::Out { row, col },
                created_at: t,
            });
            cell.ready_at = ready;
        }
        self.commit(buf);
        Ok(())
    }

    fn row_ready(&self, row: usize) -> Result<f64> {
        let mut ready = self.clock;
        for c in &self.cells[row * self.cols..(row + 1) * self.cols] {
            if c.output.is_none() {
                return Err(Error::Protocol(ProtocolViolation::Unmixed { row, col: c.col }));
            }
            ready = ready.max(c.ready_at);
        }
        Ok(ready)
    }

    fn schedule_merge(&mut self, buf: &mut Vec<Event>, row: usize, t: f64) -> Result<()> {
        let cols = self.cols;
        let hop = self.hop;
        let swap = self.faults.merge_z_before_y == Some(row);
        let skew = self.faults.skew_merge_arrival == Some(row);
        let z_open = t + cols as f64 * hop;
        let arrive = z_open + self.timing.merge;

        let mut droplets = Vec::with_capacity(cols);
        for c in &mut self.cells[row * cols..(row + 1) * cols] {
            droplets.push(c.output.take().expect("checked by row_ready"));
        }
        let states: Vec<_> = droplets
            .iter()
            .map(|d| {
                d.payload
                    .as_dna()
                    .cloned()
                    .ok_or_else(|| Error::arg("merge expects dna droplets"))
            })
            .collect::<Result<_>>()?;
        let merged = chem::merge_solutions(&states)?;
        let id = self.fresh_id();

        self.push(buf, Event::new(t, EventKind::MergeYOpen).in_row(row));
        if swap {
            self.push(buf, Event::new(t, EventKind::MergeZOpen).in_row(row));
        }
        for (col, d) in droplets.iter().enumerate() {
            let at = t + (cols - col) as f64 * hop;
            self.push(buf, Event::new(at, EventKind::MergeYCollect).at(row, col).with(d.id));
        }
        if !swap {
            self.push(buf, Event::new(z_open, EventKind::MergeZOpen).in_row(row));
        }
        for (col, d) in droplets.iter().enumerate() {
            // Merge channels are equal length, so every droplet arrives together.
            let at = if skew && col == 0 { arrive + hop } else { arrive };
            self.push(buf, Event::new(at, EventKind::MergeZArrive).at(row, col).with(d.id));
        }
        self.push(buf, Event::new(arrive, EventKind::MergeDone).in_row(row).with(id));

        let m = &mut self.merge_modules[row];
        m.y_open = false;
        m.z_open = false;
        m.merged = Some(Droplet {
            id,
            payload: Payload::Dna(merged),
            position: Segment::Pipeline { row },
            created_at: arrive,
        });
        m.ready_at = arrive;
        Ok(())
    }

    /// Merges one row into a single droplet: Y phase collects rightward,
    /// Z phase pushes every droplet up equal-length channels.
    pub fn merge_row(&mut self, row: usize) -> Result<&Droplet> {
        if row >= self.rows {
            return Err(Error::Protocol(ProtocolViolation::OutOfBounds { row, col: 0 }));
        }
        let t = self.row_ready(row)?;
        let mut buf = Vec::new();
        self.schedule_merge(&mut buf, row, t)?;
        self.commit(buf);
        Ok(self.merge_modules[row].merged.as_ref().expect("just merged"))
    }

    /// Merges every row in parallel.
    pub fn merge_rows(&mut self) -> Result<Vec<Droplet>> {
        let mut t = self.clock;
        for r in 0..self.rows {
            t = t.max(self.row_ready(r)?);
        }
        let mut buf = Vec::new();
        for r in 0..self.rows {
            self.schedule_merge(&mut buf, r, t)?;
        }
        self.commit(buf);
        Ok(self
            .merge_modules
            .iter()
            .map(|m| m.merged.clone().expect("just merged"))
            .collect())
    }

    fn schedule_pipeline(
        &mut self,
        buf: &mut Vec<Event>,
        row: usize,
        activation: &ActivationParams,
        params: &PipelineParams,
        t: f64,
    ) -> Result<PipelineOutput> {
        let merged = self.merge_modules[row]
            .merged
            .take()
            .ok_or(Error::Protocol(ProtocolViolation::NotMerged { row }))?;
        let Payload::Dna(state) = &merged.payload else {
            return Err(Error::arg(alloc::format!(
                "pipeline expects a merged dna droplet, got {}",
                merged.payload.kind()
            )));
        };
        let tc = self.timing;
        let pool = chem::probe_readout(state, &params.err);
        let pre_activation = pool.fraction();
        let output = chem::seesaw_activation(pre_activation, activation, &params.err);
        let dose = chem::translate_to_enzyme(output, pool.reference_total, &params.err);
        let fresh = chem::nick_fresh_site_a(
            &dose,
            pool.reference_total,
            params.fresh_total,
            params.mode,
            derive_seed(params.seed, &[row as u64]),
        )?;
        let id = self.fresh_id();

        let mut at = t + tc.displacement;
        self.push(buf, Event::new(at, EventKind::StageDisplacement).in_row(row).with(merged.id));
        at += tc.threshold;
        self.push(buf, Event::new(at, EventKind::StageThreshold).in_row(row).with(merged.id));
        at += tc.gate;
        self.push(buf, Event::new(at, EventKind::StageGate).in_row(row).with(merged.id));
        at += tc.translation;
        self.push(buf, Event::new(at, EventKind::StageTranslation).in_row(row).with(merged.id));
        at += tc.nick;
        self.push(buf, Event::new(at, EventKind::StageNick).in_row(row).with(id));

        let droplet = Droplet {
            id,
            payload: Payload::Dna(fresh),
            position: Segment::Pipeline { row },
            created_at: at,
        };
        let m = &mut self.merge_modules[row];
        m.processed = Some(droplet.clone());
        m.ready_at = at;
        Ok(PipelineOutput {
            droplet,
            pre_activation,
            output,
        })
    }

    /// Heat and probe, threshold, gate, translate to enzyme, nick fresh DNA.
    pub fn run_reaction_pipeline(&mut self, row: usize, activation: &ActivationParams, params: &PipelineParams) -> Result<PipelineOutput> {
        let m = self
            .merge_modules
            .get(row)
            .ok_or(Error::Protocol(ProtocolViolation::NotMerged { row }))?;
        let t = self.clock.max(m.ready_at);
        let mut buf = Vec::with_capacity(5);
        let out = self.schedule_pipeline(&mut buf, row, activation, params, t)?;
        self.commit(buf);
        Ok(out)
    }

    /// Runs every row's pipeline in parallel, one activation per row.
    pub fn run_pipelines(&mut self, activations: &[ActivationParams], params: &PipelineParams) -> Result<Vec<PipelineOutput>> {
        if activations.len() != self.rows {
            return Err(Error::LengthMismatch {
                left: activations.len(),
                right: self.rows,
            });
        }
        let t = self.merge_modules.iter().fold(self.clock, |t, m| t.max(m.ready_at));
        let mut buf = Vec::with_capacity(5 * self.rows);
        let mut outs = Vec::with_capacity(self.rows);
        for (row, act) in activations.iter().enumerate() {
            outs.push(self.schedule_pipeline(&mut buf, row, act, params, t)?);
        }
        self.commit(buf);
        Ok(outs)
    }

    fn schedule_separation(&mut self, buf: &mut Vec<Event>, row: usize, k: usize, seed: u64, t: f64) -> Result<Vec<Droplet>> {
        let source = self.merge_modules[row]
            .processed
            .take()
            .ok_or(Error::Protocol(ProtocolViolation::NoPipelineOutput { row }))?;
        let Payload::Dna(state) = &source.payload else {
            return Err(Error::arg("separator expects a dna droplet"));
        };
        let parts = chem::split_droplet(state, k, seed)?;
        let mut out = Vec::with_capacity(k);
        for (slot, part) in parts.into_iter().enumerate() {
            let id = self.fresh_id();
            let at = t + (slot + 1) as f64 * self.hop;
            self.push(buf, Event::new(at, EventKind::SeparateEmit).at(row, slot).with(id));
            out.push(Droplet {
                id,
                payload: Payload::Dna(part),
                position: Segment::Separator { row, slot },
                created_at: at,
            });
        }
        Ok(out)
    }

    /// Pinches a row's pipeline output into `k` equally spaced droplets.
    pub fn separate_droplet(&mut self, row: usize, k: usize, seed: u64) -> Result<Vec<Droplet>> {
        let m = self
            .merge_modules
            .get(row)
            .ok_or(Error::Protocol(ProtocolViolation::NoPipelineOutput { row }))?;
        let t = self.clock.max(m.ready_at);
        let mut buf = Vec::with_capacity(k);
        let out = self.schedule_separation(&mut buf, row, k, seed, t)?;
        self.commit(buf);
        Ok(out)
    }

    /// Separates every row in parallel.
    pub fn separate_all(&mut self, k: usize, seed: u64) -> Result<Vec<Vec<Droplet>>> {
        let t = self.merge_modules.iter().fold(self.clock, |t, m| t.max(m.ready_at));
        let mut buf = Vec::with_capacity(k * self.rows);
        let mut out = Vec::with_capacity(self.rows);
        for row in 0..self.rows {
            out.push(self.schedule_separation(&mut buf, row, k, derive_seed(seed, &[row as u64]), t)?);
        }
        self.commit(buf);
        Ok(out)
    }
}

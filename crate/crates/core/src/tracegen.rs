//! Byte-level access streams for both schedules.
//!
//! No arithmetic happens here; each operation of a schedule is turned into the
//! reads and writes a cache-blocked implementation would issue, in program
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{NetworkConfig, TensorTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Schedule {
    /// Concatenated G read every step.
    #[serde(rename = "a")]
    A,
    /// Split G: G1 once per layer, G2 every step.
    #[serde(rename = "a+")]
    APlus,
}

impl Schedule {
    pub fn as_str(self) -> &'static str {
        match self {
            Schedule::A => "a",
            Schedule::APlus => "a+",
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Schedule::A),
            "a+" | "aplus" | "a-plus" => Ok(Schedule::APlus),
            other => Err(Error::InvalidConfig(format!("unknown schedule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Init,
    Matvec,
    Precompute,
    Accumulate,
    Activate,
    StateUpdate,
    Attention,
    Softmax,
}

impl Op {
    fn as_str(self) -> &'static str {
        match self {
            Op::Init => "init",
            Op::Matvec => "matvec",
            Op::Precompute => "precompute",
            Op::Accumulate => "accumulate",
            Op::Activate => "activate",
            Op::StateUpdate => "state",
            Op::Attention => "attention",
            Op::Softmax => "softmax",
        }
    }
}

/// Where in the schedule an access was issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase {
    pub layer: Option<u32>,
    pub step: Option<u32>,
    pub op: Op,
}

impl Phase {
    pub fn new(layer: usize, step: Option<usize>, op: Op) -> Self {
        Self { layer: Some(layer as u32), step: step.map(|s| s as u32), op }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(l) => write!(f, "L{l}")?,
            None => f.write_str("L-")?,
        }
        match self.step {
            Some(t) => write!(f, ".T{t}")?,
            None => f.write_str(".T-")?,
        }
        write!(f, ".{}", self.op.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessEvent {
    pub tensor: usize,
    pub offset: u64,
    pub len: u64,
    pub kind: AccessKind,
    pub phase: Phase,
}

/// A contiguous byte range of one tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub tensor: usize,
    pub offset: u64,
    pub len: u64,
}

impl Span {
    pub fn new(tensor: usize, offset: u64, len: u64) -> Self {
        Self { tensor, offset, len }
    }

    fn sub(&self, offset: u64, len: u64) -> Span {
        Span { tensor: self.tensor, offset: self.offset + offset, len }
    }

    fn event(&self, kind: AccessKind, phase: Phase) -> AccessEvent {
        AccessEvent { tensor: self.tensor, offset: self.offset, len: self.len, kind, phase }
    }
}

/// Rows `row0..row0 + rows` of a weight tensor, multiplied against `x`.
#[derive(Debug, Clone, Copy)]
pub struct RowBlock {
    pub matrix: usize,
    pub row0: usize,
    pub rows: usize,
    pub x: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Upper bound on the bytes of one matrix panel.
    pub block_bytes: u64,
    /// Seeds the token sequence fed through the embedding.
    pub seed: u64,
}

impl TraceOptions {
    /// Blocks sized to half of the given cache capacity.
    pub fn for_cache_bytes(capacity: u64) -> Self {
        Self { block_bytes: (capacity / 2).max(1), seed: 0 }
    }
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self::for_cache_bytes(12 << 20)
    }
}

/// Ordered access stream over a tensor table.
#[derive(Debug, Clone)]
pub struct MemoryTrace {
    pub table: TensorTable,
    pub events: Vec<AccessEvent>,
}

impl MemoryTrace {
    /// Bytes read from (or written to) each tensor, indexed by tensor id.
    pub fn bytes_by_tensor(&self, kind: AccessKind) -> Vec<u64> {
        let mut out = vec![0; self.table.handles.len()];
        for e in self.events.iter().filter(|e| e.kind == kind) {
            out[e.tensor] += e.len;
        }
        out
    }

    pub fn weight_read_bytes(&self) -> u64 {
        self.bytes_by_tensor(AccessKind::Read)
            .iter()
            .zip(&self.table.handles)
            .filter(|(_, h)| h.role.is_weight())
            .map(|(b, _)| b)
            .sum()
    }

    /// Checks bounds and that no intermediate is read before it is written.
    pub fn validate(&self) -> Result<()> {
        let mut written: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); self.table.handles.len()];
        for e in &self.events {
            let h = self.table.get(e.tensor)?;
            if e.offset + e.len > h.byte_len {
                return Err(Error::OutOfBounds {
                    tensor: e.tensor,
                    offset: e.offset,
                    len: e.len,
                    byte_len: h.byte_len,
                });
            }
            let ranges = &mut written[e.tensor];
            match e.kind {
                AccessKind::Write => insert_range(ranges, e.offset, e.offset + e.len),
                AccessKind::Read if !h.role.is_predefined() => {
                    if !covers(ranges, e.offset, e.offset + e.len) {
                        return Err(Error::Dimension(format!(
                            "{} reads {} bytes of {} at {} before they are written",
                            e.phase,
                            e.len,
                            h.role.as_str(),
                            e.offset
                        )));
                    }
                }
                AccessKind::Read => {}
            }
        }
        Ok(())
    }

    /// One event per line: `phase  tensor_id  kind  offset  len`, tab separated.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            let kind = match e.kind {
                AccessKind::Read => "R",
                AccessKind::Write => "W",
            };
            writeln!(out, "{}\t{}\t{}\t{}\t{}", e.phase, e.tensor, kind, e.offset, e.len)?;
        }
        Ok(())
    }
}

fn insert_range(ranges: &mut BTreeMap<u64, u64>, mut start: u64, mut end: u64) {
    let overlapping: Vec<(u64, u64)> =
        ranges.range(..=end).rev().take_while(|(_, &e)| e >= start).map(|(&s, &e)| (s, e)).collect();
    for (s, e) in overlapping {
        ranges.remove(&s);
        start = start.min(s);
        end = end.max(e);
    }
    ranges.insert(start, end);
}

fn covers(ranges: &BTreeMap<u64, u64>, start: u64, end: u64) -> bool {
    ranges.range(..=start).next_back().is_some_and(|(_, &e)| e >= end)
}

fn check_block(block_bytes: u64) -> Result<()> {
    if block_bytes == 0 {
        Err(Error::InvalidConfig("block_bytes must be positive".into()))
    } else {
        Ok(())
    }
}

/// Blocked `y = M^T x` over one or more stacked row blocks.
///
/// Each block is cut into row panels of at most `block_bytes` (at least one
/// row). Per panel: read the matching slice of x, stream the panel, read the
/// partial y unless this is the first panel, write y. Every byte of the
/// matrix is read exactly once.
pub fn trace_blocked_matvec(
    table: &TensorTable,
    blocks: &[RowBlock],
    y: Span,
    block_bytes: u64,
    phase: Phase,
    out: &mut Vec<AccessEvent>,
) -> Result<()> {
    check_block(block_bytes)?;
    let eb = table.element_bytes as u64;
    let mut first = true;
    for b in blocks {
        let m = table.get(b.matrix)?;
        if b.rows == 0 || m.cols == 0 {
            return Err(Error::Dimension(format!("degenerate {}x{} matrix", b.rows, m.cols)));
        }
        let row_bytes = m.row_bytes(table.element_bytes);
        let rows_per_panel = (block_bytes / row_bytes).max(1) as usize;
        let mut r = 0;
        while r < b.rows {
            let rows = rows_per_panel.min(b.rows - r);
            out.push(b.x.sub(r as u64 * eb, rows as u64 * eb).event(AccessKind::Read, phase));
            let panel = Span::new(b.matrix, (b.row0 + r) as u64 * row_bytes, rows as u64 * row_bytes);
            out.push(panel.event(AccessKind::Read, phase));
            if !first {
                out.push(y.event(AccessKind::Read, phase));
            }
            out.push(y.event(AccessKind::Write, phase));
            first = false;
            r += rows;
        }
    }
    Ok(())
}

/// Blocked `y = M^T x` for a whole matrix tensor.
pub fn trace_matvec(
    table: &TensorTable,
    matrix: usize,
    x: Span,
    y: Span,
    block_bytes: u64,
    phase: Phase,
) -> Result<Vec<AccessEvent>> {
    let rows = table.get(matrix)?.rows;
    let mut out = Vec::new();
    let block = RowBlock { matrix, row0: 0, rows, x };
    trace_blocked_matvec(table, &[block], y, block_bytes, phase, &mut out)?;
    Ok(out)
}

/// Blocked `Y[t] = M^T x[t]` for all steps: each matrix panel is read once
/// and every input row streamed against it.
pub fn trace_blocked_matmul(
    table: &TensorTable,
    matrix: usize,
    xs: &[Span],
    ys: &[Span],
    block_bytes: u64,
    phase: Phase,
    out: &mut Vec<AccessEvent>,
) -> Result<()> {
    check_block(block_bytes)?;
    let m = table.get(matrix)?;
    if m.rows == 0 || m.cols == 0 || xs.is_empty() {
        return Err(Error::Dimension("degenerate matmul".into()));
    }
    let eb = table.element_bytes as u64;
    let row_bytes = m.row_bytes(table.element_bytes);
    let rows_per_panel = (block_bytes / row_bytes).max(1) as usize;
    let mut r = 0;
    while r < m.rows {
        let rows = rows_per_panel.min(m.rows - r);
        out.push(Span::new(matrix, r as u64 * row_bytes, rows as u64 * row_bytes).event(AccessKind::Read, phase));
        for (x, y) in xs.iter().zip(ys) {
            out.push(x.sub(r as u64 * eb, rows as u64 * eb).event(AccessKind::Read, phase));
            if r > 0 {
                out.push(y.event(AccessKind::Read, phase));
            }
            out.push(y.event(AccessKind::Write, phase));
        }
        r += rows;
    }
    Ok(())
}

/// Token ids fed through the embedding, one per step.
pub fn token_sequence(config: &NetworkConfig, seed: u64) -> Vec<usize> {
    if config.vocab_size == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..config.input_length).map(|_| rng.gen_range(0..config.vocab_size)).collect()
}

struct Builder<'a> {
    config: &'a NetworkConfig,
    table: TensorTable,
    opts: TraceOptions,
    tokens: Vec<usize>,
    events: Vec<AccessEvent>,
}

impl<'a> Builder<'a> {
    fn new(config: &'a NetworkConfig, opts: TraceOptions) -> Result<Self> {
        let table = TensorTable::layout(config)?;
        check_block(opts.block_bytes)?;
        Ok(Self { config, table, opts, tokens: token_sequence(config, opts.seed), events: Vec::new() })
    }

    fn eb(&self) -> u64 {
        self.config.element_bytes as u64
    }

    fn row(&self, tensor: usize, row: usize) -> Span {
        let h = self.table.handle(tensor);
        let rb = h.row_bytes(self.config.element_bytes);
        Span::new(tensor, row as u64 * rb, rb)
    }

    fn whole(&self, tensor: usize) -> Span {
        Span::new(tensor, 0, self.table.handle(tensor).byte_len)
    }

    fn push(&mut self, span: Span, kind: AccessKind, phase: Phase) {
        self.events.push(span.event(kind, phase));
    }

    /// Input vector of `layer` at step `t`.
    fn layer_input(&self, layer: usize, t: usize) -> Span {
        if layer > 0 {
            return self.row(self.table.layers[layer - 1].hidden, t + 1);
        }
        match (self.table.embedding, self.table.input) {
            (Some(emb), _) => self.row(emb, self.tokens[t]),
            (None, Some(input)) => self.row(input, t),
            (None, None) => unreachable!("layout has either an embedding or an input tensor"),
        }
    }

    fn init_layer(&mut self, layer: usize) {
        let lt = self.table.layers[layer].clone();
        let phase = Phase::new(layer, None, Op::Init);
        self.push(self.row(lt.hidden, 0), AccessKind::Write, phase);
        if let Some(c) = lt.cell {
            self.push(self.whole(c), AccessKind::Write, phase);
        }
    }

    /// Gate nonlinearities, state update and whatever follows the step.
    fn finish_step(&mut self, layer: usize, t: usize) -> Result<()> {
        let lt = self.table.layers[layer].clone();
        let gates = self.whole(lt.gates);
        let act = Phase::new(layer, Some(t), Op::Activate);
        self.push(gates, AccessKind::Read, act);
        self.push(gates, AccessKind::Write, act);

        let upd = Phase::new(layer, Some(t), Op::StateUpdate);
        self.push(gates, AccessKind::Read, upd);
        match lt.cell {
            Some(c) => {
                self.push(self.whole(c), AccessKind::Read, upd);
                self.push(self.whole(c), AccessKind::Write, upd);
            }
            None => self.push(self.row(lt.hidden, t), AccessKind::Read, upd),
        }
        let h_out = self.row(lt.hidden, t + 1);
        self.push(h_out, AccessKind::Write, upd);

        if let (Some(att), Some(ctx)) = (self.table.attention, self.table.context) {
            if self.config.first_decoder_layer() == Some(layer) {
                let phase = Phase::new(layer, Some(t), Op::Attention);
                let y = self.whole(ctx);
                let rows = self.table.handle(att).rows;
                let block = RowBlock { matrix: att, row0: 0, rows, x: h_out };
                trace_blocked_matvec(&self.table, &[block], y, self.opts.block_bytes, phase, &mut self.events)?;
            }
        }

        let last_layer = layer + 1 == self.config.num_layers;
        let last_step = t + 1 == self.config.input_length;
        if let (true, Some(sm), Some(logits)) = (last_layer, self.table.softmax, self.table.logits) {
            if self.config.softmax_every_step || last_step {
                let phase = Phase::new(layer, Some(t), Op::Softmax);
                let y = self.whole(logits);
                let rows = self.table.handle(sm).rows;
                let block = RowBlock { matrix: sm, row0: 0, rows, x: h_out };
                trace_blocked_matvec(&self.table, &[block], y, self.opts.block_bytes, phase, &mut self.events)?;
                self.push(y, AccessKind::Read, phase);
                self.push(y, AccessKind::Write, phase);
            }
        }
        Ok(())
    }

    fn layer_concatenated(&mut self, layer: usize) -> Result<()> {
        self.init_layer(layer);
        let lt = self.table.layers[layer].clone();
        let d = self.config.layer_dims()[layer];
        for t in 0..self.config.input_length {
            let blocks = [
                RowBlock { matrix: lt.g1, row0: 0, rows: d.input, x: self.layer_input(layer, t) },
                RowBlock { matrix: lt.g2, row0: 0, rows: d.hidden, x: self.row(lt.hidden, t) },
            ];
            let phase = Phase::new(layer, Some(t), Op::Matvec);
            let y = self.whole(lt.gates);
            trace_blocked_matvec(&self.table, &blocks, y, self.opts.block_bytes, phase, &mut self.events)?;
            self.finish_step(layer, t)?;
        }
        Ok(())
    }

    fn layer_split(&mut self, layer: usize) -> Result<()> {
        self.init_layer(layer);
        let lt = self.table.layers[layer].clone();
        let d = self.config.layer_dims()[layer];
        let steps = self.config.input_length;
        let xp_width = d.gate_width() as u64 * self.eb();
        let xs: Vec<Span> = (0..steps).map(|t| self.layer_input(layer, t)).collect();
        let ys: Vec<Span> = (0..steps)
            .map(|t| {
                let row = self.row(self.table.precomputed, t);
                Span::new(row.tensor, row.offset, xp_width)
            })
            .collect();
        let phase = Phase::new(layer, None, Op::Precompute);
        trace_blocked_matmul(&self.table, lt.g1, &xs, &ys, self.opts.block_bytes, phase, &mut self.events)?;

        for (t, &xp) in ys.iter().enumerate() {
            let phase = Phase::new(layer, Some(t), Op::Matvec);
            let gates = self.whole(lt.gates);
            let block = RowBlock { matrix: lt.g2, row0: 0, rows: d.hidden, x: self.row(lt.hidden, t) };
            trace_blocked_matvec(&self.table, &[block], gates, self.opts.block_bytes, phase, &mut self.events)?;
            let acc = Phase::new(layer, Some(t), Op::Accumulate);
            self.push(xp, AccessKind::Read, acc);
            self.push(gates, AccessKind::Read, acc);
            self.push(gates, AccessKind::Write, acc);
            self.finish_step(layer, t)?;
        }
        Ok(())
    }

    fn finish(self) -> MemoryTrace {
        MemoryTrace { table: self.table, events: self.events }
    }
}

/// Layer-major, step-inner trace reading the full G each step.
pub fn trace_schedule_a(config: &NetworkConfig, opts: TraceOptions) -> Result<MemoryTrace> {
    let mut b = Builder::new(config, opts)?;
    for layer in 0..config.num_layers {
        b.layer_concatenated(layer)?;
    }
    Ok(b.finish())
}

/// Split-G trace. Decoder layers keep the per-step concatenated order.
pub fn trace_schedule_a_plus(config: &NetworkConfig, opts: TraceOptions) -> Result<MemoryTrace> {
    let mut b = Builder::new(config, opts)?;
    for layer in 0..config.num_layers {
        if config.is_decoder_layer(layer) {
            b.layer_concatenated(layer)?;
        } else {
            b.layer_split(layer)?;
        }
    }
    Ok(b.finish())
}

pub fn trace_schedule(config: &NetworkConfig, schedule: Schedule, opts: TraceOptions) -> Result<MemoryTrace> {
    match schedule {
        Schedule::A => trace_schedule_a(config, opts),
        Schedule::APlus => trace_schedule_a_plus(config, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellType, TensorRole};

    const MIB: u64 = 1 << 20;

    fn lstm512(t: usize) -> NetworkConfig {
        NetworkConfig::new(CellType::LSTM, 512, 1, t)
    }

    fn role_read_bytes(trace: &MemoryTrace, role: TensorRole) -> u64 {
        trace
            .bytes_by_tensor(AccessKind::Read)
            .iter()
            .zip(&trace.table.handles)
            .filter(|(_, h)| h.role == role)
            .map(|(b, _)| b)
            .sum()
    }

    fn unit_table() -> TensorTable {
        let handle = |id: usize, role: TensorRole| crate::model::TensorHandle {
            id,
            role,
            layer: Some(0),
            rows: 1,
            cols: 1,
            base_address: id as u64 * 4096,
            byte_len: 4,
        };
        let mut table = TensorTable::layout(&NetworkConfig::new(CellType::GRU, 1, 1, 1)).unwrap();
        table.handles = vec![
            handle(0, TensorRole::InputWeight),
            handle(1, TensorRole::InputVector),
            handle(2, TensorRole::GateBuffer),
        ];
        table
    }

    #[test]
    fn one_by_one_matvec() {
        let table = unit_table();
        let (x, y) = (Span::new(1, 0, 4), Span::new(2, 0, 4));
        let out = trace_matvec(&table, 0, x, y, 64, Phase::new(0, Some(0), Op::Matvec)).unwrap();
        let kinds: Vec<_> = out.iter().map(|e| (e.tensor, e.kind, e.len)).collect();
        assert_eq!(kinds, vec![(1, AccessKind::Read, 4), (0, AccessKind::Read, 4), (2, AccessKind::Write, 4)]);
    }

    #[test]
    fn matvec_reads_every_matrix_byte_once() {
        let cfg = NetworkConfig::new(CellType::GRU, 37, 1, 1).with_input_size(11);
        let table = TensorTable::layout(&cfg).unwrap();
        let lt = &table.layers[0];
        let g2 = table.handle(lt.g2);
        let x = Span::new(lt.hidden, 0, 37 * 4);
        let y = Span::new(lt.gates, 0, 111 * 4);
        for block in [1, 64, 500, 4096, 1 << 30] {
            let ev = trace_matvec(&table, lt.g2, x, y, block, Phase::new(0, None, Op::Matvec)).unwrap();
            let m: u64 = ev.iter().filter(|e| e.tensor == lt.g2).map(|e| e.len).sum();
            assert_eq!(m, g2.byte_len);
            let panels = ev.iter().filter(|e| e.tensor == lt.g2).count() as u64;
            let x_bytes: u64 = ev.iter().filter(|e| e.tensor == lt.hidden).map(|e| e.len).sum();
            assert_eq!(x_bytes, 37 * 4);
            let y_writes = ev.iter().filter(|e| e.tensor == lt.gates && e.kind == AccessKind::Write).count();
            assert_eq!(y_writes as u64, panels);
        }
        assert!(trace_matvec(&table, lt.g2, x, y, 0, Phase::new(0, None, Op::Matvec)).is_err());
    }

    #[test]
    fn schedule_a_step_reads_8_mib_of_weights() {
        let t = trace_schedule_a(&lstm512(1), TraceOptions::for_cache_bytes(4 * MIB)).unwrap();
        assert_eq!(t.weight_read_bytes(), 8 * MIB);
    }

    #[test]
    fn weight_reads_800_vs_404_mib() {
        let opts = TraceOptions::for_cache_bytes(4 * MIB);
        let a = trace_schedule_a(&lstm512(100), opts).unwrap();
        let ap = trace_schedule_a_plus(&lstm512(100), opts).unwrap();
        assert_eq!(a.weight_read_bytes(), 800 * MIB);
        assert_eq!(ap.weight_read_bytes(), 404 * MIB);
        assert_eq!(role_read_bytes(&ap, TensorRole::InputWeight), 4 * MIB);
        assert_eq!(role_read_bytes(&ap, TensorRole::RecurrentWeight), 400 * MIB);
    }

    #[test]
    fn single_step_weight_bytes_agree() {
        for cell in [CellType::LSTM, CellType::GRU] {
            let cfg = NetworkConfig::new(cell, 48, 3, 1).with_vocab(60);
            let opts = TraceOptions { block_bytes: 4096, seed: 3 };
            let a = trace_schedule_a(&cfg, opts).unwrap();
            let ap = trace_schedule_a_plus(&cfg, opts).unwrap();
            assert_eq!(a.weight_read_bytes(), ap.weight_read_bytes());
        }
    }

    #[test]
    fn gru_precompute_covers_three_input_matrices() {
        let cfg = NetworkConfig::new(CellType::GRU, 512, 1, 10);
        let ap = trace_schedule_a_plus(&cfg, TraceOptions::default()).unwrap();
        let pre: u64 = ap
            .events
            .iter()
            .filter(|e| e.phase.op == Op::Precompute && ap.table.handle(e.tensor).role == TensorRole::InputWeight)
            .map(|e| e.len)
            .sum();
        assert_eq!(pre, 512 * 3 * 512 * 4);
        let written: u64 = ap
            .events
            .iter()
            .filter(|e| e.phase.op == Op::Precompute && e.kind == AccessKind::Write)
            .map(|e| e.len)
            .max()
            .unwrap();
        assert_eq!(written, 3 * 512 * 4);
    }

    #[test]
    fn conservation_per_layer() {
        let mut cfg = NetworkConfig::new(CellType::LSTM, 40, 3, 9).with_vocab(60);
        cfg.layer_sizes = Some(vec![40, 24, 56]);
        let opts = TraceOptions { block_bytes: 2048, seed: 1 };
        let a = trace_schedule_a(&cfg, opts).unwrap();
        let ap = trace_schedule_a_plus(&cfg, opts).unwrap();
        let reads_a = a.bytes_by_tensor(AccessKind::Read);
        let reads_ap = ap.bytes_by_tensor(AccessKind::Read);
        for lt in &a.table.layers {
            let g1 = a.table.handle(lt.g1).byte_len;
            let g2 = a.table.handle(lt.g2).byte_len;
            assert_eq!(reads_a[lt.g1] + reads_a[lt.g2], 9 * (g1 + g2));
            assert_eq!(reads_ap[lt.g1], g1);
            assert_eq!(reads_ap[lt.g2], 9 * g2);
        }
        let sm = a.table.softmax.unwrap();
        assert_eq!(reads_a[sm], 9 * a.table.handle(sm).byte_len);
    }

    #[test]
    fn both_schedules_touch_same_weight_set() {
        let cfg = NetworkConfig::new(CellType::GRU, 20, 2, 4);
        let opts = TraceOptions { block_bytes: 1000, seed: 0 };
        let a = trace_schedule_a(&cfg, opts).unwrap();
        let ap = trace_schedule_a_plus(&cfg, opts).unwrap();
        let touched = |tr: &MemoryTrace| {
            let mut v: Vec<_> =
                tr.events.iter().filter(|e| tr.table.handle(e.tensor).role.is_weight()).map(|e| e.tensor).collect();
            v.sort();
            v.dedup();
            v
        };
        assert_eq!(touched(&a), touched(&ap));
    }

    #[test]
    fn traces_are_legal() {
        for cell in [CellType::LSTM, CellType::GRU] {
            for vocab in [0, 13] {
                let mut cfg = NetworkConfig::new(cell, 16, 4, 5).with_vocab(vocab);
                cfg.decoder_layers = 2;
                cfg.attention = true;
                cfg.softmax_every_step = vocab % 2 == 0;
                for sched in [Schedule::A, Schedule::APlus] {
                    let tr = trace_schedule(&cfg, sched, TraceOptions { block_bytes: 512, seed: 7 }).unwrap();
                    tr.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn validate_rejects_read_before_write_and_overflow() {
        let cfg = NetworkConfig::new(CellType::LSTM, 4, 1, 2);
        let mut tr = trace_schedule_a(&cfg, TraceOptions::default()).unwrap();
        let gates = tr.table.layers[0].gates;
        let phase = Phase::new(0, Some(0), Op::Activate);
        tr.events.insert(0, Span::new(gates, 0, 4).event(AccessKind::Read, phase));
        assert!(tr.validate().is_err());
        tr.events[0] = Span::new(gates, 0, 4096).event(AccessKind::Write, phase);
        assert!(matches!(tr.validate(), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn decoder_layers_fall_back_to_concatenated_order() {
        let mut cfg = NetworkConfig::new(CellType::LSTM, 8, 2, 3);
        cfg.decoder_layers = 1;
        let ap = trace_schedule_a_plus(&cfg, TraceOptions::default()).unwrap();
        let reads = ap.bytes_by_tensor(AccessKind::Read);
        let dec = &ap.table.layers[1];
        assert_eq!(reads[dec.g1], 3 * ap.table.handle(dec.g1).byte_len);
        assert!(ap.events.iter().all(|e| e.phase.op != Op::Precompute || e.phase.layer == Some(0)));
    }

    #[test]
    fn softmax_once_when_not_every_step() {
        let mut cfg = NetworkConfig::new(CellType::LSTM, 8, 1, 6).with_vocab(100);
        cfg.softmax_every_step = false;
        let a = trace_schedule_a(&cfg, TraceOptions::default()).unwrap();
        let sm = a.table.softmax.unwrap();
        assert_eq!(a.bytes_by_tensor(AccessKind::Read)[sm], a.table.handle(sm).byte_len);
    }

    #[test]
    fn dump_format() {
        let cfg = NetworkConfig::new(CellType::GRU, 1, 1, 1);
        let tr = trace_schedule_a(&cfg, TraceOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        let h = tr.table.layers[0].hidden;
        assert_eq!(first, format!("L0.T-.init\t{h}\tW\t0\t4"));
        assert!(text.lines().all(|l| l.split('\t').count() == 5));
    }

    #[test]
    fn schedule_parses() {
        assert_eq!("A+".parse::<Schedule>().unwrap(), Schedule::APlus);
        assert_eq!("a".parse::<Schedule>().unwrap(), Schedule::A);
        assert!("b".parse::<Schedule>().is_err());
    }
}

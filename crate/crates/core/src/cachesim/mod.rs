//! Replays access traces through an LRU cache and accounts the traffic that
//! crosses the memory boundary.
//!
//! Accesses are split into cache lines. Misses fetch the line (write misses
//! included), writes mark lines dirty, and evicting a dirty line counts one
//! line of write traffic. With `writeback_flush`, dirty lines still resident
//! at the end of a replay are written back as well.

mod lines;
mod range_lru;

pub use lines::{ReferenceLru, SetAssociativeLru};
pub use range_lru::RangeLru;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TensorTable, TENSOR_ALIGN};
use crate::tracegen::{AccessKind, MemoryTrace};

pub const MIB: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Associativity {
    Full,
    SetAssociative(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    pub associativity: Associativity,
    pub writeback_flush: bool,
    /// Count the fetch of a line allocated by a write miss as read traffic.
    #[serde(default = "default_true")]
    pub write_fill: bool,
}

fn default_true() -> bool {
    true
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity_bytes: 12 * MIB,
            line_bytes: 64,
            associativity: Associativity::Full,
            writeback_flush: true,
            write_fill: true,
        }
    }
}

impl CacheConfig {
    pub fn with_capacity(capacity_bytes: u64) -> Self {
        Self { capacity_bytes, ..Self::default() }
    }

    /// A fully-associative cache large enough to never evict.
    pub fn unbounded() -> Self {
        Self::with_capacity(1 << 60)
    }

    pub fn capacity_lines(&self) -> u64 {
        self.capacity_bytes / self.line_bytes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCache(m));
        if self.line_bytes == 0 || !self.line_bytes.is_power_of_two() || self.line_bytes > TENSOR_ALIGN {
            return bad(format!("line size {} must be a power of two up to {TENSOR_ALIGN}", self.line_bytes));
        }
        if self.capacity_bytes < self.line_bytes {
            return bad("capacity must hold at least one line".into());
        }
        if !self.capacity_bytes.is_multiple_of(self.line_bytes) {
            return bad(format!(
                "capacity {} is not a multiple of the line size {}",
                self.capacity_bytes, self.line_bytes
            ));
        }
        if let Associativity::SetAssociative(ways) = self.associativity {
            if ways == 0 || !self.capacity_lines().is_multiple_of(ways as u64) {
                return bad(format!("{ways} ways do not divide {} lines", self.capacity_lines()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorTraffic {
    pub read_bytes: u64,
    pub write_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficStats {
    pub mem_read_bytes: u64,
    pub mem_write_bytes: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub line_bytes: u64,
    /// Number of measured replays the totals cover.
    pub runs: u32,
    /// Indexed by tensor id.
    pub per_tensor: Vec<TensorTraffic>,
}

impl TrafficStats {
    pub fn total_bytes(&self) -> u64 {
        self.mem_read_bytes + self.mem_write_bytes
    }

    /// Read plus write traffic averaged over the measured runs.
    pub fn avg_rw_bytes(&self) -> f64 {
        self.total_bytes() as f64 / self.runs.max(1) as f64
    }

    /// Traffic restricted to weight tensors.
    pub fn weights_only(&self, table: &TensorTable) -> TensorTraffic {
        self.per_tensor.iter().zip(&table.handles).filter(|(_, h)| h.role.is_weight()).fold(
            TensorTraffic::default(),
            |acc, (t, _)| TensorTraffic {
                read_bytes: acc.read_bytes + t.read_bytes,
                write_bytes: acc.write_bytes + t.write_bytes,
            },
        )
    }
}

/// Line counters shared by the cache engines.
#[derive(Debug, Clone, Default)]
pub struct Accounting {
    pub hits: u64,
    pub misses: u64,
    /// Missed lines fetched from memory.
    pub fills: u64,
    pub writebacks: u64,
    skip_write_fills: bool,
    per_tensor: Vec<(u64, u64)>,
}

impl Accounting {
    fn for_config(config: &CacheConfig) -> Self {
        Self { skip_write_fills: !config.write_fill, ..Self::default() }
    }

    fn slot(&mut self, tensor: usize) -> &mut (u64, u64) {
        if tensor >= self.per_tensor.len() {
            self.per_tensor.resize(tensor + 1, (0, 0));
        }
        &mut self.per_tensor[tensor]
    }

    pub(crate) fn miss(&mut self, tensor: usize, lines: u64, write: bool) {
        self.misses += lines;
        if !(write && self.skip_write_fills) {
            self.fills += lines;
            self.slot(tensor).0 += lines;
        }
    }

    pub(crate) fn writeback(&mut self, tensor: usize, lines: u64) {
        self.writebacks += lines;
        self.slot(tensor).1 += lines;
    }
}

/// A cache that can be fed ascending runs of consecutive lines.
pub trait LineCache: Send {
    fn access(&mut self, first: u64, count: u64, write: bool, tensor: usize, acct: &mut Accounting);
    fn flush(&mut self, acct: &mut Accounting);
}

/// A stateful cache instance plus its counters.
pub struct Simulator {
    config: CacheConfig,
    cache: Box<dyn LineCache>,
    acct: Accounting,
}

impl Simulator {
    /// Range-based engine when fully associative, per-line sets otherwise.
    pub fn new(config: CacheConfig) -> Result<Self> {
        config.validate()?;
        let lines = config.capacity_lines();
        let cache: Box<dyn LineCache> = match config.associativity {
            Associativity::Full => Box::new(RangeLru::new(lines)),
            Associativity::SetAssociative(ways) => Box::new(SetAssociativeLru::new(lines, ways)),
        };
        Ok(Self { config, cache, acct: Accounting::for_config(&config) })
    }

    /// Per-line engines only; the fully-associative case uses the naive list.
    pub fn reference(config: CacheConfig) -> Result<Self> {
        config.validate()?;
        let lines = config.capacity_lines();
        let cache: Box<dyn LineCache> = match config.associativity {
            Associativity::Full => Box::new(ReferenceLru::new(lines)),
            Associativity::SetAssociative(ways) => Box::new(SetAssociativeLru::new(lines, ways)),
        };
        Ok(Self { config, cache, acct: Accounting::for_config(&config) })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    /// Accesses `len` bytes at absolute `address`.
    pub fn access(&mut self, address: u64, len: u64, write: bool, tensor: usize) {
        if len == 0 {
            return;
        }
        let lb = self.config.line_bytes;
        let first = address / lb;
        let last = (address + len - 1) / lb;
        self.cache.access(first, last - first + 1, write, tensor, &mut self.acct);
    }

    pub fn replay(&mut self, trace: &MemoryTrace) -> Result<()> {
        for e in &trace.events {
            let h = trace.table.get(e.tensor)?;
            if e.offset + e.len > h.byte_len {
                return Err(Error::OutOfBounds {
                    tensor: e.tensor,
                    offset: e.offset,
                    len: e.len,
                    byte_len: h.byte_len,
                });
            }
            self.access(h.base_address + e.offset, e.len, e.kind == AccessKind::Write, e.tensor);
        }
        Ok(())
    }

    pub fn flush(&mut self) {
        self.cache.flush(&mut self.acct);
    }

    /// Returns and resets the counters; the cache contents are kept.
    pub fn take_stats(&mut self, runs: u32) -> TrafficStats {
        let acct = std::mem::replace(&mut self.acct, Accounting::for_config(&self.config));
        let lb = self.config.line_bytes;
        TrafficStats {
            mem_read_bytes: acct.fills * lb,
            mem_write_bytes: acct.writebacks * lb,
            hits: acct.hits,
            misses: acct.misses,
            writebacks: acct.writebacks,
            line_bytes: lb,
            runs,
            per_tensor: acct
                .per_tensor
                .iter()
                .map(|&(r, w)| TensorTraffic { read_bytes: r * lb, write_bytes: w * lb })
                .collect(),
        }
    }
}

fn pad_tensors(mut stats: TrafficStats, table: &TensorTable) -> TrafficStats {
    stats.per_tensor.resize(table.handles.len().max(stats.per_tensor.len()), TensorTraffic::default());
    stats
}

/// One replay from a cold cache.
pub fn simulate(trace: &MemoryTrace, cache: &CacheConfig) -> Result<TrafficStats> {
    let mut sim = Simulator::new(*cache)?;
    sim.replay(trace)?;
    if cache.writeback_flush {
        sim.flush();
    }
    Ok(pad_tensors(sim.take_stats(1), &trace.table))
}

/// One uncounted warm-up replay followed by `runs` measured replays. The
/// returned totals cover all measured runs; `avg_rw_bytes` averages them.
pub fn simulate_warm(trace: &MemoryTrace, cache: &CacheConfig, runs: u32) -> Result<TrafficStats> {
    if runs == 0 {
        return Err(Error::InvalidCache("warm runs must be positive".into()));
    }
    let mut sim = Simulator::new(*cache)?;
    sim.replay(trace)?;
    sim.take_stats(0);
    for _ in 0..runs {
        sim.replay(trace)?;
    }
    if cache.writeback_flush {
        sim.flush();
    }
    Ok(pad_tensors(sim.take_stats(runs), &trace.table))
}

/// Distinct bytes touched by the trace, counted in whole lines.
pub fn unique_footprint(trace: &MemoryTrace, line_bytes: u64) -> Result<u64> {
    let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(trace.events.len());
    for e in trace.events.iter().filter(|e| e.len > 0) {
        let h = trace.table.get(e.tensor)?;
        let addr = h.base_address + e.offset;
        ranges.push((addr / line_bytes, (addr + e.len - 1) / line_bytes + 1));
    }
    ranges.sort_unstable();
    let mut lines = 0;
    let mut cur: Option<(u64, u64)> = None;
    for (s, e) in ranges {
        cur = match cur {
            Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                lines += ce - cs;
                Some((s, e))
            }
            None => Some((s, e)),
        };
    }
    if let Some((cs, ce)) = cur {
        lines += ce - cs;
    }
    Ok(lines * line_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats(sim: &mut Simulator) -> TrafficStats {
        sim.flush();
        sim.take_stats(1)
    }

    #[test]
    fn reread_one_line() {
        let mut sim = Simulator::new(CacheConfig::with_capacity(64)).unwrap();
        sim.access(0, 8, false, 0);
        sim.access(16, 8, false, 0);
        let s = stats(&mut sim);
        assert_eq!((s.misses, s.hits, s.mem_read_bytes), (1, 1, 64));
    }

    #[test]
    fn write_miss_allocates_and_flushes() {
        let mut sim = Simulator::new(CacheConfig::with_capacity(128)).unwrap();
        sim.access(0, 1, true, 3);
        sim.access(64, 64, false, 1);
        sim.access(128, 64, false, 1);
        let s = stats(&mut sim);
        assert_eq!(s.misses, 3);
        assert_eq!(s.writebacks, 1);
        assert_eq!(s.per_tensor[3], TensorTraffic { read_bytes: 64, write_bytes: 64 });
    }

    #[test]
    fn write_fill_can_be_excluded() {
        let cfg = CacheConfig { write_fill: false, ..CacheConfig::with_capacity(128) };
        for mut sim in [Simulator::new(cfg).unwrap(), Simulator::reference(cfg).unwrap()] {
            sim.access(0, 64, true, 0);
            sim.access(64, 64, false, 0);
            let s = stats(&mut sim);
            assert_eq!((s.misses, s.mem_read_bytes, s.mem_write_bytes), (2, 64, 64));
        }
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::default().validate().is_ok());
        let mut c = CacheConfig::with_capacity(100);
        assert!(c.validate().is_err());
        c.capacity_bytes = 32;
        assert!(c.validate().is_err());
        c = CacheConfig { line_bytes: 48, ..CacheConfig::default() };
        assert!(c.validate().is_err());
        c = CacheConfig { associativity: Associativity::SetAssociative(7), ..CacheConfig::default() };
        assert!(c.validate().is_err());
        c.associativity = Associativity::SetAssociative(16);
        assert!(c.validate().is_ok());
    }

    fn run_ops(mut sim: Simulator, ops: &[(u64, u64, bool)]) -> (u64, u64, u64) {
        for &(first, count, write) in ops {
            sim.access(first * 64, count * 64, write, 0);
        }
        let s = stats(&mut sim);
        (s.hits, s.misses, s.writebacks)
    }

    #[test]
    fn range_engine_matches_reference_on_mixed_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..200 {
            let cap = rng.gen_range(1..=48u64);
            let ops: Vec<_> = (0..rng.gen_range(1..200))
                .map(|_| {
                    let first = rng.gen_range(0..96u64);
                    let count = if rng.gen_bool(0.3) { rng.gen_range(1..80) } else { rng.gen_range(1..6) };
                    (first, count, rng.gen_bool(0.4))
                })
                .collect();
            let cfg = CacheConfig::with_capacity(cap * 64);
            let fast = run_ops(Simulator::new(cfg).unwrap(), &ops);
            let slow = run_ops(Simulator::reference(cfg).unwrap(), &ops);
            assert_eq!(fast, slow, "round {round} capacity {cap}");
        }
    }

    #[test]
    fn stamp_compaction_keeps_results() {
        let cfg = CacheConfig::with_capacity(32 * 64);
        let ops: Vec<_> = (0..20_000u64).map(|i| ((i * 7) % 61, 1 + i % 3, i % 5 == 0)).collect();
        let fast = run_ops(Simulator::new(cfg).unwrap(), &ops);
        let slow = run_ops(Simulator::reference(cfg).unwrap(), &ops);
        assert_eq!(fast, slow);
    }

    #[test]
    fn set_associative_conflicts() {
        // Two sets of two ways; lines 0, 2, 4 all map to set 0.
        let cfg = CacheConfig { associativity: Associativity::SetAssociative(2), ..CacheConfig::with_capacity(4 * 64) };
        let ops = [(0, 1, false), (2, 1, false), (4, 1, false), (0, 1, false)];
        assert_eq!(run_ops(Simulator::new(cfg).unwrap(), &ops), (0, 4, 0));
        let full = CacheConfig::with_capacity(4 * 64);
        assert_eq!(run_ops(Simulator::new(full).unwrap(), &ops), (1, 3, 0));
    }

    #[test]
    fn streaming_larger_than_capacity_always_misses() {
        let cfg = CacheConfig::with_capacity(1000 * 64);
        let ops: Vec<_> = (0..5).map(|_| (0, 1001, false)).collect();
        assert_eq!(run_ops(Simulator::new(cfg).unwrap(), &ops), (0, 5005, 0));
    }
}

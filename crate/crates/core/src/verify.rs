//! Self-checks: numeric equivalence of the two schedules and agreement of
//! the range LRU engine with the naive per-line list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cachesim::{CacheConfig, Simulator};
use crate::error::Result;
use crate::executor::{run_schedule_a, run_schedule_a_plus, Inputs};
use crate::model::{CellType, Matrix, NetworkConfig, WeightSet};

/// Tolerance on the final hidden state, relative to its largest magnitude.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error; zero for exact checks.
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `max |a - b| / max |a|`, zero when both are zero.
pub fn relative_error(a: &[f32], b: &[f32]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).fold(0.0, f64::max);
    let scale = a.iter().map(|x| x.abs() as f64).fold(0.0, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

pub fn random_small_config(rng: &mut impl Rng) -> NetworkConfig {
    let cell = if rng.gen_bool(0.5) { CellType::LSTM } else { CellType::GRU };
    let layers = rng.gen_range(1..=4);
    let mut cfg = NetworkConfig::new(cell, rng.gen_range(1..=64), layers, rng.gen_range(1..=20))
        .with_input_size(rng.gen_range(1..=64));
    if rng.gen_bool(0.3) {
        cfg.layer_sizes = Some((0..layers).map(|_| rng.gen_range(1..=64)).collect());
    }
    cfg.standard_output_gate = rng.gen_bool(0.5);
    cfg
}

/// Final hidden state of both schedules on `cases` random networks, in f32.
pub fn schedule_equivalence(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CheckOutcome { name: "schedule-equivalence", cases, failures: 0, worst: 0.0, first_failure: None };
    for case in 0..cases {
        let cfg = random_small_config(&mut rng);
        let weights = WeightSet::<f32>::random(&cfg, rng.gen())?;
        let data = (0..cfg.input_length * cfg.input_width()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let inputs = Inputs::Vectors(Matrix::from_vec(cfg.input_length, cfg.input_width(), data)?);
        let a = run_schedule_a(&weights, &inputs)?;
        let p = run_schedule_a_plus(&weights, &inputs)?;
        let err = relative_error(a.final_hidden(), p.final_hidden());
        out.worst = out.worst.max(err);
        if err > EQUIVALENCE_TOLERANCE {
            out.failures += 1;
            out.first_failure.get_or_insert_with(|| format!("case {case}: error {err:e} for {cfg:?}"));
        }
    }
    Ok(out)
}

/// One random access stream: `(address, len, write)`.
pub fn random_ops(rng: &mut impl Rng, events: usize, footprint_bytes: u64) -> Vec<(u64, u64, bool)> {
    (0..events)
        .map(|_| {
            let addr = rng.gen_range(0..footprint_bytes);
            let len = rng.gen_range(1..=(footprint_bytes - addr).min(512));
            (addr, len, rng.gen_bool(0.3))
        })
        .collect()
}

/// Hit, miss and writeback counts of the range engine against the naive list.
pub fn lru_oracle(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CheckOutcome { name: "lru-oracle", cases, failures: 0, worst: 0.0, first_failure: None };
    for case in 0..cases {
        let line = 1u64 << rng.gen_range(4..=7);
        let cap_lines = rng.gen_range(1..=128u64);
        let footprint = line * rng.gen_range(cap_lines..=4 * cap_lines + 8);
        let events = 10f64.powf(rng.gen_range(2.0..=5.0)) as usize;
        let ops = random_ops(&mut rng, events, footprint);
        let cfg = CacheConfig { line_bytes: line, ..CacheConfig::with_capacity(cap_lines * line) };
        let mut fast = Simulator::new(cfg)?;
        let mut slow = Simulator::reference(cfg)?;
        for &(a, l, w) in &ops {
            fast.access(a, l, w, 0);
            slow.access(a, l, w, 0);
        }
        fast.flush();
        slow.flush();
        let (f, s) = (fast.take_stats(1), slow.take_stats(1));
        if (f.hits, f.misses, f.writebacks) != (s.hits, s.misses, s.writebacks) {
            out.failures += 1;
            out.first_failure.get_or_insert_with(|| {
                format!(
                    "case {case}: fast {:?} vs reference {:?}",
                    (f.hits, f.misses, f.writebacks),
                    (s.hits, s.misses, s.writebacks)
                )
            });
        }
    }
    Ok(out)
}

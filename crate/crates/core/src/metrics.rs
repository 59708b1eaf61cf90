//! Working-set size and the data reuse efficiency ratio
//! `DRE = average read/write traffic / working set`.

use serde::{Deserialize, Serialize};

use crate::cachesim::TrafficStats;
use crate::error::{Error, Result};
use crate::model::{CellType, NetworkConfig, TensorRole, TensorTable};
use crate::tracegen::Schedule;

/// Working-set inventory in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingSet {
    /// All layers' G plus the attention matrix.
    pub weights: u64,
    pub embedding: u64,
    pub softmax: u64,
    /// Per layer `h`, `c` (LSTM) and the gate buffer; for the split schedule
    /// also X'.
    pub intermediates: u64,
}

impl WorkingSet {
    pub fn total(&self) -> u64 {
        self.weights + self.embedding + self.softmax + self.intermediates
    }

    pub fn weights_only(&self) -> u64 {
        self.weights + self.embedding + self.softmax
    }
}

fn uses_split(config: &NetworkConfig, schedule: Schedule) -> bool {
    schedule == Schedule::APlus && (0..config.num_layers).any(|l| !config.is_decoder_layer(l))
}

pub fn working_set(config: &NetworkConfig, schedule: Schedule) -> Result<WorkingSet> {
    config.validate()?;
    let eb = config.element_bytes as u64;
    let v = config.vocab_size as u64;
    let dims = config.layer_dims();
    let g_elems: u64 = dims.iter().map(|d| d.g1_elems() + d.g2_elems()).sum();
    let per_layer: u64 = dims
        .iter()
        .map(|d| {
            let c = if config.cell_type == CellType::LSTM { d.hidden } else { 0 };
            (d.hidden + c + d.gate_width()) as u64
        })
        .sum();
    let x_prime = if uses_split(config, schedule) {
        let widest = dims.iter().map(|d| d.gate_width()).max().unwrap_or(0) as u64;
        widest * config.input_length as u64
    } else {
        0
    };
    Ok(WorkingSet {
        weights: (g_elems + config.attention_elems()) * eb,
        embedding: v * config.input_width() as u64 * eb,
        softmax: config.output_width() as u64 * v * eb,
        intermediates: (per_layer + x_prime) * eb,
    })
}

pub fn working_set_bytes(config: &NetworkConfig, schedule: Schedule) -> Result<u64> {
    Ok(working_set(config, schedule)?.total())
}

/// Line-rounded bytes of every tensor the schedule touches in full. Equals
/// the traced footprint when there is no embedding (token lookups touch only
/// some embedding rows).
pub fn touched_bytes(table: &TensorTable, config: &NetworkConfig, schedule: Schedule, line_bytes: u64) -> u64 {
    let round = |b: u64| b.div_ceil(line_bytes) * line_bytes;
    let split = uses_split(config, schedule);
    table.handles.iter().filter(|h| split || h.role != TensorRole::PrecomputedInput).map(|h| round(h.byte_len)).sum()
}

pub fn dre(avg_rw_bytes: f64, working_set_bytes: u64) -> Result<f64> {
    if working_set_bytes == 0 {
        return Err(Error::ZeroWorkingSet);
    }
    Ok(avg_rw_bytes / working_set_bytes as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreReport {
    pub name: String,
    pub schedule: Schedule,
    pub weights_only: bool,
    pub working_set_bytes: u64,
    pub mem_read_bytes: u64,
    pub mem_write_bytes: u64,
    pub avg_rw_bytes: f64,
    pub dre: f64,
    pub config: NetworkConfig,
}

impl DreReport {
    /// With `weights_only`, both traffic and working set are restricted to
    /// weight tensors.
    pub fn new(
        name: &str,
        config: &NetworkConfig,
        schedule: Schedule,
        table: &TensorTable,
        stats: &TrafficStats,
        weights_only: bool,
    ) -> Result<Self> {
        let ws = working_set(config, schedule)?;
        let runs = stats.runs.max(1) as u64;
        let (read, write, ws_bytes) = if weights_only {
            let w = stats.weights_only(table);
            (w.read_bytes, w.write_bytes, ws.weights_only())
        } else {
            (stats.mem_read_bytes, stats.mem_write_bytes, ws.total())
        };
        let avg = (read + write) as f64 / runs as f64;
        Ok(Self {
            name: name.to_string(),
            schedule,
            weights_only,
            working_set_bytes: ws_bytes,
            mem_read_bytes: read / runs,
            mem_write_bytes: write / runs,
            avg_rw_bytes: avg,
            dre: dre(avg, ws_bytes)?,
            config: config.clone(),
        })
    }

    pub fn total_bytes(&self) -> u64 {
        self.mem_read_bytes + self.mem_write_bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIB: u64 = 1 << 20;

    #[test]
    fn lstm512_inventory() {
        let cfg = NetworkConfig::new(CellType::LSTM, 512, 1, 100);
        let ws = working_set(&cfg, Schedule::A).unwrap();
        assert_eq!(ws.weights, 8 * MIB);
        assert_eq!(ws.intermediates, (512 + 512 + 4 * 512) * 4);
        assert_eq!(ws.intermediates, 12_288);
        let split = working_set(&cfg, Schedule::APlus).unwrap();
        assert_eq!(split.intermediates - ws.intermediates, 100 * 2048 * 4);
    }

    #[test]
    fn unit_network_weights() {
        let cfg = NetworkConfig::new(CellType::LSTM, 1, 1, 1);
        assert_eq!(working_set(&cfg, Schedule::A).unwrap().weights, 32);
    }

    #[test]
    fn vocabulary_terms() {
        let cfg = NetworkConfig::new(CellType::GRU, 64, 2, 10).with_vocab(10_000);
        let ws = working_set(&cfg, Schedule::A).unwrap();
        assert_eq!(ws.embedding, 10_000 * 64 * 4);
        assert_eq!(ws.softmax, 64 * 10_000 * 4);
        assert_eq!(ws.weights_only(), cfg.weight_bytes());
    }

    #[test]
    fn decoder_only_network_has_no_x_prime() {
        let mut cfg = NetworkConfig::new(CellType::LSTM, 8, 2, 10);
        cfg.decoder_layers = 2;
        assert_eq!(working_set(&cfg, Schedule::A).unwrap(), working_set(&cfg, Schedule::APlus).unwrap());
    }

    #[test]
    fn dre_ratios() {
        assert_eq!(dre(100.0, 100).unwrap(), 1.0);
        assert_eq!(dre(0.0, 5).unwrap(), 0.0);
        assert!(matches!(dre(1.0, 0), Err(Error::ZeroWorkingSet)));
        let r = dre((800 * MIB) as f64, 8 * MIB + 12_288).unwrap();
        assert!((r - 99.85).abs() < 0.01);
    }
}

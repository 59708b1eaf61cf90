//! Benchmark grid and application configurations.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::working_set_bytes;
use crate::model::{CellType, NetworkConfig};
use crate::tracegen::Schedule;

pub const GRID_HIDDEN: [usize; 5] = [64, 128, 256, 512, 1024];
pub const GRID_LAYERS: [usize; 8] = [1, 2, 3, 4, 5, 6, 7, 8];
pub const GRID_CELLS: [CellType; 2] = [CellType::LSTM, CellType::GRU];
pub const GRID_LENGTHS: [usize; 4] = [1, 10, 50, 100];
pub const GRID_VOCAB: [usize; 2] = [60, 10_000];
/// Input lengths the applications are run at.
pub const APP_LENGTHS: [usize; 4] = [10, 20, 50, 100];

pub const BYTENER_TARGET_BYTES: u64 = 9_856_614; // 9.4 MiB

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Grid,
    App,
}

/// Expected A/A+ traffic ratio band with a short provenance note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    pub group: Group,
    pub config: NetworkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
}

impl BenchmarkSpec {
    /// Per layer, whether the split schedule applies; decoder layers fall back.
    pub fn split_eligible(&self) -> Vec<bool> {
        (0..self.config.num_layers).map(|l| !self.config.is_decoder_layer(l)).collect()
    }

    pub fn max_layer_g_bytes(&self) -> u64 {
        (0..self.config.num_layers).map(|l| self.config.g_bytes(l)).max().unwrap_or(0)
    }
}

pub fn grid_name(cell: CellType, n: usize, layers: usize, t: usize, vocab: usize) -> String {
    format!("grid-{cell}-n{n}-l{layers}-t{t}-v{vocab}")
}

/// Full cross product of the grid parameters: 640 entries.
pub fn grid() -> Vec<BenchmarkSpec> {
    let mut out = Vec::with_capacity(640);
    for cell in GRID_CELLS {
        for n in GRID_HIDDEN {
            for layers in GRID_LAYERS {
                for t in GRID_LENGTHS {
                    for v in GRID_VOCAB {
                        out.push(BenchmarkSpec {
                            name: grid_name(cell, n, layers, t, v),
                            group: Group::Grid,
                            config: NetworkConfig::new(cell, n, layers, t).with_vocab(v),
                            expected: None,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Sizes that the application descriptions leave open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppOptions {
    pub gnmt_hidden: usize,
    pub deepspeech_hidden: usize,
    pub deepspeech_input: usize,
}

impl Default for AppOptions {
    fn default() -> Self {
        Self { gnmt_hidden: 1024, deepspeech_hidden: 2048, deepspeech_input: 2048 }
    }
}

/// Largest hidden size whose 4-layer LSTM working set stays at or below the
/// byteNER target, or the one just above if closer.
pub fn solve_bytener_hidden() -> usize {
    let ws = |n: usize| working_set_bytes(&bytener_config(n, 1), Schedule::A).expect("valid config");
    let (mut lo, mut hi) = (1usize, 4096usize);
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if ws(mid) <= BYTENER_TARGET_BYTES {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let below = BYTENER_TARGET_BYTES - ws(lo);
    let above = ws(hi).saturating_sub(BYTENER_TARGET_BYTES);
    if above < below {
        hi
    } else {
        lo
    }
}

fn bytener_config(n: usize, t: usize) -> NetworkConfig {
    let mut c = NetworkConfig::new(CellType::LSTM, n, 4, t).with_vocab(4);
    c.softmax_every_step = false;
    c
}

fn app_configs(opts: &AppOptions, t: usize) -> Vec<(&'static str, NetworkConfig, Option<Expectation>)> {
    let mut gnmt = NetworkConfig::new(CellType::LSTM, opts.gnmt_hidden, 16, t).with_vocab(80_000);
    gnmt.decoder_layers = 8;
    gnmt.attention = true;

    let deepspeech = NetworkConfig::new(CellType::LSTM, opts.deepspeech_hidden, 5, t)
        .with_vocab(28)
        .with_input_size(opts.deepspeech_input);

    let mut lm = NetworkConfig::new(CellType::LSTM, 2048, 2, t).with_vocab(80_000);
    lm.layer_sizes = Some(vec![2048, 8192]);

    let bytener = bytener_config(solve_bytener_hidden(), t);

    let band = |lo: f64, hi: f64, note: &str| Some(Expectation { ratio_min: lo, ratio_max: hi, note: note.into() });
    let mut out = vec![
        ("gnmt", gnmt, band(1.35, 1.75, "reported 1.45 to 1.65")),
        ("deepspeech1", deepspeech, None),
        ("lm", lm, band(1.20, 1.40, "reported 1.25 to 1.29")),
        ("bytener", bytener, band(0.98, 1.02, "fits in cache, schedules equal")),
    ];
    for (_, cfg, _) in &mut out {
        cfg.softmax_every_step = false;
    }
    out
}

/// The four applications at their longest input length.
pub fn applications(opts: &AppOptions) -> Vec<BenchmarkSpec> {
    app_configs(opts, 100)
        .into_iter()
        .map(|(name, config, expected)| BenchmarkSpec { name: name.into(), group: Group::App, config, expected })
        .collect()
}

/// Every application at every application input length, named `<app>-t<T>`.
pub fn application_runs(opts: &AppOptions) -> Vec<BenchmarkSpec> {
    let mut out = Vec::new();
    for t in APP_LENGTHS {
        for (name, config, expected) in app_configs(opts, t) {
            out.push(BenchmarkSpec { name: format!("{name}-t{t}"), group: Group::App, config, expected });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Predicate over benchmark fields, parsed from `key=v1|v2,key=v`.
///
/// Keys: `cell`, `n`, `layers`, `t`, `vocab`, `group`. Clauses are and-ed, the
/// alternatives within a clause or-ed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    clauses: Vec<(Key, Vec<String>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Cell,
    Hidden,
    Layers,
    Length,
    Vocab,
    Group,
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        for clause in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let (k, vals) = clause
                .split_once('=')
                .ok_or_else(|| Error::BadFilter(format!("expected key=value, got {clause:?}")))?;
            let key = match k.trim().to_ascii_lowercase().as_str() {
                "cell" => Key::Cell,
                "n" | "hidden" => Key::Hidden,
                "layers" | "l" => Key::Layers,
                "t" => Key::Length,
                "vocab" | "v" => Key::Vocab,
                "group" => Key::Group,
                other => return Err(Error::BadFilter(format!("unknown key {other:?}"))),
            };
            let vals: Vec<String> = vals.split('|').map(|v| v.trim().to_ascii_lowercase()).collect();
            for v in &vals {
                let ok = match key {
                    Key::Cell => CellType::from_str(v).is_ok(),
                    Key::Group => v == "grid" || v == "app",
                    _ => v.parse::<usize>().is_ok(),
                };
                if !ok {
                    return Err(Error::BadFilter(format!("bad value {v:?} for {k}")));
                }
            }
            clauses.push((key, vals));
        }
        Ok(Self { clauses })
    }
}

impl Filter {
    pub fn matches(&self, spec: &BenchmarkSpec) -> bool {
        let c = &spec.config;
        self.clauses.iter().all(|(key, vals)| {
            let field = match key {
                Key::Cell => c.cell_type.as_str().to_string(),
                Key::Hidden => c.hidden_size.to_string(),
                Key::Layers => c.num_layers.to_string(),
                Key::Length => c.input_length.to_string(),
                Key::Vocab => c.vocab_size.to_string(),
                Key::Group => match spec.group {
                    Group::Grid => "grid".into(),
                    Group::App => "app".into(),
                },
            };
            vals.contains(&field)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub benchmarks: Vec<BenchmarkSpec>,
}

impl Catalog {
    pub fn new(benchmarks: Vec<BenchmarkSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for b in &benchmarks {
            b.config.validate()?;
            if !seen.insert(b.name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate benchmark name {:?}", b.name)));
            }
        }
        Ok(Self { benchmarks })
    }

    /// Grid plus application runs with default sizes.
    pub fn standard() -> Self {
        let mut all = grid();
        all.extend(application_runs(&AppOptions::default()));
        Self::new(all).expect("built-in catalog is valid")
    }

    pub fn get(&self, name: &str) -> Result<&BenchmarkSpec> {
        self.benchmarks.iter().find(|b| b.name == name).ok_or_else(|| Error::UnknownBenchmark(name.to_string()))
    }

    pub fn filter(&self, f: &Filter) -> Vec<&BenchmarkSpec> {
        self.benchmarks.iter().filter(|b| f.matches(b)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Catalog = serde_json::from_str(s)?;
        Self::new(raw.benchmarks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = grid();
        assert_eq!(g.len(), 5 * 8 * 2 * 4 * 2);
        let names: BTreeSet<_> = g.iter().map(|b| b.name.clone()).collect();
        assert_eq!(names.len(), g.len());
        let f: Filter = "vocab=60".parse().unwrap();
        assert_eq!(g.iter().filter(|b| f.matches(b)).count(), 320);
    }

    #[test]
    fn filter_alternatives() {
        let f: Filter = "cell=gru, n=64|1024, T=100".parse().unwrap();
        let hits: Vec<_> = grid().into_iter().filter(|b| f.matches(b)).collect();
        assert_eq!(hits.len(), 2 * 8 * 2);
        assert!(hits.iter().all(|b| b.config.cell_type == CellType::GRU));
        assert!("n=abc".parse::<Filter>().is_err());
        assert!("colour=red".parse::<Filter>().is_err());
        assert!("cell".parse::<Filter>().is_err());
        assert_eq!("".parse::<Filter>().unwrap(), Filter::default());
    }

    #[test]
    fn lm_layer_shapes() {
        let lm = &applications(&AppOptions::default())[2];
        let d = lm.config.layer_dims();
        assert_eq!((d[1].input, d[1].hidden), (2048, 8192));
        assert_eq!(d[1].g2_elems(), 4 * 8192 * 8192);
        assert_eq!(d[1].g1_elems(), 4 * 2048 * 8192);
    }

    #[test]
    fn bytener_fits() {
        let b = &applications(&AppOptions::default())[3];
        let ws = working_set_bytes(&b.config, Schedule::A).unwrap();
        let rel = (ws as f64 - BYTENER_TARGET_BYTES as f64).abs() / BYTENER_TARGET_BYTES as f64;
        assert!(rel < 0.01, "{ws}");
        assert!(ws < 12 << 20);
    }

    #[test]
    fn gnmt_decoders_not_split() {
        let g = &applications(&AppOptions::default())[0];
        let flags = g.split_eligible();
        assert_eq!(flags.len(), 16);
        assert!(flags[..8].iter().all(|&f| f));
        assert!(flags[8..].iter().all(|&f| !f));
    }

    #[test]
    fn json_round_trip() {
        let cat = Catalog::standard();
        let back = Catalog::from_json(&cat.to_json().unwrap()).unwrap();
        assert_eq!(back, cat);
        assert!(back.get("lm-t20").is_ok());
        assert!(matches!(back.get("nope"), Err(Error::UnknownBenchmark(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut b = grid();
        b.truncate(2);
        b[1].name = b[0].name.clone();
        assert!(Catalog::new(b).is_err());
    }
}

//! Benchmark runs, schedule comparisons and sweeps, with CSV and JSON output.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cachesim::{simulate, simulate_warm, CacheConfig};
use crate::catalog::BenchmarkSpec;
use crate::error::Result;
use crate::metrics::DreReport;
use crate::model::NetworkConfig;
use crate::tracegen::{trace_schedule, Schedule, TraceOptions};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub cache: CacheConfig,
    /// Zero replays once from a cold cache; otherwise one uncounted warm-up
    /// followed by this many measured replays.
    pub warm_runs: u32,
    pub weights_only: bool,
    pub seed: u64,
    /// Matrix panel bound; defaults to half the cache.
    pub block_bytes: Option<u64>,
}

impl RunOptions {
    pub fn trace_options(&self) -> TraceOptions {
        let mut t = TraceOptions::for_cache_bytes(self.cache.capacity_bytes);
        if let Some(b) = self.block_bytes {
            t.block_bytes = b.max(1);
        }
        t.seed = self.seed;
        t
    }
}

pub fn run(name: &str, config: &NetworkConfig, schedule: Schedule, opts: &RunOptions) -> Result<DreReport> {
    opts.cache.validate()?;
    let trace = trace_schedule(config, schedule, opts.trace_options())?;
    let stats = if opts.warm_runs == 0 {
        simulate(&trace, &opts.cache)?
    } else {
        simulate_warm(&trace, &opts.cache, opts.warm_runs)?
    };
    DreReport::new(name, config, schedule, &trace.table, &stats, opts.weights_only)
}

/// One output line: a benchmark under one schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub cell: String,
    pub n: usize,
    pub layers: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub vocab: usize,
    pub schedule: Schedule,
    pub working_set_bytes: u64,
    pub mem_read_bytes: u64,
    pub mem_write_bytes: u64,
    pub dre: f64,
    /// Traffic under A divided by traffic under this row's schedule.
    pub ratio_vs_a: Option<f64>,
}

impl Row {
    pub fn from_report(r: &DreReport, ratio_vs_a: Option<f64>) -> Self {
        let c = &r.config;
        Self {
            name: r.name.clone(),
            cell: c.cell_type.as_str().to_string(),
            n: c.hidden_size,
            layers: c.num_layers,
            t: c.input_length,
            vocab: c.vocab_size,
            schedule: r.schedule,
            working_set_bytes: r.working_set_bytes,
            mem_read_bytes: r.mem_read_bytes,
            mem_write_bytes: r.mem_write_bytes,
            dre: r.dre,
            ratio_vs_a,
        }
    }

    pub fn traffic_bytes(&self) -> u64 {
        self.mem_read_bytes + self.mem_write_bytes
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Both schedules on one benchmark; the A+ row carries the A/A+ traffic ratio.
pub fn compare(spec: &BenchmarkSpec, opts: &RunOptions) -> Result<[Row; 2]> {
    let (a, p) = rayon::join(
        || run(&spec.name, &spec.config, Schedule::A, opts),
        || run(&spec.name, &spec.config, Schedule::APlus, opts),
    );
    let (a, p) = (a?, p?);
    let r = ratio(a.total_bytes(), p.total_bytes());
    Ok([Row::from_report(&a, (a.total_bytes() > 0).then_some(1.0)), Row::from_report(&p, r)])
}

/// Runs every benchmark under the given schedules in parallel. Rows come back
/// sorted by benchmark name, then schedule, independent of thread timing. When
/// both schedules are present the A+ rows carry the ratio against A.
pub fn sweep(specs: &[&BenchmarkSpec], schedules: &[Schedule], opts: &RunOptions) -> Result<Vec<Row>> {
    let jobs: Vec<(&BenchmarkSpec, Schedule)> =
        specs.iter().flat_map(|s| schedules.iter().map(move |&sch| (*s, sch))).collect();
    let reports: Vec<DreReport> =
        jobs.par_iter().map(|(spec, sch)| run(&spec.name, &spec.config, *sch, opts)).collect::<Result<_>>()?;
    let mut rows: Vec<Row> = reports
        .iter()
        .map(|r| {
            let base = reports.iter().find(|b| b.name == r.name && b.schedule == Schedule::A).map(|b| b.total_bytes());
            Row::from_report(r, base.and_then(|b| ratio(b, r.total_bytes())))
        })
        .collect();
    rows.sort_by(|x, y| x.name.cmp(&y.name).then(x.schedule.as_str().cmp(y.schedule.as_str())));
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[Row], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::grid;
    use crate::model::CellType;

    fn small_opts() -> RunOptions {
        RunOptions { cache: CacheConfig::with_capacity(64 << 10), ..Default::default() }
    }

    #[test]
    fn csv_header_and_order() {
        let g = grid();
        let specs: Vec<&BenchmarkSpec> = g
            .iter()
            .filter(|b| b.config.hidden_size == 64 && b.config.num_layers == 1 && b.config.input_length == 10)
            .collect();
        let rows = sweep(&specs, &[Schedule::APlus, Schedule::A], &small_opts()).unwrap();
        assert_eq!(rows.len(), 2 * specs.len());
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "name,cell,n,layers,T,vocab,schedule,working_set_bytes,mem_read_bytes,mem_write_bytes,dre,ratio_vs_a"
        );
        let names: Vec<_> = rows.iter().map(|r| (r.name.clone(), r.schedule.as_str())).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(rows.iter().filter(|r| r.schedule == Schedule::A).all(|r| r.ratio_vs_a == Some(1.0)));
    }

    #[test]
    fn repeated_sweeps_identical() {
        let g = grid();
        let specs: Vec<&BenchmarkSpec> =
            g.iter().filter(|b| b.config.hidden_size == 128 && b.config.input_length == 10).take(6).collect();
        let render = || {
            let rows = sweep(&specs, &[Schedule::A, Schedule::APlus], &small_opts()).unwrap();
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn weights_only_split_halves_reads() {
        let cfg = NetworkConfig::new(CellType::LSTM, 64, 1, 10);
        let opts = RunOptions { cache: CacheConfig::with_capacity(4096), weights_only: true, ..Default::default() };
        let a = run("x", &cfg, Schedule::A, &opts).unwrap();
        let p = run("x", &cfg, Schedule::APlus, &opts).unwrap();
        let g = cfg.g_bytes(0);
        assert_eq!(a.mem_read_bytes, 10 * g);
        assert_eq!(p.mem_read_bytes, g / 2 + 10 * g / 2);
    }

    #[test]
    fn json_mirrors_csv_fields() {
        let cfg = NetworkConfig::new(CellType::GRU, 16, 1, 2);
        let r = run("tiny", &cfg, Schedule::A, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_json(&[Row::from_report(&r, Some(1.0))], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v[0].as_object().unwrap();
        assert_eq!(obj.len(), 12);
        assert_eq!(obj["T"], 2);
        assert_eq!(obj["schedule"], "a");
    }
}

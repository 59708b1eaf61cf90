use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rnnsched::cachesim::{Associativity, CacheConfig, MIB};
use rnnsched::catalog::{BenchmarkSpec, Catalog, Filter, Group};
use rnnsched::model::NetworkConfig;
use rnnsched::report::{self, Row, RunOptions};
use rnnsched::tracegen::{trace_schedule, Schedule};
use rnnsched::verify;

#[derive(Parser)]
#[command(name = "rnnsched", version, about = "Memory traffic of RNN inference schedules under an LRU cache")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one benchmark under one schedule.
    Run {
        /// Catalog name or path to a network config JSON file.
        target: String,
        #[arg(long, default_value = "a")]
        schedule: Schedule,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Both schedules, normalized to schedule A. An application name expands
    /// to all of its input lengths.
    Compare {
        #[arg(required = true)]
        targets: Vec<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Every catalog entry matching the filter, e.g. `cell=lstm,n=512|1024`.
    Sweep {
        #[arg(long, default_value = "")]
        filter: String,
        /// Omit to run both schedules.
        #[arg(long)]
        schedule: Option<Schedule>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Schedule equivalence and LRU oracle self-checks.
    Verify {
        #[arg(long, default_value_t = 200)]
        configs: usize,
        #[arg(long, default_value_t = 100)]
        traces: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the access trace as `phase tensor_id kind offset len` lines.
    Trace {
        target: String,
        #[arg(long, default_value = "a")]
        schedule: Schedule,
        #[arg(long, default_value_t = 12.0)]
        cache_mb: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// List or export the benchmark catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List {
        #[arg(long, default_value = "")]
        filter: String,
    },
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 12.0)]
    cache_mb: f64,
    #[arg(long, default_value_t = 64)]
    line_bytes: u64,
    /// `full` or the number of ways.
    #[arg(long, default_value = "full")]
    assoc: String,
    /// Measured replays after one warm-up; 0 means a single cold run.
    #[arg(long, default_value_t = 0)]
    warm_runs: u32,
    #[arg(long)]
    weights_only: bool,
    /// Leave dirty lines in the cache at the end instead of writing them back.
    #[arg(long)]
    no_flush: bool,
    /// Do not count line fetches caused by write misses.
    #[arg(long)]
    no_write_fill: bool,
    /// Matrix panel size in KiB; defaults to half the cache.
    #[arg(long)]
    block_kb: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Catalog JSON to use instead of the built-in one.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

fn cache_bytes(mb: f64, line: u64) -> anyhow::Result<u64> {
    if mb.is_nan() || mb <= 0.0 {
        bail!("cache size must be positive");
    }
    let bytes = (mb * MIB as f64).round() as u64;
    Ok(bytes / line.max(1) * line.max(1))
}

impl SimArgs {
    fn options(&self) -> anyhow::Result<RunOptions> {
        let associativity = match self.assoc.to_ascii_lowercase().as_str() {
            "full" => Associativity::Full,
            k => Associativity::SetAssociative(k.parse().with_context(|| format!("bad --assoc {k:?}"))?),
        };
        let cache = CacheConfig {
            capacity_bytes: cache_bytes(self.cache_mb, self.line_bytes)?,
            line_bytes: self.line_bytes,
            associativity,
            writeback_flush: !self.no_flush,
            write_fill: !self.no_write_fill,
        };
        cache.validate()?;
        Ok(RunOptions {
            cache,
            warm_runs: self.warm_runs,
            weights_only: self.weights_only,
            seed: self.seed,
            block_bytes: self.block_kb.map(|k| k * 1024),
        })
    }
}

fn load_catalog(path: Option<&Path>) -> anyhow::Result<Catalog> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Catalog::from_json(&text)?)
        }
        None => Ok(Catalog::standard()),
    }
}

/// A config file path, an exact catalog name, or an application base name.
fn resolve(catalog: &Catalog, target: &str) -> anyhow::Result<Vec<BenchmarkSpec>> {
    let path = Path::new(target);
    if path.extension().is_some_and(|e| e == "json") && path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let config: NetworkConfig = serde_json::from_str(&text).with_context(|| format!("parsing {target}"))?;
        config.validate()?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![BenchmarkSpec { name, group: Group::App, config, expected: None }]);
    }
    if let Ok(spec) = catalog.get(target) {
        return Ok(vec![spec.clone()]);
    }
    let prefix = format!("{target}-t");
    let runs: Vec<BenchmarkSpec> = catalog
        .benchmarks
        .iter()
        .filter(|b| b.group == Group::App && b.name.strip_prefix(&prefix).is_some_and(|t| t.parse::<usize>().is_ok()))
        .cloned()
        .collect();
    if runs.is_empty() {
        bail!("unknown benchmark {target:?}");
    }
    Ok(runs)
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(rows: &[Row], sim: &SimArgs) -> anyhow::Result<()> {
    let mut out = sink(sim.output.as_deref())?;
    match sim.out {
        OutFormat::Csv => report::write_csv(rows, &mut out)?,
        OutFormat::Json => report::write_json(rows, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { target, schedule, sim } => {
            let opts = sim.options()?;
            let catalog = load_catalog(sim.catalog.as_deref())?;
            let specs = resolve(&catalog, &target)?;
            let refs: Vec<&BenchmarkSpec> = specs.iter().collect();
            emit(&report::sweep(&refs, &[schedule], &opts)?, &sim)?;
        }
        Command::Compare { targets, sim } => {
            let opts = sim.options()?;
            let catalog = load_catalog(sim.catalog.as_deref())?;
            let mut specs = Vec::new();
            for t in &targets {
                specs.extend(resolve(&catalog, t)?);
            }
            let refs: Vec<&BenchmarkSpec> = specs.iter().collect();
            emit(&report::sweep(&refs, &[Schedule::A, Schedule::APlus], &opts)?, &sim)?;
        }
        Command::Sweep { filter, schedule, sim } => {
            let opts = sim.options()?;
            let catalog = load_catalog(sim.catalog.as_deref())?;
            let filter: Filter = filter.parse()?;
            let specs = catalog.filter(&filter);
            if specs.is_empty() {
                bail!("filter matches no benchmarks");
            }
            let schedules = match schedule {
                Some(s) => vec![s],
                None => vec![Schedule::A, Schedule::APlus],
            };
            emit(&report::sweep(&specs, &schedules, &opts)?, &sim)?;
        }
        Command::Verify { configs, traces, seed } => {
            let checks = [verify::schedule_equivalence(configs, seed)?, verify::lru_oracle(traces, seed)?];
            for c in &checks {
                let status = if c.passed() { "PASS" } else { "FAIL" };
                println!("{status} {} cases={} failures={} worst={:e}", c.name, c.cases, c.failures, c.worst);
                if let Some(f) = &c.first_failure {
                    println!("  {f}");
                }
            }
            if !checks.iter().all(|c| c.passed()) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Trace { target, schedule, cache_mb, seed, output, catalog } => {
            let catalog = load_catalog(catalog.as_deref())?;
            let specs = resolve(&catalog, &target)?;
            if specs.len() != 1 {
                bail!("{target:?} names {} benchmarks; pick one", specs.len());
            }
            let mut opts = rnnsched::tracegen::TraceOptions::for_cache_bytes(cache_bytes(cache_mb, 64)?);
            opts.seed = seed;
            let trace = trace_schedule(&specs[0].config, schedule, opts)?;
            let mut out = sink(output.as_deref())?;
            trace.dump(&mut out)?;
            out.flush()?;
        }
        Command::Catalog { action } => match action {
            CatalogAction::List { filter } => {
                let filter: Filter = filter.parse()?;
                let catalog = Catalog::standard();
                let mut out = sink(None)?;
                for b in catalog.filter(&filter) {
                    writeln!(out, "{}", b.name)?;
                }
                out.flush()?;
            }
            CatalogAction::Export { output } => {
                let mut out = sink(output.as_deref())?;
                writeln!(out, "{}", Catalog::standard().to_json()?)?;
                out.flush()?;
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

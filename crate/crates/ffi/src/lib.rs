//! C ABI over the simulator.
//!
//! Networks are opaque handles created by one of the `rnnsched_network_*`
//! constructors and released with [`rnnsched_network_free`]. Every fallible
//! call returns an [`RnnschedStatus`]; on failure a message is available from
//! [`rnnsched_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rnnsched::cachesim::{Associativity, CacheConfig};
use rnnsched::catalog::Catalog;
use rnnsched::metrics::working_set_bytes;
use rnnsched::model::{CellType, NetworkConfig};
use rnnsched::report::{self, RunOptions};
use rnnsched::tracegen::Schedule;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnschedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownBenchmark = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnschedCell {
    Lstm = 0,
    Gru = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnschedSchedule {
    A = 0,
    APlus = 1,
}

impl From<RnnschedSchedule> for Schedule {
    fn from(s: RnnschedSchedule) -> Self {
        match s {
            RnnschedSchedule::A => Schedule::A,
            RnnschedSchedule::APlus => Schedule::APlus,
        }
    }
}

/// Opaque network handle.
pub struct RnnschedNetwork {
    name: String,
    config: NetworkConfig,
}

/// Cache and accounting options. Start from [`rnnsched_cache_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnnschedCacheOptions {
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    /// 0 for fully associative.
    pub ways: u32,
    /// 0 for a single cold run.
    pub warm_runs: u32,
    pub weights_only: bool,
    pub writeback_flush: bool,
    pub write_fill: bool,
    /// 0 for half the capacity.
    pub block_bytes: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RnnschedReport {
    pub working_set_bytes: u64,
    pub mem_read_bytes: u64,
    pub mem_write_bytes: u64,
    pub avg_rw_bytes: f64,
    pub dre: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RnnschedStatus, String);

impl From<rnnsched::Error> for Failure {
    fn from(e: rnnsched::Error) -> Self {
        let status = match e {
            rnnsched::Error::UnknownBenchmark(_) => RnnschedStatus::UnknownBenchmark,
            rnnsched::Error::Io(_) => RnnschedStatus::Internal,
            _ => RnnschedStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RnnschedStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RnnschedStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RnnschedStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RnnschedStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RnnschedStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn store_network(out: *mut *mut RnnschedNetwork, name: String, config: NetworkConfig) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    config.validate()?;
    *out = Box::into_raw(Box::new(RnnschedNetwork { name, config }));
    Ok(())
}

unsafe fn deref_network<'a>(p: *const RnnschedNetwork) -> Result<&'a RnnschedNetwork, Failure> {
    p.as_ref().ok_or_else(|| null("network"))
}

fn default_options() -> RnnschedCacheOptions {
    rnnsched_cache_options_default()
}

fn run_options(o: &RnnschedCacheOptions) -> Result<RunOptions, Failure> {
    let cache = CacheConfig {
        capacity_bytes: o.capacity_bytes,
        line_bytes: o.line_bytes,
        associativity: match o.ways {
            0 => Associativity::Full,
            k => Associativity::SetAssociative(k as usize),
        },
        writeback_flush: o.writeback_flush,
        write_fill: o.write_fill,
    };
    cache.validate()?;
    Ok(RunOptions {
        cache,
        warm_runs: o.warm_runs,
        weights_only: o.weights_only,
        seed: o.seed,
        block_bytes: (o.block_bytes > 0).then_some(o.block_bytes),
    })
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library; valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rnnsched_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rnnsched_cache_options_default() -> RnnschedCacheOptions {
    let c = CacheConfig::default();
    RnnschedCacheOptions {
        capacity_bytes: c.capacity_bytes,
        line_bytes: c.line_bytes,
        ways: 0,
        warm_runs: 0,
        weights_only: false,
        writeback_flush: c.writeback_flush,
        write_fill: c.write_fill,
        block_bytes: 0,
        seed: 0,
    }
}

/// Network with uniform layer widths and the default element size.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_network_new(
    cell: RnnschedCell,
    hidden_size: usize,
    num_layers: usize,
    input_length: usize,
    vocab_size: usize,
    out: *mut *mut RnnschedNetwork,
) -> RnnschedStatus {
    guard(|| {
        let cell = match cell {
            RnnschedCell::Lstm => CellType::LSTM,
            RnnschedCell::Gru => CellType::GRU,
        };
        let config = NetworkConfig::new(cell, hidden_size, num_layers, input_length).with_vocab(vocab_size);
        store_network(out, "network".into(), config)
    })
}

/// Network from a config JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writing
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_network_from_json(
    json: *const c_char,
    out: *mut *mut RnnschedNetwork,
) -> RnnschedStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let config: NetworkConfig = serde_json::from_str(text).map_err(rnnsched::Error::from)?;
        store_network(out, "network".into(), config)
    })
}

/// Network from the built-in catalog, e.g. `lm-t100`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for writing
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_network_from_catalog(
    name: *const c_char,
    out: *mut *mut RnnschedNetwork,
) -> RnnschedStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let spec = Catalog::standard().get(name)?.clone();
        store_network(out, spec.name, spec.config)
    })
}

/// # Safety
/// `network` must be null or a handle from one of the constructors, not
/// already freed.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_network_free(network: *mut RnnschedNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Config JSON of a network; release with [`rnnsched_string_free`].
///
/// # Safety
/// `network` must be a live handle; `out` must be valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_network_to_json(
    network: *const RnnschedNetwork,
    out: *mut *mut c_char,
) -> RnnschedStatus {
    guard(|| {
        let net = deref_network(network)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string(&net.config).map_err(rnnsched::Error::from)?;
        *out = CString::new(text).map_err(|e| Failure(RnnschedStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not already freed.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `network` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_working_set_bytes(
    network: *const RnnschedNetwork,
    schedule: RnnschedSchedule,
    out: *mut u64,
) -> RnnschedStatus {
    guard(|| {
        let net = deref_network(network)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = working_set_bytes(&net.config, schedule.into())?;
        Ok(())
    })
}

/// Simulates one schedule. A null `options` uses the defaults.
///
/// # Safety
/// `network` must be a live handle; `options` null or valid; `out` valid for
/// writing.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_run(
    network: *const RnnschedNetwork,
    schedule: RnnschedSchedule,
    options: *const RnnschedCacheOptions,
    out: *mut RnnschedReport,
) -> RnnschedStatus {
    guard(|| {
        let net = deref_network(network)?;
        let opts = options.as_ref().copied().unwrap_or_else(default_options);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = report::run(&net.name, &net.config, schedule.into(), &run_options(&opts)?)?;
        *out = RnnschedReport {
            working_set_bytes: r.working_set_bytes,
            mem_read_bytes: r.mem_read_bytes,
            mem_write_bytes: r.mem_write_bytes,
            avg_rw_bytes: r.avg_rw_bytes,
            dre: r.dre,
        };
        Ok(())
    })
}

/// Traffic under schedule A divided by traffic under A+.
///
/// # Safety
/// `network` must be a live handle; `options` null or valid; `ratio` valid
/// for writing.
#[no_mangle]
pub unsafe extern "C" fn rnnsched_compare(
    network: *const RnnschedNetwork,
    options: *const RnnschedCacheOptions,
    ratio: *mut f64,
) -> RnnschedStatus {
    guard(|| {
        let net = deref_network(network)?;
        let opts = run_options(&options.as_ref().copied().unwrap_or_else(default_options))?;
        let ratio = ratio.as_mut().ok_or_else(|| null("ratio"))?;
        let a = report::run(&net.name, &net.config, Schedule::A, &opts)?;
        let p = report::run(&net.name, &net.config, Schedule::APlus, &opts)?;
        if p.total_bytes() == 0 {
            return Err(Failure(RnnschedStatus::InvalidArgument, "schedule A+ moved no data".into()));
        }
        *ratio = a.total_bytes() as f64 / p.total_bytes() as f64;
        Ok(())
    })
}

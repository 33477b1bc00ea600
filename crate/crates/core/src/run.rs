//! Orchestration: multi-level point reports, grid sweeps and the formal
//! second-order check.
//!
//! Configuration files are flat TOML documents (`key = value` lines, `#`
//! comments); every key is optional and defaults to the first example run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bellprep::{
    purified_state, block_swap_perm, synthesize_encoding_network, BellError, EncodingNetwork, PurificationSchedule,
    StepOrder,
};
use crate::decode::{budget_check, decode_chain, injection_error, BudgetReport, InjectionReport};
use crate::error_models::{
    two_qubit_paulis, uniform_physical_set, CosetTable, GateErrorSet, LocationErrorModel, ModelError,
    PauliWeights, PhysicalErrorParams, Spectator,
};
use crate::gates::{level_step, GateError, LevelReport, LevelSummary, StepOptions};
use crate::indfit::{syndrome_weights, TieBreak, NUM_SYNDROMES};
use crate::scalar::{BigFloat, Poly, PolyCtx, Scalar, ScalarError, DEFAULT_DIGITS, MAX_DEGREE};
use crate::symplectic::{Pauli, PauliProduct};

pub const DEFAULT_FAILURE_CUTOFF: f64 = 0.25;
pub const DEFAULT_MEMORY_ERROR: f64 = 0.004;
pub const DEFAULT_CODE_TOLERANCE: f64 = 0.11;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("invalid spectator schedule {0:?}")]
    Schedule(String),
    #[error("schedule has {schedule} entries but levels = {levels}")]
    ScheduleLength { levels: usize, schedule: usize },
    #[error("levels must be at least 1")]
    NoLevels,
    #[error("invalid backend {0:?}; expected double, bigfloat[:digits] or polynomial[:cap[:e_max]]")]
    Backend(String),
    #[error("{key} = {value} is outside (0, 1)")]
    Range { key: &'static str, value: f64 },
    #[error("purification needs at least one cycle")]
    NoCycles,
    #[error(transparent)]
    Probability(#[from] ScalarError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("physical error model: {0}")]
    Model(#[from] ModelError),
    #[error("encoder synthesis: {0}")]
    Synthesis(#[from] BellError),
    #[error("level {level}: {source}")]
    Level { level: usize, source: GateError },
    #[error("decoding: {0}")]
    Decode(GateError),
}

/// Numeric backend used for likelihoods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Double,
    BigFloat { digits: usize },
    Polynomial(PolyCtx),
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Double => write!(f, "double"),
            Backend::BigFloat { digits } => write!(f, "bigfloat:{digits}"),
            Backend::Polynomial(c) => write!(f, "polynomial:{}:{}", c.degree_cap, c.e_max),
        }
    }
}

impl FromStr for Backend {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::Backend(s.to_string());
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match (kind, rest.as_slice()) {
            ("double", []) => Ok(Backend::Double),
            ("bigfloat", []) => Ok(Backend::BigFloat { digits: DEFAULT_DIGITS }),
            ("bigfloat", [d]) => match d.parse() {
                Ok(digits) if digits > 0 => Ok(Backend::BigFloat { digits }),
                _ => Err(bad()),
            },
            ("polynomial", args) if args.len() <= 2 => {
                let mut ctx = PolyCtx::default();
                if let Some(c) = args.first() {
                    ctx.degree_cap = c.parse().map_err(|_| bad())?;
                }
                if let Some(e) = args.get(1) {
                    ctx.e_max = e.parse().map_err(|_| bad())?;
                }
                if ctx.degree_cap > MAX_DEGREE || !(ctx.e_max > 0.0 && ctx.e_max < 1.0) {
                    return Err(bad());
                }
                Ok(Backend::Polynomial(ctx))
            }
            _ => Err(bad()),
        }
    }
}

/// Parses `+,0,0`, `+00` or `plus zero zero`.
pub fn parse_schedule(s: &str) -> Result<Vec<Spectator>, ConfigError> {
    let bad = || ConfigError::Schedule(s.to_string());
    let tokens: Vec<&str> = if s.contains([',', ' ']) {
        s.split([',', ' ']).filter(|t| !t.is_empty()).collect()
    } else if s.chars().all(|c| c == '+' || c == '0') {
        s.split_terminator("").skip(1).collect()
    } else {
        vec![s]
    };
    if tokens.is_empty() {
        return Err(bad());
    }
    tokens.iter().map(|t| t.parse().map_err(|_| bad())).collect()
}

pub fn format_schedule(s: &[Spectator]) -> String {
    s.iter().map(|x| x.symbol().to_string()).collect::<Vec<_>>().join(",")
}

/// Default schedule for `levels` levels: `|+⟩_S` first, then `|0⟩_S`.
pub fn default_schedule(levels: usize) -> Vec<Spectator> {
    (0..levels).map(|l| if l == 0 { Spectator::Plus } else { Spectator::Zero }).collect()
}

/// Every key of a configuration file or command line. Unset keys fall back
/// to the defaults of the command being run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub p_prep: Option<f64>,
    pub p_cnot: Option<f64>,
    pub p_meas: Option<f64>,
    pub p_hadamard: Option<f64>,
    pub p_special: Option<f64>,
    pub levels: Option<usize>,
    pub schedule: Option<String>,
    pub backend: Option<String>,
    pub failure_cutoff: Option<f64>,
    pub cycles: Option<usize>,
    pub order: Option<StepOrder>,
    pub tie_break: Option<TieBreak>,
    pub memory_error: Option<f64>,
    pub code_tolerance: Option<f64>,
    pub report: Option<PathBuf>,
    pub document: Option<PathBuf>,
    pub p_cnot_axis: Option<Vec<f64>>,
    pub p_prep_axis: Option<Vec<f64>>,
    pub extra_p_cnot: Option<Vec<f64>>,
    pub csv: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => { Settings { $($f: $top.$f.or($base.$f)),* } };
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(
            base, top, p_prep, p_cnot, p_meas, p_hadamard, p_special, levels, schedule, backend, failure_cutoff,
            cycles, order, tie_break, memory_error, code_tolerance, report, document, p_cnot_axis, p_prep_axis,
            extra_p_cnot, csv
        )
    }

    fn levels_and_schedule(&self, default: &[Spectator]) -> Result<Vec<Spectator>, ConfigError> {
        let schedule = match (&self.schedule, self.levels) {
            (Some(s), _) => parse_schedule(s)?,
            (None, Some(l)) if l == default.len() => default.to_vec(),
            (None, Some(l)) => default_schedule(l),
            (None, None) => default.to_vec(),
        };
        match self.levels {
            Some(0) => Err(ConfigError::NoLevels),
            Some(l) if l != schedule.len() => Err(ConfigError::ScheduleLength { levels: l, schedule: schedule.len() }),
            _ => Ok(schedule),
        }
    }

    fn step(&self) -> Result<StepOptions, ConfigError> {
        let mut opts = StepOptions::default();
        if let Some(c) = self.cycles {
            if c == 0 {
                return Err(ConfigError::NoCycles);
            }
            opts.schedule.cycles = c;
        }
        if let Some(o) = self.order {
            opts.schedule.order = o;
        }
        if let Some(t) = self.tie_break {
            opts.tie_break = t;
        }
        Ok(opts)
    }

    fn cutoff(&self) -> Result<f64, ConfigError> {
        in_unit("failure_cutoff", self.failure_cutoff.unwrap_or(DEFAULT_FAILURE_CUTOFF))
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let d = RunConfig::default();
        let p_prep = self.p_prep.unwrap_or(d.params.p_prep);
        let mut params = PhysicalErrorParams::new(p_prep, self.p_cnot.unwrap_or(d.params.p_cnot));
        params.p_meas = self.p_meas.unwrap_or(params.p_meas);
        params.p_hadamard = self.p_hadamard.unwrap_or(params.p_hadamard);
        params.p_special = self.p_special.unwrap_or(params.p_special);
        params.validate()?;
        let config = RunConfig {
            params,
            schedule: self.levels_and_schedule(&d.schedule)?,
            backend: match &self.backend {
                Some(b) => b.parse()?,
                None => d.backend,
            },
            failure_cutoff: self.cutoff()?,
            step: self.step()?,
            memory_error: self.memory_error.unwrap_or(d.memory_error),
            code_tolerance: self.code_tolerance.unwrap_or(d.code_tolerance),
            report: self.report.clone(),
            document: self.document.clone(),
        };
        Ok(config)
    }

    pub fn grid_config(&self) -> Result<GridConfig, ConfigError> {
        let d = GridConfig::default();
        let axis = |key, v: &Option<Vec<f64>>, def: Vec<f64>| -> Result<Vec<f64>, ConfigError> {
            let v = v.clone().unwrap_or(def);
            v.iter().try_for_each(|&x| in_unit(key, x).map(|_| ()))?;
            Ok(v)
        };
        Ok(GridConfig {
            p_cnot_axis: axis("p_cnot_axis", &self.p_cnot_axis, d.p_cnot_axis)?,
            p_prep_axis: axis("p_prep_axis", &self.p_prep_axis, d.p_prep_axis)?,
            extra_p_cnot: axis("extra_p_cnot", &self.extra_p_cnot, d.extra_p_cnot)?,
            schedule: self.levels_and_schedule(&d.schedule)?,
            failure_cutoff: self.cutoff()?,
            step: self.step()?,
            csv: self.csv.clone(),
        })
    }
}

fn in_unit(key: &'static str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(ConfigError::Range { key, value })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalErrorParams,
    pub schedule: Vec<Spectator>,
    pub backend: Backend,
    pub failure_cutoff: f64,
    pub step: StepOptions,
    pub memory_error: f64,
    pub code_tolerance: f64,
    pub report: Option<PathBuf>,
    pub document: Option<PathBuf>,
}

impl Default for RunConfig {
    /// Cnot error 3 %, all others 1 %, five levels `+,0,0,0,+`.
    fn default() -> Self {
        use Spectator::{Plus, Zero};
        RunConfig {
            params: PhysicalErrorParams::new(0.01, 0.03),
            schedule: vec![Plus, Zero, Zero, Zero, Plus],
            backend: Backend::Double,
            failure_cutoff: DEFAULT_FAILURE_CUTOFF,
            step: StepOptions::default(),
            memory_error: DEFAULT_MEMORY_ERROR,
            code_tolerance: DEFAULT_CODE_TOLERANCE,
            report: None,
            document: None,
        }
    }
}

impl RunConfig {
    /// The lower-noise example: 0.2 % / 0.8 %, three levels `+,0,0`.
    pub fn second_example() -> Self {
        RunConfig {
            params: PhysicalErrorParams::new(0.002, 0.008),
            schedule: vec![Spectator::Plus, Spectator::Zero, Spectator::Zero],
            ..RunConfig::default()
        }
    }

    fn to_document(&self) -> Value {
        json!({
            "params": self.params,
            "schedule": format_schedule(&self.schedule),
            "backend": self.backend.to_string(),
            "failure_cutoff": self.failure_cutoff,
            "cycles": self.step.schedule.cycles,
            "order": self.step.schedule.order,
            "tie_break": self.step.tie_break,
            "memory_error": self.memory_error,
            "code_tolerance": self.code_tolerance,
        })
    }
}

/// Geometric axis with ratio 2 ending at `top`.
pub fn geometric_axis(top: f64, len: usize) -> Vec<f64> {
    (0..len).rev().map(|k| top / f64::powi(2.0, k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub p_cnot_axis: Vec<f64>,
    pub p_prep_axis: Vec<f64>,
    /// Additional cnot probabilities evaluated on every prep row.
    pub extra_p_cnot: Vec<f64>,
    pub schedule: Vec<Spectator>,
    pub failure_cutoff: f64,
    pub step: StepOptions,
    pub csv: Option<PathBuf>,
}

impl Default for GridConfig {
    /// 10×10 axes down from 0.05, extra cnot points 0.05·√2^{±1}, four
    /// levels `+,0,0,0`.
    fn default() -> Self {
        GridConfig {
            p_cnot_axis: geometric_axis(0.05, 10),
            p_prep_axis: geometric_axis(0.05, 10),
            extra_p_cnot: vec![0.05 / std::f64::consts::SQRT_2, 0.05 * std::f64::consts::SQRT_2],
            schedule: default_schedule(4),
            failure_cutoff: DEFAULT_FAILURE_CUTOFF,
            step: StepOptions::default(),
            csv: None,
        }
    }
}

impl GridConfig {
    /// Sorted `(p_cnot, p_prep)` points.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut cnots: Vec<f64> = self.p_cnot_axis.iter().chain(&self.extra_p_cnot).copied().collect();
        cnots.sort_by(f64::total_cmp);
        cnots.dedup();
        let mut preps = self.p_prep_axis.clone();
        preps.sort_by(f64::total_cmp);
        preps.dedup();
        cnots.iter().flat_map(|&c| preps.iter().map(move |&p| (c, p))).collect()
    }
}

/// One line of the level table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub spectator: Spectator,
    pub quality_min: f64,
    pub quality_max: f64,
    pub summary: LevelSummary,
    pub max_gate_error: f64,
    /// Decode error X, Z, Y and total.
    pub decode: [f64; 3],
    pub decode_total: f64,
}

#[derive(Debug, Clone)]
pub struct PointReport {
    pub config: RunConfig,
    pub levels: Vec<LevelRow>,
    pub decode_bound: f64,
    pub decode_non_increasing: bool,
    pub injection: InjectionReport,
    pub budget: BudgetReport,
    /// Machine-readable document: config, full level reports with decode
    /// rows appended, injection and budget.
    pub document: Value,
}

fn encoders(schedule: &[Spectator]) -> Result<BTreeMap<u8, EncodingNetwork>, BellError> {
    let mut nets = BTreeMap::new();
    for &s in schedule {
        if let std::collections::btree_map::Entry::Vacant(v) = nets.entry(s.symbol() as u8) {
            v.insert(synthesize_encoding_network(s)?);
        }
    }
    Ok(nets)
}

pub fn run_point(config: &RunConfig) -> Result<PointReport, RunError> {
    match config.backend {
        Backend::Double => run_point_with::<f64>(config, ()),
        Backend::BigFloat { digits } => run_point_with::<BigFloat>(config, digits),
        Backend::Polynomial(ctx) => run_point_with::<Poly>(config, ctx),
    }
}

/// Levels run in sequence; each sees the previous level's gate errors.
pub fn run_point_with<S: Scalar>(config: &RunConfig, ctx: S::Ctx) -> Result<PointReport, RunError> {
    config.params.validate().map_err(ConfigError::from)?;
    if config.schedule.is_empty() {
        return Err(ConfigError::NoLevels.into());
    }
    let phys = uniform_physical_set::<S>(&config.params, &ctx)?;
    let nets = encoders(&config.schedule)?;
    let mut reports: Vec<LevelReport<S>> = Vec::with_capacity(config.schedule.len());
    for (i, s) in config.schedule.iter().enumerate() {
        let prev = reports.last().map_or(&phys, |r| &r.gate_errors);
        let r = level_step(prev, &nets[&(s.symbol() as u8)], &ctx, config.step)
            .map_err(|source| RunError::Level { level: i + 1, source })?;
        reports.push(r);
    }
    let chain = decode_chain(&reports, &phys, &ctx).map_err(RunError::Decode)?;
    let injection = injection_error(chain.bound, &config.params);
    let budget = budget_check(chain.bound, &config.params, config.memory_error, config.code_tolerance);
    let levels: Vec<LevelRow> = reports
        .iter()
        .zip(&chain.steps)
        .zip(&chain.totals)
        .map(|((r, d), &t)| {
            let summary = r.summary();
            LevelRow {
                level: r.level,
                spectator: r.spectator,
                quality_min: r.bell.quality_min,
                quality_max: r.bell.quality_max,
                max_gate_error: summary.max_gate_error(),
                summary,
                decode: d.probabilities(&ctx).map(|p| p.to_f64()),
                decode_total: t,
            }
        })
        .collect();
    let level_docs: Vec<Value> = reports
        .iter()
        .zip(&levels)
        .map(|(r, row)| {
            let mut doc = r.to_document();
            doc["decode"] = json!({ "X": row.decode[0], "Z": row.decode[1], "Y": row.decode[2], "total": row.decode_total });
            doc
        })
        .collect();
    let document = json!({
        "config": config.to_document(),
        "levels": level_docs,
        "decode": chain.to_document(&ctx),
        "decode_non_increasing": chain.is_non_increasing(),
        "injection": injection,
        "budget": budget,
    });
    Ok(PointReport {
        config: config.clone(),
        levels,
        decode_bound: chain.bound,
        decode_non_increasing: chain.is_non_increasing(),
        injection,
        budget,
        document,
    })
}

impl PointReport {
    /// Human-readable table, one line per level.
    pub fn table(&self) -> String {
        let p = &self.config.params;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "p_prep {:.3e}  p_meas {:.3e}  p_cnot {:.3e}  p_hadamard {:.3e}  p_special {:.3e}  backend {}",
            p.p_prep, p.p_meas, p.p_cnot, p.p_hadamard, p.p_special, self.config.backend
        );
        let _ = writeln!(
            out,
            "{:>3} {:>2} {:>9} {:>9} | {:>9} {:>9} | {:>9} {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9} {:>9}",
            "lvl", "sp", "q_min", "q_max", "prep X", "prep Z", "cnot X", "cnot Z", "cnot Y", "cnot", "had X", "had Z",
            "had Y", "had", "dec X", "dec Z", "dec Y", "dec"
        );
        for r in &self.levels {
            let s = &r.summary;
            let _ = writeln!(
                out,
                "{:>3} {:>2} {:>9.4} {:>9.4} | {:>9.3e} {:>9.3e} | {:>9.3e} {:>9.3e} {:>9.3e} {:>9.3e} | {:>9.3e} {:>9.3e} {:>9.3e} {:>9.3e} | {:>9.3e} {:>9.3e} {:>9.3e} {:>9.3e}",
                r.level, r.spectator.symbol(), r.quality_min, r.quality_max, s.prep_x, s.prep_z,
                s.cnot_marginal[0], s.cnot_marginal[1], s.cnot_marginal[2], s.cnot_total,
                s.hadamard[0], s.hadamard[1], s.hadamard[2], s.hadamard_total,
                r.decode[0], r.decode[1], r.decode[2], r.decode_total
            );
        }
        let i = &self.injection;
        let b = &self.budget;
        let _ = writeln!(
            out,
            "decode bound {:.3e} ({})",
            self.decode_bound,
            if self.decode_non_increasing { "non-increasing" } else { "not monotone" }
        );
        let _ = writeln!(
            out,
            "injection {:.3e} = special {:.3e} + decode {:.3e} + Bell measurement {:.3e}; {}",
            i.total,
            i.special,
            i.decode,
            i.bell_measurement,
            if i.distillable { "below distillation threshold" } else { "NOT distillable" }
        );
        let _ = writeln!(
            out,
            "budget {:.3e} = Bell measurement {:.3e} + memory {:.3e} + 2×decode {:.3e} vs tolerance {:.3e}: {}",
            b.total,
            b.bell_measurement,
            b.memory,
            b.decode,
            b.tolerance,
            if b.pass { "pass" } else { "FAIL" }
        );
        out
    }

    pub fn document_string(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("document serializes") + "\n"
    }
}

/// One CSV row. Columns in order: `p_cnot, p_prep, level, max_gate_error,
/// quality_max, saturated, error`. A failed point has an empty
/// `max_gate_error`/`quality_max` and the diagnostic in `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub p_cnot: f64,
    pub p_prep: f64,
    pub level: usize,
    pub max_gate_error: Option<f64>,
    pub quality_max: Option<f64>,
    pub saturated: bool,
    pub error: String,
}

pub const GRID_COLUMNS: [&str; 7] = ["p_cnot", "p_prep", "level", "max_gate_error", "quality_max", "saturated", "error"];

/// Runs one grid point until the last level or saturation.
pub fn grid_point(
    p_cnot: f64,
    p_prep: f64,
    schedule: &[Spectator],
    cutoff: f64,
    step: StepOptions,
) -> Vec<GridRow> {
    let mut rows = Vec::new();
    let fail = |level, msg: String| GridRow {
        p_cnot,
        p_prep,
        level,
        max_gate_error: None,
        quality_max: None,
        saturated: false,
        error: msg,
    };
    let nets = match encoders(schedule) {
        Ok(n) => n,
        Err(e) => return vec![fail(0, format!("encoder synthesis: {e}"))],
    };
    let mut prev = match uniform_physical_set::<f64>(&PhysicalErrorParams::new(p_prep, p_cnot), &()) {
        Ok(g) => g,
        Err(e) => return vec![fail(0, e.to_string())],
    };
    for (i, s) in schedule.iter().enumerate() {
        match level_step(&prev, &nets[&(s.symbol() as u8)], &(), step) {
            Ok(r) => {
                let max = r.summary().max_gate_error();
                let saturated = max >= cutoff || max.is_nan();
                rows.push(GridRow {
                    p_cnot,
                    p_prep,
                    level: r.level,
                    max_gate_error: Some(max),
                    quality_max: Some(r.bell.quality_max),
                    saturated,
                    error: String::new(),
                });
                if saturated {
                    break;
                }
                prev = r.gate_errors;
            }
            Err(e) => {
                rows.push(fail(i + 1, e.to_string()));
                break;
            }
        }
    }
    rows
}

/// Evaluates all points in parallel and returns rows sorted by
/// `(p_cnot, p_prep, level)`.
pub fn run_grid(config: &GridConfig) -> Vec<GridRow> {
    let mut rows: Vec<GridRow> = config
        .points()
        .into_par_iter()
        .flat_map_iter(|(c, p)| grid_point(c, p, &config.schedule, config.failure_cutoff, config.step))
        .collect();
    rows.sort_by(|a, b| {
        a.p_cnot.total_cmp(&b.p_cnot).then(a.p_prep.total_cmp(&b.p_prep)).then(a.level.cmp(&b.level))
    });
    rows
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

/// CSV text with a header line; probabilities in scientific notation with
/// ten significant digits.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRID_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            sci(Some(r.p_cnot)),
            sci(Some(r.p_prep)),
            r.level.to_string(),
            sci(r.max_gate_error),
            sci(r.quality_max),
            u8::from(r.saturated).to_string(),
            r.error.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Whether a point failed (saturated or errored) at or before `level`.
pub fn failed_by(rows: &[GridRow], p_cnot: f64, p_prep: f64, level: usize) -> bool {
    rows.iter()
        .filter(|r| r.p_cnot == p_cnot && r.p_prep == p_prep && r.level <= level)
        .any(|r| r.saturated || !r.error.is_empty())
}

/// Along the row `p_prep`, the largest cnot probability that survives
/// `level` and the smallest one above it that does not.
pub fn saturation_boundary(rows: &[GridRow], p_prep: f64, level: usize) -> (Option<f64>, Option<f64>) {
    let mut cnots: Vec<f64> = rows.iter().filter(|r| r.p_prep == p_prep).map(|r| r.p_cnot).collect();
    cnots.sort_by(f64::total_cmp);
    cnots.dedup();
    let first_failed = cnots.iter().position(|&c| failed_by(rows, c, p_prep, level));
    match first_failed {
        Some(i) => (i.checked_sub(1).map(|j| cnots[j]), Some(cnots[i])),
        None => (cnots.last().copied(), None),
    }
}

/// A syndrome whose minimum likelihood degree disagrees with its minimum
/// Pauli weight, or an undetected logical error below second order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormalViolation {
    pub syndrome: usize,
    pub weight: usize,
    pub degree: Option<usize>,
    pub undetected_logical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormalSpectatorReport {
    pub spectator: Spectator,
    /// Syndromes whose weight is within the degree cap.
    pub checked: usize,
    /// Syndromes with weight above the cap.
    pub unchecked: usize,
    pub violations: Vec<FormalViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormalReport {
    pub ctx: PolyCtx,
    pub cycles: usize,
    pub spectators: Vec<FormalSpectatorReport>,
    pub pass: bool,
}

impl FormalReport {
    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "formal check: degree cap {}, e_max {}, {} cycle(s)",
            self.ctx.degree_cap, self.ctx.e_max, self.cycles
        );
        for s in &self.spectators {
            let _ = writeln!(
                out,
                "  spectator {}: {} checked, {} above cap, {} violation(s)",
                s.spectator.symbol(),
                s.checked,
                s.unchecked,
                s.violations.len()
            );
            for v in &s.violations {
                let deg = v.degree.map_or("none".to_string(), |d| d.to_string());
                let tag = if v.undetected_logical { " (undetected logical)" } else { "" };
                let _ = writeln!(out, "    syndrome {:#010b}: weight {}, degree {deg}{tag}", v.syndrome, v.weight);
            }
        }
        let _ = writeln!(out, "{}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

/// Every location carries the same likelihood `e` on each entry.
pub fn formal_gate_set(ctx: PolyCtx) -> GateErrorSet<Poly> {
    let e = Poly::param(ctx);
    let one = |p| (PauliProduct::single(1, 0, p).expect("one qubit"), e.clone());
    let model = |v| LocationErrorModel::new(1, v).expect("distinct entries");
    GateErrorSet {
        level: 0,
        prep: model(vec![one(Pauli::X), one(Pauli::Z)]),
        meas: model(vec![one(Pauli::X), one(Pauli::Z)]),
        cnot: LocationErrorModel::new(2, two_qubit_paulis().into_iter().map(|p| (p, e.clone())).collect())
            .expect("distinct entries"),
        hadamard: model(Pauli::NON_IDENTITY.iter().map(|&p| one(p)).collect()),
        special: model(vec![one(Pauli::Z)]),
    }
}

/// Checks the level-1 purified Bell pair with the default gate set of
/// [`formal_gate_set`].
pub fn run_formal_check(degree_cap: usize, e_max: f64, cycles: usize) -> Result<FormalReport, RunError> {
    let ctx = PolyCtx { degree_cap, e_max };
    formal_check_with(&formal_gate_set(ctx), ctx, cycles)
}

/// A syndrome passes when its likelihood is absent or its minimum degree
/// equals its minimum Pauli weight; undetected logical errors must also
/// have degree at least 2. Weights above the cap are not checked.
pub fn formal_check_with(gates: &GateErrorSet<Poly>, ctx: PolyCtx, cycles: usize) -> Result<FormalReport, RunError> {
    if ctx.degree_cap > MAX_DEGREE {
        return Err(ConfigError::Backend(Backend::Polynomial(ctx).to_string()).into());
    }
    if cycles == 0 {
        return Err(ConfigError::NoCycles.into());
    }
    let schedule = PurificationSchedule { cycles, ..PurificationSchedule::default() };
    let mut spectators = Vec::new();
    for spectator in [Spectator::Plus, Spectator::Zero] {
        let net = synthesize_encoding_network(spectator)?;
        let (mut state, _) = purified_state(gates, &net, ctx, schedule)
            .map_err(|e| RunError::Level { level: 1, source: e.into() })?;
        state.symmetrize_bits(&block_swap_perm());
        let weights = syndrome_weights(&CosetTable::new(spectator), &PauliWeights::UNIT);
        let (mut checked, mut unchecked, mut violations) = (0, 0, Vec::new());
        for s in 1..NUM_SYNDROMES {
            let weight = weights[s].round() as usize;
            if weight > ctx.degree_cap {
                unchecked += 1;
                continue;
            }
            checked += 1;
            let degree = state.dist()[s].min_degree();
            let undetected_logical = s & 0b11_1111 == 0;
            let bad_degree = degree.is_some_and(|d| d != weight);
            let low_logical = undetected_logical && degree.is_some_and(|d| d < 2);
            if bad_degree || low_logical {
                violations.push(FormalViolation { syndrome: s, weight, degree, undetected_logical });
            }
        }
        spectators.push(FormalSpectatorReport { spectator, checked, unchecked, violations });
    }
    let pass = spectators.iter().all(|s| s.violations.is_empty());
    Ok(FormalReport { ctx, cycles, spectators, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_parse_in_all_spellings() {
        use Spectator::{Plus, Zero};
        for s in ["+,0,0", "+00", "plus zero zero", "+, 0, 0"] {
            assert_eq!(parse_schedule(s).unwrap(), vec![Plus, Zero, Zero], "{s}");
        }
        assert!(parse_schedule("").is_err());
        assert!(parse_schedule("+,1").is_err());
        assert_eq!(format_schedule(&[Plus, Zero]), "+,0");
    }

    #[test]
    fn backends_round_trip() {
        for s in ["double", "bigfloat:48", "polynomial:4:0.0025"] {
            assert_eq!(s.parse::<Backend>().unwrap().to_string(), s);
        }
        assert_eq!("bigfloat".parse::<Backend>().unwrap(), Backend::BigFloat { digits: DEFAULT_DIGITS });
        for s in ["float", "bigfloat:0", "polynomial:99", "polynomial:4:2", "double:3"] {
            assert!(s.parse::<Backend>().is_err(), "{s}");
        }
    }

    #[test]
    fn defaults_match_example_runs() {
        let c = Settings::default().run_config().unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(format_schedule(&c.schedule), "+,0,0,0,+");
        let g = Settings::default().grid_config().unwrap();
        assert_eq!(g.p_cnot_axis.len(), 10);
        assert_eq!(g.p_cnot_axis[9], 0.05);
        assert_eq!(g.p_prep_axis[0], 0.05 / 512.0);
        assert_eq!(g.points().len(), 120);
        assert_eq!(format_schedule(&g.schedule), "+,0,0,0");
    }

    #[test]
    fn settings_parse_and_overlay() {
        let file = Settings::parse("# second example\np_prep = 0.002\np_cnot = 0.008\nschedule = \"+,0,0\"\n").unwrap();
        let cli = Settings { p_cnot: Some(0.009), ..Settings::default() };
        let c = file.overlay(cli).run_config().unwrap();
        assert_eq!(c.params, PhysicalErrorParams::new(0.002, 0.009));
        assert_eq!(c.schedule.len(), 3);
        assert!(Settings::parse("p_prep = 0.1\nbogus = 1\n").is_err());
        assert!(Settings::parse("levels = 3\nschedule = \"+,0\"\n").unwrap().run_config().is_err());
        assert!(Settings::parse("p_cnot = 1.5\n").unwrap().run_config().is_err());
        assert!(Settings::parse("levels = 0\n").unwrap().run_config().is_err());
        let l = Settings::parse("levels = 2\n").unwrap().run_config().unwrap();
        assert_eq!(format_schedule(&l.schedule), "+,0");
        assert!(Settings::parse("p_prep_axis = [0.1, 0.0]\n").unwrap().grid_config().is_err());
    }

    #[test]
    fn zero_noise_point_is_all_zero() {
        let config = RunConfig { params: PhysicalErrorParams::new(0.0, 0.0), ..RunConfig::default() };
        let r = run_point(&config).unwrap();
        for row in &r.levels {
            assert_eq!(row.max_gate_error, 0.0);
            assert_eq!(row.decode_total, 0.0);
        }
        assert_eq!(r.decode_bound, 0.0);
        assert!(r.table().contains("budget"));
    }

    #[test]
    fn saturating_point_stops_early() {
        let rows = grid_point(0.2, 0.01, &default_schedule(4), DEFAULT_FAILURE_CUTOFF, StepOptions::default());
        let last = rows.last().unwrap();
        assert!(last.saturated || !last.error.is_empty(), "{rows:?}");
        assert!(rows.len() < 4);
    }

    #[test]
    fn boundary_brackets_failures() {
        let row = |c, level, saturated| GridRow {
            p_cnot: c,
            p_prep: 0.001,
            level,
            max_gate_error: Some(0.1),
            quality_max: Some(1.0),
            saturated,
            error: String::new(),
        };
        let rows = vec![row(0.01, 1, false), row(0.01, 2, false), row(0.02, 1, false), row(0.02, 2, true), row(0.04, 1, true)];
        assert_eq!(saturation_boundary(&rows, 0.001, 2), (Some(0.01), Some(0.02)));
        assert_eq!(saturation_boundary(&rows, 0.001, 1), (Some(0.02), Some(0.04)));
        let csv = grid_csv(&rows);
        assert!(csv.starts_with("p_cnot,p_prep,level,max_gate_error,quality_max,saturated,error\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn formal_check_without_errors_passes() {
        let ctx = PolyCtx::default();
        let r = formal_check_with(&GateErrorSet::zero(0, &ctx), ctx, 2).unwrap();
        assert!(r.pass);
    }
}

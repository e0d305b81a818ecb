//! (Q, w) design-plane sweeps.
//!
//! Every cell runs the mean-field pipeline (steady state, coherence time,
//! sensitivities) and, on request, the cumulant integrator. Cells are
//! evaluated in parallel and assembled in row-major order (Q outer, w
//! inner), so output files do not depend on the thread count. Each Q row
//! also gets the masing-window edges and the grid pump rate maximizing
//! T_coh.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::coherence::{coherence_time, SteadyMoments};
use crate::cumulant::{integrate_to_steady_state, CumulantState, IntegratorOptions};
use crate::error::{MaserError, Result};
use crate::meanfield::{detuned_steady_state, masing_window, resonant_steady_state, MeanFieldState, PumpWindow};
use crate::params::{derive_rates, DerivedRates, SystemParams};
use crate::sensing::{magnetic_sensitivity, position_sensitivity};

/// Log-spaced grid. Equal bounds collapse to a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogAxis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        LogAxis { min, max, points }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min && self.points >= 2;
        if ok {
            Ok(())
        } else {
            Err(MaserError::InvalidSweep(format!(
                "{name} axis needs 0 < min <= max and points >= 2, got [{:e}, {:e}] x {}",
                self.min, self.max, self.points
            )))
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.min == self.max {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let last = self.points - 1;
        (0..self.points)
            .map(|k| match k {
                0 => self.min,
                k if k == last => self.max,
                k => (lo + (hi - lo) * k as f64 / last as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Sz,
    Nc,
    Spsm,
    TCoh,
    Db,
    Dx,
    MasingFlag,
    WindowBoundary,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::Sz,
        Observable::Nc,
        Observable::Spsm,
        Observable::TCoh,
        Observable::Db,
        Observable::Dx,
        Observable::MasingFlag,
        Observable::WindowBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Sz => "sz",
            Observable::Nc => "nc",
            Observable::Spsm => "spsm",
            Observable::TCoh => "t_coh",
            Observable::Db => "db",
            Observable::Dx => "dx",
            Observable::MasingFlag => "masing_flag",
            Observable::WindowBoundary => "window_boundary",
        }
    }

    /// Quantities computed by each solver; the rest are per-cell or per-row.
    fn per_solver(self) -> bool {
        !matches!(self, Observable::MasingFlag | Observable::WindowBoundary)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = MaserError;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| MaserError::InvalidSweep(format!("unknown observable `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MeanField,
    Cumulant,
    Both,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MeanField => "meanfield",
            Method::Cumulant => "cumulant",
            Method::Both => "both",
        }
    }

    fn mean_field(self) -> bool {
        self != Method::Cumulant
    }

    fn cumulant(self) -> bool {
        self != Method::MeanField
    }
}

impl FromStr for Method {
    type Err = MaserError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meanfield" => Ok(Method::MeanField),
            "cumulant" => Ok(Method::Cumulant),
            "both" => Ok(Method::Both),
            other => Err(MaserError::InvalidSweep(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SystemParams<f64>,
    pub q_axis: LogAxis,
    pub w_axis: LogAxis,
    pub observables: Vec<Observable>,
    pub method: Method,
}

impl SweepSpec {
    /// 121 × 121 grid over Q ∈ [10³, 10⁸], w ∈ [10², 10⁸] s⁻¹, all
    /// observables, mean field only.
    pub fn new(base: SystemParams<f64>) -> Self {
        SweepSpec {
            base,
            q_axis: LogAxis::new(1e3, 1e8, 121),
            w_axis: LogAxis::new(1e2, 1e8, 121),
            observables: Observable::ALL.to_vec(),
            method: Method::MeanField,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.q_axis.validate("q")?;
        self.w_axis.validate("w")?;
        if self.observables.is_empty() {
            return Err(MaserError::InvalidSweep("no observables requested".into()));
        }
        Ok(())
    }

    /// Value columns in output order (without `q`, `w`, `masing`, `diag`).
    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        let mut push = |prefix: &str, with_shared: bool| {
            for &o in &self.observables {
                match o {
                    Observable::WindowBoundary if with_shared => {
                        cols.push("w_min".to_string());
                        cols.push("w_max".to_string());
                    }
                    Observable::MasingFlag if with_shared => cols.push(o.name().to_string()),
                    o if o.per_solver() => cols.push(format!("{prefix}{}", o.name())),
                    _ => {}
                }
            }
        };
        if self.method.mean_field() {
            push("", true);
        }
        if self.method.cumulant() {
            push("cu_", !self.method.mean_field());
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub q: f64,
    pub w: f64,
    /// One entry per [`SweepSpec::columns`]; NaN where undefined.
    pub values: Vec<f64>,
    pub masing: bool,
    /// Mean-field T_coh (NaN when not masing), kept for the ridge.
    pub t_coh: f64,
    /// Per-cell failures and solver notes; empty when all went well.
    pub diag: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub q: f64,
    /// `None` where the column has no masing window.
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgePoint {
    pub q: f64,
    pub w: f64,
    pub t_coh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub columns: Vec<String>,
    /// Row-major, Q outer.
    pub records: Vec<CellRecord>,
    pub boundary: Vec<BoundaryPoint>,
    pub ridge: Vec<RidgePoint>,
}

struct Solved {
    moments: SteadyMoments<f64>,
    t_coh: f64,
    db: f64,
    dx: f64,
}

fn mean_field_state(p: &SystemParams<f64>, rates: &DerivedRates<f64>) -> Result<MeanFieldState<f64>> {
    if rates.detuning == 0.0 {
        Ok(resonant_steady_state(p, rates))
    } else {
        detuned_steady_state(p, rates)
    }
}

fn solved(p: &SystemParams<f64>, rates: DerivedRates<f64>, moments: SteadyMoments<f64>) -> Solved {
    let t_coh = coherence_time(&moments, &rates).map(|r| r.t_coh).unwrap_or(f64::NAN);
    Solved {
        moments,
        t_coh,
        db: magnetic_sensitivity(&rates, t_coh).unwrap_or(f64::NAN),
        dx: position_sensitivity(p, &rates, t_coh).unwrap_or(f64::NAN),
    }
}

fn solver_value(o: Observable, s: &Solved) -> f64 {
    match o {
        Observable::Sz => s.moments.s_z,
        Observable::Nc => s.moments.photons,
        Observable::Spsm => s.moments.spsm,
        Observable::TCoh => s.t_coh,
        Observable::Db => s.db,
        Observable::Dx => s.dx,
        Observable::MasingFlag | Observable::WindowBoundary => unreachable!("not a solver quantity"),
    }
}

fn cumulant_solution(p: &SystemParams<f64>, rates: &DerivedRates<f64>, mf: &MeanFieldState<f64>) -> Result<Solved> {
    let seed = if mf.masing {
        CumulantState::from_mean_field(mf, rates)
    } else {
        CumulantState::incoherent_seed(p, rates)
    };
    let run = integrate_to_steady_state(&seed, p, rates, &IntegratorOptions::default())?;
    Ok(solved(p, *rates, SteadyMoments::from_cumulant(&run.state, mf)))
}

fn evaluate_cell(
    params: &SystemParams<f64>,
    observables: &[Observable],
    method: Method,
    window: &Result<Option<PumpWindow<f64>>>,
) -> CellRecord {
    let mut diag = Vec::new();
    let mut values = Vec::new();
    let (q, w) = (params.cavity_q, params.pump_rate_w);
    let nan_record = |diag: Vec<String>, n: usize| CellRecord {
        q,
        w,
        values: vec![f64::NAN; n],
        masing: false,
        t_coh: f64::NAN,
        diag,
    };
    let rates = match derive_rates(params) {
        Ok(r) => r,
        Err(e) => return nan_record(vec![format!("rates: {e}")], width(observables, method)),
    };
    let mf = match mean_field_state(params, &rates) {
        Ok(m) => m,
        Err(e) => return nan_record(vec![format!("meanfield: {e}")], width(observables, method)),
    };
    let mean = solved(params, rates, SteadyMoments::from_mean_field(&mf));
    let edges = match window {
        Ok(Some(win)) => (win.w_min, win.w_max),
        Ok(None) => (f64::NAN, f64::NAN),
        Err(e) => {
            diag.push(format!("window: {e}"));
            (f64::NAN, f64::NAN)
        }
    };
    let shared = |o: Observable, values: &mut Vec<f64>| match o {
        Observable::MasingFlag => values.push(if mf.masing { 1.0 } else { 0.0 }),
        Observable::WindowBoundary => {
            values.push(edges.0);
            values.push(edges.1);
        }
        _ => {}
    };
    if method.mean_field() {
        for &o in observables {
            if o.per_solver() {
                values.push(solver_value(o, &mean));
            } else {
                shared(o, &mut values);
            }
        }
    }
    if method.cumulant() {
        let cu = cumulant_solution(params, &rates, &mf);
        if let Err(e) = &cu {
            diag.push(format!("cumulant: {e}"));
        }
        for &o in observables {
            if o.per_solver() {
                values.push(cu.as_ref().map(|s| solver_value(o, s)).unwrap_or(f64::NAN));
            } else if !method.mean_field() {
                shared(o, &mut values);
            }
        }
    }
    CellRecord {
        q,
        w,
        values,
        masing: mf.masing,
        t_coh: mean.t_coh,
        diag,
    }
}

fn width(observables: &[Observable], method: Method) -> usize {
    let per_solver = observables.iter().filter(|o| o.per_solver()).count();
    let shared: usize = observables
        .iter()
        .map(|o| match o {
            Observable::WindowBoundary => 2,
            Observable::MasingFlag => 1,
            _ => 0,
        })
        .sum();
    let solvers = usize::from(method.mean_field()) + usize::from(method.cumulant());
    per_solver * solvers + shared
}

/// Runs the full pipeline at one parameter point, as a sweep cell would.
pub fn evaluate_point(params: &SystemParams<f64>, observables: &[Observable], method: Method) -> CellRecord {
    evaluate_cell(params, observables, method, &masing_window(params))
}

/// Masing-window edges for every Q of the grid.
pub fn masing_boundary(spec: &SweepSpec) -> Result<Vec<BoundaryPoint>> {
    spec.validate()?;
    Ok(spec.q_axis.values().into_iter().map(|q| boundary_point(&spec.base, q)).collect())
}

fn boundary_point(base: &SystemParams<f64>, q: f64) -> BoundaryPoint {
    edge_point(q, &masing_window(&base.with_q(q)))
}

fn edge_point(q: f64, window: &Result<Option<PumpWindow<f64>>>) -> BoundaryPoint {
    match window {
        Ok(Some(win)) => BoundaryPoint {
            q,
            w_min: Some(win.w_min),
            w_max: Some(win.w_max),
        },
        _ => BoundaryPoint { q, w_min: None, w_max: None },
    }
}

/// Evaluates the grid on `jobs` threads (0 = all cores).
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    spec.validate()?;
    let qs = spec.q_axis.values();
    let ws = spec.w_axis.values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| MaserError::InvalidSweep(format!("thread pool: {e}")))?;

    let (records, windows) = pool.install(|| {
        let windows: Vec<Result<Option<PumpWindow<f64>>>> =
            qs.par_iter().map(|&q| masing_window(&spec.base.with_q(q))).collect();
        let records: Vec<CellRecord> = (0..qs.len() * ws.len())
            .into_par_iter()
            .map(|idx| {
                let (qi, wi) = (idx / ws.len(), idx % ws.len());
                let p = spec.base.with_q(qs[qi]).with_pump(ws[wi]);
                evaluate_cell(&p, &spec.observables, spec.method, &windows[qi])
            })
            .collect();
        (records, windows)
    });

    let boundary = qs
        .iter()
        .zip(&windows)
        .map(|(&q, win)| edge_point(q, win))
        .collect();
    let ridge = records
        .chunks(ws.len())
        .filter_map(|row| {
            row.iter()
                .filter(|c| c.t_coh.is_finite())
                .max_by(|a, b| a.t_coh.total_cmp(&b.t_coh))
                .map(|c| RidgePoint {
                    q: c.q,
                    w: c.w,
                    t_coh: c.t_coh,
                })
        })
        .collect();

    Ok(SweepResult {
        columns: spec.columns(),
        spec: spec.clone(),
        records,
        boundary,
        ridge,
    })
}

fn diag_text(diag: &[String]) -> String {
    if diag.is_empty() {
        "ok".to_string()
    } else {
        diag.join("; ")
    }
}

fn csv_err(e: csv::Error) -> MaserError {
    MaserError::Io(e.to_string())
}

/// `q,w,<columns...>,masing,diag`; floats in shortest round-trip
/// scientific notation, NaN for undefined values.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["q".to_string(), "w".to_string()];
    header.extend(result.columns.iter().cloned());
    header.extend(["masing".to_string(), "diag".to_string()]);
    wtr.write_record(&header).map_err(csv_err)?;
    for rec in &result.records {
        let mut row = vec![format!("{:e}", rec.q), format!("{:e}", rec.w)];
        row.extend(rec.values.iter().map(|v| format!("{v:e}")));
        row.push(u8::from(rec.masing).to_string());
        row.push(diag_text(&rec.diag));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| MaserError::Io(e.to_string()))
}

/// `q,w_min,w_max`, NaN in columns without a window.
pub fn write_boundary_csv<W: Write>(boundary: &[BoundaryPoint], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["q", "w_min", "w_max"]).map_err(csv_err)?;
    for b in boundary {
        let edge = |v: Option<f64>| format!("{:e}", v.unwrap_or(f64::NAN));
        wtr.write_record([format!("{:e}", b.q), edge(b.w_min), edge(b.w_max)]).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| MaserError::Io(e.to_string()))
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn to_json(result: &SweepResult) -> Value {
    let records: Vec<Value> = result
        .records
        .iter()
        .map(|rec| {
            let mut obj = Map::new();
            obj.insert("q".into(), number(rec.q));
            obj.insert("w".into(), number(rec.w));
            for (name, &v) in result.columns.iter().zip(&rec.values) {
                obj.insert(name.clone(), number(v));
            }
            obj.insert("masing".into(), Value::Bool(rec.masing));
            obj.insert("diag".into(), Value::String(diag_text(&rec.diag)));
            Value::Object(obj)
        })
        .collect();
    json!({
        "metadata": {
            "tool": "maser",
            "version": env!("CARGO_PKG_VERSION"),
            "params": result.spec.base,
            "q_axis": result.spec.q_axis,
            "w_axis": result.spec.w_axis,
            "method": result.spec.method.name(),
            "columns": result.columns,
        },
        "records": records,
        "boundary": result.boundary,
        "ridge": result.ridge,
    })
}

pub fn write_json<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_json(result)).map_err(|e| MaserError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| MaserError::Io(e.to_string()))
}

//! Command-line front end: single-point reports and (Q, w) sweeps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use maser_core::coherence::fluctuation::write_spectrum_csv;
use maser_core::coherence::{build_fluctuation_system, coherence_time, optimal_coherence, SteadyMoments};
use maser_core::config::ParamOverrides;
use maser_core::cumulant::{
    integrate_for, integrate_to_steady_state_observed, write_trajectory_csv, CumulantState, IntegratorOptions,
    SteadyStateRun,
};
use maser_core::meanfield::{detuned_steady_state, masing_window, resonant_steady_state, MeanFieldState};
use maser_core::params::{derive_rates, DerivedRates, Preset, SystemParams};
use maser_core::sensing::sensitivity_report;
use maser_core::sweep::{self, LogAxis, Method, Observable, SweepSpec};
use maser_core::MaserError;

#[derive(Parser)]
#[command(name = "maser", version, about = "Superradiant spin-ensemble maser simulator")]
struct Cli {
    /// Parameter preset the file and flags are applied on top of.
    #[arg(long, global = true, default_value = "fig3")]
    preset: Preset,
    /// TOML key/value parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, default_value = "meanfield")]
    method: Method,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// Number of spins N.
    #[arg(long, global = true)]
    n_spins: Option<f64>,
    /// Coupling g/2π, Hz.
    #[arg(long, global = true)]
    g_hz: Option<f64>,
    /// Cavity quality factor.
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Pump rate w, 1/s.
    #[arg(long, global = true)]
    w: Option<f64>,
    /// Dephasing time T2*, s.
    #[arg(long, global = true)]
    t2_star: Option<f64>,
    /// Spin relaxation rate, 1/s.
    #[arg(long, global = true)]
    gamma_eg: Option<f64>,
    /// Spin frequency ω_s/2π, Hz.
    #[arg(long, global = true)]
    omega_s_hz: Option<f64>,
    /// Cavity frequency ω_c/2π, Hz.
    #[arg(long, global = true)]
    omega_c_hz: Option<f64>,
    /// Cavity temperature, K.
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Cavity length, m.
    #[arg(long, global = true)]
    cavity_length: Option<f64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> ParamOverrides {
        ParamOverrides {
            n_spins: self.n_spins,
            coupling_g_hz: self.g_hz,
            cavity_q: self.q,
            pump_rate_w: self.w,
            t2_star: self.t2_star,
            gamma_eg: self.gamma_eg,
            omega_s_hz: self.omega_s_hz,
            omega_c_hz: self.omega_c_hz,
            temperature: self.temperature,
            cavity_length: self.cavity_length,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field steady state, regime and masing window.
    Steady,
    /// Cumulant dynamics from the incoherent state (or the mean-field state).
    Dynamics {
        #[arg(long)]
        seed_meanfield: bool,
        /// Integrate to this time instead of to steady state, s.
        #[arg(long)]
        t_end: Option<f64>,
        /// Write every accepted step to this CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Coherence time, spectral linewidth and optimal pump.
    Coherence {
        /// Write the Lorentzian line shape to this CSV file.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Magnetic-field and mirror-position sensitivities.
    Sensitivity,
    /// Evaluate a (Q, w) grid.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated observables (default: all).
        #[arg(long, value_delimiter = ',')]
        observables: Vec<Observable>,
    },
    /// Masing-window edges w_min(Q), w_max(Q).
    Boundary {
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 1e3)]
    q_min: f64,
    #[arg(long, default_value_t = 1e8)]
    q_max: f64,
    #[arg(long, default_value_t = 121)]
    q_points: usize,
    #[arg(long, default_value_t = 1e2)]
    w_min: f64,
    #[arg(long, default_value_t = 1e8)]
    w_max: f64,
    #[arg(long, default_value_t = 121)]
    w_points: usize,
}

/// Configuration problems exit with 2, everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MaserError>() {
        Some(MaserError::Config(_) | MaserError::InvalidParam { .. } | MaserError::InvalidSweep(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve_params(cli: &Cli) -> Result<SystemParams<f64>> {
    let mut p = cli.preset.params();
    if let Some(path) = &cli.config {
        p = ParamOverrides::load(path)?.apply(p)?;
    }
    Ok(cli.overrides.to_overrides().apply(p)?)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let params = resolve_params(cli)?;
    let rates = derive_rates(&params)?;
    let fields = match &cli.command {
        Command::Sweep { grid, observables } => {
            let spec = SweepSpec {
                base: params,
                q_axis: LogAxis::new(grid.q_min, grid.q_max, grid.q_points),
                w_axis: LogAxis::new(grid.w_min, grid.w_max, grid.w_points),
                observables: if observables.is_empty() { Observable::ALL.to_vec() } else { observables.clone() },
                method: cli.method,
            };
            let result = sweep::run_sweep(&spec, cli.jobs)?;
            let mut out = output(cli)?;
            match cli.format {
                Format::Csv => sweep::write_csv(&result, &mut out)?,
                Format::Json => sweep::write_json(&result, &mut out)?,
            }
            out.flush()?;
            return Ok(());
        }
        Command::Boundary { grid } => {
            let spec = SweepSpec {
                q_axis: LogAxis::new(grid.q_min, grid.q_max, grid.q_points),
                w_axis: LogAxis::new(grid.w_min, grid.w_max, grid.w_points),
                ..SweepSpec::new(params)
            };
            let boundary = sweep::masing_boundary(&spec)?;
            let mut out = output(cli)?;
            match cli.format {
                Format::Csv => sweep::write_boundary_csv(&boundary, &mut out)?,
                Format::Json => {
                    let doc = json!({ "metadata": metadata(cli, &params), "boundary": boundary });
                    serde_json::to_writer_pretty(&mut out, &doc)?;
                    writeln!(out)?;
                }
            }
            out.flush()?;
            return Ok(());
        }
        Command::Steady => steady(cli, &params, &rates)?,
        Command::Dynamics {
            seed_meanfield,
            t_end,
            trajectory,
        } => dynamics(&params, &rates, *seed_meanfield, *t_end, trajectory.as_ref())?,
        Command::Coherence { spectrum } => coherence(cli, &params, &rates, spectrum.as_ref())?,
        Command::Sensitivity => sensitivity(cli, &params, &rates)?,
    };
    let mut out = output(cli)?;
    write_fields(cli, &params, &fields, &mut out)?;
    out.flush()?;
    Ok(())
}

type Fields = Vec<(String, Value)>;

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn push(fields: &mut Fields, key: &str, v: f64) {
    fields.push((key.to_string(), num(v)));
}

fn metadata(cli: &Cli, params: &SystemParams<f64>) -> Value {
    json!({
        "tool": "maser",
        "version": env!("CARGO_PKG_VERSION"),
        "preset": cli.preset.name(),
        "method": cli.method.name(),
        "params": params,
    })
}

fn write_fields(cli: &Cli, params: &SystemParams<f64>, fields: &Fields, out: &mut dyn Write) -> Result<()> {
    match cli.format {
        Format::Json => {
            let values: Map<String, Value> = fields.iter().cloned().collect();
            let doc = json!({ "metadata": metadata(cli, params), "values": values });
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            wtr.write_record(fields.iter().map(|(k, _)| k.as_str()))?;
            wtr.write_record(fields.iter().map(|(_, v)| match v {
                Value::Number(n) if n.is_u64() => n.to_string(),
                Value::Number(n) => format!("{:e}", n.as_f64().unwrap_or(f64::NAN)),
                Value::Null => "NaN".to_string(),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
            wtr.flush()?;
        }
    }
    Ok(())
}

fn mean_field(params: &SystemParams<f64>, rates: &DerivedRates<f64>) -> Result<MeanFieldState<f64>> {
    Ok(if rates.detuning == 0.0 {
        resonant_steady_state(params, rates)
    } else {
        detuned_steady_state(params, rates)?
    })
}

fn cumulant_run(
    params: &SystemParams<f64>,
    rates: &DerivedRates<f64>,
    mf: &MeanFieldState<f64>,
) -> Result<SteadyStateRun<f64>> {
    let seed = if mf.masing {
        CumulantState::from_mean_field(mf, rates)
    } else {
        CumulantState::incoherent_seed(params, rates)
    };
    Ok(integrate_to_steady_state_observed(&seed, params, rates, &IntegratorOptions::default(), &mut |_, _| {})?)
}

fn moments(cli: &Cli, params: &SystemParams<f64>, rates: &DerivedRates<f64>, mf: &MeanFieldState<f64>) -> Result<SteadyMoments<f64>> {
    Ok(match cli.method {
        Method::MeanField => SteadyMoments::from_mean_field(mf),
        Method::Cumulant | Method::Both => SteadyMoments::from_cumulant(&cumulant_run(params, rates, mf)?.state, mf),
    })
}

fn steady(cli: &Cli, params: &SystemParams<f64>, rates: &DerivedRates<f64>) -> Result<Fields> {
    let mf = mean_field(params, rates)?;
    let mut f = Fields::new();
    push(&mut f, "kappa_c", rates.kappa_c);
    push(&mut f, "kappa_s", rates.kappa_s);
    push(&mut f, "n_th", rates.n_th);
    f.push(("regime".into(), Value::String(mf.regime.as_str().into())));
    f.push(("masing".into(), Value::Bool(mf.masing)));
    push(&mut f, "s_z", mf.s_z);
    push(&mut f, "photons", mf.photons());
    push(&mut f, "spsm", mf.spin_correlation());
    push(&mut f, "n_e", mf.n_e);
    push(&mut f, "n_g", mf.n_g);
    push(&mut f, "omega_hz", mf.omega_mase / std::f64::consts::TAU);
    let window = masing_window(params)?;
    push(&mut f, "w_min", window.map_or(f64::NAN, |w| w.w_min));
    push(&mut f, "w_max", window.map_or(f64::NAN, |w| w.w_max));
    if cli.method != Method::MeanField {
        let run = cumulant_run(params, rates, &mf)?;
        push(&mut f, "cu_s_z", run.state.s_z());
        push(&mut f, "cu_photons", run.state.photons);
        push(&mut f, "cu_spsm", run.state.spsm);
        push(&mut f, "cu_t_final", run.t_final);
    }
    Ok(f)
}

fn dynamics(
    params: &SystemParams<f64>,
    rates: &DerivedRates<f64>,
    seed_meanfield: bool,
    t_end: Option<f64>,
    trajectory: Option<&PathBuf>,
) -> Result<Fields> {
    let seed = if seed_meanfield {
        CumulantState::from_mean_field(&mean_field(params, rates)?, rates)
    } else {
        CumulantState::incoherent_seed(params, rates)
    };
    let mut samples = vec![(0.0, seed)];
    let mut observer = |t: f64, s: &CumulantState<f64>| {
        if trajectory.is_some() {
            samples.push((t, *s));
        }
    };
    let opts = IntegratorOptions::default();
    let run = match t_end {
        Some(t) => integrate_for(&seed, params, rates, t, &opts, &mut observer)?,
        None => integrate_to_steady_state_observed(&seed, params, rates, &opts, &mut observer)?,
    };
    if let Some(path) = trajectory {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trajectory_csv(BufWriter::new(file), &samples)?;
    }
    let s = run.state;
    let mut f = Fields::new();
    push(&mut f, "t_final", run.t_final);
    push(&mut f, "n_e", s.n_e);
    push(&mut f, "n_g", s.n_g);
    push(&mut f, "s_z", s.s_z());
    push(&mut f, "re_a_dag_s", s.a_dag_s.re);
    push(&mut f, "im_a_dag_s", s.a_dag_s.im);
    push(&mut f, "spsm", s.spsm);
    push(&mut f, "photons", s.photons);
    f.push(("accepted_steps".into(), run.accepted_steps.into()));
    f.push(("rejected_steps".into(), run.rejected_steps.into()));
    push(&mut f, "residual", run.residual);
    push(&mut f, "population_drift", run.population_drift);
    Ok(f)
}

fn coherence(
    cli: &Cli,
    params: &SystemParams<f64>,
    rates: &DerivedRates<f64>,
    spectrum: Option<&PathBuf>,
) -> Result<Fields> {
    let mf = mean_field(params, rates)?;
    let report = coherence_time(&moments(cli, params, rates, &mf)?, rates)?;
    let mut f = Fields::new();
    push(&mut f, "n_c", report.n_c);
    push(&mut f, "n_s", report.n_s);
    push(&mut f, "n_incoh", report.n_incoh);
    push(&mut f, "t_coh", report.t_coh);
    push(&mut f, "linewidth", report.linewidth);
    let spectral = build_fluctuation_system(&mf, rates, params)?.phase_noise_linewidth()?;
    push(&mut f, "spectral_linewidth", spectral);
    let opt = optimal_coherence(params)?;
    push(&mut f, "w_opt_analytic", opt.w_opt_analytic);
    push(&mut f, "t_coh_opt_analytic", opt.t_coh_opt_analytic);
    push(&mut f, "w_opt_numeric", opt.w_opt_numeric.unwrap_or(f64::NAN));
    push(&mut f, "t_coh_opt_numeric", opt.t_coh_opt_numeric.unwrap_or(f64::NAN));
    push(&mut f, "optimal_limit_ratio", opt.limit_ratio);
    if let Some(path) = spectrum {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let lw = report.linewidth;
        write_spectrum_csv(BufWriter::new(file), lw, lw * 1e-3, lw * 1e3, 121)?;
    }
    Ok(f)
}

fn sensitivity(cli: &Cli, params: &SystemParams<f64>, rates: &DerivedRates<f64>) -> Result<Fields> {
    let mf = mean_field(params, rates)?;
    let report = coherence_time(&moments(cli, params, rates, &mf)?, rates)?;
    let s = sensitivity_report(params, rates, report.t_coh)?;
    let mut f = Fields::new();
    push(&mut f, "t_coh", report.t_coh);
    push(&mut f, "db_ft_per_sqrt_hz", s.db_sqrt_t * 1e15);
    push(&mut f, "dx_fm_per_sqrt_hz", s.dx_sqrt_t * 1e15);
    push(&mut f, "bandwidth", s.bandwidth);
    Ok(f)
}

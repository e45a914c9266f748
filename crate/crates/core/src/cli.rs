//! Command-line front end. Every subcommand reads a JSON config (`--spec`), writes CSV or
//! JSON (`--out`, default stdout) and starts its output with a `#` line holding the
//! resolved configuration and the library version.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circuit::{self, GalvanicCoupling, MagnonParams, MoleculeParams, UConvention, WireGeometry};
use crate::dynamics::{self, TimeGrid, TrotterPlan};
use crate::error::{Error, Result};
use crate::hilbert::{basis_vector, total_parity, SystemLayout};
use crate::linalg::{CMat, CVec, C64};
use crate::models::{build_static, ModelSpec, Ops};
use crate::open_systems::{self, LindbladSpec};
use crate::spectra::{self, classify_regime};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "uscsim", version, about = "Quantum Rabi model and ultrastrong-coupling simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// JSON config for the subcommand (CSV table for `tables`)
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Output path (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true, default_value = "csv")]
    pub format: Format,
    /// Fock truncation for every mode
    #[arg(long, global = true, env = "USCSIM_NMAX", default_value_t = 30)]
    pub nmax: usize,
    /// Worker threads for parameter sweeps
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Print the resolved plan and exit without computing
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues and parities of a model
    Spectrum,
    /// Closed-system evolution from a product state
    Dynamics,
    /// Standard or dressed master equation
    Master,
    /// Digital Trotter sweep over step counts
    Trotter,
    /// Driven JC lab frame versus its effective Rabi model
    AnalogCompare,
    /// Preparation and gate protocols
    Protocols {
        #[arg(value_enum)]
        which: Protocol,
    },
    /// Coupling-strength formulas
    Circuit,
    /// Recompute the bundled (or a supplied) table of experiments
    Tables {
        /// Bundled table number (1 or 2); ignored when --spec is given
        #[arg(long, default_value_t = 1)]
        table: u8,
        /// U convention; defaults to C1 for table 1 and C4 otherwise
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ghz,
    Cphase,
    Noon,
    Dirac,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    C1,
    C4,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub model: ModelSpec,
    pub t_end: f64,
    pub steps: usize,
    /// Per-subsystem levels of the initial product state (all zero by default).
    #[serde(default)]
    pub initial: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterTask {
    #[default]
    Evolve,
    SteadyState,
    Rates,
    Modulated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterForm {
    Standard,
    #[default]
    Dressed,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub dg: f64,
    pub omega_mod: f64,
    #[serde(default = "ten")]
    pub levels: usize,
    pub steps: usize,
}

fn ten() -> usize {
    10
}
fn two_hundred() -> usize {
    200
}
fn fifty() -> usize {
    50
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterConfig {
    pub model: ModelSpec,
    pub lindblad: LindbladSpec,
    #[serde(default)]
    pub task: MasterTask,
    #[serde(default)]
    pub form: MasterForm,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "two_hundred")]
    pub samples: usize,
    /// Start in the dressed ground state (default) or a product state.
    #[serde(default)]
    pub initial: Option<Vec<usize>>,
    #[serde(default)]
    pub modulation: Option<Modulation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterConfig {
    pub model: ModelSpec,
    pub total_time: f64,
    pub steps: Vec<usize>,
    #[serde(default)]
    pub initial: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogConfig {
    pub model: ModelSpec,
    pub duration: f64,
    #[serde(default = "fifty")]
    pub samples: usize,
    #[serde(default)]
    pub initial: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzConfig {
    pub n: usize,
    pub g: f64,
    pub omega: f64,
    #[serde(default)]
    pub time: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CphaseConfig {
    pub model: ModelSpec,
    pub t1: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoonConfig {
    pub model: ModelSpec,
    pub n_target: usize,
    pub mixing_angle: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracConfig {
    pub model: ModelSpec,
    pub x0: f64,
    pub p0: f64,
    /// Spinor components as [re, im] pairs.
    pub spinor: [[f64; 2]; 2],
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitQuery {
    Rms { omega_r: f64, z: f64 },
    TransmonCapacitive { e_j: f64, e_c: f64, z: f64, c_g: f64, c_q: f64 },
    CapacitiveBound { c_g: f64, c_q: f64, c_r: f64 },
    CpbImpedance { z: f64, c_g: f64, c_j: f64 },
    CpbCircuit { c_g: f64, c_q: f64, c_r: f64, e_c: f64, e_j: f64 },
    Galvanic { coupling: GalvanicCoupling },
    Inductances { geometry: WireGeometry },
    KineticFromResistance { r_n: f64, t_c: f64 },
    Magnon { params: MagnonParams },
    Molecule { params: MoleculeParams },
    FigureOfMerit { g: f64, omega: f64, kappa: f64, gamma: f64, convention: UConvention },
}

/// Shortest-form-independent float rendering: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: format!("column {}: {e}", e.column()),
    })
}

fn read_spec<T: DeserializeOwned>(g: &GlobalOpts) -> Result<T> {
    let path = g
        .spec
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--spec PATH is required for this subcommand".into()))?;
    parse_json(&std::fs::read_to_string(path)?)
}

fn header(g: &GlobalOpts, sub: &str, config: &impl Serialize) -> String {
    let cfg = json!({
        "version": VERSION,
        "subcommand": sub,
        "nmax": g.nmax,
        "format": g.format,
        "jobs": g.jobs,
        "config": config,
    });
    format!("# uscsim {VERSION} {}\n", cfg)
}

fn csv_text(columns: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| Error::Numeric(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Numeric(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Rows of floats as CSV, or an object of named columns as JSON.
fn table_out(format: Format, columns: &[&str], data: &[Vec<f64>], meta: Value) -> Result<String> {
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = data.iter().map(|r| r.iter().map(|&x| fmt17(x)).collect()).collect();
            csv_text(columns, &rows)
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            for (k, name) in columns.iter().enumerate() {
                obj.insert(name.to_string(), json!(data.iter().map(|r| r[k]).collect::<Vec<_>>()));
            }
            json_text(&json!({ "meta": meta, "data": obj }))
        }
    }
}

fn json_text(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn initial_state(layout: &SystemLayout, levels: &Option<Vec<usize>>) -> Result<CVec> {
    match levels {
        None => Ok(basis_vector(layout.total_dim(), 0)),
        Some(lv) => Ok(basis_vector(layout.total_dim(), layout.basis_index(lv)?)),
    }
}

/// g / omega for models with a single coupling and mode frequency.
fn coupling_ratio(spec: &ModelSpec) -> Option<(f64, f64)> {
    match *spec {
        ModelSpec::Qrm { g, omega, .. }
        | ModelSpec::Jc { g, omega, .. }
        | ModelSpec::AcStark { g, omega, .. }
        | ModelSpec::BlochSiegert { g, omega, .. }
        | ModelSpec::AnisotropicRabi { g, omega, .. }
        | ModelSpec::Dicke { g, omega, .. }
        | ModelSpec::TavisCummings { g, omega, .. }
        | ModelSpec::Hopfield { g, omega, .. }
        | ModelSpec::TwoAtomRabi { g, omega, .. }
        | ModelSpec::ProtectedDicke { g, omega, .. } => Some((g, omega)),
        _ => None,
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numeric(e.to_string()))
}

/// Run a parsed command line and return the full output text.
pub fn execute(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    if g.nmax < 1 {
        return Err(Error::InvalidTruncation(g.nmax));
    }
    match &cli.command {
        Command::Spectrum => cmd_spectrum(g),
        Command::Dynamics => cmd_dynamics(g),
        Command::Master => cmd_master(g),
        Command::Trotter => cmd_trotter(g),
        Command::AnalogCompare => cmd_analog(g),
        Command::Protocols { which } => cmd_protocols(g, *which),
        Command::Circuit => cmd_circuit(g),
        Command::Tables { table, convention } => cmd_tables(g, *table, *convention),
    }
}

fn dry(g: &GlobalOpts, sub: &str, plan: Value) -> Result<String> {
    Ok(header(g, sub, &plan) + &json_text(&json!({ "dry_run": true, "plan": plan }))?)
}

fn cmd_spectrum(g: &GlobalOpts) -> Result<String> {
    let spec: ModelSpec = read_spec(g)?;
    spec.validate()?;
    let h = header(g, "spectrum", &spec);
    if g.dry_run {
        return dry(g, "spectrum", json!({ "model": spec, "dim": spec.default_layout(g.nmax)?.total_dim() }));
    }
    let es = spectra::spectrum_of(&spec, g.nmax)?;
    let regime = coupling_ratio(&spec).map(|(cg, w)| classify_regime(cg, w)).transpose()?;
    let body = match g.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = es
                .values
                .iter()
                .zip(&es.parity)
                .enumerate()
                .map(|(k, (e, p))| vec![k.to_string(), fmt17(*e), p.as_str().to_string()])
                .collect();
            csv_text(&["index", "energy", "parity"], &rows)?
        }
        Format::Json => {
            let levels: Vec<Value> = es
                .values
                .iter()
                .zip(&es.parity)
                .enumerate()
                .map(|(k, (e, p))| json!({ "index": k, "energy": e, "parity": p.as_str() }))
                .collect();
            json_text(&json!({
                "meta": { "model": spec.name(), "regime": regime.map(|r| r.regime.as_str()), "ratio": regime.map(|r| r.ratio) },
                "levels": levels,
            }))?
        }
    };
    Ok(h + &body)
}

fn cmd_dynamics(g: &GlobalOpts) -> Result<String> {
    let cfg: DynamicsConfig = read_spec(g)?;
    cfg.model.validate()?;
    let h = header(g, "dynamics", &cfg);
    let grid = TimeGrid::new(0.0, cfg.t_end, cfg.steps)?;
    if g.dry_run {
        return dry(g, "dynamics", json!({ "config": cfg, "dt": grid.dt() }));
    }
    let layout = cfg.model.default_layout(g.nmax)?;
    let ham = build_static(&cfg.model, &layout)?;
    let psi0 = initial_state(&layout, &cfg.initial)?;
    let res = dynamics::propagate_static(&ham, &psi0, &grid)?;
    let o = Ops::new(&layout);
    let modes = layout.mode_indices();
    let qubits = layout.qubit_indices();
    let n_op = modes.iter().fold(CMat::zeros(layout.total_dim(), layout.total_dim()), |a, &m| a + o.n(m));
    let sz = o.sum_s(&qubits, crate::hilbert::Axis::Z);
    let par = total_parity(&layout).matrix;
    let ev = |op: &CMat, s: &CVec| s.dotc(&(op * s)).re;
    let data: Vec<Vec<f64>> = res
        .times
        .iter()
        .zip(&res.states)
        .map(|(&t, s)| vec![t, psi0.dotc(s).norm(), ev(&n_op, s), ev(&sz, s), ev(&par, s)])
        .collect();
    let meta = json!({ "norm_drift": res.norm_drift, "top_fock_population": res.top_fock_population });
    Ok(h + &table_out(g.format, &["t", "return_amplitude", "photon_number", "sigma_z", "parity"], &data, meta)?)
}

fn cmd_master(g: &GlobalOpts) -> Result<String> {
    let cfg: MasterConfig = read_spec(g)?;
    cfg.model.validate()?;
    cfg.lindblad.validate()?;
    let h = header(g, "master", &cfg);
    if g.dry_run {
        return dry(g, "master", json!({ "config": cfg }));
    }
    let layout = cfg.model.default_layout(g.nmax)?;
    let ham = build_static(&cfg.model, &layout)?;
    let es = spectra::eigensystem(&ham)?;
    let rates = open_systems::dressed_rates(&es, &cfg.lindblad)?;
    let emission = open_systems::output_emission_operator(&es, &Default::default())?;
    let n_op = Ops::new(&layout).n(layout.mode_indices()[0]);
    match cfg.task {
        MasterTask::Rates => {
            let rows = rates.table(0.0);
            match g.format {
                Format::Json => Ok(h + &json_text(&rows)?),
                Format::Csv => {
                    let data: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.j.to_string(),
                                r.k.to_string(),
                                fmt17(r.delta),
                                fmt17(r.gamma_kappa),
                                fmt17(r.gamma_gamma),
                                fmt17(r.gamma_phi),
                            ]
                        })
                        .collect();
                    Ok(h + &csv_text(&["j", "k", "delta", "gamma_kappa", "gamma_gamma", "gamma_phi"], &data)?)
                }
            }
        }
        MasterTask::SteadyState => {
            let (rho_lab, generator_form) = match cfg.form {
                MasterForm::Standard => (open_systems::steady_state(&open_systems::standard_generator(&ham, &cfg.lindblad)?)?, "standard"),
                MasterForm::Dressed => {
                    let r = open_systems::steady_state(&open_systems::dressed_generator(&rates))?;
                    (&es.vectors * r * es.vectors.adjoint(), "dressed")
                }
            };
            let ground = es.ground();
            let n_ground = ground.dotc(&(&n_op * &ground)).re;
            let n_ss = (&n_op * &rho_lab).trace().re;
            let out = json!({
                "form": generator_form,
                "photon_number": n_ss,
                "ground_photon_number": n_ground,
                "excess_photons": n_ss - n_ground,
                "flux": emission.flux(&rho_lab),
                "ground_population": ground.dotc(&(&rho_lab * &ground)).re,
            });
            match g.format {
                Format::Json => Ok(h + &json_text(&out)?),
                Format::Csv => {
                    let keys = ["photon_number", "ground_photon_number", "excess_photons", "flux", "ground_population"];
                    let row: Vec<String> = keys.iter().map(|k| fmt17(out[*k].as_f64().unwrap_or(f64::NAN))).collect();
                    Ok(h + &csv_text(&keys, &[row])?)
                }
            }
        }
        MasterTask::Evolve => {
            let t_end = cfg.t_end.ok_or_else(|| Error::InvalidInput("evolve needs t_end".into()))?;
            let d = layout.total_dim();
            let rho0_lab = match &cfg.initial {
                None => {
                    let gv = es.ground();
                    &gv * gv.adjoint()
                }
                Some(_) => {
                    let v = initial_state(&layout, &cfg.initial)?;
                    &v * v.adjoint()
                }
            };
            let samples = cfg.samples.max(1);
            let mut data = Vec::new();
            match cfg.form {
                MasterForm::Dressed => {
                    let scale = rates.max_scale();
                    let grid = open_systems::rk4_grid(t_end, scale)?;
                    let every = (grid.n_steps / samples).max(1);
                    let rho0 = es.vectors.adjoint() * &rho0_lab * &es.vectors;
                    let n_e = es.to_eigenbasis(&n_op);
                    let mut step = 0usize;
                    open_systems::evolve_rk4(
                        &rho0,
                        &grid,
                        scale,
                        |_, r| open_systems::dressed_dissipator(r, &rates) + diag_commutator(&rates.energies, r),
                        |t, r| {
                            if step % every == 0 || step == grid.n_steps {
                                data.push(vec![t, (&n_e * r).trace().re, emission.flux_eigen(r), r[(0, 0)].re]);
                            }
                            step += 1;
                        },
                    )?;
                }
                MasterForm::Standard => {
                    let max_rate = cfg.lindblad.kappa.max(cfg.lindblad.gamma).max(cfg.lindblad.gamma_phi);
                    let scale = (es.values[d - 1] - es.values[0]).max(max_rate * d as f64);
                    let grid = open_systems::rk4_grid(t_end, scale)?;
                    let every = (grid.n_steps / samples).max(1);
                    let gv = es.ground();
                    let mut step = 0usize;
                    let rhs = |_: f64, r: &CMat| {
                        open_systems::standard_lindblad_rhs(r, &ham, &cfg.lindblad).expect("validated state")
                    };
                    open_systems::evolve_rk4(&rho0_lab, &grid, scale, rhs, |t, r| {
                        if step % every == 0 || step == grid.n_steps {
                            data.push(vec![t, (&n_op * r).trace().re, emission.flux(r), gv.dotc(&(r * &gv)).re]);
                        }
                        step += 1;
                    })?;
                }
            }
            Ok(h + &table_out(g.format, &["t", "photon_number", "flux", "ground_population"], &data, json!({}))?)
        }
        MasterTask::Modulated => {
            let m = cfg.modulation.as_ref().ok_or_else(|| Error::InvalidInput("modulated task needs a modulation block".into()))?;
            let t_end = cfg.t_end.ok_or_else(|| Error::InvalidInput("modulated task needs t_end".into()))?;
            let grid = TimeGrid::new(0.0, t_end, m.steps)?;
            let r = open_systems::modulated_coupling_evolution(&es, m.dg, m.omega_mod, &grid, &cfg.lindblad, m.levels)?;
            let every = (r.times.len() / cfg.samples.max(1)).max(1);
            let data: Vec<Vec<f64>> = r
                .times
                .iter()
                .zip(&r.flux)
                .enumerate()
                .filter(|(k, _)| k % every == 0 || *k + 1 == r.times.len())
                .map(|(_, (&t, &f))| vec![t, f])
                .collect();
            Ok(h + &table_out(g.format, &["t", "flux"], &data, json!({ "mean_flux": r.mean_flux, "baseline": r.baseline }))?)
        }
    }
}

fn diag_commutator(e: &[f64], r: &CMat) -> CMat {
    CMat::from_fn(e.len(), e.len(), |j, k| r[(j, k)] * C64::new(0.0, -(e[j] - e[k])))
}

fn cmd_trotter(g: &GlobalOpts) -> Result<String> {
    let cfg: TrotterConfig = read_spec(g)?;
    cfg.model.validate()?;
    let h = header(g, "trotter", &cfg);
    if g.dry_run {
        return dry(g, "trotter", json!({ "config": cfg, "runs": cfg.steps.len() }));
    }
    let layout = cfg.model.default_layout(g.nmax)?;
    let psi0 = initial_state(&layout, &cfg.initial)?;
    let results: Vec<Result<Vec<f64>>> = pool(g.jobs)?.install(|| {
        cfg.steps
            .par_iter()
            .map(|&n| {
                let plan = TrotterPlan::new(&cfg.model, cfg.total_time, n)?;
                let r = dynamics::trotter_evolve(&plan, &cfg.model, &psi0, g.nmax)?;
                Ok(vec![n as f64, 1.0 - r.fidelity])
            })
            .collect()
    });
    let data = results.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = data.iter().map(|r| r[0].ln()).collect();
    let ys: Vec<f64> = data.iter().map(|r| r[1].max(1e-300).ln()).collect();
    let slope = if data.len() >= 2 { Some(spectra::linear_slope(&xs, &ys)) } else { None };
    Ok(h + &table_out(g.format, &["n", "infidelity"], &data, json!({ "loglog_slope": slope }))?)
}

fn cmd_analog(g: &GlobalOpts) -> Result<String> {
    let cfg: AnalogConfig = read_spec(g)?;
    cfg.model.validate()?;
    let h = header(g, "analog-compare", &cfg);
    if g.dry_run {
        return dry(g, "analog-compare", json!({ "config": cfg }));
    }
    let layout = cfg.model.default_layout(g.nmax)?;
    let psi0 = initial_state(&layout, &cfg.initial)?;
    let r = dynamics::analog_compare(&cfg.model, &psi0, cfg.duration, g.nmax, cfg.samples)?;
    let data: Vec<Vec<f64>> = r.times.iter().zip(&r.fidelity).map(|(&t, &f)| vec![t, f]).collect();
    Ok(h + &table_out(g.format, &["t", "fidelity"], &data, json!({ "min_fidelity": r.min_fidelity, "effective": r.effective }))?)
}

fn cmd_protocols(g: &GlobalOpts, which: Protocol) -> Result<String> {
    let sub = format!("protocols {}", serde_json::to_value(which).unwrap_or_default().as_str().unwrap_or(""));
    match which {
        Protocol::Ghz => {
            let cfg: GhzConfig = read_spec(g)?;
            let h = header(g, &sub, &cfg);
            if g.dry_run {
                return dry(g, &sub, json!({ "config": cfg }));
            }
            let r = dynamics::ghz_protocol(cfg.n, cfg.g, cfg.omega, cfg.time, g.nmax)?;
            scalar_out(g, h, &serde_json::to_value(&r).map_err(|e| Error::Numeric(e.to_string()))?)
        }
        Protocol::Cphase => {
            let cfg: CphaseConfig = read_spec(g)?;
            let h = header(g, &sub, &cfg);
            if g.dry_run {
                return dry(g, &sub, json!({ "config": cfg }));
            }
            let r = dynamics::cphase_sequence(&cfg.model, cfg.t1, g.nmax)?;
            scalar_out(g, h, &serde_json::to_value(&r).map_err(|e| Error::Numeric(e.to_string()))?)
        }
        Protocol::Noon => {
            let cfg: NoonConfig = read_spec(g)?;
            let h = header(g, &sub, &cfg);
            if g.dry_run {
                return dry(g, &sub, json!({ "config": cfg }));
            }
            let r = dynamics::noon_protocol(&cfg.model, cfg.n_target, cfg.mixing_angle, g.nmax)?;
            scalar_out(g, h, &serde_json::to_value(&r).map_err(|e| Error::Numeric(e.to_string()))?)
        }
        Protocol::Dirac => {
            let cfg: DiracConfig = read_spec(g)?;
            let h = header(g, &sub, &cfg);
            let grid = TimeGrid::new(0.0, cfg.t_end, cfg.steps)?;
            if g.dry_run {
                return dry(g, &sub, json!({ "config": cfg, "dt": grid.dt() }));
            }
            let sp = [C64::new(cfg.spinor[0][0], cfg.spinor[0][1]), C64::new(cfg.spinor[1][0], cfg.spinor[1][1])];
            let r = dynamics::dirac_observables(&cfg.model, cfg.x0, cfg.p0, sp, &grid, g.nmax)?;
            let data: Vec<Vec<f64>> = r.times.iter().zip(r.x.iter().zip(&r.p)).map(|(&t, (&x, &p))| vec![t, x, p]).collect();
            Ok(h + &table_out(g.format, &["t", "x", "p"], &data, json!({}))?)
        }
    }
}

/// Flat JSON object of scalars as JSON, or as a two-column key,value CSV.
fn scalar_out(g: &GlobalOpts, header: String, v: &Value) -> Result<String> {
    match g.format {
        Format::Json => Ok(header + &json_text(v)?),
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", v, &mut rows);
            Ok(header + &csv_text(&["key", "value"], &rows)?)
        }
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        Value::Number(n) => rows.push(vec![prefix.to_string(), n.as_f64().map(fmt17).unwrap_or_else(|| n.to_string())]),
        other => rows.push(vec![prefix.to_string(), other.to_string().trim_matches('"').to_string()]),
    }
}

fn cmd_circuit(g: &GlobalOpts) -> Result<String> {
    let q: CircuitQuery = read_spec(g)?;
    let h = header(g, "circuit", &q);
    if g.dry_run {
        return dry(g, "circuit", json!({ "query": q }));
    }
    let v = match &q {
        CircuitQuery::Rms { omega_r, z } => json!({
            "vrms": circuit::vrms_from_impedance(*omega_r, *z)?,
            "irms": circuit::irms_from_impedance(*omega_r, *z)?,
        }),
        CircuitQuery::TransmonCapacitive { e_j, e_c, z, c_g, c_q } => {
            to(&circuit::transmon_capacitive(*e_j, *e_c, *z, *c_g, *c_q)?)
        }
        CircuitQuery::CapacitiveBound { c_g, c_q, c_r } => json!({ "g_over_omega_bound": circuit::capacitive_bound(*c_g, *c_q, *c_r)? }),
        CircuitQuery::CpbImpedance { z, c_g, c_j } => to(&circuit::cpb_capacitive_impedance(*z, *c_g, *c_j)?),
        CircuitQuery::CpbCircuit { c_g, c_q, c_r, e_c, e_j } => to(&circuit::cpb_capacitive_circuit(*c_g, *c_q, *c_r, *e_c, *e_j)?),
        CircuitQuery::Galvanic { coupling } => to(&circuit::coupling_galvanic(coupling)?),
        CircuitQuery::Inductances { geometry } => to(&circuit::inductances(geometry)?),
        CircuitQuery::KineticFromResistance { r_n, t_c } => json!({ "kinetic": circuit::kinetic_inductance_rn(*r_n, *t_c)? }),
        CircuitQuery::Magnon { params } => to(&circuit::coupling_magnon(params)?),
        CircuitQuery::Molecule { params } => to(&circuit::coupling_molecule(params)?),
        CircuitQuery::FigureOfMerit { g: cg, omega, kappa, gamma, convention } => {
            json!({ "u": circuit::figure_of_merit_u(*cg, *omega, *kappa, *gamma, *convention)? })
        }
    };
    scalar_out(g, h, &v)
}

fn to<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn cmd_tables(g: &GlobalOpts, table: u8, convention: Option<ConventionArg>) -> Result<String> {
    let (text, source) = match &g.spec {
        Some(p) => (std::fs::read_to_string(p)?, p.display().to_string()),
        None => match table {
            1 => (circuit::BUNDLED_TABLE_1.to_string(), "bundled table 1".to_string()),
            2 => (circuit::BUNDLED_TABLE_2.to_string(), "bundled table 2".to_string()),
            t => return Err(Error::InvalidInput(format!("no bundled table {t}"))),
        },
    };
    let conv = match convention {
        Some(ConventionArg::C1) => UConvention::C1,
        Some(ConventionArg::C4) => UConvention::C4,
        None if g.spec.is_none() && table == 1 => UConvention::C1,
        None => UConvention::C4,
    };
    let plan = json!({ "source": source, "convention": conv });
    let h = header(g, "tables", &plan);
    if g.dry_run {
        return dry(g, "tables", plan);
    }
    let records = circuit::ingest_table(&text)?;
    let report = circuit::recompute_and_report(&records, conv)?;
    match g.format {
        Format::Json => Ok(h + &json_text(&report)?),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.reference.clone(),
                        fmt17(r.g_over_omega_pct),
                        opt(r.printed_g_over_omega_pct),
                        opt(r.u_c1),
                        opt(r.u_c4),
                        opt(r.printed_u),
                        opt(r.u_rel_dev),
                        r.flags.join("; "),
                    ]
                })
                .collect();
            let cols = ["ref", "g_over_omega_pct", "printed_g_over_omega_pct", "u_c1", "u_c4", "printed_u", "u_rel_dev", "flags"];
            Ok(h + &format!("# {}\n", report.convention_note) + &csv_text(&cols, &rows)?)
        }
    }
}

/// Entry point used by the binary: parse, run, write, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|text| write_output(&cli.global, &text)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_output(g: &GlobalOpts, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

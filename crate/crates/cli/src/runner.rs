//! Executes experiment configs and writes their artifacts.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use entropy_dg_core::diagnostics::{entropy_of_log, fit_decay_rate};
use entropy_dg_core::dgspace::gauss_legendre_rule;
use entropy_dg_core::reference::{fem_p1_lambda, fem_p1_u, traveling_wave_reference, FemFunction, WaveProfile};
use entropy_dg_core::{run_simulation, DgFunction, InitialDatum, Mesh1D, TimeSeries};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::certify::{self, Certificate};
use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::output::{
    fmt_float, solution_file, write_fem_series, write_json, write_rows_generic, write_series, write_solution, FemRow,
    SeriesRow, SAMPLES_PER_ELEMENT,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;

/// Environment variable bounding the batch thread pool.
pub const THREADS_ENV: &str = "ENTROPY_DG_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    /// The solver failed at `step`.
    Failed { step: usize, message: String },
    /// Failure that the experiment is designed to provoke (the density FEM
    /// breaking down after its solution turned negative).
    ExpectedFailure { step: usize, message: String },
}

impl Outcome {
    fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Failed { .. } => "solver-failed",
            Outcome::ExpectedFailure { .. } => "expected-failure",
        }
    }

    fn to_json(&self) -> (Value, Value) {
        match self {
            Outcome::Completed => (Value::Null, Value::Null),
            Outcome::Failed { step, message } | Outcome::ExpectedFailure { step, message } => {
                (json!(step), json!(message))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveData {
    pub profile: WaveProfile,
    pub dg: TimeSeries,
    pub fem: Vec<FemFunction>,
    pub fem_outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct RefinementLevel {
    pub n_el: usize,
    pub series: TimeSeries,
}

impl RefinementLevel {
    pub fn solution(&self) -> &DgFunction {
        &self.series.last().lambda
    }
}

#[derive(Debug, Clone)]
pub enum RunData {
    Dg(TimeSeries),
    Fem(Vec<FemFunction>),
    Wave(Box<WaveData>),
    Refinement { levels: Vec<RefinementLevel>, differences: Vec<f64> },
    Certify,
}

/// In-memory result of one experiment.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub outcome: Outcome,
    pub certificates: Vec<Certificate>,
    pub data: RunData,
    /// Kind-specific summary fields.
    pub extra: serde_json::Map<String, Value>,
    pub wall_time: f64,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if matches!(self.outcome, Outcome::Failed { .. }) {
            EXIT_NONCONVERGENCE
        } else if self.certificates.iter().any(|c| !c.pass) {
            EXIT_CERTIFICATE
        } else {
            EXIT_OK
        }
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    pub fn series(&self) -> Option<&TimeSeries> {
        match &self.data {
            RunData::Dg(s) => Some(s),
            RunData::Wave(w) => Some(&w.dg),
            _ => None,
        }
    }

    /// Summary written to `summary.json`. The wall time is kept out so that
    /// reruns produce identical files.
    pub fn summary(&self) -> Value {
        let (step, message) = self.outcome.to_json();
        let certificates: serde_json::Map<String, Value> = self
            .certificates
            .iter()
            .map(|c| (c.name.clone(), serde_json::to_value(c).expect("certificate serializes")))
            .collect();
        let mut v = json!({
            "name": self.config.name,
            "kind": self.config.kind,
            "status": self.outcome.label(),
            "failing_step": step,
            "error": message,
            "exit_code": self.exit_code(),
            "config": self.config,
            "certificates": certificates,
        });
        v.as_object_mut().expect("object").extend(self.extra.clone());
        v
    }
}

fn run_error(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

/// Runs one experiment. Solver failures are reported in the result; only
/// configuration problems are errors.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunResult, ConfigError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut result = match cfg.kind {
        k if k.is_dg_run() => execute_dg(cfg)?,
        ExperimentKind::FemNegativity | ExperimentKind::FemLog => execute_fem(cfg)?,
        ExperimentKind::TravelingWave => execute_wave(cfg)?,
        ExperimentKind::RefinementStudy => execute_refinement(cfg)?,
        _ => execute_certify(cfg),
    };
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

fn new_result(cfg: &ExperimentConfig, outcome: Outcome, data: RunData) -> RunResult {
    RunResult {
        config: cfg.clone(),
        outcome,
        certificates: Vec::new(),
        data,
        extra: serde_json::Map::new(),
        wall_time: 0.0,
    }
}

fn simulate(datum: &InitialDatum, mesh: std::sync::Arc<Mesh1D>, cfg: &ExperimentConfig) -> Result<(TimeSeries, Outcome), ConfigError> {
    let params = cfg.scheme_params()?;
    match run_simulation(datum, mesh, &params, cfg.n_steps) {
        Ok(s) => Ok((s, Outcome::Completed)),
        Err(e) if e.partial.steps.is_empty() => Err(run_error(e)),
        Err(e) => {
            let outcome = Outcome::Failed { step: e.step, message: e.source.to_string() };
            Ok((e.partial, outcome))
        }
    }
}

fn sampled_min_density(series: &TimeSeries) -> Vec<f64> {
    series
        .steps
        .iter()
        .map(|s| {
            s.lambda
                .sampled(SAMPLES_PER_ELEMENT)
                .iter()
                .map(|(_, l)| l.exp())
                .fold(f64::INFINITY, |m, u| if u.is_nan() { f64::NAN } else { m.min(u) })
        })
        .collect()
}

/// Slope of `log S` per unit time and per step on the windows
/// `[1, n/3]` and `[2n/3, n]`, with `S` replaced by `S - |Ω| s(mean mass)`
/// without reaction.
fn decay_fits(series: &TimeSeries) -> Value {
    let measure = series.steps[0].lambda.mesh().measure();
    let reaction = series.params.reaction;
    let samples: Vec<(f64, f64)> = series
        .steps
        .iter()
        .map(|s| {
            let shift = if reaction { 0.0 } else { measure * entropy_of_log(s.report.mean_mass.ln()) };
            (s.t, s.report.entropy - shift)
        })
        .collect();
    let n = samples.len() - 1;
    let dt = series.params.dt;
    let fit = |lo: usize, hi: usize| match fit_decay_rate(&samples, lo..hi + 1) {
        Ok(r) => json!({"first_step": lo, "last_step": hi, "rate_per_time": r, "rate_per_step": r * dt}),
        Err(e) => json!({"first_step": lo, "last_step": hi, "error": e.to_string()}),
    };
    json!({
        "quantity": if reaction { "S" } else { "S - |Omega| s(mean mass)" },
        "early": fit(1, (n / 3).max(1)),
        "late": fit(2 * n / 3, n),
    })
}

fn series_rows(series: &TimeSeries) -> Vec<SeriesRow> {
    series
        .steps
        .iter()
        .map(|s| SeriesRow {
            k: s.k,
            t: s.t,
            entropy: s.report.entropy,
            mass: s.report.mass,
            l1_dist: s.report.l1_dist,
            dg_half_norm: s.report.dg_half_norm,
            b_value: s.report.b_value,
            entropy_step_slack: s.report.entropy_step_slack,
            mass_bounds_ok: s.report.mass_bounds_ok(),
            dgnorm_bound_ok: s.report.dgnorm_bound_ok,
        })
        .collect()
}

fn dg_summary(series: &TimeSeries) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    let first = &series.steps[0];
    let last = series.last();
    m.insert("S0".into(), json!(first.report.entropy));
    m.insert("S_final".into(), json!(last.report.entropy));
    m.insert("steps_completed".into(), json!(last.k));
    m.insert("measure".into(), json!(first.lambda.mesh().measure()));
    m.insert("min_density".into(), json!(series.steps.iter().map(|s| s.report.min_density).fold(f64::INFINITY, f64::min)));
    m.insert("max_density".into(), json!(series.steps.iter().map(|s| s.report.max_density).fold(f64::NEG_INFINITY, f64::max)));
    let newton: Vec<_> = series.steps.iter().filter_map(|s| s.newton.as_ref()).collect();
    m.insert(
        "newton".into(),
        json!({
            "max_iterations": newton.iter().map(|n| n.iterations).max().unwrap_or(0),
            "total_iterations": newton.iter().map(|n| n.iterations).sum::<usize>(),
            "total_halvings": newton.iter().map(|n| n.halvings).sum::<usize>(),
            "continuation_stages": newton.iter().map(|n| n.continuation_stages).sum::<usize>(),
            "max_raw_residual": newton.iter().map(|n| n.raw_residual).fold(0.0, f64::max),
        }),
    );
    m.insert("dgnorm_bound_unscaled".into(), serde_json::to_value(certify::dgnorm_bound_unscaled(series)).expect("serializes"));
    if series.steps.len() >= 4 {
        m.insert("decay".into(), decay_fits(series));
    }
    m
}

fn execute_dg(cfg: &ExperimentConfig) -> Result<RunResult, ConfigError> {
    let datum = cfg.initial_datum()?;
    let (series, outcome) = simulate(&datum, cfg.mesh()?, cfg)?;
    let mut r = new_result(cfg, outcome, RunData::Dg(series));
    let RunData::Dg(series) = &r.data else { unreachable!() };
    r.certificates = certify::run_certificates(series, &sampled_min_density(series));
    r.extra = dg_summary(series);
    Ok(r)
}

fn fem_rows(states: &[FemFunction], cfg: &ExperimentConfig) -> Result<Vec<FemRow>, ConfigError> {
    let quad = gauss_legendre_rule(cfg.quad_points).map_err(run_error)?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let d = f.density();
            FemRow {
                k,
                t: k as f64 * cfg.dt,
                min_density: d.iter().copied().fold(f64::INFINITY, f64::min),
                max_density: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mass: f.mass(&quad),
            }
        })
        .collect())
}

fn fem_min_nodal(states: &[FemFunction]) -> (f64, Option<usize>) {
    let mut min = f64::INFINITY;
    let mut first_negative = None;
    for (k, f) in states.iter().enumerate() {
        let m = f.density().into_iter().fold(f64::INFINITY, f64::min);
        if m < 0.0 && first_negative.is_none() {
            first_negative = Some(k);
        }
        min = min.min(m);
    }
    (min, first_negative)
}

fn execute_fem(cfg: &ExperimentConfig) -> Result<RunResult, ConfigError> {
    let datum = cfg.initial_datum()?;
    let mesh = cfg.mesh()?;
    let prm = cfg.fem_params()?;
    let density = cfg.kind == ExperimentKind::FemNegativity;
    let run = if density {
        fem_p1_u(&datum, mesh, &prm, cfg.n_steps)
    } else {
        fem_p1_lambda(&datum, mesh, &prm, cfg.n_steps, cfg.floor)
    };
    let (states, failure) = match run {
        Ok(s) => (s, None),
        Err(e) if e.partial.is_empty() => return Err(run_error(e)),
        Err(e) => (e.partial, Some((e.step, e.source.to_string()))),
    };
    let (min, first_negative) = fem_min_nodal(&states);
    let outcome = match failure {
        None => Outcome::Completed,
        Some((step, message)) if density && first_negative.is_some() => Outcome::ExpectedFailure { step, message },
        Some((step, message)) => Outcome::Failed { step, message },
    };
    let mut r = new_result(cfg, outcome, RunData::Fem(states));
    r.extra.insert("min_nodal_density".into(), json!(min));
    r.extra.insert("first_negative_step".into(), json!(first_negative));
    r.extra.insert("variable".into(), json!(if density { "u" } else { "lambda" }));
    if density {
        r.certificates.push(Certificate::from_margins(
            "negativity_reproduced",
            [if first_negative.is_some() { 0.0 } else { -1.0 }],
            0.0,
            "some nodal density is negative",
        ));
    } else {
        let RunData::Fem(states) = &r.data else { unreachable!() };
        r.certificates.push(Certificate::from_margins(
            "positivity",
            states.iter().map(|f| {
                let m = f.density().into_iter().fold(f64::INFINITY, f64::min);
                if m.is_finite() && m > 0.0 { m } else { f64::NAN }
            }),
            0.0,
            "nodal densities finite and positive",
        ));
    }
    Ok(r)
}

/// Density of the shifted wave `x ↦ max(φ(x - a - ct), floor)`, equal to 1
/// behind the front.
pub fn wave_reference_density(profile: &WaveProfile, cfg: &ExperimentConfig, t: f64, x: f64) -> f64 {
    let s = x - cfg.a - cfg.wave_speed * t;
    if s < 0.0 {
        1.0
    } else {
        profile.phi_at(s).unwrap_or(cfg.floor).max(cfg.floor)
    }
}

/// Smallest `x` where the sampled density drops to 1/2, by linear
/// interpolation between samples.
pub fn front_position(samples: &[(f64, f64)]) -> Option<f64> {
    let first = samples.first()?;
    if first.1 <= 0.5 {
        return Some(first.0);
    }
    samples.windows(2).find(|w| w[1].1 <= 0.5).map(|w| {
        let ((x0, u0), (x1, u1)) = (w[0], w[1]);
        if u0 == u1 {
            x1
        } else {
            x0 + (u0 - 0.5) / (u0 - u1) * (x1 - x0)
        }
    })
}

fn execute_wave(cfg: &ExperimentConfig) -> Result<RunResult, ConfigError> {
    let profile = traveling_wave_reference(cfg.wave_speed, cfg.b - cfg.a, cfg.wave_phi0, cfg.wave_psi0, cfg.wave_tol)
        .map_err(run_error)?;
    let datum = InitialDatum::Tabulated(profile.samples.iter().map(|&(s, phi, _)| (cfg.a + s, phi.max(cfg.floor))).collect());
    let mesh = cfg.mesh()?;
    let (dg, outcome) = simulate(&datum, mesh.clone(), cfg)?;
    let (fem, fem_outcome) = match fem_p1_u(&datum, mesh, &cfg.fem_params()?, cfg.n_steps) {
        Ok(s) => (s, Outcome::Completed),
        Err(e) => {
            let o = Outcome::Failed { step: e.step, message: e.source.to_string() };
            (e.partial, o)
        }
    };
    let outcome = match (&outcome, &fem_outcome) {
        (Outcome::Completed, Outcome::Failed { step, message }) => {
            Outcome::Failed { step: *step, message: format!("density FEM: {message}") }
        }
        _ => outcome,
    };
    let mut r = new_result(cfg, outcome, RunData::Wave(Box::new(WaveData { profile, dg, fem, fem_outcome })));
    let RunData::Wave(w) = &r.data else { unreachable!() };
    r.certificates = certify::run_certificates(&w.dg, &sampled_min_density(&w.dg));
    r.extra = dg_summary(&w.dg);
    let mut fronts = Vec::new();
    for k in 0..=cfg.n_steps {
        let t = k as f64 * cfg.dt;
        let dg = w.dg.steps.get(k).and_then(|s| {
            let samples: Vec<(f64, f64)> = s.lambda.sampled(SAMPLES_PER_ELEMENT).into_iter().map(|(x, l)| (x, l.exp())).collect();
            front_position(&samples)
        });
        let fem = w.fem.get(k).and_then(|f| front_position(&f.sampled(SAMPLES_PER_ELEMENT)));
        let mesh = w.dg.steps[0].lambda.mesh();
        let reference = front_position(&entropy_dg_core::dgspace::sample_broken(mesh, SAMPLES_PER_ELEMENT, |e, xi| {
            wave_reference_density(&w.profile, cfg, t, mesh.to_physical(e, xi))
        }));
        fronts.push(json!({"k": k, "t": t, "dg": dg, "fem_u": fem, "reference": reference}));
    }
    r.extra.insert("fronts".into(), Value::Array(fronts));
    r.extra.insert(
        "profile_note".into(),
        json!("the profile solves phi' = -c phi + psi (psi - 1), psi' = phi with phi(0) = wave_phi0, psi(0) = wave_psi0; in this system psi, not phi, satisfies the traveling-wave equation, while the density datum and reference use phi (floored)"),
    );
    let (fs, fm) = w.fem_outcome.to_json();
    r.extra.insert("fem_status".into(), json!({"status": w.fem_outcome.label(), "failing_step": fs, "error": fm}));
    Ok(r)
}

/// `‖u_coarse - u_fine‖_{L²}` of two densities on nested uniform meshes.
pub fn l2_difference(coarse: &DgFunction, fine: &DgFunction, quad_points: usize) -> Result<f64, ConfigError> {
    let quad = gauss_legendre_rule(quad_points).map_err(run_error)?;
    let mesh = fine.mesh();
    let ratio = fine.n_elements() / coarse.n_elements();
    let mut total = 0.0;
    for e in 0..fine.n_elements() {
        let (ce, sub) = (e / ratio, (e % ratio) as f64);
        let h = mesh.diameter(e);
        total += h * quad.integrate(|xi| {
            let d = coarse.eval(ce, (sub + xi) / ratio as f64).exp() - fine.eval(e, xi).exp();
            d * d
        });
    }
    Ok(total.sqrt())
}

fn execute_refinement(cfg: &ExperimentConfig) -> Result<RunResult, ConfigError> {
    let datum = cfg.initial_datum()?;
    let mut levels = Vec::new();
    let mut outcome = Outcome::Completed;
    for &n in &cfg.refinement_levels {
        let (series, o) = simulate(&datum, cfg.mesh_with(n)?, cfg)?;
        if let Outcome::Failed { step, message } = o {
            outcome = Outcome::Failed { step, message: format!("N_el = {n}: {message}") };
            break;
        }
        levels.push(RefinementLevel { n_el: n, series });
    }
    let differences = levels
        .windows(2)
        .map(|w| l2_difference(w[0].solution(), w[1].solution(), cfg.quad_points))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = differences.windows(2).map(|w| w[1] / w[0]).collect();
    let mut r = new_result(cfg, outcome, RunData::Refinement { levels, differences: differences.clone() });
    let mut margins: Vec<f64> = ratios.iter().map(|q| 0.6 - q).collect();
    if differences.len() < 2 {
        margins.push(f64::NAN);
    }
    r.certificates.push(Certificate::from_margins(
        "refinement_ratio",
        margins,
        0.0,
        "successive L2 differences shrink by at least 0.6",
    ));
    r.extra.insert("l2_differences".into(), json!(differences));
    r.extra.insert("ratios".into(), json!(ratios));
    Ok(r)
}

/// The diagnostics battery configured by `cfg`.
pub fn certify_battery(cfg: &ExperimentConfig) -> Vec<Certificate> {
    vec![
        certify::coercivity(cfg.certify_samples, cfg.seed, cfg.c_inv),
        certify::sigma_round_trip(1001),
        certify::c_inv_oracle(),
        certify::constant_state_family(0.5, 200),
        certify::p1_quadrature_oracle(50, cfg.seed),
    ]
}

fn execute_certify(cfg: &ExperimentConfig) -> RunResult {
    let mut r = new_result(cfg, Outcome::Completed, RunData::Certify);
    r.certificates = certify_battery(cfg);
    r
}

fn fem_snapshot_rows(f: &FemFunction) -> Vec<Vec<String>> {
    f.sampled(SAMPLES_PER_ELEMENT)
        .iter()
        .enumerate()
        .map(|(i, &(x, u))| vec![fmt_float(x), (i / SAMPLES_PER_ELEMENT).to_string(), fmt_float(u)])
        .collect()
}

const SOLUTION_COLUMNS: [&str; 3] = ["x", "element", "density"];

fn write_dg_snapshots(dir: &Path, prefix: &str, series: &TimeSeries, snapshots: &[usize]) -> io::Result<()> {
    for &k in snapshots {
        if let Some(s) = series.steps.get(k) {
            let lam = &s.lambda;
            write_solution(&dir.join(solution_file(prefix, k)), lam.mesh(), |e, xi| lam.eval(e, xi).exp())?;
        }
    }
    Ok(())
}

fn write_fem_snapshots(dir: &Path, prefix: &str, states: &[FemFunction], snapshots: &[usize]) -> io::Result<()> {
    for &k in snapshots {
        if let Some(f) = states.get(k) {
            write_rows_generic(&dir.join(solution_file(prefix, k)), &SOLUTION_COLUMNS, &fem_snapshot_rows(f))?;
        }
    }
    Ok(())
}

/// Writes the artifacts of `result` into `dir` (created if missing).
pub fn write_artifacts(result: &RunResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = &result.config;
    let snaps = cfg.snapshot_steps();
    match &result.data {
        RunData::Dg(series) => {
            write_series(&dir.join("series.csv"), &series_rows(series))?;
            write_dg_snapshots(dir, "solution", series, &snaps)?;
        }
        RunData::Fem(states) => {
            let rows = fem_rows(states, cfg).map_err(io::Error::other)?;
            write_fem_series(&dir.join("fem_series.csv"), &rows)?;
            write_fem_snapshots(dir, "fem", states, &snaps)?;
        }
        RunData::Wave(w) => {
            write_series(&dir.join("series.csv"), &series_rows(&w.dg))?;
            write_dg_snapshots(dir, "solution", &w.dg, &snaps)?;
            let rows = fem_rows(&w.fem, cfg).map_err(io::Error::other)?;
            write_fem_series(&dir.join("fem_series.csv"), &rows)?;
            write_fem_snapshots(dir, "fem", &w.fem, &snaps)?;
            let mesh = w.dg.steps[0].lambda.mesh();
            for &k in &snaps {
                let t = k as f64 * cfg.dt;
                write_solution(&dir.join(solution_file("reference", k)), mesh, |e, xi| {
                    wave_reference_density(&w.profile, cfg, t, mesh.to_physical(e, xi))
                })?;
            }
            let profile: Vec<Vec<String>> =
                w.profile.samples.iter().map(|&(s, phi, psi)| vec![fmt_float(s), fmt_float(phi), fmt_float(psi)]).collect();
            write_rows_generic(&dir.join("wave_profile.csv"), &["s", "phi", "psi"], &profile)?;
        }
        RunData::Refinement { levels, differences } => {
            let rows: Vec<Vec<String>> = levels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let d = differences.get(i).map_or(String::new(), |d| fmt_float(*d));
                    let q = match (i.checked_sub(1).and_then(|j| differences.get(j)), differences.get(i)) {
                        (Some(a), Some(b)) => fmt_float(b / a),
                        _ => String::new(),
                    };
                    vec![l.n_el.to_string(), d, q]
                })
                .collect();
            write_rows_generic(&dir.join("refinement.csv"), &["n_el", "l2_diff_to_next", "ratio"], &rows)?;
            for l in levels {
                let lam = l.solution();
                write_solution(&dir.join(format!("solution_n{:04}.csv", l.n_el)), lam.mesh(), |e, xi| lam.eval(e, xi).exp())?;
            }
        }
        RunData::Certify => {
            write_json(&dir.join("certify.json"), &json!(result.certificates))?;
        }
    }
    write_json(&dir.join("summary.json"), &result.summary())
}

/// Runs `configs` in parallel on a pool of `ENTROPY_DG_THREADS` threads
/// (rayon's default when unset). Results keep the input order.
pub fn run_batch(configs: &[ExperimentConfig]) -> Vec<Result<RunResult, ConfigError>> {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| configs.par_iter().map(execute).collect())
}

/// Largest exit code of a batch, config errors counting as 2.
pub fn batch_exit_code(results: &[Result<RunResult, ConfigError>]) -> i32 {
    results.iter().map(|r| r.as_ref().map_or(EXIT_CONFIG, RunResult::exit_code)).max().unwrap_or(EXIT_OK)
}

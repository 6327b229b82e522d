//! Experiment configuration: a flat TOML file, every key optional.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use entropy_dg_core::dgspace::gauss_legendre_rule;
use entropy_dg_core::diagnostics::compute_c_inv;
use entropy_dg_core::reference::FemParams;
use entropy_dg_core::solver::DENSITY_FLOOR;
use entropy_dg_core::{InitialDatum, Mesh1D, NewtonControls, SchemeParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (see list-presets)")]
    UnknownPreset(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// DG run of the logistic model.
    OneGroup,
    /// DG run with `S⁰ < |Ω|`; decay slopes are fitted.
    EntropyDecay,
    /// DG run with `S⁰ ≥ |Ω|`.
    EntropyDecayOvermass,
    /// DG run without reaction.
    PureDiffusion,
    /// DG and density FEM runs from the traveling-wave profile, with the
    /// shifted profile as reference.
    TravelingWave,
    /// P1 finite elements in the density (no positivity safeguard).
    FemNegativity,
    /// P1 finite elements in `λ = log u`.
    FemLog,
    /// One step on a sequence of meshes.
    RefinementStudy,
    /// Diagnostics battery.
    Certify,
}

impl ExperimentKind {
    pub fn is_dg_run(self) -> bool {
        matches!(
            self,
            ExperimentKind::OneGroup
                | ExperimentKind::EntropyDecay
                | ExperimentKind::EntropyDecayOvermass
                | ExperimentKind::PureDiffusion
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// `segments` of `[a, b, value]` over `background`.
    Steps,
    Constant,
    /// `mean + amplitude cos(wavenumber π x)`.
    Cosine,
    /// `max(φ(x - a), floor)` from the traveling-wave system.
    WaveProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,

    pub n_el: usize,
    pub a: f64,
    pub b: f64,

    pub degree: usize,
    pub diffusion: f64,
    pub dt: f64,
    pub eps: f64,
    /// Computed from the degree when absent.
    pub c_inv: Option<f64>,
    pub quad_points: usize,
    /// Defaults to `false` for pure diffusion and `true` otherwise.
    pub reaction: Option<bool>,

    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub newton_max_halvings: usize,
    pub newton_damping: f64,
    pub newton_step_tol: f64,

    pub initial: InitialKind,
    pub segments: Vec<[f64; 3]>,
    pub background: f64,
    pub value: f64,
    pub mean: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
    pub floor: f64,

    pub wave_speed: f64,
    pub wave_phi0: f64,
    pub wave_psi0: f64,
    pub wave_tol: f64,

    pub n_steps: usize,
    /// Steps whose solutions are written; defaults to 0, n/4, n/2, 3n/4, n.
    pub snapshots: Option<Vec<usize>>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,

    pub refinement_levels: Vec<usize>,
    pub certify_samples: usize,
}

impl Default for ExperimentConfig {
    /// The one-group setting: `D = 1e-4`, `Δt = 1/3`, 40 elements, `p = 1`,
    /// `u₀ = 0.8` on `(0, 1/2)`.
    fn default() -> Self {
        let newton = NewtonControls::default();
        Self {
            name: "run".into(),
            kind: ExperimentKind::OneGroup,
            n_el: 40,
            a: 0.0,
            b: 1.0,
            degree: 1,
            diffusion: 1e-4,
            dt: 1.0 / 3.0,
            eps: 0.0,
            c_inv: None,
            quad_points: 8,
            reaction: None,
            newton_tol: newton.tol,
            newton_max_iter: newton.max_iter,
            newton_max_halvings: newton.max_halvings,
            newton_damping: newton.damping,
            newton_step_tol: newton.step_tol,
            initial: InitialKind::Steps,
            segments: vec![[0.0, 0.5, 0.8]],
            background: 0.0,
            value: 1.0,
            mean: 1.0,
            amplitude: 0.5,
            wavenumber: 1.0,
            floor: DENSITY_FLOOR,
            wave_speed: 2.0,
            wave_phi0: 1.0,
            wave_psi0: -1e-10,
            wave_tol: 1e-10,
            n_steps: 60,
            snapshots: None,
            out_dir: None,
            seed: 0,
            refinement_levels: vec![10, 20, 40, 80],
            certify_samples: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn reaction_enabled(&self) -> bool {
        self.reaction.unwrap_or(self.kind != ExperimentKind::PureDiffusion)
    }

    pub fn newton(&self) -> NewtonControls {
        NewtonControls {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            max_halvings: self.newton_max_halvings,
            damping: self.newton_damping,
            step_tol: self.newton_step_tol,
        }
    }

    pub fn scheme_params(&self) -> Result<SchemeParams, ConfigError> {
        let quad = gauss_legendre_rule(self.quad_points).map_err(|e| invalid(e.to_string()))?;
        let params = SchemeParams {
            diffusion: self.diffusion,
            dt: self.dt,
            eps: self.eps,
            degree: self.degree,
            c_inv: self.c_inv.unwrap_or_else(|| compute_c_inv(self.degree.max(1))),
            quad,
            newton: self.newton(),
            reaction: self.reaction_enabled(),
        };
        params.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn fem_params(&self) -> Result<FemParams, ConfigError> {
        let mut prm = FemParams::new(self.diffusion, self.dt);
        prm.reaction = self.reaction_enabled();
        prm.quad = gauss_legendre_rule(self.quad_points).map_err(|e| invalid(e.to_string()))?;
        prm.newton = self.newton();
        Ok(prm)
    }

    pub fn mesh(&self) -> Result<Arc<Mesh1D>, ConfigError> {
        self.mesh_with(self.n_el)
    }

    pub fn mesh_with(&self, n_el: usize) -> Result<Arc<Mesh1D>, ConfigError> {
        Mesh1D::uniform(n_el, self.a, self.b).map(Arc::new).map_err(|e| invalid(e.to_string()))
    }

    /// The initial datum; the wave profile needs the ODE solve and is built
    /// by the runner.
    pub fn initial_datum(&self) -> Result<InitialDatum, ConfigError> {
        let datum = match self.initial {
            InitialKind::Steps => InitialDatum::Steps {
                segments: self.segments.iter().map(|s| (s[0], s[1], s[2])).collect(),
                background: self.background,
            },
            InitialKind::Constant => InitialDatum::Constant(self.value),
            InitialKind::Cosine => {
                InitialDatum::Cosine { mean: self.mean, amplitude: self.amplitude, wavenumber: self.wavenumber }
            }
            InitialKind::WaveProfile => return Err(invalid("the wave profile datum is built from the ODE solution")),
        };
        datum.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(datum)
    }

    pub fn snapshot_steps(&self) -> Vec<usize> {
        let mut steps = self.snapshots.clone().unwrap_or_else(|| {
            let n = self.n_steps;
            vec![0, n / 4, n / 2, 3 * n / 4, n]
        });
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid(format!("run name `{}` must be a nonempty file name", self.name)));
        }
        if self.n_el == 0 {
            return Err(invalid("n_el must be positive"));
        }
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(invalid(format!("domain ({}, {}) is empty", self.a, self.b)));
        }
        if self.n_steps == 0 && self.kind != ExperimentKind::Certify {
            return Err(invalid("n_steps must be positive"));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(invalid("floor must lie in (0, 1)"));
        }
        // the scheme parameters carry the Δt ∈ (0, 1) and D > 0 checks
        self.scheme_params()?;
        self.fem_params()?.newton.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(s) = &self.snapshots {
            if let Some(k) = s.iter().find(|k| **k > self.n_steps) {
                return Err(invalid(format!("snapshot step {k} exceeds n_steps = {}", self.n_steps)));
            }
        }
        match self.initial {
            InitialKind::WaveProfile => {
                if !(self.wave_tol > 0.0) || !self.wave_speed.is_finite() {
                    return Err(invalid("wave profile needs wave_tol > 0 and a finite wave_speed"));
                }
            }
            _ => {
                self.initial_datum()?;
            }
        }
        if self.kind == ExperimentKind::RefinementStudy {
            if self.refinement_levels.len() < 3 {
                return Err(invalid("refinement study needs at least three meshes"));
            }
            if self.refinement_levels.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(invalid("refinement levels must double"));
            }
        }
        Ok(())
    }
}

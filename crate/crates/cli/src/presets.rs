//! Named experiment batches.

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, InitialKind};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub runs: Vec<ExperimentConfig>,
}

fn base(name: String, kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig { name, kind, ..ExperimentConfig::default() }
}

fn one_group(name: String, u0: f64, degree: usize, n_steps: usize) -> ExperimentConfig {
    ExperimentConfig {
        degree,
        segments: vec![[0.0, 0.5, u0]],
        n_steps,
        ..base(name, ExperimentKind::OneGroup)
    }
}

// D = 1e-4, Δt = 1/6, N_el ∈ {20, 40}, u₀ = 0.8 on (0, 1/2), T = 20
fn fem_pair(prefix: &str, kind: ExperimentKind) -> Vec<ExperimentConfig> {
    [20, 40]
        .into_iter()
        .map(|n| ExperimentConfig {
            n_el: n,
            dt: 1.0 / 6.0,
            n_steps: 120,
            snapshots: Some(vec![0, 6, 12, 30, 60, 120]),
            ..base(format!("{prefix}-n{n}"), kind)
        })
        .collect()
}

fn fig1() -> Vec<ExperimentConfig> {
    fem_pair("fig1-fem-u", ExperimentKind::FemNegativity)
}

fn fig2() -> Vec<ExperimentConfig> {
    fem_pair("fig2-fem-lambda", ExperimentKind::FemLog)
}

// DG one-group, N_el = 40, Δt = 1/3, p = 1, 2, 3
fn one_group_batch(prefix: &str, u0: f64) -> Vec<ExperimentConfig> {
    (1..=3).map(|p| one_group(format!("{prefix}-p{p}"), u0, p, 60)).collect()
}

fn fig5_left() -> Vec<ExperimentConfig> {
    vec![ExperimentConfig {
        segments: vec![[0.0, 0.5, 1.0]],
        n_steps: 120,
        ..base("fig5-left".into(), ExperimentKind::EntropyDecay)
    }]
}

fn fig5_right() -> Vec<ExperimentConfig> {
    vec![ExperimentConfig {
        diffusion: 1e-2,
        segments: vec![[0.0, 0.5, 1.0]],
        n_steps: 180,
        ..base("fig5-right".into(), ExperimentKind::PureDiffusion)
    }]
}

// u₀ = n on (0, 1/n), mesh aligned with 1/3, 1/6, 1/12
fn fig6() -> Vec<ExperimentConfig> {
    [3usize, 6, 12]
        .into_iter()
        .map(|n| ExperimentConfig {
            n_el: 48,
            segments: vec![[0.0, 1.0 / n as f64, n as f64]],
            n_steps: 180,
            ..base(format!("fig6-n{n}"), ExperimentKind::EntropyDecayOvermass)
        })
        .collect()
}

// D = 1, domain (0, 40), T = 20 shown up to T/2
fn fig7() -> Vec<ExperimentConfig> {
    [50usize, 80]
        .into_iter()
        .map(|n| ExperimentConfig {
            n_el: n,
            a: 0.0,
            b: 40.0,
            diffusion: 1.0,
            initial: InitialKind::WaveProfile,
            segments: Vec::new(),
            n_steps: 30,
            snapshots: Some(vec![0, 10, 20, 30]),
            ..base(format!("fig7-n{n}"), ExperimentKind::TravelingWave)
        })
        .collect()
}

fn decay() -> Vec<ExperimentConfig> {
    vec![ExperimentConfig {
        diffusion: 1.0,
        dt: 0.1,
        n_steps: 100,
        ..base("decay".into(), ExperimentKind::EntropyDecay)
    }]
}

fn refinement() -> Vec<ExperimentConfig> {
    vec![ExperimentConfig {
        diffusion: 1.0,
        dt: 0.1,
        initial: InitialKind::Cosine,
        mean: 1.0,
        amplitude: 0.5,
        wavenumber: 1.0,
        segments: Vec::new(),
        n_steps: 1,
        refinement_levels: vec![10, 20, 40, 80],
        ..base("refinement".into(), ExperimentKind::RefinementStudy)
    }]
}

pub fn all() -> Vec<Preset> {
    vec![
        Preset { name: "fig1", description: "P1 finite elements in u: negative densities", runs: fig1() },
        Preset { name: "fig2", description: "P1 finite elements in log u", runs: fig2() },
        Preset { name: "fig3", description: "DG one-group, u0 = 0.8 on (0,1/2), p = 1,2,3", runs: one_group_batch("fig3", 0.8) },
        Preset { name: "fig4", description: "DG one-group, u0 = 1 on (0,1/2), p = 1,2,3", runs: one_group_batch("fig4", 1.0) },
        Preset { name: "fig5-left", description: "entropy decay of the one-group model", runs: fig5_left() },
        Preset { name: "fig5-right", description: "entropy decay under pure diffusion", runs: fig5_right() },
        Preset { name: "fig5", description: "both entropy decay panels", runs: [fig5_left(), fig5_right()].concat() },
        Preset { name: "fig6", description: "entropy decay from u0 = n on (0,1/n), n = 3,6,12", runs: fig6() },
        Preset { name: "fig7", description: "traveling wave: DG, density FEM and ODE profile", runs: fig7() },
        Preset { name: "decay", description: "exponential decay, D = 1, dt = 0.1, 100 steps", runs: decay() },
        Preset { name: "refinement", description: "one step from 1 + 0.5 cos(pi x) on 10..80 elements", runs: refinement() },
    ]
}

pub fn find(name: &str) -> Result<Preset, ConfigError> {
    all().into_iter().find(|p| p.name == name).ok_or_else(|| ConfigError::UnknownPreset(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_have_unique_run_names() {
        for p in all() {
            let mut names = std::collections::BTreeSet::new();
            assert!(!p.runs.is_empty());
            for r in &p.runs {
                r.validate().unwrap_or_else(|e| panic!("{}: {e}", r.name));
                assert!(names.insert(r.name.clone()), "duplicate {}", r.name);
            }
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(find("fig9"), Err(ConfigError::UnknownPreset(_))));
        assert_eq!(find("fig5").unwrap().runs.len(), 2);
    }
}

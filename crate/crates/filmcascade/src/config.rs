//! Experiment configuration: sectioned key-value (TOML) files driving the
//! CLI and the experiment harness. Unknown keys are hard errors so that a
//! typo cannot silently fall back to a default.

use serde::Deserialize;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::params::{nondimensionalize, PhysicalParams, ScalingParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub delta: f64,
    pub epsilon: f64,
    pub reynolds: f64,
    pub weber: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub rho: f64,
    pub g: f64,
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    pub h0: f64,
    pub l0: f64,
    pub a0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nx: 64, ny: 48 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub t_final: f64,
    /// fixed step size; 0 selects the automatic stability-limited step
    pub dt: f64,
    pub record_every: usize,
    /// "cnab2" or "imex1" (free-surface solver only)
    pub scheme: String,
    /// sweep measurements (sup of the energy, decay fits) ignore t < burn_in:
    /// the compatible initial data satisfy the boundary compatibility
    /// conditions but not quasi-steady pressure balance, so every run opens
    /// with a fast transient whose size is delta-dependent
    pub burn_in: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_final: 1.0,
            dt: 0.0,
            record_every: 10,
            scheme: "cnab2".into(),
            burn_in: 0.0,
        }
    }
}

/// Initial-elevation recipe: a deterministic list of Fourier modes plus an
/// optional seeded random band. The same recipe (same physical-unit
/// amplitudes) is reused at every delta of a sweep; the bulk velocities are
/// regenerated per delta through the compatibility construction.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// explicit modes as (wavenumber index, Re amplitude, Im amplitude)
    pub modes: Vec<(usize, f64, f64)>,
    /// number of extra seeded random modes (1..=n), amplitude below
    pub random_modes: usize,
    pub random_amplitude: f64,
    pub seed: u64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            modes: vec![(1, 0.01, 0.0)],
            random_modes: 0,
            random_amplitude: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// "sweep-delta", "compare", or "compare-ns"
    pub kind: String,
    /// strictly decreasing
    pub delta_list: Vec<f64>,
    /// "fixed" (use [params] epsilon at every delta) or "match-delta"
    pub epsilon_rule: String,
    pub model_a: String,
    pub model_b: String,
    /// number of synchronized sample times per comparison run
    pub samples: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: "sweep-delta".into(),
            delta_list: vec![0.2, 0.1, 0.05, 0.025],
            epsilon_rule: "match-delta".into(),
            model_a: "kawahara".into(),
            model_b: "kdvb".into(),
            samples: 16,
        }
    }
}

/// Config-visible acceptance gates. The underlying theory provides no
/// quantitative targets, so the empirical windows live here.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatesSection {
    /// max/min spread of sup-energy across the delta list
    pub uniformity_factor: f64,
    /// window for the fitted truncation-order slope
    pub slope_min: f64,
    pub slope_max: f64,
    /// spread tolerance of decay rate / delta across the list
    pub decay_rate_factor: f64,
}

impl Default for GatesSection {
    fn default() -> Self {
        GatesSection {
            uniformity_factor: 2.0,
            slope_min: 1.5,
            slope_max: 2.5,
            decay_rate_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// number of binary state snapshots to keep per run (0 = none)
    pub snapshots: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            snapshots: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: Option<ParamsSection>,
    pub physical: Option<PhysicalSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub gates: GatesSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_none() && self.physical.is_none() {
            return Err(Error::Config(
                "either a [params] or a [physical] section is required".into(),
            ));
        }
        if self.params.is_some() && self.physical.is_some() {
            return Err(Error::Config(
                "[params] and [physical] are mutually exclusive".into(),
            ));
        }
        let ex = &self.experiment;
        if ex.delta_list.is_empty() {
            return Err(Error::Config("experiment.delta_list must be nonempty".into()));
        }
        if !ex.delta_list.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Config(
                "experiment.delta_list must be strictly decreasing".into(),
            ));
        }
        if !matches!(ex.epsilon_rule.as_str(), "fixed" | "match-delta") {
            return Err(Error::Config(format!(
                "unknown epsilon_rule {:?} (expected \"fixed\" or \"match-delta\")",
                ex.epsilon_rule
            )));
        }
        if !matches!(ex.kind.as_str(), "sweep-delta" | "compare" | "compare-ns") {
            return Err(Error::Config(format!(
                "unknown experiment.kind {:?}",
                ex.kind
            )));
        }
        if !matches!(self.run.scheme.as_str(), "cnab2" | "imex1") {
            return Err(Error::Config(format!(
                "unknown run.scheme {:?} (expected \"cnab2\" or \"imex1\")",
                self.run.scheme
            )));
        }
        ModelKind::parse(&ex.model_a)?;
        ModelKind::parse(&ex.model_b)?;
        if self.run.t_final <= 0.0 {
            return Err(Error::Config("run.t_final must be positive".into()));
        }
        if self.grid.nx < 4 || self.grid.ny < 4 || self.grid.nx % 2 != 0 {
            return Err(Error::Config(
                "grid.nx must be even and both dimensions at least 4".into(),
            ));
        }
        Ok(())
    }

    /// Baseline nondimensional parameters (before any per-delta override).
    pub fn base_params(&self) -> Result<ScalingParams> {
        if let Some(p) = &self.params {
            ScalingParams::from_nondimensional(p.delta, p.epsilon, p.reynolds, p.weber, p.alpha)
        } else {
            let p = self.physical.as_ref().unwrap();
            nondimensionalize(&PhysicalParams {
                rho: p.rho,
                g: p.g,
                alpha: p.alpha,
                mu: p.mu,
                sigma: p.sigma,
                h0: p.h0,
                l0: p.l0,
                a0: p.a0,
            })
        }
    }

    /// Parameters of one sweep point: delta replaced, epsilon per the rule.
    pub fn params_at_delta(&self, delta: f64) -> Result<ScalingParams> {
        let base = self.base_params()?;
        let eps = match self.experiment.epsilon_rule.as_str() {
            "match-delta" => delta,
            _ => base.epsilon,
        };
        ScalingParams::from_nondimensional(delta, eps, base.reynolds, base.weber, base.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
delta = 0.1
epsilon = 0.1
reynolds = 0.9
weber = 1.0
alpha = 0.7853981633974483
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.grid.nx, 64);
        assert_eq!(cfg.grid.ny, 48);
        assert_eq!(cfg.experiment.delta_list, vec![0.2, 0.1, 0.05, 0.025]);
        let p = cfg.base_params().unwrap();
        assert_eq!(p.delta, 0.1);
        let p2 = cfg.params_at_delta(0.05).unwrap();
        assert_eq!(p2.delta, 0.05);
        assert_eq!(p2.epsilon, 0.05); // match-delta default
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = format!("{MINIMAL}\n[run]\nt_fnial = 2.0\n");
        let err = ExperimentConfig::from_str(&bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn non_decreasing_delta_list_is_rejected() {
        let bad = format!("{MINIMAL}\n[experiment]\ndelta_list = [0.1, 0.2]\n");
        assert!(ExperimentConfig::from_str(&bad).is_err());
    }

    #[test]
    fn missing_parameter_section_is_rejected() {
        assert!(ExperimentConfig::from_str("[grid]\nnx = 32\nny = 32\n").is_err());
    }

    #[test]
    fn epsilon_rule_fixed_keeps_base_epsilon() {
        let cfg = ExperimentConfig::from_str(&format!(
            "{MINIMAL}\n[experiment]\nepsilon_rule = \"fixed\"\n"
        ))
        .unwrap();
        let p = cfg.params_at_delta(0.025).unwrap();
        assert_eq!(p.epsilon, 0.1);
    }
}

//! Run configuration: a flat TOML document validated at parse time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sg2d_core::{CutoffProfile, GridSpec, LinearModel};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Frequency cutoff.
    #[serde(rename = "N")]
    pub n: usize,
    /// Points per axis; defaults to `4N`.
    #[serde(rename = "M")]
    pub m: usize,
    pub beta_sq: f64,
    pub coupling: f64,
    /// `"canonical"` or `"quintic"`.
    pub profile: String,
    /// `"hyperbolic"` or `"parabolic"` (used by `evolve`).
    pub model: String,
    /// Integrator step.
    pub h: f64,
    /// Horizon.
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Dynamics replicas (invariance, evolve).
    pub replicas: usize,
    /// Monte Carlo sample count (chaos, gibbs, logz).
    pub samples: usize,
    /// pCN settings.
    pub s: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    /// Drift shape for the variational bound: slabs `K`, support radius, radial bands.
    #[serde(rename = "K")]
    pub slabs: usize,
    #[serde(rename = "N_drift")]
    pub n_drift: usize,
    pub bands: usize,
    /// Optimizer iterations (0 evaluates only the zero drift).
    pub iterations: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Cutoff lists for the `sigma`, `green` and `chaos-scan` sweeps.
    pub ns: Vec<usize>,
    /// Regularity exponents for `chaos-scan`.
    pub alphas: Vec<f64>,
    /// `H^{1−α}` exponent for `dpd-check` and `picard`.
    pub alpha: f64,
    /// `H^{−ε}` exponent of the velocity observable.
    pub epsilon: f64,
    pub step_halving: bool,
    pub from_prior: bool,
    /// `dpd-check` step sizes `2^{−k}`, `k = coarse_exp ..= fine_exp`.
    pub coarse_exp: u32,
    pub fine_exp: u32,
    pub picard_iterations: usize,
    /// Record every this many steps in `evolve`.
    pub record_every: usize,
    pub snapshots: bool,
}

pub const KNOWN_KEYS: &[&str] = &[
    "N",
    "M",
    "beta_sq",
    "coupling",
    "profile",
    "model",
    "h",
    "T",
    "replicas",
    "samples",
    "s",
    "burn_in",
    "thin",
    "chains",
    "K",
    "N_drift",
    "bands",
    "iterations",
    "seed",
    "out_dir",
    "ns",
    "alphas",
    "alpha",
    "epsilon",
    "step_halving",
    "from_prior",
    "coarse_exp",
    "fine_exp",
    "picard_iterations",
    "record_every",
    "snapshots",
];

const REQUIRED: &[&str] = &["N", "beta_sq"];

impl RunConfig {
    /// Defaults for everything but the two required keys.
    pub fn with_defaults(n: usize, beta_sq: f64) -> Self {
        Self {
            n,
            m: 4 * n,
            beta_sq,
            coupling: 1.0,
            profile: "canonical".into(),
            model: "hyperbolic".into(),
            h: 2f64.powi(-7),
            t_final: 5.0,
            replicas: 200,
            samples: 1000,
            s: 0.2,
            burn_in: 1000,
            thin: 10,
            chains: 4,
            slabs: 4,
            n_drift: n,
            bands: 2,
            iterations: 20,
            seed: 0,
            out_dir: None,
            ns: vec![16, 32, 64, 128, 256],
            alphas: vec![0.5, 0.1],
            alpha: 0.3,
            epsilon: 0.1,
            step_halving: true,
            from_prior: false,
            coarse_exp: 5,
            fine_exp: 9,
            picard_iterations: 6,
            record_every: 1,
            snapshots: false,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.n, self.beta_sq).with_points(self.m).with_coupling(self.coupling)
    }

    pub fn cutoff_profile(&self) -> Result<CutoffProfile, CliError> {
        match self.profile.as_str() {
            "canonical" => Ok(CutoffProfile::Canonical),
            "quintic" => Ok(CutoffProfile::Quintic),
            other => Err(CliError::Invalid(format!("profile `{other}`: expected \"canonical\" or \"quintic\""))),
        }
    }

    pub fn linear_model(&self) -> Result<LinearModel, CliError> {
        match self.model.as_str() {
            "hyperbolic" => Ok(LinearModel::Hyperbolic),
            "parabolic" => Ok(LinearModel::Parabolic),
            other => Err(CliError::Invalid(format!("model `{other}`: expected \"hyperbolic\" or \"parabolic\""))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid_spec().validate()?;
        self.cutoff_profile()?;
        self.linear_model()?;
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(CliError::Invalid(what.to_string())) };
        check(self.h > 0.0 && self.h.is_finite(), "h must be positive")?;
        check(self.t_final > 0.0 && self.t_final.is_finite(), "T must be positive")?;
        check(self.replicas >= 2, "replicas must be at least 2")?;
        check(self.samples >= 2, "samples must be at least 2")?;
        check(self.s > 0.0 && self.s < 1.0, "pCN scale s must lie in (0, 1)")?;
        check(self.burn_in >= 1 && self.thin >= 1 && self.chains >= 1, "burn_in, thin and chains must be at least 1")?;
        check(self.slabs >= 1 && self.bands >= 1, "K and bands must be at least 1")?;
        check(self.n_drift <= self.n, "N_drift must not exceed N")?;
        check(self.ns.iter().all(|&n| n >= 1), "ns entries must be at least 1")?;
        check(self.alphas.iter().all(|&a| a > 0.0), "alphas must be positive")?;
        check(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)")?;
        check(self.epsilon >= 0.0, "epsilon must be non-negative")?;
        check(self.fine_exp > self.coarse_exp, "fine_exp must exceed coarse_exp")?;
        check(self.record_every >= 1, "record_every must be at least 1")?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Closest known key, if any is near enough to be a plausible typo.
fn suggest(key: &str) -> Option<&'static str> {
    KNOWN_KEYS
        .iter()
        .map(|k| (strsim::jaro_winkler(&key.to_lowercase(), &k.to_lowercase()), *k))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

/// Parses and validates a TOML document, filling defaults (`M = 4N`,
/// `coupling = 1`, `s = 0.2`, `N_drift = N`).
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            let hint = suggest(key).map(|k| format!("; did you mean `{k}`?")).unwrap_or_default();
            return Err(CliError::Parse(format!("unknown key `{key}`{hint}")));
        }
    }
    for key in REQUIRED {
        if !table.contains_key(*key) {
            return Err(CliError::Parse(format!("missing required key `{key}`")));
        }
    }
    let n = table["N"]
        .as_integer()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Parse("`N` must be a positive integer".into()))? as usize;
    let beta_sq = match &table["beta_sq"] {
        toml::Value::Float(x) => *x,
        toml::Value::Integer(x) => *x as f64,
        _ => return Err(CliError::Parse("`beta_sq` must be a number".into())),
    };
    let defaults = toml::Table::try_from(RunConfig::with_defaults(n, beta_sq)).expect("defaults serialize");
    let mut merged = defaults;
    for (k, v) in table {
        // Integers are accepted where floats are expected.
        let v = match (&merged.get(&k), v) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (Some(toml::Value::Array(_)), toml::Value::Array(items)) if k == "alphas" => toml::Value::Array(
                items
                    .into_iter()
                    .map(|x| match x {
                        toml::Value::Integer(i) => toml::Value::Float(i as f64),
                        other => other,
                    })
                    .collect(),
            ),
            (_, v) => v,
        };
        merged.insert(k, v);
    }
    let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

//! The truncated Gibbs measure `dρ_N = Z_N⁻¹ e^{R_N(u)} dμ_1(u)`: the
//! renormalized density, a pCN sampler, and two partition-function
//! estimators (importance sampling under `μ_1` and the variational drift
//! formula).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{inverse_transform, project, FourierField};
use crate::gaussian::{fill_gaussian, sample_mu1};
use crate::grid::SpectralGrid;
use crate::rng::{label, RngStream};
use crate::stats::{compensated_sum, estimate, gelman_rubin, CompensatedSum, Estimate};

/// `R_N(u) = coupling · (γ_N/β) ∫ cos(β P_N u) dx` by the grid trapezoid rule.
///
/// Returns exactly 0 when the coupling is 0.
pub fn compute_rn(grid: &SpectralGrid, u: &FourierField) -> f64 {
    let coupling = grid.spec().coupling;
    if coupling == 0.0 {
        return 0.0;
    }
    let constants = grid.constants();
    let beta = constants.beta();
    let values = inverse_transform(grid, &project(grid, u));
    let s: CompensatedSum = values.iter().map(|&p| (beta * p).cos()).collect();
    coupling * constants.gamma_n / beta * s.value() * grid.cell_area()
}

/// Upper bound `|coupling| γ_N 4π² / β` of `|R_N|`.
pub fn rn_bound(grid: &SpectralGrid) -> f64 {
    grid.spec().coupling.abs() * grid.constants().gamma_n * 4.0 * PI * PI / grid.beta()
}

/// Current pCN position with its cached density and acceptance counters.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub u: FourierField,
    pub rn: f64,
    /// Proposal scale `s ∈ (0, 1)`.
    pub scale: f64,
    pub accepted: u64,
    pub proposed: u64,
}

impl ChainState {
    pub fn new(grid: &SpectralGrid, u: FourierField, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(invalid("scale", format!("proposal scale must lie in (0, 1), got {scale}")));
        }
        let rn = compute_rn(grid, &u);
        Ok(Self {
            u,
            rn,
            scale,
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// One preconditioned Crank–Nicolson step targeting `ρ_N`; returns whether
/// the proposal was accepted.
pub fn pcn_step(grid: &SpectralGrid, chain: &mut ChainState, rng: &mut RngStream) -> bool {
    let s = chain.scale;
    let keep = (1.0 - s * s).sqrt();
    let xi = sample_mu1(grid, rng);
    let mut proposal = chain.u.scaled(keep);
    proposal.axpy(s, &xi);
    let rn = compute_rn(grid, &proposal);
    chain.proposed += 1;
    let log_ratio = rn - chain.rn;
    let accept = log_ratio >= 0.0 || rng.uniform().ln() < log_ratio;
    if accept {
        chain.u = proposal;
        chain.rn = rn;
        chain.accepted += 1;
    }
    accept
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    /// Initial proposal scale.
    pub scale: f64,
    /// Acceptance rate targeted during burn-in.
    pub target_acceptance: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            burn_in: 1000,
            thin: 10,
            chains: 4,
            scale: 0.2,
            target_acceptance: 0.3,
        }
    }
}

impl GibbsConfig {
    fn validate(&self) -> Result<()> {
        if self.burn_in < 1 || self.thin < 1 {
            return Err(invalid("burn_in/thin", "both must be at least 1"));
        }
        if self.chains < 1 || self.samples < 1 {
            return Err(invalid("chains/samples", "both must be at least 1"));
        }
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(invalid("scale", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-chain diagnostics after sampling.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub scale: f64,
    /// Acceptance rate after adaptation was frozen.
    pub acceptance: f64,
}

#[derive(Clone, Debug)]
pub struct GibbsSamples {
    /// Positions in chain order (chain 0 first).
    pub samples: Vec<FourierField>,
    /// `R_N` of each sample.
    pub rn: Vec<f64>,
    pub chains: Vec<ChainSummary>,
    /// Gelman–Rubin `R̂` of `R_N` across chains (needs ≥ 2 chains).
    pub gelman_rubin: Option<f64>,
    pub warnings: Vec<String>,
}

fn run_chain(grid: &SpectralGrid, cfg: &GibbsConfig, count: usize, seed: u64, chain: usize) -> (Vec<FourierField>, Vec<f64>, ChainSummary) {
    let mut rng = RngStream::derive(seed, label::CHAIN, chain as u64);
    let start = sample_mu1(grid, &mut rng);
    let mut state = ChainState::new(grid, start, cfg.scale).expect("validated scale");
    const BATCH: usize = 50;
    for step in 0..cfg.burn_in {
        pcn_step(grid, &mut state, &mut rng);
        if (step + 1) % BATCH == 0 {
            let rate = state.acceptance_rate();
            let log_s = state.scale.ln() + (rate - cfg.target_acceptance);
            state.scale = log_s.exp().clamp(1e-4, 0.999);
            state.reset_counters();
        }
    }
    state.reset_counters();
    let mut samples = Vec::with_capacity(count);
    let mut rn = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..cfg.thin {
            pcn_step(grid, &mut state, &mut rng);
        }
        samples.push(state.u.clone());
        rn.push(state.rn);
    }
    let summary = ChainSummary {
        chain,
        scale: state.scale,
        acceptance: state.acceptance_rate(),
    };
    (samples, rn, summary)
}

/// Approximately `ρ_N`-distributed positions from independent adaptive pCN
/// chains. The proposal scale adapts toward the target acceptance during
/// burn-in and is frozen afterwards.
pub fn sample_gibbs(grid: &SpectralGrid, cfg: &GibbsConfig, seed: u64) -> Result<GibbsSamples> {
    cfg.validate()?;
    let per_chain = cfg.samples.div_ceil(cfg.chains);
    let runs: Vec<_> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(grid, cfg, per_chain, seed, c))
        .collect();
    let mut warnings = Vec::new();
    for (_, _, s) in &runs {
        if !(0.1..=0.9).contains(&s.acceptance) {
            warnings.push(format!(
                "chain {}: acceptance rate {:.3} outside [0.1, 0.9] after adaptation (scale {:.4})",
                s.chain, s.acceptance, s.scale
            ));
        }
    }
    let gelman_rubin = (cfg.chains >= 2 && per_chain >= 2).then(|| {
        let traces: Vec<Vec<f64>> = runs.iter().map(|(_, rn, _)| rn.clone()).collect();
        gelman_rubin(&traces)
    });
    let chains = runs.iter().map(|r| r.2).collect();
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut rn = Vec::with_capacity(cfg.samples);
    for (s, r, _) in runs {
        samples.extend(s);
        rn.extend(r);
    }
    samples.truncate(cfg.samples);
    rn.truncate(cfg.samples);
    Ok(GibbsSamples {
        samples,
        rn,
        chains,
        gelman_rubin,
        warnings,
    })
}

/// `(1/p) log E_{μ_1}[e^{pR_N}]`, the log of the `L^p(μ_1)` norm of `e^{R_N}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub log_norm: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogZEstimate {
    pub log_z: f64,
    /// Delta-method standard error of `log Ẑ`.
    pub std_error: f64,
    pub samples: usize,
    pub moments: Vec<MomentEstimate>,
    pub mean_rn: Estimate,
    pub min_rn: f64,
    pub max_rn: f64,
}

/// `log` of a sample mean of `e^{p x}` with its delta-method SE, computed
/// with a max shift.
fn log_mean_exp(xs: &[f64], p: f64) -> Estimate {
    let shift = xs.iter().map(|x| p * x).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (p * x - shift).exp()).collect();
    let e = estimate(&w);
    Estimate {
        mean: shift + e.mean.ln(),
        std_error: e.std_error / e.mean,
    }
}

/// Draws of `R_N(u)` with `u ~ μ_1`.
pub fn sample_rn_prior(grid: &SpectralGrid, samples: usize, seed: u64) -> Vec<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::derive(seed, label::FIELD, i as u64);
            compute_rn(grid, &sample_mu1(grid, &mut rng))
        })
        .collect()
}

/// Importance-sampling estimate of `log Z_N = log E_{μ_1}[e^{R_N}]` with
/// the `L^p` moments of `e^{R_N}` for `p ∈ {1, 2, 4}`.
pub fn estimate_logz_mc(grid: &SpectralGrid, samples: usize, seed: u64) -> Result<LogZEstimate> {
    if samples < 1000 {
        return Err(invalid("samples", "at least 1000 samples required"));
    }
    let rn = sample_rn_prior(grid, samples, seed);
    Ok(logz_from_rn(&rn))
}

pub fn logz_from_rn(rn: &[f64]) -> LogZEstimate {
    let z = log_mean_exp(rn, 1.0);
    let moments = [1.0, 2.0, 4.0]
        .into_iter()
        .map(|p| {
            let e = log_mean_exp(rn, p);
            MomentEstimate {
                p,
                log_norm: Estimate {
                    mean: e.mean / p,
                    std_error: e.std_error / p,
                },
            }
        })
        .collect();
    LogZEstimate {
        log_z: z.mean,
        std_error: z.std_error,
        samples: rn.len(),
        moments,
        mean_rn: estimate(rn),
        min_rn: rn.iter().copied().fold(f64::INFINITY, f64::min),
        max_rn: rn.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Drift for the variational formula, piecewise constant on `K` slabs of
/// length `1/K` and supported on `|n| ≤ N_drift`:
///
/// `η_k(n) = offset_k(n) − λ_{k,b(n)} ⟨n⟩ X_k(n)`,
///
/// where `X_k` is the controlled state at the start of slab `k` and `b(n)`
/// is the radial band of `n`. With all gains zero the drift is
/// deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftControl {
    pub slabs: usize,
    pub n_drift: usize,
    pub bands: usize,
    /// One band-limited field per slab.
    pub offsets: Vec<FourierField>,
    /// Feedback gains, `slabs × bands`, row-major by slab.
    pub gains: Vec<f64>,
}

impl DriftControl {
    pub fn zero(grid: &SpectralGrid, slabs: usize, n_drift: usize, bands: usize) -> Result<Self> {
        let d = Self {
            slabs,
            n_drift,
            bands,
            offsets: vec![FourierField::zeros(grid.m()); slabs],
            gains: vec![0.0; slabs * bands],
        };
        d.validate(grid)?;
        Ok(d)
    }

    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        if self.slabs < 1 || self.bands < 1 {
            return Err(invalid("drift", "need at least one slab and one band"));
        }
        if self.n_drift > grid.cutoff() {
            return Err(invalid("n_drift", format!("N_drift = {} exceeds the cutoff {}", self.n_drift, grid.cutoff())));
        }
        if self.offsets.len() != self.slabs || self.gains.len() != self.slabs * self.bands {
            return Err(invalid("drift", "offset/gain shapes do not match slabs × bands"));
        }
        let r2 = (self.n_drift * self.n_drift) as i64;
        for f in &self.offsets {
            if f.m() != grid.m() {
                return Err(Error::DimensionMismatch {
                    expected: grid.m(),
                    found: f.m(),
                });
            }
            for (c, &(a, b)) in f.coeffs().iter().zip(grid.wavenumbers()) {
                if a * a + b * b > r2 && *c != Complex64::default() {
                    return Err(Error::NotBandLimited {
                        cutoff: self.n_drift,
                        n1: a,
                        n2: b,
                        magnitude: c.norm(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.gains.iter().all(|&g| g == 0.0)
    }

    /// Grid indices with `|n| ≤ N_drift` and their radial band.
    fn support(&self, grid: &SpectralGrid) -> Vec<(usize, usize)> {
        let r2 = (self.n_drift * self.n_drift) as i64;
        let width = (self.n_drift as f64 + 1.0) / self.bands as f64;
        grid.wavenumbers()
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| a * a + b * b <= r2)
            .map(|(i, &(a, b))| {
                let r = ((a * a + b * b) as f64).sqrt();
                (i, ((r / width) as usize).min(self.bands - 1))
            })
            .collect()
    }

    /// `½ Σ_k (1/K) ‖offset_k‖²`, the cost of the deterministic part.
    pub fn deterministic_cost(&self) -> f64 {
        let k = self.slabs as f64;
        0.5 * compensated_sum(
            self.offsets
                .iter()
                .map(|f| compensated_sum(f.coeffs().iter().map(|c| c.norm_sqr())) / k),
        )
    }
}

/// Monte Carlo evaluation of the variational objective for one drift.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VariationalEstimate {
    /// `E[−R_N(X_1)] + E[½ ∫ ‖η‖²]`.
    pub objective: Estimate,
    pub neg_rn: Estimate,
    pub cost: Estimate,
    /// Largest `‖I(η)(1)‖²_{H¹} / ∫‖η‖²` over samples (0 when η ≡ 0).
    pub y8_max_ratio: f64,
    pub samples: usize,
}

impl VariationalEstimate {
    /// `‖I(η)(1)‖²_{H¹} ≤ ∫₀¹ ‖η‖² dt` held on every path.
    pub fn y8_holds(&self) -> bool {
        self.y8_max_ratio <= 1.0 + 1e-12
    }
}

struct PathOutcome {
    neg_rn: f64,
    cost: f64,
    y8_ratio: f64,
}

fn controlled_path(grid: &SpectralGrid, drift: &DriftControl, support: &[(usize, usize)], rng: &mut RngStream) -> PathOutcome {
    let k_slabs = drift.slabs;
    let dt = 1.0 / k_slabs as f64;
    let inv = grid.inv_bracket();
    // Modes off the drift support end at Y(1) ~ μ_1; sample them in one go.
    let mut x = sample_mu1(grid, rng);
    let mut state: Vec<Complex64> = vec![Complex64::default(); support.len()];
    let mut integral: Vec<Complex64> = vec![Complex64::default(); support.len()];
    let weights: Vec<f64> = inv.iter().map(|w| w * dt.sqrt()).collect();
    let mut increment = vec![Complex64::default(); grid.len()];
    let mut cost = CompensatedSum::new();
    let mut eta = vec![Complex64::default(); support.len()];
    for k in 0..k_slabs {
        fill_gaussian(grid, &weights, &mut increment, rng);
        let offset = drift.offsets[k].coeffs();
        let gains = &drift.gains[k * drift.bands..(k + 1) * drift.bands];
        let mut slab_norm = CompensatedSum::new();
        for (slot, &(idx, band)) in support.iter().enumerate() {
            let bracket = 1.0 / inv[idx];
            eta[slot] = offset[idx] - state[slot] * (gains[band] * bracket);
            slab_norm.add(eta[slot].norm_sqr());
        }
        cost.add(0.5 * dt * slab_norm.value());
        for (slot, &(idx, _)) in support.iter().enumerate() {
            let drift_step = eta[slot] * (inv[idx] * dt);
            state[slot] += drift_step + increment[idx];
            integral[slot] += drift_step;
        }
    }
    let mut h1 = CompensatedSum::new();
    for (slot, &(idx, _)) in support.iter().enumerate() {
        x.coeffs_mut()[idx] = state[slot];
        h1.add(integral[slot].norm_sqr() / (inv[idx] * inv[idx]));
    }
    let cost = cost.value();
    let y8_ratio = if cost > 0.0 { h1.value() / (2.0 * cost) } else if h1.value() > 0.0 { f64::INFINITY } else { 0.0 };
    PathOutcome {
        neg_rn: -compute_rn(grid, &x),
        cost,
        y8_ratio,
    }
}

/// `E[−R_N(Y(1) + I(η)(1))] + E[½ ∫₀¹ ‖η(t)‖² dt]` over `samples` controlled
/// paths; an upper bound on `−log Z_N` for every admissible drift.
pub fn variational_objective(grid: &SpectralGrid, drift: &DriftControl, samples: usize, seed: u64) -> Result<VariationalEstimate> {
    drift.validate(grid)?;
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let support = drift.support(grid);
    let paths: Vec<PathOutcome> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::derive(seed, label::DRIFT, i as u64);
            controlled_path(grid, drift, &support, &mut rng)
        })
        .collect();
    let neg_rn: Vec<f64> = paths.iter().map(|p| p.neg_rn).collect();
    let cost: Vec<f64> = paths.iter().map(|p| p.cost).collect();
    let total: Vec<f64> = paths.iter().map(|p| p.neg_rn + p.cost).collect();
    let objective = estimate(&total);
    if !objective.mean.is_finite() {
        return Err(Error::Divergent(format!("variational objective is {}", objective.mean)));
    }
    Ok(VariationalEstimate {
        objective,
        neg_rn: estimate(&neg_rn),
        cost: estimate(&cost),
        y8_max_ratio: paths.iter().map(|p| p.y8_ratio).fold(0.0, f64::max),
        samples,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub iterations: usize,
    /// Monte Carlo paths per objective evaluation (common random numbers).
    pub samples: usize,
    /// Central finite-difference step on the gains.
    pub fd_step: f64,
    /// Initial gradient step length.
    pub learning_rate: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            samples: 2000,
            fd_step: 0.05,
            learning_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftOptimization {
    pub drift: DriftControl,
    /// Objective of each accepted iterate, starting with the initial drift.
    pub trace: Vec<f64>,
    /// Y8 ratio of each accepted iterate.
    pub y8_ratios: Vec<f64>,
}

/// Descends the variational objective over the feedback gains with central
/// finite differences under common random numbers. A step is kept only if
/// it lowers the (CRN) objective, so the trace is non-increasing; otherwise
/// the step length is halved.
pub fn optimize_drift(grid: &SpectralGrid, init: &DriftControl, cfg: &OptimizeConfig, seed: u64) -> Result<DriftOptimization> {
    if cfg.iterations < 1 {
        return Err(invalid("iterations", "must be at least 1"));
    }
    init.validate(grid)?;
    let eval = |d: &DriftControl| -> Result<VariationalEstimate> { variational_objective(grid, d, cfg.samples, seed) };
    let mut current = init.clone();
    let first = eval(&current)?;
    let mut value = first.objective.mean;
    let mut trace = vec![value];
    let mut y8_ratios = vec![first.y8_max_ratio];
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.iterations {
        let mut grad = vec![0.0; current.gains.len()];
        for (p, g) in grad.iter_mut().enumerate() {
            let mut plus = current.clone();
            plus.gains[p] += cfg.fd_step;
            let mut minus = current.clone();
            minus.gains[p] -= cfg.fd_step;
            *g = (eval(&plus)?.objective.mean - eval(&minus)?.objective.mean) / (2.0 * cfg.fd_step);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Divergent(format!("gradient norm is {norm}")));
        }
        if norm == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..8 {
            let mut trial = current.clone();
            for (gain, g) in trial.gains.iter_mut().zip(&grad) {
                *gain -= lr * g / norm;
            }
            let est = eval(&trial)?;
            if est.objective.mean < value {
                current = trial;
                value = est.objective.mean;
                trace.push(value);
                y8_ratios.push(est.y8_max_ratio);
                lr *= 1.5;
                improved = true;
                break;
            }
            lr *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(DriftOptimization {
        drift: current,
        trace,
        y8_ratios,
    })
}

/// `log ∫ φ(g) exp(c cos(βg/2π)) dg` with `c = coupling · γ_1 4π²/β`: the
/// partition function when only the zero mode survives the projector.
pub fn zero_mode_log_z(coefficient: f64, beta: f64) -> f64 {
    let f = |g: f64| (-0.5 * g * g + coefficient * ((beta * g / (2.0 * PI)).cos() - 1.0)).exp();
    let integral = crate::stats::simpson(f, -12.0, 12.0, 20_000);
    coefficient + (integral / (2.0 * PI).sqrt()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::stats::ks_distance;
    use std::sync::Arc;

    fn grid(n: usize, beta_sq: f64, coupling: f64) -> Arc<SpectralGrid> {
        SpectralGrid::new(GridSpec::new(n, beta_sq).with_coupling(coupling)).unwrap()
    }

    #[test]
    fn rn_of_constants() {
        let g = grid(8, PI, 1.0);
        let k = g.constants();
        let beta = k.beta();
        let zero = FourierField::zeros(g.m());
        assert!((compute_rn(&g, &zero) - k.gamma_n * 4.0 * PI * PI / beta).abs() < 1e-10);
        let c = 0.37;
        let expected = k.gamma_n * 4.0 * PI * PI * (beta * c).cos() / beta;
        assert!((compute_rn(&g, &FourierField::constant(g.m(), c)) - expected).abs() < 1e-10);
        let u = sample_mu1(&g, &mut RngStream::new(3, 0));
        assert!(compute_rn(&g, &u).abs() <= rn_bound(&g) * (1.0 + 1e-12));
        assert_eq!(compute_rn(&grid(8, PI, 0.0), &u), 0.0);
    }

    #[test]
    fn cached_density_matches() {
        let g = grid(4, PI, 1.0);
        let mut rng = RngStream::new(8, 0);
        let mut chain = ChainState::new(&g, sample_mu1(&g, &mut rng), 0.3).unwrap();
        for _ in 0..200 {
            pcn_step(&g, &mut chain, &mut rng);
            assert!((chain.rn - compute_rn(&g, &chain.u)).abs() < 1e-10);
        }
        assert!(ChainState::new(&g, chain.u.clone(), 1.0).is_err());
    }

    #[test]
    fn flat_density_always_accepts() {
        let g = grid(4, PI, 0.0);
        let mut rng = RngStream::new(8, 0);
        let mut chain = ChainState::new(&g, sample_mu1(&g, &mut rng), 0.9).unwrap();
        for _ in 0..100 {
            assert!(pcn_step(&g, &mut chain, &mut rng));
        }
        let g = grid(4, PI, 1.0);
        let mut chain = ChainState::new(&g, sample_mu1(&g, &mut rng), 1e-9).unwrap();
        let accepted = (0..100).filter(|_| pcn_step(&g, &mut chain, &mut rng)).count();
        assert!(accepted >= 99);
    }

    #[test]
    fn zero_mode_chain_matches_quadrature() {
        let g = grid(1, PI, 1.0);
        let beta = g.beta();
        let coefficient = g.constants().gamma_n * 4.0 * PI * PI / beta;
        let cfg = GibbsConfig {
            samples: 20_000,
            burn_in: 2000,
            thin: 5,
            chains: 4,
            ..GibbsConfig::default()
        };
        let out = sample_gibbs(&g, &cfg, 11).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let zs: Vec<f64> = out.samples.iter().map(|u| u.coeffs()[0].re).collect();
        let density = |x: f64| (-0.5 * x * x + coefficient * ((beta * x / (2.0 * PI)).cos() - 1.0)).exp();
        let norm = crate::stats::simpson(density, -12.0, 12.0, 8000);
        let cdf = |x: f64| crate::stats::simpson(density, -12.0, x.clamp(-12.0, 12.0), 800) / norm;
        let d = ks_distance(&zs, cdf);
        assert!(d < 0.03, "KS {d}");
        assert!(out.gelman_rubin.unwrap() < 1.1);
    }

    #[test]
    fn zero_mode_partition_function() {
        let g = grid(1, PI, 1.0);
        let beta = g.beta();
        let coefficient = g.constants().gamma_n * 4.0 * PI * PI / beta;
        let exact = zero_mode_log_z(coefficient, beta);
        let est = estimate_logz_mc(&g, 20_000, 2).unwrap();
        let z = (est.log_z - exact) / est.std_error;
        assert!(z.abs() < 3.5, "{} vs {exact} (se {})", est.log_z, est.std_error);
        assert!(est.min_rn.is_finite() && est.max_rn.is_finite());
    }

    #[test]
    fn coupling_off_partition_function_is_one() {
        let g = grid(4, PI, 0.0);
        let est = estimate_logz_mc(&g, 1000, 2).unwrap();
        assert_eq!(est.log_z, 0.0);
        let d = DriftControl::zero(&g, 2, 4, 2).unwrap();
        let v = variational_objective(&g, &d, 100, 1).unwrap();
        assert_eq!(v.objective.mean, 0.0);
        let opt = optimize_drift(&g, &d, &OptimizeConfig { iterations: 2, samples: 50, ..Default::default() }, 1).unwrap();
        assert!(opt.drift.gains.iter().all(|&x| x.abs() < 1.0));
        assert!(opt.trace.last().unwrap().abs() < 1e-2);
    }

    #[test]
    fn single_slab_cost_is_half_squared_norm() {
        let g = grid(4, PI, 1.0);
        let mut d = DriftControl::zero(&g, 1, 3, 1).unwrap();
        d.offsets[0].set_mode(1, 2, Complex64::new(0.3, -0.4));
        d.offsets[0].set_mode(0, 0, Complex64::new(0.5, 0.0));
        let norm_sq = 2.0 * 0.25 + 0.25;
        assert!((d.deterministic_cost() - 0.5 * norm_sq).abs() < 1e-15);
        let v = variational_objective(&g, &d, 20, 4).unwrap();
        assert!((v.cost.mean - 0.5 * norm_sq).abs() < 1e-14);
        assert!(v.y8_holds());
        let mut bad = d.clone();
        bad.offsets[0].set_mode(4, 0, Complex64::new(1.0, 0.0));
        assert!(bad.validate(&g).is_err());
        assert!(DriftControl::zero(&g, 1, 5, 1).is_err());
    }

    #[test]
    fn zero_drift_objective_is_prior_mean() {
        let g = grid(4, PI, 1.0);
        let d = DriftControl::zero(&g, 3, 4, 2).unwrap();
        let v = variational_objective(&g, &d, 4000, 6).unwrap();
        // E_{μ_1}[R_N] = 4π²/β exactly, by the mean-one identity.
        let target = -4.0 * PI * PI / g.beta();
        assert!(v.objective.z_against(target).abs() < 3.5, "{:?}", v.objective);
        assert_eq!(v.cost.mean, 0.0);
    }

    #[test]
    fn feedback_drift_tightens_bound_and_respects_y8() {
        let g = grid(4, PI, 1.0);
        let init = DriftControl::zero(&g, 2, 4, 2).unwrap();
        let cfg = OptimizeConfig {
            iterations: 4,
            samples: 400,
            ..Default::default()
        };
        let opt = optimize_drift(&g, &init, &cfg, 21).unwrap();
        assert!(opt.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(opt.trace.last() < opt.trace.first(), "{:?}", opt.trace);
        assert!(opt.y8_ratios.iter().all(|&r| r <= 1.0 + 1e-12));
    }
}

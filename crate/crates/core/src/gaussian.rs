//! Gaussian measures `μ_s`, the product `μ⃗_1 = μ_1 ⊗ μ_0`, and exact
//! per-mode integration of the linear stochastic damped wave and heat flows.
//!
//! Per mode `n` with `k² = ⟨n⟩²`:
//!
//! * hyperbolic: `ẍ + ẋ + k² x = √2 Ḃ_n`, stationary law `(k⁻², 1)`;
//! * parabolic:  `ẋ + ½ k² x = Ḃ_n`, stationary variance `k⁻²`.
//!
//! `B_n` are complex Brownian motions with `E|B_n(t)|² = t`, conjugate-paired
//! across `±n` and real on self-conjugate modes. One step of length `h` is
//! `x ↦ A_n(h) x + ζ`, `ζ ~ N(0, Q_n(h))`, exact in law for any `h`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{project, FourierField};
use crate::grid::SpectralGrid;
use crate::rng::{label, RngStream};
use crate::stats::{estimate, Estimate};

/// Position and velocity `(u, ∂_t u)` at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub u: FourierField,
    pub v: FourierField,
    pub t: f64,
}

impl PhaseState {
    pub fn zeros(m: usize) -> Self {
        Self {
            u: FourierField::zeros(m),
            v: FourierField::zeros(m),
            t: 0.0,
        }
    }
}

/// Standard complex Gaussian with `E|g|² = 1`.
#[inline]
fn complex_normal(rng: &mut RngStream) -> Complex64 {
    Complex64::new(rng.normal(), rng.normal()) * std::f64::consts::FRAC_1_SQRT_2
}

/// Fills `out` with white-noise coefficients scaled per mode by `weights`:
/// `ĉ(n) = weights[n] · g_n`, `g_n` standard complex Gaussian, conjugate-paired.
pub(crate) fn fill_gaussian(
    grid: &SpectralGrid,
    weights: &[f64],
    out: &mut [Complex64],
    rng: &mut RngStream,
) {
    for &(a, b) in grid.pairs() {
        let g = complex_normal(rng) * weights[a];
        out[a] = g;
        out[b] = g.conj();
    }
    for &a in grid.self_conjugate() {
        out[a] = Complex64::new(rng.normal() * weights[a], 0.0);
    }
}

/// Sample of `μ_s`: coefficients `g_n / ⟨n⟩^s` on every grid mode.
pub fn sample_mu(grid: &SpectralGrid, s: f64, rng: &mut RngStream) -> FourierField {
    let weights: Vec<f64> = if s == 1.0 {
        grid.inv_bracket().to_vec()
    } else if s == 0.0 {
        vec![1.0; grid.len()]
    } else {
        grid.bracket_sq().iter().map(|b| b.powf(-s / 2.0)).collect()
    };
    let mut field = FourierField::zeros(grid.m());
    fill_gaussian(grid, &weights, field.coeffs_mut(), rng);
    field
}

/// `μ_1` sample using the cached `⟨n⟩⁻¹` table.
pub fn sample_mu1(grid: &SpectralGrid, rng: &mut RngStream) -> FourierField {
    let mut field = FourierField::zeros(grid.m());
    fill_gaussian(grid, grid.inv_bracket(), field.coeffs_mut(), rng);
    field
}

/// Independent `u ~ μ_1`, `v ~ μ_0`.
pub fn sample_pair_mu1(grid: &SpectralGrid, rng: &mut RngStream) -> PhaseState {
    let u = sample_mu1(grid, rng);
    let v = sample_mu(grid, 0.0, rng);
    PhaseState { u, v, t: 0.0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearModel {
    Hyperbolic,
    Parabolic,
}

impl LinearModel {
    pub fn name(self) -> &'static str {
        match self {
            LinearModel::Hyperbolic => "hyperbolic",
            LinearModel::Parabolic => "parabolic",
        }
    }
}

/// One-step data for a single mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeStep {
    /// Deterministic propagator; parabolic modes use `a[0][0]` only.
    pub a: [[f64; 2]; 2],
    /// Noise covariance in `E|·|²` units.
    pub q: [[f64; 2]; 2],
    /// Lower Cholesky factor `(l11, l21, l22)` of `q`.
    pub chol: [f64; 3],
    /// Response `(position, velocity)` to a unit forcing held constant over
    /// the step (exponential Euler weights).
    pub forcing: [f64; 2],
}

impl ModeStep {
    /// Exact step of `ẍ + ẋ + k² x = √2 Ḃ` over `h`.
    pub fn hyperbolic(k_sq: f64, h: f64) -> Self {
        let omega = (k_sq - 0.25).sqrt();
        let decay = (-0.5 * h).exp();
        let (sin, cos) = (omega * h).sin_cos();
        let d = decay * sin / omega;
        let dp = decay * (cos - sin / (2.0 * omega));
        let a = [[dp + d, d], [-k_sq * d, dp]];

        let [i_ss, i_sc, i_cc] = if h.max(omega * h) < 0.25 {
            oscillator_integrals_short(omega, h)
        } else {
            // ∫₀ʰ e^{-s} {sin², sin cos, cos²}(ωs) ds via ∫₀ʰ e^{(−1+2iω)s} ds.
            let e0 = -(-h).exp_m1();
            let z = Complex64::new(-1.0, 2.0 * omega);
            let osc = ((z * h).exp() - 1.0) / z;
            [0.5 * (e0 - osc.re), 0.5 * osc.im, 0.5 * (e0 + osc.re)]
        };
        let q11 = 2.0 * i_ss / (omega * omega);
        let q12 = 2.0 * (i_sc - i_ss / (2.0 * omega)) / omega;
        let q22 = 2.0 * (i_cc - i_sc / omega + i_ss / (4.0 * omega * omega));
        let q = [[q11, q12], [q12, q22]];

        let forcing = [(1.0 - a[0][0]) / k_sq, d];
        Self {
            a,
            q,
            chol: cholesky2(q),
            forcing,
        }
    }

    /// Exact step of `ẋ + ½ k² x = Ḃ` over `h`.
    pub fn parabolic(k_sq: f64, h: f64) -> Self {
        let rate = 0.5 * k_sq;
        let a0 = (-rate * h).exp();
        let q0 = -(-k_sq * h).exp_m1() / k_sq;
        let f0 = -(-rate * h).exp_m1() / rate;
        Self {
            a: [[a0, 0.0], [0.0, 0.0]],
            q: [[q0, 0.0], [0.0, 0.0]],
            chol: [q0.max(0.0).sqrt(), 0.0, 0.0],
            forcing: [f0, 0.0],
        }
    }
}

/// Same integrals by 8-point Gauss–Legendre on `[0, h]`; the closed form
/// cancels catastrophically when both `h` and `ωh` are small.
fn oscillator_integrals_short(omega: f64, h: f64) -> [f64; 3] {
    const GL8: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let mut out = [0.0; 3];
    for &(x, w) in &GL8 {
        for s in [0.5 * h * (1.0 - x), 0.5 * h * (1.0 + x)] {
            let e = (-s).exp();
            let (sin, cos) = (omega * s).sin_cos();
            let c = 0.5 * h * w * e;
            out[0] += c * sin * sin;
            out[1] += c * sin * cos;
            out[2] += c * cos * cos;
        }
    }
    out
}

fn cholesky2(q: [[f64; 2]; 2]) -> [f64; 3] {
    let l11 = q[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { q[1][0] / l11 } else { 0.0 };
    let l22 = (q[1][1] - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

/// Per-mode propagators, noise covariances and forcing weights for step `h`.
#[derive(Clone, Debug)]
pub struct LinearStepTables {
    h: f64,
    model: LinearModel,
    modes: Vec<ModeStep>,
}

/// Builds exact one-step tables; errors for `h ≤ 0`.
pub fn build_linear_tables(grid: &SpectralGrid, h: f64, model: LinearModel) -> Result<LinearStepTables> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid("h", format!("step size must be positive, got {h}")));
    }
    let modes = grid
        .bracket_sq()
        .iter()
        .map(|&k_sq| match model {
            LinearModel::Hyperbolic => ModeStep::hyperbolic(k_sq, h),
            LinearModel::Parabolic => ModeStep::parabolic(k_sq, h),
        })
        .collect();
    Ok(LinearStepTables { h, model, modes })
}

impl LinearStepTables {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn model(&self) -> LinearModel {
        self.model
    }

    pub fn modes(&self) -> &[ModeStep] {
        &self.modes
    }

    pub(crate) fn expect(&self, model: LinearModel) -> Result<()> {
        if self.model != model {
            return Err(Error::ModelMismatch {
                expected: model.name(),
                found: self.model.name(),
            });
        }
        Ok(())
    }

    /// Deterministic part `x ↦ A_n x` of a hyperbolic step, in place.
    pub fn propagate(&self, state: &mut PhaseState) {
        debug_assert_eq!(self.model, LinearModel::Hyperbolic);
        let (u, v) = (state.u.coeffs_mut(), state.v.coeffs_mut());
        for ((x, y), step) in u.iter_mut().zip(v.iter_mut()).zip(&self.modes) {
            let a = &step.a;
            let (x0, y0) = (*x, *y);
            *x = x0 * a[0][0] + y0 * a[0][1];
            *y = x0 * a[1][0] + y0 * a[1][1];
        }
        state.t += self.h;
    }

    /// Deterministic part of a parabolic step, in place.
    pub fn propagate_field(&self, field: &mut FourierField) {
        debug_assert_eq!(self.model, LinearModel::Parabolic);
        for (x, step) in field.coeffs_mut().iter_mut().zip(&self.modes) {
            *x *= step.a[0][0];
        }
    }

    /// Fresh noise increment `ζ ~ N(0, Q_n(h))` of a hyperbolic step.
    pub fn sample_noise(&self, grid: &SpectralGrid, rng: &mut RngStream) -> PhaseState {
        let mut noise = PhaseState::zeros(grid.m());
        self.add_noise(grid, &mut noise, rng);
        noise.t = 0.0;
        noise
    }

    /// Adds a hyperbolic noise increment to `state` in place.
    pub fn add_noise(&self, grid: &SpectralGrid, state: &mut PhaseState, rng: &mut RngStream) {
        let (u, v) = (state.u.coeffs_mut(), state.v.coeffs_mut());
        for &(a, b) in grid.pairs() {
            let [l11, l21, l22] = self.modes[a].chol;
            let g1 = complex_normal(rng);
            let g2 = complex_normal(rng);
            let du = g1 * l11;
            let dv = g1 * l21 + g2 * l22;
            u[a] += du;
            v[a] += dv;
            u[b] += du.conj();
            v[b] += dv.conj();
        }
        for &a in grid.self_conjugate() {
            let [l11, l21, l22] = self.modes[a].chol;
            let (g1, g2) = (rng.normal(), rng.normal());
            u[a].re += l11 * g1;
            v[a].re += l21 * g1 + l22 * g2;
        }
    }

    /// Fresh parabolic noise increment.
    pub fn sample_noise_field(&self, grid: &SpectralGrid, rng: &mut RngStream) -> FourierField {
        let weights: Vec<f64> = self.modes.iter().map(|s| s.chol[0]).collect();
        let mut f = FourierField::zeros(grid.m());
        fill_gaussian(grid, &weights, f.coeffs_mut(), rng);
        f
    }

    /// Adds the response to forcing `f` held constant over the step.
    pub fn add_forcing(&self, state: &mut PhaseState, forcing: &FourierField) {
        let (u, v) = (state.u.coeffs_mut(), state.v.coeffs_mut());
        for (((x, y), f), step) in u
            .iter_mut()
            .zip(v.iter_mut())
            .zip(forcing.coeffs())
            .zip(&self.modes)
        {
            *x += f * step.forcing[0];
            *y += f * step.forcing[1];
        }
    }

    pub fn add_forcing_field(&self, field: &mut FourierField, forcing: &FourierField) {
        for ((x, f), step) in field
            .coeffs_mut()
            .iter_mut()
            .zip(forcing.coeffs())
            .zip(&self.modes)
        {
            *x += f * step.forcing[0];
        }
    }
}

/// One exact-in-law step of the linear damped wave flow.
pub fn evolve_linear(
    grid: &SpectralGrid,
    state: &PhaseState,
    tables: &LinearStepTables,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    tables.expect(LinearModel::Hyperbolic)?;
    let mut next = state.clone();
    tables.propagate(&mut next);
    tables.add_noise(grid, &mut next, rng);
    Ok(next)
}

/// One exact-in-law step of the linear heat (Ornstein–Uhlenbeck) flow.
pub fn evolve_linear_field(
    grid: &SpectralGrid,
    field: &FourierField,
    tables: &LinearStepTables,
    rng: &mut RngStream,
) -> Result<FourierField> {
    tables.expect(LinearModel::Parabolic)?;
    let mut next = field.clone();
    tables.propagate_field(&mut next);
    let noise = tables.sample_noise_field(grid, rng);
    next.axpy(1.0, &noise);
    Ok(next)
}

/// Monte Carlo covariance `Γ̂_N(r)` at one grid offset.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    /// Grid offset `(Δi, Δj)`.
    pub offset: (usize, usize),
    /// Separation `|x|` on the torus (shortest representative).
    pub r: f64,
    pub estimate: Estimate,
}

/// Estimates `E[Ψ_N(t, x + y) Ψ_N(t, y)]` for the stationary stochastic
/// convolution, averaging over `y` within each sample.
///
/// Samples start from `μ⃗_1` and, when `time > 0`, are evolved with exact
/// hyperbolic steps of size `h` up to `time`.
pub fn estimate_covariance(
    grid: &SpectralGrid,
    offsets: &[(usize, usize)],
    samples: usize,
    time: f64,
    h: f64,
    seed: u64,
) -> Result<Vec<CovarianceEstimate>> {
    if samples < 100 {
        return Err(invalid("samples", "at least 100 samples required"));
    }
    let steps = if time > 0.0 { (time / h).round() as usize } else { 0 };
    let tables = if steps > 0 {
        Some(build_linear_tables(grid, h, LinearModel::Hyperbolic)?)
    } else {
        None
    };
    let m = grid.m();
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|replica| {
            let mut rng = RngStream::derive(seed, label::FIELD, replica as u64);
            let mut state = sample_pair_mu1(grid, &mut rng);
            if let Some(tables) = &tables {
                let mut noise_rng = RngStream::derive(seed, label::NOISE, replica as u64);
                for _ in 0..steps {
                    tables.propagate(&mut state);
                    tables.add_noise(grid, &mut state, &mut noise_rng);
                }
            }
            let psi = crate::fourier::inverse_transform(grid, &project(grid, &state.u));
            offsets
                .iter()
                .map(|&(di, dj)| {
                    let mut acc = crate::stats::CompensatedSum::new();
                    for i in 0..m {
                        for j in 0..m {
                            let a = psi[i * m + j];
                            let b = psi[((i + di) % m) * m + (j + dj) % m];
                            acc.add(a * b);
                        }
                    }
                    acc.value() / (m * m) as f64
                })
                .collect()
        })
        .collect();
    let spacing = 2.0 * PI / m as f64;
    Ok(offsets
        .iter()
        .enumerate()
        .map(|(k, &(di, dj))| {
            let column: Vec<f64> = per_sample.iter().map(|row| row[k]).collect();
            let wrap = |d: usize| (d.min(m - d % m)) as f64 * spacing;
            CovarianceEstimate {
                offset: (di, dj),
                r: wrap(di).hypot(wrap(dj)),
                estimate: estimate(&column),
            }
        })
        .collect())
}

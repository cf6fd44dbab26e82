//! Renormalization constants and the imaginary multiplicative chaos
//! `Θ_N = γ_N e^{iβΨ_N}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{besov_block_sups, bessel_sup_norm, forward_complex, inverse_transform, project, FourierField, GreenKernel};
use crate::gaussian::sample_mu1;
use crate::grid::{CutoffProfile, GridSpec, SpectralGrid};
use crate::rng::{label, RngStream};
use crate::stats::{complex_estimate, estimate, weighted_slope, ComplexEstimate, CompensatedSum, Estimate, SlopeFit};

/// `σ_N`, `γ_N = e^{β²σ_N/2}` for one cutoff and coupling constant β².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormConstants {
    pub n: usize,
    pub sigma_n: f64,
    pub gamma_n: f64,
    pub beta_sq: f64,
}

impl RenormConstants {
    pub fn new(n: usize, beta_sq: f64, profile: CutoffProfile) -> Self {
        let sigma_n = compute_sigma_n(n, profile);
        Self {
            n,
            sigma_n,
            gamma_n: (0.5 * beta_sq * sigma_n).exp(),
            beta_sq,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta_sq.sqrt()
    }
}

/// `σ_N = (4π²)⁻¹ Σ_n χ_N(n)² ⟨n⟩⁻²`, summed in the same order as
/// [`GreenKernel`] so that `G_N(0)` reproduces it bit for bit.
pub fn compute_sigma_n(n: usize, profile: CutoffProfile) -> f64 {
    let k = n as i64;
    let mut acc = CompensatedSum::new();
    for n1 in -k..=k {
        for n2 in -k..=k {
            let chi = profile.symbol(n1, n2, n);
            if chi > 0.0 {
                acc.add(chi * chi / (1.0 + (n1 * n1 + n2 * n2) as f64));
            }
        }
    }
    acc.value() / (4.0 * PI * PI)
}

pub fn compute_gamma_n(n: usize, beta_sq: f64, profile: CutoffProfile) -> f64 {
    (0.5 * beta_sq * compute_sigma_n(n, profile)).exp()
}

/// Grid values of `Θ_N` at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosField {
    pub values: Vec<Complex64>,
    pub constants: RenormConstants,
    pub t: f64,
}

impl ChaosField {
    /// Coefficients `∫ Θ ē_n dx`.
    pub fn coefficients(&self, grid: &SpectralGrid) -> Result<Vec<Complex64>> {
        forward_complex(grid, &self.values)
    }

    /// Spatial average `(4π²)⁻¹ ∫ Θ dx`.
    pub fn spatial_mean(&self) -> Complex64 {
        let n = self.values.len() as f64;
        let re: CompensatedSum = self.values.iter().map(|z| z.re).collect();
        let im: CompensatedSum = self.values.iter().map(|z| z.im).collect();
        Complex64::new(re.value() / n, im.value() / n)
    }
}

/// Largest `|ψ̂(n)|` with `|n| ≥ cutoff`, together with its mode.
fn out_of_band(grid: &SpectralGrid, psi: &FourierField, cutoff: usize) -> (f64, (i64, i64)) {
    let c2 = (cutoff * cutoff) as i64;
    psi.coeffs()
        .iter()
        .zip(grid.wavenumbers())
        .filter(|(_, &(a, b))| a * a + b * b >= c2)
        .map(|(c, &n)| (c.norm(), n))
        .fold((0.0, (0, 0)), |acc, x| if x.0 > acc.0 { x } else { acc })
}

/// `Θ_N(x) = γ_N exp(iβ ψ(x))` on the grid.
///
/// `psi` must already be band-limited to `|n| < N` (e.g. the output of
/// [`project`]); coefficients above `1e−10` relative to the largest one
/// outside that disc are rejected.
pub fn make_chaos(grid: &SpectralGrid, psi: &FourierField, constants: &RenormConstants, t: f64) -> Result<ChaosField> {
    let scale = psi.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    let (worst, (n1, n2)) = out_of_band(grid, psi, constants.n);
    if worst > 1e-10 * scale {
        return Err(Error::NotBandLimited {
            cutoff: constants.n,
            n1,
            n2,
            magnitude: worst,
        });
    }
    let beta = constants.beta();
    let gamma = constants.gamma_n;
    let values = inverse_transform(grid, psi)
        .into_iter()
        .map(|p| Complex64::from_polar(gamma, beta * p))
        .collect();
    Ok(ChaosField {
        values,
        constants: *constants,
        t,
    })
}

/// Stationary `Θ_N` sample built from `Ψ_N = P_N u`, `u ~ μ_1`.
pub fn sample_chaos(grid: &SpectralGrid, constants: &RenormConstants, rng: &mut RngStream) -> Result<ChaosField> {
    let psi = project(grid, &sample_mu1(grid, rng));
    make_chaos(grid, &psi, constants, 0.0)
}

/// Monte Carlo estimate of `E[Θ_N(x) conj Θ_N(0)]` at one offset.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TwoPointEstimate {
    pub offset: (usize, usize),
    pub x: (f64, f64),
    /// Real part of the estimate (the imaginary part vanishes by symmetry).
    pub estimate: Estimate,
    pub imag: Estimate,
    /// `β² G_N(x)`.
    pub log_theory: f64,
}

impl TwoPointEstimate {
    /// Delta-method z-score of `log Ê` against `β² G_N(x)`.
    pub fn log_z(&self) -> f64 {
        let log_mean = self.estimate.mean.ln();
        let se = self.estimate.std_error / self.estimate.mean;
        crate::stats::z_score(log_mean - self.log_theory, se)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosMoments {
    pub constants: RenormConstants,
    pub samples: usize,
    /// `Ê[Θ_N]` from per-sample spatial averages.
    pub mean: ComplexEstimate,
    pub two_point: Vec<TwoPointEstimate>,
}

impl ChaosMoments {
    /// `|Ê − 1| / SE`.
    pub fn mean_one_z(&self) -> f64 {
        crate::stats::z_score((self.mean.mean - 1.0).norm(), self.mean.std_error)
    }
}

/// Spatially averaged autocorrelation `M⁻² Σ_y Θ(x + y) conj Θ(y)`.
fn autocorrelation(grid: &SpectralGrid, values: &[Complex64]) -> Vec<Complex64> {
    let mut data = values.to_vec();
    grid.fft().forward(&mut data);
    for z in &mut data {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    grid.fft().inverse(&mut data);
    let m2 = grid.len() as f64;
    let scale = 1.0 / (m2 * m2);
    data.iter().map(|z| z * scale).collect()
}

/// Mean-one and two-point statistics of stationary `Θ_N` samples.
pub fn chaos_moments(
    grid: &SpectralGrid,
    constants: &RenormConstants,
    offsets: &[(usize, usize)],
    samples: usize,
    seed: u64,
) -> Result<ChaosMoments> {
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let m = grid.m();
    let per_sample: Vec<(Complex64, Vec<Complex64>)> = (0..samples)
        .into_par_iter()
        .map(|replica| {
            let mut rng = RngStream::derive(seed, label::FIELD, replica as u64);
            let theta = sample_chaos(grid, constants, &mut rng)?;
            let corr = if offsets.is_empty() {
                Vec::new()
            } else {
                let c = autocorrelation(grid, &theta.values);
                offsets.iter().map(|&(i, j)| c[(i % m) * m + j % m]).collect()
            };
            Ok((theta.spatial_mean(), corr))
        })
        .collect::<Result<_>>()?;

    let means: Vec<Complex64> = per_sample.iter().map(|(z, _)| *z).collect();
    let kernel = GreenKernel::new(constants.n, grid.profile());
    let h = grid.spacing();
    let two_point = offsets
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let re: Vec<f64> = per_sample.iter().map(|(_, c)| c[k].re).collect();
            let im: Vec<f64> = per_sample.iter().map(|(_, c)| c[k].im).collect();
            let x = (i as f64 * h, j as f64 * h);
            TwoPointEstimate {
                offset: (i, j),
                x,
                estimate: estimate(&re),
                imag: estimate(&im),
                log_theory: constants.beta_sq * kernel.eval(x),
            }
        })
        .collect();
    Ok(ChaosMoments {
        constants: *constants,
        samples,
        mean: complex_estimate(&means),
        two_point,
    })
}

/// Which `W^{−α,∞}` surrogate a scan row measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityNorm {
    /// Littlewood–Paley `B^{−α}_{∞,∞}` norm.
    Besov,
    /// Grid sup of `⟨∇⟩^{−α} Θ`.
    Bessel,
}

impl RegularityNorm {
    pub fn name(self) -> &'static str {
        match self {
            RegularityNorm::Besov => "besov",
            RegularityNorm::Bessel => "bessel",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub norm: RegularityNorm,
    pub estimate: Estimate,
}

/// Weighted regression of mean norm against `log N` for one `(α, norm)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScanTrend {
    pub alpha: f64,
    pub norm: RegularityNorm,
    pub fit: SlopeFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityScan {
    pub beta_sq: f64,
    pub samples: usize,
    pub rows: Vec<ScanRow>,
    pub trends: Vec<ScanTrend>,
}

impl RegularityScan {
    pub fn trend(&self, alpha: f64, norm: RegularityNorm) -> Option<&ScanTrend> {
        self.trends.iter().find(|t| t.alpha == alpha && t.norm == norm)
    }
}

/// Mean negative-regularity norms of stationary `Θ_N` for each `(α, N)` on
/// the default grid `M = 4N`, plus the trend of each sequence in `log N`.
///
/// `β² = 0` is allowed here (`Θ_N ≡ 1`).
pub fn chaos_regularity_scan(
    beta_sq: f64,
    alphas: &[f64],
    ns: &[usize],
    samples: usize,
    seed: u64,
    profile: CutoffProfile,
) -> Result<RegularityScan> {
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(invalid("alphas", "every alpha must be positive"));
    }
    if !(beta_sq >= 0.0) {
        return Err(invalid("beta_sq", "must be non-negative"));
    }
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let mut rows = Vec::new();
    for &n in ns {
        // The grid geometry does not depend on β; the constants carry it.
        let grid = SpectralGrid::with_profile(GridSpec::new(n, 1.0), profile)?;
        let constants = RenormConstants::new(n, beta_sq, profile);
        let norms: Vec<Vec<[f64; 2]>> = (0..samples)
            .into_par_iter()
            .map(|replica| {
                let mut rng = RngStream::derive(seed, label::FIELD, replica as u64);
                let theta = sample_chaos(&grid, &constants, &mut rng)?;
                let coeffs = theta.coefficients(&grid)?;
                let sups = besov_block_sups(&grid, &coeffs)?;
                alphas
                    .iter()
                    .map(|&a| {
                        let besov = sups
                            .iter()
                            .enumerate()
                            .map(|(j, s)| 2f64.powf(-(j as f64) * a) * s)
                            .fold(0.0, f64::max);
                        Ok([besov, bessel_sup_norm(&grid, &coeffs, a)?])
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (k, &alpha) in alphas.iter().enumerate() {
            for (slot, norm) in [RegularityNorm::Besov, RegularityNorm::Bessel].into_iter().enumerate() {
                let xs: Vec<f64> = norms.iter().map(|row| row[k][slot]).collect();
                rows.push(ScanRow {
                    alpha,
                    n,
                    m: grid.m(),
                    norm,
                    estimate: estimate(&xs),
                });
            }
        }
    }
    let mut trends = Vec::new();
    if ns.len() >= 2 {
        for &alpha in alphas {
            for norm in [RegularityNorm::Besov, RegularityNorm::Bessel] {
                let sel: Vec<&ScanRow> = rows.iter().filter(|r| r.alpha == alpha && r.norm == norm).collect();
                let xs: Vec<f64> = sel.iter().map(|r| (r.n as f64).ln()).collect();
                let ys: Vec<f64> = sel.iter().map(|r| r.estimate.mean).collect();
                let ses: Vec<f64> = sel.iter().map(|r| r.estimate.std_error).collect();
                trends.push(ScanTrend {
                    alpha,
                    norm,
                    fit: weighted_slope(&xs, &ys, &ses),
                });
            }
        }
    }
    Ok(RegularityScan {
        beta_sq,
        samples,
        rows,
        trends,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ols_slope;

    /// Brute-force `σ_N` with an independently written bridge, summed over a
    /// square strictly larger than the support.
    fn sigma_oracle(n: usize) -> f64 {
        let chi = |r: f64| -> f64 {
            if r <= 0.5 {
                1.0
            } else if r >= 1.0 {
                0.0
            } else {
                let t = 2.0 * r - 1.0;
                let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
                psi(1.0 - t) / (psi(1.0 - t) + psi(t))
            }
        };
        let k = 2 * n as i64 + 3;
        let mut total = 0.0;
        for a in -k..=k {
            for b in -k..=k {
                let r2 = (a * a + b * b) as f64;
                let c = chi(r2.sqrt() / n as f64);
                total += c * c / (1.0 + r2);
            }
        }
        total / (4.0 * PI * PI)
    }

    const SIGMA_1: f64 = 0.025330295910584444;
    const SIGMA_8: f64 = 0.27723897622568944;

    #[test]
    fn sigma_regression_values() {
        let c = CutoffProfile::Canonical;
        assert!((compute_sigma_n(1, c) - 1.0 / (4.0 * PI * PI)).abs() < 1e-16);
        assert!((compute_sigma_n(1, c) - SIGMA_1).abs() < 1e-15);
        assert!((compute_sigma_n(8, c) - SIGMA_8).abs() < 1e-14);
        for n in [1, 3, 8, 21] {
            assert!((compute_sigma_n(n, c) - sigma_oracle(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_is_monotone_and_doubles_by_log2() {
        for profile in [CutoffProfile::Canonical, CutoffProfile::Quintic] {
            let s: Vec<f64> = (1..=48).map(|n| compute_sigma_n(n, profile)).collect();
            assert!(s.windows(2).all(|w| w[1] >= w[0]), "{profile:?}");
        }
        let d = compute_sigma_n(256, CutoffProfile::Canonical) - compute_sigma_n(128, CutoffProfile::Canonical);
        assert!((d - 2f64.ln() / (2.0 * PI)).abs() < 2e-3, "{d}");
    }

    #[test]
    fn gamma_growth_exponent() {
        let c = CutoffProfile::Canonical;
        assert_eq!(compute_gamma_n(12, 0.0, c), 1.0);
        let beta_sq = PI;
        let ns = [32usize, 64, 128, 256];
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| compute_gamma_n(n, beta_sq, c).ln()).collect();
        let slope = ols_slope(&xs, &ys).slope;
        let target = beta_sq / (4.0 * PI);
        assert!((slope / target - 1.0).abs() < 0.1, "{slope} vs {target}");
        let k = RenormConstants::new(16, beta_sq, c);
        assert_eq!(k.gamma_n, (beta_sq * k.sigma_n / 2.0).exp());
    }

    fn grid(n: usize) -> std::sync::Arc<SpectralGrid> {
        SpectralGrid::new(GridSpec::new(n, PI)).unwrap()
    }

    #[test]
    fn chaos_of_zero_is_gamma() {
        let g = grid(8);
        let theta = make_chaos(&g, &FourierField::zeros(g.m()), g.constants(), 0.0).unwrap();
        for z in &theta.values {
            assert!((z - g.constants().gamma_n).norm() < 1e-15);
        }
    }

    #[test]
    fn chaos_modulus_is_gamma() {
        let g = grid(8);
        let theta = sample_chaos(&g, g.constants(), &mut RngStream::new(4, 0)).unwrap();
        let gamma = g.constants().gamma_n;
        assert!(theta.values.iter().all(|z| (z.norm() - gamma).abs() < 1e-12 * gamma));
    }

    #[test]
    fn unprojected_field_is_rejected() {
        let g = grid(8);
        let u = sample_mu1(&g, &mut RngStream::new(1, 0));
        assert!(matches!(make_chaos(&g, &u, g.constants(), 0.0), Err(Error::NotBandLimited { .. })));
        let mut f = FourierField::zeros(g.m());
        f.set_mode(8, 0, Complex64::new(1.0, 0.0));
        assert!(make_chaos(&g, &f, g.constants(), 0.0).is_err());
        let mut f = FourierField::zeros(g.m());
        f.set_mode(5, 5, Complex64::new(1.0, 0.0));
        assert!(make_chaos(&g, &f, g.constants(), 0.0).is_ok());
    }

    #[test]
    fn grid_variance_of_projected_field_is_sigma() {
        // Σ over grid modes of χ²⟨n⟩⁻² / 4π² equals σ_N once every |n| < N is on the grid.
        let g = grid(8);
        let s: f64 = g
            .cutoff_symbol()
            .iter()
            .zip(g.bracket_sq())
            .map(|(c, b)| c * c / b)
            .sum::<f64>()
            / (4.0 * PI * PI);
        assert!((s - g.constants().sigma_n).abs() < 1e-14);
    }

    #[test]
    fn moments_small_case() {
        let g = grid(8);
        let m = chaos_moments(&g, g.constants(), &[(0, 0), (1, 0), (3, 2)], 2000, 17).unwrap();
        assert!(m.mean_one_z() < 4.0, "{:?}", m.mean);
        let gamma = g.constants().gamma_n;
        // At x = 0 the correlation is |Θ|² = γ² with zero variance.
        assert!((m.two_point[0].estimate.mean - gamma * gamma).abs() < 1e-9 * gamma * gamma);
        for tp in &m.two_point[1..] {
            assert!(tp.log_z().abs() < 4.0, "{tp:?}");
        }
    }

    #[test]
    fn degenerate_scan_is_one() {
        let scan = chaos_regularity_scan(0.0, &[0.5], &[4, 8], 3, 1, CutoffProfile::Canonical).unwrap();
        for row in &scan.rows {
            assert!((row.estimate.mean - 1.0).abs() < 1e-12, "{row:?}");
        }
        assert!(chaos_regularity_scan(1.0, &[0.0], &[4], 3, 1, CutoffProfile::Canonical).is_err());
    }
}

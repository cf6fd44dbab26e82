//! Real fields on T² in the orthonormal basis `e_n(x) = (2π)⁻¹ e^{i n·x}`,
//! the smooth projector `P_N`, Sobolev-type norms and the truncated Green
//! function of `1 − Δ`.
//!
//! With this basis `û(n) = ∫ u ē_n dx = (2π / M²) · DFT[u](n)` and
//! Parseval reads `∫ |u|² dx = Σ |û(n)|²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CutoffProfile, SpectralGrid};
use crate::stats::CompensatedSum;

/// Hermitian-symmetric coefficient array of a real field on an `M × M` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    m: usize,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            coeffs: vec![Complex64::default(); m * m],
        }
    }

    pub fn from_coeffs(m: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: coeffs.len(),
            });
        }
        Ok(Self { m, coeffs })
    }

    /// The constant field `c` (coefficient `2π c` at `n = 0`).
    pub fn constant(m: usize, c: f64) -> Self {
        let mut f = Self::zeros(m);
        f.coeffs[0] = Complex64::new(2.0 * PI * c, 0.0);
        f
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    fn conj_index(&self, idx: usize) -> usize {
        let m = self.m;
        ((m - idx / m) % m) * m + (m - idx % m) % m
    }

    /// Coefficient of signed mode `(n₁, n₂)`.
    pub fn mode(&self, n1: i64, n2: i64) -> Complex64 {
        let m = self.m as i64;
        let idx = n1.rem_euclid(m) as usize * self.m + n2.rem_euclid(m) as usize;
        self.coeffs[idx]
    }

    /// Sets `û(n) = value` and `û(−n) = conj(value)`; self-conjugate modes
    /// keep only the real part.
    pub fn set_mode(&mut self, n1: i64, n2: i64, value: Complex64) {
        let m = self.m as i64;
        let idx = n1.rem_euclid(m) as usize * self.m + n2.rem_euclid(m) as usize;
        let conj = self.conj_index(idx);
        if idx == conj {
            self.coeffs[idx] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[idx] = value;
            self.coeffs[conj] = value.conj();
        }
    }

    /// Largest `|û(−n) − conj(û(n))|` over the lattice.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.conj_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Exact Hermitian projection `(û(n) + conj û(−n)) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.coeffs.len() {
            let j = self.conj_index(i);
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                    self.coeffs[i] = avg;
                    self.coeffs[j] = avg.conj();
                }
                std::cmp::Ordering::Equal => self.coeffs[i].im = 0.0,
                std::cmp::Ordering::Greater => {}
            }
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &FourierField) {
        debug_assert_eq!(self.m, other.m);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn scaled(&self, a: f64) -> FourierField {
        FourierField {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn sub(&self, other: &FourierField) -> FourierField {
        debug_assert_eq!(self.m, other.m);
        FourierField {
            m: self.m,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Multiplies every coefficient by a real symbol indexed like the grid.
    pub fn apply_symbol(&mut self, symbol: &[f64]) {
        for (c, s) in self.coeffs.iter_mut().zip(symbol) {
            *c *= *s;
        }
    }
}

fn check_len(grid: &SpectralGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: len,
        });
    }
    Ok(())
}

/// Coefficients of a real `M × M` array of point values.
pub fn forward_transform(grid: &SpectralGrid, values: &[f64]) -> Result<FourierField> {
    check_len(grid, values.len())?;
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft().forward(&mut data);
    let m = grid.m() as f64;
    let scale = 2.0 * PI / (m * m);
    for c in &mut data {
        *c *= scale;
    }
    let mut field = FourierField {
        m: grid.m(),
        coeffs: data,
    };
    field.symmetrize();
    Ok(field)
}

/// Point values of a field on the grid.
pub fn inverse_transform(grid: &SpectralGrid, field: &FourierField) -> Vec<f64> {
    let mut data = field.coeffs.clone();
    grid.fft().inverse(&mut data);
    let scale = 1.0 / (2.0 * PI);
    data.iter().map(|c| c.re * scale).collect()
}

/// Coefficients `∫ f ē_n dx` of a complex grid field.
pub fn forward_complex(grid: &SpectralGrid, values: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(grid, values.len())?;
    let mut data = values.to_vec();
    grid.fft().forward(&mut data);
    let m = grid.m() as f64;
    let scale = 2.0 * PI / (m * m);
    for c in &mut data {
        *c *= scale;
    }
    Ok(data)
}

/// Point values `Σ ĉ(n) e_n(x)` of a complex coefficient array.
pub fn inverse_complex(grid: &SpectralGrid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    grid.fft().inverse(&mut data);
    let scale = 1.0 / (2.0 * PI);
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// `(Σ_x |f(x)|² (2π/M)²)^{1/2}`.
pub fn grid_l2_norm(grid: &SpectralGrid, values: &[f64]) -> f64 {
    let s: CompensatedSum = values.iter().map(|v| v * v).collect();
    (s.value() * grid.cell_area()).sqrt()
}

/// `P_N f`: multiplies by `χ(|n| / N)`.
pub fn apply_cutoff_projector(grid: &SpectralGrid, f: &FourierField, cutoff: usize) -> FourierField {
    let mut out = f.clone();
    if cutoff == grid.cutoff() {
        out.apply_symbol(grid.cutoff_symbol());
    } else {
        let profile = grid.profile();
        for (c, &(n1, n2)) in out.coeffs.iter_mut().zip(grid.wavenumbers()) {
            *c *= profile.symbol(n1, n2, cutoff);
        }
    }
    out
}

/// `P_N f` for the grid's own cutoff.
pub fn project(grid: &SpectralGrid, f: &FourierField) -> FourierField {
    let mut out = f.clone();
    out.apply_symbol(grid.cutoff_symbol());
    out
}

/// `(Σ ⟨n⟩^{2s} |û(n)|²)^{1/2}`.
pub fn sobolev_norm(grid: &SpectralGrid, f: &FourierField, s: f64) -> f64 {
    let sum: CompensatedSum = f
        .coeffs
        .iter()
        .zip(grid.bracket_sq())
        .map(|(c, b)| b.powf(s) * c.norm_sqr())
        .collect();
    sum.value().sqrt()
}

/// Grid sup of `|⟨∇⟩^{−α} f|`, a cheap proxy for the `W^{−α,∞}` norm.
pub fn neg_sobolev_sup_norm(grid: &SpectralGrid, f: &FourierField, alpha: f64) -> Result<f64> {
    bessel_sup_norm(grid, f.coeffs(), alpha)
}

/// [`neg_sobolev_sup_norm`] for an arbitrary (complex) coefficient array.
pub fn bessel_sup_norm(grid: &SpectralGrid, coeffs: &[Complex64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(crate::error::invalid("alpha", "must be positive"));
    }
    check_len(grid, coeffs.len())?;
    let smoothed: Vec<Complex64> = coeffs
        .iter()
        .zip(grid.bracket_sq())
        .map(|(c, b)| c * b.powf(-alpha / 2.0))
        .collect();
    Ok(sup_abs(&inverse_complex(grid, &smoothed)))
}

/// Littlewood–Paley Hölder–Besov norm `max_j 2^{−jα} sup_x |Δ_j f(x)|`.
///
/// Blocks use the canonical profile: `Δ_0 = χ(|n|/2)`,
/// `Δ_j = χ(|n|/2^{j+1}) − χ(|n|/2^j)` for `j ≥ 1`, up to the first `j`
/// whose outer edge covers the whole grid.
pub fn besov_sup_norm(grid: &SpectralGrid, coeffs: &[Complex64], alpha: f64) -> Result<f64> {
    Ok(besov_block_norms(grid, coeffs, alpha)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Weighted block norms `2^{−jα} sup |Δ_j f|`, one entry per block.
pub fn besov_block_norms(grid: &SpectralGrid, coeffs: &[Complex64], alpha: f64) -> Result<Vec<f64>> {
    Ok(besov_block_sups(grid, coeffs)?
        .into_iter()
        .enumerate()
        .map(|(j, sup)| 2f64.powf(-(j as f64) * alpha) * sup)
        .collect())
}

/// Blocks with outer radius up to this are maximized off the grid.
const REFINE_RADIUS: f64 = 16.0;

/// Unweighted block sups `sup_x |Δ_j f(x)|`, one entry per block.
///
/// For blocks of outer radius ≤ 16 the grid maximum is refined off the grid
/// by direct trigonometric evaluation, so the result does not depend on the
/// grid resolution; higher blocks use the grid sup.
pub fn besov_block_sups(grid: &SpectralGrid, coeffs: &[Complex64]) -> Result<Vec<f64>> {
    check_len(grid, coeffs.len())?;
    let profile = CutoffProfile::Canonical;
    let radii: Vec<f64> = grid
        .wavenumbers()
        .iter()
        .map(|&(a, b)| ((a * a + b * b) as f64).sqrt())
        .collect();
    let max_n = radii.iter().copied().fold(0.0, f64::max);
    let mut sups = Vec::new();
    let mut j = 0u32;
    loop {
        let outer = 2f64.powi(j as i32 + 1);
        let block: Vec<Complex64> = coeffs
            .iter()
            .zip(&radii)
            .map(|(c, &r)| {
                let w = if j == 0 {
                    profile.eval(r / 2.0)
                } else {
                    profile.eval(r / outer) - profile.eval(r / 2f64.powi(j as i32))
                };
                c * w
            })
            .collect();
        let values = inverse_complex(grid, &block);
        let sup = if outer <= REFINE_RADIUS {
            refined_sup(grid, &block, &values)
        } else {
            sup_abs(&values)
        };
        sups.push(sup);
        // χ(r/outer) = 1 once outer/2 covers every grid mode.
        if outer / 2.0 >= max_n {
            break;
        }
        j += 1;
    }
    Ok(sups)
}

/// `sup |f|` of a band-limited field: pattern search from the largest grid
/// local maxima, evaluating `(2π)⁻¹ Σ c_n e^{i n·x}` directly.
fn refined_sup(grid: &SpectralGrid, coeffs: &[Complex64], values: &[Complex64]) -> f64 {
    let terms: Vec<(f64, f64, Complex64)> = coeffs
        .iter()
        .zip(grid.wavenumbers())
        .filter(|(c, _)| c.norm_sqr() > 0.0)
        .map(|(c, &(a, b))| (a as f64, b as f64, *c))
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    let eval = |x: f64, y: f64| -> f64 {
        let s: Complex64 = terms.iter().map(|&(a, b, c)| c * Complex64::cis(a * x + b * y)).sum();
        s.norm() / (2.0 * std::f64::consts::PI)
    };
    let m = grid.m();
    let abs: Vec<f64> = values.iter().map(|c| c.norm()).collect();
    let grid_max = abs.iter().copied().fold(0.0, f64::max);
    let mut candidates: Vec<(f64, usize)> = (0..abs.len())
        .filter(|&k| {
            let (i, jj) = (k / m, k % m);
            abs[k] >= 0.7 * grid_max
                && (-1i64..=1).all(|di| {
                    (-1i64..=1).all(|dj| {
                        let ni = (i as i64 + di).rem_euclid(m as i64) as usize;
                        let nj = (jj as i64 + dj).rem_euclid(m as i64) as usize;
                        abs[ni * m + nj] <= abs[k]
                    })
                })
        })
        .map(|k| (abs[k], k))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(16);
    let h = grid.spacing();
    let mut best = grid_max;
    for &(v0, k) in &candidates {
        let (mut x, mut y) = grid.point(k);
        let mut v = v0;
        let mut step = 0.5 * h;
        for _ in 0..24 {
            let mut moved = (x, y, v);
            for dx in [-1.0, 0.0, 1.0] {
                for dy in [-1.0, 0.0, 1.0] {
                    if dx == 0.0 && dy == 0.0 {
                        continue;
                    }
                    let (px, py) = (x + dx * step, y + dy * step);
                    let pv = eval(px, py);
                    if pv > moved.2 {
                        moved = (px, py, pv);
                    }
                }
            }
            if moved.2 > v {
                (x, y, v) = moved;
            } else {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}

fn sup_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Nonzero terms `(n₁, n₂, χ_N(n)² ⟨n⟩⁻²)` of the truncated Green sum.
#[derive(Clone, Debug)]
pub struct GreenKernel {
    cutoff: usize,
    terms: Vec<(f64, f64, f64)>,
}

impl GreenKernel {
    pub fn new(cutoff: usize, profile: CutoffProfile) -> Self {
        let n = cutoff as i64;
        let mut terms = Vec::new();
        for n1 in -n..=n {
            for n2 in -n..=n {
                let chi = profile.symbol(n1, n2, cutoff);
                if chi > 0.0 {
                    let w = chi * chi / (1.0 + (n1 * n1 + n2 * n2) as f64);
                    terms.push((n1 as f64, n2 as f64, w));
                }
            }
        }
        Self { cutoff, terms }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `P_N² G(x) = (4π²)⁻¹ Σ χ_N(n)² ⟨n⟩⁻² e^{i n·x}`.
    pub fn eval(&self, x: (f64, f64)) -> f64 {
        let s: CompensatedSum = self
            .terms
            .iter()
            .map(|&(n1, n2, w)| w * (n1 * x.0 + n2 * x.1).cos())
            .collect();
        s.value() / (4.0 * PI * PI)
    }
}

/// Truncated Green function `P_N² G(x)` of `1 − Δ` by direct lattice summation.
pub fn truncated_green(x: (f64, f64), cutoff: usize, profile: CutoffProfile) -> f64 {
    GreenKernel::new(cutoff, profile).eval(x)
}

//! Grid geometry on T² = [0, 2π)², the smooth frequency cutoff, and the
//! cached spectral lattice shared by every other module.
//!
//! Coefficients are stored in the DFT layout: flat index `i * M + j` holds
//! the mode `n = (n₁, n₂)` with `n₁ = i` for `i < M/2` and `i − M` otherwise
//! (likewise for `j`). The Nyquist index `M/2` is read as `−M/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::chaos::RenormConstants;
use crate::error::{Error, Result};

/// Discretization parameters of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per axis `M`; grid spacing is `2π/M`.
    pub points_per_axis: usize,
    /// Frequency cutoff `N` of the smooth projector.
    pub cutoff: usize,
    /// β².
    pub beta_sq: f64,
    /// Prefactor of the renormalized nonlinearity (and of `R_N`).
    pub coupling: f64,
}

impl GridSpec {
    /// Grid with the default resolution `M = 4N` and unit coupling.
    pub fn new(cutoff: usize, beta_sq: f64) -> Self {
        Self {
            points_per_axis: 4 * cutoff,
            cutoff,
            beta_sq,
            coupling: 1.0,
        }
    }

    pub fn with_points(mut self, points_per_axis: usize) -> Self {
        self.points_per_axis = points_per_axis;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta_sq.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.points_per_axis;
        let n = self.cutoff;
        if n == 0 {
            return Err(Error::InvalidGrid("cutoff N must be at least 1".into()));
        }
        if m == 0 || m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis M = {m} must be a positive even integer"
            )));
        }
        if m < 2 * n + 2 {
            return Err(Error::InvalidGrid(format!(
                "Nyquist invariant violated: M = {m} < 2N + 2 = {} (modes |n_i| <= N are not representable)",
                2 * n + 2
            )));
        }
        if !(self.beta_sq > 0.0) || !self.beta_sq.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "beta_sq = {} must be finite and positive",
                self.beta_sq
            )));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidGrid("coupling must be finite".into()));
        }
        Ok(())
    }
}

/// Radial profile χ of the smooth projector: `χ = 1` on `[0, 1/2]`,
/// `χ = 0` on `[1, ∞)`, non-increasing bridge in between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// C^∞ bridge `ψ(1−t) / (ψ(1−t) + ψ(t))` with `ψ(t) = exp(−1/t)`, `t = 2r − 1`.
    #[default]
    Canonical,
    /// C² quintic smoothstep `1 − (10t³ − 15t⁴ + 6t⁵)`, `t = 2r − 1`.
    Quintic,
}

impl CutoffProfile {
    pub fn eval(self, r: f64) -> f64 {
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        let t = 2.0 * r - 1.0;
        match self {
            CutoffProfile::Canonical => {
                let a = (-1.0 / (1.0 - t)).exp();
                let b = (-1.0 / t).exp();
                a / (a + b)
            }
            CutoffProfile::Quintic => 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        }
    }

    /// `χ_N(n) = χ(|n| / N)`.
    pub fn symbol(self, n1: i64, n2: i64, cutoff: usize) -> f64 {
        let r = ((n1 * n1 + n2 * n2) as f64).sqrt() / cutoff as f64;
        self.eval(r)
    }
}

/// Signed wavenumber of DFT index `k` on an `m`-point axis.
#[inline]
pub fn wavenumber(k: usize, m: usize) -> i64 {
    if k < m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// DFT index of signed wavenumber `n`.
#[inline]
pub fn dft_index(n: i64, m: usize) -> usize {
    n.rem_euclid(m as i64) as usize
}

/// Immutable spectral lattice: wavenumbers, `⟨n⟩²`, the cutoff symbol,
/// Hermitian pairing and FFT plans for one [`GridSpec`].
///
/// Shared across replicas behind an `Arc`; nothing in it is mutated after
/// construction.
pub struct SpectralGrid {
    spec: GridSpec,
    profile: CutoffProfile,
    wavenumbers: Vec<(i64, i64)>,
    bracket_sq: Vec<f64>,
    inv_bracket: Vec<f64>,
    cutoff_symbol: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    self_conjugate: Vec<usize>,
    constants: RenormConstants,
    fft: Fft2d,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("spec", &self.spec)
            .field("profile", &self.profile)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl SpectralGrid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        Self::with_profile(spec, CutoffProfile::Canonical)
    }

    pub fn with_profile(spec: GridSpec, profile: CutoffProfile) -> Result<Arc<Self>> {
        spec.validate()?;
        let m = spec.points_per_axis;
        let mut wavenumbers = Vec::with_capacity(m * m);
        let mut bracket_sq = Vec::with_capacity(m * m);
        let mut cutoff_symbol = Vec::with_capacity(m * m);
        for i in 0..m {
            let n1 = wavenumber(i, m);
            for j in 0..m {
                let n2 = wavenumber(j, m);
                wavenumbers.push((n1, n2));
                bracket_sq.push(1.0 + (n1 * n1 + n2 * n2) as f64);
                cutoff_symbol.push(profile.symbol(n1, n2, spec.cutoff));
            }
        }
        let inv_bracket = bracket_sq.iter().map(|b| 1.0 / b.sqrt()).collect();

        let mut pairs = Vec::with_capacity(m * m / 2);
        let mut self_conjugate = Vec::with_capacity(4);
        for i in 0..m {
            for j in 0..m {
                let idx = i * m + j;
                let conj = ((m - i) % m) * m + (m - j) % m;
                match idx.cmp(&conj) {
                    std::cmp::Ordering::Less => pairs.push((idx, conj)),
                    std::cmp::Ordering::Equal => self_conjugate.push(idx),
                    std::cmp::Ordering::Greater => {}
                }
            }
        }

        let constants = RenormConstants::new(spec.cutoff, spec.beta_sq, profile);
        Ok(Arc::new(Self {
            spec,
            profile,
            wavenumbers,
            bracket_sq,
            inv_bracket,
            cutoff_symbol,
            pairs,
            self_conjugate,
            constants,
            fft: Fft2d::new(m),
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn profile(&self) -> CutoffProfile {
        self.profile
    }

    /// Points per axis `M`.
    pub fn m(&self) -> usize {
        self.spec.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.m() * self.m()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoff(&self) -> usize {
        self.spec.cutoff
    }

    pub fn beta(&self) -> f64 {
        self.spec.beta()
    }

    pub fn constants(&self) -> &RenormConstants {
        &self.constants
    }

    /// Grid spacing `2π / M`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m() as f64
    }

    /// Quadrature weight of one grid cell, `(2π / M)²`.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    pub fn wavenumbers(&self) -> &[(i64, i64)] {
        &self.wavenumbers
    }

    /// `⟨n⟩² = 1 + |n|²` per flat index.
    pub fn bracket_sq(&self) -> &[f64] {
        &self.bracket_sq
    }

    /// `⟨n⟩⁻¹` per flat index.
    pub fn inv_bracket(&self) -> &[f64] {
        &self.inv_bracket
    }

    /// `χ_N(n)` for the grid's own cutoff.
    pub fn cutoff_symbol(&self) -> &[f64] {
        &self.cutoff_symbol
    }

    /// Representative Hermitian pairs `(n, −n)` with `n ≠ −n` on the grid.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Modes with `n ≡ −n (mod M)`; their coefficients are real.
    pub fn self_conjugate(&self) -> &[usize] {
        &self.self_conjugate
    }

    pub fn index_of(&self, n1: i64, n2: i64) -> usize {
        let m = self.m();
        dft_index(n1, m) * m + dft_index(n2, m)
    }

    /// Grid point `(2π i / M, 2π j / M)` of flat index `i * M + j`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let m = self.m();
        let h = self.spacing();
        ((idx / m) as f64 * h, (idx % m) as f64 * h)
    }

    pub(crate) fn fft(&self) -> &Fft2d {
        &self.fft
    }
}

/// Two-dimensional complex FFT built from row transforms and transposes.
pub(crate) struct Fft2d {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    /// Unnormalized forward DFT, `Σ_x f(x) e^{−i n·x}`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Unnormalized inverse DFT, `Σ_n f̂(n) e^{i n·x}`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let m = self.m;
        debug_assert_eq!(data.len(), m * m);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        let mut tmp = vec![Complex64::default(); m * m];
        transpose(data, &mut tmp, m);
        plan.process_with_scratch(&mut tmp, &mut scratch);
        transpose(&tmp, data, m);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const BLOCK: usize = 16;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nyquist_invariant_is_named() {
        let err = GridSpec::new(8, 1.0).with_points(8).validate().unwrap_err();
        assert!(err.to_string().contains("Nyquist"), "{err}");
        assert!(GridSpec::new(8, 1.0).with_points(18).validate().is_ok());
        assert!(GridSpec::new(8, 1.0).with_points(17).validate().is_err());
        assert!(GridSpec::new(8, 0.0).validate().is_err());
    }

    #[test]
    fn profiles_are_monotone_bridges() {
        for profile in [CutoffProfile::Canonical, CutoffProfile::Quintic] {
            assert_eq!(profile.eval(0.0), 1.0);
            assert_eq!(profile.eval(0.5), 1.0);
            assert_eq!(profile.eval(1.0), 0.0);
            let mut prev = 1.0;
            for k in 0..=1000 {
                let r = 0.5 + 0.5 * k as f64 / 1000.0;
                let v = profile.eval(r);
                assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
                prev = v;
            }
            // Continuity at the seams up to second differences.
            let h = 1e-4;
            for r0 in [0.5, 1.0] {
                let d2 = profile.eval(r0 + h) - 2.0 * profile.eval(r0) + profile.eval(r0 - h);
                assert!(d2.abs() < 1e-6, "{profile:?} at {r0}: {d2}");
            }
        }
    }

    #[test]
    fn pairing_covers_lattice() {
        let grid = SpectralGrid::new(GridSpec::new(2, 1.0).with_points(6)).unwrap();
        let covered = 2 * grid.pairs().len() + grid.self_conjugate().len();
        assert_eq!(covered, 36);
        assert_eq!(grid.self_conjugate().len(), 4);
        for &(a, b) in grid.pairs() {
            let (n1, n2) = grid.wavenumbers()[a];
            assert_eq!(grid.index_of(-n1, -n2), b);
        }
    }
}

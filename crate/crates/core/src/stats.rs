//! Small statistics toolkit: compensated accumulation, standard errors,
//! regression slopes, KS distance and the Gelman–Rubin diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<CompensatedSum>().value()
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `(self − target) / se`; infinite when the SE vanishes but the means differ.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.std_error)
    }
}

pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance (two-pass, compensated).
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64
}

pub fn estimate(xs: &[f64]) -> Estimate {
    Estimate {
        mean: mean(xs),
        std_error: (variance(xs) / xs.len() as f64).sqrt(),
    }
}

/// Complex mean with the standard error of the complex mean,
/// `sqrt(Σ|z − z̄|² / (n(n−1)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub std_error: f64,
}

pub fn complex_estimate(zs: &[Complex64]) -> ComplexEstimate {
    let n = zs.len();
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let m = Complex64::new(mean(&re), mean(&im));
    let var = if n > 1 {
        compensated_sum(zs.iter().map(|z| (z - m).norm_sqr())) / (n - 1) as f64
    } else {
        0.0
    };
    ComplexEstimate {
        mean: m,
        std_error: (var / n as f64).sqrt(),
    }
}

/// Fitted regression line with the standard error of the slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
}

impl SlopeFit {
    /// Slope not significantly positive: `slope ≤ k·SE`.
    pub fn non_positive_within(&self, k: f64) -> bool {
        self.slope <= k * self.std_error
    }

    /// Slope significantly positive: `slope > k·SE`.
    pub fn significantly_positive(&self, k: f64) -> bool {
        self.slope > k * self.std_error
    }
}

/// Ordinary least squares; the slope SE comes from the residual scatter.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> SlopeFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    );
    let dof = (n - 2.0).max(1.0);
    SlopeFit {
        slope,
        intercept,
        std_error: (rss / dof / sxx).sqrt(),
    }
}

/// Weighted least squares with known per-point standard errors; the slope SE
/// is `(Σ w (x − x̄_w)²)^{−1/2}` with `w = 1/se²`.
pub fn weighted_slope(xs: &[f64], ys: &[f64], ses: &[f64]) -> SlopeFit {
    assert!(xs.len() == ys.len() && ys.len() == ses.len());
    let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s).max(1e-300)).collect();
    let sw = compensated_sum(w.iter().copied());
    let mx = compensated_sum(w.iter().zip(xs).map(|(w, x)| w * x)) / sw;
    let my = compensated_sum(w.iter().zip(ys).map(|(w, y)| w * y)) / sw;
    let sxx = compensated_sum(w.iter().zip(xs).map(|(w, x)| w * (x - mx) * (x - mx)));
    let sxy = compensated_sum(
        w.iter()
            .zip(xs.iter().zip(ys))
            .map(|(w, (x, y))| w * (x - mx) * (y - my)),
    );
    let slope = sxy / sxx;
    SlopeFit {
        slope,
        intercept: my - slope * mx,
        std_error: (1.0 / sxx).sqrt(),
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Potential scale reduction factor R̂ over equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) as f64;
    assert!(m >= 2.0 && n >= 2.0, "need at least two chains of length two");
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n as usize])).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * compensated_sum(means.iter().map(|x| (x - grand).powi(2)));
    let w = mean(
        &chains
            .iter()
            .map(|c| variance(&c[..n as usize]))
            .collect::<Vec<_>>(),
    );
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = CompensatedSum::new();
    s.add(f(a));
    s.add(f(b));
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s.add(w * f(a + k as f64 * h));
    }
    s.value() * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1e16, 1.0, -1e16];
        xs.extend(std::iter::repeat_n(1e-3, 1000));
        assert!((compensated_sum(xs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x - 1.0).collect();
        let fit = ols_slope(&xs, &ys);
        assert!((fit.slope - 0.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!(fit.std_error < 1e-12);
    }

    #[test]
    fn weighted_slope_se_matches_formula() {
        let xs = [0.0, 1.0];
        let fit = weighted_slope(&xs, &[0.0, 1.0], &[1.0, 1.0]);
        assert!((fit.slope - 1.0).abs() < 1e-14);
        assert!((fit.std_error - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn gelman_rubin_identical_chains() {
        let c: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = gelman_rubin(&[c.clone(), c]);
        assert!(r < 1.0 + 1e-12);
    }

    #[test]
    fn simpson_gaussian() {
        let v = simpson(|x| (-x * x / 2.0).exp(), -10.0, 10.0, 2000);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }
}

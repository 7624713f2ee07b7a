//! Shared spectral primitives: triangle kernel, the logarithmic cosine
//! sum `L_N`, A-norms, and grid-based pseudomeasure-norm estimation.
//!
//! Pseudomeasure (PM) norms are suprema of Fourier transforms. For the
//! integer-supported measures used here the transform is 1-periodic, so a
//! fine grid on `[0,1)` plus one local refinement pass gives a lower
//! bound whose distance to the true sup is certified by the derivative
//! bound `2π Σ |n·c_n|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Wrap to the fundamental domain `[-1/2, 1/2)`.
#[inline]
pub fn wrap_half(t: f64) -> f64 {
    let r = t - t.round();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Wrap to `[0, 1)`.
#[inline]
pub fn wrap_unit(t: f64) -> f64 {
    let r = t.fract();
    if r < 0.0 {
        r + 1.0
    } else {
        r
    }
}

/// Distance on the torus from `t` to `0`.
#[inline]
pub fn torus_distance_to_zero(t: f64) -> f64 {
    wrap_half(t).abs()
}

/// An arc of the torus, `[start, start + len) mod 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcInterval {
    pub start: f64,
    pub len: f64,
}

impl ArcInterval {
    pub fn new(start: f64, len: f64) -> Result<ArcInterval> {
        if !(len > 0.0 && len <= 1.0) {
            return Err(Error::invalid(format!("arc length {len} outside (0,1]")));
        }
        Ok(ArcInterval {
            start: wrap_unit(start),
            len,
        })
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        if self.len >= 1.0 {
            return true;
        }
        wrap_unit(t - self.start) < self.len
    }

    pub fn midpoint(&self) -> f64 {
        wrap_unit(self.start + 0.5 * self.len)
    }
}

/// Finitely supported frequency → coefficient map.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralVector {
    entries: BTreeMap<i64, (f64, f64)>, // (re, im); keeps serde simple
}

impl SpectralVector {
    pub fn new() -> SpectralVector {
        SpectralVector::default()
    }

    pub fn add(&mut self, frequency: i64, coefficient: Complex64) {
        let e = self.entries.entry(frequency).or_insert((0.0, 0.0));
        e.0 += coefficient.re;
        e.1 += coefficient.im;
    }

    pub fn coefficient(&self, frequency: i64) -> Complex64 {
        self.entries
            .get(&frequency)
            .map(|&(re, im)| Complex64::new(re, im))
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.entries
            .iter()
            .map(|(&f, &(re, im))| (f, Complex64::new(re, im)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sum of absolute values of the coefficients (the `A`-norm).
pub fn a_norm(v: &SpectralVector) -> f64 {
    v.iter().map(|(_, c)| c.norm()).sum()
}

/// Nonnegative atoms at integer locations; `‖·‖_M` is the weight sum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: BTreeMap<i64, f64>,
}

impl AtomicMeasure {
    pub fn new() -> AtomicMeasure {
        AtomicMeasure::default()
    }

    pub fn add(&mut self, location: i64, weight: f64) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid(format!("atom weight {weight} must be >= 0")));
        }
        *self.atoms.entry(location).or_insert(0.0) += weight;
        Ok(())
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.atoms.iter().map(|(&n, &w)| (n, w))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// The triangle kernel of integral 1 supported on `[-ε, ε]`.
#[derive(Debug, Clone, Copy)]
pub struct TriangleKernel {
    eps: f64,
}

impl TriangleKernel {
    pub fn new(eps: f64) -> Result<TriangleKernel> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid(format!("triangle eps {eps} outside (0, 1/2)")));
        }
        Ok(TriangleKernel { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `f(t) = (1/ε)·max(0, 1 − |t̃|/ε)` with `t̃` the representative in
    /// `[-1/2, 1/2)`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let x = wrap_half(t).abs();
        if x >= self.eps {
            0.0
        } else {
            (1.0 - x / self.eps) / self.eps
        }
    }

    /// `f̂_0 = 1`; `f̂_j = (sin(πjε)/(πjε))²` otherwise (Fejér squares;
    /// real, nonnegative, even in `j`).
    #[inline]
    pub fn coeff(&self, j: i64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let x = PI * j as f64 * self.eps;
        let s = x.sin() / x;
        s * s
    }

    pub fn coeffs(&self, max_frequency: i64) -> Result<SpectralVector> {
        if max_frequency < 1 {
            return Err(Error::invalid("max_frequency must be >= 1".to_string()));
        }
        let mut v = SpectralVector::new();
        for j in -max_frequency..=max_frequency {
            v.add(j, Complex64::new(self.coeff(j), 0.0));
        }
        Ok(v)
    }
}

/// `L_N(t) = Σ_{n=1}^{N} cos(2πnt)/n` (exact partial sum; 0 for `N = 0`).
pub fn log_cosine_sum(t: f64, n: u64) -> f64 {
    let step = Complex64::from_polar(1.0, 2.0 * PI * wrap_half(t));
    let mut z = Complex64::new(1.0, 0.0);
    let mut sum = 0.0;
    for k in 1..=n {
        z *= step;
        sum += z.re / k as f64;
    }
    sum
}

/// Default partial-sum ladder for the envelope-constant search.
pub const DEFAULT_LN_LADDER: [u64; 4] = [10, 100, 1_000, 10_000];

/// Smallest `C` (to grid accuracy) with `L_N(t) <= log(1/|sin πt|) + C`
/// over a uniform grid on `(0,1)` and every `N` in the ladder.
///
/// `L_∞(t) = -log(2 sin πt)`, so the constant is at least `-log 2`.
pub fn log_sine_bound_constant(resolution: usize, ladder: &[u64]) -> Result<f64> {
    if resolution < 10_000 {
        return Err(Error::invalid(format!(
            "resolution {resolution} below minimum 10000"
        )));
    }
    if ladder.is_empty() {
        return Err(Error::invalid("empty ladder".to_string()));
    }
    let mut sorted = ladder.to_vec();
    sorted.sort_unstable();
    let n_max = *sorted.last().unwrap();
    let worst = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let t = (i as f64 + 0.5) / resolution as f64;
            let envelope = -(PI * t).sin().abs().ln();
            let step = Complex64::from_polar(1.0, 2.0 * PI * t);
            let mut z = Complex64::new(1.0, 0.0);
            let mut sum = 0.0;
            let mut next = 0usize;
            let mut local = f64::NEG_INFINITY;
            for k in 1..=n_max {
                z *= step;
                sum += z.re / k as f64;
                if next < sorted.len() && k == sorted[next] {
                    local = local.max(sum - envelope);
                    next += 1;
                }
            }
            local
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst)
}

/// Midpoint-rule quadrature with a fixed number of panels.
pub fn midpoint_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let sum: f64 = (0..panels).map(|i| f(a + (i as f64 + 0.5) * h)).sum();
    sum * h
}

/// A certified-resolution estimate of a transform supremum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PmEstimate {
    /// Lower bound on the supremum (best grid point after refinement).
    pub value: f64,
    pub grid_size: usize,
    /// `2π Σ |n·c_n|`, a Lipschitz constant for the transform.
    pub derivative_bound: f64,
    /// The true sup exceeds `value` by at most this amount.
    pub certified_radius: f64,
}

fn eval_transform(entries: &[(i64, Complex64)], theta: f64) -> Complex64 {
    entries
        .iter()
        .map(|&(n, c)| c * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * theta))
        .sum()
}

/// Supremum over `θ ∈ [0,1)` of `|Σ c_n e^{-2πinθ}|`, via an `M`-point
/// grid (FFT over aliased coefficients) plus golden-section refinement
/// around the best grid point.
pub fn transform_sup(entries: &[(i64, Complex64)], grid_size: usize) -> Result<PmEstimate> {
    if grid_size < 2 {
        return Err(Error::invalid("grid size must be >= 2".to_string()));
    }
    let derivative_bound: f64 = entries
        .iter()
        .map(|&(n, c)| 2.0 * PI * (n.unsigned_abs() as f64) * c.norm())
        .sum();
    if entries.is_empty() {
        return Ok(PmEstimate {
            value: 0.0,
            grid_size,
            derivative_bound: 0.0,
            certified_radius: 0.0,
        });
    }

    let m = grid_size;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for &(n, c) in entries {
        let idx = n.rem_euclid(m as i64) as usize;
        buf[idx] += c;
    }
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut buf);

    let (best_k, best_val) = buf
        .iter()
        .enumerate()
        .map(|(k, z)| (k, z.norm()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();

    // Golden-section refinement on the bracket around the best grid point.
    let theta0 = best_k as f64 / m as f64;
    let mut lo = theta0 - 1.0 / m as f64;
    let mut hi = theta0 + 1.0 / m as f64;
    let phi = 0.618_033_988_749_894_9;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval_transform(entries, x1).norm();
    let mut f2 = eval_transform(entries, x2).norm();
    for _ in 0..48 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval_transform(entries, x2).norm();
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval_transform(entries, x1).norm();
        }
    }
    let value = best_val.max(f1).max(f2);
    Ok(PmEstimate {
        value,
        grid_size: m,
        derivative_bound,
        certified_radius: derivative_bound / (2.0 * m as f64),
    })
}

/// PM-norm estimate of an atomic measure carrying a phase: the sup over
/// the frequency grid of `|Σ w_n e^{iψ(n)} e^{-2πinθ}|`. The transform is
/// 1-periodic for integer-supported measures, so the grid covers one
/// period.
pub fn pm_norm_estimate(
    measure: &AtomicMeasure,
    psi: &[f64],
    grid_size: usize,
) -> Result<PmEstimate> {
    if measure.is_empty() {
        return Ok(PmEstimate {
            value: 0.0,
            grid_size,
            derivative_bound: 0.0,
            certified_radius: 0.0,
        });
    }
    if psi.len() != measure.len() {
        return Err(Error::invalid(format!(
            "phase vector length {} does not match atom count {}",
            psi.len(),
            measure.len()
        )));
    }
    if grid_size < 16 * measure.len() {
        return Err(Error::invalid(format!(
            "grid size {grid_size} below 16 × atom count {}",
            measure.len()
        )));
    }
    let entries: Vec<(i64, Complex64)> = measure
        .iter()
        .zip(psi)
        .map(|((n, w), &p)| (n, Complex64::from_polar(w, p)))
        .collect();
    transform_sup(&entries, grid_size)
}

/// Fourier coefficients `c_k = (1/R) Σ_j g(j/R) e^{-2πijk/R}` of a
/// function sampled uniformly on the circle. Index `k` of the output runs
/// over FFT bins; bins above `R/2` alias to negative frequencies.
pub fn sampled_circle_coefficients(samples: &[Complex64]) -> Vec<Complex64> {
    let r = samples.len();
    let mut buf = samples.to_vec();
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(r).process(&mut buf);
    let scale = 1.0 / r as f64;
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

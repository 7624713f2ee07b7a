//! The positive martingale `Y_N`, its exact second moment, the
//! closed-form bound on that moment, and the non-density witness search.
//!
//! `Y_N = ∫_I ∏_{n≤N} (f(nt))^{ξ_n} exp(−(α/n)(f(nt)−1)) dt` with `f` the
//! triangle kernel and `ξ_n` the Poisson multiplicities of a harmonic(α)
//! sample. `E[Y_N] = |I|`; boundedness of the second moment forces mass
//! onto t-values whose orbit `Λt` concentrates near 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fourier::{self, ArcInterval, TriangleKernel};
use crate::sampler::{self, RandomSet};
use crate::weights::{make_weights, WeightKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleTrace {
    pub checkpoints: Vec<u64>,
    /// `Y_N` at each checkpoint; nonnegative.
    pub values: Vec<f64>,
    pub interval: ArcInterval,
    pub alpha: f64,
    pub eps: f64,
    /// Quadrature step actually used (≤ the requested `h`).
    pub step: f64,
}

impl MartingaleTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("checkpoint,value\n");
        for (n, v) in self.checkpoints.iter().zip(&self.values) {
            out.push_str(&format!("{n},{v}\n"));
        }
        out
    }
}

fn validate_trace_inputs(
    alpha: f64,
    eps: f64,
    checkpoints: &[u64],
    h: f64,
    horizon: u64,
) -> Result<u64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be positive")));
    }
    TriangleKernel::new(eps)?;
    if checkpoints.is_empty() {
        return Err(Error::invalid("no checkpoints".to_string()));
    }
    let n_max = *checkpoints.iter().max().unwrap();
    if n_max > horizon {
        return Err(Error::invalid(format!(
            "checkpoint {n_max} exceeds horizon {horizon}"
        )));
    }
    // The sharpest integrand feature is f(N t), varying at scale ε/N;
    // coarser steps are rejected rather than silently accepted.
    if n_max > 0 && !(h <= eps / (8.0 * n_max as f64)) {
        return Err(Error::invalid(format!(
            "step {h} coarser than eps/(8 max N) = {}",
            eps / (8.0 * n_max as f64)
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step {h} must be positive")));
    }
    Ok(n_max)
}

/// Evaluate `Y_N` at each checkpoint by midpoint quadrature over `I`.
///
/// The product over `n` is accumulated sequentially per quadrature point;
/// a zero factor is absorbing, so the scan stops early once the running
/// product vanishes.
pub fn y_trace(
    set: &RandomSet,
    alpha: f64,
    eps: f64,
    interval: ArcInterval,
    checkpoints: &[u64],
    h: f64,
) -> Result<MartingaleTrace> {
    let n_max = validate_trace_inputs(alpha, eps, checkpoints, h, set.horizon)?;
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();

    let kernel = TriangleKernel::new(eps)?;
    let panels = (interval.len / h).ceil().max(1.0) as usize;
    let dt = interval.len / panels as f64;

    let sums: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|i| {
            let t = interval.start + (i as f64 + 0.5) * dt;
            let mut contrib = vec![0.0; cps.len()];
            let mut value = 1.0f64;
            let mut next = 0usize;
            while next < cps.len() && cps[next] == 0 {
                contrib[next] = value;
                next += 1;
            }
            for n in 1..=n_max {
                let f = kernel.eval(n as f64 * t);
                let xi = set.multiplicity(n);
                if xi > 0 {
                    value *= f.powi(xi as i32);
                }
                value *= (-(alpha / n as f64) * (f - 1.0)).exp();
                if value == 0.0 {
                    break; // absorbing along the trajectory
                }
                while next < cps.len() && cps[next] == n {
                    contrib[next] = value;
                    next += 1;
                }
            }
            contrib
        })
        // Indexed collect + sequential fold keeps the float summation
        // order independent of thread scheduling.
        .collect::<Vec<Vec<f64>>>()
        .into_iter()
        .fold(vec![0.0; cps.len()], |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        });

    let values: Vec<f64> = sums.iter().map(|s| s * dt).collect();
    Ok(MartingaleTrace {
        checkpoints: cps,
        values,
        interval,
        alpha,
        eps,
        step: dt,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanIdentityReport {
    pub mean: f64,
    pub stderr: f64,
    /// `|I|`, the exact expectation at every `N`.
    pub target: f64,
    pub within_three_stderr: bool,
    pub seeds: u64,
    pub n: u64,
}

/// Monte Carlo check of `E[Y_N] = |I|` over harmonic(α) Poisson samples.
pub fn mean_identity_check(
    alpha: f64,
    eps: f64,
    interval: ArcInterval,
    n: u64,
    seeds: u64,
    master_seed: u64,
) -> Result<MeanIdentityReport> {
    if seeds == 0 {
        return Err(Error::invalid("need at least one seed".to_string()));
    }
    let target = interval.len;
    if n == 0 {
        return Ok(MeanIdentityReport {
            mean: target,
            stderr: 0.0,
            target,
            within_three_stderr: true,
            seeds,
            n,
        });
    }
    let w = make_weights(WeightKind::Harmonic { alpha }, n)?;
    let h = eps / (8.0 * n as f64);
    let values: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let seed = crate::rng::seed_for_trial(master_seed, trial);
            let set = sampler::sample_poisson(&w, seed);
            y_trace(&set, alpha, eps, interval, &[n], h)
                .map(|tr| tr.values[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / seeds as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (seeds as f64 - 1.0).max(1.0);
    let stderr = (var / seeds as f64).sqrt();
    Ok(MeanIdentityReport {
        mean,
        stderr,
        target,
        within_three_stderr: (mean - target).abs() <= 3.0 * stderr,
        seeds,
        n,
    })
}

/// `E[Y_N²] = ∬_{I×I} exp(α Σ_{n≤N} u(ns)·u(nt)/n) ds dt`, where
/// `u(x) = Σ_{0<|j|≤J} f̂_j cos(2πjx)`.
///
/// The double sum over frequency pairs factors through `u` because
/// `Σ_{jk≠0} f̂_j f̂_k L_N(js+kt) = Σ_{n≤N} (1/n)(Σ_j f̂_j e(njs))(Σ_k f̂_k e(nkt))`
/// and each inner sum is real by evenness of `f̂`. This turns the
/// quadrature into rank-one updates of an m×m matrix: `O(m²N)` instead of
/// `O(m²J²)` direct evaluation.
pub fn second_moment_exact(
    alpha: f64,
    eps: f64,
    interval: ArcInterval,
    n: u64,
    max_frequency: i64,
    step: f64,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be positive")));
    }
    let kernel = TriangleKernel::new(eps)?;
    if !(step > 0.0) {
        return Err(Error::invalid(format!("step {step} must be positive")));
    }
    let s_target = (1.0 / eps - 1.0) * (1.0 / eps - 1.0);
    let s_truncated = truncated_coefficient_sum(&kernel, max_frequency);
    if s_truncated < 0.99 * s_target {
        return Err(Error::invalid(format!(
            "max_frequency {max_frequency} captures only {s_truncated:.4} of S = {s_target:.4}"
        )));
    }
    if n == 0 {
        return Ok(interval.len * interval.len);
    }

    let panels = (interval.len / step).ceil().max(1.0) as usize;
    let dt = interval.len / panels as f64;
    let coeffs: Vec<f64> = (1..=max_frequency).map(|j| kernel.coeff(j)).collect();

    // u(n·t_i) for all panels, one n at a time; rank-one accumulate.
    let points: Vec<f64> = (0..panels)
        .map(|i| interval.start + (i as f64 + 0.5) * dt)
        .collect();
    let mut phase_sum = vec![0.0f64; panels * panels];
    let mut u = vec![0.0f64; panels];
    for nn in 1..=n {
        u.par_iter_mut().zip(&points).for_each(|(ui, &t)| {
            // Rotation recurrence for Σ_j f̂_j cos(2πj·n·t).
            let theta = 2.0 * std::f64::consts::PI * fourier::wrap_half(nn as f64 * t);
            let (sin_t, cos_t) = theta.sin_cos();
            let (mut c, mut s) = (1.0f64, 0.0f64);
            let mut acc = 0.0;
            for &fj in &coeffs {
                let c_next = c * cos_t - s * sin_t;
                s = s * cos_t + c * sin_t;
                c = c_next;
                acc += fj * c;
            }
            *ui = 2.0 * acc;
        });
        let inv_n = 1.0 / nn as f64;
        phase_sum
            .par_chunks_mut(panels)
            .zip(&u)
            .for_each(|(row, &ui)| {
                let scale = inv_n * ui;
                for (x, &uj) in row.iter_mut().zip(&u) {
                    *x += scale * uj;
                }
            });
    }
    // Exponentiate in parallel, sum sequentially (deterministic order).
    let exps: Vec<f64> = phase_sum.par_iter().map(|&p| (alpha * p).exp()).collect();
    Ok(exps.iter().sum::<f64>() * dt * dt)
}

fn truncated_coefficient_sum(kernel: &TriangleKernel, max_frequency: i64) -> f64 {
    // Σ_{0<|j|,|k|≤J} f̂_j f̂_k = (2 Σ_{j=1}^{J} f̂_j)².
    let half: f64 = (1..=max_frequency).map(|j| kernel.coeff(j)).sum();
    (2.0 * half) * (2.0 * half)
}

/// Default frequency truncation for the exact second moment.
pub fn default_max_frequency(eps: f64) -> i64 {
    (40.0 / eps).ceil() as i64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondMomentReport {
    /// Quadrature value of the double integral, when computed.
    pub exact_value: Option<f64>,
    /// `e^{αSC} ∫_𝕋 |sin πt|^{−αS} dt`; infinite when the condition fails.
    pub bound_value: f64,
    /// Closed-form `S = (1/ε − 1)²`.
    pub condition_sum: f64,
    /// Truncated `Σ_{0<|j|,|k|≤J} f̂_j f̂_k` at the default `J`.
    pub truncated_sum: f64,
    /// `α·S < 1`, the integrability condition.
    pub condition_flag: bool,
    /// The envelope constant `C` used in the bound.
    pub log_sine_constant: f64,
}

/// `∫_0^1 |sin πt|^{−γ} dt` for `γ < 1`, handling the endpoint
/// singularities by the substitution `t = a·v^{1/(1−γ)}` (which absorbs
/// the power law exactly and leaves a smooth factor `(sin πt / (πt))^{−γ}`
/// to midpoint quadrature).
pub fn sin_power_integral(gamma: f64) -> Result<f64> {
    if !(gamma < 1.0) {
        return Err(Error::invalid(format!(
            "exponent {gamma} not integrable (needs gamma < 1)"
        )));
    }
    if gamma <= 0.0 {
        // No singularity; plain midpoint.
        return Ok(fourier::midpoint_quadrature(
            |t| (std::f64::consts::PI * t).sin().abs().powf(-gamma),
            0.0,
            1.0,
            200_000,
        ));
    }
    // Symmetry about 1/2: integral = 2 ∫_0^{1/2}.
    let a = 0.25f64;
    let smooth = |t: f64| {
        let x = std::f64::consts::PI * t;
        (x.sin() / x).powf(-gamma) * std::f64::consts::PI.powf(-gamma)
    };
    let p = 1.0 / (1.0 - gamma);
    let singular = a.powf(1.0 - gamma) * p
        * fourier::midpoint_quadrature(|v| smooth(a * v.powf(p)), 0.0, 1.0, 100_000);
    let regular = fourier::midpoint_quadrature(
        |t| (std::f64::consts::PI * t).sin().powf(-gamma),
        a,
        0.5,
        100_000,
    );
    Ok(2.0 * (singular + regular))
}

/// Evaluate the closed-form bound on `E[Y_N²]` (uniform in `N`).
pub fn second_moment_bound(alpha: f64, eps: f64, c: f64) -> Result<SecondMomentReport> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be positive")));
    }
    let kernel = TriangleKernel::new(eps)?;
    let s = (1.0 / eps - 1.0) * (1.0 / eps - 1.0);
    let truncated = truncated_coefficient_sum(&kernel, default_max_frequency(eps));
    let gamma = alpha * s;
    let (flag, bound) = if gamma < 1.0 {
        ((true), (gamma * c).exp() * sin_power_integral(gamma)?)
    } else {
        (false, f64::INFINITY)
    };
    Ok(SecondMomentReport {
        exact_value: None,
        bound_value: bound,
        condition_sum: s,
        truncated_sum: truncated,
        condition_flag: flag,
        log_sine_constant: c,
    })
}

/// Number of members `n ≤ N` of `Λ` whose orbit point `nt` lies outside
/// `[−ε, ε]` on the torus.
pub fn exception_count(set: &RandomSet, eps: f64, n: u64, t: f64) -> u64 {
    set.members
        .iter()
        .take_while(|&&(m, _)| m <= n)
        .filter(|&&(m, _)| fourier::torus_distance_to_zero(m as f64 * t) > eps)
        .count() as u64
}

/// Scan a uniform t-grid for points concentrating `Λt` in `[−ε, ε]`;
/// returns the `keep` grid points with the fewest exceptions, best first
/// (ties broken by smaller `t`).
pub fn nondensity_witness_search(
    set: &RandomSet,
    eps: f64,
    n: u64,
    t_grid_size: u64,
    keep: usize,
) -> Result<Vec<(f64, u64)>> {
    if t_grid_size < n {
        return Err(Error::invalid(format!(
            "t grid size {t_grid_size} below N = {n}"
        )));
    }
    if n > set.horizon {
        return Err(Error::invalid(format!(
            "N {n} exceeds horizon {}",
            set.horizon
        )));
    }
    let mut scored: Vec<(f64, u64)> = (0..t_grid_size)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / t_grid_size as f64;
            (t, exception_count(set, eps, n, t))
        })
        .collect();
    scored.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.partial_cmp(&b.0).unwrap()));
    scored.truncate(keep);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Source;
    use crate::weights::{make_weights, WeightKind};

    fn arc(start: f64, len: f64) -> ArcInterval {
        ArcInterval::new(start, len).unwrap()
    }

    #[test]
    fn y_zero_is_interval_length() {
        let set = RandomSet::empty(10, 0, Source::Poisson);
        let tr = y_trace(&set, 0.1, 0.3, arc(0.2, 0.1), &[0], 1e-3).unwrap();
        assert!((tr.values[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_set_gives_positive_value_matching_direct_quadrature() {
        let (alpha, eps, n) = (0.1, 0.3, 20u64);
        let interval = arc(0.1, 0.15);
        let set = RandomSet::empty(n, 0, Source::Poisson);
        let h = eps / (8.0 * n as f64);
        let tr = y_trace(&set, alpha, eps, interval, &[n], h).unwrap();
        assert!(tr.values[0] > 0.0);

        // Same midpoint rule at the same panel count: values must agree
        // to rounding.
        let panels = (interval.len / tr.step).round() as usize;
        let kernel = TriangleKernel::new(eps).unwrap();
        let direct = fourier::midpoint_quadrature(
            |t| {
                let s: f64 = (1..=n)
                    .map(|m| -(alpha / m as f64) * (kernel.eval(m as f64 * t) - 1.0))
                    .sum();
                s.exp()
            },
            interval.start,
            interval.start + interval.len,
            panels,
        );
        assert!((tr.values[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn selected_n_with_orbit_off_support_kills_y() {
        // I = [0.3, 0.31), ε = 0.1: with 1 ∈ Λ, f(t) = 0 across I.
        let set = RandomSet::from_members(5, 0, Source::Poisson, vec![(1, 1)]).unwrap();
        let tr = y_trace(&set, 0.2, 0.1, arc(0.3, 0.01), &[1, 5], 0.1 / 40.0).unwrap();
        assert_eq!(tr.values, vec![0.0, 0.0]); // zero is absorbing
    }

    #[test]
    fn trace_values_nonnegative_and_csv_shape() {
        let w = make_weights(WeightKind::Harmonic { alpha: 0.3 }, 50).unwrap();
        let set = sampler::sample_poisson(&w, 9);
        let tr = y_trace(&set, 0.3, 0.25, arc(0.0, 0.2), &[10, 25, 50], 0.25 / 400.0).unwrap();
        assert!(tr.values.iter().all(|&v| v >= 0.0));
        assert_eq!(tr.to_csv().lines().count(), 4);
    }

    #[test]
    fn coarse_step_and_bad_checkpoint_rejected() {
        let set = RandomSet::empty(100, 0, Source::Poisson);
        let i = arc(0.0, 0.1);
        assert!(y_trace(&set, 0.1, 0.3, i, &[100], 0.01).is_err());
        assert!(y_trace(&set, 0.1, 0.3, i, &[200], 1e-5).is_err());
        assert!(y_trace(&set, 0.1, 0.3, i, &[], 1e-5).is_err());
    }

    #[test]
    fn mean_identity_at_zero_and_small_n() {
        let i = arc(0.45, 0.1);
        let r = mean_identity_check(0.05, 0.3, i, 0, 10, 1).unwrap();
        assert_eq!(r.mean, 0.1);
        assert_eq!(r.stderr, 0.0);

        // Desk-scale version; the acceptance suite runs N = 200 × 2000 seeds.
        let r = mean_identity_check(0.05, 0.3, i, 50, 400, 20_260_823).unwrap();
        assert!(r.within_three_stderr, "mean {} ± {}", r.mean, r.stderr);
    }

    #[test]
    fn second_moment_trivial_and_cauchy_schwarz() {
        let i = arc(0.0, 0.1);
        let v0 = second_moment_exact(0.05, 0.3, i, 0, 134, 1e-3).unwrap();
        assert!((v0 - 0.01).abs() < 1e-12);

        let v = second_moment_exact(0.05, 0.3, i, 50, 134, 0.3 / 400.0).unwrap();
        assert!(v >= 0.01 - 1e-9, "second moment {v} below |I|^2");
    }

    #[test]
    fn second_moment_nondecreasing_in_n() {
        let i = arc(0.0, 0.1);
        let mut prev = 0.0;
        for n in [50u64, 100, 200, 400] {
            let v = second_moment_exact(0.05, 0.3, i, n, 134, 1e-3).unwrap();
            assert!(v >= prev - 1e-12, "N={n}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn second_moment_rejects_insufficient_truncation() {
        let i = arc(0.0, 0.1);
        assert!(second_moment_exact(0.05, 0.3, i, 10, 2, 1e-3).is_err());
    }

    #[test]
    fn bound_report_closed_forms() {
        let r = second_moment_bound(0.05, 0.25, 0.0).unwrap();
        assert!((r.condition_sum - 9.0).abs() < 1e-12);
        assert!(r.condition_flag); // αS = 0.45
        // Γ((1−γ)/2)/(√π Γ(1−γ/2)) at γ = 0.45 with C = 0.
        assert!((r.bound_value - 1.549_785_5).abs() < 1e-4, "{}", r.bound_value);
        assert!((r.truncated_sum - 9.0).abs() / 9.0 < 0.01);

        let r = second_moment_bound(0.2, 0.25, 0.0).unwrap(); // αS = 1.8
        assert!(!r.condition_flag);
        assert!(r.bound_value.is_infinite());
    }

    #[test]
    fn sin_power_integral_matches_closed_form() {
        for (g, v) in [(0.45, 1.549_785_5), (0.2, 1.171_092_0), (0.9, 6.797_014_0)] {
            let got = sin_power_integral(g).unwrap();
            assert!((got - v).abs() / v < 1e-4, "gamma {g}: {got}");
        }
        assert!((sin_power_integral(0.0).unwrap() - 1.0).abs() < 1e-6);
        assert!(sin_power_integral(1.0).is_err());
    }

    #[test]
    fn bound_scales_with_constant() {
        let r0 = second_moment_bound(0.05, 0.25, 0.0).unwrap();
        let r1 = second_moment_bound(0.05, 0.25, 1.0).unwrap();
        assert!((r1.bound_value / r0.bound_value - (0.45f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn witness_t_zero_has_no_exceptions() {
        let w = make_weights(WeightKind::Harmonic { alpha: 1.0 }, 200).unwrap();
        let set = sampler::sample_poisson(&w, 4);
        assert_eq!(exception_count(&set, 0.1, 200, 0.0), 0);
        let best = nondensity_witness_search(&set, 0.1, 200, 400, 3).unwrap();
        assert_eq!(best[0], (0.0, 0));
    }

    #[test]
    fn witness_powers_of_two() {
        // Λ = {2^k : k ≤ 10}, t = 2^{-5}: 2^k t ≡ 0 for k ≥ 5, so the only
        // possible exceptions have k < 5.
        let members: Vec<(u64, u64)> = (0..=10).map(|k| (1u64 << k, 1)).collect();
        let set = RandomSet::from_members(1 << 10, 0, Source::Poisson, members).unwrap();
        let t = 1.0 / 32.0;
        let c = exception_count(&set, 0.05, 1 << 10, t);
        let low: u64 = (0..5)
            .filter(|&k| fourier::torus_distance_to_zero((1u64 << k) as f64 * t) > 0.05)
            .count() as u64;
        assert_eq!(c, low);
        assert!(c <= 5);
    }

    #[test]
    fn witness_grid_must_cover_n() {
        let set = RandomSet::empty(100, 0, Source::Poisson);
        assert!(nondensity_witness_search(&set, 0.1, 100, 50, 3).is_err());
    }
}

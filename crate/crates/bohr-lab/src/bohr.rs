//! Density probes in the Bohr group: orbits `nt mod 1`, hit
//! probabilities, the 6-step grid procedure, finite sub-basic
//! neighborhoods, and the multidimensional-generator variant.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fourier::{wrap_unit, ArcInterval};
use crate::rng::{self, Stream, DOMAIN_UNIFORM};
use crate::sampler::{self, RandomSet};
use crate::stats;
use crate::weights::WeightSequence;
use crate::{Error, Result};

/// Irrational angles used in orbit experiments, given by their continued
/// fractions. Floating-point `t` is ultimately rational, so orbits use an
/// explicit high-precision rational convergent and exact modular
/// arithmetic instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedIrrational {
    /// √2 − 1 = [0; 2, 2, 2, …]
    Sqrt2Minus1,
    /// √3 − 1 = [0; 1, 2, 1, 2, …]
    Sqrt3Minus1,
    /// φ − 1 = [0; 1, 1, 1, …]
    GoldenMean,
    /// e − 2 = [0; 1, 2, 1, 1, 4, 1, 1, 6, …]
    EMinus2,
}

impl NamedIrrational {
    fn cf_term(&self, i: usize) -> u128 {
        match self {
            NamedIrrational::Sqrt2Minus1 => 2,
            NamedIrrational::Sqrt3Minus1 => {
                if i % 2 == 0 {
                    1
                } else {
                    2
                }
            }
            NamedIrrational::GoldenMean => 1,
            NamedIrrational::EMinus2 => match i % 3 {
                1 => 2 * (i as u128 / 3 + 1),
                _ => 1,
            },
        }
    }

    /// First convergent `p/q` with `q >= min_denominator` (exact CF
    /// recurrence; error < 1/q²).
    pub fn convergent(&self, min_denominator: u64) -> Result<RationalAngle> {
        let limit: u128 = 1 << 62;
        if min_denominator as u128 >= limit {
            return Err(Error::capacity(format!(
                "denominator request {min_denominator} too large for exact orbits"
            )));
        }
        let (mut p_prev, mut q_prev): (u128, u128) = (1, 0);
        let (mut p, mut q): (u128, u128) = (0, 1); // the leading a_0 = 0 term
        let mut i = 0usize;
        while q < min_denominator as u128 {
            let a = self.cf_term(i);
            let p_next = a * p + p_prev;
            let q_next = a * q + q_prev;
            if q_next >= limit {
                return Err(Error::capacity(format!(
                    "convergent denominator overflow before reaching {min_denominator}"
                )));
            }
            p_prev = p;
            q_prev = q;
            p = p_next;
            q = q_next;
            i += 1;
        }
        RationalAngle::new(p as u64, q as u64)
    }
}

/// Angle `num/den ∈ [0, 1)` with exact orbit arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalAngle {
    pub num: u64,
    pub den: u64,
}

impl RationalAngle {
    pub fn new(num: u64, den: u64) -> Result<RationalAngle> {
        if den == 0 || den >= (1 << 62) {
            return Err(Error::invalid(format!("denominator {den} out of range")));
        }
        Ok(RationalAngle {
            num: num % den,
            den,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `nt mod 1` as an exact rational, returned as f64 `(n·num mod den)/den`.
    pub fn orbit_point(&self, n: u64) -> f64 {
        let r = (n as u128 * self.num as u128) % self.den as u128;
        r as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitReport {
    pub t: f64,
    pub interval: ArcInterval,
    pub horizon: u64,
    pub first_hit: Option<u64>,
    pub hit_count: u64,
}

/// Scan members `n <= N` in order for orbit points landing in `I`.
pub fn orbit_hit(set: &RandomSet, t: &RationalAngle, interval: ArcInterval, n: u64) -> Result<OrbitReport> {
    if n > set.horizon {
        return Err(Error::invalid(format!("N {n} exceeds horizon {}", set.horizon)));
    }
    let mut first_hit = None;
    let mut hit_count = 0;
    for m in set.ns().take_while(|&m| m <= n) {
        if interval.contains(t.orbit_point(m)) {
            first_hit.get_or_insert(m);
            hit_count += 1;
        }
    }
    Ok(OrbitReport {
        t: t.value(),
        interval,
        horizon: n,
        first_hit,
        hit_count,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Empirical `P(Λ_N t ∩ I ≠ ∅)` over Bernoulli samples with a 95% Wilson
/// interval. Only the integers whose orbit point lands in `I` can produce
/// a hit, so inclusion draws are restricted to those candidates; the
/// restriction agrees with a full sample because draws are keyed per `n`.
pub fn hit_probability(
    w: &WeightSequence,
    t: &RationalAngle,
    interval: ArcInterval,
    n: u64,
    trials: u64,
    master_seed: u64,
) -> Result<HitEstimate> {
    if trials < 100 {
        return Err(Error::invalid(format!("trials {trials} below minimum 100")));
    }
    if n > w.horizon() {
        return Err(Error::invalid(format!(
            "N {n} exceeds weight horizon {}",
            w.horizon()
        )));
    }
    let varpi = crate::weights::bernoulli_params(w);
    let candidates: Vec<(u64, f64)> = (1..=n)
        .filter(|&m| interval.contains(t.orbit_point(m)))
        .map(|m| (m, varpi[(m - 1) as usize]))
        .collect();
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let seed = rng::seed_for_trial(master_seed, trial);
            candidates
                .iter()
                .any(|&(m, p)| sampler::bernoulli_inclusion(p, seed, m))
        })
        .count() as u64;
    let (ci_low, ci_high) = stats::wilson_ci(hits, trials)?;
    Ok(HitEstimate {
        estimate: hits as f64 / trials as f64,
        ci_low,
        ci_high,
        hits,
        trials,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub tau: f64,
    /// Unimodular target value.
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub eta: f64,
}

impl Constraint {
    pub fn new(tau: f64, zeta: Complex64, eta: f64) -> Result<Constraint> {
        if (zeta.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("zeta must be unimodular, |zeta| = {}", zeta.norm())));
        }
        if !(eta > 0.0) {
            return Err(Error::invalid(format!("eta {eta} must be positive")));
        }
        Ok(Constraint {
            tau: wrap_unit(tau),
            zeta_re: zeta.re,
            zeta_im: zeta.im,
            eta,
        })
    }

    /// `|e^{2πinτ} − ζ| < η`.
    pub fn admits(&self, n: u64) -> bool {
        let theta = 2.0 * std::f64::consts::PI * wrap_unit(n as f64 * self.tau);
        let z = Complex64::from_polar(1.0, theta) - Complex64::new(self.zeta_re, self.zeta_im);
        z.norm() < self.eta
    }
}

/// A finite intersection of sub-basic sets `U(τ, η, ζ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BohrNeighborhood {
    pub constraints: Vec<Constraint>,
}

impl BohrNeighborhood {
    pub fn new(constraints: Vec<Constraint>) -> Result<BohrNeighborhood> {
        if constraints.is_empty() {
            return Err(Error::invalid("neighborhood needs at least one constraint".to_string()));
        }
        Ok(BohrNeighborhood { constraints })
    }

    pub fn contains(&self, n: u64) -> bool {
        self.constraints.iter().all(|c| c.admits(n))
    }
}

/// First member of `Λ ∩ U` with `n <= N`, scanning in order.
pub fn bohr_neighborhood_hit(set: &RandomSet, u: &BohrNeighborhood, n: u64) -> Option<u64> {
    set.ns().take_while(|&m| m <= n).find(|&m| u.contains(m))
}

/// First member whose whole coordinate orbit lands in the box.
pub fn multidim_orbit_hit(
    set: &RandomSet,
    t: &[RationalAngle],
    boxes: &[ArcInterval],
    n: u64,
) -> Result<OrbitReport> {
    if t.is_empty() || t.len() != boxes.len() {
        return Err(Error::invalid(format!(
            "generator dimension {} must match box dimension {} and be >= 1",
            t.len(),
            boxes.len()
        )));
    }
    if n > set.horizon {
        return Err(Error::invalid(format!("N {n} exceeds horizon {}", set.horizon)));
    }
    let mut first_hit = None;
    let mut hit_count = 0;
    for m in set.ns().take_while(|&m| m <= n) {
        if t.iter()
            .zip(boxes)
            .all(|(ti, bi)| bi.contains(ti.orbit_point(m)))
        {
            first_hit.get_or_insert(m);
            hit_count += 1;
        }
    }
    Ok(OrbitReport {
        t: t[0].value(),
        interval: boxes[0],
        horizon: n,
        first_hit,
        hit_count,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridProcedureReport {
    pub alpha: f64,
    pub interval: ArcInterval,
    pub d: f64,
    pub k: u64,
    pub delta: f64,
    /// Inner interval at distance `d` from both endpoints of `I`.
    pub inner_interval: ArcInterval,
    /// Sup-error of the degree-`k` Fourier truncation of the triangle
    /// minorant of `𝟙_J`, sampled on a fine grid.
    pub minorant_truncation_error: f64,
    /// `(N, ∫_G P(Λ_N t ∩ J = ∅) dt)` per ladder point.
    pub ladder: Vec<(u64, f64)>,
    pub beta_hat: f64,
    pub r_squared: f64,
    /// Horizon used for the offset/grid-sum step.
    pub grid_sum_n: u64,
    /// `M = ceil(grid_sum_n / d)`.
    pub grid_modulus: u64,
    /// Chosen offset (argmin over 64 deterministic candidates).
    pub theta: f64,
    pub grid_sum: f64,
    /// Average grid sum over 64 random offsets, for comparison.
    pub random_offset_mean: f64,
    /// `1/M`; covering radius of the grid, always <= d.
    pub covering_radius: f64,
}

/// `P(Λ_N t ∩ J = ∅)` for a Poisson harmonic(α) selection, in closed
/// form: the count of orbit landings in `J` is Poisson with mean
/// `Σ_{n<=N, nt ∈ J} α/n`.
fn exact_miss_probability(alpha: f64, t: f64, j: &ArcInterval, n: u64) -> f64 {
    let mut rate = 0.0;
    for m in 1..=n {
        if j.contains(wrap_unit(m as f64 * t)) {
            rate += alpha / m as f64;
        }
    }
    (-rate).exp()
}

fn in_g(t: f64, k: u64, delta: f64) -> bool {
    (1..=k).all(|j| (std::f64::consts::PI * j as f64 * t).sin().abs() > delta)
}

fn grid_sum_at_offset(
    alpha: f64,
    j: &ArcInterval,
    theta: f64,
    m_grid: u64,
    k: u64,
    delta: f64,
    n: u64,
) -> f64 {
    let terms: Vec<f64> = (0..m_grid)
        .into_par_iter()
        .map(|m| {
            let t = wrap_unit(theta + m as f64 / m_grid as f64);
            if in_g(t, k, delta) {
                exact_miss_probability(alpha, t, j, n)
            } else {
                0.0
            }
        })
        .collect();
    terms.iter().sum() // sequential sum: order independent of scheduling
}

/// The 6-step grid procedure: inner interval, triangle minorant and its
/// degree-`k` truncation, the open set `G`, the miss-probability integral
/// over `G` across an `N` ladder with a log-log decay fit, and the
/// offset-grid sum at the chosen `ϑ`.
#[allow(clippy::too_many_arguments)]
pub fn grid_procedure(
    alpha: f64,
    interval: ArcInterval,
    d: f64,
    k: u64,
    delta: f64,
    ladder: &[u64],
    trials: u64,
    grid_sum_n: u64,
    master_seed: u64,
) -> Result<GridProcedureReport> {
    if !(alpha * interval.len > 1.0) {
        return Err(Error::invalid(format!(
            "need alpha·|I| > 1, got {}",
            alpha * interval.len
        )));
    }
    if !(d > 0.0 && d < interval.len / 2.0) {
        return Err(Error::invalid(format!("d {d} outside (0, |I|/2)")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid(format!("delta {delta} outside (0, 1/2)")));
    }
    if k < 1 || ladder.len() < 2 || trials == 0 || grid_sum_n == 0 {
        return Err(Error::invalid("k >= 1, ladder >= 2 points, trials and grid_sum_n positive".to_string()));
    }

    // Step 1: J at distance d from the endpoints of I.
    let inner = ArcInterval::new(interval.start + d, interval.len - 2.0 * d)?;

    // Steps 2-3: triangle minorant of 𝟙_J and its degree-k truncation.
    // The minorant peaks at 1 on J's midpoint and vanishes at J's ends;
    // its coefficients are (|J|/2)·Fejér², shifted to the midpoint.
    let half = inner.len / 2.0;
    let mid = inner.midpoint();
    let coeff = |j: i64| -> f64 {
        if j == 0 {
            return half;
        }
        let x = std::f64::consts::PI * j as f64 * half;
        half * (x.sin() / x).powi(2)
    };
    let minorant = |t: f64| -> f64 {
        let x = crate::fourier::wrap_half(t - mid).abs();
        (1.0 - x / half).max(0.0)
    };
    let truncation_error = (0..20_000)
        .map(|i| {
            let t = i as f64 / 20_000.0;
            let series: f64 = coeff(0)
                + 2.0
                    * (1..=k as i64)
                        .map(|j| coeff(j) * (2.0 * std::f64::consts::PI * j as f64 * (t - mid)).cos())
                        .sum::<f64>();
            (series - minorant(t)).abs()
        })
        .fold(0.0f64, f64::max);

    // Step 4: ∫_G P(Λ_N t ∩ J = ∅) dt by Monte Carlo over t, exact in ω.
    let ladder_estimates: Vec<(u64, f64)> = ladder
        .iter()
        .map(|&n| {
            let terms: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut s = Stream::keyed(master_seed, DOMAIN_UNIFORM, i);
                    let t = s.next_f64();
                    if in_g(t, k, delta) {
                        exact_miss_probability(alpha, t, &inner, n)
                    } else {
                        0.0
                    }
                })
                .collect();
            (n, terms.iter().sum::<f64>() / trials as f64)
        })
        .collect();

    // Zero estimates (no mass observed) are clamped to the continuity
    // correction 1/(2·trials) before logs; positive exact probabilities
    // are kept as-is, however small.
    let clamp = 1.0 / (2.0 * trials as f64);
    let xs: Vec<f64> = ladder_estimates.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = ladder_estimates
        .iter()
        .map(|&(_, e)| if e > 0.0 { e.ln() } else { clamp.ln() })
        .collect();
    let fit = stats::linear_fit(&xs, &ys)?;
    let beta_hat = -fit.slope;

    // Step 5: M = N/d and the offset choice. 64 deterministic candidate
    // offsets spanning one grid cell; argmin of the grid sum, ties to the
    // smallest ϑ.
    let m_grid = (grid_sum_n as f64 / d).ceil() as u64;
    let candidates: Vec<f64> = (0..64).map(|i| i as f64 / 64.0 / m_grid as f64).collect();
    let sums: Vec<f64> = candidates
        .iter()
        .map(|&th| grid_sum_at_offset(alpha, &inner, th, m_grid, k, delta, grid_sum_n))
        .collect();
    let (best_idx, _) = sums
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
        .unwrap();
    let random_mean = {
        let total: f64 = (0..64u64)
            .map(|i| {
                let mut s = Stream::keyed(master_seed, DOMAIN_UNIFORM, u64::MAX - i);
                let th = s.next_f64() / m_grid as f64;
                grid_sum_at_offset(alpha, &inner, th, m_grid, k, delta, grid_sum_n)
            })
            .sum();
        total / 64.0
    };

    Ok(GridProcedureReport {
        alpha,
        interval,
        d,
        k,
        delta,
        inner_interval: inner,
        minorant_truncation_error: truncation_error,
        ladder: ladder_estimates,
        beta_hat,
        r_squared: fit.r_squared,
        grid_sum_n,
        grid_modulus: m_grid,
        theta: candidates[best_idx],
        grid_sum: sums[best_idx],
        random_offset_mean: random_mean,
        covering_radius: 1.0 / m_grid as f64,
    })
}

//! Deterministic weight sequences `w_n` parameterizing the random selection.
//!
//! The selection probability of `n` is `ϖ_n = 1 − e^{−w_n}`; everything
//! downstream (samplers, martingale, density probes) is driven by a
//! [`WeightSequence`]. Regime classification (`n·w_n` bounded versus
//! growing) is heuristic metadata only and is never consumed by a
//! correctness-bearing operation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on materialized horizons (memory bound).
pub const MAX_HORIZON: u64 = 100_000_000;

/// Named growth catalog for weights with `n·w_n → ∞`.
///
/// Kept as a closed catalog rather than arbitrary closures so that weight
/// specs stay serializable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GrowthRate {
    /// `w_n = n^{−1+δ}` for `δ ∈ (0, 1)`.
    Power { delta: f64 },
    /// `w_n = α·log(n+1)/n`.
    LogOverN { alpha: f64 },
    /// `w_n = log log(n+3) / n` — grows, but barely.
    LogLogOverN,
}

impl GrowthRate {
    fn validate(&self) -> Result<()> {
        match *self {
            GrowthRate::Power { delta } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::invalid(format!("power delta {delta} outside (0,1)")));
                }
            }
            GrowthRate::LogOverN { alpha } => {
                if alpha <= 0.0 {
                    return Err(Error::invalid(format!("growing alpha {alpha} must be > 0")));
                }
            }
            GrowthRate::LogLogOverN => {}
        }
        Ok(())
    }

    fn value(&self, n: u64) -> f64 {
        let x = n as f64;
        match *self {
            GrowthRate::Power { delta } => x.powf(delta - 1.0),
            GrowthRate::LogOverN { alpha } => alpha * (x + 1.0).ln() / x,
            GrowthRate::LogLogOverN => (x + 3.0).ln().ln() / x,
        }
    }
}

/// The parameter family of a weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum WeightKind {
    /// `w_n = α/n` exactly.
    Harmonic { alpha: f64 },
    /// One of the growth catalog entries.
    Growing { rate: GrowthRate },
    /// `w_n = sparse_value` on powers of `sparse_base`, `background_α/n`
    /// elsewhere. The regularity counterexample: `limsup n·w_n = ∞` but
    /// `lim n·w_n` does not exist.
    MixedCounterexample {
        sparse_value: f64,
        sparse_base: u64,
        background_alpha: f64,
    },
    /// Explicit finite list, `values[n-1] = w_n`.
    Table { values: Vec<f64> },
}

impl WeightKind {
    fn validate(&self, horizon: u64) -> Result<()> {
        match self {
            WeightKind::Harmonic { alpha } => {
                if *alpha <= 0.0 {
                    return Err(Error::invalid(format!("harmonic alpha {alpha} must be > 0")));
                }
            }
            WeightKind::Growing { rate } => rate.validate()?,
            WeightKind::MixedCounterexample {
                sparse_value,
                sparse_base,
                background_alpha,
            } => {
                if !(*sparse_value > 0.0 && *sparse_value < 1.0) {
                    return Err(Error::invalid(format!(
                        "sparse_value {sparse_value} outside (0,1)"
                    )));
                }
                if *sparse_base < 3 {
                    return Err(Error::invalid(format!("sparse_base {sparse_base} must be >= 3")));
                }
                if *background_alpha <= 0.0 {
                    return Err(Error::invalid("background_alpha must be > 0".to_string()));
                }
            }
            WeightKind::Table { values } => {
                if values.len() as u64 != horizon {
                    return Err(Error::invalid(format!(
                        "table length {} does not match horizon {horizon}",
                        values.len()
                    )));
                }
                if values.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::invalid("table weights must be finite and >= 0".to_string()));
                }
            }
        }
        Ok(())
    }
}

/// A fully materialized weight sequence `w_1..w_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    kind: WeightKind,
    horizon: u64,
    values: Vec<f64>,
}

/// Serializable form of a weight sequence: `{kind, params, N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub kind: WeightKind,
    #[serde(rename = "N")]
    pub horizon: u64,
}

impl WeightSpec {
    pub fn materialize(&self) -> Result<WeightSequence> {
        make_weights(self.kind.clone(), self.horizon)
    }
}

/// Construct `w_1..w_N` for the given kind.
pub fn make_weights(kind: WeightKind, horizon: u64) -> Result<WeightSequence> {
    if horizon == 0 {
        return Err(Error::invalid("horizon N must be >= 1".to_string()));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::capacity(format!(
            "horizon {horizon} exceeds cap {MAX_HORIZON}"
        )));
    }
    kind.validate(horizon)?;
    let values = match &kind {
        WeightKind::Harmonic { alpha } => (1..=horizon).map(|n| alpha / n as f64).collect(),
        WeightKind::Growing { rate } => (1..=horizon).map(|n| rate.value(n)).collect(),
        WeightKind::MixedCounterexample {
            sparse_value,
            sparse_base,
            background_alpha,
        } => {
            let mut values: Vec<f64> =
                (1..=horizon).map(|n| background_alpha / n as f64).collect();
            let mut p = *sparse_base;
            while p <= horizon {
                values[(p - 1) as usize] = *sparse_value;
                match p.checked_mul(*sparse_base) {
                    Some(next) => p = next,
                    None => break,
                }
            }
            values
        }
        WeightKind::Table { values } => values.clone(),
    };
    Ok(WeightSequence {
        kind,
        horizon,
        values,
    })
}

impl WeightSequence {
    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `w_n`, 1-based.
    pub fn value(&self, n: u64) -> f64 {
        self.values[(n - 1) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> WeightSpec {
        WeightSpec {
            kind: self.kind.clone(),
            horizon: self.horizon,
        }
    }

    /// Build directly from explicit values (kind recorded as a table).
    pub fn from_values(values: Vec<f64>) -> Result<WeightSequence> {
        let horizon = values.len() as u64;
        make_weights(WeightKind::Table { values }, horizon)
    }
}

/// Selection probabilities `ϖ_n = 1 − e^{−w_n}` elementwise.
///
/// Uses `expm1` so that `ϖ_n/w_n → 1` holds to full precision for tiny
/// weights.
pub fn bernoulli_params(w: &WeightSequence) -> Vec<f64> {
    w.values.iter().map(|&x| -(-x).exp_m1()).collect()
}

/// Heuristic regime verdict for a weight sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeVerdict {
    SidonRegime,
    AnalyticityRegime,
    Irregular,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    /// Max of `n·w_n` over the tail window.
    pub limsup_estimate: f64,
    /// Min of `n·w_n` over the tail window.
    pub liminf_estimate: f64,
    pub verdict: RegimeVerdict,
}

/// Classify a weight sequence from finite-window evidence.
///
/// The analyticity condition is growth of `n·w_n` across checkpoints: the
/// window minimum at each checkpoint must exceed the previous window's
/// minimum. The Sidon condition is `max n·w_n <= bound` on the tail
/// window. The verdict is metadata, never a correctness input.
pub fn classify_regime(
    w: &WeightSequence,
    tail_start: u64,
    bound: f64,
    growth_checkpoints: &[u64],
) -> Result<RegimeReport> {
    let n_max = w.horizon;
    if tail_start >= n_max || tail_start == 0 {
        return Err(Error::invalid(format!(
            "tail window [{tail_start}, {n_max}] is empty"
        )));
    }
    let nw = |n: u64| n as f64 * w.value(n);
    let mut limsup_estimate = f64::NEG_INFINITY;
    let mut liminf_estimate = f64::INFINITY;
    for n in tail_start..=n_max {
        let v = nw(n);
        limsup_estimate = limsup_estimate.max(v);
        liminf_estimate = liminf_estimate.min(v);
    }

    // Window minima of n·w_n between consecutive checkpoints (last window
    // runs to the horizon).
    let mut cps: Vec<u64> = growth_checkpoints
        .iter()
        .copied()
        .filter(|&c| c >= 1 && c < n_max)
        .collect();
    cps.sort_unstable();
    cps.dedup();
    let mut window_mins = Vec::new();
    for (i, &c) in cps.iter().enumerate() {
        let end = if i + 1 < cps.len() { cps[i + 1] - 1 } else { n_max };
        let mut m = f64::INFINITY;
        for n in c..=end {
            m = m.min(nw(n));
        }
        window_mins.push(m);
    }
    let growing = window_mins.len() >= 2
        && window_mins
            .windows(2)
            .all(|p| p[1] > p[0] * (1.0 + 1e-9));

    let verdict = if growing {
        RegimeVerdict::AnalyticityRegime
    } else if limsup_estimate <= bound {
        RegimeVerdict::SidonRegime
    } else {
        RegimeVerdict::Irregular
    };
    Ok(RegimeReport {
        limsup_estimate,
        liminf_estimate,
        verdict,
    })
}

/// Classification with the default window policy: tail `[N/2, N]`, bound
/// `10 ×` the median of `n·w_n`, checkpoints at `N/8, N/4, N/2`.
pub fn classify_default(w: &WeightSequence) -> Result<RegimeReport> {
    let n = w.horizon;
    let mut nw: Vec<f64> = (1..=n).map(|k| k as f64 * w.value(k)).collect();
    nw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = nw[nw.len() / 2];
    let bound = 10.0 * median.max(f64::MIN_POSITIVE);
    let tail_start = (n / 2).max(1);
    let cps = [(n / 8).max(1), (n / 4).max(2), (n / 2).max(3)];
    classify_regime(w, tail_start, bound, &cps)
}

/// Split `w` into `(θ·w, (1−θ)·w)`; the halves sum back to `w` exactly.
///
/// Kinds with a linear scale parameter stay in-family; everything else
/// degrades to a table.
pub fn split(w: &WeightSequence, theta: f64) -> Result<(WeightSequence, WeightSequence)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("theta {theta} outside (0,1)")));
    }
    let first: Vec<f64> = w.values.iter().map(|&x| theta * x).collect();
    let second: Vec<f64> = w
        .values
        .iter()
        .zip(&first)
        .map(|(&x, &a)| x - a)
        .collect();
    let kind_of = |factor: f64, values: &Vec<f64>| -> WeightKind {
        match &w.kind {
            WeightKind::Harmonic { alpha } => WeightKind::Harmonic {
                alpha: alpha * factor,
            },
            WeightKind::Growing {
                rate: GrowthRate::LogOverN { alpha },
            } => WeightKind::Growing {
                rate: GrowthRate::LogOverN {
                    alpha: alpha * factor,
                },
            },
            _ => WeightKind::Table {
                values: values.clone(),
            },
        }
    };
    let ka = kind_of(theta, &first);
    let kb = kind_of(1.0 - theta, &second);
    Ok((
        WeightSequence {
            kind: ka,
            horizon: w.horizon,
            values: first,
        },
        WeightSequence {
            kind: kb,
            horizon: w.horizon,
            values: second,
        },
    ))
}

//! Realizations `Λ_w(ω)` of the random selection.
//!
//! Two equivalent constructions: Poisson multiplicities `ξ_n` with mean
//! `w_n`, or Bernoulli inclusions with probability `ϖ_n = 1 − e^{−w_n}`.
//! Both key the draw for each `n` on `(seed, n)` alone, so truncations at
//! different horizons are nested restrictions of one realization.

use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream, DOMAIN_BERNOULLI, DOMAIN_POISSON};
use crate::weights::WeightSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Poisson,
    Bernoulli,
    Union,
}

/// One realization up to a horizon: the selected integers with their
/// multiplicities (all 1 for Bernoulli sources).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSet {
    pub horizon: u64,
    pub seed: u64,
    pub source: Source,
    /// Strictly increasing in `n`; every multiplicity >= 1.
    pub members: Vec<(u64, u64)>,
    /// Set on unions whose operands shared a seed; the splitting law
    /// requires independent operands.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overlapping_seeds: bool,
}

impl RandomSet {
    pub fn empty(horizon: u64, seed: u64, source: Source) -> RandomSet {
        RandomSet {
            horizon,
            seed,
            source,
            members: Vec::new(),
            overlapping_seeds: false,
        }
    }

    /// Build from an explicit member list (test and construction helper).
    pub fn from_members(horizon: u64, seed: u64, source: Source, members: Vec<(u64, u64)>) -> Result<RandomSet> {
        for w in members.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("members must be strictly increasing".to_string()));
            }
        }
        if members.iter().any(|&(n, m)| n == 0 || n > horizon || m == 0) {
            return Err(Error::invalid("member out of range or zero multiplicity".to_string()));
        }
        Ok(RandomSet {
            horizon,
            seed,
            source,
            members,
            overlapping_seeds: false,
        })
    }

    /// Number of members `n <= limit`.
    pub fn count_leq(&self, limit: u64) -> u64 {
        self.members.partition_point(|&(n, _)| n <= limit) as u64
    }

    /// Multiplicity `ξ_n` (0 when not selected).
    pub fn multiplicity(&self, n: u64) -> u64 {
        match self.members.binary_search_by_key(&n, |&(m, _)| m) {
            Ok(i) => self.members[i].1,
            Err(_) => 0,
        }
    }

    pub fn ns(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.iter().map(|&(n, _)| n)
    }

    /// Compact CSV form: header then one `n,multiplicity` row per member.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,multiplicity\n");
        for &(n, m) in &self.members {
            out.push_str(&format!("{n},{m}\n"));
        }
        out
    }
}

/// Poisson multiplicity of a single `n`, independent of horizon.
pub fn poisson_multiplicity(w_n: f64, seed: u64, n: u64) -> u64 {
    let mut s = Stream::keyed(seed, DOMAIN_POISSON, n);
    rng::poisson(w_n, &mut s)
}

/// Bernoulli inclusion of a single `n` with probability `varpi_n`.
pub fn bernoulli_inclusion(varpi_n: f64, seed: u64, n: u64) -> bool {
    let mut s = Stream::keyed(seed, DOMAIN_BERNOULLI, n);
    s.next_f64() < varpi_n
}

/// Draw `Λ = {n : ξ_n >= 1}` with independent `ξ_n ~ Poisson(w_n)`.
pub fn sample_poisson(w: &WeightSequence, seed: u64) -> RandomSet {
    let mut members = Vec::new();
    for n in 1..=w.horizon() {
        let xi = poisson_multiplicity(w.value(n), seed, n);
        if xi >= 1 {
            members.push((n, xi));
        }
    }
    RandomSet {
        horizon: w.horizon(),
        seed,
        source: Source::Poisson,
        members,
        overlapping_seeds: false,
    }
}

/// Draw `Λ = {n : β_n = 1}` with `P(β_n = 1) = 1 − e^{−w_n}`.
pub fn sample_bernoulli(w: &WeightSequence, seed: u64) -> RandomSet {
    let varpi = crate::weights::bernoulli_params(w);
    let mut members = Vec::new();
    for n in 1..=w.horizon() {
        if bernoulli_inclusion(varpi[(n - 1) as usize], seed, n) {
            members.push((n, 1));
        }
    }
    RandomSet {
        horizon: w.horizon(),
        seed,
        source: Source::Bernoulli,
        members,
        overlapping_seeds: false,
    }
}

/// Union of two realizations: member sets unite, multiplicities add.
///
/// This is the sampling side of the splitting law: if `w = w′ + w″`, the
/// union of independent samples of `w′` and `w″` has the law of a sample
/// of `w`.
pub fn union(a: &RandomSet, b: &RandomSet) -> Result<RandomSet> {
    if a.horizon != b.horizon {
        return Err(Error::HorizonMismatch(a.horizon, b.horizon));
    }
    let mut members = Vec::with_capacity(a.members.len() + b.members.len());
    let (mut i, mut j) = (0, 0);
    while i < a.members.len() || j < b.members.len() {
        let next = match (a.members.get(i), b.members.get(j)) {
            (Some(&(na, ma)), Some(&(nb, mb))) => {
                if na < nb {
                    i += 1;
                    (na, ma)
                } else if nb < na {
                    j += 1;
                    (nb, mb)
                } else {
                    i += 1;
                    j += 1;
                    (na, ma + mb)
                }
            }
            (Some(&(na, ma)), None) => {
                i += 1;
                (na, ma)
            }
            (None, Some(&(nb, mb))) => {
                j += 1;
                (nb, mb)
            }
            (None, None) => unreachable!(),
        };
        members.push(next);
    }
    Ok(RandomSet {
        horizon: a.horizon,
        seed: a.seed,
        source: Source::Union,
        members,
        overlapping_seeds: a.seed == b.seed || a.overlapping_seeds || b.overlapping_seeds,
    })
}

/// `E|Λ ∩ [1, N]| = Σ_{n<=N} (1 − e^{−w_n})`.
pub fn expected_count(w: &WeightSequence, n: u64) -> Result<f64> {
    if n > w.horizon() {
        return Err(Error::invalid(format!(
            "N {n} exceeds weight horizon {}",
            w.horizon()
        )));
    }
    Ok(w.values()[..n as usize]
        .iter()
        .map(|&x| -(-x).exp_m1())
        .sum())
}

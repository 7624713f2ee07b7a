//! Counter-based deterministic random streams.
//!
//! Every random decision in the crate is keyed by `(master seed, domain,
//! index)`, so the inclusion draw for integer `n` never depends on the
//! horizon: extending a sample from `N` to `2N` leaves the first `N`
//! draws untouched, which makes the truncations `Λ_N` nested restrictions
//! of a single realization.

use statrs::function::gamma::ln_gamma;

/// Weyl increment from SplitMix64.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Injective trial-index to seed mapping (composition of bijections).
#[inline]
pub(crate) fn seed_for_trial(master_seed: u64, trial: u64) -> u64 {
    mix64(master_seed.wrapping_add(mix64(trial)))
}

/// Domain tags keep the per-n streams of different samplers independent.
pub(crate) const DOMAIN_POISSON: u64 = 0x50;
pub(crate) const DOMAIN_BERNOULLI: u64 = 0x42;
pub(crate) const DOMAIN_UNIFORM: u64 = 0x55;

/// A small keyed stream: SplitMix64 sequence whose starting state is a
/// hash of `(master, domain, index)`.
pub(crate) struct Stream {
    state: u64,
}

impl Stream {
    pub fn keyed(master: u64, domain: u64, index: u64) -> Self {
        Stream {
            state: mix64(master ^ mix64(domain.wrapping_add(mix64(index)))),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Poisson draw. Inversion below rate 10 (one uniform per draw, exact for
/// the tiny rates dominating harmonic weights), Hörmann's transformed
/// rejection (PTRS) above.
pub(crate) fn poisson(rate: f64, s: &mut Stream) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    if rate < 10.0 {
        let u = s.next_f64();
        let mut k = 0u64;
        let mut p = (-rate).exp();
        let mut cum = p;
        while u > cum {
            k += 1;
            p *= rate / k as f64;
            cum += p;
            if k > 1_000 {
                break; // cum has saturated numerically
            }
        }
        k
    } else {
        ptrs(rate, s)
    }
}

fn ptrs(mu: f64, s: &mut Stream) -> u64 {
    let b = 0.931 + 2.53 * mu.sqrt();
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = s.next_f64() - 0.5;
        let mut v = s.next_f64();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        v = v * inv_alpha / (a / (us * us) + b);
        if v.ln() <= k * mu.ln() - mu - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

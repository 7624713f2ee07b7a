//! Experiment implementations behind [`super::run`]: each arm produces
//! named CSV tables plus a JSON summary, using only `(spec, master_seed)`
//! as inputs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{seed_stream, ExperimentSpec, PsiSpec};
use crate::fourier::DEFAULT_LN_LADDER;
use crate::sampler::{self, Source};
use crate::sidon::{self, SidonVerdictParams, DEFAULT_BOUNDED_SUPPORT};
use crate::stats;
use crate::weights::{classify_default, split, WeightSpec};
use crate::{analyticity, bohr, martingale, Error, Result};

type Outcome = (BTreeMap<String, String>, Value);

pub(super) fn execute(spec: &ExperimentSpec, master_seed: u64) -> Result<Outcome> {
    match spec {
        ExperimentSpec::Sample { weights, source } => sample(weights, *source, master_seed),
        ExperimentSpec::Qi {
            weights,
            checkpoints,
        } => qi(weights, checkpoints.as_deref(), master_seed),
        ExperimentSpec::Counting {
            weights,
            checkpoints,
            seeds,
        } => counting(weights, checkpoints, *seeds, master_seed),
        ExperimentSpec::Martingale {
            alpha,
            eps,
            interval,
            n,
            seeds,
        } => martingale_exp(*alpha, *eps, *interval, *n, *seeds, master_seed),
        ExperimentSpec::SecondMoment {
            alpha,
            eps,
            interval,
            ladder,
            step,
            log_sine_constant,
        } => second_moment(*alpha, *eps, *interval, ladder, *step, *log_sine_constant),
        ExperimentSpec::Witness {
            weights,
            eps,
            n,
            t_grid_size,
            keep,
        } => witness(weights, *eps, *n, *t_grid_size, *keep, master_seed),
        ExperimentSpec::Orbit {
            weights,
            irrational,
            min_denominator,
            interval,
            n,
        } => orbit(weights, *irrational, *min_denominator, *interval, *n, master_seed),
        ExperimentSpec::HitLadder {
            weights,
            irrational,
            min_denominator,
            interval,
            ladder,
            trials,
        } => hit_ladder(
            weights,
            *irrational,
            *min_denominator,
            *interval,
            ladder,
            *trials,
            master_seed,
        ),
        ExperimentSpec::DensityGrid {
            alpha,
            interval,
            d,
            k,
            delta,
            ladder,
            trials,
            grid_sum_n,
        } => {
            let report = bohr::grid_procedure(
                *alpha,
                *interval,
                *d,
                *k,
                *delta,
                ladder,
                *trials,
                *grid_sum_n,
                master_seed,
            )?;
            let mut csv = String::from("N,integral_estimate\n");
            for &(n, e) in &report.ladder {
                csv.push_str(&format!("{n},{e}\n"));
            }
            Ok((table("ladder", csv), serde_json::to_value(&report)?))
        }
        ExperimentSpec::PmDecay { a, q, m_range } => {
            let fit = analyticity::pm_decay_profile(*a, m_range, *q)?;
            let summary = json!({
                "c": fit.c,
                "base_constant": fit.base_constant,
                "r_squared": fit.r_squared,
            });
            Ok((table("decay", fit.to_csv()), summary))
        }
        ExperimentSpec::Concentration {
            weights,
            f_lo,
            f_hi,
            psi,
            c,
            big_c,
            trials,
        } => concentration(weights, *f_lo, *f_hi, psi, *c, *big_c, *trials, master_seed),
        ExperimentSpec::SplittingLaw {
            weights,
            seeds,
            theta,
        } => splitting_law(weights, *seeds, *theta, master_seed),
    }
}

fn table(name: &str, csv: String) -> BTreeMap<String, String> {
    let mut t = BTreeMap::new();
    t.insert(name.to_string(), csv);
    t
}

fn sample(weights: &WeightSpec, source: Source, master_seed: u64) -> Result<Outcome> {
    let w = weights.materialize()?;
    let set = match source {
        Source::Poisson => sampler::sample_poisson(&w, master_seed),
        Source::Bernoulli => sampler::sample_bernoulli(&w, master_seed),
        Source::Union => {
            return Err(Error::invalid(
                "sample source must be poisson or bernoulli".to_string(),
            ))
        }
    };
    let summary = json!({
        "set": serde_json::to_value(&set)?,
        "count": set.members.len(),
        "expected_count": sampler::expected_count(&w, w.horizon())?,
        "regime": serde_json::to_value(classify_default(&w)?)?,
    });
    Ok((table("members", set.to_csv()), summary))
}

fn default_checkpoints(n: u64) -> Result<Vec<u64>> {
    if n < 8 {
        return Err(Error::invalid(format!(
            "horizon {n} too small for default checkpoints (need >= 8)"
        )));
    }
    let mut cps = vec![n / 4, n / 2, n];
    let mut p = 10u64;
    while p < n {
        cps.push(p);
        p = p.saturating_mul(10);
    }
    cps.sort_unstable();
    cps.dedup();
    Ok(cps)
}

fn qi(weights: &WeightSpec, checkpoints: Option<&[u64]>, master_seed: u64) -> Result<Outcome> {
    let w = weights.materialize()?;
    let set = sampler::sample_poisson(&w, master_seed);
    let cps = match checkpoints {
        Some(c) => c.to_vec(),
        None => default_checkpoints(w.horizon())?,
    };
    let members: Vec<u64> = set.ns().collect();
    let relation = if members.is_empty() {
        None
    } else {
        sidon::find_relation(&members, DEFAULT_BOUNDED_SUPPORT)?
    };
    let verdict = sidon::sidon_verdict(&set, &cps, &SidonVerdictParams::default())?;
    let mut csv = String::from("checkpoint,count,ratio\n");
    for ((n, c), r) in verdict
        .profile
        .checkpoints
        .iter()
        .zip(&verdict.profile.counts)
        .zip(&verdict.profile.ratios)
    {
        csv.push_str(&format!("{n},{c},{r}\n"));
    }
    let summary = json!({
        "relation": relation.as_ref().map(|r| r.to_string()),
        "verdict": serde_json::to_value(&verdict)?,
        "member_count": members.len(),
    });
    Ok((table("profile", csv), summary))
}

fn counting(
    weights: &WeightSpec,
    checkpoints: &[u64],
    seeds: u64,
    master_seed: u64,
) -> Result<Outcome> {
    if seeds == 0 {
        return Err(Error::invalid("seeds must be >= 1".to_string()));
    }
    let w = weights.materialize()?;
    let profiles: Vec<(u64, sidon::CountingProfile)> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let seed = seed_stream(master_seed, trial);
            let set = sampler::sample_poisson(&w, seed);
            Ok((seed, sidon::counting_profile(&set, checkpoints)?))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("trial,seed,checkpoint,count,ratio\n");
    let k = profiles[0].1.checkpoints.len();
    let mut ratio_sums = vec![0.0f64; k];
    for (trial, (seed, p)) in profiles.iter().enumerate() {
        for ((n, c), r) in p.checkpoints.iter().zip(&p.counts).zip(&p.ratios) {
            csv.push_str(&format!("{trial},{seed},{n},{c},{r}\n"));
        }
        for (s, r) in ratio_sums.iter_mut().zip(&p.ratios) {
            *s += r;
        }
    }
    let mean_ratios: BTreeMap<String, f64> = profiles[0]
        .1
        .checkpoints
        .iter()
        .zip(&ratio_sums)
        .map(|(&n, &s)| (n.to_string(), s / seeds as f64))
        .collect();
    Ok((
        table("counts", csv),
        json!({ "mean_ratio_by_checkpoint": mean_ratios, "seeds": seeds }),
    ))
}

fn martingale_exp(
    alpha: f64,
    eps: f64,
    interval: crate::fourier::ArcInterval,
    n: u64,
    seeds: u64,
    master_seed: u64,
) -> Result<Outcome> {
    if seeds == 0 || n == 0 {
        return Err(Error::invalid("need seeds >= 1 and N >= 1".to_string()));
    }
    let w = crate::weights::make_weights(crate::weights::WeightKind::Harmonic { alpha }, n)?;
    let h = eps / (8.0 * n as f64);
    let values: Vec<(u64, f64)> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let seed = seed_stream(master_seed, trial);
            let set = sampler::sample_poisson(&w, seed);
            let tr = martingale::y_trace(&set, alpha, eps, interval, &[n], h)?;
            Ok((seed, tr.values[0]))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("trial,seed,y\n");
    for (trial, (seed, y)) in values.iter().enumerate() {
        csv.push_str(&format!("{trial},{seed},{y}\n"));
    }
    let mean = values.iter().map(|&(_, y)| y).sum::<f64>() / seeds as f64;
    let var = values
        .iter()
        .map(|&(_, y)| (y - mean) * (y - mean))
        .sum::<f64>()
        / (seeds as f64 - 1.0).max(1.0);
    let stderr = (var / seeds as f64).sqrt();
    let summary = json!({
        "mean": mean,
        "stderr": stderr,
        "target": interval.len,
        "within_three_stderr": (mean - interval.len).abs() <= 3.0 * stderr,
    });
    Ok((table("y_values", csv), summary))
}

fn second_moment(
    alpha: f64,
    eps: f64,
    interval: crate::fourier::ArcInterval,
    ladder: &[u64],
    step: Option<f64>,
    log_sine_constant: Option<f64>,
) -> Result<Outcome> {
    if ladder.is_empty() {
        return Err(Error::invalid("empty N ladder".to_string()));
    }
    let n_max = *ladder.iter().max().unwrap();
    let step = step.unwrap_or(eps / (8.0 * n_max as f64).max(8.0));
    let panels = (interval.len / step).ceil() as u64;
    if panels.saturating_mul(panels).saturating_mul(n_max) > 2_000_000_000_000 {
        return Err(Error::capacity(format!(
            "second-moment quadrature too large: {panels}² panels × N = {n_max}"
        )));
    }
    let j = martingale::default_max_frequency(eps);
    let mut csv = String::from("N,exact\n");
    let mut exacts = Vec::new();
    for &n in ladder {
        let v = martingale::second_moment_exact(alpha, eps, interval, n, j, step)?;
        csv.push_str(&format!("{n},{v}\n"));
        exacts.push(v);
    }
    let c = match log_sine_constant {
        Some(c) => c,
        None => crate::fourier::log_sine_bound_constant(10_000, &DEFAULT_LN_LADDER)?,
    };
    let mut report = martingale::second_moment_bound(alpha, eps, c)?;
    report.exact_value = exacts.last().copied();
    let bounded = report.condition_flag
        && exacts.iter().all(|&v| v <= report.bound_value);
    let summary = json!({
        "report": serde_json::to_value(&report)?,
        "all_bounded": bounded,
        "max_frequency": j,
        "step": step,
    });
    Ok((table("exact", csv), summary))
}

fn witness(
    weights: &WeightSpec,
    eps: f64,
    n: u64,
    t_grid_size: u64,
    keep: usize,
    master_seed: u64,
) -> Result<Outcome> {
    let w = weights.materialize()?;
    let set = sampler::sample_poisson(&w, master_seed);
    let best = martingale::nondensity_witness_search(&set, eps, n, t_grid_size, keep)?;
    let mut csv = String::from("t,exception_count\n");
    for &(t, c) in &best {
        csv.push_str(&format!("{t},{c}\n"));
    }
    let summary = json!({
        "best_count": best.first().map(|&(_, c)| c),
        "member_count": set.members.len(),
    });
    Ok((table("witnesses", csv), summary))
}

fn orbit(
    weights: &WeightSpec,
    irrational: bohr::NamedIrrational,
    min_denominator: u64,
    interval: crate::fourier::ArcInterval,
    n: u64,
    master_seed: u64,
) -> Result<Outcome> {
    let w = weights.materialize()?;
    let set = sampler::sample_poisson(&w, master_seed);
    let t = irrational.convergent(min_denominator)?;
    let report = bohr::orbit_hit(&set, &t, interval, n)?;
    let mut csv = String::from("n,orbit_point,hit\n");
    for m in set.ns().take_while(|&m| m <= n) {
        let p = t.orbit_point(m);
        csv.push_str(&format!("{m},{p},{}\n", u8::from(interval.contains(p))));
    }
    Ok((table("orbit", csv), serde_json::to_value(&report)?))
}

#[allow(clippy::too_many_arguments)]
fn hit_ladder(
    weights: &WeightSpec,
    irrational: bohr::NamedIrrational,
    min_denominator: u64,
    interval: crate::fourier::ArcInterval,
    ladder: &[u64],
    trials: u64,
    master_seed: u64,
) -> Result<Outcome> {
    if ladder.len() < 2 {
        return Err(Error::invalid("ladder needs >= 2 points".to_string()));
    }
    let w = weights.materialize()?;
    let t = irrational.convergent(min_denominator)?;
    let mut csv = String::from("N,estimate,ci_low,ci_high\n");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in ladder {
        let e = bohr::hit_probability(&w, &t, interval, n, trials, master_seed)?;
        csv.push_str(&format!(
            "{n},{},{},{}\n",
            e.estimate, e.ci_low, e.ci_high
        ));
        xs.push((n as f64).ln());
        ys.push(e.estimate);
    }
    let trend = stats::linear_fit(&xs, &ys)?;
    let summary = json!({
        "trend_slope_per_log_n": trend.slope,
        "r_squared": trend.r_squared,
        "final_estimate": ys.last(),
        "t": t.value(),
    });
    Ok((table("ladder", csv), summary))
}

#[allow(clippy::too_many_arguments)]
fn concentration(
    weights: &WeightSpec,
    f_lo: u64,
    f_hi: u64,
    psi_spec: &PsiSpec,
    c: f64,
    big_c: f64,
    trials: u64,
    master_seed: u64,
) -> Result<Outcome> {
    let w = weights.materialize()?;
    let psi = match *psi_spec {
        PsiSpec::Zero => vec![0.0; (f_hi.saturating_sub(f_lo)) as usize],
        PsiSpec::DilatedLacunary { a, m, q } => {
            let phase = analyticity::lacunary_phase(a, m, q)?;
            analyticity::dilated_phase_values(&phase, f_lo, f_hi)?
        }
    };
    let report = analyticity::concentration_check(
        &w,
        f_lo,
        f_hi,
        &psi,
        c,
        big_c,
        psi_spec.r(),
        trials,
        master_seed,
    )?;
    let mut csv = String::from("quantile,rho\n");
    for (q, v) in ["min", "q25", "median", "q75", "max"]
        .iter()
        .zip(&report.rho_quantiles)
    {
        csv.push_str(&format!("{q},{v}\n"));
    }
    Ok((table("rho", csv), serde_json::to_value(&report)?))
}

fn splitting_law(weights: &WeightSpec, seeds: u64, theta: f64, master_seed: u64) -> Result<Outcome> {
    if seeds < 2 {
        return Err(Error::invalid("need >= 2 seeds".to_string()));
    }
    let w = weights.materialize()?;
    let (wa, wb) = split(&w, theta)?;
    let counts: Vec<(u64, u64)> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let direct = sampler::sample_poisson(&w, seed_stream(master_seed, trial));
            let a = sampler::sample_poisson(&wa, seed_stream(master_seed, seeds + 2 * trial));
            let b = sampler::sample_poisson(&wb, seed_stream(master_seed, seeds + 2 * trial + 1));
            let u = sampler::union(&a, &b)?;
            Ok((direct.members.len() as u64, u.members.len() as u64))
        })
        .collect::<Result<_>>()?;
    let direct: Vec<u64> = counts.iter().map(|&(d, _)| d).collect();
    let union_split: Vec<u64> = counts.iter().map(|&(_, u)| u).collect();
    let report = stats::chi_square_two_sample(&direct, &union_split)?;
    let mut csv = String::from("trial,direct,union_split\n");
    for (trial, &(d, u)) in counts.iter().enumerate() {
        csv.push_str(&format!("{trial},{d},{u}\n"));
    }
    let summary = json!({
        "chi_square": serde_json::to_value(&report)?,
        "theta": theta,
        "law_consistent": report.p_value > 0.01,
    });
    Ok((table("counts", csv), summary))
}

//! Small statistics helpers: least-squares lines, a two-sample
//! chi-square test, and Wilson score intervals.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares for `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid(format!(
            "need >= 2 matched points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("degenerate x values".to_string()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Bin count after merging sparse cells.
    pub bins: usize,
}

/// Two-sample chi-square homogeneity test on nonnegative-integer samples.
///
/// Values are binned by exact value; adjacent bins are merged until every
/// expected cell count is >= 5 (the usual validity rule).
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("empty sample".to_string()));
    }
    let max = *a.iter().chain(b).max().unwrap() as usize;
    let mut ca = vec![0.0f64; max + 1];
    let mut cb = vec![0.0f64; max + 1];
    for &v in a {
        ca[v as usize] += 1.0;
    }
    for &v in b {
        cb[v as usize] += 1.0;
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let total = na + nb;

    // Merge adjacent value-bins until both expected counts are >= 5.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for i in 0..=max {
        acc.0 += ca[i];
        acc.1 += cb[i];
        let pooled = acc.0 + acc.1;
        if pooled * na / total >= 5.0 && pooled * nb / total >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc != (0.0, 0.0) {
        if let Some(last) = bins.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            bins.push(acc);
        }
    }
    if bins.len() < 2 {
        return Err(Error::invalid(
            "fewer than two usable bins after merging".to_string(),
        ));
    }

    let mut stat = 0.0;
    for &(oa, ob) in &bins {
        let pooled = oa + ob;
        let ea = pooled * na / total;
        let eb = pooled * nb / total;
        stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::invalid(format!("chi-square dof: {e}")))?;
    Ok(ChiSquareReport {
        statistic: stat,
        degrees_of_freedom: dof,
        p_value: 1.0 - dist.cdf(stat),
        bins: bins.len(),
    })
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, trials: u64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::invalid(format!(
            "bad binomial counts {successes}/{trials}"
        )));
    }
    let z = 1.959_963_984_540_054; // Φ^{-1}(0.975)
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

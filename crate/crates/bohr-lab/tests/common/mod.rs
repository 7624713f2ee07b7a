//! Independent oracles shared by the integration suites: brute-force
//! signed-combination search, folded-Poisson mean by series summation,
//! and Bessel coefficients by power series.

/// Existence of a vanishing {−1,0,1} combination by full 3^{|S|} scan.
pub fn naive_relation_exists(s: &[u64]) -> bool {
    fn rec(s: &[u64], idx: usize, sum: i64, nonzero: u32) -> bool {
        if idx == s.len() {
            return nonzero > 0 && sum == 0;
        }
        let v = s[idx] as i64;
        rec(s, idx + 1, sum, nonzero)
            || rec(s, idx + 1, sum + v, nonzero + 1)
            || rec(s, idx + 1, sum - v, nonzero + 1)
    }
    rec(s, 0, 0, 0)
}

/// `E|X − λ|` for `X ~ Poisson(λ)` by direct series summation in log
/// space.
pub fn folded_poisson_mean(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut log_pmf = -lambda; // k = 0
    for k in 0..200u64 {
        if k > 0 {
            log_pmf += lambda.ln() - (k as f64).ln();
        }
        sum += (k as f64 - lambda).abs() * log_pmf.exp();
    }
    sum
}

/// `J_n(x)` by its power series.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let mut sum = 0.0;
    let half = x / 2.0;
    for m in 0..60u32 {
        let mut log_term = (n + 2 * m) as f64 * half.abs().ln();
        for i in 1..=m {
            log_term -= (i as f64).ln();
        }
        for i in 1..=(n + m) {
            log_term -= (i as f64).ln();
        }
        let term = log_term.exp();
        sum += if m % 2 == 0 { term } else { -term };
    }
    sum
}

/// `sup_n |J_n(x)|`: the pseudomeasure norm of `e^{-ix cos θ}` times Haar
/// measure (Jacobi–Anger expansion).
pub fn bessel_sup(x: f64) -> f64 {
    (0..40).map(|n| bessel_j(n, x).abs()).fold(0.0, f64::max)
}

//! Convergence diagnostics for multi-chain MCMC output: split R-hat,
//! effective sample size and quantiles.

/// Sample mean and unbiased variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Gelman-Rubin potential scale reduction over already-split chains of equal length.
pub fn potential_scale_reduction(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if chains.len() < 2 || n < 2 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(&c[..n])).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let within = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let between = n as f64 * mean_var(&means).1;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * within + between / nf;
    (var_plus / within).sqrt()
}

/// Split R-hat: each chain is cut into a first and second half (the middle
/// draw of an odd-length chain is dropped) before computing R-hat.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[n - half..n]);
    }
    potential_scale_reduction(&parts)
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence
/// estimator.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let nf = n as f64;
    let acov0: Vec<f64> = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, 0)).collect();
    let mean_var = acov0.iter().sum::<f64>() / m as f64 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += mean_var_of(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho = |lag: usize| -> f64 {
        let acov = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (mean_var - acov) / var_plus
    };

    // sums of adjacent pairs, truncated at the first non-positive pair and made monotone
    let mut pair_sums = Vec::new();
    let mut t = 0;
    while t + 1 < n {
        let even = if t == 0 { 1.0 } else { rho(t) };
        let p = even + rho(t + 1);
        if !(p > 0.0) {
            break;
        }
        let p = pair_sums.last().map_or(p, |&prev: &f64| p.min(prev));
        pair_sums.push(p);
        t += 2;
    }
    let tau = -1.0 + 2.0 * pair_sums.iter().sum::<f64>();
    let total = (m * n) as f64;
    (total / tau.max(1.0 / total.log10())).min(total * total.log10())
}

fn mean_var_of(means: &[f64]) -> f64 {
    mean_var(means).1
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chains(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn rhat_near_one_for_iid_normal() {
        let chains = normal_chains(3, 4, 2000);
        let r = split_rhat(&chains);
        assert!((0.99..=1.02).contains(&r), "rhat {r}");
        let ess = effective_sample_size(&chains);
        assert!(ess > 5000.0, "ess {ess}");
    }

    #[test]
    fn rhat_detects_separated_chains() {
        let mut chains = normal_chains(4, 4, 1000);
        for v in chains[0].iter_mut() {
            *v += 5.0;
        }
        assert!(split_rhat(&chains) > 1.5);
    }

    #[test]
    fn ess_shrinks_for_autocorrelated_chain() {
        // AR(1) with phi = 0.9 has integrated autocorrelation time 19
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..5000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = effective_sample_size(&chains);
        let expected = 20000.0 / 19.0;
        assert!(ess > 0.6 * expected && ess < 1.6 * expected, "ess {ess}");
    }

    #[test]
    fn constant_chains() {
        let chains = vec![vec![1.0; 100]; 4];
        assert_eq!(split_rhat(&chains), 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
    }
}

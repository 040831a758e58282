use artikin::stats::{fit_hierarchical, ComparisonData, ComparisonObservation, McmcConfig, PosteriorSummary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Draws from the comparison model with 6 speakers, 10 words and 4 observations per cell.
fn simulate(beta: f64, tau_beta: f64, seed: u64) -> ComparisonData {
    let (n_s, n_w) = (6, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let alpha_s: Vec<f64> = (0..n_s).map(|_| z.sample(&mut rng)).collect();
    let beta_w: Vec<f64> = (0..n_w).map(|_| tau_beta * z.sample(&mut rng)).collect();
    let mut obs = Vec::new();
    for s in 0..n_s {
        for w in 0..n_w {
            for m in 0..2u8 {
                for _ in 0..4 {
                    let y = alpha_s[s] + (beta + beta_w[w]) * m as f64 + 0.5 * z.sample(&mut rng);
                    obs.push(ComparisonObservation { y, speaker: s, word: w, modality: m });
                }
            }
        }
    }
    ComparisonData::new(obs, (0..n_s).map(|s| format!("S{s}")).collect(), (0..n_w).map(|w| format!("w{w}")).collect())
        .unwrap()
}

fn beta_of(data: &ComparisonData, seed: u64) -> PosteriorSummary {
    let fit = fit_hierarchical(data, &McmcConfig { seed, ..McmcConfig::default() }).unwrap();
    assert!(fit.converged);
    fit.summary("beta").unwrap().clone()
}

#[test]
fn no_modality_signal_centres_beta_on_zero() {
    let mut data = simulate(0.0, 0.0, 1);
    for o in &mut data.observations {
        o.y = 3.0;
    }
    let beta = beta_of(&data, 1);
    assert!(beta.mean.abs() < 0.05, "{beta:?}");
}

#[test]
fn location_shift_moves_alpha_only() {
    // the Normal(0, 2) prior on alpha shrinks large shifts, so c stays small
    let c = 0.5;
    let data = simulate(1.0, 0.3, 2);
    let mut shifted = data.clone();
    shifted.observations.iter_mut().for_each(|o| o.y += c);
    let fit = fit_hierarchical(&data, &McmcConfig::default()).unwrap();
    let moved = fit_hierarchical(&shifted, &McmcConfig::default()).unwrap();

    let (a0, a1) = (fit.summary("alpha").unwrap(), moved.summary("alpha").unwrap());
    let tol = 3.0 * (a0.mcse().powi(2) + a1.mcse().powi(2)).sqrt();
    assert!((a1.mean - a0.mean - c).abs() < tol.max(0.05), "alpha moved {} (c = {c}, tol {tol})", a1.mean - a0.mean);

    let (b0, b1) = (fit.summary("beta").unwrap(), moved.summary("beta").unwrap());
    let tol = 3.0 * (b0.mcse().powi(2) + b1.mcse().powi(2)).sqrt();
    assert!((b1.mean - b0.mean).abs() < tol, "beta moved {} (tol {tol})", b1.mean - b0.mean);
}

#[test]
fn swapping_modality_flips_beta() {
    // with no word-level spread the swapped data is the same model with
    // alpha_s absorbing beta, so the sign flip is exact in expectation
    let data = simulate(1.5, 0.0, 3);
    let b0 = beta_of(&data, 4);
    let b1 = beta_of(&data.swap_modality(), 4);
    let tol = 3.0 * (b0.mcse().powi(2) + b1.mcse().powi(2)).sqrt();
    assert!((b0.mean + b1.mean).abs() < tol.max(0.03), "{} vs {}", b0.mean, b1.mean);
}

#[test]
fn credible_interval_covers_zero_effect() {
    let covered = (0..20u64).filter(|&rep| beta_of(&simulate(0.0, 0.5, 100 + rep), rep + 1).contains(0.0)).count();
    assert!(covered >= 17, "covered {covered}/20");
}

#[test]
fn recovers_known_effect() {
    let beta = beta_of(&simulate(2.0, 0.5, 5), 5);
    assert!(beta.contains(2.0), "{beta:?}");
    assert!((beta.mean - 2.0).abs() < 0.4);
}

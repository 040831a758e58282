use super::diagnostics::{mean_var, quantile_sorted};
use super::HierarchicalFit;

/// Posterior of `beta + beta_w` for one word: the modality difference for that word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEffect {
    pub word: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-word modality effects, sorted by word.
pub fn word_effects(fit: &HierarchicalFit) -> Vec<WordEffect> {
    let beta = fit.draws.pooled("beta").expect("fit carries beta draws");
    let mut out: Vec<WordEffect> = fit
        .words
        .iter()
        .map(|w| {
            let offsets = fit.draws.pooled(&format!("beta_w[{w}]")).expect("fit carries one offset per word");
            let mut total: Vec<f64> = beta.iter().zip(&offsets).map(|(b, o)| b + o).collect();
            let (mean, _) = mean_var(&total);
            total.sort_by(f64::total_cmp);
            WordEffect {
                word: w.clone(),
                mean,
                ci_low: quantile_sorted(&total, 0.025),
                ci_high: quantile_sorted(&total, 0.975),
            }
        })
        .collect();
    out.sort_by(|a, b| a.word.cmp(&b.word));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{fit_hierarchical, ComparisonData, ComparisonObservation, Draws, McmcConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_offsets_reproduce_beta() {
        let beta = vec![vec![0.5, 1.0, 1.5, 2.0], vec![1.0, 1.0, 1.0, 1.0]];
        let zeros = vec![vec![0.0; 4]; 2];
        let fit = HierarchicalFit {
            summaries: Vec::new(),
            draws: Draws {
                names: vec!["beta".into(), "beta_w[b]".into(), "beta_w[a]".into()],
                samples: vec![beta.clone(), zeros.clone(), zeros],
            },
            speakers: vec!["s".into()],
            words: vec!["b".into(), "a".into()],
            acceptance: Vec::new(),
            converged: true,
        };
        let effects = word_effects(&fit);
        assert_eq!(effects.iter().map(|e| e.word.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let mut pooled = beta.concat();
        pooled.sort_by(f64::total_cmp);
        for e in &effects {
            assert_eq!(e.mean, mean_var(&pooled).0);
            assert_eq!(e.ci_low, quantile_sorted(&pooled, 0.025));
            assert_eq!(e.ci_high, quantile_sorted(&pooled, 0.975));
        }
    }

    #[test]
    fn injected_word_offset_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let (n_s, n_w) = (5, 6);
        let mut obs = Vec::new();
        for s in 0..n_s {
            let a = 0.5 * s as f64;
            for w in 0..n_w {
                let slope = 0.5 + if w == 2 { 1.0 } else { 0.0 };
                for _ in 0..4 {
                    for m in 0..2u8 {
                        let y = a + slope * m as f64 + noise.sample(&mut rng);
                        obs.push(ComparisonObservation { y, speaker: s, word: w, modality: m });
                    }
                }
            }
        }
        let data = ComparisonData::new(
            obs,
            (0..n_s).map(|s| format!("s{s}")).collect(),
            (0..n_w).map(|w| format!("w{w}")).collect(),
        )
        .unwrap();
        let fit = fit_hierarchical(&data, &McmcConfig::default()).unwrap();
        let effects = word_effects(&fit);
        let others: f64 = effects.iter().filter(|e| e.word != "w2").map(|e| e.mean).sum::<f64>() / 5.0;
        let gap = effects[2].mean - others;
        assert!((gap - 1.0).abs() < 0.25, "gap {gap}");
    }
}

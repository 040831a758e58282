//! Metropolis-within-Gibbs sampler for the modality comparison model.
//!
//! Location parameters are drawn from their exact normal full conditionals
//! in two parameterizations per sweep: centered (`mu_s = alpha + alpha_s`,
//! `gamma_w = beta + beta_w`) and non-centered (`alpha_s = tau_alpha z_s`,
//! `beta_w = tau_beta z_w`, moving `alpha`/`beta` with the offsets held
//! fixed). Scale parameters get adaptive random-walk Metropolis updates on
//! the log scale, again in both parameterizations. Alternating the two
//! keeps mixing good whether the group-level variance is large or small
//! relative to the data noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::diagnostics::{effective_sample_size, mean_var, quantile_sorted, split_rhat};
use super::{ComparisonData, StatsError};

/// Chains whose split R-hat exceeds this are flagged as not converged.
pub const RHAT_THRESHOLD: f64 = 1.05;

/// Standard deviation of the Normal / half-Normal priors.
const PRIOR_SD: f64 = 2.0;
const ADAPT_BATCH: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.35;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    /// Initial random-walk proposal scale (log units).
    pub init_step: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { chains: 4, warmup: 1000, draws: 2000, init_step: 0.1, seed: 1 }
    }
}

/// Posterior draws, `samples[param][chain][draw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub samples: Vec<Vec<Vec<f64>>>,
}

impl Draws {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn chains(&self, name: &str) -> Option<&[Vec<f64>]> {
        self.index(name).map(|i| self.samples[i].as_slice())
    }

    /// All chains of one parameter concatenated.
    pub fn pooled(&self, name: &str) -> Option<Vec<f64>> {
        self.chains(name).map(|c| c.concat())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rhat: f64,
    pub ess: f64,
}

impl PosteriorSummary {
    pub fn from_chains(name: &str, chains: &[Vec<f64>]) -> Self {
        let mut pooled = chains.concat();
        let (mean, var) = mean_var(&pooled);
        pooled.sort_by(f64::total_cmp);
        PosteriorSummary {
            name: name.to_string(),
            mean,
            sd: var.sqrt(),
            ci_low: quantile_sorted(&pooled, 0.025),
            ci_high: quantile_sorted(&pooled, 0.975),
            rhat: split_rhat(chains),
            ess: effective_sample_size(chains),
        }
    }

    /// Monte-Carlo standard error of the posterior mean.
    pub fn mcse(&self) -> f64 {
        self.sd / self.ess.sqrt()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

#[derive(Debug, Clone)]
pub struct HierarchicalFit {
    pub summaries: Vec<PosteriorSummary>,
    pub draws: Draws,
    pub speakers: Vec<String>,
    pub words: Vec<String>,
    /// Post-warm-up acceptance rate of each random-walk move, averaged over chains.
    pub acceptance: Vec<(String, f64)>,
    /// True when every split R-hat is at most [`RHAT_THRESHOLD`].
    pub converged: bool,
}

impl HierarchicalFit {
    pub fn summary(&self, name: &str) -> Option<&PosteriorSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// One random-walk move on a log-transformed scale parameter.
#[derive(Debug, Clone)]
struct RandomWalk {
    log_step: f64,
    accepted: usize,
    proposed: usize,
    batch_accepted: usize,
    batches: usize,
}

impl RandomWalk {
    fn new(step: f64) -> Self {
        RandomWalk { log_step: step.ln(), accepted: 0, proposed: 0, batch_accepted: 0, batches: 0 }
    }

    fn propose(&self, rng: &mut ChaCha8Rng, log_value: f64) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        log_value + self.log_step.exp() * e
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        if adapting {
            self.batch_accepted += accepted as usize;
        } else {
            self.proposed += 1;
            self.accepted += accepted as usize;
        }
    }

    /// Called once per warm-up iteration; nudges the step after each batch.
    fn adapt(&mut self, iteration: usize) {
        if !(iteration + 1).is_multiple_of(ADAPT_BATCH) {
            return;
        }
        self.batches += 1;
        let rate = self.batch_accepted as f64 / ADAPT_BATCH as f64;
        let gain = (2.0 / (self.batches as f64).sqrt()).min(1.0);
        self.log_step += gain * (rate - TARGET_ACCEPTANCE) * 2.0;
        self.batch_accepted = 0;
    }

    fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

const MOVES: [&str; 5] = ["sigma", "tau_alpha", "tau_beta", "tau_alpha(scale)", "tau_beta(scale)"];

struct Sampler<'a> {
    y: &'a [f64],
    speaker: Vec<usize>,
    word: Vec<usize>,
    us: Vec<bool>,
    n_speaker: Vec<f64>,
    n_word_us: Vec<f64>,
    n_us: f64,
    alpha: f64,
    beta: f64,
    mu: Vec<f64>,
    gamma: Vec<f64>,
    sigma: f64,
    tau_alpha: f64,
    tau_beta: f64,
    moves: [RandomWalk; 5],
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, precision: f64) -> f64 {
    let e: f64 = StandardNormal.sample(rng);
    mean + e / precision.sqrt()
}

/// Smallest admissible scale. Bounding the scales away from zero keeps the
/// conditional precisions finite when the data have no residual spread.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Log half-Normal prior, truncated at [`SCALE_FLOOR`], plus the log-scale Jacobian.
fn log_scale_prior(s: f64) -> f64 {
    if s < SCALE_FLOOR {
        return f64::NEG_INFINITY;
    }
    -s * s / (2.0 * PRIOR_SD * PRIOR_SD) + s.ln()
}

impl<'a> Sampler<'a> {
    fn new(data: &ComparisonData, y: &'a [f64], init_step: f64, rng: &mut ChaCha8Rng) -> Self {
        let n_s = data.speakers.len();
        let n_w = data.words.len();
        let obs = &data.observations;
        let mut n_speaker = vec![0.0; n_s];
        let mut n_word_us = vec![0.0; n_w];
        for o in obs {
            n_speaker[o.speaker] += 1.0;
            if o.modality == 1 {
                n_word_us[o.word] += 1.0;
            }
        }
        let (ybar, yvar) = mean_var(y);
        let ysd = yvar.sqrt().max(1e-3);
        let mut z = || -> f64 { StandardNormal.sample(rng) };
        let alpha = ybar + 0.5 * ysd * z();
        let beta = 0.5 * ysd * z();
        let mu = (0..n_s).map(|_| alpha + 0.5 * ysd * z()).collect();
        let gamma = (0..n_w).map(|_| beta + 0.5 * ysd * z()).collect();
        let sigma = ysd * (0.5 + rng.random::<f64>());
        let tau_alpha = 0.2 + 1.8 * rng.random::<f64>();
        let tau_beta = 0.2 + 1.8 * rng.random::<f64>();
        Sampler {
            y,
            speaker: obs.iter().map(|o| o.speaker).collect(),
            word: obs.iter().map(|o| o.word).collect(),
            us: obs.iter().map(|o| o.modality == 1).collect(),
            n_us: n_word_us.iter().sum(),
            n_speaker,
            n_word_us,
            alpha,
            beta,
            mu,
            gamma,
            sigma,
            tau_alpha,
            tau_beta,
            moves: std::array::from_fn(|_| RandomWalk::new(init_step)),
        }
    }

    fn ssr_with(&self, mu: &[f64], gamma: &[f64]) -> f64 {
        let mut ssr = 0.0;
        for i in 0..self.y.len() {
            let mut pred = mu[self.speaker[i]];
            if self.us[i] {
                pred += gamma[self.word[i]];
            }
            ssr += (self.y[i] - pred).powi(2);
        }
        ssr
    }

    fn ssr(&self) -> f64 {
        self.ssr_with(&self.mu, &self.gamma)
    }

    fn metropolis(&mut self, rng: &mut ChaCha8Rng, which: usize, log_ratio: f64, adapting: bool) -> bool {
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        self.moves[which].record(accept, adapting);
        accept
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, adapting: bool) {
        let prior_prec = 1.0 / (PRIOR_SD * PRIOR_SD);
        let s2 = self.sigma * self.sigma;
        let n = self.y.len();

        // centered speaker means
        let mut sums = vec![0.0; self.mu.len()];
        for i in 0..n {
            let g = if self.us[i] { self.gamma[self.word[i]] } else { 0.0 };
            sums[self.speaker[i]] += self.y[i] - g;
        }
        let ta2 = self.tau_alpha * self.tau_alpha;
        for (s, mu) in self.mu.iter_mut().enumerate() {
            let prec = self.n_speaker[s] / s2 + 1.0 / ta2;
            *mu = normal(rng, (sums[s] / s2 + self.alpha / ta2) / prec, prec);
        }

        // centered word slopes
        let mut sums = vec![0.0; self.gamma.len()];
        for i in 0..n {
            if self.us[i] {
                sums[self.word[i]] += self.y[i] - self.mu[self.speaker[i]];
            }
        }
        let tb2 = self.tau_beta * self.tau_beta;
        for (w, g) in self.gamma.iter_mut().enumerate() {
            let prec = self.n_word_us[w] / s2 + 1.0 / tb2;
            *g = normal(rng, (sums[w] / s2 + self.beta / tb2) / prec, prec);
        }

        // population means given group values
        let prec = self.mu.len() as f64 / ta2 + prior_prec;
        self.alpha = normal(rng, self.mu.iter().sum::<f64>() / ta2 / prec, prec);
        let prec = self.gamma.len() as f64 / tb2 + prior_prec;
        self.beta = normal(rng, self.gamma.iter().sum::<f64>() / tb2 / prec, prec);

        // population means with group offsets held fixed
        let mut sum = 0.0;
        for i in 0..n {
            let g = if self.us[i] { self.gamma[self.word[i]] } else { 0.0 };
            sum += self.y[i] - (self.mu[self.speaker[i]] - self.alpha) - g;
        }
        let prec = n as f64 / s2 + prior_prec;
        let new_alpha = normal(rng, sum / s2 / prec, prec);
        let shift = new_alpha - self.alpha;
        self.mu.iter_mut().for_each(|m| *m += shift);
        self.alpha = new_alpha;

        let mut sum = 0.0;
        for i in 0..n {
            if self.us[i] {
                sum += self.y[i] - self.mu[self.speaker[i]] - (self.gamma[self.word[i]] - self.beta);
            }
        }
        let prec = self.n_us / s2 + prior_prec;
        let new_beta = normal(rng, sum / s2 / prec, prec);
        let shift = new_beta - self.beta;
        self.gamma.iter_mut().for_each(|g| *g += shift);
        self.beta = new_beta;

        // residual scale
        let ssr = self.ssr();
        let log_post = |s: f64| -(n as f64) * s.ln() - ssr / (2.0 * s * s) + log_scale_prior(s);
        let proposal = self.moves[0].propose(rng, self.sigma.ln()).exp();
        if self.metropolis(rng, 0, log_post(proposal) - log_post(self.sigma), adapting) {
            self.sigma = proposal;
        }

        // group scales given group values
        let dev_a: f64 = self.mu.iter().map(|m| (m - self.alpha).powi(2)).sum();
        let count = self.mu.len() as f64;
        let log_post = |t: f64| -count * t.ln() - dev_a / (2.0 * t * t) + log_scale_prior(t);
        let proposal = self.moves[1].propose(rng, self.tau_alpha.ln()).exp();
        if self.metropolis(rng, 1, log_post(proposal) - log_post(self.tau_alpha), adapting) {
            self.tau_alpha = proposal;
        }

        let dev_b: f64 = self.gamma.iter().map(|g| (g - self.beta).powi(2)).sum();
        let count = self.gamma.len() as f64;
        let log_post = |t: f64| -count * t.ln() - dev_b / (2.0 * t * t) + log_scale_prior(t);
        let proposal = self.moves[2].propose(rng, self.tau_beta.ln()).exp();
        if self.metropolis(rng, 2, log_post(proposal) - log_post(self.tau_beta), adapting) {
            self.tau_beta = proposal;
        }

        // group scales with standardized offsets held fixed
        let s2 = self.sigma * self.sigma;
        let ssr = self.ssr();
        let proposal = self.moves[3].propose(rng, self.tau_alpha.ln()).exp();
        let ratio = proposal / self.tau_alpha;
        let mu_new: Vec<f64> = self.mu.iter().map(|m| self.alpha + ratio * (m - self.alpha)).collect();
        let ssr_new = self.ssr_with(&mu_new, &self.gamma);
        let log_ratio = -(ssr_new - ssr) / (2.0 * s2) + log_scale_prior(proposal) - log_scale_prior(self.tau_alpha);
        if self.metropolis(rng, 3, log_ratio, adapting) {
            self.tau_alpha = proposal;
            self.mu = mu_new;
        }

        let ssr = self.ssr();
        let proposal = self.moves[4].propose(rng, self.tau_beta.ln()).exp();
        let ratio = proposal / self.tau_beta;
        let gamma_new: Vec<f64> = self.gamma.iter().map(|g| self.beta + ratio * (g - self.beta)).collect();
        let ssr_new = self.ssr_with(&self.mu, &gamma_new);
        let log_ratio = -(ssr_new - ssr) / (2.0 * s2) + log_scale_prior(proposal) - log_scale_prior(self.tau_beta);
        if self.metropolis(rng, 4, log_ratio, adapting) {
            self.tau_beta = proposal;
            self.gamma = gamma_new;
        }
    }

    fn snapshot(&self, out: &mut [Vec<f64>]) {
        let mut k = 0;
        let mut push = |v: f64| {
            out[k].push(v);
            k += 1;
        };
        push(self.alpha);
        push(self.beta);
        for m in &self.mu {
            push(m - self.alpha);
        }
        for g in &self.gamma {
            push(g - self.beta);
        }
        push(self.sigma);
        push(self.tau_alpha);
        push(self.tau_beta);
    }
}

fn parameter_names(data: &ComparisonData) -> Vec<String> {
    let mut names = vec!["alpha".to_string(), "beta".to_string()];
    names.extend(data.speakers.iter().map(|s| format!("alpha_s[{s}]")));
    names.extend(data.words.iter().map(|w| format!("beta_w[{w}]")));
    names.extend(["sigma", "tau_alpha", "tau_beta"].map(String::from));
    names
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    acceptance: [f64; 5],
}

fn run_chain(data: &ComparisonData, y: &[f64], config: &McmcConfig, chain: usize, n_params: usize) -> ChainOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let mut sampler = Sampler::new(data, y, config.init_step, &mut rng);
    for it in 0..config.warmup {
        sampler.sweep(&mut rng, true);
        for m in sampler.moves.iter_mut() {
            m.adapt(it);
        }
    }
    let mut draws = vec![Vec::with_capacity(config.draws); n_params];
    for _ in 0..config.draws {
        sampler.sweep(&mut rng, false);
        sampler.snapshot(&mut draws);
    }
    ChainOutput { draws, acceptance: std::array::from_fn(|i| sampler.moves[i].acceptance()) }
}

/// Samples the comparison model's posterior. Chains run in parallel and are
/// seeded from `(config.seed, chain index)`, so output is reproducible.
/// Non-convergence is reported through [`HierarchicalFit::converged`], not as an error.
pub fn fit_hierarchical(data: &ComparisonData, config: &McmcConfig) -> Result<HierarchicalFit, StatsError> {
    if config.chains < 2 {
        return Err(StatsError::InvalidConfig("at least 2 chains are needed for R-hat".into()));
    }
    if config.draws < 4 {
        return Err(StatsError::InvalidConfig("at least 4 draws per chain".into()));
    }
    if !(config.init_step > 0.0) || !config.init_step.is_finite() {
        return Err(StatsError::InvalidConfig("initial step must be positive".into()));
    }
    let y: Vec<f64> = data.observations.iter().map(|o| o.y).collect();
    let names = parameter_names(data);
    let n_params = names.len();

    let outputs: Vec<ChainOutput> =
        (0..config.chains).into_par_iter().map(|c| run_chain(data, &y, config, c, n_params)).collect();

    let mut samples = vec![Vec::with_capacity(config.chains); n_params];
    let mut acceptance = [0.0; 5];
    for out in outputs {
        for (p, d) in out.draws.into_iter().enumerate() {
            samples[p].push(d);
        }
        for (a, r) in acceptance.iter_mut().zip(out.acceptance) {
            *a += r / config.chains as f64;
        }
    }

    let summaries: Vec<PosteriorSummary> =
        names.iter().zip(&samples).map(|(n, chains)| PosteriorSummary::from_chains(n, chains)).collect();
    let converged = summaries.iter().all(|s| s.rhat <= RHAT_THRESHOLD);
    if !converged {
        for s in summaries.iter().filter(|s| !(s.rhat <= RHAT_THRESHOLD)) {
            log::warn!("{}: R-hat {:.3} exceeds {}", s.name, s.rhat, RHAT_THRESHOLD);
        }
    }
    Ok(HierarchicalFit {
        summaries,
        draws: Draws { names, samples },
        speakers: data.speakers.clone(),
        words: data.words.clone(),
        acceptance: MOVES.iter().map(|m| m.to_string()).zip(acceptance).collect(),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ComparisonObservation;

    fn tiny() -> ComparisonData {
        let mut obs = Vec::new();
        for s in 0..3 {
            for w in 0..4 {
                for m in 0..2u8 {
                    obs.push(ComparisonObservation {
                        y: s as f64 + 0.5 * m as f64 + 0.1 * w as f64,
                        speaker: s,
                        word: w,
                        modality: m,
                    });
                }
            }
        }
        ComparisonData::new(obs, (0..3).map(|s| format!("s{s}")).collect(), (0..4).map(|w| format!("w{w}")).collect())
            .unwrap()
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = McmcConfig { warmup: 100, draws: 100, ..McmcConfig::default() };
        let a = fit_hierarchical(&tiny(), &cfg).unwrap();
        let b = fit_hierarchical(&tiny(), &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = fit_hierarchical(&tiny(), &McmcConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn every_parameter_summarized() {
        let fit = fit_hierarchical(&tiny(), &McmcConfig { warmup: 200, draws: 200, ..McmcConfig::default() }).unwrap();
        assert_eq!(fit.summaries.len(), 2 + 3 + 4 + 3);
        for s in &fit.summaries {
            assert!(s.rhat.is_finite(), "{}", s.name);
            assert!(s.ci_low <= s.mean && s.mean <= s.ci_high, "{s:?}");
        }
        assert_eq!(fit.draws.chains("beta").unwrap().len(), 4);
        assert_eq!(fit.draws.chains("beta").unwrap()[0].len(), 200);
    }

    #[test]
    fn adaptation_lands_in_band() {
        let fit = fit_hierarchical(&tiny(), &McmcConfig::default()).unwrap();
        for (name, rate) in &fit.acceptance {
            assert!((0.15..=0.6).contains(rate), "{name}: {rate}");
        }
    }

    #[test]
    fn config_validation() {
        let cfg = McmcConfig { chains: 1, ..McmcConfig::default() };
        assert!(matches!(fit_hierarchical(&tiny(), &cfg), Err(StatsError::InvalidConfig(_))));
    }

    #[test]
    fn degenerate_grouping_rejected() {
        let obs = vec![
            ComparisonObservation { y: 1.0, speaker: 0, word: 0, modality: 0 },
            ComparisonObservation { y: 2.0, speaker: 0, word: 1, modality: 1 },
        ];
        let err = ComparisonData::new(obs, vec!["s".into()], vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, StatsError::DegenerateGrouping(_)));
    }
}

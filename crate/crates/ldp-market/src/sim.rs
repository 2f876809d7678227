//! Desk-scale experiments: estimator accuracy versus provider count,
//! attacker-advantage sweeps, and the sequential-attacker trade-off
//! between privacy and accuracy.
//!
//! Every experiment is a pure function of its config, seed included;
//! per-provider randomness comes from split streams so changing the
//! provider count never perturbs earlier providers' draws.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ldp::{self, CoinBias, LdpError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Ldp(#[from] LdpError),
    #[error("truth-distribution mean {mean} must lie in [0, {n})")]
    MeanOutOfRange { mean: f64, n: usize },
    #[error("truth-distribution standard deviation must be positive, got {0}")]
    InvalidSd(f64),
    #[error("provider counts must be non-empty and positive")]
    BadProviderCounts,
}

/// Shared experiment parameters. Truthful choices are drawn from a
/// normal distribution in choice-index units, rounded and clamped onto
/// `[0, n_choices)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_choices: usize,
    pub provider_counts: Vec<u64>,
    pub mean: f64,
    pub sd: f64,
    pub coin_bias: CoinBias,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(
        n_choices: usize,
        provider_counts: Vec<u64>,
        mean: f64,
        sd: f64,
        coin_bias: CoinBias,
        seed: u64,
    ) -> Result<Self, SimError> {
        if n_choices < 2 {
            return Err(LdpError::TooFewChoices(n_choices).into());
        }
        if !(mean >= 0.0 && mean < n_choices as f64) {
            return Err(SimError::MeanOutOfRange { mean, n: n_choices });
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(SimError::InvalidSd(sd));
        }
        if provider_counts.is_empty() || provider_counts.contains(&0) {
            return Err(SimError::BadProviderCounts);
        }
        Ok(Self { n_choices, provider_counts, mean, sd, coin_bias, seed })
    }

    /// The reference setup: 20 choices, counts 500/1000/5000/10000,
    /// truths from normal(10, 2).
    pub fn with_defaults(coin_bias: CoinBias, seed: u64) -> Self {
        Self {
            n_choices: 20,
            provider_counts: vec![500, 1000, 5000, 10_000],
            mean: 10.0,
            sd: 2.0,
            coin_bias,
            seed,
        }
    }
}

fn draw_truth<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> usize {
    let normal = Normal::new(config.mean, config.sd).expect("sd validated positive");
    let x: f64 = normal.sample(rng);
    x.round().clamp(0.0, (config.n_choices - 1) as f64) as usize
}

/// Truthful choice indices for providers `0..count`, one split stream
/// per provider.
pub fn sample_truths(config: &ExperimentConfig, count: u64) -> Vec<usize> {
    (0..count)
        .map(|k| draw_truth(config, &mut rng::stream(config.seed, rng::DOMAIN_PROVIDER, k)))
        .collect()
}

/// One provider count's worth of accuracy results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRun {
    pub providers: u64,
    pub true_counts: Vec<u64>,
    /// Clamped estimates, the statistics consumers read.
    pub estimated_counts: Vec<f64>,
    /// Total-variation distance between the normalized true and
    /// estimated distributions.
    pub tv_distance: f64,
    /// Per-bin standardized errors of the raw estimates.
    pub z_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub config: ExperimentConfig,
    pub runs: Vec<AccuracyRun>,
}

/// Runs the estimator-accuracy experiment across all provider counts.
pub fn run_accuracy_experiment(config: &ExperimentConfig) -> Result<AccuracyReport, SimError> {
    let n = config.n_choices;
    let f = config.coin_bias;
    let query = ldp::Query::numbered(n)?;
    let runs = config
        .provider_counts
        .iter()
        .map(|&providers| {
            let mut true_counts = vec![0u64; n];
            let mut ones = vec![0u64; n];
            for k in 0..providers {
                let mut provider_rng = rng::stream(config.seed, rng::DOMAIN_PROVIDER, k);
                let truth = draw_truth(config, &mut provider_rng);
                true_counts[truth] += 1;
                let one_hot = ldp::encode_truth(&query, truth)?;
                let randomized = ldp::randomize(&one_hot, f, &mut provider_rng)?;
                for (one, &bit) in ones.iter_mut().zip(randomized.bits()) {
                    *one += u64::from(bit);
                }
            }
            let estimate = ldp::estimate_counts(&ones, providers, f)?;
            let z_scores = z_scores(&estimate.raw, &true_counts, providers, f);
            let tv_distance = tv_distance(
                &true_counts.iter().map(|&c| c as f64 / providers as f64).collect::<Vec<_>>(),
                &estimate.distribution(),
            );
            Ok(AccuracyRun {
                providers,
                true_counts,
                estimated_counts: estimate.clamped,
                tv_distance,
                z_scores,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(AccuracyReport { config: config.clone(), runs })
}

/// Standardized errors: `(raw_i - true_i) / sigma_i` with the binomial
/// sigma of bin `i` propagated through the linear estimator,
/// `sigma_i = sqrt(N * p_i * (1 - p_i)) / f`. Zero-variance bins (only
/// possible at f = 1) carry exactly zero error.
pub fn z_scores(raw: &[f64], true_counts: &[u64], providers: u64, f: CoinBias) -> Vec<f64> {
    raw.iter()
        .zip(true_counts)
        .map(|(&estimate, &truth)| {
            let p = f.value() * (truth as f64 / providers as f64) + (1.0 - f.value()) / 2.0;
            let sigma = (providers as f64 * p * (1.0 - p)).sqrt() / f.value();
            if sigma > 0.0 {
                (estimate - truth as f64) / sigma
            } else {
                0.0
            }
        })
        .collect()
}

/// Total-variation distance between two distributions over the same bins.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The two sequential-attacker scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerMode {
    NoNoise,
    Rappor,
}

impl std::str::FromStr for AttackerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "no-noise" | "no_noise" => Ok(AttackerMode::NoNoise),
            "rappor" => Ok(AttackerMode::Rappor),
            other => Err(format!("unknown attacker mode `{other}`; use no-noise or rappor")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerStep {
    pub step: u64,
    pub true_value: usize,
    pub guess: usize,
    /// The only statistic the attacker observes up to this step.
    pub running_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerReport {
    pub mode: AttackerMode,
    pub providers: u64,
    pub exact_guess_rate: f64,
    pub mean_absolute_error: f64,
    pub steps: Vec<AttackerStep>,
}

/// Sequential-observation attack: providers submit one at a time and the
/// attacker sees only the running mean of decoded values, reconstructing
/// each step's value as `mean_k * k - mean_{k-1} * (k-1)` rounded to the
/// nearest valid choice.
///
/// In `NoNoise` mode the decoded value is the true choice itself, so the
/// reconstruction is exact. In `Rappor` mode the decoded value is a draw
/// from the estimate implied by that single randomized vector (clamped
/// counts normalized), which equals the Bayesian posterior over choices:
/// uniform on the reported-1 bits, uniform over everything when no bit
/// is set.
pub fn run_attacker_experiment(
    config: &ExperimentConfig,
    mode: AttackerMode,
    providers: u64,
) -> Result<AttackerReport, SimError> {
    let n = config.n_choices;
    let f = config.coin_bias;
    let query = ldp::Query::numbered(n)?;
    let mut attacker_rng = rng::stream(config.seed, rng::DOMAIN_ATTACKER, 0);

    let mut steps = Vec::with_capacity(providers as usize);
    let mut running_sum = 0.0f64;
    let mut exact = 0u64;
    let mut abs_error = 0u64;
    for k in 0..providers {
        let mut provider_rng = rng::stream(config.seed, rng::DOMAIN_PROVIDER, k);
        let truth = draw_truth(config, &mut provider_rng);
        let decoded = match mode {
            AttackerMode::NoNoise => truth as f64,
            AttackerMode::Rappor => {
                let randomized =
                    ldp::randomize(&ldp::encode_truth(&query, truth)?, f, &mut provider_rng)?;
                let ones: Vec<u64> =
                    randomized.bits().iter().map(|&b| u64::from(b)).collect();
                let implied = ldp::estimate_counts(&ones, 1, f)?.distribution();
                sample_index(&implied, &mut attacker_rng) as f64
            }
        };

        let prev_mean = if k == 0 { 0.0 } else { running_sum / k as f64 };
        running_sum += decoded;
        let running_mean = running_sum / (k + 1) as f64;
        let reconstructed = running_mean * (k + 1) as f64 - prev_mean * k as f64;
        let guess = reconstructed.round().clamp(0.0, (n - 1) as f64) as usize;

        exact += u64::from(guess == truth);
        abs_error += guess.abs_diff(truth) as u64;
        steps.push(AttackerStep { step: k, true_value: truth, guess, running_mean });
    }
    Ok(AttackerReport {
        mode,
        providers,
        exact_guess_rate: exact as f64 / providers as f64,
        mean_absolute_error: abs_error as f64 / providers as f64,
        steps,
    })
}

fn sample_index<R: Rng + ?Sized>(distribution: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (index, &mass) in distribution.iter().enumerate() {
        cumulative += mass;
        if u < cumulative {
            return index;
        }
    }
    // All-zero distribution (no bit survived the clamp): uniform guess.
    rng.gen_range(0..distribution.len())
}

/// Analytic per-step success probability of the rappor-mode attacker.
///
/// With `a = f + (1-f)/2` the one-rate of the true bit and `b = (1-f)/2`
/// of every other bit, the guess lands on the truth either by picking it
/// among the `1 + K` set bits (`K ~ Binomial(n-1, b)`, and
/// `E[1/(1+K)] = (1 - (1-b)^n) / (n b)`), or by the uniform fallback when
/// no bit is set at all.
pub fn analytic_step_success(n: usize, f: CoinBias) -> f64 {
    let a = f.value() + (1.0 - f.value()) / 2.0;
    let b = (1.0 - f.value()) / 2.0;
    if b == 0.0 {
        return 1.0;
    }
    let n_f = n as f64;
    a * (1.0 - (1.0 - b).powi(n as i32)) / (n_f * b)
        + (1.0 - a) * (1.0 - b).powi(n as i32 - 1) / n_f
}

/// One plot-ready row of the advantage sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRow {
    pub n: usize,
    pub f: f64,
    pub p_guess: f64,
    pub p_posterior: f64,
    pub advantage: f64,
}

/// Evaluates the closed-form advantage over the cross product of choice
/// counts and coin biases, grouped by bias.
pub fn advantage_sweep(
    n_values: &[usize],
    f_values: &[CoinBias],
) -> Result<Vec<AdvantageRow>, LdpError> {
    let mut rows = Vec::with_capacity(n_values.len() * f_values.len());
    for &f in f_values {
        for &n in n_values {
            let record = ldp::attacker_advantage(n, f)?;
            rows.push(AdvantageRow {
                n,
                f: f.value(),
                p_guess: record.p_guess,
                p_posterior: record.p_posterior,
                advantage: record.advantage,
            });
        }
    }
    Ok(rows)
}

pub fn accuracy_csv(report: &AccuracyReport) -> String {
    let mut out = String::from("N,bin,true_count,est_count,z\n");
    for run in &report.runs {
        for bin in 0..report.config.n_choices {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                run.providers, bin, run.true_counts[bin], run.estimated_counts[bin], run.z_scores[bin]
            ));
        }
    }
    out
}

pub fn attacker_csv(report: &AttackerReport) -> String {
    let mut out = String::from("step,true_value,guess,running_mean\n");
    for step in &report.steps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            step.step, step.true_value, step.guess, step.running_mean
        ));
    }
    out
}

pub fn advantage_csv(rows: &[AdvantageRow]) -> String {
    let mut out = String::from("n,f,p_guess,p_posterior,advantage\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.f, row.p_guess, row.p_posterior, row.advantage
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair_defaults(seed: u64) -> ExperimentConfig {
        ExperimentConfig::with_defaults(CoinBias::FAIR, seed)
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            ExperimentConfig::new(20, vec![10], 25.0, 2.0, CoinBias::FAIR, 0),
            Err(SimError::MeanOutOfRange { .. })
        ));
        assert!(matches!(
            ExperimentConfig::new(20, vec![10], 10.0, 0.0, CoinBias::FAIR, 0),
            Err(SimError::InvalidSd(_))
        ));
        assert!(matches!(
            ExperimentConfig::new(20, vec![], 10.0, 2.0, CoinBias::FAIR, 0),
            Err(SimError::BadProviderCounts)
        ));
        assert!(matches!(
            ExperimentConfig::new(1, vec![10], 0.0, 2.0, CoinBias::FAIR, 0),
            Err(SimError::Ldp(LdpError::TooFewChoices(1)))
        ));
    }

    #[test]
    fn truths_collapse_to_mean_as_sd_vanishes() {
        let config = ExperimentConfig::new(20, vec![100], 10.0, 1e-9, CoinBias::FAIR, 3).unwrap();
        assert!(sample_truths(&config, 100).iter().all(|&t| t == 10));
    }

    #[test]
    fn truths_stay_in_range_and_match_the_mean() {
        let config = fair_defaults(5);
        let count = 100_000u64;
        let truths = sample_truths(&config, count);
        assert!(truths.iter().all(|&t| t < 20));
        let mean = truths.iter().sum::<usize>() as f64 / count as f64;
        let tol = 4.0 * config.sd / (count as f64).sqrt();
        assert!((mean - 10.0).abs() <= tol, "sample mean {mean} off by more than {tol}");
    }

    #[test]
    fn truths_are_prefix_stable_across_counts() {
        let config = fair_defaults(8);
        let short = sample_truths(&config, 100);
        let long = sample_truths(&config, 200);
        assert_eq!(short, long[..100]);
    }

    #[test]
    fn accuracy_is_exact_without_noise() {
        let mut config = fair_defaults(1);
        config.coin_bias = CoinBias::TRUTHFUL;
        config.provider_counts = vec![300, 900];
        let report = run_accuracy_experiment(&config).unwrap();
        for run in &report.runs {
            assert_eq!(run.tv_distance, 0.0);
            assert!(run.z_scores.iter().all(|&z| z == 0.0));
            let est: Vec<u64> = run.estimated_counts.iter().map(|&c| c as u64).collect();
            assert_eq!(est, run.true_counts);
        }
    }

    #[test]
    fn accuracy_conserves_totals_and_bounds_z() {
        let report = run_accuracy_experiment(&fair_defaults(42)).unwrap();
        assert_eq!(report.runs.len(), 4);
        for run in &report.runs {
            assert_eq!(run.true_counts.iter().sum::<u64>(), run.providers);
            assert!(run.tv_distance >= 0.0 && run.tv_distance <= 1.0);
            assert!(run.z_scores.iter().all(|&z| z.abs() <= 4.0), "z out of band: {:?}", run.z_scores);
        }
    }

    #[test]
    fn accuracy_reports_are_reproducible() {
        let a = run_accuracy_experiment(&fair_defaults(7)).unwrap();
        let b = run_accuracy_experiment(&fair_defaults(7)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(accuracy_csv(&a), accuracy_csv(&b));
    }

    #[test]
    fn no_noise_attacker_reconstructs_exactly() {
        let report =
            run_attacker_experiment(&fair_defaults(11), AttackerMode::NoNoise, 1000).unwrap();
        assert_eq!(report.exact_guess_rate, 1.0);
        assert_eq!(report.mean_absolute_error, 0.0);
        assert!(report.steps.iter().all(|s| s.guess == s.true_value));
    }

    #[test]
    fn rappor_attacker_with_truthful_coin_matches_no_noise() {
        let mut config = fair_defaults(13);
        config.coin_bias = CoinBias::TRUTHFUL;
        let noiseless =
            run_attacker_experiment(&config, AttackerMode::NoNoise, 500).unwrap();
        let rappor = run_attacker_experiment(&config, AttackerMode::Rappor, 500).unwrap();
        assert_eq!(rappor.exact_guess_rate, noiseless.exact_guess_rate);
        assert_eq!(rappor.mean_absolute_error, noiseless.mean_absolute_error);
        assert_eq!(rappor.steps, noiseless.steps);
    }

    // Monte-Carlo check of the analytic per-step success probability.
    #[test]
    fn rappor_attacker_matches_analytic_success() {
        let config = fair_defaults(17);
        let steps = 10_000u64;
        let report = run_attacker_experiment(&config, AttackerMode::Rappor, steps).unwrap();
        let p = analytic_step_success(20, CoinBias::FAIR);
        let sigma = (p * (1.0 - p) / steps as f64).sqrt();
        assert!(
            (report.exact_guess_rate - p).abs() <= 4.0 * sigma,
            "rate {} vs analytic {p} (4 sigma = {})",
            report.exact_guess_rate,
            4.0 * sigma
        );
        assert!(report.exact_guess_rate <= 0.25);
    }

    #[test]
    fn analytic_success_degenerates_correctly() {
        assert_eq!(analytic_step_success(20, CoinBias::TRUTHFUL), 1.0);
        // For n = 1 every guess is the single choice.
        assert!((analytic_step_success(1, CoinBias::FAIR) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advantage_sweep_rows_and_limits() {
        let ns: Vec<usize> = (2..=100).collect();
        let rows = advantage_sweep(&ns, &[CoinBias::FAIR, CoinBias::NON_FAIR]).unwrap();
        assert_eq!(rows.len(), ns.len() * 2);

        let fair: Vec<&AdvantageRow> = rows.iter().filter(|r| r.f == 0.5).collect();
        assert!(fair.windows(2).all(|w| w[1].advantage >= w[0].advantage));
        assert!(fair.iter().all(|r| r.advantage < 3.0));
        // Exact value at n = 100 is 0.75 / 0.255 = 2.9412; the limit of 3
        // is approached from below.
        assert!((fair.last().unwrap().advantage - 2.9412).abs() < 1e-4);

        let nonfair: Vec<&AdvantageRow> = rows.iter().filter(|r| r.f == 0.2).collect();
        assert!((nonfair.last().unwrap().advantage - 1.5).abs() < 0.01);

        let ones = advantage_sweep(&[1], &[CoinBias::FAIR, CoinBias::NON_FAIR]).unwrap();
        assert!(ones.iter().all(|r| (r.advantage - 1.0).abs() < 1e-12));
    }

    #[test]
    fn csv_shapes() {
        let mut config = fair_defaults(3);
        config.provider_counts = vec![50];
        let accuracy = run_accuracy_experiment(&config).unwrap();
        let csv = accuracy_csv(&accuracy);
        assert_eq!(csv.lines().count(), 1 + 20);
        assert!(csv.starts_with("N,bin,true_count,est_count,z\n"));

        let attacker = run_attacker_experiment(&config, AttackerMode::Rappor, 25).unwrap();
        assert_eq!(attacker_csv(&attacker).lines().count(), 1 + 25);

        let rows = advantage_sweep(&[2, 4], &[CoinBias::FAIR]).unwrap();
        assert_eq!(advantage_csv(&rows).lines().count(), 1 + 2);
    }
}

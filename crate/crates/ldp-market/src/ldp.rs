//! Local differential privacy: one-hot encoding, two-coin randomized
//! response, unbiased frequency estimation, and the attacker-advantage
//! analysis.
//!
//! The mechanism is the basic two-coin scheme: for every bit of the
//! truthful one-hot vector, with probability `f` the bit is reported
//! truthfully, otherwise an independent fair coin decides the reported
//! value. Each output bit therefore carries marginal
//! `P(out = 1) = f * truth + (1 - f) / 2`, which the estimator inverts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by encoding, randomization, and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdpError {
    #[error("query needs at least 2 choices, got {0}")]
    TooFewChoices(usize),
    #[error("query holds more than {max} choices ({got}); the wire encoding carries a 16-bit length", max = u16::MAX, got = .0)]
    TooManyChoices(usize),
    #[error("query choice labels must be pairwise distinct (`{0}` repeats)")]
    DuplicateChoice(String),
    #[error("choice index {index} out of range for {n} choices")]
    ChoiceOutOfRange { index: usize, n: usize },
    #[error("coin bias must lie in (0, 1], got {0}")]
    InvalidBias(f64),
    #[error("truthful response must be one-hot, got {ones} set bits")]
    NotOneHot { ones: usize },
    #[error("bin {bin} observed {observed} ones out of only {total} responses")]
    ObservedExceedsTotal { bin: usize, observed: u64, total: u64 },
    #[error("estimation needs at least one response")]
    EmptyAggregate,
    #[error("advantage analysis needs at least one choice")]
    EmptyChoiceSet,
}

/// A consumer questionnaire: an ordered list of distinct choice labels.
///
/// The position of a label is its canonical identity for the life of a
/// session; responses are bit vectors indexed the same way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Query {
    choices: Vec<String>,
}

impl Query {
    pub fn new(choices: Vec<String>) -> Result<Self, LdpError> {
        if choices.len() < 2 {
            return Err(LdpError::TooFewChoices(choices.len()));
        }
        if choices.len() > u16::MAX as usize {
            return Err(LdpError::TooManyChoices(choices.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &choices {
            if !seen.insert(label.as_str()) {
                return Err(LdpError::DuplicateChoice(label.clone()));
            }
        }
        Ok(Self { choices })
    }

    /// Convenience constructor with labels `c0`, `c1`, ...
    pub fn numbered(n: usize) -> Result<Self, LdpError> {
        Self::new((0..n).map(|i| format!("c{i}")).collect())
    }

    /// Number of choices `n`.
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn choices(&self) -> &[String] {
        &self.choices
    }
}

impl TryFrom<Vec<String>> for Query {
    type Error = LdpError;
    fn try_from(choices: Vec<String>) -> Result<Self, LdpError> {
        Query::new(choices)
    }
}

impl From<Query> for Vec<String> {
    fn from(q: Query) -> Self {
        q.choices
    }
}

/// An n-bit response vector: one-hot when truthful, arbitrary Hamming
/// weight after randomization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseBits {
    bits: Vec<bool>,
}

impl ResponseBits {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_one_hot(&self) -> bool {
        self.count_ones() == 1
    }
}

/// Truth-telling probability of the first coin, in (0, 1].
///
/// `0.5` is the fair coin; `1.0` disables randomization entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CoinBias(f64);

impl CoinBias {
    /// The fair coin, f = 0.5.
    pub const FAIR: CoinBias = CoinBias(0.5);
    /// The non-fair variant with truth-telling reduced to 20%.
    pub const NON_FAIR: CoinBias = CoinBias(0.2);
    /// No randomization at all.
    pub const TRUTHFUL: CoinBias = CoinBias(1.0);

    pub fn new(f: f64) -> Result<Self, LdpError> {
        if f.is_finite() && f > 0.0 && f <= 1.0 {
            Ok(Self(f))
        } else {
            Err(LdpError::InvalidBias(f))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Marginal probability that a bit with truthful value `truth` is
    /// reported as 1: `f * truth + (1 - f) / 2`.
    pub fn one_rate(&self, truth: bool) -> f64 {
        self.0 * f64::from(u8::from(truth)) + (1.0 - self.0) / 2.0
    }
}

impl TryFrom<f64> for CoinBias {
    type Error = LdpError;
    fn try_from(f: f64) -> Result<Self, LdpError> {
        CoinBias::new(f)
    }
}

impl From<CoinBias> for f64 {
    fn from(f: CoinBias) -> f64 {
        f.0
    }
}

/// Per-bin frequency estimates recovered from randomized responses.
///
/// `raw` is the unbiased inversion and may go negative; `clamped` floors
/// it at zero. Statistics consumers read `clamped`, bias tests read `raw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub raw: Vec<f64>,
    pub clamped: Vec<f64>,
    pub total: u64,
}

impl FrequencyEstimate {
    /// The estimate as a probability distribution: clamped counts
    /// normalized by their sum (all-zero clamps yield the zero vector).
    pub fn distribution(&self) -> Vec<f64> {
        let sum: f64 = self.clamped.iter().sum();
        if sum > 0.0 {
            self.clamped.iter().map(|c| c / sum).collect()
        } else {
            vec![0.0; self.clamped.len()]
        }
    }
}

/// Closed-form attacker analysis for one randomized bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    /// Blind prior: 1/n.
    pub p_guess: f64,
    /// Posterior that the true choice is `c_i` given `r_i = 1`, under a
    /// uniform prior.
    pub p_posterior: f64,
    /// `p_posterior / p_guess`.
    pub advantage: f64,
}

/// Encodes a truthful single choice as a one-hot bit vector.
pub fn encode_truth(query: &Query, choice_index: usize) -> Result<ResponseBits, LdpError> {
    let n = query.len();
    if choice_index >= n {
        return Err(LdpError::ChoiceOutOfRange { index: choice_index, n });
    }
    let mut bits = vec![false; n];
    bits[choice_index] = true;
    Ok(ResponseBits::from_bits(bits))
}

/// Applies two-coin randomized response to a one-hot truth vector.
///
/// Each bit is reported truthfully with probability `f` and replaced by
/// an independent fair coin flip otherwise. Deterministic given
/// `(truth, f, rng stream)`.
pub fn randomize<R: Rng + ?Sized>(
    truth: &ResponseBits,
    f: CoinBias,
    rng: &mut R,
) -> Result<ResponseBits, LdpError> {
    if !truth.is_one_hot() {
        return Err(LdpError::NotOneHot { ones: truth.count_ones() });
    }
    let bits = truth
        .bits()
        .iter()
        .map(|&b| if rng.gen_bool(f.value()) { b } else { rng.gen_bool(0.5) })
        .collect();
    Ok(ResponseBits::from_bits(bits))
}

/// Inverts the randomization marginal to recover unbiased per-bin counts.
///
/// `raw[i] = (observed_ones[i] - (1 - f) * 0.5 * total) / f`; when the
/// observations come from [`randomize`], `E[raw[i]]` equals the true
/// count of choice `i`.
pub fn estimate_counts(
    observed_ones: &[u64],
    total: u64,
    f: CoinBias,
) -> Result<FrequencyEstimate, LdpError> {
    if total == 0 {
        return Err(LdpError::EmptyAggregate);
    }
    for (bin, &observed) in observed_ones.iter().enumerate() {
        if observed > total {
            return Err(LdpError::ObservedExceedsTotal { bin, observed, total });
        }
    }
    let noise_floor = (1.0 - f.value()) * 0.5 * total as f64;
    let raw: Vec<f64> = observed_ones
        .iter()
        .map(|&ones| (ones as f64 - noise_floor) / f.value())
        .collect();
    let clamped = raw.iter().map(|&r| r.max(0.0)).collect();
    Ok(FrequencyEstimate { raw, clamped, total })
}

/// Computes the analytic attacker advantage for an n-choice query.
///
/// Against a uniform prior, observing `r_i = 1` lifts the attacker's
/// belief in choice `c_i` from `1/n` to
/// `(f + (1-f)/2) * (1/n) / (f/n + (1-f)/2)`; the advantage is the ratio
/// of the two and is monotone non-decreasing in `n` with limit
/// `(f + (1-f)/2) / ((1-f)/2)`.
pub fn attacker_advantage(n: usize, f: CoinBias) -> Result<AdvantageRecord, LdpError> {
    if n == 0 {
        return Err(LdpError::EmptyChoiceSet);
    }
    let n = n as f64;
    let p_guess = 1.0 / n;
    let p_posterior = (f.value() + (1.0 - f.value()) / 2.0) * (1.0 / n)
        / (f.value() / n + (1.0 - f.value()) / 2.0);
    Ok(AdvantageRecord { p_guess, p_posterior, advantage: p_posterior / p_guess })
}

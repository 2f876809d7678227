//! End-to-end market protocol: query publication, provider submission
//! with randomized response and encryption, operator filtering, deposit,
//! reveal, payout, decryption, and dispute verification.
//!
//! Nonce distribution: the consumer generates and holds `s1`; the system
//! operator generates `s2` and commits `H(s2)` at deployment; providers
//! receive both through the enrollment channel so they can derive the
//! session key and encrypt. The consumer can therefore decrypt only once
//! `s2` is revealed on chain, and the operator never handles plaintext
//! responses at all — filtering keys on plaintext metadata only.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    self, Ciphertext, CryptoError, Digest, Nonce, PreSharedKey,
};
use crate::ldp::{self, CoinBias, FrequencyEstimate, LdpError, Query, ResponseBits};
use crate::ledger::{Address, ContractState, GasSchedule, LedgerError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Ldp(#[from] LdpError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("price {price} cannot cover {required} providers with at least one unit each")]
    PriceBelowRequired { price: u64, required: u64 },
    #[error("only {valid} of the required {required} submissions satisfy the filtering criteria")]
    ThresholdNotMet { valid: u64, required: u64 },
    #[error("accepted ciphertext from {address} failed integrity verification")]
    IntegrityFailure { address: Address },
    #[error("no on-chain response record for address {0}")]
    MissingRecord(Address),
    #[error("filter hash has not been recorded on chain")]
    FilterNotRecorded,
    #[error("session key is unavailable until s2 is revealed on chain")]
    NotSettled,
    #[error("submission index {0} out of range")]
    UnknownSubmission(usize),
}

/// The agreed terms of one market session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTerms")]
pub struct MarketTerms {
    pub query: Query,
    pub price: u64,
    pub required_responses: u64,
    pub coin_bias: CoinBias,
}

#[derive(Deserialize)]
struct RawTerms {
    query: Query,
    price: u64,
    required_responses: u64,
    coin_bias: CoinBias,
}

impl TryFrom<RawTerms> for MarketTerms {
    type Error = ProtocolError;
    fn try_from(raw: RawTerms) -> Result<Self, ProtocolError> {
        MarketTerms::new(raw.query, raw.price, raw.required_responses, raw.coin_bias)
    }
}

impl MarketTerms {
    /// Requires `required_responses >= 1` and `price >= required_responses`
    /// so every accepted provider can be paid at least one unit.
    pub fn new(
        query: Query,
        price: u64,
        required_responses: u64,
        coin_bias: CoinBias,
    ) -> Result<Self, ProtocolError> {
        if required_responses == 0 || price == 0 {
            return Err(LedgerError::InvalidTerms.into());
        }
        if price < required_responses {
            return Err(ProtocolError::PriceBelowRequired { price, required: required_responses });
        }
        Ok(Self { query, price, required_responses, coin_bias })
    }
}

/// Plaintext attributes the operator filters on. Responses themselves
/// stay encrypted end to end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionMetadata {
    pub region: String,
    pub capture_time: u64,
}

impl SubmissionMetadata {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.region.len());
        out.extend_from_slice(&(self.region.len() as u32).to_be_bytes());
        out.extend_from_slice(self.region.as_bytes());
        out.extend_from_slice(&self.capture_time.to_be_bytes());
        out
    }
}

/// A provider's encrypted response in transit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub address: Address,
    pub ciphertext: Ciphertext,
    pub envelope_mac: Digest,
    pub metadata: SubmissionMetadata,
}

impl Submission {
    pub fn envelope_bytes(&self) -> Vec<u8> {
        submission_envelope_bytes(&self.address, &self.ciphertext, &self.metadata)
    }
}

/// The byte string the envelope MAC authenticates:
/// `address || canonical ciphertext || canonical metadata`.
pub fn submission_envelope_bytes(
    address: &Address,
    ciphertext: &Ciphertext,
    metadata: &SubmissionMetadata,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(address.as_bytes());
    out.extend_from_slice(&ciphertext.canonical_bytes());
    out.extend_from_slice(&metadata.canonical_bytes());
    out
}

/// Operator accept/reject bits over submissions, in on-chain record order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterVector {
    bits: Vec<bool>,
}

impl FilterVector {
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

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Canonical bytes: 4-byte big-endian bit count, then the bits packed
    /// most-significant-first. Length is part of the encoding, so a
    /// truncated vector never verifies.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.bits.len().div_ceil(8));
        out.extend_from_slice(&(self.bits.len() as u32).to_be_bytes());
        out.extend_from_slice(&crypto::pack_bits_msb(&self.bits));
        out
    }
}

/// How the session ended (or where it currently stands).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum SessionStatus {
    Collecting,
    Filtered,
    Settled,
    Disputed { reason: DisputeReason },
}

/// Disputed sessions are terminal; retry policy is out of scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisputeReason {
    RevealMismatch,
    IntegrityFailure { address: Address },
}

/// One market session, owned and mutated by a single driver.
///
/// Provider response generation is pure given its rng and may run
/// anywhere; all ledger mutations go through this owner.
#[derive(Debug, Clone)]
pub struct MarketSession {
    terms: MarketTerms,
    s1: Nonce,
    s2: Nonce,
    operator_address: Address,
    contract: ContractState,
    submissions: Vec<Submission>,
    psk_directory: BTreeMap<Address, PreSharedKey>,
    mac_rejections: Vec<Address>,
    filter: Option<FilterVector>,
    payouts: BTreeMap<Address, u64>,
    operator_remainder: u64,
    decrypted: Vec<DecryptedResponse>,
    estimate: Option<FrequencyEstimate>,
    status: SessionStatus,
}

/// An accepted response after decryption, still LDP-noised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecryptedResponse {
    pub address: Address,
    pub bits: ResponseBits,
}

/// Everything a session leaves behind, as one JSON document. Nonces and
/// digests are hex; `s2_revealed` is present only after an on-chain
/// reveal. Provider pre-shared keys and raw truthful choices are never
/// part of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub terms: MarketTerms,
    pub status: SessionStatus,
    pub s1: Nonce,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s2_revealed: Option<Nonce>,
    pub contract: ContractState,
    pub submissions: Vec<Submission>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub filter: Option<FilterVector>,
    pub payouts: BTreeMap<Address, u64>,
    pub operator_remainder: u64,
    pub decrypted_responses: Vec<DecryptedResponse>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<FrequencyEstimate>,
}

impl SessionTranscript {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Opens a session: the consumer draws `s1`, the operator draws `s2` and
/// an address, and the contract deploys with `H(query)` and `H(s2)`.
pub fn publish_query(
    terms: MarketTerms,
    schedule: GasSchedule,
    seed: u64,
) -> Result<MarketSession, ProtocolError> {
    let mut consumer = rng::stream(seed, rng::DOMAIN_CONSUMER, 0);
    let mut operator = rng::stream(seed, rng::DOMAIN_OPERATOR, 0);
    let s1 = Nonce::random(&mut consumer);
    let s2 = Nonce::random(&mut operator);
    let operator_address = Address::random(&mut operator);
    let contract = ContractState::deploy(
        schedule,
        crypto::hash(&query_canonical_bytes(&terms.query)),
        crypto::hash(s2.as_bytes()),
        terms.price,
        terms.required_responses,
    )?;
    Ok(MarketSession {
        terms,
        s1,
        s2,
        operator_address,
        contract,
        submissions: Vec::new(),
        psk_directory: BTreeMap::new(),
        mac_rejections: Vec::new(),
        filter: None,
        payouts: BTreeMap::new(),
        operator_remainder: 0,
        decrypted: Vec::new(),
        estimate: None,
        status: SessionStatus::Collecting,
    })
}

/// Canonical query bytes for the on-chain commitment: 2-byte big-endian
/// choice count, then each label as 4-byte big-endian length plus UTF-8.
pub fn query_canonical_bytes(query: &Query) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(query.len() as u16).to_be_bytes());
    for label in query.choices() {
        out.extend_from_slice(&(label.len() as u32).to_be_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    out
}

/// Night-time capture, region tags, and similar filtering rules the
/// operator can apply without reading response content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetadataPredicate {
    All,
    RegionEquals(String),
    CapturedAfter(u64),
}

impl MetadataPredicate {
    pub fn matches(&self, metadata: &SubmissionMetadata) -> bool {
        match self {
            MetadataPredicate::All => true,
            MetadataPredicate::RegionEquals(region) => metadata.region == *region,
            MetadataPredicate::CapturedAfter(t) => metadata.capture_time >= *t,
        }
    }
}

impl std::str::FromStr for MetadataPredicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(MetadataPredicate::All);
        }
        if let Some(region) = s.strip_prefix("region:") {
            if region.is_empty() {
                return Err("region predicate needs a tag, e.g. region:north".into());
            }
            return Ok(MetadataPredicate::RegionEquals(region.to_string()));
        }
        if let Some(t) = s.strip_prefix("after:") {
            return t
                .parse()
                .map(MetadataPredicate::CapturedAfter)
                .map_err(|_| format!("after: wants a unix timestamp, got `{t}`"));
        }
        Err(format!("unknown predicate `{s}`; use all, region:<tag>, or after:<unix-seconds>"))
    }
}

/// What the reveal step puts on chain; `WrongNonce` is the
/// fault-injection hook for the dispute path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RevealBehavior {
    #[default]
    Honest,
    WrongNonce,
}

impl MarketSession {
    pub fn terms(&self) -> &MarketTerms {
        &self.terms
    }

    pub fn contract(&self) -> &ContractState {
        &self.contract
    }

    pub fn submissions(&self) -> &[Submission] {
        &self.submissions
    }

    pub fn filter(&self) -> Option<&FilterVector> {
        self.filter.as_ref()
    }

    pub fn status(&self) -> &SessionStatus {
        &self.status
    }

    pub fn operator_address(&self) -> Address {
        self.operator_address
    }

    /// Addresses the operator force-rejected for bad envelope MACs.
    pub fn mac_rejections(&self) -> &[Address] {
        &self.mac_rejections
    }

    /// One provider's full submission path: randomize the truthful
    /// choice, encrypt under `sk = H(s1 || s2)`, MAC the envelope with
    /// the psk, and record `H(C_R)` on chain under a fresh address.
    ///
    /// Draw order from `rng`: address, randomization coins, then the
    /// encryption IV.
    pub fn provider_respond<R: Rng + ?Sized>(
        &mut self,
        psk: &PreSharedKey,
        true_choice: usize,
        metadata: SubmissionMetadata,
        rng: &mut R,
    ) -> Result<Address, ProtocolError> {
        let address = Address::random(rng);
        let truth = ldp::encode_truth(&self.terms.query, true_choice)?;
        let randomized = ldp::randomize(&truth, self.terms.coin_bias, rng)?;
        let sk = crypto::derive_key(&self.s1, &self.s2);
        let ciphertext = crypto::encrypt(&sk, &crypto::encode_response_bits(&randomized), rng);
        let envelope_mac =
            crypto::mac(psk, &submission_envelope_bytes(&address, &ciphertext, &metadata));
        self.contract
            .record_response_hash(address, crypto::hash(&ciphertext.canonical_bytes()))?;
        self.submissions.push(Submission { address, ciphertext, envelope_mac, metadata });
        self.psk_directory.insert(address, psk.clone());
        Ok(address)
    }

    /// Builds and commits the filter vector: MAC-invalid submissions are
    /// force-rejected, and of the predicate-satisfying remainder the
    /// first `required_responses` in on-chain order are accepted.
    pub fn operator_filter<P: Fn(&SubmissionMetadata) -> bool>(
        &mut self,
        predicate: P,
    ) -> Result<&FilterVector, ProtocolError> {
        let required = self.terms.required_responses as usize;
        self.mac_rejections.clear();
        let mut valid = Vec::new();
        for (index, submission) in self.submissions.iter().enumerate() {
            let mac_ok = self
                .psk_directory
                .get(&submission.address)
                .is_some_and(|psk| {
                    crypto::mac_verify(psk, &submission.envelope_bytes(), &submission.envelope_mac)
                });
            if !mac_ok {
                self.mac_rejections.push(submission.address);
                continue;
            }
            if predicate(&submission.metadata) {
                valid.push(index);
            }
        }
        if valid.len() < required {
            return Err(ProtocolError::ThresholdNotMet {
                valid: valid.len() as u64,
                required: self.terms.required_responses,
            });
        }
        let mut bits = vec![false; self.submissions.len()];
        for &index in valid.iter().take(required) {
            bits[index] = true;
        }
        let filter = FilterVector::from_bits(bits);
        self.contract.record_filter_hash(
            crypto::hash(&filter.canonical_bytes()),
            self.terms.required_responses,
        )?;
        self.status = SessionStatus::Filtered;
        Ok(self.filter.insert(filter))
    }

    /// Deposit, reveal, and payout. Each accepted provider receives
    /// `floor(price / required_responses)`; the operator keeps the
    /// remainder as brokerage. A rejected reveal retains the deposit and
    /// marks the session disputed.
    pub fn consumer_settle(&mut self) -> Result<(), ProtocolError> {
        self.consumer_settle_with(RevealBehavior::Honest)
    }

    pub fn consumer_settle_with(&mut self, reveal: RevealBehavior) -> Result<(), ProtocolError> {
        self.contract.make_deposit(self.terms.price)?;
        let nonce = match reveal {
            RevealBehavior::Honest => self.s2,
            RevealBehavior::WrongNonce => {
                let mut bytes = *self.s2.as_bytes();
                bytes[0] ^= 1;
                Nonce::from_bytes(bytes)
            }
        };
        match self.contract.reveal_and_settle(&nonce, self.operator_address) {
            Ok(()) => {}
            Err(LedgerError::RevealMismatch) => {
                self.status = SessionStatus::Disputed { reason: DisputeReason::RevealMismatch };
                return Err(LedgerError::RevealMismatch.into());
            }
            Err(other) => return Err(other.into()),
        }
        let share = self.terms.price / self.terms.required_responses;
        self.payouts =
            self.accepted_addresses().into_iter().map(|addr| (addr, share)).collect();
        self.operator_remainder = self.terms.price - share * self.terms.required_responses;
        self.status = SessionStatus::Settled;
        Ok(())
    }

    /// The consumer's final step: read `s2` from the event log, derive
    /// the key, decrypt the accepted ciphertexts, and invert the
    /// randomization into a frequency estimate. Any accepted ciphertext
    /// failing authentication raises a dispute naming the address.
    pub fn consumer_decrypt_and_aggregate(&mut self) -> Result<&FrequencyEstimate, ProtocolError> {
        let s2 = self.contract.revealed_nonce().ok_or(ProtocolError::NotSettled)?;
        let filter = self.filter.as_ref().ok_or(ProtocolError::FilterNotRecorded)?;
        let sk = crypto::derive_key(&self.s1, &s2);
        let n = self.terms.query.len();
        let mut counts = vec![0u64; n];
        let mut decrypted = Vec::new();
        for (submission, _) in
            self.submissions.iter().zip(filter.bits()).filter(|(_, &accepted)| accepted)
        {
            let bits = crypto::decrypt(&sk, &submission.ciphertext)
                .ok()
                .and_then(|plain| crypto::decode_response_bits(&plain).ok())
                .filter(|bits| bits.len() == n);
            let Some(bits) = bits else {
                let address = submission.address;
                self.status = SessionStatus::Disputed {
                    reason: DisputeReason::IntegrityFailure { address },
                };
                return Err(ProtocolError::IntegrityFailure { address });
            };
            for (count, &bit) in counts.iter_mut().zip(bits.bits()) {
                *count += u64::from(bit);
            }
            decrypted.push(DecryptedResponse { address: submission.address, bits });
        }
        let estimate = ldp::estimate_counts(
            &counts,
            self.terms.required_responses,
            self.terms.coin_bias,
        )?;
        self.decrypted = decrypted;
        Ok(self.estimate.insert(estimate))
    }

    fn accepted_addresses(&self) -> Vec<Address> {
        match &self.filter {
            Some(filter) => self
                .submissions
                .iter()
                .zip(filter.bits())
                .filter(|(_, &accepted)| accepted)
                .map(|(s, _)| s.address)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Flips one bit in a stored submission's encrypted body;
    /// fault-injection hook for the integrity-dispute path.
    pub fn tamper_submission(&mut self, index: usize) -> Result<(), ProtocolError> {
        let submission =
            self.submissions.get_mut(index).ok_or(ProtocolError::UnknownSubmission(index))?;
        submission.ciphertext.tamper_body_bit(0);
        Ok(())
    }

    pub fn transcript(&self) -> SessionTranscript {
        SessionTranscript {
            terms: self.terms.clone(),
            status: self.status.clone(),
            s1: self.s1,
            s2_revealed: self.contract.revealed_nonce(),
            contract: self.contract.clone(),
            submissions: self.submissions.clone(),
            filter: self.filter.clone(),
            payouts: self.payouts.clone(),
            operator_remainder: self.operator_remainder,
            decrypted_responses: self.decrypted.clone(),
            estimate: self.estimate.clone(),
        }
    }
}

/// True iff `H(canonical ciphertext)` matches the digest recorded on
/// chain for the submission's address.
pub fn verify_response_integrity(
    submission: &Submission,
    contract: &ContractState,
) -> Result<bool, ProtocolError> {
    let recorded = contract
        .recorded_digest(submission.address)
        .ok_or(ProtocolError::MissingRecord(submission.address))?;
    Ok(crypto::hash(&submission.ciphertext.canonical_bytes()) == recorded)
}

/// True iff `H(canonical F)` matches the filter digest recorded on chain.
pub fn verify_filter(
    filter: &FilterVector,
    contract: &ContractState,
) -> Result<bool, ProtocolError> {
    let recorded = contract.filter_digest().ok_or(ProtocolError::FilterNotRecorded)?;
    Ok(crypto::hash(&filter.canonical_bytes()) == recorded)
}

/// Fault switches for demonstrating the dispute paths without editing
/// code. `tamper_submission` flips a ciphertext bit after settlement so
/// decryption (and integrity verification) fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultInjection {
    pub wrong_reveal: bool,
    pub tamper_submission: Option<usize>,
}

/// Declarative description of a whole scripted session.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub n_choices: usize,
    pub price: u64,
    pub required_responses: u64,
    pub providers: u64,
    pub coin_bias: CoinBias,
    pub predicate: MetadataPredicate,
    pub seed: u64,
    pub fault: FaultInjection,
}

const CAPTURE_EPOCH: u64 = 1_700_000_000;

/// Scripted end-to-end run: publish, respond, filter, settle, decrypt.
///
/// Provider truths are drawn uniformly over the choices, regions
/// alternate between `north` and `south` by coin flip, and capture times
/// increase from a fixed epoch. Every draw comes from the provider's own
/// stream of `spec.seed`, so transcripts are byte-stable. Sessions that
/// stop early (threshold not met, dispute) still return their transcript;
/// `Err` is reserved for invalid specs.
pub fn run_session(
    spec: &SessionSpec,
    schedule: GasSchedule,
) -> Result<SessionTranscript, ProtocolError> {
    let terms = MarketTerms::new(
        Query::numbered(spec.n_choices)?,
        spec.price,
        spec.required_responses,
        spec.coin_bias,
    )?;
    let n = spec.n_choices;
    let mut session = publish_query(terms, schedule, spec.seed)?;

    for k in 0..spec.providers {
        let mut provider_rng = rng::stream(spec.seed, rng::DOMAIN_PROVIDER, k);
        let psk = PreSharedKey::random(&mut provider_rng);
        let choice = provider_rng.gen_range(0..n);
        let metadata = SubmissionMetadata {
            region: if provider_rng.gen_bool(0.5) { "north" } else { "south" }.to_string(),
            capture_time: CAPTURE_EPOCH + k,
        };
        session.provider_respond(&psk, choice, metadata, &mut provider_rng)?;
    }

    match session.operator_filter(|md| spec.predicate.matches(md)) {
        Ok(_) => {}
        Err(ProtocolError::ThresholdNotMet { .. }) => return Ok(session.transcript()),
        Err(other) => return Err(other),
    }

    let reveal =
        if spec.fault.wrong_reveal { RevealBehavior::WrongNonce } else { RevealBehavior::Honest };
    match session.consumer_settle_with(reveal) {
        Ok(()) => {}
        Err(ProtocolError::Ledger(LedgerError::RevealMismatch)) => {
            return Ok(session.transcript());
        }
        Err(other) => return Err(other),
    }

    if let Some(index) = spec.fault.tamper_submission {
        session.tamper_submission(index)?;
    }

    match session.consumer_decrypt_and_aggregate() {
        Ok(_) => {}
        Err(ProtocolError::IntegrityFailure { .. }) => return Ok(session.transcript()),
        Err(other) => return Err(other),
    }
    Ok(session.transcript())
}

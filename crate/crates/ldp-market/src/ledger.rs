//! Simulated blockchain contract: a single-writer state machine that
//! records commitments, holds the deposit, verifies the nonce reveal, and
//! meters gas per operation.
//!
//! The event log is append-only and sufficient to replay the exact final
//! state; failed calls (wrong phase, duplicate address, short deposit)
//! mutate nothing and cost no gas. The one exception is a rejected
//! reveal, which leaves a log entry but keeps the deposit untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest, Nonce};

/// 160-bit party identifier, unique per party within a session.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address([u8; 20]);
crate::crypto::impl_hex_serde!(Address, 20, "address");

impl Address {
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 20];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }
}

/// Gas units charged per successful contract operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub deploy: u64,
    pub record_response: u64,
    pub record_filter: u64,
    pub deposit: u64,
    pub reveal_and_transfer: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            deploy: 660_809,
            record_response: 74_537,
            record_filter: 63_309,
            deposit: 23_642,
            reveal_and_transfer: 36_269,
        }
    }
}

impl GasSchedule {
    /// Total gas of one successful session excluding per-response
    /// recording; constant no matter how many providers participate.
    pub fn fixed_overhead(&self) -> u64 {
        self.deploy + self.record_filter + self.deposit + self.reveal_and_transfer
    }

    fn validate(self) -> Result<Self, LedgerError> {
        let entries = [
            self.deploy,
            self.record_response,
            self.record_filter,
            self.deposit,
            self.reveal_and_transfer,
        ];
        if entries.contains(&0) {
            return Err(LedgerError::Config("gas schedule entries must be positive".into()));
        }
        Ok(self)
    }
}

/// Display-time conversion from gas to fiat, pinned so the default rate
/// reproduces the reference cost table (deployment = $25.40).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiatRate {
    pub usd_per_gas: f64,
}

impl Default for FiatRate {
    fn default() -> Self {
        Self { usd_per_gas: 25.40 / 660_809.0 }
    }
}

impl FiatRate {
    /// Gas cost in dollars, rounded to cents.
    pub fn usd(&self, gas: u64) -> f64 {
        (gas as f64 * self.usd_per_gas * 100.0).round() / 100.0
    }
}

/// Parses a `key = value` configuration for the gas schedule and the
/// optional fiat rate. Keys absent from the file keep their defaults;
/// unknown keys are rejected.
pub fn load_gas_config(text: &str) -> Result<(GasSchedule, Option<FiatRate>), LedgerError> {
    let pairs = crate::config::parse_key_values(text).map_err(LedgerError::Config)?;
    let mut schedule = GasSchedule::default();
    let mut fiat = None;
    for (key, value) in &pairs {
        let gas_slot = match key.as_str() {
            "deploy" => &mut schedule.deploy,
            "record_response" => &mut schedule.record_response,
            "record_filter" => &mut schedule.record_filter,
            "deposit" => &mut schedule.deposit,
            "reveal_and_transfer" => &mut schedule.reveal_and_transfer,
            "usd_per_gas" => {
                let rate: f64 = value
                    .parse()
                    .map_err(|_| LedgerError::Config(format!("bad usd_per_gas `{value}`")))?;
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(LedgerError::Config(format!("bad usd_per_gas `{value}`")));
                }
                fiat = Some(FiatRate { usd_per_gas: rate });
                continue;
            }
            other => return Err(LedgerError::Config(format!("unknown key `{other}`"))),
        };
        *gas_slot = value
            .parse()
            .map_err(|_| LedgerError::Config(format!("bad gas value `{value}` for {key}")))?;
    }
    Ok((schedule.validate()?, fiat))
}

/// Contract lifecycle. Transitions run strictly forward; `Collecting` is
/// entered on the first recorded response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Deployed,
    Collecting,
    Filtered,
    Deposited,
    Settled,
}

/// What happened on chain, with enough parameters to replay the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "params", rename_all = "snake_case")]
pub enum EventKind {
    Deploy { query_digest: Digest, s2_commitment: Digest, price: u64, required_responses: u64 },
    RecordResponse { address: Address, response_digest: Digest },
    RecordFilter { filter_digest: Digest, accepted_count: u64 },
    Deposit { amount: u64 },
    RevealAndTransfer { s2: Nonce, operator: Address, amount: u64 },
    RevealRejected { s2: Nonce },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub gas: u64,
    pub phase_after: Phase,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("price and required responses must be positive")]
    InvalidTerms,
    #[error("operation requires phase {expected:?}, contract is in {actual:?}")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("address {0} already recorded a response")]
    DuplicateAddress(Address),
    #[error("accepted count {accepted} is below the required {required} responses")]
    ThresholdNotMet { accepted: u64, required: u64 },
    #[error("accepted count {accepted} exceeds the {recorded} recorded responses")]
    AcceptedExceedsRecords { accepted: u64, recorded: u64 },
    #[error("deposit of {amount} does not match the agreed price {price}")]
    WrongDeposit { amount: u64, price: u64 },
    #[error("revealed nonce does not match the stored commitment; deposit retained")]
    RevealMismatch,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("event log is not replayable: {0}")]
    CorruptLog(String),
}

/// The on-chain record for one market session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractState {
    phase: Phase,
    query_digest: Digest,
    s2_commitment: Digest,
    price: u64,
    required_responses: u64,
    response_records: Vec<(Address, Digest)>,
    filter_digest: Option<Digest>,
    deposit_balance: u64,
    transferred_out: u64,
    gas_used: u64,
    schedule: GasSchedule,
    events: Vec<Event>,
}

impl ContractState {
    /// Deploys the contract holding the query and s2 commitments.
    pub fn deploy(
        schedule: GasSchedule,
        query_digest: Digest,
        s2_commitment: Digest,
        price: u64,
        required_responses: u64,
    ) -> Result<Self, LedgerError> {
        if price == 0 || required_responses == 0 {
            return Err(LedgerError::InvalidTerms);
        }
        let schedule = schedule.validate()?;
        let mut state = Self {
            phase: Phase::Deployed,
            query_digest,
            s2_commitment,
            price,
            required_responses,
            response_records: Vec::new(),
            filter_digest: None,
            deposit_balance: 0,
            transferred_out: 0,
            gas_used: 0,
            schedule,
            events: Vec::new(),
        };
        state.log(
            EventKind::Deploy { query_digest, s2_commitment, price, required_responses },
            schedule.deploy,
        );
        Ok(state)
    }

    /// Records one provider's response commitment. Each address may
    /// record at most once; a duplicate signals a replay and is rejected
    /// without touching state or gas.
    pub fn record_response_hash(&mut self, addr: Address, h_cr: Digest) -> Result<(), LedgerError> {
        if !matches!(self.phase, Phase::Deployed | Phase::Collecting) {
            return Err(LedgerError::WrongPhase {
                expected: "Deployed or Collecting",
                actual: self.phase,
            });
        }
        if self.response_records.iter().any(|(a, _)| *a == addr) {
            return Err(LedgerError::DuplicateAddress(addr));
        }
        self.response_records.push((addr, h_cr));
        self.phase = Phase::Collecting;
        self.log(
            EventKind::RecordResponse { address: addr, response_digest: h_cr },
            self.schedule.record_response,
        );
        Ok(())
    }

    /// Publishes the filter commitment once enough responses are accepted.
    pub fn record_filter_hash(&mut self, h_f: Digest, accepted_count: u64) -> Result<(), LedgerError> {
        if self.phase != Phase::Collecting {
            return Err(LedgerError::WrongPhase { expected: "Collecting", actual: self.phase });
        }
        if accepted_count < self.required_responses {
            return Err(LedgerError::ThresholdNotMet {
                accepted: accepted_count,
                required: self.required_responses,
            });
        }
        let recorded = self.response_records.len() as u64;
        if accepted_count > recorded {
            return Err(LedgerError::AcceptedExceedsRecords { accepted: accepted_count, recorded });
        }
        self.filter_digest = Some(h_f);
        self.phase = Phase::Filtered;
        self.log(
            EventKind::RecordFilter { filter_digest: h_f, accepted_count },
            self.schedule.record_filter,
        );
        Ok(())
    }

    /// Locks the consumer's payment. The deposit must equal the agreed
    /// price exactly.
    pub fn make_deposit(&mut self, amount: u64) -> Result<(), LedgerError> {
        if self.phase != Phase::Filtered {
            return Err(LedgerError::WrongPhase { expected: "Filtered", actual: self.phase });
        }
        if amount != self.price {
            return Err(LedgerError::WrongDeposit { amount, price: self.price });
        }
        self.deposit_balance = amount;
        self.phase = Phase::Deposited;
        self.log(EventKind::Deposit { amount }, self.schedule.deposit);
        Ok(())
    }

    /// Verifies `H(s2)` against the stored commitment; on a match the
    /// deposit transfers to the operator and `s2` becomes publicly
    /// readable from the event log. A mismatch retains the deposit and
    /// logs the rejected attempt.
    pub fn reveal_and_settle(&mut self, s2: &Nonce, operator: Address) -> Result<(), LedgerError> {
        if self.phase != Phase::Deposited {
            return Err(LedgerError::WrongPhase { expected: "Deposited", actual: self.phase });
        }
        if crypto::hash(s2.as_bytes()) != self.s2_commitment {
            self.log(EventKind::RevealRejected { s2: *s2 }, 0);
            return Err(LedgerError::RevealMismatch);
        }
        let amount = self.deposit_balance;
        self.deposit_balance = 0;
        self.transferred_out += amount;
        self.phase = Phase::Settled;
        self.log(
            EventKind::RevealAndTransfer { s2: *s2, operator, amount },
            self.schedule.reveal_and_transfer,
        );
        Ok(())
    }

    /// Gas consumed per operation, with optional fiat conversion.
    pub fn gas_report(&self, fiat: Option<FiatRate>) -> GasReport {
        let mut counts: BTreeMap<&'static str, u64> = BTreeMap::new();
        for event in &self.events {
            let name = match event.kind {
                EventKind::Deploy { .. } => "deploy",
                EventKind::RecordResponse { .. } => "record_response",
                EventKind::RecordFilter { .. } => "record_filter",
                EventKind::Deposit { .. } => "deposit",
                EventKind::RevealAndTransfer { .. } => "reveal_and_transfer",
                EventKind::RevealRejected { .. } => continue,
            };
            *counts.entry(name).or_insert(0) += 1;
        }
        let rows = [
            ("deploy", self.schedule.deploy),
            ("record_response", self.schedule.record_response),
            ("record_filter", self.schedule.record_filter),
            ("deposit", self.schedule.deposit),
            ("reveal_and_transfer", self.schedule.reveal_and_transfer),
        ];
        let per_operation: Vec<OperationCost> = rows
            .iter()
            .map(|&(op, gas_each)| {
                let count = counts.get(op).copied().unwrap_or(0);
                let gas_total = gas_each * count;
                OperationCost {
                    op: op.to_string(),
                    count,
                    gas_each,
                    gas_total,
                    fiat_usd: fiat.map(|r| r.usd(gas_total)),
                }
            })
            .collect();
        GasReport {
            per_operation,
            total_gas: self.gas_used,
            total_fiat_usd: fiat.map(|r| r.usd(self.gas_used)),
        }
    }

    /// Rebuilds a state by folding the event log; the result equals the
    /// state that produced the log.
    pub fn replay(schedule: GasSchedule, events: &[Event]) -> Result<Self, LedgerError> {
        let mut iter = events.iter();
        let first = iter.next().ok_or_else(|| LedgerError::CorruptLog("empty log".into()))?;
        let EventKind::Deploy { query_digest, s2_commitment, price, required_responses } =
            first.kind
        else {
            return Err(LedgerError::CorruptLog("log does not start with deploy".into()));
        };
        let mut state =
            Self::deploy(schedule, query_digest, s2_commitment, price, required_responses)?;
        for event in iter {
            match &event.kind {
                EventKind::Deploy { .. } => {
                    return Err(LedgerError::CorruptLog("second deploy in log".into()));
                }
                EventKind::RecordResponse { address, response_digest } => {
                    state.record_response_hash(*address, *response_digest)?;
                }
                EventKind::RecordFilter { filter_digest, accepted_count } => {
                    state.record_filter_hash(*filter_digest, *accepted_count)?;
                }
                EventKind::Deposit { amount } => state.make_deposit(*amount)?,
                EventKind::RevealAndTransfer { s2, operator, .. } => {
                    state.reveal_and_settle(s2, *operator)?;
                }
                EventKind::RevealRejected { s2 } => {
                    match state.reveal_and_settle(s2, Address::from_bytes([0; 20])) {
                        Err(LedgerError::RevealMismatch) => {}
                        other => {
                            return Err(LedgerError::CorruptLog(format!(
                                "logged rejected reveal replayed as {other:?}"
                            )));
                        }
                    }
                }
            }
        }
        if state.events != events {
            return Err(LedgerError::CorruptLog("replayed log diverges".into()));
        }
        Ok(state)
    }

    /// The event log as JSON lines.
    pub fn export_events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// The nonce revealed at settlement, read back from the event log.
    pub fn revealed_nonce(&self) -> Option<Nonce> {
        self.events.iter().find_map(|e| match &e.kind {
            EventKind::RevealAndTransfer { s2, .. } => Some(*s2),
            _ => None,
        })
    }

    fn log(&mut self, kind: EventKind, gas: u64) {
        self.gas_used += gas;
        self.events.push(Event {
            seq: self.events.len() as u64,
            kind,
            gas,
            phase_after: self.phase,
        });
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn query_digest(&self) -> Digest {
        self.query_digest
    }

    pub fn s2_commitment(&self) -> Digest {
        self.s2_commitment
    }

    pub fn price(&self) -> u64 {
        self.price
    }

    pub fn required_responses(&self) -> u64 {
        self.required_responses
    }

    pub fn response_records(&self) -> &[(Address, Digest)] {
        &self.response_records
    }

    pub fn recorded_digest(&self, addr: Address) -> Option<Digest> {
        self.response_records.iter().find(|(a, _)| *a == addr).map(|(_, d)| *d)
    }

    pub fn filter_digest(&self) -> Option<Digest> {
        self.filter_digest
    }

    pub fn deposit_balance(&self) -> u64 {
        self.deposit_balance
    }

    pub fn transferred_out(&self) -> u64 {
        self.transferred_out
    }

    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    pub fn schedule(&self) -> GasSchedule {
        self.schedule
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationCost {
    pub op: String,
    pub count: u64,
    pub gas_each: u64,
    pub gas_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiat_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasReport {
    pub per_operation: Vec<OperationCost>,
    pub total_gas: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_fiat_usd: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;
    use crate::rng;

    fn digests() -> (Digest, Digest, Nonce) {
        let mut rng = rng::stream(0x1ED6E2, 0, 0);
        let s2 = Nonce::random(&mut rng);
        (hash(b"query"), hash(s2.as_bytes()), s2)
    }

    fn addr(tag: u8) -> Address {
        Address::from_bytes([tag; 20])
    }

    fn settled_state(providers: u8) -> (ContractState, Nonce) {
        let (qd, commit, s2) = digests();
        let mut state =
            ContractState::deploy(GasSchedule::default(), qd, commit, 1000, providers as u64)
                .unwrap();
        for i in 0..providers {
            state.record_response_hash(addr(i + 1), hash(&[i])).unwrap();
        }
        state.record_filter_hash(hash(b"filter"), providers as u64).unwrap();
        state.make_deposit(1000).unwrap();
        state.reveal_and_settle(&s2, addr(op_code())).unwrap();
        (state, s2)
    }

    fn op_code() -> u8 {
        0xEE
    }

    #[test]
    fn deploy_charges_table_gas_and_validates_terms() {
        let (qd, commit, _) = digests();
        let state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 5).unwrap();
        assert_eq!(state.gas_used(), 660_809);
        assert_eq!(state.phase(), Phase::Deployed);

        assert_eq!(
            ContractState::deploy(GasSchedule::default(), qd, commit, 0, 5),
            Err(LedgerError::InvalidTerms)
        );
        assert_eq!(
            ContractState::deploy(GasSchedule::default(), qd, commit, 10, 0),
            Err(LedgerError::InvalidTerms)
        );

        // Determinism: same inputs, identical states.
        let again = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 5).unwrap();
        assert_eq!(state, again);
    }

    #[test]
    fn record_response_meters_gas_and_rejects_replays() {
        let (qd, commit, _) = digests();
        let mut state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 5).unwrap();
        let before = state.gas_used();
        state.record_response_hash(addr(1), hash(b"cr1")).unwrap();
        assert_eq!(state.gas_used() - before, 74_537);
        assert_eq!(state.phase(), Phase::Collecting);

        let snapshot = state.clone();
        assert_eq!(
            state.record_response_hash(addr(1), hash(b"cr1-again")),
            Err(LedgerError::DuplicateAddress(addr(1)))
        );
        // Replay safety: the rejected call left no trace.
        assert_eq!(state, snapshot);
    }

    #[test]
    fn filter_threshold_and_phase_rules() {
        let (qd, commit, _) = digests();
        let mut state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 5).unwrap();
        for i in 0..5 {
            state.record_response_hash(addr(i + 1), hash(&[i])).unwrap();
        }
        assert_eq!(
            state.record_filter_hash(hash(b"f"), 4),
            Err(LedgerError::ThresholdNotMet { accepted: 4, required: 5 })
        );
        assert_eq!(
            state.record_filter_hash(hash(b"f"), 6),
            Err(LedgerError::AcceptedExceedsRecords { accepted: 6, recorded: 5 })
        );
        let before = state.gas_used();
        state.record_filter_hash(hash(b"f"), 5).unwrap();
        assert_eq!(state.gas_used() - before, 63_309);
        assert_eq!(state.phase(), Phase::Filtered);

        // Out-of-order calls are rejected without leaving any trace.
        let snapshot = state.clone();
        assert!(matches!(
            state.record_filter_hash(hash(b"f"), 5),
            Err(LedgerError::WrongPhase { .. })
        ));
        assert!(matches!(
            state.record_response_hash(addr(9), hash(b"late")),
            Err(LedgerError::WrongPhase { .. })
        ));
        assert_eq!(state, snapshot);
    }

    #[test]
    fn deposit_must_match_price_exactly() {
        let (qd, commit, _) = digests();
        let mut state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 1).unwrap();
        assert!(matches!(state.make_deposit(1000), Err(LedgerError::WrongPhase { .. })));
        state.record_response_hash(addr(1), hash(b"cr")).unwrap();
        state.record_filter_hash(hash(b"f"), 1).unwrap();
        assert_eq!(
            state.make_deposit(999),
            Err(LedgerError::WrongDeposit { amount: 999, price: 1000 })
        );
        let before = state.gas_used();
        state.make_deposit(1000).unwrap();
        assert_eq!(state.gas_used() - before, 23_642);
        assert_eq!(state.deposit_balance(), 1000);
    }

    #[test]
    fn reveal_settles_or_retains_deposit() {
        let (qd, commit, s2) = digests();
        let mut state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 1).unwrap();
        assert!(matches!(
            state.reveal_and_settle(&s2, addr(op_code())),
            Err(LedgerError::WrongPhase { .. })
        ));
        state.record_response_hash(addr(1), hash(b"cr")).unwrap();
        state.record_filter_hash(hash(b"f"), 1).unwrap();
        state.make_deposit(1000).unwrap();

        let mut wrong = *s2.as_bytes();
        wrong[0] ^= 1;
        let gas_before = state.gas_used();
        assert_eq!(
            state.reveal_and_settle(&Nonce::from_bytes(wrong), addr(op_code())),
            Err(LedgerError::RevealMismatch)
        );
        assert_eq!(state.deposit_balance(), 1000);
        assert_eq!(state.phase(), Phase::Deposited);
        assert_eq!(state.gas_used(), gas_before, "failed reveals cost no gas");
        assert!(matches!(state.events().last().unwrap().kind, EventKind::RevealRejected { .. }));

        state.reveal_and_settle(&s2, addr(op_code())).unwrap();
        assert_eq!(state.phase(), Phase::Settled);
        assert_eq!(state.deposit_balance(), 0);
        assert_eq!(state.transferred_out(), 1000);
        assert_eq!(state.gas_used() - gas_before, 36_269);
        assert_eq!(state.revealed_nonce(), Some(s2));
    }

    #[test]
    fn conservation_holds_at_every_step() {
        let (state, _) = settled_state(3);
        // Replay prefix by prefix and check the deposit conservation law.
        for end in 1..=state.events().len() {
            let prefix = ContractState::replay(state.schedule(), &state.events()[..end]).unwrap();
            let pot = prefix.deposit_balance() + prefix.transferred_out();
            assert!(pot == 0 || pot == prefix.price());
            assert!(prefix.transferred_out() == 0 || prefix.phase() == Phase::Settled);
        }
    }

    #[test]
    fn gas_totals_match_the_cost_table() {
        let (state, _) = settled_state(5);
        let fixed = GasSchedule::default().fixed_overhead();
        assert_eq!(fixed, 784_029);
        assert_eq!(state.gas_used(), fixed + 5 * 74_537);
        assert_eq!(state.gas_used(), 1_156_714);

        let (qd, commit, _) = digests();
        let mut three = ContractState::deploy(GasSchedule::default(), qd, commit, 10, 1).unwrap();
        for i in 0..3 {
            three.record_response_hash(addr(i + 1), hash(&[i])).unwrap();
        }
        assert_eq!(three.gas_used(), 660_809 + 3 * 74_537);
        assert_eq!(three.gas_used(), 884_420);
    }

    #[test]
    fn gas_report_reproduces_fiat_fixture() {
        let (qd, commit, _) = digests();
        let state = ContractState::deploy(GasSchedule::default(), qd, commit, 1000, 5).unwrap();
        let report = state.gas_report(Some(FiatRate::default()));
        assert_eq!(report.total_gas, 660_809);
        assert_eq!(report.total_fiat_usd, Some(25.40));
        let deploy_row = &report.per_operation[0];
        assert_eq!((deploy_row.op.as_str(), deploy_row.count), ("deploy", 1));
        assert_eq!(deploy_row.fiat_usd, Some(25.40));

        // The pinned rate reproduces the full reference fiat column.
        let rate = FiatRate::default();
        assert_eq!(rate.usd(660_809), 25.40);
        assert_eq!(rate.usd(74_537), 2.87);
        assert_eq!(rate.usd(63_309), 2.43);
        assert_eq!(rate.usd(23_642), 0.91);
        assert_eq!(rate.usd(36_269), 1.39);
    }

    #[test]
    fn gas_report_counts_every_operation() {
        let (state, _) = settled_state(5);
        let report = state.gas_report(None);
        let by_op: BTreeMap<_, _> =
            report.per_operation.iter().map(|r| (r.op.as_str(), r.count)).collect();
        assert_eq!(by_op["deploy"], 1);
        assert_eq!(by_op["record_response"], 5);
        assert_eq!(by_op["record_filter"], 1);
        assert_eq!(by_op["deposit"], 1);
        assert_eq!(by_op["reveal_and_transfer"], 1);
        assert_eq!(report.total_fiat_usd, None);
        let summed: u64 = report.per_operation.iter().map(|r| r.gas_total).sum();
        assert_eq!(summed, report.total_gas);
    }

    #[test]
    fn event_log_replays_to_identical_state() {
        let (state, _) = settled_state(4);
        let replayed = ContractState::replay(state.schedule(), state.events()).unwrap();
        assert_eq!(replayed, state);

        // Logs with a rejected reveal replay too.
        let (qd, commit, s2) = digests();
        let mut disputed =
            ContractState::deploy(GasSchedule::default(), qd, commit, 500, 1).unwrap();
        disputed.record_response_hash(addr(1), hash(b"cr")).unwrap();
        disputed.record_filter_hash(hash(b"f"), 1).unwrap();
        disputed.make_deposit(500).unwrap();
        let mut wrong = *s2.as_bytes();
        wrong[31] ^= 0x80;
        let _ = disputed.reveal_and_settle(&Nonce::from_bytes(wrong), addr(op_code()));
        let replayed = ContractState::replay(disputed.schedule(), disputed.events()).unwrap();
        assert_eq!(replayed, disputed);
    }

    #[test]
    fn jsonl_export_has_one_line_per_event() {
        let (state, _) = settled_state(2);
        let jsonl = state.export_events_jsonl();
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), state.events().len());
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["op"], "deploy");
        assert_eq!(first["seq"], 0);
        assert_eq!(first["gas"], 660_809);
        assert_eq!(first["phase_after"], "Deployed");
        assert!(first["params"]["query_digest"].is_string());
    }

    #[test]
    fn state_transfers_between_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<ContractState>();
        assert_send_sync::<Event>();
        assert_send_sync::<GasReport>();
    }

    #[test]
    fn gas_config_parses_overrides_and_rejects_junk() {
        let (schedule, fiat) = load_gas_config("deploy = 111\nusd_per_gas = 0.0001\n").unwrap();
        assert_eq!(schedule.deploy, 111);
        assert_eq!(schedule.record_response, 74_537);
        assert_eq!(fiat, Some(FiatRate { usd_per_gas: 0.0001 }));

        assert!(matches!(load_gas_config("warp_speed = 1"), Err(LedgerError::Config(_))));
        assert!(matches!(load_gas_config("deploy = fast"), Err(LedgerError::Config(_))));
        assert!(matches!(load_gas_config("deploy = 0"), Err(LedgerError::Config(_))));
    }
}

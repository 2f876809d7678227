//! The two dispute paths and how the on-chain commitments resolve them:
//! a wrong nonce reveal leaves the deposit locked, and a tampered
//! ciphertext is pinned to the offender by the recorded H(C_R).
//!
//! Run with: cargo run --example dispute_resolution

use ldp_market::ledger::GasSchedule;
use ldp_market::protocol::{
    run_session, verify_filter, verify_response_integrity, FaultInjection, MetadataPredicate,
    SessionSpec, SessionStatus,
};
use ldp_market::ldp::CoinBias;

fn spec(fault: FaultInjection) -> SessionSpec {
    SessionSpec {
        n_choices: 6,
        price: 600,
        required_responses: 4,
        providers: 6,
        coin_bias: CoinBias::FAIR,
        predicate: MetadataPredicate::All,
        seed: 31,
        fault,
    }
}

fn main() {
    // Dispute 1: the operator reveals a wrong nonce. H(s2) does not
    // match, so the contract keeps the deposit and logs the attempt.
    let wrong = run_session(
        &spec(FaultInjection { wrong_reveal: true, tamper_submission: None }),
        GasSchedule::default(),
    )
    .unwrap();
    println!("wrong reveal -> status {:?}", wrong.status);
    println!("  deposit retained on chain: {}", wrong.contract.deposit_balance());
    println!("  payouts made: {}", wrong.payouts.len());

    // Dispute 2: an accepted ciphertext is tampered after recording.
    // Decryption fails authentication and the recorded hash proves which
    // submission changed.
    let tampered = run_session(
        &spec(FaultInjection { wrong_reveal: false, tamper_submission: Some(2) }),
        GasSchedule::default(),
    )
    .unwrap();
    match &tampered.status {
        SessionStatus::Disputed { reason } => println!("tampered ciphertext -> {reason:?}"),
        other => println!("unexpected status {other:?}"),
    }
    for submission in &tampered.submissions {
        let ok = verify_response_integrity(submission, &tampered.contract).unwrap();
        println!("  H(C_R) check for {}: {}", submission.address, ok);
    }

    // The published filter still verifies against its on-chain hash.
    let filter_ok = verify_filter(tampered.filter.as_ref().unwrap(), &tampered.contract).unwrap();
    println!("  H(F) check: {filter_ok}");
}

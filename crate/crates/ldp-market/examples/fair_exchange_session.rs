//! One full market session, step by step through the library API:
//! publish the query, have providers respond under randomized response,
//! filter, deposit, reveal, pay out, and decrypt the aggregate.
//!
//! Run with: cargo run --example fair_exchange_session

use ldp_market::crypto::PreSharedKey;
use ldp_market::ldp::{CoinBias, Query};
use ldp_market::ledger::GasSchedule;
use ldp_market::protocol::{publish_query, MarketTerms, SubmissionMetadata};
use ldp_market::rng;
use rand::Rng;

fn main() {
    let seed = 7u64;
    let terms = MarketTerms::new(
        Query::numbered(8).unwrap(),
        1003, // odd on purpose: the operator keeps the remainder
        5,
        CoinBias::FAIR,
    )
    .unwrap();

    // Consumer draws s1, operator draws s2 and commits H(s2) on chain.
    let mut session = publish_query(terms, GasSchedule::default(), seed).unwrap();
    println!(
        "deployed: phase {:?}, gas {}, H(s2) = {}",
        session.contract().phase(),
        session.contract().gas_used(),
        session.contract().s2_commitment()
    );

    // Ten providers enroll, randomize, encrypt, and commit H(C_R).
    for k in 0..10 {
        let mut provider = rng::stream(seed, rng::DOMAIN_PROVIDER, k);
        let psk = PreSharedKey::random(&mut provider);
        let choice = provider.gen_range(0..8);
        let metadata = SubmissionMetadata {
            region: if k % 2 == 0 { "north" } else { "south" }.to_string(),
            capture_time: 1_700_000_000 + k,
        };
        let address = session.provider_respond(&psk, choice, metadata, &mut provider).unwrap();
        println!("provider {k} recorded under {address}");
    }

    // Operator accepts the first N_R valid submissions in chain order.
    let filter = session.operator_filter(|md| md.region == "north").unwrap().clone();
    println!("filter committed: {:?} (popcount {})", filter.bits(), filter.popcount());

    // Deposit, reveal s2, transfer, split the price.
    session.consumer_settle().unwrap();
    let transcript = session.transcript();
    println!("settled: phase {:?}", transcript.contract.phase());
    for (address, amount) in &transcript.payouts {
        println!("  payout {amount} -> {address}");
    }
    println!("  operator remainder: {}", transcript.operator_remainder);

    // Consumer reads s2 from the event log and decrypts the aggregate.
    let estimate = session.consumer_decrypt_and_aggregate().unwrap();
    println!("estimated counts (clamped): {:?}", estimate.clamped);
    println!("total gas: {}", session.contract().gas_used());
}

//! The contract's append-only event log: exported as JSON lines, and
//! folded back into a state identical to the one that produced it.
//!
//! Run with: cargo run --example event_log_replay

use ldp_market::ldp::CoinBias;
use ldp_market::ledger::{ContractState, GasSchedule};
use ldp_market::protocol::{run_session, FaultInjection, MetadataPredicate, SessionSpec};

fn main() {
    let transcript = run_session(
        &SessionSpec {
            n_choices: 4,
            price: 90,
            required_responses: 3,
            providers: 3,
            coin_bias: CoinBias::FAIR,
            predicate: MetadataPredicate::All,
            seed: 12,
            fault: FaultInjection::default(),
        },
        GasSchedule::default(),
    )
    .unwrap();

    println!("event log, one JSON line per operation:\n");
    println!("{}", transcript.contract.export_events_jsonl());

    let replayed =
        ContractState::replay(transcript.contract.schedule(), transcript.contract.events())
            .unwrap();
    println!("\nreplay(fold events) == final state: {}", replayed == transcript.contract);
    println!("phase {:?}, gas {}, transferred out {}",
        replayed.phase(),
        replayed.gas_used(),
        replayed.transferred_out()
    );
}

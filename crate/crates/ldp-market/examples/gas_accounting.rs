//! Gas metering and the fiat fixture: per-operation costs of a settled
//! session, and the session-size independence of everything except
//! response recording.
//!
//! Run with: cargo run --example gas_accounting

use ldp_market::ldp::CoinBias;
use ldp_market::ledger::{FiatRate, GasSchedule};
use ldp_market::protocol::{run_session, FaultInjection, MetadataPredicate, SessionSpec};

fn main() {
    let schedule = GasSchedule::default();
    let transcript = run_session(
        &SessionSpec {
            n_choices: 20,
            price: 1000,
            required_responses: 5,
            providers: 5,
            coin_bias: CoinBias::FAIR,
            predicate: MetadataPredicate::All,
            seed: 1,
            fault: FaultInjection::default(),
        },
        schedule,
    )
    .unwrap();

    let report = transcript.contract.gas_report(Some(FiatRate::default()));
    println!("{:>22} {:>6} {:>10} {:>10} {:>8}", "operation", "count", "gas each", "gas total", "USD");
    for row in &report.per_operation {
        println!(
            "{:>22} {:>6} {:>10} {:>10} {:>8.2}",
            row.op,
            row.count,
            row.gas_each,
            row.gas_total,
            row.fiat_usd.unwrap()
        );
    }
    println!(
        "{:>22} {:>6} {:>10} {:>10} {:>8.2}",
        "total", "", "", report.total_gas, report.total_fiat_usd.unwrap()
    );

    // Everything except record_response is a fixed per-session overhead.
    println!("\nfixed overhead (deploy + filter + deposit + reveal): {}", schedule.fixed_overhead());
    for providers in [1u64, 10, 100] {
        let t = run_session(
            &SessionSpec {
                n_choices: 4,
                price: providers * 3,
                required_responses: providers,
                providers,
                coin_bias: CoinBias::FAIR,
                predicate: MetadataPredicate::All,
                seed: 2,
                fault: FaultInjection::default(),
            },
            schedule,
        )
        .unwrap();
        println!(
            "  {providers:>4} providers -> total {} = fixed {} + {} x {}",
            t.contract.gas_used(),
            schedule.fixed_overhead(),
            providers,
            schedule.record_response
        );
    }
}

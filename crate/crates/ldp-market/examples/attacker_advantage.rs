//! Closed-form attacker advantage: how much a single randomized bit
//! lifts an attacker's posterior over the blind 1/n guess, for the fair
//! coin (limit 3) and the non-fair 20% coin (limit 1.5).
//!
//! Run with: cargo run --example attacker_advantage

use ldp_market::ldp::CoinBias;
use ldp_market::sim::advantage_sweep;

fn main() {
    let ns = [1usize, 2, 4, 8, 16, 32, 100, 1000, 1_000_000];
    let rows = advantage_sweep(&ns, &[CoinBias::FAIR, CoinBias::NON_FAIR]).unwrap();

    println!("{:>9} {:>5} {:>10} {:>12} {:>10}", "n", "f", "p_guess", "p_posterior", "advantage");
    for row in &rows {
        println!(
            "{:>9} {:>5} {:>10.6} {:>12.6} {:>10.6}",
            row.n, row.f, row.p_guess, row.p_posterior, row.advantage
        );
    }
    println!("\nthe advantage is monotone in n and approaches (f + (1-f)/2) / ((1-f)/2):");
    println!("  f = 0.5 -> 3.0    f = 0.2 -> 1.5");
}

//! Two-coin randomized response end to end: encode truthful choices,
//! randomize them per bit, aggregate the noisy vectors, and invert the
//! noise back into per-choice frequency estimates.
//!
//! Run with: cargo run --example randomized_response

use ldp_market::ldp::{encode_truth, estimate_counts, randomize, CoinBias, Query};
use ldp_market::rng;

fn main() {
    let query = Query::numbered(6).unwrap();
    let f = CoinBias::FAIR;
    let true_counts = [4000u64, 2500, 1500, 1000, 700, 300];
    let total: u64 = true_counts.iter().sum();

    // Each provider randomizes their one-hot truth on their own stream.
    let mut ones = vec![0u64; query.len()];
    let mut provider = 0u64;
    for (choice, &count) in true_counts.iter().enumerate() {
        for _ in 0..count {
            let mut coins = rng::stream(2024, rng::DOMAIN_PROVIDER, provider);
            provider += 1;
            let truth = encode_truth(&query, choice).unwrap();
            let noisy = randomize(&truth, f, &mut coins).unwrap();
            for (one, &bit) in ones.iter_mut().zip(noisy.bits()) {
                *one += u64::from(bit);
            }
        }
    }

    let estimate = estimate_counts(&ones, total, f).unwrap();
    println!("{total} providers, f = {}, per-bit one counts -> estimates\n", f.value());
    println!("{:>6} {:>10} {:>10} {:>12} {:>10}", "choice", "true", "observed", "raw est", "clamped");
    for i in 0..query.len() {
        println!(
            "{:>6} {:>10} {:>10} {:>12.1} {:>10.1}",
            i, true_counts[i], ones[i], estimate.raw[i], estimate.clamped[i]
        );
    }

    let distribution = estimate.distribution();
    println!("\nestimated distribution: {:?}", distribution.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>());
}

//! Estimator accuracy versus provider count: truths from a discretized
//! normal, randomized responses aggregated and inverted, and the
//! total-variation gap between true and estimated distributions
//! shrinking as providers grow.
//!
//! Run with: cargo run --example accuracy_experiment

use ldp_market::ldp::CoinBias;
use ldp_market::sim::{run_accuracy_experiment, ExperimentConfig};

fn main() {
    let config = ExperimentConfig::with_defaults(CoinBias::FAIR, 42);
    let report = run_accuracy_experiment(&config).unwrap();

    println!(
        "n = {}, truths ~ round(normal({}, {})), f = {}\n",
        config.n_choices,
        config.mean,
        config.sd,
        config.coin_bias.value()
    );
    println!("{:>10} {:>12} {:>10}", "providers", "TV distance", "max |z|");
    for run in &report.runs {
        let max_z = run.z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        println!("{:>10} {:>12.4} {:>10.2}", run.providers, run.tv_distance, max_z);
    }

    let last = report.runs.last().unwrap();
    println!("\ntrue vs estimated counts at N = {}:", last.providers);
    for (bin, (&truth, &est)) in last.true_counts.iter().zip(&last.estimated_counts).enumerate() {
        let bar = "#".repeat((est / 40.0).round() as usize);
        println!("{bin:>3} {truth:>6} {est:>9.1}  {bar}");
    }
}

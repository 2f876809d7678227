//! Sequential-attacker trade-off: an attacker who watches the running
//! mean after every submission reconstructs each value exactly without
//! noise, and collapses toward the analytic posterior bound with
//! randomized response.
//!
//! Run with: cargo run --example attacker_experiment

use ldp_market::ldp::CoinBias;
use ldp_market::sim::{
    analytic_step_success, run_attacker_experiment, AttackerMode, ExperimentConfig,
};

fn main() {
    let config = ExperimentConfig::with_defaults(CoinBias::FAIR, 5);
    let steps = 10_000;

    let clear = run_attacker_experiment(&config, AttackerMode::NoNoise, steps).unwrap();
    let noisy = run_attacker_experiment(&config, AttackerMode::Rappor, steps).unwrap();
    let analytic = analytic_step_success(config.n_choices, config.coin_bias);

    println!("{steps} sequential submissions, n = {}, f = {}\n", config.n_choices, config.coin_bias.value());
    println!("{:>10} {:>18} {:>12}", "mode", "exact-guess rate", "MAE");
    println!("{:>10} {:>18.4} {:>12.3}", "no-noise", clear.exact_guess_rate, clear.mean_absolute_error);
    println!("{:>10} {:>18.4} {:>12.3}", "rappor", noisy.exact_guess_rate, noisy.mean_absolute_error);
    println!("\nanalytic per-step success under rappor: {analytic:.4}");
    println!("(compare with the blind guess 1/n = {:.4})", 1.0 / config.n_choices as f64);

    println!("\nfirst ten steps, rappor mode:");
    println!("{:>5} {:>5} {:>6} {:>14}", "step", "true", "guess", "running mean");
    for step in noisy.steps.iter().take(10) {
        println!(
            "{:>5} {:>5} {:>6} {:>14.4}",
            step.step, step.true_value, step.guess, step.running_mean
        );
    }
}

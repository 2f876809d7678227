//! Privacy-preserving crowdsourced data marketplace.
//!
//! Providers answer an n-choice query under local differential privacy
//! (two-coin randomized response), encrypt their noised responses, and
//! commit the ciphertext hashes to a simulated blockchain contract. A
//! system operator filters submissions by plaintext metadata without
//! ever reading response content, and a fair-exchange handshake — hash
//! commitments plus a nonce reveal — ensures the consumer can decrypt
//! exactly when the operator side gets paid.
//!
//! The crate splits into:
//!
//! - [`ldp`] — one-hot encoding, randomized response, the unbiased
//!   frequency estimator, and the closed-form attacker advantage.
//! - [`crypto`] — SHA-256 commitments, `sk = H(s1 || s2)` key
//!   derivation, HMAC envelopes, AES-256-GCM, and the canonical byte
//!   encodings committed on chain.
//! - [`ledger`] — the contract state machine with per-operation gas
//!   metering and an event log that replays to the exact final state.
//! - [`protocol`] — the three-party session: publish, respond, filter,
//!   settle, decrypt, and the dispute-verification operations.
//! - [`sim`] — seeded experiments: estimator accuracy versus provider
//!   count, advantage sweeps, and the sequential-attacker scenario.
//! - [`cli`] — the `ldp-market` binary's subcommands with stable exit
//!   codes and deterministic JSON/CSV output.
//!
//! Runnable walkthroughs of each capability live in `examples/`; start
//! with `fair_exchange_session`:
//!
//! ```bash
//! cargo run --example fair_exchange_session
//! cargo run --example randomized_response
//! cargo run --example dispute_resolution
//! ```
//!
//! Everything stochastic takes an explicit seed and splits per-party
//! streams from it ([`rng`]), so sessions, experiments, and CLI outputs
//! are reproducible byte for byte.

pub mod cli;
pub mod config;
pub mod crypto;
pub mod ldp;
pub mod ledger;
pub mod protocol;
pub mod rng;
pub mod sim;

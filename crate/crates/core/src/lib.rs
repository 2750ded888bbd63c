//! Trace-driven simulation and policy optimization for wireless
//! underground sensor transmission under dynamically changing soil
//! dielectric conditions.
//!
//! The pipeline, end to end:
//!
//! 1. [`data_pipeline`] ingests (or synthesizes) soil permittivity and
//!    conductivity time series, cleans them, and maps them through the
//!    [`soil_channel`] model to a path-loss observation trace.
//! 2. [`hmm`] fits a Gaussian-emission hidden Markov model over
//!    (path loss, delta path loss) to discretize the channel dynamics.
//! 3. [`mdp`] combines the channel states with a bounded packet queue
//!    into a decision process and solves it by value iteration for the
//!    optimal (modulation, attempts) policy.
//! 4. [`simulator`] replays traces under the learned policy and the
//!    sense-then-transmit baselines, collecting drop, energy, and
//!    queue-occupancy metrics.

pub mod data_pipeline;
pub mod hmm;
pub mod mdp;
pub mod simulator;
pub mod soil_channel;

pub mod agent;
pub mod analysis;
pub mod harness;
pub mod nn;
pub mod sim;
pub mod sysid;
pub mod theory;

/// Seeded generator used throughout for reproducible runs.
pub type SimRng = rand_chacha::ChaCha8Rng;

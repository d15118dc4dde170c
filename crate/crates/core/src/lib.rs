//! A bipartite spin network (restricted Boltzmann machine) trained to
//! represent ground states of spin-chain Hamiltonians, together with the
//! diagnostics used to watch it learn: out-of-time-order correlator traces
//! and their invariants of motion, two-body reduced-density-matrix spectra,
//! and the mutual-information-vs-covariance bound space.
//!
//! The crate is organized around the pieces of that pipeline:
//!
//! - [`drivers`]: the physical Hamiltonians being emulated (transverse-field
//!   Ising chain, its concentric-coupling variant, Sherrington-Kirkpatrick,
//!   anisotropic YZ chain).
//! - [`rbm`]: the variational wavefunction, its log-amplitudes and
//!   logarithmic derivatives.
//! - [`sampler`]: Metropolis-Hastings sampling of visible configurations.
//! - [`sr`]: stochastic-reconfiguration updates and the training loop.
//! - [`rdm`]: two-body reduced density spectra, mutual information,
//!   covariance, and the bound curves of the I-eta plane.
//! - [`otoc`]: closed-form OTOC traces, invariants, and invariant-preserving
//!   transformations.
//! - [`exact`]: dense/Lanczos diagonalization, entanglement entropy, exact
//!   thermal expectations, and brute-force OTOC evaluation; the ground-truth
//!   backend the rest of the crate is verified against.

pub mod drivers;
pub mod error;
pub mod exact;
pub mod otoc;
pub mod rbm;
pub mod rdm;
pub mod sampler;
pub mod sr;
pub mod spin;

pub use error::{NqsError, Result};
pub use spin::SpinConfig;

/// Derive a child seed from a base seed and a salt.
///
/// SplitMix64 finalizer; used everywhere a deterministic stream of
/// sub-seeds is needed (per-run, per-iteration, per-pair) so that results
/// are replayable regardless of execution order.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Link-level simulation and detection library for MIMO-OTFS systems.
//!
//! Symbols ride on a delay-Doppler grid with `M` delay bins and `N` Doppler
//! bins; the per-antenna-pair channel matrix is doubly-block circulant and is
//! diagonalized by a 2D DFT. The library exploits that structure end to end:
//!
//! - [`channel`] draws delay-Doppler channel realizations, builds the dense
//!   channel matrix (oracle path) and its eigenvalue form, applies the channel
//!   to frames, and injects channel-estimate errors.
//! - [`block`] is the algebra over block matrices whose blocks are `MN x MN`
//!   diagonals, including the recursive partition/backtracking inversion used
//!   by the low-complexity receivers.
//! - [`receiver`] implements the eigenvalue-domain ZF (LZ) and MMSE (LM)
//!   equalizers, their conventional dense counterparts, and LAS refinement.
//! - [`sinr`] evaluates closed-form per-symbol SINR under perfect and
//!   imperfect CSI and maps it to analytic BER.
//! - [`complexity`] predicts exact operation counts and checks them against
//!   the instrumented counters in [`counter`].
//!
//! All computational kernels are generic over the real scalar type through
//! [`Scalar`]; `f64` is the default precision (see the [`Real`] alias).

pub mod block;
pub mod channel;
pub mod complexity;
pub mod counter;
pub mod dense;
pub mod error;
pub mod modem;
pub mod receiver;
pub mod rng;
pub mod scalar;
pub mod sinr;
pub mod transform;

pub use block::DiagBlockMat;
pub use counter::OpCounter;
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default real scalar used by the harness and most tests.
pub type Real = f64;
/// Complex number over an arbitrary real scalar.
pub type Cplx<T> = num_complex::Complex<T>;
/// Complex number at default precision.
pub type C64 = num_complex::Complex<f64>;
/// Single-precision complex, for the f32 instantiation of the kernels.
pub type C32 = num_complex::Complex<f32>;

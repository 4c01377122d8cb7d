//! Algorithms for iterative message-passing reception of multiuser
//! MIMO-OFDM signals.
//!
//! The crate is organized bottom-up:
//!
//! - [`gmsg`]: scalar complex Gaussian and discrete message algebra
//!   (products, divisions, moments, Gaussian projection).
//! - [`phy`]: the frequency-domain world model — pilot layout, multipath
//!   channel generation, and the AWGN observation.
//! - [`txchain`]: convolutional encoder, interleaver, symbol mapper, and
//!   their soft inverses (log-domain demapper, BCJR decoder).
//! - [`receiver`]: the iterative receiver combining a BP-like collapse of
//!   the product constraint `z = x * h` with MF-like expectations, joint
//!   channel estimation through a tap-domain prior, multiuser interference
//!   cancellation, and noise-precision estimation.
//! - [`baselines`]: the genie matched-filter bound and a direct mean-field
//!   receiver without the auxiliary product layer.
//! - [`frame`]: transmit-side frame assembly shared by simulations.
//!
//! Everything here is deterministic given the caller-supplied random
//! source and allocates only through `alloc`, so the crate builds without
//! `std` (math comes from `libm` in that configuration).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod frame;
pub mod gmsg;
mod linalg;
pub mod phy;
pub mod receiver;
pub mod rng;
pub mod system;
pub mod txchain;

pub use gmsg::{Constellation, DiscreteMsg, GaussMsg};
pub use phy::{ChannelRealization, Observation, PilotPattern};
pub use system::SystemConfig;

//! Gaussian CV-QKD broadcast networks: one sender, `M` receivers behind a
//! passive splitter.
//!
//! The math stack is generic over the scalar ([`Real`], implemented for
//! `f64` and `f32`). The simulator and its file format work in `f64`.
//!
//! ```
//! use cvqn::{key_rate, NetworkParams, RateMode, TrustModel, UserLink};
//!
//! let params = NetworkParams {
//!     modulation_variance: 5.0,
//!     users: vec![UserLink::new(0.25, 0.005, 0.06); 4],
//!     detector_efficiency: 0.68,
//!     beta: 0.95,
//!     block_size: 1_000_000_000,
//!     eps_pe: 1e-10,
//!     splitter_consistency: true,
//! };
//! let r = key_rate(&params, TrustModel::Trusted, 0, RateMode::Finite)?;
//! assert!(r.rate > 0.0);
//! # Ok::<(), cvqn::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
mod error;
pub mod gaussian;
pub mod keyrates;
pub mod network;
mod scalar;
pub mod sim;

pub use decomposition::{
    all_orderings, decompose, decompose_orderings, joint_key_rate, DecompositionRow,
    DecompositionTable, JointKeyRate, Ordering,
};
pub use error::{Error, Result};
pub use gaussian::{von_neumann_entropy, CovarianceMatrix, SymplecticSpectrum};
pub use keyrates::{
    delta_fs, holevo_collaborative, holevo_trusted, holevo_untrusted, joint_mutual_information,
    key_rate, key_rate_table, mutual_information, KeyRateReport, RateMode, TrustModel,
    WorstCaseUsed,
};
pub use network::{
    build_channel_output_cm, LinkInterval, ModeRole, NetworkParams, TrustedDetector, UserLink,
};
pub use scalar::Real;
pub use sim::{simulate, SymbolBlock};

pub type Cm64 = CovarianceMatrix<f64>;
pub type Cm32 = CovarianceMatrix<f32>;
pub type Params64 = NetworkParams<f64>;
pub type Params32 = NetworkParams<f32>;
pub type Report64 = KeyRateReport<f64>;
pub type Report32 = KeyRateReport<f32>;

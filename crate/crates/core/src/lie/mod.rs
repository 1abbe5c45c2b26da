//! Time derivatives of observables along the Hamiltonian flow.
//!
//! The working engine propagates truncated Taylor series (jets) of the
//! trajectory; [`faa`] holds the tuple enumeration for the Faà di Bruno
//! formula, used for scalar compositions and as a cross-check.

pub mod faa;
pub mod flow;
pub mod jet;

pub use faa::{faa_di_bruno, faa_first_tuple, faa_next_tuple, FaaTuple, FaaTuples};
pub use flow::{observable_jet, trajectory_jet, Observable, Polynomial, TrajectoryJet, Var};
pub use jet::Jet;

/// Default jet order cap.
pub const DEFAULT_ORDER_CAP: usize = 24;

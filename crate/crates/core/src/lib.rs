//! Data-driven receding-horizon state feedback for linear systems whose
//! `(A, B)` drift inside a polytope known only through vertex experiments.
//!
//! The crate builds trajectory datasets and their consistency Gramians
//! ([`dataset`]), turns them into LMI synthesis problems solved by a small
//! interior-point SDP solver ([`lmi`]), runs the adaptive and robust
//! receding-horizon controllers ([`controller`]) against a simulated plant
//! ([`plant`]), and wires everything into reproducible experiments
//! ([`experiments`]).

// `!(a < b)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lmi;
pub mod plant;

pub use error::{Error, Result};

//! A deterministic workbench for concurrent search structures.
//!
//! Search structures (sorted list, unbalanced BST, skiplist) are compiled
//! into resumable step machines, wrapped either by hand-over-hand locking
//! ([`sync::hoh`]) or by a version-validated optimistic store
//! ([`sync::stm`]), and driven one read or write at a time by the
//! [`scheduler`]. The [`checkers`] decide linearizability, local
//! serializability, LS-linearizability and (safe-)strict serializability of
//! the resulting histories, and [`metric`] compares implementations by the
//! sets of schedules they accept.

pub mod checkers;
pub mod error;
pub mod fixtures;
pub mod metric;
pub mod model;
pub mod scenario;
pub mod scheduler;
pub mod seqspec;
pub mod sync;

pub use error::{Error, Result};

//! Splitting method for equilibrium problems over fixed-point sets.
//!
//! Solves: find `x* ∈ C ∩ Fix(T)` with `f1(x*, y) + f2(x*, y) >= 0` for every
//! `y ∈ C ∩ Fix(T)`, where `f1`, `f2` are monotone bifunctions and `T` is
//! nonexpansive. Each iteration uses one proximal step per bifunction
//! component and a Mann-type averaging with `T`.

pub mod bifunctions;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod problems;
pub mod prox;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};

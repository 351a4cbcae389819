#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![allow(clippy::needless_range_loop)]
extern crate alloc;

pub mod background;
pub mod brst;
pub mod cohomology;
pub mod fock;
pub mod graded;
pub mod jet;
pub mod lagrangian;
pub mod linalg;
pub mod onshell;
pub mod propagator;
pub mod scalar;
pub mod star;

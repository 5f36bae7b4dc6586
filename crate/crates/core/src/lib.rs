//! Special Joyce structures over affine special Kähler manifolds and the
//! hyperkähler tensors they induce on the tangent bundle.
//!
//! The crate is organised bottom-up: [`ask`] turns a prepotential into base
//! geometry, [`special`] supplies Bessel and dilogarithm evaluations, [`bps`]
//! holds charge data, [`joyce`] builds the Joyce function and the frames
//! `h`, `v`, [`hk`] assembles and checks the tensors, [`model`] bundles a
//! prepotential with a provider for stencil-based checks, and [`intsys`] covers the
//! torus-fibration statements.

// `!(x > y)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ask;
pub mod bps;
pub mod error;
pub mod hk;
pub mod intsys;
pub mod joyce;
pub mod linalg;
pub mod model;
pub mod special;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/prepotentials.md")]
    mod prepotentials {}
    #[doc = include_str!("../../../book/src/joyce.md")]
    mod joyce {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/instantons.md")]
    mod instantons {}
    #[doc = include_str!("../../../book/src/fibration.md")]
    mod fibration {}
}

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod edmd;
pub mod error;
pub mod harness;
pub mod identify;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod lti;
pub mod scoring;
pub mod sim;

pub use error::{Error, Result};

// Code blocks in the guide under book/ run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lifting.md")]
    mod lifting {}
    #[doc = include_str!("../../../book/src/edmd.md")]
    mod edmd {}
    #[doc = include_str!("../../../book/src/interconnection.md")]
    mod interconnection {}
    #[doc = include_str!("../../../book/src/cl_edmd.md")]
    mod cl_edmd {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}

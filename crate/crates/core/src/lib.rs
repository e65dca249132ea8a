//! Passive cable model of a tapered dendrite attached to a soma.
//!
//! A fiber of length `ell` has radius profile `a(x) >= a0` and lateral
//! surface bounded by `S`. Two attenuation criteria are computed:
//!
//! * the smallest eigenvalue `mu1` of the cable operator with a dynamic
//!   soma boundary condition ([`eigen`]), which sets the slowest decay rate
//!   of the membrane potential ([`transient`]);
//! * the ratio `T` of time-integrated potentials at the two ends, evaluated
//!   either from the modal expansion or from a steady two-point problem in
//!   the reduced coordinate `y = int dx / a^2` ([`transfer`]).
//!
//! [`optimize`] searches the admissible class for minimizers of each
//! criterion; in both cases the search ends at the cylinder `a = a0`.
//!
//! ```
//! use dendrite_taper::model::{PhysicalParams, TaperProfile};
//! use dendrite_taper::eigen::compare_mu1;
//!
//! let params = PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * std::f64::consts::PI)?;
//! let bump = TaperProfile::from_fn(1.0, 32, |x| 1.0 + 0.2 * (std::f64::consts::PI * x).sin().powi(2))?;
//! let cmp = compare_mu1(&bump, 1.0, &params, 256)?;
//! assert!(cmp.margin > 0.0);
//! # Ok::<(), dendrite_taper::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod optimize;
pub mod transfer;
pub mod transient;
pub mod tridiag;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/eigen.md")]
    mod eigen {}
    #[doc = include_str!("../../../book/src/transient.md")]
    mod transient {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/two-level.md")]
    mod two_level {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}

//! A desk-scale laboratory for stability properties of physics-informed
//! network training on the 1D Poisson benchmark.
//!
//! The crate trains a small tanh network so that u''(x) = -pi^2 sin(pi x)
//! with u(0) = u(1) = 0, then quantitatively checks three families of
//! claims about that training:
//!
//! * deterministic perturbation bounds — how much each loss can move when
//!   the learned solution is shifted by delta*sin(k pi x) ([`bounds`],
//!   [`experiments::perturbation_study`]);
//! * concentration of the empirical physics loss under collocation
//!   resampling, with closed-form tail/sample-size formulas ([`bounds`],
//!   [`experiments::concentration_study`]);
//! * the Sobolev-loss-to-uniform-error relation
//!   ([`experiments::generalization_study`]).
//!
//! Derivatives come from order-3 forward-mode jets ([`jet`]) so residuals
//! and their spatial derivatives are exact; parameter gradients are
//! reverse-accumulated through the jet arithmetic ([`net`]). Every random
//! choice descends from a single master seed ([`experiments::derive_seed`]),
//! making all studies bit-reproducible.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod jet;
pub mod loss;
pub mod net;
pub mod pde;

pub use error::{Error, Result};
pub use experiments::TrainConfig;
pub use jet::{Differentiable1D, Jet3};
pub use net::Mlp;
pub use pde::Problem1D;

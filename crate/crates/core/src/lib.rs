//! Numerics for Almgren Q-valued functions.
//!
//! The crate covers the metric space `A_Q(R^m)` of unordered Q-tuples, Q-valued
//! polynomials and their assignment-coupled best fits, dyadic Campanato decay
//! analysis, a certificate engine for stratified decay hypotheses, and a
//! library of closed-form multi-valued harmonic test functions.
//!
//! Heavy loops run on rayon when the default `parallel` feature is enabled;
//! every reduction is chunked in a fixed order so results do not depend on
//! the thread count.

pub mod aq;
pub mod assignment;
pub mod campanato;
pub mod decay;
pub mod domain;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod par;
pub mod qpoly;
pub mod quadrature;

pub use aq::{
    brute_force_metric, lebesgue_point_profile, metric_g, numeric_derivative, order_branches,
    translate_add, AqPoint, ClosureField, LebesgueProfile, QField, SampledQFunction,
};
pub use domain::{a_weighted_constant, Domain, DomainKind, DomainSpec, QuadratureGrid};
pub use error::{Error, Result};
pub use qpoly::{
    best_fit, coefficient_metric, local_excess, FitConfig, FitResult, MultiIndex, QPolynomial,
    Region,
};

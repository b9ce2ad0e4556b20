//! Mirror descent and natural gradient descent on exponential families.
//!
//! Mirror descent with the Bregman divergence of a potential `G`, run in the
//! natural parameters `θ`, traces exactly the same path as natural gradient
//! descent in the mean parameters `μ = ∇G(θ)` under the metric `∇²H`, where
//! `H` is the convex conjugate of `G`. This crate implements both optimizers
//! (plus plain gradient descent and a retraction step), a small catalog of
//! exponential families, and harnesses that check the equivalence step by
//! step and measure the Fisher efficiency of the `α_t = 1/t` estimator.
//!
//! - [`geometry`]: conjugate pairs, Bregman divergences, Hessian metrics.
//! - [`families`]: Gaussian, Poisson, Bernoulli and their products.
//! - [`descent`]: update rules, schedules, the online loop.
//! - [`equivalence`]: mirror vs. natural gradient, per step.
//! - [`efficiency`]: Monte Carlo covariance against the Cramér–Rao bound.
//! - [`cli`]: config parsing and the experiment runner behind the binary.

pub mod cli;
pub mod descent;
pub mod efficiency;
pub mod equivalence;
pub mod error;
pub mod families;
pub mod geometry;
pub mod seeding;

pub use error::{Error, Result};

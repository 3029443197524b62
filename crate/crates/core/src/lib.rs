//! Probabilistic deep-supervision network (PDS-Net) for response-time QoS
//! prediction under feature noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: a small define-by-run reverse-mode engine over `f64` tensors.
//! - [`distributions`]: diagonal Gaussians, reparameterised sampling, KL.
//! - [`dataio`]: WS-Dream ingestion, vocabularies, splits, noise injection,
//!   isolation-forest filtering and a synthetic corpus generator.
//! - [`model`]: embeddings, hierarchical prior nets, posterior net, shared head.
//! - [`training`]: task losses, the conditional loss, Nadam, the training loop.
//! - [`baselines`]: UPCC / IPCC / UIPCC memory-based collaborative filtering.
//! - [`eval`] and [`experiment`]: metrics, reports, config files, sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod baselines;
pub mod dataio;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod training;

pub use error::{Error, Result};

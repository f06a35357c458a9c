//! RSS-based underwater localization with unknown transmit power.
//!
//! A target at unknown position `t` with unknown transmit power `P_t` is
//! heard by `N` anchors at known positions. From the received signal
//! strengths alone, the [`gtrs`] module jointly estimates `t` and `P_t` by
//! solving a weighted generalized trust region subproblem with a
//! one-dimensional bisection on its Lagrange multiplier.
//!
//! The crate also contains the pieces needed to evaluate that estimator:
//!
//! - [`channel`]: acoustic absorption, the noiseless RSS model and three
//!   noise regimes;
//! - [`weighting`]: the distance-based link weights;
//! - [`crlb`]: Fisher information and Cramér-Rao bounds with known and
//!   unknown transmit power;
//! - [`experiments`]: a deterministic, thread-count independent Monte Carlo
//!   harness;
//! - [`cli`]: the `gutp` command-line front end and its JSON config format.
//!
//! ```
//! use gutp::channel::{Environment, MeasurementSet, Scenario};
//! use gutp::gtrs::{locate, LocateOptions};
//!
//! let env = Environment::new(2.0, 9.0, 0.0).unwrap().with_absorption(0.0);
//! let anchors = vec![
//!     vec![0.0, 0.0],
//!     vec![4000.0, 0.0],
//!     vec![0.0, 4000.0],
//!     vec![4000.0, 4000.0],
//!     vec![2000.0, 5000.0],
//! ];
//! let scenario = Scenario::new(anchors.clone(), vec![1500.0, 2500.0], env).unwrap();
//! let rss = MeasurementSet::noiseless(&scenario).unwrap();
//!
//! let est = locate(&rss, &anchors, &env, &LocateOptions::default()).unwrap();
//! assert!((est.position_m[0] - 1500.0).abs() < 1e-6);
//! assert!((est.transmit_power_dbm.unwrap() - 0.0).abs() < 1e-6);
//! ```

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod crlb;
pub mod experiments;
pub mod gtrs;
pub mod numerics;
pub mod weighting;

pub use channel::{Environment, MeasurementSet, NoiseKind, NoiseModel, Scenario};
pub use gtrs::{Estimate, GtrsSystem, LocateOptions, SolveOptions, Weighting};

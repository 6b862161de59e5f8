//! Linear-time hierarchical clustering of massive observation sets in
//! moderate dimensions.
//!
//! The pipeline reduces every observation to a single seriation value
//! (its row mass, row sum, or the consensus of many uniform random
//! projections), re-encodes that value into an approximately uniform
//! distribution on `[0, 1)` without sorting, and then reads a regular
//! `B`-way hierarchy directly off the base-`B` digit prefixes. Two values
//! share a cluster at level `l` exactly when their first `l` digits agree,
//! which is the Baire (longest common prefix) ultrametric.
//!
//! Every stage is `O(n)` in the number of observations. The [`validate`]
//! module provides the quadratic reference machinery (classical
//! agglomerative clustering, cophenetic correlation) that is used only to
//! check the linear-time results on small inputs.
//!
//! ```
//! use baireclust::baire::build_hierarchy;
//! use baireclust::encoding::encode_pipeline;
//! use baireclust::ingest::{marginals, DataMatrix};
//! use baireclust::projection::Seriation;
//!
//! let d = DataMatrix::from_rows(
//!     vec!["a".into(), "b".into(), "c".into(), "d".into()],
//!     vec![vec![1.0, 2.0], vec![3.0, 9.0], vec![20.0, 5.0], vec![100.0, 40.0]],
//! )
//! .unwrap();
//! let m = marginals(&d).unwrap();
//! let s = Seriation::row_mass(&d, &m);
//! let e = encode_pipeline(&s).unwrap();
//! let h = build_hierarchy(&e, 10, 2).unwrap();
//! assert_eq!(h.level(1).len(), 4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baire;
pub mod encoding;
mod error;
pub mod ingest;
mod numeric;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};

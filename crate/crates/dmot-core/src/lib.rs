//! Preprocess-then-query toolkit for finite doubling metrics.
//!
//! The library is split into two phases. During *preprocessing* the distance
//! function is available: [`metric`] ingests points or a distance matrix,
//! [`partition`] builds the hierarchical space-partition tree, [`hierarchy`]
//! compresses it, and [`path_nav`] attaches the navigation structures. The
//! result is persisted by [`persistence`]. During the *query* phase only the
//! persisted structure is available: [`extraction`] pulls out the subtree
//! induced by a query set, [`spanner`] turns it into a low-stretch weighted
//! graph, and [`applications`] / [`dynamic_mst`] run approximate solvers on
//! top of it. [`oracles`] holds independent brute-force references used by
//! tests and the `verify` command.

pub mod applications;
pub mod dynamic_mst;
pub mod error;
pub mod extraction;
pub mod hierarchy;
pub mod metric;
pub mod oracles;
pub mod partition;
pub mod path_nav;
pub mod persistence;
pub mod spanner;
pub mod yfast;

pub use error::Error;

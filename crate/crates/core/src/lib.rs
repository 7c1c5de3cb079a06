//! Stochastic reaction-diffusion simulation on a hierarchy of nested
//! Cartesian meshes.
//!
//! Each species lives on the coarsest mesh level that still resolves its
//! fastest bimolecular reaction to a user tolerance. Products of a
//! dissociation start co-located on a fine level and are promoted to coarser
//! levels as they diffuse away from each other, so fine resolution is paid for
//! only where rebinding can actually happen.
//!
//! The [`model`] module holds the chemistry and the level-selection
//! formulas, [`mesh`] the voxel hierarchy, [`engine`] the event loop,
//! [`stats`] the ensemble observables and [`modelio`] the `.rdm` file format.
//! [`solver`] runs trajectory ensembles for the hierarchical method and its
//! single-level references.

pub mod bundled;
pub mod engine;
pub mod mesh;
pub mod model;
pub mod modelio;
pub mod solver;
pub mod stats;

pub use engine::{Kinetics, Observer, Simulation};
pub use mesh::{Boundary, MeshHierarchy, VoxelRef};
pub use model::{Model, ReactionChannel, Species};
pub use solver::Solver;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/model-files.md")]
    mod model_files {}
    #[doc = include_str!("../../../book/src/levels.md")]
    mod levels {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

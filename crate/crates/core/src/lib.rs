//! Gradient discretisations of two-component anisotropic reaction-diffusion
//! systems on polygonal meshes of the unit square.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gd;
pub mod harness;
pub mod hmm;
pub mod mesh;
pub mod problems;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use gd::{DiscreteField, GradientDiscretisation, SchemeKind};
pub use mesh::{generate_family, Mesh, MeshFamily, Point};
pub use problems::ProblemSpec;
pub use solver::{PicardConfig, TimeGrid};

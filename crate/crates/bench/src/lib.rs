//! Fixtures shared by the criterion benchmarks.

use std::sync::Arc;

use rdgdm_core::harness::build_discretisation;
use rdgdm_core::{generate_family, GradientDiscretisation, Mesh, MeshFamily, SchemeKind};

pub fn mesh(family: MeshFamily, level: u32) -> Arc<Mesh> {
    Arc::new(generate_family(family, level))
}

pub fn discretisation(
    scheme: SchemeKind,
    family: MeshFamily,
    level: u32,
) -> GradientDiscretisation {
    build_discretisation(scheme, mesh(family, level), 1.0).expect("structured meshes are valid")
}

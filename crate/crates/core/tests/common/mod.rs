#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use gclab::differentials::{build_basis, DifferentialBasis};
use gclab::geometry::{build_bolza_group, build_mesh, DiscreteOperators, FuchsianGroup, SurfaceMesh};
use gclab::solver::Donaldson;

pub struct Lab {
    pub group: Arc<FuchsianGroup>,
    pub mesh: SurfaceMesh,
    pub ops: DiscreteOperators,
    pub basis: DifferentialBasis,
}

impl Lab {
    pub fn build(level: u32, kappa: u32) -> Self {
        let group = Arc::new(build_bolza_group(10.0).unwrap());
        let (mesh, ops) = build_mesh(&group, level).unwrap();
        let basis = build_basis(group.clone(), &mesh, kappa, 8).unwrap();
        Self { group, mesh, ops, basis }
    }

    pub fn problem(&self) -> Donaldson<'_> {
        Donaldson::new(&self.basis, &self.mesh, &self.ops)
    }
}

/// Level 3, κ = 2, shared by every test of one binary.
pub fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(|| Lab::build(3, 2))
}

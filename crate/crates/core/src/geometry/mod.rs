//! Poincaré-disk model of the Bolza surface: Möbius maps, the octagon group,
//! and the glued triangulation with its discrete operators.

pub mod group;
pub mod mesh;
pub mod mobius;

pub use group::{build_bolza_group, FuchsianGroup};
pub use mesh::{build_mesh, gauss_bonnet_area, integrate, DiscreteOperators, SurfaceMesh};
pub use mobius::{conformal_factor, hyperbolic_distance, MobiusMap, C64};

/// Genus of the Bolza surface.
pub const GENUS: u32 = 2;

//! Baseline design, meshes, quadrature and smooth deformation maps.

pub mod admissible;
pub mod deform;
pub mod design;
pub mod mesh;
pub mod quadrature;

pub use deform::{apply_deformation, fourier_bump_basis, min_jacobian_det, BasisField, DeformationMap, Shape};
pub use design::{build_baseline, build_baseline_3d, BaselineDesign};
pub use mesh::{BoundaryFacet, BoundaryTag, Mesh, Point};
pub use admissible::{check_admissible, holder_seminorm_estimate, AdmissibilityOptions, AdmissibilityReport, FieldRef};

//! Stationary heat conduction with convective (Robin) boundary conditions.
//!
//! Weak form: `∫ k ∇T·∇v + ∮ η T v = ∮ η T_e v`, P1 elements, Robin on the
//! whole boundary regardless of the facet tag.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::expr::ScalarSource;
use crate::fem::{Assembler, LinearSystem, SolverOptions};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::mesh::{barycentric_point, Mesh, Point};
use crate::geometry::quadrature::facet_rule;
use crate::geometry::Shape;

/// Convective boundary data.
#[derive(Debug, Clone)]
pub struct RobinData {
    /// Heat transfer coefficient `η`, positive on the boundary.
    pub eta: ScalarSource,
    /// Ambient temperature `T_e`.
    pub ambient: ScalarSource,
    pub conductivity: f64,
}

impl RobinData {
    pub fn new(eta: ScalarSource, ambient: ScalarSource, conductivity: f64) -> Self {
        RobinData {
            eta,
            ambient,
            conductivity,
        }
    }
}

/// A boundary quadrature point with its facet, weight (length or area
/// times rule weight), outward normal and barycentric coordinates on the
/// facet.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub facet: usize,
    pub x: Point,
    pub normal: Point,
    pub weight: f64,
    pub bary: Vec<f64>,
}

/// Order-2 Gauss points on every boundary facet, in facet order.
pub fn boundary_points(mesh: &Mesh) -> Vec<BoundaryPoint> {
    let rule = facet_rule(mesh.dim);
    let mut out = Vec::with_capacity(mesh.facets.len() * rule.len());
    for f in 0..mesh.facets.len() {
        let pts = mesh.facet_points(f);
        let (measure, normal) = mesh.facet_geometry(f);
        for (b, w) in rule.iter() {
            out.push(BoundaryPoint {
                facet: f,
                x: barycentric_point(&pts, b),
                normal,
                weight: w * measure,
                bary: b.to_vec(),
            });
        }
    }
    out
}

struct LocalBlock {
    nodes: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

/// Ambient value at the first boundary quadrature point. The solve is done
/// for `T − T_ref`, so constant ambient fields are reproduced exactly.
fn reference_ambient(mesh: &Mesh, data: &RobinData) -> f64 {
    match boundary_points(mesh).first() {
        Some(bp) => data.ambient.eval(&bp.x, &bp.normal),
        None => 0.0,
    }
}

/// Assembles the heat system on `mesh`.
pub fn assemble_heat(mesh: &Mesh, data: &RobinData) -> Result<LinearSystem> {
    assemble_heat_shifted(mesh, data, 0.0)
}

/// Same system with the ambient field replaced by `T_e − shift`.
fn assemble_heat_shifted(mesh: &Mesh, data: &RobinData, shift: f64) -> Result<LinearSystem> {
    if !(data.conductivity > 0.0) {
        return Err(validation("conductivity must be positive"));
    }
    let k = data.conductivity;
    let cells: Vec<LocalBlock> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let geo = mesh.cell_geometry(c);
            let n = geo.grads.len();
            let vol = geo.measure.abs();
            let mut matrix = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let g = &geo.grads;
                    matrix[i * n + j] = k * vol * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
                }
            }
            LocalBlock {
                nodes: mesh.cells[c].clone(),
                matrix,
                rhs: vec![0.0; n],
            }
        })
        .collect();

    let rule = facet_rule(mesh.dim);
    let facets: Vec<Result<LocalBlock>> = (0..mesh.facets.len())
        .into_par_iter()
        .map(|f| {
            let pts = mesh.facet_points(f);
            let (measure, normal) = mesh.facet_geometry(f);
            let n = pts.len();
            let mut matrix = vec![0.0; n * n];
            let mut rhs = vec![0.0; n];
            for (b, w) in rule.iter() {
                let x = barycentric_point(&pts, b);
                let eta = data.eta.eval(&x, &normal);
                if !(eta > 0.0) || !eta.is_finite() {
                    return Err(validation(format!("heat transfer coefficient {eta} is not positive at {x:?}")));
                }
                let te = data.ambient.eval(&x, &normal) - shift;
                if !te.is_finite() {
                    return Err(validation(format!("ambient temperature is not finite at {x:?}")));
                }
                let wm = w * measure * eta;
                for i in 0..n {
                    rhs[i] += wm * te * b[i];
                    for j in 0..n {
                        matrix[i * n + j] += wm * b[i] * b[j];
                    }
                }
            }
            Ok(LocalBlock {
                nodes: mesh.facets[f].nodes.clone(),
                matrix,
                rhs,
            })
        })
        .collect();

    let mut asm = Assembler::new(mesh.num_nodes());
    for block in cells.into_iter().map(Ok).chain(facets) {
        let block = block?;
        let n = block.nodes.len();
        for i in 0..n {
            asm.rhs[block.nodes[i]] += block.rhs[i];
            for j in 0..n {
                asm.add(block.nodes[i], block.nodes[j], block.matrix[i * n + j]);
            }
        }
    }
    Ok(asm.finish())
}

/// Solves the heat equation on the deformed mesh of `shape`.
pub fn solve_heat(shape: &Shape, data: &RobinData) -> Result<ScalarField> {
    solve_heat_on(shape.mesh.clone(), data, &SolverOptions::default())
}

pub fn solve_heat_on(mesh: Arc<Mesh>, data: &RobinData, opts: &SolverOptions) -> Result<ScalarField> {
    let shift = reference_ambient(&mesh, data);
    let system = assemble_heat_shifted(&mesh, data, if shift.is_finite() { shift } else { 0.0 })?;
    let (mut values, _) = system.solve(opts)?;
    if shift.is_finite() {
        values.iter_mut().for_each(|v| *v += shift);
    }
    ScalarField::new(mesh, values)
}

/// Outcome of the discrete maximum principle check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub min_t: f64,
    pub max_t: f64,
    pub min_ambient: f64,
    pub max_ambient: f64,
    pub tolerance: f64,
    /// How far `T` strays outside the ambient range (zero if it does not).
    pub slack_used: f64,
    pub passed: bool,
}

/// Checks `min T_e − tol ≤ min T` and `max T ≤ max T_e + tol` with
/// `tol = 1e-3 (max T_e − min T_e) + 1e-12`. Ambient extrema are taken over
/// boundary nodes and boundary quadrature points.
pub fn temperature_bounds_check(t: &ScalarField, data: &RobinData) -> BoundsReport {
    let mesh = &t.mesh;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in 0..mesh.facets.len() {
        let (_, normal) = mesh.facet_geometry(f);
        for &n in &mesh.facets[f].nodes {
            let v = data.ambient.eval(&mesh.nodes[n], &normal);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    for bp in boundary_points(mesh) {
        let v = data.ambient.eval(&bp.x, &bp.normal);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let tolerance = 1e-3 * (hi - lo) + 1e-12;
    let (min_t, max_t) = (t.min(), t.max());
    let slack_used = (lo - min_t).max(max_t - hi).max(0.0);
    BoundsReport {
        min_t,
        max_t,
        min_ambient: lo,
        max_ambient: hi,
        tolerance,
        slack_used,
        passed: min_t >= lo - tolerance && max_t <= hi + tolerance,
    }
}

/// Cell-wise gradient and its nodal recovery.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub cells: Vec<Point>,
    pub nodal: VectorField,
}

pub fn gradient_field(t: &ScalarField) -> GradientField {
    GradientField {
        cells: t.cell_gradients(),
        nodal: t.recovered_gradient(),
    }
}

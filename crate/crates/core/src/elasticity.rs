//! Linear thermoelasticity with a clamped hole and traction on the outer
//! boundary.
//!
//! The two thermal terms of the strong form are integrated by parts into a
//! single domain term, giving the weak form
//! `∫ σ(u):ε(v) = ∫ f·v + ∫_N g·v + ∫ β (T − T₀) div v`, `β = ρ(3λ + 2μ)`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::expr::VectorSource;
use crate::fem::{Assembler, LinearSystem, SolveStats, SolverOptions};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::mesh::{barycentric_point, BoundaryTag, Mesh, Point};
use crate::geometry::quadrature::{cell_rule, facet_rule};
use crate::geometry::Shape;
use crate::material::{thermoelastic_stress, MaterialParams, Tensor3};

/// Volume force and surface traction.
#[derive(Debug, Clone)]
pub struct LoadData {
    pub body_force: VectorSource,
    pub traction: VectorSource,
    /// Optional bound `k₁` on `|g|` at traction quadrature points.
    pub traction_bound: Option<f64>,
}

impl LoadData {
    pub fn none() -> Self {
        LoadData {
            body_force: VectorSource::zero(),
            traction: VectorSource::zero(),
            traction_bound: None,
        }
    }
}

/// Boundary values on the hole. `Prescribed` exists for patch tests.
#[derive(Debug, Clone, Default)]
pub enum DirichletData {
    #[default]
    Clamped,
    Prescribed(VectorSource),
}

/// The reduced system on free degrees of freedom.
#[derive(Debug, Clone)]
pub struct ElasticSystem {
    pub system: LinearSystem,
    /// For each dof `node * dim + component`, its index among free dofs.
    pub free_index: Vec<Option<usize>>,
    /// Values of all dofs that are constrained (zero elsewhere).
    pub prescribed: Vec<f64>,
    pub dim: usize,
}

impl ElasticSystem {
    /// Scatters a reduced solution back to a full nodal field.
    pub fn expand(&self, mesh: Arc<Mesh>, reduced: &[f64]) -> Result<VectorField> {
        let d = self.dim;
        let mut values = vec![[0.0; 3]; mesh.num_nodes()];
        for (dof, idx) in self.free_index.iter().enumerate() {
            values[dof / d][dof % d] = match idx {
                Some(i) => reduced[*i],
                None => self.prescribed[dof],
            };
        }
        VectorField::new(mesh, values)
    }
}

struct LocalBlock {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

fn element_block(mesh: &Mesh, c: usize, loads: &LoadData, t: &ScalarField, p: &MaterialParams) -> LocalBlock {
    let d = mesh.dim;
    let geo = mesh.cell_geometry(c);
    let vol = geo.measure.abs();
    let g = &geo.grads;
    let nodes = &mesh.cells[c];
    let nn = nodes.len();
    let nd = nn * d;
    let mut matrix = vec![0.0; nd * nd];
    let mut rhs = vec![0.0; nd];
    for i in 0..nn {
        for a in 0..d {
            for j in 0..nn {
                for b in 0..d {
                    let gij: f64 = (0..d).map(|k| g[i][k] * g[j][k]).sum();
                    let delta = if a == b { gij } else { 0.0 };
                    let v = vol * (p.lambda * g[i][a] * g[j][b] + p.mu * (delta + g[i][b] * g[j][a]));
                    matrix[(i * d + a) * nd + j * d + b] = v;
                }
            }
        }
    }
    // T is affine on the cell, so the thermal term is exact with the mean
    let dt = t.cell_mean(c) - p.reference_temperature;
    let beta = p.thermal_modulus();
    for i in 0..nn {
        for a in 0..d {
            rhs[i * d + a] += beta * dt * vol * g[i][a];
        }
    }
    let pts = mesh.cell_points(c);
    let zero_normal = [0.0; 3];
    for (bary, w) in cell_rule(d).iter() {
        let x = barycentric_point(&pts, bary);
        let f = loads.body_force.eval(&x, &zero_normal);
        for i in 0..nn {
            for a in 0..d {
                rhs[i * d + a] += w * vol * f[a] * bary[i];
            }
        }
    }
    let dofs = nodes.iter().flat_map(|&n| (0..d).map(move |a| n * d + a)).collect();
    LocalBlock { dofs, matrix, rhs }
}

fn traction_block(mesh: &Mesh, f: usize, loads: &LoadData) -> Result<LocalBlock> {
    let d = mesh.dim;
    let pts = mesh.facet_points(f);
    let (measure, normal) = mesh.facet_geometry(f);
    let nn = pts.len();
    let mut rhs = vec![0.0; nn * d];
    for (bary, w) in facet_rule(d).iter() {
        let x = barycentric_point(&pts, bary);
        let g = loads.traction.eval(&x, &normal);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(validation(format!("traction is not finite at {x:?}")));
        }
        if let Some(k1) = loads.traction_bound {
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn > k1 {
                return Err(validation(format!("traction magnitude {gn} exceeds the bound {k1} at {x:?}")));
            }
        }
        for i in 0..nn {
            for a in 0..d {
                rhs[i * d + a] += w * measure * g[a] * bary[i];
            }
        }
    }
    let dofs = mesh.facets[f].nodes.iter().flat_map(|&n| (0..d).map(move |a| n * d + a)).collect();
    Ok(LocalBlock {
        dofs,
        matrix: Vec::new(),
        rhs,
    })
}

/// Assembles the reduced system with constrained hole dofs eliminated
/// symmetrically.
pub fn assemble_elasticity(
    mesh: &Mesh,
    loads: &LoadData,
    t: &ScalarField,
    p: &MaterialParams,
    dirichlet: &DirichletData,
) -> Result<ElasticSystem> {
    let d = mesh.dim;
    if t.values.len() != mesh.num_nodes() {
        return Err(validation("temperature field does not match the mesh"));
    }
    let fixed_nodes = mesh.tagged_nodes(BoundaryTag::Dirichlet);
    if fixed_nodes.is_empty() {
        return Err(validation("no Dirichlet boundary: rigid body modes are unconstrained"));
    }
    let ndof = mesh.num_nodes() * d;
    let mut prescribed = vec![0.0; ndof];
    let mut is_fixed = vec![false; ndof];
    for &n in &fixed_nodes {
        let value = match dirichlet {
            DirichletData::Clamped => [0.0; 3],
            DirichletData::Prescribed(src) => src.eval(&mesh.nodes[n], &[0.0; 3]),
        };
        for a in 0..d {
            is_fixed[n * d + a] = true;
            prescribed[n * d + a] = value[a];
        }
    }
    let mut free_index = vec![None; ndof];
    let mut nfree = 0;
    for dof in 0..ndof {
        if !is_fixed[dof] {
            free_index[dof] = Some(nfree);
            nfree += 1;
        }
    }

    let cells: Vec<LocalBlock> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| element_block(mesh, c, loads, t, p))
        .collect();
    let tractions: Vec<Result<LocalBlock>> = (0..mesh.facets.len())
        .into_par_iter()
        .filter(|&f| mesh.facets[f].tag == BoundaryTag::RobinNeumann)
        .map(|f| traction_block(mesh, f, loads))
        .collect();

    let mut asm = Assembler::new(nfree);
    for block in cells.into_iter().map(Ok).chain(tractions) {
        let block = block?;
        let nd = block.dofs.len();
        for (i, &r) in block.dofs.iter().enumerate() {
            let Some(ri) = free_index[r] else { continue };
            asm.rhs[ri] += block.rhs[i];
            if block.matrix.is_empty() {
                continue;
            }
            for (j, &c) in block.dofs.iter().enumerate() {
                let v = block.matrix[i * nd + j];
                match free_index[c] {
                    Some(ci) => asm.add(ri, ci, v),
                    None => asm.rhs[ri] -= v * prescribed[c],
                }
            }
        }
    }
    Ok(ElasticSystem {
        system: asm.finish(),
        free_index,
        prescribed,
        dim: d,
    })
}

/// Displacement on the deformed mesh of `shape` with a clamped hole.
pub fn solve_elasticity(shape: &Shape, loads: &LoadData, t: &ScalarField, p: &MaterialParams) -> Result<VectorField> {
    solve_elasticity_on(shape.mesh.clone(), loads, t, p, &DirichletData::Clamped, &SolverOptions::default())
        .map(|(u, _)| u)
}

pub fn solve_elasticity_on(
    mesh: Arc<Mesh>,
    loads: &LoadData,
    t: &ScalarField,
    p: &MaterialParams,
    dirichlet: &DirichletData,
    opts: &SolverOptions,
) -> Result<(VectorField, SolveStats)> {
    if !Arc::ptr_eq(&mesh, &t.mesh) && *mesh != *t.mesh {
        return Err(validation("temperature field lives on a different mesh"));
    }
    let sys = assemble_elasticity(&mesh, loads, t, p, dirichlet)?;
    let (x, stats) = sys.system.solve(opts)?;
    Ok((sys.expand(mesh, &x)?, stats))
}

/// Per-cell thermoelastic stress, thermal part from the cell-mean
/// temperature.
#[derive(Debug, Clone)]
pub struct StressField {
    pub mesh: Arc<Mesh>,
    pub cells: Vec<Tensor3>,
}

pub fn stress(u: &VectorField, t: &ScalarField, p: &MaterialParams) -> StressField {
    let mesh = u.mesh.clone();
    let d = mesh.dim;
    let cells = u
        .cell_gradients()
        .iter()
        .enumerate()
        .map(|(c, g)| thermoelastic_stress(g, d, t.cell_mean(c), p))
        .collect();
    StressField { mesh, cells }
}

#[derive(Serialize, Deserialize)]
struct StressJson {
    dimension: usize,
    cells: Vec<StressCellJson>,
}

#[derive(Serialize, Deserialize)]
struct StressCellJson {
    cell: usize,
    centroid: Vec<f64>,
    stress: Vec<Vec<f64>>,
}

impl StressField {
    fn centroid(&self, c: usize) -> Point {
        let pts = self.mesh.cell_points(c);
        let w = vec![1.0 / pts.len() as f64; pts.len()];
        barycentric_point(&pts, &w)
    }

    /// Largest `|σ_ij − σ_ji|` over all cells.
    pub fn max_asymmetry(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|s| (0..3).flat_map(move |i| (0..3).map(move |j| (s[i][j] - s[j][i]).abs())))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.cells.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `cell_id,cx,cy[,cz],s_ij...` with the `dim × dim` block row-major.
    pub fn to_csv(&self) -> String {
        let d = self.mesh.dim;
        let axes = ["x", "y", "z"];
        let mut out = String::from("cell_id");
        for a in &axes[..d] {
            let _ = write!(out, ",c{a}");
        }
        for a in &axes[..d] {
            for b in &axes[..d] {
                let _ = write!(out, ",s_{a}{b}");
            }
        }
        out.push('\n');
        for (c, s) in self.cells.iter().enumerate() {
            let x = self.centroid(c);
            let _ = write!(out, "{c}");
            for v in &x[..d] {
                let _ = write!(out, ",{v:?}");
            }
            for row in &s[..d] {
                for v in &row[..d] {
                    let _ = write!(out, ",{v:?}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.mesh.dim;
        let doc = StressJson {
            dimension: d,
            cells: self
                .cells
                .iter()
                .enumerate()
                .map(|(c, s)| StressCellJson {
                    cell: c,
                    centroid: self.centroid(c)[..d].to_vec(),
                    stress: s[..d].iter().map(|row| row[..d].to_vec()).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

//! The baseline design: a disk with a circular hole, and its meshes.

use serde::{Deserialize, Serialize};

use super::mesh::{BoundaryTag, Mesh, Point};
use crate::error::{validation, Result};

/// Outer disk of radius `outer_radius` centred at the origin, minus the ball
/// `B(hole_center, hole_radius)`. `ext_radius` bounds the region on which
/// deformation maps may act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDesign {
    pub outer_radius: f64,
    pub hole_center: [f64; 2],
    pub hole_radius: f64,
    pub ext_radius: f64,
}

impl BaselineDesign {
    pub fn annulus(outer_radius: f64, hole_radius: f64, ext_radius: f64) -> Self {
        BaselineDesign {
            outer_radius,
            hole_center: [0.0, 0.0],
            hole_radius,
            ext_radius,
        }
    }

    /// Distance between the hole and the outer boundary.
    pub fn clearance(&self) -> f64 {
        let c = self.hole_center;
        self.outer_radius - (c[0] * c[0] + c[1] * c[1]).sqrt() - self.hole_radius
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hole_radius > 0.0) || !(self.outer_radius > 0.0) {
            return Err(validation("radii must be positive"));
        }
        if !(self.clearance() > 0.0) {
            return Err(validation(format!(
                "hole does not fit inside the outer disk (clearance {})",
                self.clearance()
            )));
        }
        // the exterior ball is centred on the hole and must contain the disk
        let c = self.hole_center;
        let reach = self.outer_radius + (c[0] * c[0] + c[1] * c[1]).sqrt();
        if !(self.ext_radius > reach) {
            return Err(validation(format!(
                "ext_radius {} must exceed outer_radius + |hole_center| = {reach}",
                self.ext_radius
            )));
        }
        Ok(())
    }

    /// Length of the ray from the hole centre in direction `(cos φ, sin φ)`
    /// to the outer circle.
    fn ray_to_outer(&self, dir: [f64; 2]) -> f64 {
        let z = self.hole_center;
        let zd = z[0] * dir[0] + z[1] * dir[1];
        let zz = z[0] * z[0] + z[1] * z[1];
        -zd + (zd * zd - zz + self.outer_radius * self.outer_radius).sqrt()
    }

    /// Analytic area of the 2D baseline region.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.outer_radius.powi(2) - self.hole_radius.powi(2))
    }
}

/// Structured polar grid around the hole centre: rings between the hole and
/// the outer circle, each quad split into two triangles.
struct PolarGrid {
    n_theta: usize,
    n_rad: usize,
    nodes: Vec<Point>,
}

impl PolarGrid {
    fn new(design: &BaselineDesign, spacing: f64) -> Self {
        let z = design.hole_center;
        let zn = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let max_ray = design.outer_radius + zn;
        let two_pi = 2.0 * std::f64::consts::PI;
        let n_theta = ((two_pi * max_ray / spacing).ceil() as usize).max(8);
        let n_rad = (((max_ray - design.hole_radius) / spacing).ceil() as usize).max(1);
        let mut nodes = Vec::with_capacity(n_theta * (n_rad + 1));
        for i in 0..=n_rad {
            for j in 0..n_theta {
                let phi = two_pi * j as f64 / n_theta as f64;
                let dir = [phi.cos(), phi.sin()];
                let t_out = design.ray_to_outer(dir);
                let t = design.hole_radius + (t_out - design.hole_radius) * i as f64 / n_rad as f64;
                nodes.push([z[0] + t * dir[0], z[1] + t * dir[1], 0.0]);
            }
        }
        PolarGrid { n_theta, n_rad, nodes }
    }

    fn id(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + (j % self.n_theta)
    }

    fn triangles(&self) -> Vec<Vec<usize>> {
        let mut cells = Vec::with_capacity(2 * self.n_theta * self.n_rad);
        for i in 0..self.n_rad {
            for j in 0..self.n_theta {
                let (a, b, c, d) = (
                    self.id(i, j),
                    self.id(i + 1, j),
                    self.id(i + 1, j + 1),
                    self.id(i, j + 1),
                );
                cells.push(vec![a, b, c]);
                cells.push(vec![a, c, d]);
            }
        }
        cells
    }
}

fn orient_positive(mesh: &mut Mesh) {
    for c in 0..mesh.cells.len() {
        if mesh.cell_geometry(c).measure < 0.0 {
            mesh.cells[c].swap(0, 1);
        }
    }
}

/// Builds a triangle mesh of the baseline region with maximum cell diameter
/// at most `resolution`. The hole boundary is tagged `Dirichlet`, the outer
/// boundary `RobinNeumann`.
pub fn build_baseline(design: &BaselineDesign, resolution: f64) -> Result<Mesh> {
    design.validate()?;
    if !(resolution > 0.0) {
        return Err(validation("resolution must be positive"));
    }
    let grid = PolarGrid::new(design, resolution / 2f64.sqrt());
    let mut mesh = Mesh {
        dim: 2,
        nodes: grid.nodes.clone(),
        cells: grid.triangles(),
        facets: Vec::new(),
    };
    orient_positive(&mut mesh);
    let n_theta = grid.n_theta;
    mesh.rebuild_boundary(|nodes| {
        if nodes.iter().all(|&n| n < n_theta) {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::RobinNeumann
        }
    });
    Ok(mesh)
}

/// Thin-shell 3D mesh: the 2D polar grid extruded over `thickness` (centred
/// on z = 0) and each prism split into three tetrahedra.
///
/// Prisms are split by the vertex-ordering rule (each quad face gets the
/// diagonal from its larger bottom index to its smaller top index), which
/// keeps neighbouring prisms conforming.
pub fn build_baseline_3d(design: &BaselineDesign, resolution: f64, thickness: f64) -> Result<Mesh> {
    design.validate()?;
    if !(resolution > 0.0) || !(thickness > 0.0) {
        return Err(validation("resolution and thickness must be positive"));
    }
    let spacing = resolution / 3f64.sqrt();
    let grid = PolarGrid::new(design, spacing);
    let layers = ((thickness / spacing).ceil() as usize).max(1);
    let n2 = grid.nodes.len();
    let mut nodes = Vec::with_capacity(n2 * (layers + 1));
    for k in 0..=layers {
        let z = -0.5 * thickness + thickness * k as f64 / layers as f64;
        nodes.extend(grid.nodes.iter().map(|p| [p[0], p[1], z]));
    }
    let mut cells = Vec::new();
    for k in 0..layers {
        for tri in grid.triangles() {
            let mut v = tri.clone();
            v.sort_unstable();
            let bot: Vec<usize> = v.iter().map(|&i| k * n2 + i).collect();
            let top: Vec<usize> = v.iter().map(|&i| (k + 1) * n2 + i).collect();
            cells.push(vec![bot[0], bot[1], bot[2], top[0]]);
            cells.push(vec![bot[1], bot[2], top[0], top[1]]);
            cells.push(vec![bot[2], top[0], top[1], top[2]]);
        }
    }
    let mut mesh = Mesh {
        dim: 3,
        nodes,
        cells,
        facets: Vec::new(),
    };
    orient_positive(&mut mesh);
    let n_theta = grid.n_theta;
    mesh.rebuild_boundary(|fnodes| {
        if fnodes.iter().all(|&n| n % n2 < n_theta) {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::RobinNeumann
        }
    });
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_area_and_tags() {
        let d = BaselineDesign::annulus(1.0, 0.3, 1.5);
        let m = build_baseline(&d, 0.1).unwrap();
        m.validate().unwrap();
        let exact = std::f64::consts::PI * (1.0 - 0.09);
        assert!((m.total_volume() - exact).abs() / exact < 0.01);
        assert!(m.max_cell_diameter() <= 0.1 + 1e-12);
        let inner = m.boundary_measure(Some(BoundaryTag::Dirichlet));
        let outer = m.boundary_measure(Some(BoundaryTag::RobinNeumann));
        assert!((inner - 2.0 * std::f64::consts::PI * 0.3).abs() < 0.01);
        assert!((outer - 2.0 * std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn refinement_scales_cell_count() {
        let d = BaselineDesign::annulus(1.0, 0.3, 1.5);
        let coarse = build_baseline(&d, 0.2).unwrap();
        let fine = build_baseline(&d, 0.1).unwrap();
        assert!(fine.num_cells() >= 3 * coarse.num_cells());
    }

    #[test]
    fn infeasible_designs_rejected() {
        assert!(build_baseline(&BaselineDesign::annulus(1.0, 1.2, 1.5), 0.1).is_err());
        assert!(build_baseline(&BaselineDesign::annulus(1.0, 1.0, 1.5), 0.1).is_err());
        assert!(build_baseline(&BaselineDesign::annulus(1.0, 0.3, 0.9), 0.1).is_err());
        let off = BaselineDesign {
            hole_center: [0.75, 0.0],
            ..BaselineDesign::annulus(1.0, 0.3, 1.5)
        };
        assert!(build_baseline(&off, 0.1).is_err());
    }

    #[test]
    fn eccentric_hole() {
        let d = BaselineDesign {
            hole_center: [0.3, -0.1],
            ..BaselineDesign::annulus(1.0, 0.25, 1.5)
        };
        let m = build_baseline(&d, 0.05).unwrap();
        m.validate().unwrap();
        assert!((m.total_volume() - d.area()).abs() / d.area() < 0.005);
        for &n in &m.tagged_nodes(BoundaryTag::RobinNeumann) {
            let p = m.nodes[n];
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shell_mesh_is_conforming() {
        let d = BaselineDesign::annulus(1.0, 0.4, 1.5);
        let m = build_baseline_3d(&d, 0.25, 0.2).unwrap();
        m.validate().unwrap();
        let exact = d.area() * 0.2;
        assert!((m.total_volume() - exact).abs() / exact < 0.05);
        let inner = m.boundary_measure(Some(BoundaryTag::Dirichlet));
        assert!((inner - 2.0 * std::f64::consts::PI * 0.4 * 0.2).abs() / inner < 0.05);
        assert!(m.max_cell_diameter() <= 0.25 + 1e-12);
    }
}

//! Nodal P1 fields, cell gradients and gradient recovery.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::geometry::mesh::{barycentric_point, Mesh, Point};
use crate::material::Tensor3;

/// Gradient of the P1 interpolant of `values` on cell `c`.
pub fn cell_gradient(mesh: &Mesh, c: usize, values: &[f64]) -> Point {
    let geo = mesh.cell_geometry(c);
    let mut g = [0.0; 3];
    for (k, &n) in mesh.cells[c].iter().enumerate() {
        for a in 0..3 {
            g[a] += values[n] * geo.grads[k][a];
        }
    }
    g
}

/// Volume-weighted average of adjacent cell gradients at every node.
pub fn recover_nodal_gradient(mesh: &Mesh, values: &[f64]) -> Vec<Point> {
    let mut acc = vec![[0.0; 3]; mesh.num_nodes()];
    let mut weight = vec![0.0; mesh.num_nodes()];
    for c in 0..mesh.num_cells() {
        let vol = mesh.cell_geometry(c).measure.abs();
        let g = cell_gradient(mesh, c, values);
        for &n in &mesh.cells[c] {
            weight[n] += vol;
            for a in 0..3 {
                acc[n][a] += vol * g[a];
            }
        }
    }
    for (g, w) in acc.iter_mut().zip(&weight) {
        if *w > 0.0 {
            for v in g.iter_mut() {
                *v /= w;
            }
        }
    }
    acc
}

fn coord_header(dim: usize) -> &'static str {
    if dim == 2 {
        "node_id,x,y"
    } else {
        "node_id,x,y,z"
    }
}

fn write_coords(out: &mut String, id: usize, p: &Point, dim: usize) {
    let _ = write!(out, "{id},{:?},{:?}", p[0], p[1]);
    if dim == 3 {
        let _ = write!(out, ",{:?}", p[2]);
    }
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    name: String,
    dimension: usize,
    components: usize,
    coordinates: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

fn field_json(mesh: &Mesh, name: &str, components: usize, values: Vec<Vec<f64>>) -> Result<String> {
    let d = mesh.dim;
    let doc = FieldJson {
        name: name.to_string(),
        dimension: d,
        components,
        coordinates: mesh.nodes.iter().map(|p| p[..d].to_vec()).collect(),
        values,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// One value per mesh node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(validation(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!("non-finite field value at node {i}")));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Point) -> f64) -> Self {
        let values = mesh.nodes.iter().map(f).collect();
        ScalarField { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.num_nodes()];
        ScalarField { mesh, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Value of the P1 interpolant at barycentric coordinates in cell `c`.
    pub fn interpolate(&self, c: usize, bary: &[f64]) -> f64 {
        self.mesh.cells[c].iter().zip(bary).map(|(&n, b)| b * self.values[n]).sum()
    }

    pub fn cell_mean(&self, c: usize) -> f64 {
        let cell = &self.mesh.cells[c];
        cell.iter().map(|&n| self.values[n]).sum::<f64>() / cell.len() as f64
    }

    /// Piecewise-constant gradient, one per cell.
    pub fn cell_gradients(&self) -> Vec<Point> {
        (0..self.mesh.num_cells())
            .map(|c| cell_gradient(&self.mesh, c, &self.values))
            .collect()
    }

    /// Nodal gradient by volume-weighted averaging of cell gradients.
    pub fn recovered_gradient(&self) -> VectorField {
        VectorField {
            mesh: self.mesh.clone(),
            values: recover_nodal_gradient(&self.mesh, &self.values),
        }
    }

    /// Discrete L² norm of `self − exact` using a degree-5 cell rule.
    pub fn l2_error(&self, exact: impl Fn(&Point) -> f64) -> f64 {
        let rule = crate::geometry::quadrature::cell_rule_high(self.mesh.dim);
        let mut s = 0.0;
        for c in 0..self.mesh.num_cells() {
            let pts = self.mesh.cell_points(c);
            let vol = self.mesh.cell_geometry(c).measure.abs();
            for (b, w) in rule.iter() {
                let e = self.interpolate(c, b) - exact(&barycentric_point(&pts, b));
                s += w * vol * e * e;
            }
        }
        s.sqrt()
    }

    pub fn to_csv(&self, name: &str) -> String {
        let d = self.mesh.dim;
        let mut out = format!("{},{name}\n", coord_header(d));
        for (i, (p, v)) in self.mesh.nodes.iter().zip(&self.values).enumerate() {
            write_coords(&mut out, i, p, d);
            let _ = writeln!(out, ",{v:?}");
        }
        out
    }

    pub fn to_json(&self, name: &str) -> Result<String> {
        let values = self.values.iter().map(|v| vec![*v]).collect();
        field_json(&self.mesh, name, 1, values)
    }
}

/// `dim` components per node, stored as 3-vectors (third entry zero in 2D).
#[derive(Debug, Clone)]
pub struct VectorField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<Point>,
}

impl VectorField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Point>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(validation(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(validation(format!("non-finite field value at node {i}")));
        }
        Ok(VectorField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![[0.0; 3]; mesh.num_nodes()];
        VectorField { mesh, values }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Point) -> Point) -> Self {
        let values = mesh.nodes.iter().map(f).collect();
        VectorField { mesh, values }
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    /// Largest Euclidean node norm.
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn interpolate(&self, c: usize, bary: &[f64]) -> Point {
        let mut x = [0.0; 3];
        for (&n, b) in self.mesh.cells[c].iter().zip(bary) {
            for k in 0..3 {
                x[k] += b * self.values[n][k];
            }
        }
        x
    }

    /// `∂u_i/∂x_j` per cell.
    pub fn cell_gradients(&self) -> Vec<Tensor3> {
        let comps: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.component(i)).collect();
        (0..self.mesh.num_cells())
            .map(|c| {
                let mut g = [[0.0; 3]; 3];
                for (i, comp) in comps.iter().enumerate() {
                    g[i] = cell_gradient(&self.mesh, c, comp);
                }
                g
            })
            .collect()
    }

    /// Nodal `∂u_i/∂x_j` by volume-weighted recovery.
    pub fn recovered_gradient(&self) -> Vec<Tensor3> {
        let mut out = vec![[[0.0; 3]; 3]; self.mesh.num_nodes()];
        for i in 0..self.dim() {
            let g = recover_nodal_gradient(&self.mesh, &self.component(i));
            for (o, gi) in out.iter_mut().zip(g) {
                o[i] = gi;
            }
        }
        out
    }

    /// Discrete L² norm of `self − exact`.
    pub fn l2_error(&self, exact: impl Fn(&Point) -> Point) -> f64 {
        let rule = crate::geometry::quadrature::cell_rule_high(self.mesh.dim);
        let mut s = 0.0;
        for c in 0..self.mesh.num_cells() {
            let pts = self.mesh.cell_points(c);
            let vol = self.mesh.cell_geometry(c).measure.abs();
            for (b, w) in rule.iter() {
                let u = self.interpolate(c, b);
                let e = exact(&barycentric_point(&pts, b));
                let d2: f64 = (0..3).map(|k| (u[k] - e[k]).powi(2)).sum();
                s += w * vol * d2;
            }
        }
        s.sqrt()
    }

    /// Broken H¹ seminorm of `self − exact`, given the exact gradient.
    pub fn h1_error(&self, exact_grad: impl Fn(&Point) -> Tensor3) -> f64 {
        let rule = crate::geometry::quadrature::cell_rule_high(self.mesh.dim);
        let grads = self.cell_gradients();
        let mut s = 0.0;
        for (c, g) in grads.iter().enumerate() {
            let pts = self.mesh.cell_points(c);
            let vol = self.mesh.cell_geometry(c).measure.abs();
            for (b, w) in rule.iter() {
                let e = exact_grad(&barycentric_point(&pts, b));
                let d2: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (g[i][j] - e[i][j]).powi(2)).sum();
                s += w * vol * d2;
            }
        }
        s.sqrt()
    }

    pub fn to_csv(&self, name: &str) -> String {
        let d = self.dim();
        let comps = ["x", "y", "z"];
        let mut out = coord_header(d).to_string();
        for c in &comps[..d] {
            let _ = write!(out, ",{name}_{c}");
        }
        out.push('\n');
        for (i, (p, v)) in self.mesh.nodes.iter().zip(&self.values).enumerate() {
            write_coords(&mut out, i, p, d);
            for x in &v[..d] {
                let _ = write!(out, ",{x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, name: &str) -> Result<String> {
        let d = self.dim();
        let values = self.values.iter().map(|v| v[..d].to_vec()).collect();
        field_json(&self.mesh, name, d, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::design::{build_baseline, BaselineDesign};

    fn mesh() -> Arc<Mesh> {
        Arc::new(build_baseline(&BaselineDesign::annulus(1.0, 0.3, 1.5), 0.2).unwrap())
    }

    #[test]
    fn affine_gradients_are_exact() {
        let m = mesh();
        let f = ScalarField::from_fn(m.clone(), |p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        for g in f.cell_gradients() {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
        for g in &f.recovered_gradient().values {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
        let u = VectorField::from_fn(m, |p| [p[1], -p[0] + 2.0 * p[1], 0.0]);
        for g in u.recovered_gradient() {
            assert!((g[0][1] - 1.0).abs() < 1e-12 && (g[1][0] + 1.0).abs() < 1e-12);
            assert!((g[1][1] - 2.0).abs() < 1e-12 && g[0][0].abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_lengths_and_nans() {
        let m = mesh();
        assert!(ScalarField::new(m.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; m.num_nodes()];
        v[4] = f64::NAN;
        assert!(ScalarField::new(m, v).is_err());
    }

    #[test]
    fn csv_is_ordered_by_node() {
        let m = mesh();
        let f = ScalarField::from_fn(m.clone(), |p| p[0]);
        let csv = f.to_csv("temperature");
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("node_id,x,y,temperature"));
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0].parse::<usize>().unwrap(), i);
            assert_eq!(cols[3].parse::<f64>().unwrap(), m.nodes[i][0]);
        }
        let json: serde_json::Value = serde_json::from_str(&f.to_json("temperature").unwrap()).unwrap();
        assert_eq!(json["values"].as_array().unwrap().len(), m.num_nodes());
    }

    #[test]
    fn l2_error_of_interpolant_is_small() {
        let m = mesh();
        let f = ScalarField::from_fn(m, |p| p[0] * p[1]);
        assert!(f.l2_error(|p| p[0] * p[1]) < 1e-2);
    }
}

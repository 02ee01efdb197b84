//! Deformation maps `Φ(x) = x + Σ_j θ_j ψ_j(x)` acting on the baseline.

use std::fmt::Debug;
use std::sync::Arc;

use super::design::BaselineDesign;
use super::mesh::{barycentric_point, Mesh, Point};
use super::quadrature;
use crate::error::{Error, Result};
use crate::material::Tensor3;

/// A smooth vector field on the exterior container.
///
/// Fields act in the x-y plane; the third component of the value and the
/// third row and column of the Jacobian are zero.
pub trait BasisField: Send + Sync + Debug {
    fn value(&self, x: &Point) -> Point;
    /// `∂ψ_i/∂x_j`.
    fn jacobian(&self, x: &Point) -> Tensor3;
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1. Returns value and derivative.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |s: f64| (-1.0 / s).exp();
    let (a, b) = (f(t), f(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    let sum = a + b;
    (a / sum, (da * b + a * db) / (sum * sum))
}

/// Radial profile rising smoothly from 0 to 1 on `[rise.0, rise.1]` and
/// falling back to 0 on `[fall.0, fall.1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBump {
    pub rise: (f64, f64),
    pub fall: (f64, f64),
}

impl RadialBump {
    /// Profile vanishing near the hole and near the exterior boundary, equal
    /// to one over the whole outer boundary of the baseline.
    pub fn for_design(design: &BaselineDesign) -> Self {
        let z = design.hole_center;
        let zn = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let r = design.hole_radius;
        let d = design.clearance();
        let far = design.outer_radius + zn;
        let gap = design.ext_radius - far;
        RadialBump {
            rise: (r + 0.1 * d, r + 0.6 * d),
            fall: (far + 0.3 * gap, design.ext_radius - 0.1 * gap),
        }
    }

    pub fn eval(&self, rho: f64) -> (f64, f64) {
        let w1 = self.rise.1 - self.rise.0;
        let w2 = self.fall.1 - self.fall.0;
        let (s1, ds1) = smooth_step((rho - self.rise.0) / w1);
        let (s2, ds2) = smooth_step((rho - self.fall.0) / w2);
        (s1 * (1.0 - s2), ds1 / w1 * (1.0 - s2) - s1 * ds2 / w2)
    }
}

/// `ψ(x) = η(ρ) · v_j(φ)` with `(ρ, φ)` polar coordinates about `center`,
/// `v_j = (cos jφ, sin jφ)` (aligned) or `(−sin jφ, cos jφ)` (rotated).
#[derive(Debug, Clone)]
pub struct FourierBump {
    pub center: [f64; 2],
    pub mode: usize,
    pub rotated: bool,
    pub profile: RadialBump,
}

impl FourierBump {
    fn direction(&self, phi: f64) -> ([f64; 2], [f64; 2]) {
        let j = self.mode as f64;
        let (s, c) = (j * phi).sin_cos();
        if self.rotated {
            ([-s, c], [-j * c, -j * s])
        } else {
            ([c, s], [-j * s, j * c])
        }
    }
}

impl BasisField for FourierBump {
    fn value(&self, x: &Point) -> Point {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        let rho = dx.hypot(dy);
        let (eta, _) = self.profile.eval(rho);
        if eta == 0.0 {
            return [0.0; 3];
        }
        let (v, _) = self.direction(dy.atan2(dx));
        [eta * v[0], eta * v[1], 0.0]
    }

    fn jacobian(&self, x: &Point) -> Tensor3 {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        let rho = dx.hypot(dy);
        let (eta, deta) = self.profile.eval(rho);
        let mut j = [[0.0; 3]; 3];
        if eta == 0.0 && deta == 0.0 {
            return j;
        }
        let (v, dv) = self.direction(dy.atan2(dx));
        let grad_rho = [dx / rho, dy / rho];
        let grad_phi = [-dy / (rho * rho), dx / (rho * rho)];
        for i in 0..2 {
            for k in 0..2 {
                j[i][k] = deta * v[i] * grad_rho[k] + eta * dv[i] * grad_phi[k];
            }
        }
        j
    }
}

/// Constant direction times a radial bump: a rigid translation wherever the
/// profile equals one.
#[derive(Debug, Clone)]
pub struct TranslationBump {
    pub center: [f64; 2],
    pub direction: [f64; 2],
    pub profile: RadialBump,
}

impl BasisField for TranslationBump {
    fn value(&self, x: &Point) -> Point {
        let rho = (x[0] - self.center[0]).hypot(x[1] - self.center[1]);
        let (eta, _) = self.profile.eval(rho);
        [eta * self.direction[0], eta * self.direction[1], 0.0]
    }

    fn jacobian(&self, x: &Point) -> Tensor3 {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        let rho = dx.hypot(dy);
        let (_, deta) = self.profile.eval(rho);
        let mut j = [[0.0; 3]; 3];
        if deta != 0.0 {
            for i in 0..2 {
                j[i][0] = deta * self.direction[i] * dx / rho;
                j[i][1] = deta * self.direction[i] * dy / rho;
            }
        }
        j
    }
}

/// Linear field `ψ(x) = A x` in the plane. Not compactly supported; meant
/// for checks such as global scaling.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub matrix: [[f64; 2]; 2],
}

impl BasisField for LinearField {
    fn value(&self, x: &Point) -> Point {
        let a = &self.matrix;
        [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1], 0.0]
    }

    fn jacobian(&self, _: &Point) -> Tensor3 {
        let a = &self.matrix;
        [[a[0][0], a[0][1], 0.0], [a[1][0], a[1][1], 0.0], [0.0; 3]]
    }
}

/// The default design basis: `n_modes` angular modes, each in aligned and
/// rotated form, ordered `(0, aligned), (0, rotated), (1, aligned), ...`.
pub fn fourier_bump_basis(design: &BaselineDesign, n_modes: usize) -> Vec<Arc<dyn BasisField>> {
    let profile = RadialBump::for_design(design);
    let mut v: Vec<Arc<dyn BasisField>> = Vec::with_capacity(2 * n_modes);
    for mode in 0..n_modes {
        for rotated in [false, true] {
            v.push(Arc::new(FourierBump {
                center: design.hole_center,
                mode,
                rotated,
                profile,
            }));
        }
    }
    v
}

/// `Φ(x) = x + Σ_j θ_j ψ_j(x)`.
#[derive(Debug, Clone)]
pub struct DeformationMap {
    pub coeffs: Vec<f64>,
    pub basis: Arc<Vec<Arc<dyn BasisField>>>,
}

impl DeformationMap {
    pub fn new(coeffs: Vec<f64>, basis: Arc<Vec<Arc<dyn BasisField>>>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(crate::error::validation(format!(
                "{} coefficients for {} basis fields",
                coeffs.len(),
                basis.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(crate::error::validation("non-finite deformation coefficient"));
        }
        Ok(DeformationMap { coeffs, basis })
    }

    pub fn identity(basis: Arc<Vec<Arc<dyn BasisField>>>) -> Self {
        DeformationMap {
            coeffs: vec![0.0; basis.len()],
            basis,
        }
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, self.basis.clone())
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn apply(&self, x: &Point) -> Point {
        let mut y = *x;
        for (c, psi) in self.coeffs.iter().zip(self.basis.iter()) {
            if *c != 0.0 {
                let v = psi.value(x);
                for k in 0..3 {
                    y[k] += c * v[k];
                }
            }
        }
        y
    }

    pub fn jacobian(&self, x: &Point) -> Tensor3 {
        let mut j = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for (c, psi) in self.coeffs.iter().zip(self.basis.iter()) {
            if *c != 0.0 {
                let g = psi.jacobian(x);
                for a in 0..3 {
                    for b in 0..3 {
                        j[a][b] += c * g[a][b];
                    }
                }
            }
        }
        j
    }

    /// Jacobian determinant in `dim` dimensions.
    pub fn det(&self, x: &Point, dim: usize) -> f64 {
        let j = self.jacobian(x);
        if dim == 2 {
            j[0][0] * j[1][1] - j[0][1] * j[1][0]
        } else {
            j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
        }
    }

    /// Solves `Φ(x) = y` by Newton iteration from `x = y`.
    pub fn inverse(&self, y: &Point, dim: usize) -> Result<Point> {
        let mut x = *y;
        for _ in 0..100 {
            let fx = self.apply(&x);
            let r = [fx[0] - y[0], fx[1] - y[1], fx[2] - y[2]];
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= 1e-14 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Ok(x);
            }
            let j = self.jacobian(&x);
            let step = solve_small(&j, &r, dim)
                .ok_or_else(|| Error::Admissibility("singular deformation Jacobian".into()))?;
            for k in 0..3 {
                x[k] -= step[k];
            }
        }
        Err(Error::Admissibility(format!("inverse map did not converge at {y:?}")))
    }
}

fn solve_small(a: &Tensor3, b: &[f64; 3], dim: usize) -> Option<Point> {
    if dim == 2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some([
            (a[1][1] * b[0] - a[0][1] * b[1]) / det,
            (a[0][0] * b[1] - a[1][0] * b[0]) / det,
            0.0,
        ])
    } else {
        let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
        m.lu().solve(&nalgebra::Vector3::new(b[0], b[1], b[2])).map(|v| [v[0], v[1], v[2]])
    }
}

/// Baseline design, deformation, and both meshes.
#[derive(Debug, Clone)]
pub struct Shape {
    pub baseline: BaselineDesign,
    pub map: DeformationMap,
    pub mesh: Arc<Mesh>,
    pub baseline_mesh: Arc<Mesh>,
}

impl Shape {
    /// Deforms `baseline_mesh` by `map`.
    pub fn new(baseline: BaselineDesign, map: DeformationMap, baseline_mesh: Arc<Mesh>) -> Result<Self> {
        let mesh = if map.is_identity() {
            baseline_mesh.clone()
        } else {
            Arc::new(apply_deformation(&map, &baseline_mesh)?)
        };
        Ok(Shape {
            baseline,
            map,
            mesh,
            baseline_mesh,
        })
    }

    pub fn undeformed(baseline: BaselineDesign, baseline_mesh: Arc<Mesh>, basis: Arc<Vec<Arc<dyn BasisField>>>) -> Self {
        Shape {
            baseline,
            map: DeformationMap::identity(basis),
            mesh: baseline_mesh.clone(),
            baseline_mesh,
        }
    }

    pub fn volume(&self) -> f64 {
        volume(&self.map, &self.baseline_mesh)
    }
}

/// Smallest Jacobian determinant of `map` over the degree-2 cell quadrature
/// points of `base`.
pub fn min_jacobian_det(map: &DeformationMap, base: &Mesh) -> f64 {
    let rule = quadrature::cell_rule(base.dim);
    let mut min = f64::INFINITY;
    for c in 0..base.num_cells() {
        let pts = base.cell_points(c);
        for (b, _) in rule.iter() {
            min = min.min(map.det(&barycentric_point(&pts, b), base.dim));
        }
    }
    min
}

/// Maps every node of `base` through `map`; connectivity and tags are kept.
///
/// Fails if the Jacobian determinant is non-positive at a quadrature point or
/// any image cell is inverted.
pub fn apply_deformation(map: &DeformationMap, base: &Mesh) -> Result<Mesh> {
    let min_det = min_jacobian_det(map, base);
    if !(min_det > 0.0) {
        return Err(Error::Admissibility(format!(
            "deformation folds the mesh (min det ∇Φ = {min_det})"
        )));
    }
    let nodes = base.nodes.iter().map(|x| map.apply(x)).collect();
    let mesh = base.with_nodes(nodes);
    for c in 0..mesh.num_cells() {
        let m = mesh.cell_geometry(c).measure;
        if !(m > 0.0) {
            return Err(Error::Admissibility(format!("deformed cell {c} is inverted (measure {m})")));
        }
    }
    Ok(mesh)
}

/// `∫_{Ω_b} |det ∇Φ| dx` by degree-5 cell quadrature on the baseline mesh.
pub fn volume(map: &DeformationMap, base: &Mesh) -> f64 {
    let rule = quadrature::cell_rule_high(base.dim);
    let identity = map.is_identity();
    (0..base.num_cells())
        .map(|c| {
            let pts = base.cell_points(c);
            let measure = base.cell_geometry(c).measure;
            if identity {
                return measure;
            }
            let s: f64 = rule
                .iter()
                .map(|(b, w)| w * map.det(&barycentric_point(&pts, b), base.dim).abs())
                .sum();
            measure * s
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::design::build_baseline;
    use crate::geometry::mesh::BoundaryTag;

    fn setup() -> (BaselineDesign, Mesh, Arc<Vec<Arc<dyn BasisField>>>) {
        let d = BaselineDesign::annulus(1.0, 0.3, 1.5);
        let m = build_baseline(&d, 0.1).unwrap();
        let b = Arc::new(fourier_bump_basis(&d, 4));
        (d, m, b)
    }

    #[test]
    fn smooth_step_derivative() {
        for t in [0.1, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-6;
            let fd = (smooth_step(t + h).0 - smooth_step(t - h).0) / (2.0 * h);
            assert!((fd - smooth_step(t).1).abs() < 1e-7);
        }
        assert_eq!(smooth_step(-0.5), (0.0, 0.0));
        assert_eq!(smooth_step(1.5), (1.0, 0.0));
    }

    #[test]
    fn basis_jacobians_match_finite_differences() {
        let (d, _, b) = setup();
        let pts = [[0.5, 0.2, 0.0], [-0.45, 0.41, 0.0], [0.1, -1.05, 0.0], [1.2, 0.3, 0.0]];
        for psi in b.iter().chain(std::iter::once(&(Arc::new(TranslationBump {
            center: d.hole_center,
            direction: [0.6, -0.8],
            profile: RadialBump::for_design(&d),
        }) as Arc<dyn BasisField>))) {
            for x in &pts {
                let j = psi.jacobian(x);
                for k in 0..2 {
                    let h = 1e-6;
                    let (mut xp, mut xm) = (*x, *x);
                    xp[k] += h;
                    xm[k] -= h;
                    let (vp, vm) = (psi.value(&xp), psi.value(&xm));
                    for i in 0..2 {
                        let fd = (vp[i] - vm[i]) / (2.0 * h);
                        assert!((fd - j[i][k]).abs() < 1e-6, "{psi:?} at {x:?}: {fd} vs {}", j[i][k]);
                    }
                }
            }
        }
    }

    #[test]
    fn basis_vanishes_near_hole_and_exterior() {
        let (d, m, b) = setup();
        for psi in b.iter() {
            for &n in &m.tagged_nodes(BoundaryTag::Dirichlet) {
                assert_eq!(psi.value(&m.nodes[n]), [0.0; 3]);
            }
            assert_eq!(psi.value(&[d.ext_radius - 1e-3, 0.0, 0.0]), [0.0; 3]);
        }
    }

    #[test]
    fn zero_coefficients_give_identical_mesh() {
        let (_, m, b) = setup();
        let map = DeformationMap::identity(b);
        assert_eq!(apply_deformation(&map, &m).unwrap(), m);
    }

    #[test]
    fn translation_inside_plateau() {
        let (d, m, _) = setup();
        let profile = RadialBump::for_design(&d);
        let basis: Arc<Vec<Arc<dyn BasisField>>> = Arc::new(vec![Arc::new(TranslationBump {
            center: d.hole_center,
            direction: [1.0, 0.0],
            profile,
        })]);
        let map = DeformationMap::new(vec![0.03], basis).unwrap();
        let out = apply_deformation(&map, &m).unwrap();
        let mut checked = 0;
        for (a, b) in m.nodes.iter().zip(&out.nodes) {
            let rho = a[0].hypot(a[1]);
            if rho >= profile.rise.1 && rho <= profile.fall.0 {
                assert!((b[0] - a[0] - 0.03).abs() < 1e-15 && (b[1] - a[1]).abs() < 1e-15);
                checked += 1;
            }
        }
        assert!(checked > 50);
        assert_eq!(out.facets, m.facets);
        assert_eq!(out.cells, m.cells);
    }

    #[test]
    fn folding_is_rejected() {
        let (_, m, b) = setup();
        // find a radial-inflation coefficient that drives det ∇Φ negative
        let mut theta = vec![0.0; b.len()];
        let mut t = -0.1;
        loop {
            theta[2] = t;
            let map = DeformationMap::new(theta.clone(), b.clone()).unwrap();
            if min_jacobian_det(&map, &m) < 0.0 {
                assert!(matches!(apply_deformation(&map, &m), Err(Error::Admissibility(_))));
                break;
            }
            t *= 1.5;
            assert!(t > -100.0, "no folding coefficient found");
        }
    }

    #[test]
    fn identity_volume_is_mesh_volume() {
        let (_, m, b) = setup();
        let map = DeformationMap::identity(b);
        assert_eq!(volume(&map, &m), m.total_volume());
    }

    #[test]
    fn global_scaling_volume() {
        let (_, m, _) = setup();
        let basis: Arc<Vec<Arc<dyn BasisField>>> = Arc::new(vec![Arc::new(LinearField {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
        })]);
        let s = 1.3;
        let map = DeformationMap::new(vec![s - 1.0], basis).unwrap();
        let v = volume(&map, &m);
        assert!((v - s * s * m.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let (_, _, b) = setup();
        let map = DeformationMap::new(vec![0.02, -0.01, 0.03, 0.0, -0.02, 0.01, 0.01, 0.005], b).unwrap();
        for x in [[0.6, 0.1, 0.0], [-0.2, -0.9, 0.0], [1.1, 0.4, 0.0]] {
            let y = map.apply(&x);
            let back = map.inverse(&y, 2).unwrap();
            assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        }
    }
}

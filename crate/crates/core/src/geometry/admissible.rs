//! Admissibility of deformation maps and Hölder seminorm estimates.
//!
//! Derivative norms are estimated by central finite differences on a polar
//! sample grid covering the exterior ball. Maps act in the x-y plane, so the
//! grid is planar in 3D as well.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::deform::{min_jacobian_det, volume, BasisField, DeformationMap};
use super::design::BaselineDesign;
use super::mesh::{Mesh, Point};
use crate::error::{validation, Result};
use crate::fields::{recover_nodal_gradient, ScalarField, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityOptions {
    pub det_floor: f64,
    /// Bound `K` on the estimated norms and on the coefficient budget.
    pub norm_bound: f64,
    pub vol_tol: f64,
    /// Highest derivative order in the norm estimate.
    pub order: usize,
    pub holder_exponent: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        AdmissibilityOptions {
            det_floor: 0.1,
            norm_bound: 10.0,
            vol_tol: 1e-3,
            order: 4,
            holder_exponent: 0.5,
            radial_samples: 16,
            angular_samples: 48,
        }
    }
}

impl AdmissibilityOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.det_floor > 0.0) || !(self.norm_bound > 0.0) || !(self.vol_tol > 0.0) {
            return Err(validation("det_floor, norm_bound and vol_tol must be positive"));
        }
        if !(self.holder_exponent > 0.0 && self.holder_exponent <= 1.0) {
            return Err(validation("holder_exponent must lie in (0, 1]"));
        }
        if self.order > 6 || self.radial_samples < 2 || self.angular_samples < 4 {
            return Err(validation("order must be at most 6 and the sample grid at least 2 x 4"));
        }
        Ok(())
    }
}

/// Finite-difference derivative sups and Hölder seminorm of a planar map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// `sup_x max_{i, |β| = n} |D^β f_i(x)|` for `n = 0..=order`.
    pub derivative_sups: Vec<f64>,
    /// Order-`k` Hölder seminorm over all sample pairs.
    pub holder: f64,
}

impl NormEstimate {
    /// `max_n derivative_sups[n] + holder`.
    pub fn total(&self) -> f64 {
        self.derivative_sups.iter().copied().fold(0.0, f64::max) + self.holder
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub min_det: f64,
    pub map_norm: NormEstimate,
    pub inverse_norm: Option<NormEstimate>,
    /// `Σ_j |θ_j| ‖ψ_j‖`.
    pub budget: f64,
    pub volume: f64,
    pub baseline_volume: f64,
    pub volume_deviation: f64,
    pub det_ok: bool,
    pub norm_ok: bool,
    pub budget_ok: bool,
    pub volume_ok: bool,
    pub passed: bool,
    pub messages: Vec<String>,
}

/// Planar sample points in `B(z, R_ext)`: a polar grid plus the centre.
pub fn sample_points(design: &BaselineDesign, opts: &AdmissibilityOptions) -> Vec<Point> {
    let z = design.hole_center;
    let mut pts = vec![[z[0], z[1], 0.0]];
    let nr = opts.radial_samples;
    let na = opts.angular_samples;
    for i in 1..=nr {
        // stay inside the open ball so stencils remain near the support
        let rho = design.ext_radius * i as f64 / (nr as f64 + 0.5);
        for j in 0..na {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5 * (i % 2) as f64) / na as f64;
            pts.push([z[0] + rho * phi.cos(), z[1] + rho * phi.sin(), 0.0]);
        }
    }
    pts
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Step used for derivatives of order `n`, balancing truncation against
/// round-off.
fn fd_step(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 1e-5,
        2 => 1e-4,
        3 => 2e-3,
        _ => 1e-2,
    }
}

/// Every planar multi-index `(a, b)` with `a + b = n`, applied by tensor
/// products of central differences. Returns `[D^β f_0, D^β f_1]` per index.
fn derivatives_of_order(f: &dyn Fn(&Point) -> [f64; 2], x: &Point, n: usize) -> Vec<[f64; 2]> {
    if n == 0 {
        return vec![f(x)];
    }
    let h = fd_step(n);
    let mut out = Vec::with_capacity(n + 1);
    for a in (0..=n).rev() {
        let b = n - a;
        let mut acc = [0.0; 2];
        for i in 0..=a {
            let ca = binomial(a, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
            let dx = (a as f64 / 2.0 - i as f64) * h;
            for j in 0..=b {
                let cb = binomial(b, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
                let dy = (b as f64 / 2.0 - j as f64) * h;
                let v = f(&[x[0] + dx, x[1] + dy, x[2]]);
                acc[0] += ca * cb * v[0];
                acc[1] += ca * cb * v[1];
            }
        }
        let scale = h.powi(n as i32);
        out.push([acc[0] / scale, acc[1] / scale]);
    }
    out
}

/// Norm estimate of a planar map `f` on `points`.
pub fn estimate_norm(f: &dyn Fn(&Point) -> [f64; 2], points: &[Point], order: usize, alpha: f64) -> NormEstimate {
    let mut sups = vec![0.0f64; order + 1];
    let mut top: Vec<Vec<[f64; 2]>> = Vec::with_capacity(points.len());
    for x in points {
        for (n, s) in sups.iter_mut().enumerate() {
            let d = derivatives_of_order(f, x, n);
            for v in &d {
                *s = s.max(v[0].abs()).max(v[1].abs());
            }
            if n == order {
                top.push(d);
            }
        }
    }
    let mut holder = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let r = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
            if r == 0.0 {
                continue;
            }
            let denom = r.powf(alpha);
            for (a, b) in top[i].iter().zip(&top[j]) {
                let diff = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
                holder = holder.max(diff / denom);
            }
        }
    }
    NormEstimate {
        derivative_sups: sups,
        holder,
    }
}

/// Norm estimate of one basis field.
pub fn basis_norm(psi: &dyn BasisField, design: &BaselineDesign, opts: &AdmissibilityOptions) -> f64 {
    let pts = sample_points(design, opts);
    let f = |x: &Point| {
        let v = psi.value(x);
        [v[0], v[1]]
    };
    estimate_norm(&f, &pts, opts.order, opts.holder_exponent).total()
}

/// Norm estimates of every basis field, in basis order.
pub fn basis_norms(basis: &[std::sync::Arc<dyn BasisField>], design: &BaselineDesign, opts: &AdmissibilityOptions) -> Vec<f64> {
    basis.iter().map(|psi| basis_norm(psi.as_ref(), design, opts)).collect()
}

/// `Σ_j |θ_j| ‖ψ_j‖`.
pub fn coefficient_budget(coeffs: &[f64], norms: &[f64]) -> f64 {
    coeffs.iter().zip(norms).map(|(c, n)| c.abs() * n).sum()
}

/// Full admissibility check of `map` on the baseline mesh `base`.
///
/// `basis_norms` may be passed in to avoid recomputing them.
pub fn check_admissible(
    map: &DeformationMap,
    base: &Mesh,
    design: &BaselineDesign,
    opts: &AdmissibilityOptions,
    basis_norms_hint: Option<&[f64]>,
) -> AdmissibilityReport {
    let dim = base.dim;
    let mut messages = Vec::new();
    let min_det = min_jacobian_det(map, base);
    let det_ok = min_det >= opts.det_floor;
    if !det_ok {
        messages.push(format!("min det {min_det:.6} below floor {}", opts.det_floor));
    }

    let pts = sample_points(design, opts);
    let fwd = |x: &Point| {
        let y = map.apply(x);
        [y[0], y[1]]
    };
    let map_norm = estimate_norm(&fwd, &pts, opts.order, opts.holder_exponent);

    // the inverse is only meaningful for a locally invertible map
    let inverse_norm = if min_det > 0.0 {
        let failed = std::cell::Cell::new(false);
        let inv = |y: &Point| match map.inverse(y, dim) {
            Ok(x) => [x[0], x[1]],
            Err(_) => {
                failed.set(true);
                [f64::NAN, f64::NAN]
            }
        };
        let est = estimate_norm(&inv, &pts, opts.order, opts.holder_exponent);
        if failed.get() {
            messages.push("inverse map evaluation failed".into());
            None
        } else {
            Some(est)
        }
    } else {
        None
    };
    let inv_total = inverse_norm.as_ref().map_or(f64::INFINITY, NormEstimate::total);
    let norm_ok = map_norm.total() <= opts.norm_bound && inv_total <= opts.norm_bound;
    if !norm_ok {
        messages.push(format!(
            "norm estimate exceeds K = {}: map {:.4}, inverse {:.4}",
            opts.norm_bound,
            map_norm.total(),
            inv_total
        ));
    }

    let norms = match basis_norms_hint {
        Some(n) => n.to_vec(),
        None => basis_norms(&map.basis, design, opts),
    };
    let budget = coefficient_budget(&map.coeffs, &norms);
    let budget_ok = budget <= opts.norm_bound;
    if !budget_ok {
        messages.push(format!("coefficient budget {budget:.4} exceeds K = {}", opts.norm_bound));
    }

    let baseline_volume = base.total_volume();
    let vol = volume(map, base);
    let volume_deviation = (vol - baseline_volume).abs() / baseline_volume;
    let volume_ok = volume_deviation <= opts.vol_tol;
    if !volume_ok {
        messages.push(format!("volume deviation {volume_deviation:.3e} exceeds {}", opts.vol_tol));
    }

    AdmissibilityReport {
        min_det,
        map_norm,
        inverse_norm,
        budget,
        volume: vol,
        baseline_volume,
        volume_deviation,
        det_ok,
        norm_ok,
        budget_ok,
        volume_ok,
        passed: det_ok && norm_ok && budget_ok && volume_ok,
        messages,
    }
}

/// A nodal field whose Hölder seminorm can be estimated.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

/// Estimate of `max |D^β f(x) − D^β f(y)| / |x − y|^α` over `|β| = order`.
///
/// Order 0 uses nodal values, order 1 the recovered nodal gradient, order 2
/// the recovered gradient of the recovered gradient. Pairs are every mesh
/// edge plus `sample_pairs` random node pairs drawn from a ChaCha8 stream
/// seeded by `seed`.
pub fn holder_seminorm_estimate(field: FieldRef<'_>, order: usize, alpha: f64, sample_pairs: usize, seed: u64) -> Result<f64> {
    if order > 2 {
        return Err(validation(format!(
            "derivatives of order {order} are not recoverable from P1 fields (at most 2)"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(validation("Hölder exponent must lie in (0, 1]"));
    }
    let (mesh, components): (&Mesh, Vec<Vec<f64>>) = match field {
        FieldRef::Scalar(f) => (&f.mesh, vec![f.values.clone()]),
        FieldRef::Vector(f) => (&f.mesh, (0..f.dim()).map(|i| f.component(i)).collect()),
    };
    let dim = mesh.dim;
    let mut data = components;
    for _ in 0..order {
        let mut next = Vec::with_capacity(data.len() * dim);
        for comp in &data {
            let g = recover_nodal_gradient(mesh, comp);
            for a in 0..dim {
                next.push(g.iter().map(|v| v[a]).collect());
            }
        }
        data = next;
    }

    let n = mesh.num_nodes();
    let mut pairs = mesh.edges();
    if n >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..sample_pairs {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    let mut best = 0.0f64;
    for (i, j) in pairs {
        let r = super::mesh::dist(&mesh.nodes[i], &mesh.nodes[j]);
        if r == 0.0 {
            continue;
        }
        let denom = r.powf(alpha);
        for comp in &data {
            best = best.max((comp[i] - comp[j]).abs() / denom);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::deform::{fourier_bump_basis, LinearField};
    use crate::geometry::design::build_baseline;
    use std::sync::Arc;

    fn setup() -> (BaselineDesign, Mesh, Arc<Vec<Arc<dyn BasisField>>>) {
        let d = BaselineDesign::annulus(1.0, 0.3, 1.5);
        let m = build_baseline(&d, 0.15).unwrap();
        let b = Arc::new(fourier_bump_basis(&d, 4));
        (d, m, b)
    }

    fn coarse() -> AdmissibilityOptions {
        AdmissibilityOptions {
            radial_samples: 8,
            angular_samples: 16,
            ..Default::default()
        }
    }

    #[test]
    fn finite_differences_of_polynomials() {
        let f = |x: &Point| [x[0].powi(4), x[0] * x[0] * x[1] * x[1]];
        let x = [0.3, -0.7, 0.0];
        let d1 = derivatives_of_order(&f, &x, 1);
        assert!((d1[0][0] - 4.0 * 0.027).abs() < 1e-8);
        let d4 = derivatives_of_order(&f, &x, 4);
        // order (4,0), (3,1), (2,2), (1,3), (0,4)
        assert!((d4[0][0] - 24.0).abs() < 1e-4);
        assert!((d4[2][1] - 4.0).abs() < 1e-4);
        assert!(d4[4][1].abs() < 1e-4);
    }

    #[test]
    fn identity_passes_with_identity_norms() {
        let (d, m, b) = setup();
        let map = DeformationMap::identity(b);
        let r = check_admissible(&map, &m, &d, &coarse(), None);
        assert!(r.passed, "{:?}", r.messages);
        assert_eq!(r.volume_deviation, 0.0);
        assert_eq!(r.budget, 0.0);
        assert!((r.min_det - 1.0).abs() < 1e-15);
        let s = &r.map_norm.derivative_sups;
        assert!((s[1] - 1.0).abs() < 1e-6);
        assert!(s[2..].iter().all(|v| v.abs() < 1e-3), "{s:?}");
        assert!(s[0] <= 1.5 + 1e-12);
        let inv = r.inverse_norm.unwrap();
        assert!((inv.derivative_sups[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn large_coefficients_break_the_bound() {
        let (d, m, b) = setup();
        let opts = coarse();
        let norms = basis_norms(&b, &d, &opts);
        let mut coeffs = vec![0.0; 8];
        coeffs[2] = 1.0;
        let mut t = 1e-3;
        let mut flagged = false;
        while t < 10.0 {
            coeffs[2] = t;
            let map = DeformationMap::new(coeffs.clone(), b.clone()).unwrap();
            let r = check_admissible(&map, &m, &d, &opts, Some(&norms));
            if !r.budget_ok || !r.norm_ok {
                flagged = true;
                assert!(!r.passed);
                break;
            }
            t *= 2.0;
        }
        assert!(flagged);
    }

    #[test]
    fn inflation_fails_volume_check() {
        let (d, m, _) = setup();
        let b: Arc<Vec<Arc<dyn BasisField>>> = Arc::new(vec![Arc::new(LinearField {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
        })]);
        let map = DeformationMap::new(vec![0.01], b).unwrap();
        let r = check_admissible(&map, &m, &d, &coarse(), None);
        assert!(!r.volume_ok && !r.passed);
        assert!((r.volume_deviation - (1.01f64.powi(2) - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn holder_estimates() {
        let (_, m, _) = setup();
        let m = Arc::new(m);
        let c = ScalarField::constant(m.clone(), 3.0);
        assert!(holder_seminorm_estimate(FieldRef::Scalar(&c), 1, 0.5, 100, 1).unwrap() < 1e-10);
        let x = ScalarField::from_fn(m.clone(), |p| p[0]);
        let h = holder_seminorm_estimate(FieldRef::Scalar(&x), 0, 1.0, 500, 1).unwrap();
        assert!(h <= 1.0 + 1e-12 && h > 0.9);
        assert!(holder_seminorm_estimate(FieldRef::Scalar(&x), 3, 0.5, 10, 1).is_err());
        let a = holder_seminorm_estimate(FieldRef::Scalar(&x), 0, 1.0, 200, 7).unwrap();
        let b = holder_seminorm_estimate(FieldRef::Scalar(&x), 0, 1.0, 200, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn square_root_singularity() {
        // |x − x0|^{1/2} is 1/2-Hölder but not 0.9-Hölder
        let d = BaselineDesign::annulus(1.0, 0.2, 1.5);
        let x0 = [0.6, 0.0, 0.0];
        let est = |h: f64, alpha: f64| {
            let m = Arc::new(build_baseline(&d, h).unwrap());
            let f = ScalarField::from_fn(m, |p| super::super::mesh::dist(p, &x0).sqrt());
            holder_seminorm_estimate(FieldRef::Scalar(&f), 0, alpha, 0, 0).unwrap()
        };
        let (a1, a2) = (est(0.1, 0.5), est(0.025, 0.5));
        assert!(a1 <= 1.0 + 1e-9 && a2 <= 1.0 + 1e-9);
        let (b1, b2) = (est(0.1, 0.9), est(0.025, 0.9));
        assert!(b2 > 1.3 * b1, "{b1} {b2}");
    }
}

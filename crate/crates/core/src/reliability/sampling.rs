//! Sampling the crack-initiation Poisson point process.
//!
//! With a local Weibull intensity the process factors into a Poisson count
//! with mean `t_max^m J`, locations drawn with density proportional to
//! `(1/N_sur)^m` on the boundary, and i.i.d. times with density
//! `m t^{m−1} / t_max^m` on `[0, t_max]`.
//!
//! Random numbers come from ChaCha8 seeded with `seed`; replication `i` uses
//! stream `i`, so results do not depend on thread scheduling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReliabilityReport;
use crate::error::{validation, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::mesh::{barycentric_point, Mesh, Point};
use crate::geometry::quadrature::facet_rule;
use crate::material::MaterialParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackEvent {
    pub time: f64,
    pub x: Point,
    pub facet: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackEventSet {
    /// Sorted by time.
    pub events: Vec<CrackEvent>,
    pub t_max: f64,
    /// First failure time, `None` when no crack initiates before `t_max`.
    pub tau: Option<f64>,
}

impl CrackEventSet {
    /// `time,x,y[,z],facet`, one line per event.
    pub fn to_csv(&self, dim: usize) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(if dim == 2 { "time,x,y,facet\n" } else { "time,x,y,z,facet\n" });
        for e in &self.events {
            let _ = write!(out, "{:?},{:?},{:?}", e.time, e.x[0], e.x[1]);
            if dim == 3 {
                let _ = write!(out, ",{:?}", e.x[2]);
            }
            let _ = writeln!(out, ",{}", e.facet);
        }
        out
    }
}

/// Uniform point on the part of facet `f` owned by quadrature point `q`:
/// half of a segment, or the third of a triangle where `q`'s vertex has the
/// largest barycentric coordinate.
fn point_in_quadrature_cell(mesh: &Mesh, f: usize, q: usize, rng: &mut impl Rng) -> Point {
    let pts = mesh.facet_points(f);
    let rule = facet_rule(mesh.dim);
    if mesh.dim == 2 {
        // the rule point nearer vertex 0 owns [0, 1/2]
        let near_first = rule.points[q][0] > 0.5;
        let s: f64 = rng.random::<f64>() * 0.5;
        let t = if near_first { s } else { 1.0 - s };
        return barycentric_point(&pts, &[1.0 - t, t]);
    }
    let owner = (0..3)
        .max_by(|&a, &b| rule.points[q][a].total_cmp(&rule.points[q][b]))
        .unwrap_or(0);
    loop {
        let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
        if a + b > 1.0 {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        let bary = [1.0 - a - b, a, b];
        let best = (0..3).max_by(|&i, &j| bary[i].total_cmp(&bary[j])).unwrap_or(0);
        if best == owner {
            return barycentric_point(&pts, &bary);
        }
    }
}

/// One realisation of the process on `[0, t_max]`.
pub fn sample_from_report(report: &ReliabilityReport, mesh: &Mesh, t_max: f64, rng: &mut impl Rng) -> Result<CrackEventSet> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(validation(format!("t_max must be positive and finite, got {t_max}")));
    }
    let mean = t_max.powf(report.shape) * report.objective;
    if !(mean > 0.0) {
        return Ok(CrackEventSet {
            events: Vec::new(),
            t_max,
            tau: None,
        });
    }
    let count = Poisson::new(mean)
        .map_err(|e| validation(format!("invalid Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let weights: Vec<f64> = report.samples.iter().map(|s| s.contribution).collect();
    let chooser = WeightedIndex::new(&weights).map_err(|e| validation(format!("location weights: {e}")))?;
    let rule_len = facet_rule(mesh.dim).len();
    let index_in_facet = |i: usize| {
        // samples are stored in facet order with `rule_len` points each
        let facet = report.samples[i].facet;
        let first = report.samples.partition_point(|s| s.facet < facet);
        (i - first) % rule_len
    };
    let mut events: Vec<CrackEvent> = (0..count)
        .map(|_| {
            let i = chooser.sample(rng);
            let facet = report.samples[i].facet;
            let x = point_in_quadrature_cell(mesh, facet, index_in_facet(i), rng);
            let u: f64 = rng.random();
            CrackEvent {
                time: t_max * u.powf(1.0 / report.shape),
                x,
                facet,
            }
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let tau = events.first().map(|e| e.time);
    Ok(CrackEventSet { events, t_max, tau })
}

/// Pipeline entry: objective from the fields, then one realisation.
pub fn sample_crack_process(
    u: &VectorField,
    t: &ScalarField,
    p: &MaterialParams,
    opts: &super::ObjectiveOptions,
    t_max: f64,
    seed: u64,
) -> Result<CrackEventSet> {
    let report = super::objective_j(u, t, p, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_from_report(&report, &u.mesh, t_max, &mut rng)
}

/// `n` independent realisations; replication `i` uses stream `i` of the
/// generator seeded with `seed`.
pub fn replicate(report: &ReliabilityReport, mesh: &Mesh, t_max: f64, n: usize, seed: u64) -> Result<Vec<CrackEventSet>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_from_report(report, mesh, t_max, &mut rng)
        })
        .collect()
}

/// Kolmogorov-Smirnov distance on `[0, t_max]` between the empirical
/// distribution of first failure times (censored runs count as surviving
/// past `t_max`) and `cdf`.
pub fn ks_distance(sets: &[CrackEventSet], t_max: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sets.len();
    if n == 0 {
        return 0.0;
    }
    let mut taus: Vec<f64> = sets.iter().filter_map(|s| s.tau).collect();
    taus.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &t) in taus.iter().enumerate() {
        let f = cdf(t);
        d = d.max((i as f64 / nf - f).abs()).max(((i + 1) as f64 / nf - f).abs());
    }
    d.max((taus.len() as f64 / nf - cdf(t_max)).abs())
}

#[cfg(test)]
mod tests {
    use super::super::{failure_cdf, objective_from_lives, ObjectiveOptions};
    use super::*;
    use crate::geometry::design::{build_baseline, BaselineDesign};
    use crate::material::Life;
    use proptest::prelude::*;

    fn setup(m: f64, c: f64) -> (Mesh, ReliabilityReport) {
        let mesh = build_baseline(&BaselineDesign::annulus(1.0, 0.3, 1.5), 0.2).unwrap();
        let r = objective_from_lives(&mesh, m, &ObjectiveOptions::default(), |bp| {
            Ok(Life::Finite(c * (1.5 + bp.x[0])))
        })
        .unwrap();
        (mesh, r)
    }

    #[test]
    fn zero_objective_is_censored() {
        let mesh = build_baseline(&BaselineDesign::annulus(1.0, 0.3, 1.5), 0.3).unwrap();
        let r = objective_from_lives(&mesh, 2.0, &ObjectiveOptions::default(), |_| Ok(Life::Infinite)).unwrap();
        let s = replicate(&r, &mesh, 1e6, 10, 1).unwrap();
        assert!(s.iter().all(|e| e.events.is_empty() && e.tau.is_none()));
    }

    #[test]
    fn events_lie_on_boundary_and_in_horizon() {
        let (mesh, r) = setup(2.0, 100.0);
        let sets = replicate(&r, &mesh, 300.0, 50, 3).unwrap();
        let mut total = 0;
        for s in &sets {
            for e in &s.events {
                total += 1;
                assert!((0.0..=300.0).contains(&e.time));
                let pts = mesh.facet_points(e.facet);
                let (len, n) = mesh.facet_geometry(e.facet);
                let off = (e.x[0] - pts[0][0]) * n[0] + (e.x[1] - pts[0][1]) * n[1];
                assert!(off.abs() < 1e-12);
                let along = ((e.x[0] - pts[0][0]).powi(2) + (e.x[1] - pts[0][1]).powi(2)).sqrt();
                assert!(along <= len + 1e-12);
            }
            assert_eq!(s.tau, s.events.first().map(|e| e.time));
        }
        assert!(total > 0);
    }

    #[test]
    fn replications_are_deterministic() {
        let (mesh, r) = setup(2.0, 100.0);
        let a = replicate(&r, &mesh, 200.0, 64, 9).unwrap();
        let b = replicate(&r, &mesh, 200.0, 64, 9).unwrap();
        assert_eq!(a, b);
        let c = replicate(&r, &mesh, 200.0, 64, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn first_failure_matches_weibull_cdf() {
        let (mesh, r) = setup(2.0, 100.0);
        let n = r.scale.as_f64();
        let t_max = 2.0 * n;
        let sets = replicate(&r, &mesh, t_max, 4000, 5).unwrap();
        let d = ks_distance(&sets, t_max, |t| failure_cdf(t, &r));
        assert!(d < 0.03, "{d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn counts_are_invariant_under_joint_time_scaling(seed in 0u64..1000) {
            // doubling t_max and N (J / 4 for m = 2) keeps every count
            let (mesh, r) = setup(2.0, 50.0);
            let mut scaled = r.clone();
            scaled.objective = r.objective / 4.0;
            for s in &mut scaled.samples {
                s.contribution /= 4.0;
            }
            let a = replicate(&r, &mesh, 80.0, 8, seed).unwrap();
            let b = replicate(&scaled, &mesh, 160.0, 8, seed).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.events.len(), y.events.len());
            }
        }
    }
}

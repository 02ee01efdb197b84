//! Simplicial meshes with tagged boundary facets.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

pub type Point = [f64; 3];

/// Which boundary condition family a facet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    /// Clamped hole boundary (elasticity), Robin for heat.
    Dirichlet,
    /// Outer boundary: traction for elasticity, Robin for heat.
    RobinNeumann,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::RobinNeumann => "robin_neumann",
        }
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(BoundaryTag::Dirichlet),
            "robin_neumann" => Ok(BoundaryTag::RobinNeumann),
            _ => Err(validation(format!("unknown boundary tag `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    /// The single cell owning this facet.
    pub cell: usize,
    pub tag: BoundaryTag,
}

/// A conforming mesh of triangles (d = 2) or tetrahedra (d = 3).
///
/// Points are always stored with three coordinates; the third is zero in 2D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub dim: usize,
    pub nodes: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub facets: Vec<BoundaryFacet>,
}

/// Affine simplex data: signed measure and gradients of the barycentric
/// coordinate functions.
#[derive(Debug, Clone)]
pub struct SimplexGeometry {
    pub measure: f64,
    pub grads: Vec<Point>,
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Geometry of the simplex with vertices `pts` (length `dim + 1`).
pub fn simplex_geometry(pts: &[Point], dim: usize) -> SimplexGeometry {
    if dim == 2 {
        let e1 = sub(&pts[1], &pts[0]);
        let e2 = sub(&pts[2], &pts[0]);
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        // rows of J^{-1}, J = [e1 e2]
        let g1 = [e2[1] / det, -e2[0] / det, 0.0];
        let g2 = [-e1[1] / det, e1[0] / det, 0.0];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1], 0.0];
        SimplexGeometry {
            measure: 0.5 * det,
            grads: vec![g0, g1, g2],
        }
    } else {
        let e1 = sub(&pts[1], &pts[0]);
        let e2 = sub(&pts[2], &pts[0]);
        let e3 = sub(&pts[3], &pts[0]);
        let c23 = cross(&e2, &e3);
        let det = dot(&e1, &c23);
        let g1 = c23.map(|v| v / det);
        let g2 = cross(&e3, &e1).map(|v| v / det);
        let g3 = cross(&e1, &e2).map(|v| v / det);
        let g0 = [
            -g1[0] - g2[0] - g3[0],
            -g1[1] - g2[1] - g3[1],
            -g1[2] - g2[2] - g3[2],
        ];
        SimplexGeometry {
            measure: det / 6.0,
            grads: vec![g0, g1, g2, g3],
        }
    }
}

/// Measure and unit normal of a facet; the normal is oriented away from
/// `opposite` (a vertex of the owning cell not on the facet).
pub fn facet_measure_normal(pts: &[Point], opposite: &Point, dim: usize) -> (f64, Point) {
    let (measure, mut n) = if dim == 2 {
        let t = sub(&pts[1], &pts[0]);
        let len = norm(&t);
        (len, [t[1] / len, -t[0] / len, 0.0])
    } else {
        let c = cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]));
        let a = norm(&c);
        (0.5 * a, c.map(|v| v / a))
    };
    if dot(&n, &sub(opposite, &pts[0])) > 0.0 {
        n = n.map(|v| -v);
    }
    (measure, n)
}

/// Interpolates a point from barycentric coordinates.
pub fn barycentric_point(pts: &[Point], bary: &[f64]) -> Point {
    let mut x = [0.0; 3];
    for (p, &b) in pts.iter().zip(bary) {
        for k in 0..3 {
            x[k] += b * p[k];
        }
    }
    x
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn cell_geometry(&self, c: usize) -> SimplexGeometry {
        simplex_geometry(&self.cell_points(c), self.dim)
    }

    pub fn facet_points(&self, f: usize) -> Vec<Point> {
        self.facets[f].nodes.iter().map(|&i| self.nodes[i]).collect()
    }

    /// Measure and outward unit normal of boundary facet `f`.
    pub fn facet_geometry(&self, f: usize) -> (f64, Point) {
        let facet = &self.facets[f];
        let opposite = self.cells[facet.cell]
            .iter()
            .find(|n| !facet.nodes.contains(n))
            .copied()
            .expect("facet owner has a vertex off the facet");
        facet_measure_normal(&self.facet_points(f), &self.nodes[opposite], self.dim)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_geometry(c).measure).sum()
    }

    pub fn boundary_measure(&self, tag: Option<BoundaryTag>) -> f64 {
        (0..self.facets.len())
            .filter(|&f| tag.is_none_or(|t| self.facets[f].tag == t))
            .map(|f| self.facet_geometry(f).0)
            .sum()
    }

    pub fn max_cell_diameter(&self) -> f64 {
        let mut hmax = 0.0f64;
        for cell in &self.cells {
            for (a, &i) in cell.iter().enumerate() {
                for &j in &cell[a + 1..] {
                    hmax = hmax.max(dist(&self.nodes[i], &self.nodes[j]));
                }
            }
        }
        hmax
    }

    /// Nodes lying on a facet with the given tag, sorted and deduplicated.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Undirected edges of the mesh, each once with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for cell in &self.cells {
            for (a, &i) in cell.iter().enumerate() {
                for &j in &cell[a + 1..] {
                    e.push((i.min(j), i.max(j)));
                }
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Faces of every cell, keyed by sorted node list, with owning cells.
    fn face_owners(&self) -> HashMap<Vec<usize>, Vec<usize>> {
        let mut map: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for skip in 0..cell.len() {
                let mut face: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .map(|(_, &n)| n)
                    .collect();
                face.sort_unstable();
                map.entry(face).or_default().push(c);
            }
        }
        map
    }

    /// Rebuilds the boundary facet list from cell connectivity. `tag_of`
    /// decides the tag of each boundary face. Facets come out sorted by
    /// their node lists so the result is deterministic.
    pub fn rebuild_boundary(&mut self, tag_of: impl Fn(&[usize]) -> BoundaryTag) {
        let mut facets: Vec<BoundaryFacet> = self
            .face_owners()
            .into_iter()
            .filter(|(_, owners)| owners.len() == 1)
            .map(|(nodes, owners)| {
                let tag = tag_of(&nodes);
                BoundaryFacet {
                    nodes,
                    cell: owners[0],
                    tag,
                }
            })
            .collect();
        facets.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        self.facets = facets;
    }

    /// Checks the structural invariants: positive cell measures, conforming
    /// connectivity, a boundary facet list that matches the single-owner
    /// faces, and positive measure for both boundary parts.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(validation(format!("mesh dimension must be 2 or 3, got {}", self.dim)));
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.len() != self.dim + 1 {
                return Err(validation(format!("cell {c} has {} vertices", cell.len())));
            }
            if cell.iter().any(|&n| n >= self.nodes.len()) {
                return Err(validation(format!("cell {c} references a missing node")));
            }
            let m = self.cell_geometry(c).measure;
            if !(m > 0.0) {
                return Err(validation(format!("cell {c} has non-positive measure {m}")));
            }
        }
        let owners = self.face_owners();
        let mut boundary: HashMap<Vec<usize>, usize> = HashMap::new();
        for (face, cells) in &owners {
            match cells.len() {
                1 => {
                    boundary.insert(face.clone(), cells[0]);
                }
                2 => {}
                k => return Err(validation(format!("face {face:?} shared by {k} cells"))),
            }
        }
        if boundary.len() != self.facets.len() {
            return Err(validation(format!(
                "{} boundary faces but {} tagged facets",
                boundary.len(),
                self.facets.len()
            )));
        }
        for (f, facet) in self.facets.iter().enumerate() {
            let mut key = facet.nodes.clone();
            key.sort_unstable();
            match boundary.get(&key) {
                Some(&c) if c == facet.cell => {}
                _ => return Err(validation(format!("facet {f} is not a boundary face of cell {}", facet.cell))),
            }
        }
        for tag in [BoundaryTag::Dirichlet, BoundaryTag::RobinNeumann] {
            if !(self.boundary_measure(Some(tag)) > 0.0) {
                return Err(validation(format!("boundary part `{}` is empty", tag.as_str())));
            }
        }
        Ok(())
    }

    /// Same connectivity and tags, new coordinates.
    pub fn with_nodes(&self, nodes: Vec<Point>) -> Mesh {
        assert_eq!(nodes.len(), self.nodes.len());
        Mesh {
            dim: self.dim,
            nodes,
            cells: self.cells.clone(),
            facets: self.facets.clone(),
        }
    }

    /// Plain-text export. See `docs/FORMATS.md`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = self.dim;
        writeln!(s, "# thermofatigue mesh v1").unwrap();
        writeln!(s, "dimension {d}").unwrap();
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for (i, p) in self.nodes.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for v in &p[..d] {
                write!(s, " {v:?}").unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "cells {}", self.cells.len()).unwrap();
        for (i, c) in self.cells.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for n in c {
                write!(s, " {n}").unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "facets {}", self.facets.len()).unwrap();
        for (i, f) in self.facets.iter().enumerate() {
            write!(s, "{i} {} {}", f.tag.as_str(), f.cell).unwrap();
            for n in &f.nodes {
                write!(s, " {n}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| validation(format!("mesh text ended while reading {what}")))
        };
        fn parse<T: FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| validation(format!("mesh text line {line}: malformed field")))
        }
        fn header(line: (usize, &str), key: &str) -> Result<usize> {
            let mut it = line.1.split_whitespace();
            if it.next() != Some(key) {
                return Err(validation(format!("mesh text line {}: expected `{key}`", line.0)));
            }
            parse(it.next(), line.0)
        }
        let dim = header(next("dimension")?, "dimension")?;
        if dim != 2 && dim != 3 {
            return Err(validation(format!("unsupported mesh dimension {dim}")));
        }
        let n_nodes = header(next("nodes")?, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = next("nodes")?;
            let mut it = l.split_whitespace();
            let _id: usize = parse(it.next(), ln)?;
            let mut p = [0.0; 3];
            for v in p.iter_mut().take(dim) {
                *v = parse(it.next(), ln)?;
            }
            nodes.push(p);
        }
        let n_cells = header(next("cells")?, "cells")?;
        let mut cells = Vec::with_capacity(n_cells);
        for _ in 0..n_cells {
            let (ln, l) = next("cells")?;
            let mut it = l.split_whitespace();
            let _id: usize = parse(it.next(), ln)?;
            let c = (0..=dim).map(|_| parse(it.next(), ln)).collect::<Result<Vec<usize>>>()?;
            cells.push(c);
        }
        let n_facets = header(next("facets")?, "facets")?;
        let mut facets = Vec::with_capacity(n_facets);
        for _ in 0..n_facets {
            let (ln, l) = next("facets")?;
            let mut it = l.split_whitespace();
            let _id: usize = parse(it.next(), ln)?;
            let tag: BoundaryTag = it
                .next()
                .ok_or_else(|| validation(format!("mesh text line {ln}: missing tag")))?
                .parse()?;
            let cell = parse(it.next(), ln)?;
            let fnodes = (0..dim).map(|_| parse(it.next(), ln)).collect::<Result<Vec<usize>>>()?;
            facets.push(BoundaryFacet {
                nodes: fnodes,
                cell,
                tag,
            });
        }
        Ok(Mesh {
            dim,
            nodes,
            cells,
            facets,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Mesh> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        let mut m = Mesh {
            dim: 2,
            nodes: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            cells: vec![vec![0, 1, 2], vec![0, 2, 3]],
            facets: vec![],
        };
        m.rebuild_boundary(|nodes| {
            if nodes == [0, 1] {
                BoundaryTag::Dirichlet
            } else {
                BoundaryTag::RobinNeumann
            }
        });
        m
    }

    #[test]
    fn barycentric_gradients_reproduce_affine() {
        let pts = [[0.1, 0.2, 0.0], [1.3, 0.1, 0.0], [0.4, 0.9, 0.0]];
        let g = simplex_geometry(&pts, 2);
        // f = 2x - 3y sampled at the vertices
        let f: Vec<f64> = pts.iter().map(|p| 2.0 * p[0] - 3.0 * p[1]).collect();
        let gx: f64 = (0..3).map(|i| f[i] * g.grads[i][0]).sum();
        let gy: f64 = (0..3).map(|i| f[i] * g.grads[i][1]).sum();
        assert!((gx - 2.0).abs() < 1e-13 && (gy + 3.0).abs() < 1e-13);

        let pts3 = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.0, 0.1], [0.1, 0.3, 1.2]];
        let g3 = simplex_geometry(&pts3, 3);
        assert!(g3.measure > 0.0);
        let f: Vec<f64> = pts3.iter().map(|p| p[0] - 2.0 * p[1] + 0.5 * p[2]).collect();
        for (k, want) in [1.0, -2.0, 0.5].iter().enumerate() {
            let got: f64 = (0..4).map(|i| f[i] * g3.grads[i][k]).sum();
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn square_mesh_invariants() {
        let m = unit_square();
        m.validate().unwrap();
        assert_eq!(m.facets.len(), 4);
        assert!((m.total_volume() - 1.0).abs() < 1e-15);
        assert!((m.boundary_measure(None) - 4.0).abs() < 1e-15);
        for f in 0..m.facets.len() {
            let (_, n) = m.facet_geometry(f);
            let mid = barycentric_point(&m.facet_points(f), &[0.5, 0.5]);
            // outward: pointing away from the square centre
            assert!(dot(&n, &sub(&mid, &[0.5, 0.5, 0.0])) > 0.0);
        }
    }

    #[test]
    fn validate_catches_inverted_cell() {
        let mut m = unit_square();
        m.cells[0].swap(1, 2);
        assert!(m.validate().is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut m = unit_square();
        m.nodes[2] = [1.0 / 3.0 + 0.9, std::f64::consts::PI, 0.0];
        m.nodes[3] = [1e-300, 0.1 + 0.2, 0.0];
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let back = Mesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn text_errors() {
        assert!(Mesh::from_text("dimension 4\n").is_err());
        assert!(Mesh::from_text("dimension 2\nnodes 1\n0 1.0\n").is_err());
        assert!(Mesh::from_text("dimension 2\nnodes 0\ncells 0\nfacets 1\n0 bogus 0 1 2\n").is_err());
    }
}

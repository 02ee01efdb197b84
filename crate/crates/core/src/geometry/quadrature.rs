//! Quadrature rules on reference simplices in barycentric coordinates.
//!
//! Weights are normalized to sum to one; multiply by the simplex measure.

/// A rule: barycentric points (length `dim + 1`) and normalized weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }
}

/// Two-point Gauss-Legendre on a segment (exact for cubics).
pub fn segment_gauss2() -> Rule {
    let a = 0.5 - 0.5 / 3f64.sqrt();
    Rule {
        points: vec![vec![1.0 - a, a], vec![a, 1.0 - a]],
        weights: vec![0.5, 0.5],
    }
}

/// `n`-point Gauss-Legendre on a segment.
pub fn segment_gauss(n: usize) -> Rule {
    let (nodes, weights) = gauss_legendre(n);
    Rule {
        points: nodes.iter().map(|&x| {
            let t = 0.5 * (x + 1.0);
            vec![1.0 - t, t]
        }).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
    }
}

/// Nodes and weights on [-1, 1] by Newton iteration on Legendre polynomials.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Three-point degree-2 rule on a triangle.
pub fn triangle_deg2() -> Rule {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    Rule {
        points: vec![vec![a, b, b], vec![b, a, b], vec![b, b, a]],
        weights: vec![1.0 / 3.0; 3],
    }
}

/// Seven-point degree-5 rule on a triangle.
pub fn triangle_deg5() -> Rule {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    Rule {
        points: vec![
            vec![third, third, third],
            vec![b1, a1, a1],
            vec![a1, b1, a1],
            vec![a1, a1, b1],
            vec![b2, a2, a2],
            vec![a2, b2, a2],
            vec![a2, a2, b2],
        ],
        weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
    }
}

/// Four-point degree-2 rule on a tetrahedron.
pub fn tetra_deg2() -> Rule {
    let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
    let b = (5.0 - 5f64.sqrt()) / 20.0;
    Rule {
        points: vec![
            vec![a, b, b, b],
            vec![b, a, b, b],
            vec![b, b, a, b],
            vec![b, b, b, a],
        ],
        weights: vec![0.25; 4],
    }
}

/// Fourteen-point degree-5 rule on a tetrahedron, all weights positive.
pub fn tetra_deg5() -> Rule {
    let a1 = 0.0927352503108912;
    let w1 = 0.01224884051939366 * 6.0;
    let a2 = 0.3108859192633006;
    let w2 = 0.01878132095300264 * 6.0;
    let c = 0.4544962958743504;
    let w3 = 0.007091003462846911 * 6.0;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 3.0 * a;
        for k in 0..4 {
            let mut p = vec![a; 4];
            p[k] = b;
            points.push(p);
            weights.push(w);
        }
    }
    let d = 0.5 - c;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut p = vec![d; 4];
        p[i] = c;
        p[j] = c;
        points.push(p);
        weights.push(w3);
    }
    Rule { points, weights }
}

/// Default cell rule for the stated dimension (degree 2).
pub fn cell_rule(dim: usize) -> Rule {
    if dim == 2 {
        triangle_deg2()
    } else {
        tetra_deg2()
    }
}

/// High-order cell rule used for volume integrals of smooth maps.
pub fn cell_rule_high(dim: usize) -> Rule {
    if dim == 2 {
        triangle_deg5()
    } else {
        tetra_deg5()
    }
}

/// Boundary facet rule: two-point Gauss on segments, degree 2 on triangles.
pub fn facet_rule(dim: usize) -> Rule {
    if dim == 2 {
        segment_gauss2()
    } else {
        triangle_deg2()
    }
}

//! Nelder-Mead simplex search with resumable state.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex.
    pub step: f64,
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            step: 0.1,
            max_evals: 1000,
            f_tol: 1e-12,
            x_tol: 1e-8,
        }
    }
}

/// Simplex state between iterations; serializable for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    pub simplex: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub evals: usize,
    pub iterations: usize,
}

/// Evaluates a batch of points; results must be in input order.
pub type BatchEval<'a> = dyn FnMut(&[Vec<f64>]) -> Vec<f64> + 'a;

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

impl NelderMead {
    /// Axis-aligned initial simplex around `x0`; `f0` is the known value
    /// at `x0`.
    pub fn start(x0: &[f64], f0: f64, step: f64, eval: &mut BatchEval<'_>) -> Self {
        let n = x0.len();
        let vertices: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = x0.to_vec();
                v[i] += step;
                v
            })
            .collect();
        let fv = eval(&vertices);
        let mut simplex = vec![x0.to_vec()];
        simplex.extend(vertices);
        let mut values = vec![f0];
        values.extend(fv);
        let mut nm = NelderMead {
            simplex,
            values,
            evals: n,
            iterations: 0,
        };
        nm.sort();
        nm
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        // stable: ties keep the older vertex first
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.simplex = idx.iter().map(|&i| self.simplex[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.simplex[0], self.values[0])
    }

    pub fn diameter(&self) -> f64 {
        let b = &self.simplex[0];
        self.simplex[1..]
            .iter()
            .map(|v| v.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn converged(&self, opts: &NelderMeadOptions) -> bool {
        let spread = self.values[self.values.len() - 1] - self.values[0];
        self.simplex.len() < 2 || spread.abs() <= opts.f_tol || self.diameter() <= opts.x_tol
    }

    /// One reflection/expansion/contraction/shrink iteration.
    pub fn iterate(&mut self, eval: &mut BatchEval<'_>) {
        let n = self.simplex.len() - 1;
        if n == 0 {
            return;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| self.simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = self.simplex[n].clone();
        let (f_best, f_second, f_worst) = (self.values[0], self.values[n - 1], self.values[n]);

        let xr = lerp(&centroid, &worst, -1.0);
        let fr = self.eval_one(&xr, eval);
        if fr < f_best {
            let xe = lerp(&centroid, &worst, -2.0);
            let fe = self.eval_one(&xe, eval);
            if fe < fr {
                self.replace_worst(xe, fe);
            } else {
                self.replace_worst(xr, fr);
            }
        } else if fr < f_second {
            self.replace_worst(xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = lerp(&centroid, &xr, 0.5);
                let fc = self.eval_one(&xc, eval);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst, 0.5);
                let fc = self.eval_one(&xc, eval);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                self.replace_worst(xc, fc);
            } else {
                let best = self.simplex[0].clone();
                let shrunk: Vec<Vec<f64>> = self.simplex[1..].iter().map(|v| lerp(&best, v, 0.5)).collect();
                let fs = eval(&shrunk);
                self.evals += shrunk.len();
                for (i, (x, f)) in shrunk.into_iter().zip(fs).enumerate() {
                    self.simplex[i + 1] = x;
                    self.values[i + 1] = f;
                }
            }
        }
        self.iterations += 1;
        self.sort();
    }

    fn eval_one(&mut self, x: &[f64], eval: &mut BatchEval<'_>) -> f64 {
        self.evals += 1;
        eval(&[x.to_vec()])[0]
    }

    fn replace_worst(&mut self, x: Vec<f64>, f: f64) {
        let n = self.simplex.len() - 1;
        self.simplex[n] = x;
        self.values[n] = f;
    }
}

/// Minimizes `f` from `x0`; returns the final simplex state.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMead {
    let mut batch = |pts: &[Vec<f64>]| pts.iter().map(|p| f(p)).collect::<Vec<f64>>();
    let f0 = batch(&[x0.to_vec()])[0];
    let mut nm = NelderMead::start(x0, f0, opts.step, &mut batch);
    nm.evals += 1;
    while nm.evals < opts.max_evals && !nm.converged(opts) {
        nm.iterate(&mut batch);
    }
    nm
}

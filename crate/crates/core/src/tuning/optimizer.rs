//! Box-constrained quasi-Newton SQP on a black-box objective.
//!
//! Each iteration builds a quadratic model from a central finite-difference
//! gradient and a damped BFGS Hessian, minimises it exactly over the box and
//! takes a projected Armijo step along the result. The variables are scaled
//! to the unit box so one step size serves every parameter.

use std::cell::Cell;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpOptions {
    /// Number of starting points; the first is the supplied initial guess.
    pub starts: usize,
    /// Finite-difference step as a fraction of each box width.
    pub fd_step: f64,
    pub max_iter: usize,
    /// Stop once the projected gradient, in unit-box coordinates, is this small.
    pub grad_tol: f64,
    /// Stop once a step moves less than this in unit-box coordinates.
    pub step_tol: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            fd_step: 0.01,
            max_iter: 40,
            grad_tol: 1e-6,
            step_tol: 1e-7,
        }
    }
}

/// Closed interval of one decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Every evaluation from this start failed.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub cost: f64,
    pub starts: Vec<StartTrace>,
}

/// Minimise `f` over the box. `f` returns `None` for a failed evaluation,
/// which is charged `penalty`. The first start is `x0`; the rest are drawn
/// uniformly from the box with `seed`.
pub fn minimize_box<F>(
    f: F,
    bounds: &[Interval],
    x0: &[f64],
    penalty: f64,
    opts: &SqpOptions,
    seed: u64,
) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let n = bounds.len();
    if n == 0 || x0.len() != n {
        return Err(Error::config("bounds", "dimension mismatch with the initial point"));
    }
    for (k, b) in bounds.iter().enumerate() {
        if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
            return Err(Error::config(format!("bounds[{k}]"), "needs finite lo < hi"));
        }
    }
    if !(opts.fd_step > 0.0 && opts.fd_step < 0.5) {
        return Err(Error::config("sqp.fd_step", "must lie in (0, 0.5)"));
    }
    let opts = SqpOptions {
        starts: opts.starts.max(1),
        ..opts.clone()
    };
    let to_unit = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(bounds)
            .map(|(v, b)| ((v - b.lo) / b.width()).clamp(0.0, 1.0))
            .collect()
    };
    let from_unit = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(v, b)| (b.lo + v * b.width()).clamp(b.lo, b.hi))
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![to_unit(x0)];
    while starts.len() < opts.starts {
        starts.push((0..n).map(|_| rng.gen_range(0.0..=1.0)).collect());
    }

    let g = |u: &[f64]| -> (f64, bool) {
        match f(&from_unit(u)) {
            Some(v) if v.is_finite() => (v, true),
            _ => (penalty, false),
        }
    };
    let traces: Vec<StartTrace> = starts
        .par_iter()
        .map(|u0| {
            let run = descend(&g, u0, &opts);
            StartTrace {
                start: from_unit(u0),
                end: from_unit(&run.u),
                cost: run.cost,
                iterations: run.iterations,
                evaluations: run.evaluations,
                diverged: !run.any_finite,
            }
        })
        .collect();
    if traces.iter().all(|t| t.diverged) {
        return Err(Error::NoFeasibleImprovement);
    }
    let best = traces
        .iter()
        .filter(|t| !t.diverged)
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("at least one feasible start");
    Ok(Minimum {
        x: best.end.clone(),
        cost: best.cost,
        starts: traces.clone(),
    })
}

struct Descent {
    u: Vec<f64>,
    cost: f64,
    iterations: usize,
    evaluations: usize,
    any_finite: bool,
}

fn descend<G>(g: &G, u0: &[f64], opts: &SqpOptions) -> Descent
where
    G: Fn(&[f64]) -> (f64, bool) + Sync,
{
    let n = u0.len();
    let h = opts.fd_step;
    let evaluations = Cell::new(0usize);
    let any_finite = Cell::new(false);
    let eval = |u: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let (v, ok) = g(u);
        any_finite.set(any_finite.get() | ok);
        v
    };
    let gradient = |u: &[f64]| -> Vec<f64> {
        let probes: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n)
            .map(|i| {
                // keep both probes inside the box; the stencil shifts at a face
                let c = u[i].clamp(h, 1.0 - h);
                let mut a = u.to_vec();
                let mut b = u.to_vec();
                a[i] = c + h;
                b[i] = c - h;
                (a, b, 2.0 * h)
            })
            .collect();
        evaluations.set(evaluations.get() + 2 * n);
        probes
            .par_iter()
            .map(|(a, b, span)| (g(a).0 - g(b).0) / span)
            .collect()
    };

    let mut u = u0.to_vec();
    let mut fu = eval(&u);
    let mut grad = gradient(&u);
    let mut hess = identity(n);
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        if projected_gradient_norm(&u, &grad) < opts.grad_tol {
            break;
        }
        let d = box_qp(&hess, &grad, &u);
        let slope: f64 = dot(&grad, &d);
        if slope >= 0.0 || norm(&d) < opts.step_tol {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t * norm(&d) >= opts.step_tol {
            let trial: Vec<f64> = u
                .iter()
                .zip(&d)
                .map(|(x, dx)| (x + t * dx).clamp(0.0, 1.0))
                .collect();
            let ft = eval(&trial);
            if ft <= fu + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            break;
        };
        let g_next = gradient(&next);
        let s: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&grad).map(|(a, b)| a - b).collect();
        bfgs_update(&mut hess, &s, &y);
        let moved = norm(&s);
        u = next;
        fu = f_next;
        grad = g_next;
        if moved < opts.step_tol {
            break;
        }
    }
    Descent {
        u,
        cost: fu,
        iterations,
        evaluations: evaluations.get(),
        any_finite: any_finite.get(),
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Gradient with components pushing out of the box removed.
fn projected_gradient_norm(u: &[f64], g: &[f64]) -> f64 {
    u.iter()
        .zip(g)
        .map(|(&x, &gi)| {
            if (x <= 0.0 && gi > 0.0) || (x >= 1.0 && gi < 0.0) {
                0.0
            } else {
                gi * gi
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// Powell-damped BFGS update, which keeps the matrix positive definite.
fn bfgs_update(b: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let bs = mat_vec(b, s);
    let sbs = dot(s, &bs);
    if sbs <= 1e-300 {
        return;
    }
    let sy = dot(s, y);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r: Vec<f64> = y
        .iter()
        .zip(&bs)
        .map(|(yi, bsi)| theta * yi + (1.0 - theta) * bsi)
        .collect();
    let sr = dot(s, &r);
    if sr <= 1e-300 {
        return;
    }
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            b[i][j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
}

/// Exact minimiser of `g·d + ½ dᵀBd` subject to `0 ≤ u + d ≤ 1`, for a
/// positive definite `B`, by enumerating which variables sit on a face.
fn box_qp(b: &[Vec<f64>], g: &[f64], u: &[f64]) -> Vec<f64> {
    let n = g.len();
    let model = |d: &[f64]| dot(g, d) + 0.5 * dot(d, &mat_vec(b, d));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        // 0 free, 1 on the lower face, 2 on the upper face
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut d = vec![0.0; n];
        for i in 0..n {
            match state[i] {
                1 => d[i] = -u[i],
                2 => d[i] = 1.0 - u[i],
                _ => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m];
            for (r, &i) in free.iter().enumerate() {
                let mut rhs = -g[i];
                for j in 0..n {
                    if state[j] != 0 {
                        rhs -= b[i][j] * d[j];
                    }
                }
                for (cidx, &j) in free.iter().enumerate() {
                    a[r][cidx] = b[i][j];
                }
                a[r][m] = rhs;
            }
            let Some(sol) = solve(a) else { continue };
            for (k, &i) in free.iter().enumerate() {
                d[i] = sol[k];
            }
        }
        let feasible = (0..n).all(|i| {
            let x = u[i] + d[i];
            (-1e-12..=1.0 + 1e-12).contains(&x)
        });
        if !feasible {
            continue;
        }
        let v = model(&d);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, d));
        }
    }
    best.map(|(_, d)| d).unwrap_or_else(|| vec![0.0; n])
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let k = a[r][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(r);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= k * y;
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = a[r][m];
        for c in r + 1..m {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

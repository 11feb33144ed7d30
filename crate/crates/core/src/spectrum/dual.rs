//! Fractional maximization of `(a h + b) / (a lambda + d)` under moment constraints.
//!
//! For a fixed ratio `t` the inner problem `sup_mu h - t lambda` subject to
//! `int phi_k = gamma_k` has the dual `min_q log rho(W_{t,q}) - q . gamma`, where
//! `W_{t,q}` has log-entries `-t ell + q . phi`; the dual is convex and smooth on
//! an irreducible graph and its minimizer's equilibrium measure is the primal
//! optimizer.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

use super::lp::linear_oracle;
use super::model::{EdgeModel, Gibbs};

/// Optimizer statistics for one support component.
#[derive(Clone, Debug)]
pub(crate) struct Optimum {
    pub t: f64,
    pub q: Vec<f64>,
    pub flow: Vec<Vec<f64>>,
    pub entropy: f64,
    pub lyapunov: f64,
    /// `a (h - t lambda + q . (m - gamma)) + b - t d` at the last inner solve.
    pub residual: f64,
    pub dinkelbach_iterations: usize,
    pub newton_iterations: usize,
    pub fallback: bool,
}

/// Affine ratio `(a h + b) / (a lambda + d)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Ratio {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Ratio {
    pub const PLAIN: Ratio = Ratio {
        a: 1.0,
        b: 0.0,
        d: 0.0,
    };

    pub fn eval(&self, h: f64, lambda: f64) -> f64 {
        (self.a * h + self.b) / (self.a * lambda + self.d)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct DualSettings {
    pub gradient_tol: f64,
    pub residual_tol: f64,
    pub max_newton: usize,
    pub max_dinkelbach: usize,
    pub initial_q: Option<Vec<f64>>,
}

struct Inner {
    q: Vec<f64>,
    gibbs: Gibbs,
    dual: f64,
    iterations: usize,
    converged: bool,
}

fn dual_value(g: &Gibbs, q: &[f64], gamma: &[f64]) -> f64 {
    g.log_root - q.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>()
}

fn gradient(g: &Gibbs, gamma: &[f64]) -> Vec<f64> {
    g.moments.iter().zip(gamma).map(|(m, c)| m - c).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Newton step `-(H + mu)^+ g` restricted to directions where `H` is not flat.
///
/// Linearly dependent constraints make the dual constant along some
/// directions; those are dropped rather than followed.
fn damped_step(h: &[Vec<f64>], g: &[f64], mu: f64) -> Option<Vec<f64>> {
    let n = g.len();
    let m = DMatrix::from_fn(n, n, |r, c| h[r][c]);
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
    let cut = 1e-9 * top;
    let grad = DVector::from_column_slice(g);
    let mut x = DVector::zeros(n);
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e > cut {
            let v = eig.eigenvectors.column(i);
            x -= v * (v.dot(&grad) / (e + mu));
        }
    }
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

/// Minimizes the dual in `q` by damped Newton with a finite-difference Hessian.
fn solve_inner(
    model: &EdgeModel,
    t: f64,
    gamma: &[f64],
    q0: &[f64],
    s: &DualSettings,
) -> Result<Inner> {
    let k = gamma.len();
    let mut q = q0.to_vec();
    let mut g = model.gibbs(t, &q)?;
    let mut dual = dual_value(&g, &q, gamma);
    let mut mu = 1e-10;
    let mut iterations = 0;
    while iterations < s.max_newton {
        let grad = gradient(&g, gamma);
        if inf_norm(&grad) <= s.gradient_tol {
            return Ok(Inner {
                q,
                gibbs: g,
                dual,
                iterations,
                converged: true,
            });
        }
        iterations += 1;
        let mut hess = vec![vec![0.0; k]; k];
        for c in 0..k {
            let step = 1e-6;
            let mut qp = q.clone();
            qp[c] += step;
            let gp = model.gibbs(t, &qp)?;
            for r in 0..k {
                hess[r][c] = (gp.moments[r] - g.moments[r]) / step;
            }
        }
        for r in 0..k {
            for c in 0..r {
                let v = 0.5 * (hess[r][c] + hess[c][r]);
                hess[r][c] = v;
                hess[c][r] = v;
            }
        }
        let scale = (0..k)
            .map(|i| hess[i][i].abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        let Some(d) = damped_step(&hess, &grad, mu * scale) else {
            mu *= 100.0;
            continue;
        };
        let slope: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if let Ok(gt) = model.gibbs(t, &trial) {
                let dt = dual_value(&gt, &trial, gamma);
                if dt <= dual + 1e-4 * alpha * slope.min(0.0) + 1e-15 * dual.abs().max(1.0) {
                    q = trial;
                    g = gt;
                    dual = dt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if accepted {
            mu = (mu / 10.0).max(1e-14);
        } else {
            mu *= 100.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    let converged = inf_norm(&gradient(&g, gamma)) <= s.gradient_tol;
    Ok(Inner {
        q,
        gibbs: g,
        dual,
        iterations,
        converged,
    })
}

/// Dinkelbach iteration on an irreducible support component.
pub(crate) fn maximize_ratio(
    model: &EdgeModel,
    gamma: &[f64],
    ratio: Ratio,
    start: Option<&[Vec<f64>]>,
    s: &DualSettings,
) -> Result<Optimum> {
    let mut q = s
        .initial_q
        .clone()
        .unwrap_or_else(|| vec![0.0; gamma.len()]);
    q.resize(gamma.len(), 0.0);
    let mut t = 0.0;
    let mut newton = 0;
    for it in 1..=s.max_dinkelbach {
        let inner = solve_inner(model, t, gamma, &q, s)?;
        newton += inner.iterations;
        if !inner.converged {
            let mut fw = frank_wolfe(model, gamma, ratio, start)?;
            fw.newton_iterations += newton;
            return Ok(fw);
        }
        q = inner.q;
        let g = inner.gibbs;
        let next = ratio.eval(g.entropy, g.lyapunov);
        let residual = ratio.a * inner.dual + ratio.b - t * ratio.d;
        if residual.abs() <= s.residual_tol || (next - t).abs() <= 1e-15 * next.abs().max(1.0) {
            return Ok(Optimum {
                t: next,
                q,
                flow: g.flow,
                entropy: g.entropy,
                lyapunov: g.lyapunov,
                residual,
                dinkelbach_iterations: it,
                newton_iterations: newton,
                fallback: false,
            });
        }
        t = next;
    }
    Err(Error::NoConvergence(
        "Dinkelbach iteration did not settle".into(),
    ))
}

/// Conditional-gradient fallback on edge flows for supports without a smooth dual.
///
/// Maximizes `a (h - t lambda)` over probability flows hitting the targets for
/// a sequence of Dinkelbach ratios; each linear subproblem is an LP.
pub(crate) fn frank_wolfe(
    model: &EdgeModel,
    gamma: &[f64],
    ratio: Ratio,
    start: Option<&[Vec<f64>]>,
) -> Result<Optimum> {
    let mut flow = match start {
        Some(f) => f.to_vec(),
        None => linear_oracle(model, gamma, &zero_like(model))
            .ok_or_else(|| Error::Infeasible("no flow meets the targets".into()))?,
    };
    let mut t = 0.0;
    let mut gap = f64::INFINITY;
    let mut outer = 0;
    for _ in 0..50 {
        outer += 1;
        for _ in 0..300 {
            let grad = flow_gradient(model, &flow, t);
            let Some(vertex) = linear_oracle(model, gamma, &grad) else {
                break;
            };
            gap = grad
                .iter()
                .flatten()
                .zip(vertex.iter().flatten().zip(flow.iter().flatten()))
                .map(|(g, (v, f))| g * (v - f))
                .sum();
            if gap <= 1e-10 {
                break;
            }
            let objective = |s: f64| {
                let mixed = mix(&flow, &vertex, s);
                let (h, l, _) = model.statistics(&mixed);
                h - t * l
            };
            let s = golden_max(objective, 0.0, 1.0, 1e-12);
            flow = mix(&flow, &vertex, s);
        }
        let (h, l, _) = model.statistics(&flow);
        let next = ratio.eval(h, l);
        if (next - t).abs() <= 1e-12 {
            break;
        }
        t = next;
    }
    let (h, l, _) = model.statistics(&flow);
    let value = ratio.eval(h, l);
    Ok(Optimum {
        t: value,
        q: vec![0.0; gamma.len()],
        flow,
        entropy: h,
        lyapunov: l,
        residual: ratio.a * gap.max(0.0),
        dinkelbach_iterations: outer,
        newton_iterations: 0,
        fallback: true,
    })
}

fn zero_like(model: &EdgeModel) -> Vec<Vec<f64>> {
    model.ell.iter().map(|r| vec![0.0; r.len()]).collect()
}

/// Gradient of `h - t lambda` in the edge flow, capped where the flow vanishes.
fn flow_gradient(model: &EdgeModel, flow: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    flow.iter()
        .enumerate()
        .map(|(i, row)| {
            let out: f64 = row.iter().sum();
            row.iter()
                .enumerate()
                .map(|(e, &f)| {
                    let ent = if f > 0.0 && out > 0.0 {
                        -(f / out).ln()
                    } else {
                        50.0
                    };
                    ent.min(50.0) - t * model.ell[i][e]
                })
                .collect()
        })
        .collect()
}

fn mix(a: &[Vec<f64>], b: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(u, v)| (1.0 - s) * u + s * v)
                .collect()
        })
        .collect()
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

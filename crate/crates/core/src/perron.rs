//! Perron root and eigenvectors of irreducible nonnegative matrices.
//!
//! Matrices are stored row-wise with log-weights so that transfer matrices
//! `exp(potential)` never overflow, and eigenvectors are returned as logs
//! because their entries can span hundreds of orders of magnitude on long
//! truncations. Internally the matrix is rebalanced by the diagonal
//! similarity `D^-1 W D` built from the running eigenvector estimate, which
//! keeps the iterate close to the all-ones vector.
//!
//! The root is found by power iteration on the shifted matrix `W + sI`
//! (primitive whenever `W` is irreducible), bracketed by the Collatz-Wielandt
//! bounds `min_i (Wv)_i / v_i <= rho <= max_i (Wv)_i / v_i`. When the bracket
//! has not closed after the power phase on a small matrix, Noda iteration
//! with a dense LU factorisation finishes the job.

use crate::error::{Error, Result};
use crate::shift::FiniteSubshift;

/// Sparse nonnegative matrix, `rows[i]` holds `(j, log W_ij)`.
#[derive(Clone, Debug, Default)]
pub struct LogMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl LogMatrix {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        LogMatrix { rows }
    }

    /// `log W_ij = weight(i, j)` on the edges of `s`.
    pub fn from_subshift(s: &FiniteSubshift, mut weight: impl FnMut(usize, usize) -> f64) -> Self {
        let rows = (0..s.size())
            .map(|i| s.successors(i).iter().map(|&j| (j, weight(i, j))).collect())
            .collect();
        LogMatrix { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn graph(&self) -> Result<FiniteSubshift> {
        let labels = (1..=self.dim()).collect();
        let succ = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&(j, _)| j).collect())
            .collect();
        FiniteSubshift::from_successors(labels, succ)
    }

    pub fn transpose(&self) -> LogMatrix {
        let mut t = vec![Vec::new(); self.dim()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                t[j].push((i, w));
            }
        }
        LogMatrix { rows: t }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PerronOptions {
    /// Relative width of the Collatz-Wielandt bracket at which to stop.
    pub rel_tol: f64,
    pub max_power_iters: usize,
    /// Largest dimension for which the dense refinement runs.
    pub dense_limit: usize,
}

impl Default for PerronOptions {
    fn default() -> Self {
        PerronOptions {
            rel_tol: 1e-14,
            max_power_iters: 20_000,
            dense_limit: 400,
        }
    }
}

/// Perron root with right and left eigenvectors, all as natural logs.
///
/// `log_right` is normalised so that its entries log-sum to zero and
/// `log_left` so that `sum_i exp(log_left_i + log_right_i) = 1`.
#[derive(Clone, Debug)]
pub struct PerronPair {
    pub log_root: f64,
    pub log_right: Vec<f64>,
    pub log_left: Vec<f64>,
    /// Relative width of the final Collatz-Wielandt bracket.
    pub bracket_width: f64,
}

impl PerronPair {
    pub fn right(&self) -> Vec<f64> {
        self.log_right.iter().map(|x| x.exp()).collect()
    }

    pub fn left(&self) -> Vec<f64> {
        self.log_left.iter().map(|x| x.exp()).collect()
    }
}

fn mul(rows: &[Vec<(usize, f64)>], v: &[f64], out: &mut [f64]) {
    for (i, r) in rows.iter().enumerate() {
        out[i] = r.iter().map(|&(j, w)| w * v[j]).sum();
    }
}

fn collatz_wielandt(wv: &[f64], v: &[f64]) -> (f64, f64) {
    wv.iter()
        .zip(v)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| {
            let r = a / b;
            (lo.min(r), hi.max(r))
        })
}

struct Eigen {
    log_root: f64,
    log_vector: Vec<f64>,
    width: f64,
}

/// Weights of `D^-1 W D` with `D = diag(exp(g))`, relative to `exp(offset)`.
fn balanced(m: &LogMatrix, g: &[f64], offset: f64) -> Vec<Vec<(usize, f64)>> {
    m.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|&(j, w)| (j, (w + g[j] - g[i] - offset).exp()))
                .collect()
        })
        .collect()
}

fn balanced_offset(m: &LogMatrix, g: &[f64]) -> f64 {
    m.rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |&(j, w)| w + g[j] - g[i]))
        .fold(f64::NEG_INFINITY, f64::max)
}

const REBALANCE_EVERY: usize = 32;
/// Power iterations spent before handing a matrix to the direct refinement.
const WARMUP_ITERS: usize = 400;
/// Budget in flops for one banded factorisation.
const FACTOR_BUDGET: f64 = 5e8;

/// Largest `i - j` over the edges `i -> j`.
fn lower_bandwidth(m: &LogMatrix) -> usize {
    m.rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |&(j, _)| i.saturating_sub(j)))
        .max()
        .unwrap_or(0)
}

fn upper_bandwidth(m: &LogMatrix) -> usize {
    m.rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |&(j, _)| j.saturating_sub(i)))
        .max()
        .unwrap_or(0)
}

/// Runs [`dominant_in_order`] in whichever of the given and the reversed state
/// order has the narrower lower band.
fn dominant(m: &LogMatrix, opts: &PerronOptions) -> Eigen {
    if upper_bandwidth(m) >= lower_bandwidth(m) {
        return dominant_in_order(m, opts);
    }
    let n = m.dim();
    let rev = LogMatrix::new(
        m.rows
            .iter()
            .rev()
            .map(|r| r.iter().rev().map(|&(j, w)| (n - 1 - j, w)).collect())
            .collect(),
    );
    let mut e = dominant_in_order(&rev, opts);
    e.log_vector.reverse();
    e
}

fn dominant_in_order(m: &LogMatrix, opts: &PerronOptions) -> Eigen {
    let n = m.dim();
    let band = lower_bandwidth(m);
    let direct = n <= opts.dense_limit || (n * n) as f64 * (band + 1) as f64 <= FACTOR_BUDGET;
    let budget = if direct {
        opts.max_power_iters.min(WARMUP_ITERS)
    } else {
        opts.max_power_iters
    };
    let mut g = vec![0.0; n];
    let mut offset = balanced_offset(m, &g);
    let mut rows = balanced(m, &g, offset);
    let mut v = vec![1.0; n];
    let mut wv = vec![0.0; n];
    for it in 0..budget {
        mul(&rows, &v, &mut wv);
        let (lo, hi) = collatz_wielandt(&wv, &v);
        if hi - lo <= opts.rel_tol * hi {
            break;
        }
        // A shift of a quarter of the root breaks periodicity without slowing convergence much.
        let s = 0.25 * wv.iter().sum::<f64>() / v.iter().sum::<f64>();
        let top = wv
            .iter()
            .zip(&v)
            .map(|(a, b)| a + s * b)
            .fold(0.0, f64::max);
        for i in 0..n {
            v[i] = (wv[i] + s * v[i]) / top;
        }
        if (it + 1) % REBALANCE_EVERY == 0 || v.iter().any(|&x| x < 1e-200) {
            for i in 0..n {
                g[i] += v[i].max(1e-300).ln();
                v[i] = 1.0;
            }
            offset = balanced_offset(m, &g);
            rows = balanced(m, &g, offset);
        }
    }
    // The last update may have rebalanced, so recompute the bracket for the current rows.
    mul(&rows, &v, &mut wv);
    let (lo, hi) = collatz_wielandt(&wv, &v);
    let mut width = (hi - lo) / hi;
    let mut root = 0.5 * (lo + hi);
    if width > opts.rel_tol && direct {
        let absorbed = g.iter().zip(&v).map(|(a, b)| a + b.ln()).collect();
        if let Some((r, g_new, w)) = refine(m, absorbed, offset, (lo, hi), band) {
            if w < width {
                root = r;
                g = g_new;
                v.fill(1.0);
                width = w;
            }
        }
    }
    let mut log_vector: Vec<f64> = g.iter().zip(&v).map(|(a, b)| a + b.ln()).collect();
    let norm = crate::thermo::log_sum_exp(&log_vector);
    log_vector.iter_mut().for_each(|x| *x -= norm);
    Eigen {
        log_root: root.ln() + offset,
        log_vector,
        width,
    }
}

/// LU factorisation with partial pivoting of a matrix with lower bandwidth `p`.
///
/// Costs `O(n^2 p)`; row interchanges stay inside the band so the unit lower
/// factor keeps bandwidth `p`.
struct BandLu {
    n: usize,
    p: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(mut a: Vec<f64>, n: usize, p: usize) -> Option<Self> {
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + p).min(n - 1);
            let mut m = k;
            for i in k + 1..=last {
                if a[i * n + k].abs() > a[m * n + k].abs() {
                    m = i;
                }
            }
            piv[k] = m;
            if m != k {
                // Earlier multipliers stay in place; the solve interleaves the swaps.
                for c in k..n {
                    a.swap(k * n + c, m * n + c);
                }
            }
            let d = a[k * n + k];
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            for i in k + 1..=last {
                let l = a[i * n + k] / d;
                a[i * n + k] = l;
                if l != 0.0 {
                    for c in k + 1..n {
                        a[i * n + c] -= l * a[k * n + c];
                    }
                }
            }
        }
        Some(BandLu { n, p, a, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + self.p).min(n - 1) {
                x[i] -= self.a[i * n + k] * xk;
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| self.a[k * n + c] * x[c]).sum();
            x[k] = (x[k] - s) / self.a[k * n + k];
        }
        x
    }
}

/// Safeguarded Noda iteration on `[lo, hi]`.
///
/// For `sigma > rho` the matrix `sigma I - W` is a nonsingular M-matrix, so
/// `y = (sigma I - W)^-1 x` is positive for positive `x` and
/// `sigma - max x_i / y_i <= rho <= sigma - min x_i / y_i`. Conversely a
/// positive `y` forces `sigma > rho`, so a failed positivity test raises the
/// lower end. Shifts follow Noda's rule `sigma = hi`, which converges
/// quadratically near the root, and fall back to bisection whenever a step
/// fails to halve the bracket. Each accepted `y` is absorbed into the
/// balancing `g`, so the right-hand side is always the all-ones vector.
fn refine(
    m: &LogMatrix,
    mut g: Vec<f64>,
    offset: f64,
    bounds: (f64, f64),
    band: usize,
) -> Option<(f64, Vec<f64>, f64)> {
    let n = m.dim();
    let (mut lo, mut hi) = bounds;
    let ones = vec![1.0; n];
    let mut improved = false;
    let mut bisect = false;
    for _ in 0..200 {
        if (hi - lo) / hi <= 1e-14 {
            break;
        }
        let sigma = if bisect {
            0.5 * (lo + hi)
        } else {
            hi * (1.0 + 1e-13)
        };
        let mut a = vec![0.0; n * n];
        for (i, r) in balanced(m, &g, offset).iter().enumerate() {
            for &(j, w) in r {
                a[i * n + j] -= w;
            }
            a[i * n + i] += sigma;
        }
        let Some(lu) = BandLu::factor(a, n, band.min(n - 1)) else {
            lo = lo.max(sigma.min(hi));
            bisect = true;
            continue;
        };
        let y = lu.solve(&ones);
        if y.iter()
            .any(|&v| !(v > f64::MIN_POSITIVE) || !v.is_finite())
        {
            if sigma >= hi {
                // Rounding at the upper end; nothing more to gain.
                break;
            }
            lo = sigma;
            bisect = true;
            continue;
        }
        let (rmin, rmax) = collatz_wielandt(&ones, &y);
        let (new_lo, new_hi) = (lo.max(sigma - rmax), hi.min(sigma - rmin));
        bisect = (new_hi - new_lo) > 0.5 * (hi - lo);
        lo = new_lo;
        hi = new_hi;
        let top = y.iter().copied().fold(0.0, f64::max).ln();
        for (gi, yi) in g.iter_mut().zip(&y) {
            *gi += yi.ln() - top;
        }
        improved = true;
    }
    improved.then(|| (0.5 * (lo + hi), g, (hi - lo) / hi))
}

fn check_irreducible(m: &LogMatrix) -> Result<()> {
    if m.dim() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let g = m.graph()?;
    if !g.is_irreducible() {
        return Err(Error::Reducible {
            closed_class: g.closed_proper_class().unwrap_or_default(),
        });
    }
    Ok(())
}

/// Perron root and both eigenvectors of an irreducible matrix.
pub fn perron(m: &LogMatrix, opts: &PerronOptions) -> Result<PerronPair> {
    check_irreducible(m)?;
    let right = dominant(m, opts);
    let left = dominant(&m.transpose(), opts);
    let mut log_left = left.log_vector;
    let dot: Vec<f64> = log_left
        .iter()
        .zip(&right.log_vector)
        .map(|(a, b)| a + b)
        .collect();
    let norm = crate::thermo::log_sum_exp(&dot);
    log_left.iter_mut().for_each(|x| *x -= norm);
    Ok(PerronPair {
        log_root: right.log_root,
        log_right: right.log_vector,
        log_left,
        bracket_width: right.width.max(left.width),
    })
}

/// Log of the Perron root only.
pub fn log_perron_root(m: &LogMatrix) -> Result<f64> {
    check_irreducible(m)?;
    Ok(dominant(m, &PerronOptions::default()).log_root)
}

/// Log Perron root of the 0/1 adjacency matrix of `s` (its topological entropy).
pub fn log_spectral_radius(s: &FiniteSubshift) -> Result<f64> {
    log_perron_root(&LogMatrix::from_subshift(s, |_, _| 0.0))
}

/// Largest log Perron root over the strongly connected pieces of a possibly reducible matrix.
///
/// Returns `-inf` when the graph has no cycle.
pub fn log_spectral_radius_any(m: &LogMatrix) -> Result<f64> {
    if m.dim() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let g = m.graph()?;
    let mut best = f64::NEG_INFINITY;
    for comp in g.strong_components() {
        let mut local = vec![usize::MAX; m.dim()];
        for (k, &i) in comp.iter().enumerate() {
            local[i] = k;
        }
        let rows: Vec<Vec<(usize, f64)>> = comp
            .iter()
            .map(|&i| {
                m.rows[i]
                    .iter()
                    .filter(|&&(j, _)| local[j] != usize::MAX)
                    .map(|&(j, w)| (local[j], w))
                    .collect()
            })
            .collect();
        if rows.iter().all(|r| r.is_empty()) {
            continue;
        }
        best = best.max(log_perron_root(&LogMatrix::new(rows))?);
    }
    Ok(best)
}

//! Expanding interval maps with countably many (or finitely many) branches.
//!
//! Four families are built in: the base-`N` map `x -> Nx mod 1`, the Gauss map
//! `x -> 1/x mod 1`, the piecewise-linear map `F_lambda` with branches on
//! `I_n = (lambda^n, lambda^(n-1)]`, and user-supplied piecewise-linear Markov
//! maps with finitely many branches.
//!
//! All logarithms are natural. "Log-derivative" always means `log|T'|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::shift::{truncate, FiniteSubshift, Symbol, TransitionRule, Word};

/// One branch of a piecewise-linear user map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub interval: [f64; 2],
    /// Signed slope; negative slopes reverse orientation.
    pub slope: f64,
    pub image: [f64; 2],
}

/// Map family tag, also the JSON shape of a map in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapFamily {
    BaseN { n: usize },
    Gauss,
    FLambda { lambda: f64 },
    PiecewiseLinear { branches: Vec<BranchSpec> },
}

/// Behaviour of the log-derivative along high branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRegime {
    /// Finitely many branches: nothing escapes.
    Finite,
    /// `inf |T'|` on `I_i` tends to infinity (Gauss type).
    UnboundedDerivative,
    /// `log|T'| - L` vanishes at infinity for a finite `L` (`F_lambda` type).
    BoundedDerivative,
}

/// Geometric data of a branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub index: Symbol,
    /// `(left, right)` endpoints.
    pub interval: (f64, f64),
    pub increasing: bool,
    /// Constant `|T'|` for linear branches.
    pub slope: Option<f64>,
    /// `T(I_i)`.
    pub image: (f64, f64),
}

impl Branch {
    pub fn image_diameter(&self) -> f64 {
        self.image.1 - self.image.0
    }
}

/// Inf/sup of log-derivatives over a cylinder and a diameter bracket.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderGeometry {
    pub word: Word,
    /// Inf and sup of the Birkhoff sum `S_n log|T'|` over the cylinder.
    pub inf_log_deriv: f64,
    pub sup_log_deriv: f64,
    /// Inf and sup of the single-step `log|T'|` over the cylinder.
    pub first_step_inf: f64,
    pub first_step_sup: f64,
    pub diameter_lower: f64,
    pub diameter_upper: f64,
}

#[derive(Clone, Debug)]
pub struct MapSystem {
    family: MapFamily,
    rule: TransitionRule,
    pl_branches: Vec<Branch>,
}

const MARKOV_TOL: f64 = 1e-12;

impl MapSystem {
    pub fn new(family: MapFamily) -> Result<Self> {
        let (rule, pl_branches) = match &family {
            MapFamily::BaseN { n } => {
                if *n < 2 {
                    return Err(Error::InvalidMap(format!("base_n needs n >= 2, got {n}")));
                }
                (TransitionRule::Explicit(vec![vec![1; *n]; *n]), Vec::new())
            }
            MapFamily::Gauss => (TransitionRule::full_shift(), Vec::new()),
            MapFamily::FLambda { lambda } => {
                if !(*lambda > 0.0 && *lambda < 1.0) {
                    return Err(Error::InvalidMap(format!(
                        "lambda must lie in (0,1), got {lambda}"
                    )));
                }
                (TransitionRule::f_lambda(), Vec::new())
            }
            MapFamily::PiecewiseLinear { branches } => {
                let bs = validate_piecewise(branches)?;
                let matrix = markov_matrix(&bs)?;
                (TransitionRule::Explicit(matrix), bs)
            }
        };
        Ok(MapSystem {
            family,
            rule,
            pl_branches,
        })
    }

    pub fn base_n(n: usize) -> Result<Self> {
        Self::new(MapFamily::BaseN { n })
    }

    pub fn gauss() -> Self {
        Self::new(MapFamily::Gauss).expect("gauss map is valid")
    }

    pub fn f_lambda(lambda: f64) -> Result<Self> {
        Self::new(MapFamily::FLambda { lambda })
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }

    pub fn rule(&self) -> &TransitionRule {
        &self.rule
    }

    /// Number of branches, `None` when countably infinite.
    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.family {
            MapFamily::BaseN { n } => Some(*n),
            MapFamily::PiecewiseLinear { branches } => Some(branches.len()),
            MapFamily::Gauss | MapFamily::FLambda { .. } => None,
        }
    }

    pub fn tail_regime(&self) -> TailRegime {
        match &self.family {
            MapFamily::Gauss => TailRegime::UnboundedDerivative,
            MapFamily::FLambda { .. } => TailRegime::BoundedDerivative,
            _ => TailRegime::Finite,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.family {
            MapFamily::FLambda { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self.family, MapFamily::Gauss)
    }

    pub fn branch(&self, i: Symbol) -> Option<Branch> {
        if i == 0 {
            return None;
        }
        match &self.family {
            MapFamily::BaseN { n } => (i <= *n).then(|| {
                let n = *n as f64;
                Branch {
                    index: i,
                    interval: ((i - 1) as f64 / n, i as f64 / n),
                    increasing: true,
                    slope: Some(n),
                    image: (0.0, 1.0),
                }
            }),
            MapFamily::Gauss => {
                let n = i as f64;
                Some(Branch {
                    index: i,
                    interval: (1.0 / (n + 1.0), 1.0 / n),
                    increasing: false,
                    slope: None,
                    image: (0.0, 1.0),
                })
            }
            MapFamily::FLambda { lambda } => {
                let l = *lambda;
                let interval = (l.powi(i as i32), l.powi(i as i32 - 1));
                let (slope, image) = if i == 1 {
                    (1.0 / (1.0 - l), (0.0, 1.0))
                } else {
                    (1.0 / (l * (1.0 - l)), (0.0, l.powi(i as i32 - 2)))
                };
                Some(Branch {
                    index: i,
                    interval,
                    increasing: true,
                    slope: Some(slope),
                    image,
                })
            }
            MapFamily::PiecewiseLinear { .. } => self.pl_branches.get(i - 1).cloned(),
        }
    }

    /// Single-step log-derivative on a linear branch.
    fn log_slope(&self, i: Symbol) -> Result<f64> {
        self.branch(i)
            .and_then(|b| b.slope)
            .map(f64::ln)
            .ok_or(Error::UnknownSymbol { symbol: i })
    }

    /// `zeta`: a uniform expansion rate with `diam [w] <= zeta^-(n-1)` for every n-word.
    ///
    /// For the Gauss map the first branch has `inf |G'| = 1`, so the rate is
    /// the golden ratio squared, which bounds the growth of continued fraction
    /// denominators `q_n >= phi^(n-1)`.
    pub fn expansion_floor(&self) -> f64 {
        match &self.family {
            MapFamily::BaseN { n } => *n as f64,
            MapFamily::Gauss => {
                let phi = (1.0 + 5f64.sqrt()) / 2.0;
                phi * phi
            }
            MapFamily::FLambda { lambda } => 1.0 / (1.0 - lambda),
            MapFamily::PiecewiseLinear { .. } => self
                .pl_branches
                .iter()
                .filter_map(|b| b.slope)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `L = sup log|T'|` when finite.
    pub fn sup_log_derivative(&self) -> Option<f64> {
        match &self.family {
            MapFamily::BaseN { n } => Some((*n as f64).ln()),
            MapFamily::Gauss => None,
            MapFamily::FLambda { lambda } => Some(-(lambda * (1.0 - lambda)).ln()),
            MapFamily::PiecewiseLinear { .. } => self
                .pl_branches
                .iter()
                .filter_map(|b| b.slope)
                .map(f64::ln)
                .reduce(f64::max),
        }
    }

    /// Inf of `log|T'|` on the closure of branch `i`.
    pub fn branch_inf_log_deriv(&self, i: Symbol) -> Result<f64> {
        match self.family {
            // |G'(x)| = 1/x^2 is smallest at the right endpoint 1/i.
            MapFamily::Gauss if i >= 1 => Ok(2.0 * (i as f64).ln()),
            _ => self.log_slope(i),
        }
    }

    /// The `k`-truncated transition matrix.
    pub fn derive_transitions(&self, k: usize) -> Result<FiniteSubshift> {
        truncate(&self.rule, k)
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        if word.is_empty() || word.iter().any(|&s| self.branch(s).is_none()) {
            return false;
        }
        word.windows(2).all(|w| self.rule.allows(w[0], w[1]))
    }

    pub fn cylinder_geometry(&self, word: &Word) -> Result<CylinderGeometry> {
        let w = word.symbols();
        if !self.is_admissible(w) {
            return Err(Error::NotAdmissible { word: w.to_vec() });
        }
        match self.family {
            MapFamily::Gauss => Ok(gauss_geometry(word)),
            _ => {
                let sum: f64 = w.iter().map(|&s| self.log_slope(s)).sum::<Result<f64>>()?;
                let first = self.log_slope(w[0])?;
                let img = self.branch(word.last()).unwrap().image_diameter();
                let diam = img * (-sum).exp();
                Ok(CylinderGeometry {
                    word: word.clone(),
                    inf_log_deriv: sum,
                    sup_log_deriv: sum,
                    first_step_inf: first,
                    first_step_sup: first,
                    diameter_lower: diam,
                    diameter_upper: diam,
                })
            }
        }
    }

    /// Locally constant stand-in for `log|T'|` on the 2-cylinder `[a, b]`.
    ///
    /// Exact for piecewise-linear maps; for the Gauss map it is the midpoint of
    /// the first-step bracket over `[a, b]`.
    pub fn edge_log_derivative(&self, a: Symbol, b: Symbol) -> Result<f64> {
        match self.family {
            MapFamily::Gauss => {
                let g = self.cylinder_geometry(&Word(vec![a, b]))?;
                Ok(0.5 * (g.first_step_inf + g.first_step_sup))
            }
            _ => self.log_slope(a),
        }
    }

    /// `1_{I_i}` as an order-1 potential.
    pub fn indicator_potential(&self, i: Symbol) -> Potential {
        Potential::indicator(i)
    }
}

/// Gauss cylinders are intervals between consecutive convergents.
///
/// With `x = (p_n + p_{n-1} y) / (q_n + q_{n-1} y)`, `y = G^n x in [0,1]`, one
/// has `|(G^n)'(x)| = (q_n + q_{n-1} y)^2`, monotone in `y`, so endpoint
/// evaluation gives the exact inf and sup.
fn gauss_geometry(word: &Word) -> CylinderGeometry {
    let (mut p_prev, mut q_prev) = (1.0f64, 0.0f64);
    let (mut p, mut q) = (0.0f64, 1.0f64);
    for &a in word.symbols() {
        let a = a as f64;
        let (pn, qn) = (a * p + p_prev, a * q + q_prev);
        p_prev = p;
        q_prev = q;
        p = pn;
        q = qn;
    }
    let e1 = p / q;
    let e2 = (p + p_prev) / (q + q_prev);
    let (xmin, xmax) = (e1.min(e2), e1.max(e2));
    let inf = 2.0 * q.ln();
    let sup = 2.0 * (q + q_prev).ln();
    CylinderGeometry {
        word: word.clone(),
        inf_log_deriv: inf,
        sup_log_deriv: sup,
        first_step_inf: -2.0 * xmax.ln(),
        first_step_sup: -2.0 * xmin.ln(),
        diameter_lower: (-sup).exp(),
        diameter_upper: (-inf).exp(),
    }
}

fn validate_piecewise(specs: &[BranchSpec]) -> Result<Vec<Branch>> {
    if specs.is_empty() {
        return Err(Error::InvalidMap(
            "piecewise_linear needs at least one branch".into(),
        ));
    }
    let mut out = Vec::with_capacity(specs.len());
    for (k, b) in specs.iter().enumerate() {
        let i = k + 1;
        let [l, r] = b.interval;
        let [c, d] = b.image;
        if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&r) || r <= l {
            return Err(Error::InvalidMap(format!(
                "branch {i}: bad interval [{l}, {r}]"
            )));
        }
        if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&d) || d <= c {
            return Err(Error::InvalidMap(format!(
                "branch {i}: bad image [{c}, {d}]"
            )));
        }
        if b.slope.abs() <= 1.0 {
            return Err(Error::InvalidMap(format!(
                "branch {i}: |slope| must exceed 1"
            )));
        }
        if ((d - c) - b.slope.abs() * (r - l)).abs() > 1e-9 {
            return Err(Error::InvalidMap(format!(
                "branch {i}: image length {} differs from |slope| * interval length {}",
                d - c,
                b.slope.abs() * (r - l)
            )));
        }
        out.push(Branch {
            index: i,
            interval: (l, r),
            increasing: b.slope > 0.0,
            slope: Some(b.slope.abs()),
            image: (c, d),
        });
    }
    for a in 0..out.len() {
        for b in a + 1..out.len() {
            let (x, y) = (&out[a].interval, &out[b].interval);
            if x.0 < y.1 - MARKOV_TOL && y.0 < x.1 - MARKOV_TOL {
                return Err(Error::InvalidMap(format!(
                    "branches {} and {} overlap",
                    a + 1,
                    b + 1
                )));
            }
        }
    }
    Ok(out)
}

/// `A_ij = 1` iff `T(I_i)` contains `I_j`; a partial overlap breaks the Markov property.
fn markov_matrix(branches: &[Branch]) -> Result<Vec<Vec<u8>>> {
    let n = branches.len();
    let mut m = vec![vec![0u8; n]; n];
    for (i, bi) in branches.iter().enumerate() {
        for (j, bj) in branches.iter().enumerate() {
            let (c, d) = bi.image;
            let (l, r) = bj.interval;
            let contains = c <= l + MARKOV_TOL && r <= d + MARKOV_TOL;
            let overlaps = c < r - MARKOV_TOL && l < d - MARKOV_TOL;
            if contains {
                m[i][j] = 1;
            } else if overlaps {
                return Err(Error::NonMarkov {
                    from: i + 1,
                    to: j + 1,
                });
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[usize]) -> Word {
        Word(v.to_vec())
    }

    #[test]
    fn transitions_of_builtins() {
        let g = MapSystem::gauss().derive_transitions(4).unwrap();
        assert_eq!(g.matrix(), vec![vec![1; 4]; 4]);

        let f = MapSystem::f_lambda(0.25)
            .unwrap()
            .derive_transitions(3)
            .unwrap();
        assert_eq!(
            f.matrix(),
            vec![vec![1, 1, 1], vec![1, 1, 1], vec![0, 1, 1]]
        );

        let b = MapSystem::base_n(3).unwrap().derive_transitions(5).unwrap();
        assert_eq!(b.matrix(), vec![vec![1; 3]; 3]);
        assert_eq!(b.labels(), &[1, 2, 3]);
    }

    #[test]
    fn f_lambda_rule_agrees_with_interval_containment() {
        let m = MapSystem::f_lambda(0.3).unwrap();
        for i in 1..=25 {
            let img = m.branch(i).unwrap().image;
            for j in 1..=25 {
                let (l, r) = m.branch(j).unwrap().interval;
                let contains = img.0 <= l && r <= img.1 * (1.0 + 1e-12);
                assert_eq!(m.rule().allows(i, j), contains, "pair ({i},{j})");
            }
        }
    }

    #[test]
    fn piecewise_linear_markov_check() {
        let ok = MapFamily::PiecewiseLinear {
            branches: vec![
                BranchSpec {
                    interval: [0.0, 0.5],
                    slope: 2.0,
                    image: [0.0, 1.0],
                },
                BranchSpec {
                    interval: [0.5, 0.75],
                    slope: 2.0,
                    image: [0.0, 0.5],
                },
            ],
        };
        let m = MapSystem::new(ok).unwrap();
        assert_eq!(
            m.derive_transitions(2).unwrap().matrix(),
            vec![vec![1, 1], vec![1, 0]]
        );

        let bad = MapFamily::PiecewiseLinear {
            branches: vec![
                BranchSpec {
                    interval: [0.0, 0.5],
                    slope: 2.0,
                    image: [0.0, 1.0],
                },
                BranchSpec {
                    interval: [0.5, 0.8],
                    slope: 2.0,
                    image: [0.0, 0.6],
                },
            ],
        };
        assert_eq!(
            MapSystem::new(bad).unwrap_err(),
            Error::NonMarkov { from: 2, to: 2 }
        );
    }

    #[test]
    fn base2_geometry() {
        let m = MapSystem::base_n(2).unwrap();
        let g = m.cylinder_geometry(&w(&[1, 2, 1])).unwrap();
        assert!((g.inf_log_deriv - 3.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(g.inf_log_deriv, g.sup_log_deriv);
        assert!((g.diameter_upper - 0.125).abs() < 1e-15);
    }

    #[test]
    fn f_lambda_geometry() {
        let m = MapSystem::f_lambda(0.25).unwrap();
        let g = m.cylinder_geometry(&w(&[2, 2])).unwrap();
        assert!((g.inf_log_deriv - 2.0 * (16.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((g.inf_log_deriv - 3.3480).abs() < 1e-4);
        assert!(m.cylinder_geometry(&w(&[3, 1])).is_err());
    }

    #[test]
    fn gauss_geometry_first_branch() {
        let g = MapSystem::gauss().cylinder_geometry(&w(&[1])).unwrap();
        assert!(g.inf_log_deriv.abs() < 1e-15);
        assert!((g.sup_log_deriv - 4f64.ln()).abs() < 1e-14);
        assert!(g.first_step_inf.abs() < 1e-15);
        assert!((g.first_step_sup - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn gauss_geometry_matches_sampled_derivative() {
        // Sample points of the cylinder through the inverse branches and check
        // the Birkhoff sum of log|G'| stays within the bracket.
        let word = [2usize, 1, 3];
        let g = MapSystem::gauss().cylinder_geometry(&w(&word)).unwrap();
        for k in 0..=20 {
            let y = k as f64 / 20.0;
            let mut x = y;
            for &a in word.iter().rev() {
                x = 1.0 / (a as f64 + x);
            }
            let mut s = 0.0;
            let mut z = x;
            for _ in 0..word.len() {
                s += -2.0 * z.ln();
                z = 1.0 / z - (1.0 / z).floor();
            }
            assert!(
                s >= g.inf_log_deriv - 1e-9 && s <= g.sup_log_deriv + 1e-9,
                "{s} {g:?}"
            );
        }
    }

    #[test]
    fn gauss_branch_inf_is_two_log_n() {
        let m = MapSystem::gauss();
        for n in 1..=50usize {
            let g = m.cylinder_geometry(&w(&[n])).unwrap();
            assert!((g.inf_log_deriv - 2.0 * (n as f64).ln()).abs() < 1e-12);
            assert!((m.branch_inf_log_deriv(n).unwrap() - g.inf_log_deriv).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_potential_evaluates() {
        let m = MapSystem::base_n(2).unwrap();
        assert_eq!(m.indicator_potential(1).eval(&[1, 2]), 1.0);
        assert_eq!(m.indicator_potential(3).eval(&[1, 2]), 0.0);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(MapSystem::base_n(1).is_err());
        assert!(MapSystem::f_lambda(1.0).is_err());
        assert!(MapSystem::f_lambda(0.0).is_err());
    }

    #[test]
    fn sup_log_derivative_values() {
        let f = MapSystem::f_lambda(0.25).unwrap();
        assert!((f.sup_log_derivative().unwrap() - (16.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(MapSystem::gauss().sup_log_derivative(), None);
    }
}

//! Stationary order-1 Markov measures on finite subshifts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::perron::{perron, LogMatrix, PerronOptions, PerronPair};
use crate::potential::Potential;
use crate::shift::{FiniteSubshift, Symbol, Word};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// A stationary Markov measure.
///
/// `p[i][e]` is the probability of the `e`-th successor of state `i`, so the
/// rows are aligned with [`FiniteSubshift::successors`]; zero entries are
/// allowed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovMeasure {
    shift: FiniteSubshift,
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

impl MarkovMeasure {
    /// From a dense `k x k` stochastic matrix in state order.
    pub fn from_dense(shift: FiniteSubshift, p: &[Vec<f64>]) -> Result<Self> {
        let n = shift.size();
        if p.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidStochastic(format!(
                "expected a {n}x{n} matrix"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            for (j, &v) in p[i].iter().enumerate() {
                if v != 0.0 && !shift.allows_index(i, j) {
                    return Err(Error::InvalidStochastic(format!(
                        "positive entry at forbidden transition ({}, {})",
                        shift.label(i),
                        shift.label(j)
                    )));
                }
            }
            rows.push(shift.successors(i).iter().map(|&j| p[i][j]).collect());
        }
        Self::from_rows(shift, rows)
    }

    /// From rows aligned with the successor lists; computes the stationary vector.
    pub fn from_rows(shift: FiniteSubshift, p: Vec<Vec<f64>>) -> Result<Self> {
        check_rows(&shift, &p)?;
        let pi = stationary_distribution(&shift, &p)?;
        Ok(MarkovMeasure { shift, p, pi })
    }

    /// From rows and a known stationary vector, checked to `1e-10`.
    pub fn from_parts(shift: FiniteSubshift, p: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        check_rows(&shift, &p)?;
        if pi.len() != shift.size() || pi.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidStochastic(
                "stationary vector has wrong shape or sign".into(),
            ));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidStochastic(format!(
                "stationary vector sums to {total}"
            )));
        }
        let residual = l1_residual(&shift, &p, &pi);
        if residual > 1e-10 {
            return Err(Error::InvalidStochastic(format!(
                "pi P differs from pi by {residual:e}"
            )));
        }
        Ok(MarkovMeasure { shift, p, pi })
    }

    /// Product measure with symbol weights `weights[i - 1]`; needs the full shift.
    pub fn bernoulli(shift: FiniteSubshift, weights: &[f64]) -> Result<Self> {
        let n = shift.size();
        if weights.len() != n {
            return Err(Error::InvalidStochastic(format!("expected {n} weights")));
        }
        if shift.edge_count() != n * n {
            return Err(Error::InvalidStochastic(
                "Bernoulli measures need the full shift".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidStochastic(
                "weights must be a probability vector".into(),
            ));
        }
        let rows = vec![weights.to_vec(); n];
        Self::from_parts(shift, rows, weights.to_vec())
    }

    /// Equidistribution on the periodic orbit of `word` repeated forever.
    ///
    /// The symbols of `word` must be distinct so that the orbit is an
    /// order-1 Markov chain.
    pub fn dirac_cycle(shift: FiniteSubshift, word: &Word) -> Result<Self> {
        let idx = shift.word_indices(word)?;
        let n = idx.len();
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cycle {word} repeats a symbol; recode to blocks first"
            )));
        }
        if !shift.allows_index(idx[n - 1], idx[0]) {
            return Err(Error::NotAdmissible {
                word: word.0.clone(),
            });
        }
        let mut p: Vec<Vec<f64>> = (0..shift.size())
            .map(|i| point_mass(&shift, i, shift.successors(i)[0]))
            .collect();
        let mut pi = vec![0.0; shift.size()];
        for k in 0..n {
            p[idx[k]] = point_mass(&shift, idx[k], idx[(k + 1) % n]);
            pi[idx[k]] = 1.0 / n as f64;
        }
        Ok(MarkovMeasure { shift, p, pi })
    }

    /// The Parry measure, the unique measure of maximal entropy on an irreducible subshift.
    pub fn max_entropy(shift: FiniteSubshift) -> Result<Self> {
        let m = LogMatrix::from_subshift(&shift, |_, _| 0.0);
        let pp = perron(&m, &PerronOptions::default())?;
        Ok(Self::from_perron(shift, &m, &pp))
    }

    /// Equilibrium measure `P_ij = W_ij r_j / (rho r_i)`, `pi_i = l_i r_i`.
    ///
    /// `m` must have the successor structure of `shift`.
    pub fn from_perron(shift: FiniteSubshift, m: &LogMatrix, pp: &PerronPair) -> Self {
        let (lr, ll) = (&pp.log_right, &pp.log_left);
        let p = m
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<f64> = row
                    .iter()
                    .map(|&(j, w)| (w - pp.log_root + lr[j] - lr[i]).exp())
                    .collect();
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
                r
            })
            .collect();
        let mut pi: Vec<f64> = ll.iter().zip(lr).map(|(a, b)| (a + b).exp()).collect();
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= s);
        MarkovMeasure { shift, p, pi }
    }

    /// Measure from an edge flow `flow[i][e] >= 0` summing to 1 and balanced at every vertex.
    pub fn from_edge_flow(shift: FiniteSubshift, flow: &[Vec<f64>]) -> Result<Self> {
        let n = shift.size();
        let mut pi = vec![0.0; n];
        let mut p = Vec::with_capacity(n);
        for i in 0..n {
            let out: f64 = flow[i].iter().map(|&f| f.max(0.0)).sum();
            pi[i] = out;
            let d = shift.successors(i).len();
            if out > 0.0 {
                p.push(flow[i].iter().map(|&f| f.max(0.0) / out).collect());
            } else {
                p.push(vec![1.0 / d as f64; d]);
            }
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        Self::from_parts(shift, p, pi)
    }

    pub fn shift(&self) -> &FiniteSubshift {
        &self.shift
    }

    /// Rows aligned with the successor lists.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// Transition probability between state indices.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        match self.shift.successors(i).binary_search(&j) {
            Ok(e) => self.p[i][e],
            Err(_) => 0.0,
        }
    }

    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.shift.size();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for (e, &j) in self.shift.successors(i).iter().enumerate() {
                m[i][j] = self.p[i][e];
            }
        }
        m
    }

    /// `F_ij = pi_i P_ij`, aligned with the successor lists.
    pub fn edge_flow(&self) -> Vec<Vec<f64>> {
        self.p
            .iter()
            .zip(&self.pi)
            .map(|(row, &w)| row.iter().map(|&x| w * x).collect())
            .collect()
    }

    /// Mass of the symbol with label `a`.
    pub fn symbol_mass(&self, a: Symbol) -> f64 {
        self.shift.index_of(a).map_or(0.0, |i| self.pi[i])
    }

    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (row, &w) in self.p.iter().zip(&self.pi) {
            if w == 0.0 {
                continue;
            }
            let r: f64 = row.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
            h += w * r;
        }
        h
    }

    /// `pi_{w_1} P_{w_1 w_2} ... P_{w_{n-1} w_n}`; zero for inadmissible words.
    pub fn cylinder_mass(&self, word: &Word) -> f64 {
        let Ok(idx) = self.shift.word_indices(word) else {
            return 0.0;
        };
        let mut m = self.pi[idx[0]];
        for w in idx.windows(2) {
            m *= self.transition(w[0], w[1]);
        }
        m
    }

    /// Visits every word of length `n` with positive mass in lexicographic order.
    pub fn for_each_word(&self, n: usize, mut visit: impl FnMut(&[usize], f64)) {
        let mut path = Vec::with_capacity(n);
        for i in 0..self.shift.size() {
            if self.pi[i] > 0.0 && n > 0 {
                path.push(i);
                self.walk(n, &mut path, self.pi[i], &mut visit);
                path.pop();
            }
        }
    }

    fn walk(
        &self,
        n: usize,
        path: &mut Vec<usize>,
        mass: f64,
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        if path.len() == n {
            visit(path, mass);
            return;
        }
        let i = *path.last().unwrap();
        for (e, &j) in self.shift.successors(i).iter().enumerate() {
            let p = self.p[i][e];
            if p > 0.0 {
                path.push(j);
                self.walk(n, path, mass * p, visit);
                path.pop();
            }
        }
    }

    pub fn integrate(&self, f: &Potential) -> f64 {
        let m = f.order();
        let mut total = 0.0;
        let mut buf = Vec::with_capacity(m);
        self.for_each_word(m, |path, mass| {
            buf.clear();
            buf.extend(path.iter().map(|&i| self.shift.label(i)));
            total += mass * f.eval(&buf);
        });
        total
    }

    /// Bracket for `int log|T'| d mu` from the geometry of `m_geo`-cylinders.
    ///
    /// Combines the Birkhoff-sum bracket `S_m / m` with the single-step
    /// bracket; both sides coincide for piecewise-linear maps.
    pub fn lyapunov(&self, map: &MapSystem, m_geo: usize) -> Result<(f64, f64)> {
        let m = m_geo.max(1);
        let (mut lo_sum, mut hi_sum, mut lo_first, mut hi_first) = (0.0, 0.0, 0.0, 0.0);
        let mut err = None;
        self.for_each_word(m, |path, mass| {
            if err.is_some() {
                return;
            }
            match map.cylinder_geometry(&self.shift.labels_of(path)) {
                Ok(g) => {
                    lo_sum += mass * g.inf_log_deriv;
                    hi_sum += mass * g.sup_log_deriv;
                    lo_first += mass * g.first_step_inf;
                    hi_first += mass * g.first_step_sup;
                }
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let mf = m as f64;
        let lo = (lo_sum / mf).max(lo_first);
        let hi = (hi_sum / mf).min(hi_first);
        if map.is_piecewise_linear() {
            return Ok((lo_first, lo_first));
        }
        Ok((lo.min(hi), hi.max(lo)))
    }
}

fn point_mass(shift: &FiniteSubshift, i: usize, j: usize) -> Vec<f64> {
    shift
        .successors(i)
        .iter()
        .map(|&k| if k == j { 1.0 } else { 0.0 })
        .collect()
}

fn check_rows(shift: &FiniteSubshift, p: &[Vec<f64>]) -> Result<()> {
    if p.len() != shift.size() {
        return Err(Error::InvalidStochastic(
            "row count differs from alphabet size".into(),
        ));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != shift.successors(i).len() {
            return Err(Error::InvalidStochastic(format!(
                "row {} is not aligned with its successors",
                shift.label(i)
            )));
        }
        if row.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidStochastic(format!(
                "negative entry in row {}",
                shift.label(i)
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL * 10.0 {
            return Err(Error::InvalidStochastic(format!(
                "row {} sums to {s}",
                shift.label(i)
            )));
        }
    }
    Ok(())
}

fn l1_residual(shift: &FiniteSubshift, p: &[Vec<f64>], pi: &[f64]) -> f64 {
    let next = step(shift, p, pi);
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

fn step(shift: &FiniteSubshift, p: &[Vec<f64>], pi: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; pi.len()];
    for i in 0..pi.len() {
        if pi[i] == 0.0 {
            continue;
        }
        for (e, &j) in shift.successors(i).iter().enumerate() {
            next[j] += pi[i] * p[i][e];
        }
    }
    next
}

/// Stationary vector of a stochastic matrix given by rows aligned with `shift`.
///
/// Only the positive entries of `p` count as edges. The vector is unique iff
/// that graph has a single closed class; otherwise the first closed class is
/// reported. Lazy power iteration from the uniform vector runs until
/// `|pi P - pi|_1 <= 1e-12`.
pub fn stationary_distribution(shift: &FiniteSubshift, p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = shift.size();
    let support: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            shift
                .successors(i)
                .iter()
                .zip(&p[i])
                .filter(|(_, &x)| x > 0.0)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect();
    let graph = FiniteSubshift::from_successors(shift.labels().to_vec(), support)?;
    let comps = graph.strong_components();
    let mut comp_of = vec![0; n];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            comp_of[m] = c;
        }
    }
    let closed: Vec<&Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&u| graph.successors(u).iter().all(|&v| comp_of[v] == *c))
        })
        .map(|(_, m)| m)
        .collect();
    if closed.len() > 1 {
        return Err(Error::Reducible {
            closed_class: closed[0].iter().map(|&i| shift.label(i)).collect(),
        });
    }
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITERS {
        let next = step(shift, p, &pi);
        let res: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if res <= STATIONARY_TOL {
            let s: f64 = pi.iter().sum();
            return Ok(pi.into_iter().map(|x| x / s).collect());
        }
        for (x, y) in pi.iter_mut().zip(&next) {
            *x = 0.5 * (*x + y);
        }
    }
    Err(Error::NoConvergence(
        "stationary distribution power iteration".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{truncate, TransitionRule};

    fn full(k: usize) -> FiniteSubshift {
        truncate(&TransitionRule::full_shift(), k).unwrap()
    }

    fn half_one() -> MarkovMeasure {
        MarkovMeasure::from_dense(full(2), &[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let m = MarkovMeasure::from_dense(full(2), &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((m.stationary()[0] - 0.5).abs() < 1e-12);
        let m = half_one();
        assert!((m.stationary()[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((m.stationary()[1] - 1.0 / 3.0).abs() < 1e-11);
        let id = MarkovMeasure::from_dense(full(2), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(id, Err(Error::Reducible { .. })));
    }

    #[test]
    fn entropy_examples() {
        let b = MarkovMeasure::bernoulli(full(2), &[0.5, 0.5]).unwrap();
        assert!((b.entropy() - 2f64.ln()).abs() < 1e-15);
        let b = MarkovMeasure::bernoulli(full(2), &[0.7, 0.3]).unwrap();
        assert!((b.entropy() - 0.610864).abs() < 1e-6);
        assert!((half_one().entropy() - 2.0 / 3.0 * 2f64.ln()).abs() < 1e-11);
        assert!((half_one().entropy() - 0.462098).abs() < 1e-6);
    }

    #[test]
    fn integral_examples() {
        let b = MarkovMeasure::bernoulli(full(2), &[0.5, 0.5]).unwrap();
        assert!((b.integrate(&Potential::indicator(2)) - 0.5).abs() < 1e-15);
        assert!((b.integrate(&Potential::constant(1.7, 2)) - 1.7).abs() < 1e-14);
        assert!((half_one().integrate(&Potential::indicator(1)) - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn lyapunov_examples() {
        let b = MarkovMeasure::bernoulli(full(2), &[0.3, 0.7]).unwrap();
        let (lo, hi) = b.lyapunov(&MapSystem::base_n(2).unwrap(), 2).unwrap();
        assert!((lo - 2f64.ln()).abs() < 1e-14 && (hi - 2f64.ln()).abs() < 1e-14);

        let f = MapSystem::f_lambda(0.25).unwrap();
        let s = f.derive_transitions(2).unwrap();
        let b = MarkovMeasure::bernoulli(s, &[0.5, 0.5]).unwrap();
        let (lo, hi) = b.lyapunov(&f, 1).unwrap();
        let expected = 0.5 * (4.0f64 / 3.0).ln() + 0.5 * (16.0f64 / 3.0).ln();
        assert!((lo - expected).abs() < 1e-14 && lo == hi);
        assert!((lo - 0.980829).abs() < 1e-6);

        let g = MapSystem::gauss();
        let d =
            MarkovMeasure::dirac_cycle(g.derive_transitions(3).unwrap(), &Word(vec![1])).unwrap();
        let (lo, hi) = d.lyapunov(&g, 1).unwrap();
        assert!(lo.abs() < 1e-15 && (hi - 4f64.ln()).abs() < 1e-14);
        // The fixed point is 1/phi, where log|G'| = 2 log phi.
        let (lo, hi) = d.lyapunov(&g, 12).unwrap();
        let target = 2.0 * ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!(lo <= target && target <= hi && hi - lo < 0.2);
    }

    #[test]
    fn parry_measure_has_topological_entropy() {
        let s = FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 1]]).unwrap();
        let m = MarkovMeasure::max_entropy(s).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((m.entropy() - golden.ln()).abs() < 1e-12);
    }

    #[test]
    fn cylinder_masses_sum_to_one() {
        let s = truncate(&TransitionRule::f_lambda(), 5).unwrap();
        let m = MarkovMeasure::max_entropy(s).unwrap();
        for n in 1..=5 {
            let mut total = 0.0;
            m.for_each_word(n, |_, w| total += w);
            assert!((total - 1.0).abs() < 1e-10);
        }
        let w = Word(vec![2, 3, 2]);
        let i = |a| m.shift().index_of(a).unwrap();
        let direct = m.stationary()[i(2)] * m.transition(i(2), i(3)) * m.transition(i(3), i(2));
        assert_eq!(m.cylinder_mass(&w), direct);
        assert_eq!(m.cylinder_mass(&Word(vec![3, 1])), 0.0);
    }

    #[test]
    fn edge_flow_round_trip() {
        let m = half_one();
        let back = MarkovMeasure::from_edge_flow(m.shift().clone(), &m.edge_flow()).unwrap();
        assert!((back.entropy() - m.entropy()).abs() < 1e-12);
    }

    #[test]
    fn forbidden_entries_rejected() {
        let s = FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 1]]).unwrap();
        assert!(MarkovMeasure::from_dense(s, &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(MarkovMeasure::from_dense(full(2), &[vec![0.6, 0.5], vec![0.5, 0.5]]).is_err());
    }
}

//! Edge-indexed data for optimization over Markov measures on a truncation.

use crate::error::Result;
use crate::maps::MapSystem;
use crate::measure::MarkovMeasure;
use crate::perron::{perron, LogMatrix, PerronOptions};
use crate::potential::Potential;
use crate::shift::{FiniteSubshift, Word};
use crate::thermo::Transfer;

/// A transfer graph whose edges carry the log-derivative and every potential.
///
/// All per-edge tables are aligned with the successor lists of `graph`.
#[derive(Clone, Debug)]
pub(crate) struct EdgeModel {
    pub graph: FiniteSubshift,
    pub state_words: Vec<Word>,
    pub ell: Vec<Vec<f64>>,
    pub phi: Vec<Vec<Vec<f64>>>,
}

/// The equilibrium measure of `exp(-t ell + q . phi)` and its statistics.
#[derive(Clone, Debug)]
pub(crate) struct Gibbs {
    pub log_root: f64,
    pub flow: Vec<Vec<f64>>,
    pub entropy: f64,
    pub lyapunov: f64,
    pub moments: Vec<f64>,
}

impl EdgeModel {
    pub fn build(map: &MapSystem, s: &FiniteSubshift, potentials: &[Potential]) -> Result<Self> {
        let order = potentials
            .iter()
            .map(Potential::order)
            .max()
            .unwrap_or(1)
            .max(2);
        let mut failure = None;
        let lt = Transfer::with_weight(s, order, |w| match map.edge_log_derivative(w[0], w[1]) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let phi = potentials
            .iter()
            .map(|f| {
                let t = Transfer::with_weight(s, order, |w| f.eval(w))?;
                Ok(strip(&t.weights))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EdgeModel {
            ell: strip(&lt.weights),
            graph: lt.graph,
            state_words: lt.state_words,
            phi,
        })
    }

    /// Iterates `(state, slot, target)` over edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.graph.size()).flat_map(move |i| {
            self.graph
                .successors(i)
                .iter()
                .enumerate()
                .map(move |(e, &j)| (i, e, j))
        })
    }

    pub fn log_weights(&self, t: f64, q: &[f64]) -> LogMatrix {
        let rows = (0..self.graph.size())
            .map(|i| {
                self.graph
                    .successors(i)
                    .iter()
                    .enumerate()
                    .map(|(e, &j)| {
                        let w = -t * self.ell[i][e]
                            + q.iter()
                                .zip(&self.phi)
                                .map(|(qk, f)| qk * f[i][e])
                                .sum::<f64>();
                        (j, w)
                    })
                    .collect()
            })
            .collect();
        LogMatrix::new(rows)
    }

    pub fn gibbs(&self, t: f64, q: &[f64]) -> Result<Gibbs> {
        let m = self.log_weights(t, q);
        let pp = perron(&m, &PerronOptions::default())?;
        let flow: Vec<Vec<f64>> = m
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&(j, w)| (pp.log_left[i] + w + pp.log_right[j] - pp.log_root).exp())
                    .collect()
            })
            .collect();
        let total: f64 = flow.iter().flatten().sum();
        let flow: Vec<Vec<f64>> = flow
            .into_iter()
            .map(|r| r.into_iter().map(|x| x / total).collect())
            .collect();
        let stats = self.statistics(&flow);
        Ok(Gibbs {
            log_root: pp.log_root,
            flow,
            entropy: stats.0,
            lyapunov: stats.1,
            moments: stats.2,
        })
    }

    /// `(h, lambda, moments)` of a normalized edge flow.
    pub fn statistics(&self, flow: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
        let mut h = 0.0;
        let mut lambda = 0.0;
        let mut moments = vec![0.0; self.phi.len()];
        for (i, row) in flow.iter().enumerate() {
            let out: f64 = row.iter().sum();
            for (e, &f) in row.iter().enumerate() {
                if f <= 0.0 {
                    continue;
                }
                h -= f * (f / out).ln();
                lambda += f * self.ell[i][e];
                for (m, p) in moments.iter_mut().zip(&self.phi) {
                    *m += f * p[i][e];
                }
            }
        }
        (h.max(0.0), lambda, moments)
    }

    pub fn measure(&self, flow: &[Vec<f64>]) -> Result<MarkovMeasure> {
        MarkovMeasure::from_edge_flow(self.graph.clone(), flow)
    }

    /// The strongly connected pieces of the sub-graph of edges with `keep` set.
    pub fn components(&self, keep: &[Vec<bool>]) -> Result<Vec<Piece>> {
        let n = self.graph.size();
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                self.graph
                    .successors(i)
                    .iter()
                    .zip(&keep[i])
                    .filter(|(_, &k)| k)
                    .map(|(&j, _)| j)
                    .collect()
            })
            .collect();
        let masked = FiniteSubshift::from_successors(self.graph.labels().to_vec(), succ)?;
        let mut out = Vec::new();
        for mut comp in masked.strong_components() {
            comp.sort_unstable();
            if let Some(piece) = self.restrict(&comp, keep)? {
                out.push(piece);
            }
        }
        Ok(out)
    }

    /// All states touching a kept edge, with the kept edges between them.
    pub fn support(&self, keep: &[Vec<bool>]) -> Result<Option<Piece>> {
        let states: Vec<usize> = (0..self.graph.size())
            .filter(|&i| keep[i].iter().any(|&k| k))
            .collect();
        self.restrict(&states, keep)
    }

    /// The model on sorted `states` keeping edges with `keep` set; `None` without edges.
    fn restrict(&self, states: &[usize], keep: &[Vec<bool>]) -> Result<Option<Piece>> {
        let mut local = vec![usize::MAX; self.graph.size()];
        for (a, &i) in states.iter().enumerate() {
            local[i] = a;
        }
        let mut succ = Vec::with_capacity(states.len());
        let mut slots = Vec::with_capacity(states.len());
        for &i in states {
            let (s, e): (Vec<usize>, Vec<usize>) = self
                .graph
                .successors(i)
                .iter()
                .enumerate()
                .filter(|&(e, &j)| keep[i][e] && local[j] != usize::MAX)
                .map(|(e, &j)| (local[j], e))
                .unzip();
            succ.push(s);
            slots.push(e);
        }
        if succ.iter().all(|s| s.is_empty()) {
            return Ok(None);
        }
        let labels = states.iter().map(|&i| self.graph.label(i)).collect();
        let graph = FiniteSubshift::from_successors(labels, succ)?;
        let mut piece = Piece {
            model: self.clone(),
            states: states.to_vec(),
            slots,
        };
        piece.model = EdgeModel {
            ell: piece.pick(&self.ell),
            phi: self.phi.iter().map(|t| piece.pick(t)).collect(),
            state_words: states
                .iter()
                .map(|&i| self.state_words[i].clone())
                .collect(),
            graph,
        };
        Ok(Some(piece))
    }

    /// Keeps only the potentials listed in `which`.
    pub fn select_potentials(&self, which: &[usize]) -> EdgeModel {
        EdgeModel {
            phi: which.iter().map(|&k| self.phi[k].clone()).collect(),
            ..self.clone()
        }
    }
}

/// A restricted model with the map back to its parent's edge slots.
#[derive(Clone, Debug)]
pub(crate) struct Piece {
    pub model: EdgeModel,
    pub states: Vec<usize>,
    pub slots: Vec<Vec<usize>>,
}

impl Piece {
    /// Restricts a parent edge table to this piece.
    pub fn pick(&self, table: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .zip(&self.slots)
            .map(|(&i, es)| es.iter().map(|&e| table[i][e]).collect())
            .collect()
    }
}

fn strip(m: &LogMatrix) -> Vec<Vec<f64>> {
    m.rows
        .iter()
        .map(|r| r.iter().map(|&(_, w)| w).collect())
        .collect()
}

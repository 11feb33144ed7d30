//! Integer-roof suspensions over the m-block shift and their entropy bookkeeping.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::measure::MarkovMeasure;
use crate::perron::{log_spectral_radius_any, LogMatrix};
use crate::shift::{block_recode, enumerate_words, BlockShift, FiniteSubshift, Symbol, Word};
use crate::thermo::Transfer;

/// Locally constant integer roof on `m`-cylinders.
///
/// `k_w = floor(base^m * inf_{[w]} log|T'|)`, the largest integer `k` with
/// `k / base^m` below the infimum.
#[derive(Clone, Debug, Serialize)]
pub struct RoofFunction {
    pub m: usize,
    pub base: u32,
    /// Words in lexicographic order with their roof values.
    pub words: Vec<Word>,
    pub values: Vec<usize>,
    /// `inf log|T'|` on each cylinder.
    pub inf_log_deriv: Vec<f64>,
    #[serde(skip)]
    index: HashMap<Vec<Symbol>, usize>,
}

impl RoofFunction {
    pub fn value(&self, word: &[Symbol]) -> Option<usize> {
        self.index.get(word).map(|&i| self.values[i])
    }

    /// `base^m`.
    pub fn scale(&self) -> f64 {
        (self.base as f64).powi(self.m as i32)
    }

    /// `int tau_m d nu` for a Markov measure on the base truncation.
    pub fn integrate(&self, nu: &MarkovMeasure) -> f64 {
        let s = nu.shift();
        let mut total = 0.0;
        nu.for_each_word(self.m, |path, mass| {
            let w: Vec<Symbol> = path.iter().map(|&i| s.label(i)).collect();
            total += mass * self.value(&w).unwrap_or(0) as f64;
        });
        total
    }
}

fn roof_value(map: &MapSystem, word: &Word, scale: f64) -> Result<(usize, f64)> {
    let inf = map.cylinder_geometry(word)?.first_step_inf;
    Ok(((scale * inf).floor().max(0.0) as usize, inf))
}

/// Smallest integer `l >= 2` with `1/l < log zeta`.
pub fn roof_base(map: &MapSystem) -> u32 {
    let log_zeta = map.expansion_floor().ln();
    let mut l = 2u32;
    while (l as f64) * log_zeta <= 1.0 {
        l += 1;
    }
    l
}

/// Roof with base 2 over the `m`-words of the `k`-truncation.
pub fn build_roof(map: &MapSystem, m: usize, k: usize) -> Result<RoofFunction> {
    build_roof_with_base(map, m, k, 2)
}

pub fn build_roof_with_base(
    map: &MapSystem,
    m: usize,
    k: usize,
    base: u32,
) -> Result<RoofFunction> {
    if m == 0 || base < 2 {
        return Err(Error::InvalidArgument("need m >= 1 and base >= 2".into()));
    }
    let s = map.derive_transitions(k)?;
    let scale = (base as f64).powi(m as i32);
    let words = enumerate_words(&s, m);
    let mut values = Vec::with_capacity(words.len());
    let mut infs = Vec::with_capacity(words.len());
    for w in &words {
        let (v, inf) = roof_value(map, w, scale)?;
        if v == 0 {
            return Err(Error::ZeroRoof { word: w.0.clone() });
        }
        values.push(v);
        infs.push(inf);
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.0.clone(), i))
        .collect();
    Ok(RoofFunction {
        m,
        base,
        words,
        values,
        inf_log_deriv: infs,
        index,
    })
}

/// The shift obtained from the `m`-block shift by replacing block `w` with a chain of `k_w` vertices.
///
/// Blocks are ordered lexicographically; vertex labels run `1..=sum k_w`
/// with each chain occupying consecutive labels.
#[derive(Clone, Debug)]
pub struct SplitShift {
    pub roof: RoofFunction,
    pub blocks: BlockShift,
    pub shift: FiniteSubshift,
    /// Label of the first vertex in each block's chain.
    pub chain_start: Vec<Symbol>,
}

pub fn build_split_shift(map: &MapSystem, m: usize, k: usize) -> Result<SplitShift> {
    split_from_roof(map, build_roof(map, m, k)?, k)
}

/// Split shift over the roof with base `l^m`; pair with [`roof_base`] when base 2 gives zero roofs.
pub fn build_split_shift_with_base(
    map: &MapSystem,
    m: usize,
    k: usize,
    base: u32,
) -> Result<SplitShift> {
    split_from_roof(map, build_roof_with_base(map, m, k, base)?, k)
}

pub fn split_from_roof(map: &MapSystem, roof: RoofFunction, k: usize) -> Result<SplitShift> {
    let blocks = block_recode(&map.derive_transitions(k)?, roof.m)?;
    if blocks.words != roof.words {
        return Err(Error::InvalidArgument(
            "roof does not match the block shift".into(),
        ));
    }
    let mut chain_start = Vec::with_capacity(roof.values.len());
    let mut next = 1;
    for &kw in &roof.values {
        chain_start.push(next);
        next += kw;
    }
    let total = next - 1;
    let mut succ = Vec::with_capacity(total);
    for (b, &kw) in roof.values.iter().enumerate() {
        let start = chain_start[b] - 1;
        for j in 0..kw - 1 {
            succ.push(vec![start + j + 1]);
        }
        succ.push(
            blocks
                .shift
                .successors(b)
                .iter()
                .map(|&c| chain_start[c] - 1)
                .collect(),
        );
    }
    let shift = FiniteSubshift::from_successors((1..=total).collect(), succ)?;
    Ok(SplitShift {
        roof,
        blocks,
        shift,
        chain_start,
    })
}

impl SplitShift {
    pub fn vertex_count(&self) -> usize {
        self.shift.size()
    }

    /// Block index and 1-based chain position of a vertex label.
    pub fn vertex(&self, label: Symbol) -> Option<(usize, usize)> {
        if label == 0 || label > self.vertex_count() {
            return None;
        }
        let b = self.chain_start.partition_point(|&s| s <= label) - 1;
        Some((b, label - self.chain_start[b] + 1))
    }

    /// A parent cylinder `[w']` with `eta([a]) = nu([w']) / int tau d nu` for every pushed measure.
    ///
    /// The cylinder is first extended back to the start of its first chain,
    /// which leaves pushed masses unchanged since chains are entered only at
    /// their start.
    pub fn to_parent(&self, a: &Word) -> Result<Word> {
        if a.is_empty() || !self.shift.is_admissible(a.symbols()) {
            return Err(Error::NotAdmissible { word: a.0.clone() });
        }
        let mut visited = Vec::new();
        for (i, &label) in a.symbols().iter().enumerate() {
            let (b, j) = self.vertex(label).unwrap();
            if i == 0 || j == 1 {
                visited.push(b);
            }
        }
        let mut out = self.blocks.words[visited[0]].0.clone();
        out.extend(visited[1..].iter().map(|&b| self.blocks.words[b].last()));
        Ok(Word(out))
    }

    /// A split cylinder `[a]` with `nu([w]) = eta([a]) * int tau d nu`; needs `|w| >= m`.
    pub fn from_parent(&self, w: &Word) -> Result<Word> {
        let m = self.roof.m;
        if w.len() < m {
            return Err(Error::InvalidArgument(format!(
                "word shorter than block length {m}"
            )));
        }
        let mut out = Vec::new();
        let count = w.len() - m + 1;
        for i in 0..count {
            let b = *self
                .roof
                .index
                .get(&w.symbols()[i..i + m])
                .ok_or_else(|| Error::NotAdmissible { word: w.0.clone() })?;
            let len = if i + 1 == count {
                1
            } else {
                self.roof.values[b]
            };
            out.extend((0..len).map(|j| self.chain_start[b] + j));
        }
        if !self.shift.is_admissible(&out) {
            return Err(Error::NotAdmissible { word: w.0.clone() });
        }
        Ok(Word(out))
    }

    /// Topological entropy through the roof equation `P_{Sigma_m}(-s tau) = 0`.
    pub fn entropy_by_roof_equation(&self) -> Result<f64> {
        let g = &self.blocks.shift;
        let values = &self.roof.values;
        pressure_zero(|s| {
            let m = LogMatrix::from_subshift(g, |i, _| -s * values[i] as f64);
            log_spectral_radius_any(&m)
        })
    }
}

/// The largest `s >= 0` with `p(s) >= 0` for a nonincreasing `p`, by bisection.
fn pressure_zero(mut p: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if p(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while p(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoConvergence("pressure stays positive".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if p(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The Markov measure on the `m`-block recoding induced by `mm`.
pub fn lift_to_blocks(mm: &MarkovMeasure, blocks: &BlockShift) -> Result<MarkovMeasure> {
    let s = mm.shift();
    let mut pi = Vec::with_capacity(blocks.words.len());
    let mut rows = Vec::with_capacity(blocks.words.len());
    for (u, w) in blocks.words.iter().enumerate() {
        pi.push(mm.cylinder_mass(w));
        let last = s
            .index_of(w.last())
            .ok_or(Error::UnknownSymbol { symbol: w.last() })?;
        rows.push(
            blocks
                .shift
                .successors(u)
                .iter()
                .map(|&v| mm.transition(last, s.index_of(blocks.words[v].last()).unwrap()))
                .collect(),
        );
    }
    MarkovMeasure::from_parts(blocks.shift.clone(), rows, pi)
}

/// Pushes a Markov measure on the block shift to the split shift.
///
/// Chains are traversed deterministically, chain ends branch with the block
/// transition probabilities, and stationary weights are the block weights
/// divided by `int tau d mm`.
pub fn push_measure(mm: &MarkovMeasure, split: &SplitShift) -> Result<MarkovMeasure> {
    if mm.shift() != &split.blocks.shift {
        return Err(Error::InvalidArgument(
            "measure does not live on the split's block shift".into(),
        ));
    }
    let mass: f64 = mm
        .stationary()
        .iter()
        .zip(&split.roof.values)
        .map(|(p, &k)| p * k as f64)
        .sum();
    let mut rows = Vec::with_capacity(split.vertex_count());
    let mut pi = Vec::with_capacity(split.vertex_count());
    for (b, &kw) in split.roof.values.iter().enumerate() {
        let w = mm.stationary()[b] / mass;
        for _ in 0..kw - 1 {
            rows.push(vec![1.0]);
            pi.push(w);
        }
        rows.push(mm.rows()[b].clone());
        pi.push(w);
    }
    MarkovMeasure::from_parts(split.shift.clone(), rows, pi)
}

/// Both sides of Abramov's formula for one measure.
#[derive(Clone, Debug, Serialize)]
pub struct AbramovCheck {
    /// Entropy of the pushed measure on the split shift.
    pub pushed: f64,
    /// `h(mm) / int tau_m d mm`.
    pub predicted: f64,
    pub roof_integral: f64,
}

impl AbramovCheck {
    pub fn gap(&self) -> f64 {
        (self.pushed - self.predicted).abs()
    }
}

/// Lifts `mm` to the split shift and compares its entropy with `h(mm) / int tau_m`.
pub fn abramov_check(mm: &MarkovMeasure, split: &SplitShift) -> Result<AbramovCheck> {
    let lifted = lift_to_blocks(mm, &split.blocks)?;
    let pushed = push_measure(&lifted, split)?;
    let roof_integral = split.roof.integrate(mm);
    Ok(AbramovCheck {
        pushed: pushed.entropy(),
        predicted: mm.entropy() / roof_integral,
        roof_integral,
    })
}

/// One row of the scaled escaping-entropy trend.
#[derive(Clone, Debug, Serialize)]
pub struct TrendRow {
    pub m: usize,
    pub base: u32,
    /// Entropy of the split shift built over symbols in `(q, k]`.
    pub high_entropy: f64,
    /// `base^m * high_entropy`.
    pub scaled: f64,
}

/// Escaping-entropy proxy for the split shifts: the roof-equation entropy of the
/// part of the `k`-truncation above level `q`, scaled by `base^m`.
pub fn suspension_trend(
    map: &MapSystem,
    k: usize,
    q: Symbol,
    m_max: usize,
    base: u32,
) -> Result<Vec<TrendRow>> {
    let full = map.derive_transitions(k)?;
    let keep: Vec<usize> = (0..full.size()).filter(|&i| full.label(i) > q).collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no symbols above {q} in the truncation"
        )));
    }
    let mut local = vec![usize::MAX; full.size()];
    for (n, &i) in keep.iter().enumerate() {
        local[i] = n;
    }
    let labels = keep.iter().map(|&i| full.label(i)).collect();
    let succ = keep
        .iter()
        .map(|&i| {
            full.successors(i)
                .iter()
                .filter_map(|&j| (local[j] != usize::MAX).then_some(local[j]))
                .collect()
        })
        .collect();
    let high = FiniteSubshift::from_successors(labels, succ)?;
    let mut out = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let scale = (base as f64).powi(m as i32);
        let mut cache: HashMap<Vec<Symbol>, f64> = HashMap::new();
        let mut roof = |w: &[Symbol]| -> Result<f64> {
            if let Some(&v) = cache.get(w) {
                return Ok(v);
            }
            let v = roof_value(map, &Word(w.to_vec()), scale)?.0 as f64;
            cache.insert(w.to_vec(), v);
            Ok(v)
        };
        let mut failure = None;
        let t = Transfer::with_weight(&high, m, |w| match roof(&w[..m]) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let taus: Vec<Vec<f64>> = t
            .weights
            .rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).collect())
            .collect();
        let h = pressure_zero(|s| {
            let rows = t
                .weights
                .rows
                .iter()
                .zip(&taus)
                .map(|(r, tr)| {
                    r.iter()
                        .zip(tr)
                        .map(|(&(j, _), &tau)| (j, -s * tau))
                        .collect()
                })
                .collect();
            log_spectral_radius_any(&LogMatrix::new(rows))
        })?;
        out.push(TrendRow {
            m,
            base,
            high_entropy: h,
            scaled: scale * h,
        });
    }
    Ok(out)
}

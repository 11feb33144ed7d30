//! Countable Markov shifts through their finite truncations.
//!
//! A [`TransitionRule`] describes the (possibly infinite) shift. Every
//! computation runs on a [`FiniteSubshift`] obtained from [`truncate`], which
//! keeps the original symbol labels so results can be reported in the
//! alphabet of the parent shift.
//!
//! Internally states are indexed `0..k` in increasing label order, so the
//! lexicographic order on words of labels coincides with the lexicographic
//! order on index sequences.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbols are positive integers `1, 2, 3, ...`.
pub type Symbol = usize;

/// A finite word over the positive integers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Symbol {
        self.0[0]
    }

    pub fn last(&self) -> Symbol {
        self.0[self.0.len() - 1]
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

type Predicate = Arc<dyn Fn(Symbol, Symbol) -> bool + Send + Sync>;

/// Admissibility rule of a countable Markov shift.
#[derive(Clone)]
pub enum TransitionRule {
    /// Square 0/1 matrix over `{1..k}`; transitions outside it are forbidden.
    Explicit(Vec<Vec<u8>>),
    /// A total, deterministic relation on pairs of positive integers.
    Predicate(Predicate),
}

impl fmt::Debug for TransitionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionRule::Explicit(m) => f.debug_tuple("Explicit").field(m).finish(),
            TransitionRule::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl TransitionRule {
    pub fn explicit(matrix: Vec<Vec<u8>>) -> Result<Self> {
        validate_square(&matrix)?;
        Ok(TransitionRule::Explicit(matrix))
    }

    pub fn predicate<F>(f: F) -> Self
    where
        F: Fn(Symbol, Symbol) -> bool + Send + Sync + 'static,
    {
        TransitionRule::Predicate(Arc::new(f))
    }

    /// Every transition allowed.
    pub fn full_shift() -> Self {
        Self::predicate(|_, _| true)
    }

    /// `i -> j` allowed iff `i = 1` or `j >= i - 1`.
    pub fn f_lambda() -> Self {
        Self::predicate(|i, j| i == 1 || j + 1 >= i)
    }

    pub fn allows(&self, i: Symbol, j: Symbol) -> bool {
        if i == 0 || j == 0 {
            return false;
        }
        match self {
            TransitionRule::Explicit(m) => i <= m.len() && j <= m.len() && m[i - 1][j - 1] == 1,
            TransitionRule::Predicate(p) => p(i, j),
        }
    }
}

fn validate_square(matrix: &[Vec<u8>]) -> Result<()> {
    let k = matrix.len();
    for (r, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(Error::InvalidMatrix(format!(
                "row {} has length {} in a {k}x{k} matrix",
                r + 1,
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidMatrix(format!(
                "entry {v} in row {} is not 0/1",
                r + 1
            )));
        }
    }
    Ok(())
}

/// A finite subshift: states carry their original labels and sorted successor lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSubshift {
    labels: Vec<Symbol>,
    succ: Vec<Vec<usize>>,
}

impl FiniteSubshift {
    /// Builds from a 0/1 matrix over `{1..k}`, pruning stranded symbols.
    pub fn from_matrix(matrix: Vec<Vec<u8>>) -> Result<Self> {
        let k = matrix.len();
        let rule = TransitionRule::explicit(matrix)?;
        truncate(&rule, k)
    }

    /// Builds from explicit successor lists without pruning.
    ///
    /// Labels must be strictly increasing; successor lists are sorted here.
    pub fn from_successors(labels: Vec<Symbol>, mut succ: Vec<Vec<usize>>) -> Result<Self> {
        if labels.len() != succ.len() {
            return Err(Error::InvalidMatrix(
                "labels and successor lists differ in length".into(),
            ));
        }
        if labels.is_empty() {
            return Err(Error::InvalidMatrix("empty state set".into()));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMatrix(
                "labels must be strictly increasing".into(),
            ));
        }
        let n = labels.len();
        for row in succ.iter_mut() {
            row.sort_unstable();
            row.dedup();
            if row.iter().any(|&j| j >= n) {
                return Err(Error::InvalidMatrix("successor index out of range".into()));
            }
        }
        Ok(FiniteSubshift { labels, succ })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Original label of state index `i`.
    pub fn label(&self, i: usize) -> Symbol {
        self.labels[i]
    }

    /// Relabeling map: position `i` holds the original label of state `i`.
    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    pub fn index_of(&self, label: Symbol) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn allows_index(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    /// Admissibility of a transition between original labels.
    pub fn allows(&self, a: Symbol, b: Symbol) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.allows_index(i, j),
            _ => false,
        }
    }

    /// Dense 0/1 matrix in state order.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        let n = self.size();
        let mut m = vec![vec![0u8; n]; n];
        for (i, row) in self.succ.iter().enumerate() {
            for &j in row {
                m[i][j] = 1;
            }
        }
        m
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.size()];
        for (i, row) in self.succ.iter().enumerate() {
            for &j in row {
                pred[j].push(i);
            }
        }
        pred
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        if word.is_empty() {
            return false;
        }
        let mut idx = Vec::with_capacity(word.len());
        for &s in word {
            match self.index_of(s) {
                Some(i) => idx.push(i),
                None => return false,
            }
        }
        idx.windows(2).all(|w| self.allows_index(w[0], w[1]))
    }

    /// Converts a word of labels into state indices, checking admissibility.
    pub fn word_indices(&self, word: &Word) -> Result<Vec<usize>> {
        if !self.is_admissible(word.symbols()) {
            return Err(Error::NotAdmissible {
                word: word.0.clone(),
            });
        }
        Ok(word.0.iter().map(|&s| self.index_of(s).unwrap()).collect())
    }

    pub fn labels_of(&self, indices: &[usize]) -> Word {
        Word(indices.iter().map(|&i| self.labels[i]).collect())
    }

    fn reachable(&self, start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
        let mut seen = vec![false; self.size()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        let fwd = self.reachable(0, &self.succ);
        let bwd = self.reachable(0, &self.predecessors());
        fwd.iter().chain(bwd.iter()).all(|&b| b)
    }

    /// Strongly connected components (Kosaraju), each sorted, in order of smallest member.
    pub fn strong_components(&self) -> Vec<Vec<usize>> {
        let n = self.size();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            // iterative post-order
            let mut stack = vec![(s, 0usize)];
            seen[s] = true;
            while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
                if *pos < self.succ[u].len() {
                    let v = self.succ[u][*pos];
                    *pos += 1;
                    if !seen[v] {
                        seen[v] = true;
                        stack.push((v, 0));
                    }
                } else {
                    order.push(u);
                    stack.pop();
                }
            }
        }
        let pred = self.predecessors();
        let mut comp = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &pred[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// A closed class that is a proper subset of the states, if any.
    pub fn closed_proper_class(&self) -> Option<Vec<Symbol>> {
        let comps = self.strong_components();
        if comps.len() <= 1 {
            return None;
        }
        let mut comp_of = vec![0; self.size()];
        for (c, members) in comps.iter().enumerate() {
            for &m in members {
                comp_of[m] = c;
            }
        }
        comps
            .iter()
            .enumerate()
            .find(|(c, members)| {
                members
                    .iter()
                    .all(|&u| self.succ[u].iter().all(|&v| comp_of[v] == *c))
            })
            .map(|(_, members)| members.iter().map(|&i| self.labels[i]).collect())
    }

    /// Period of an irreducible subshift (gcd of cycle lengths).
    pub fn period(&self) -> Option<usize> {
        if !self.is_irreducible() {
            return None;
        }
        let n = self.size();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.succ[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..n {
            for &v in &self.succ[u] {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
        Some(g.max(1))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Restricts `rule` to `{1..k}` and prunes stranded symbols until fixpoint.
///
/// A symbol is stranded when its row or its column is empty within the
/// surviving alphabet.
pub fn truncate(rule: &TransitionRule, k: usize) -> Result<FiniteSubshift> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "truncation size must be at least 1".into(),
        ));
    }
    let mut alive: Vec<Symbol> = (1..=k).collect();
    loop {
        let keep: Vec<Symbol> = alive
            .iter()
            .copied()
            .filter(|&i| {
                alive.iter().any(|&j| rule.allows(i, j)) && alive.iter().any(|&j| rule.allows(j, i))
            })
            .collect();
        if keep.len() == alive.len() {
            break;
        }
        alive = keep;
        if alive.is_empty() {
            return Err(Error::TruncationTooSmall { k });
        }
    }
    let succ = alive
        .iter()
        .map(|&i| {
            alive
                .iter()
                .enumerate()
                .filter(|&(_, &j)| rule.allows(i, j))
                .map(|(idx, _)| idx)
                .collect()
        })
        .collect();
    Ok(FiniteSubshift {
        labels: alive,
        succ,
    })
}

/// All admissible words of length `n`, lexicographically ordered.
pub fn enumerate_words(s: &FiniteSubshift, n: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut path = Vec::with_capacity(n);
    for start in 0..s.size() {
        path.clear();
        path.push(start);
        extend_words(s, n, &mut path, &mut |p| out.push(s.labels_of(p)));
    }
    out
}

fn extend_words(
    s: &FiniteSubshift,
    n: usize,
    path: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if path.len() == n {
        emit(path);
        return;
    }
    let last = *path.last().unwrap();
    for &j in s.successors(last) {
        path.push(j);
        extend_words(s, n, path, emit);
        path.pop();
    }
}

/// Words of length `n` starting at `a` whose last symbol returns to `a`.
///
/// These are the closed loops through `a`, i.e. the periodic points of
/// period `n` in the cylinder `[a]`.
pub fn enumerate_periodic(s: &FiniteSubshift, n: usize, a: Symbol) -> Result<Vec<Word>> {
    let start = s.index_of(a).ok_or(Error::UnknownSymbol { symbol: a })?;
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    let mut path = vec![start];
    extend_words(s, n, &mut path, &mut |p| {
        if s.allows_index(p[p.len() - 1], start) {
            out.push(s.labels_of(p));
        }
    });
    Ok(out)
}

/// Topological mixing of the truncation: irreducible and aperiodic, which is
/// equivalent to `A^m > 0` for some `m <= (k-1)^2 + 1`.
pub fn is_mixing(s: &FiniteSubshift) -> bool {
    s.period() == Some(1)
}

/// The `b`-block recoding of a finite subshift.
///
/// States are the admissible `b`-words; `u -> v` iff `v` continues `u` by one
/// symbol. Block labels are `1..=N` in lexicographic order of the words.
#[derive(Clone, Debug)]
pub struct BlockShift {
    pub shift: FiniteSubshift,
    pub words: Vec<Word>,
}

impl BlockShift {
    pub fn word_of(&self, state: usize) -> &Word {
        &self.words[state]
    }
}

pub fn block_recode(s: &FiniteSubshift, b: usize) -> Result<BlockShift> {
    if b == 0 {
        return Err(Error::InvalidArgument(
            "block length must be at least 1".into(),
        ));
    }
    let words = enumerate_words(s, b);
    let index: std::collections::HashMap<&[Symbol], usize> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.symbols(), i))
        .collect();
    let succ = words
        .iter()
        .map(|w| {
            let last = s.index_of(w.last()).unwrap();
            s.successors(last)
                .iter()
                .filter_map(|&j| {
                    let mut next: Vec<Symbol> = w.symbols()[1..].to_vec();
                    next.push(s.label(j));
                    index.get(next.as_slice()).copied()
                })
                .collect()
        })
        .collect();
    let labels = (1..=words.len()).collect();
    Ok(BlockShift {
        shift: FiniteSubshift::from_successors(labels, succ)?,
        words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(v: &[&[usize]]) -> Vec<Word> {
        v.iter().map(|w| Word(w.to_vec())).collect()
    }

    #[test]
    fn full_shift_truncation_is_all_ones() {
        let s = truncate(&TransitionRule::full_shift(), 2).unwrap();
        assert_eq!(s.matrix(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn f_lambda_truncation_matches_containment() {
        let s = truncate(&TransitionRule::f_lambda(), 3).unwrap();
        assert_eq!(
            s.matrix(),
            vec![vec![1, 1, 1], vec![1, 1, 1], vec![0, 1, 1]]
        );
    }

    #[test]
    fn stranded_symbol_is_pruned() {
        let rule =
            TransitionRule::explicit(vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]).unwrap();
        let s = truncate(&rule, 3).unwrap();
        assert_eq!(s.matrix(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(s.labels(), &[1, 2]);
    }

    #[test]
    fn pruning_iterates_to_fixpoint() {
        // 4 has no predecessor; once it is gone, neither has 3.
        let m = vec![
            vec![1, 1, 0, 0],
            vec![1, 0, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
        ];
        let s = FiniteSubshift::from_matrix(m).unwrap();
        assert_eq!(s.labels(), &[1, 2]);
    }

    #[test]
    fn empty_truncation_is_an_error() {
        let rule = TransitionRule::explicit(vec![vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(truncate(&rule, 2), Err(Error::TruncationTooSmall { k: 2 }));
    }

    #[test]
    fn non_binary_matrix_rejected() {
        assert!(TransitionRule::explicit(vec![vec![2]]).is_err());
        assert!(TransitionRule::explicit(vec![vec![1, 1]]).is_err());
    }

    #[test]
    fn word_enumeration_examples() {
        let full = truncate(&TransitionRule::full_shift(), 2).unwrap();
        assert_eq!(enumerate_words(&full, 3).len(), 8);

        let fl = truncate(&TransitionRule::f_lambda(), 3).unwrap();
        assert_eq!(
            enumerate_words(&fl, 2),
            words(&[
                &[1, 1],
                &[1, 2],
                &[1, 3],
                &[2, 1],
                &[2, 2],
                &[2, 3],
                &[3, 2],
                &[3, 3]
            ])
        );

        let flip = FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(
            enumerate_words(&flip, 4),
            words(&[&[1, 2, 1, 2], &[2, 1, 2, 1]])
        );
    }

    #[test]
    fn periodic_enumeration_examples() {
        let full = truncate(&TransitionRule::full_shift(), 2).unwrap();
        assert_eq!(enumerate_periodic(&full, 3, 1).unwrap().len(), 4);

        let flip = FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(enumerate_periodic(&flip, 3, 1).unwrap().is_empty());

        let fl = truncate(&TransitionRule::f_lambda(), 3).unwrap();
        assert_eq!(
            enumerate_periodic(&fl, 2, 3).unwrap(),
            words(&[&[3, 2], &[3, 3]])
        );
        assert!(enumerate_periodic(&fl, 2, 9).is_err());
    }

    #[test]
    fn mixing_examples() {
        assert!(is_mixing(
            &truncate(&TransitionRule::full_shift(), 2).unwrap()
        ));
        assert!(!is_mixing(
            &FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 0]]).unwrap()
        ));
        assert!(is_mixing(
            &truncate(&TransitionRule::f_lambda(), 3).unwrap()
        ));
    }

    #[test]
    fn closed_class_reported_for_reducible_graph() {
        let s =
            FiniteSubshift::from_successors(vec![1, 2, 3], vec![vec![0, 1], vec![1, 2], vec![2]])
                .unwrap();
        assert!(!s.is_irreducible());
        assert_eq!(s.closed_proper_class(), Some(vec![3]));
        assert_eq!(s.strong_components(), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn block_recoding_of_golden_mean_shift() {
        let s = FiniteSubshift::from_matrix(vec![vec![0, 1], vec![1, 1]]).unwrap();
        let b = block_recode(&s, 2).unwrap();
        assert_eq!(b.words, words(&[&[1, 2], &[2, 1], &[2, 2]]));
        // (1,2) -> (2,1),(2,2); (2,1) -> (1,2); (2,2) -> (2,1),(2,2)
        assert_eq!(
            b.shift.matrix(),
            vec![vec![0, 1, 1], vec![1, 0, 0], vec![0, 1, 1]]
        );
    }
}

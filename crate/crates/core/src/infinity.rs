//! Entropy at infinity: excursion counting and escaping-measure lower bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::measure::MarkovMeasure;
use crate::shift::{FiniteSubshift, Symbol};

/// Counts of `q`-to-`q` words on a truncation, indexed by length and number of low symbols.
///
/// `counts[len][c]` is the number of admissible words of length `len` that
/// start and end in `{1..q}` and contain exactly `c` symbols `<= q`.
struct ExcursionTable {
    counts: Vec<Vec<u128>>,
}

impl ExcursionTable {
    fn build(s: &FiniteSubshift, q: Symbol, max_len: usize) -> Result<Self> {
        let n = s.size();
        let low: Vec<bool> = s.labels().iter().map(|&a| a <= q).collect();
        let width = max_len + 1;
        // cur[i * width + c]: words ending at state i with c low symbols.
        let mut cur = vec![0u128; n * width];
        for i in (0..n).filter(|&i| low[i]) {
            cur[i * width + 1] = 1;
        }
        let mut counts = vec![vec![0u128; width]; max_len + 1];
        for len in 1..=max_len {
            for i in (0..n).filter(|&i| low[i]) {
                for c in 0..width {
                    counts[len][c] += cur[i * width + c];
                }
            }
            if len == max_len {
                break;
            }
            let mut next = vec![0u128; n * width];
            for i in 0..n {
                for c in 0..len.min(width - 1) + 1 {
                    let x = cur[i * width + c];
                    if x == 0 {
                        continue;
                    }
                    for &j in s.successors(i) {
                        let cj = c + low[j] as usize;
                        let slot = &mut next[j * width + cj];
                        *slot = slot
                            .checked_add(x)
                            .ok_or(Error::CountOverflow { length: len + 1 })?;
                    }
                }
            }
            cur = next;
        }
        Ok(ExcursionTable { counts })
    }

    /// `z_n(M, q)`: words of length `n + 2` with at most `(n + 2) / M` low symbols.
    fn z(&self, m: usize, n: usize) -> Result<u128> {
        let len = n + 2;
        let cap = len / m;
        self.counts[len][..=cap.min(len)]
            .iter()
            .try_fold(0u128, |acc, &x| acc.checked_add(x))
            .ok_or(Error::CountOverflow { length: len })
    }
}

fn check_counting_args(k: usize, m: usize, q: Symbol) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if q == 0 || q > k {
        return Err(Error::InvalidArgument(format!(
            "q = {q} must lie in 1..={k}"
        )));
    }
    Ok(())
}

/// Number of cylinders `[w_1 .. w_{n+2}]` in the `k`-truncation with `w_1, w_{n+2} <= q`
/// and at most `(n + 2) / m` symbols `<= q`.
pub fn z_n_count(map: &MapSystem, k: usize, m: usize, q: Symbol, n: usize) -> Result<u128> {
    check_counting_args(k, m, q)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let s = map.derive_transitions(k)?;
    ExcursionTable::build(&s, q, n + 2)?.z(m, n)
}

/// Counting estimate of `delta_inf(M, q)` with its raw sequence.
#[derive(Clone, Debug, Serialize)]
pub struct CountingEntry {
    pub m: usize,
    pub q: Symbol,
    /// `(1/n) log z_n` for `n = 1..=n_max`; `-inf` where the count is zero.
    pub rates: Vec<f64>,
    /// Max of `rates` over the tail window, `None` when every count there is zero.
    pub estimate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingTable {
    pub k: usize,
    pub n_max: usize,
    /// Tail window length `ceil(n_max / 2)`.
    pub window: usize,
    pub entries: Vec<CountingEntry>,
    /// The entry at the largest `M` and largest `q`.
    pub corner: CountingEntry,
}

/// `delta_inf(M, q)` estimates over a grid, with the limsup taken as a max over the last
/// `ceil(n_max / 2)` values.
pub fn delta_inf_counting(
    map: &MapSystem,
    k: usize,
    m_list: &[usize],
    q_list: &[Symbol],
    n_max: usize,
) -> Result<CountingTable> {
    if m_list.is_empty() || q_list.is_empty() {
        return Err(Error::InvalidArgument(
            "M and q lists must be nonempty".into(),
        ));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    for &m in m_list {
        for &q in q_list {
            check_counting_args(k, m, q)?;
        }
    }
    let s = map.derive_transitions(k)?;
    let window = n_max.div_ceil(2);
    let mut entries = Vec::with_capacity(m_list.len() * q_list.len());
    for &q in q_list {
        let table = ExcursionTable::build(&s, q, n_max + 2)?;
        for &m in m_list {
            let rates = (1..=n_max)
                .map(|n| {
                    let z = table.z(m, n)?;
                    Ok(if z == 0 {
                        f64::NEG_INFINITY
                    } else {
                        (z as f64).ln() / n as f64
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let tail = rates[n_max - window..]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let estimate = tail.is_finite().then_some(tail);
            entries.push(CountingEntry {
                m,
                q,
                rates,
                estimate,
            });
        }
    }
    let (m_top, q_top) = (*m_list.iter().max().unwrap(), *q_list.iter().max().unwrap());
    let corner = entries
        .iter()
        .find(|e| e.m == m_top && e.q == q_top)
        .unwrap()
        .clone();
    Ok(CountingTable {
        k,
        n_max,
        window,
        entries,
        corner,
    })
}

/// A translated sequence of measures whose entropy escapes to infinity.
#[derive(Clone, Debug, Serialize)]
pub struct EscapeCertificate {
    #[serde(skip)]
    pub base: MarkovMeasure,
    /// Largest offset checked.
    pub offset: usize,
    /// Entropy of the base measure, shared by every translate.
    pub entropy: f64,
    pub depth: usize,
    /// Largest symbol counted as low: the top of the base alphabet.
    pub low_level: Symbol,
    /// `(offset, max mass of a low depth-cylinder)` in offset order.
    pub decay: Vec<(usize, f64)>,
    /// Max low-cylinder mass at the largest offset.
    pub max_cylinder_mass: f64,
    /// Nonincreasing masses ending below `1e-6`.
    pub decay_ok: bool,
    /// Only the zero offset was requested, so no decay was checked.
    pub degenerate: bool,
}

/// Translates `base` by each offset and checks that its mass leaves every low cylinder.
///
/// The translate by `n` gives `[w_1..w_d]` the mass of `[w_1 - n .. w_d - n]`.
/// Low cylinders are the depth-`depth` words over symbols up to the top of the
/// base alphabet.
pub fn delta_inf_lower_bound(
    map: &MapSystem,
    base: &MarkovMeasure,
    offsets: &[usize],
    depth: usize,
) -> Result<EscapeCertificate> {
    if offsets.is_empty() || depth == 0 {
        return Err(Error::InvalidArgument(
            "need at least one offset and depth >= 1".into(),
        ));
    }
    let s = base.shift();
    let rule = map.rule();
    let alphabet = map.alphabet_size();
    let low_level = *s.labels().iter().max().unwrap();
    let mut sorted = offsets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &n in &sorted {
        for i in 0..s.size() {
            for (e, &j) in s.successors(i).iter().enumerate() {
                if base.rows()[i][e] <= 0.0 {
                    continue;
                }
                let (a, b) = (s.label(i) + n, s.label(j) + n);
                let inside = alphabet.is_none_or(|size| a.max(b) <= size);
                if !inside || !rule.allows(a, b) {
                    return Err(Error::TranslationNotAdmissible {
                        offset: n,
                        from: a,
                        to: b,
                    });
                }
            }
        }
    }
    let mut decay = Vec::with_capacity(sorted.len());
    for &n in &sorted {
        let mut top = 0.0f64;
        base.for_each_word(depth, |path, mass| {
            if path.iter().all(|&i| s.label(i) + n <= low_level) {
                top = top.max(mass);
            }
        });
        decay.push((n, top));
    }
    let max_cylinder_mass = decay.last().unwrap().1;
    let degenerate = sorted == [0];
    let decay_ok =
        !degenerate && decay.windows(2).all(|w| w[1].1 <= w[0].1) && max_cylinder_mass < 1e-6;
    Ok(EscapeCertificate {
        base: base.clone(),
        offset: *sorted.last().unwrap(),
        entropy: base.entropy(),
        depth,
        low_level,
        decay,
        max_cylinder_mass,
        decay_ok,
        degenerate,
    })
}

/// Certificate built from the maximal-entropy measure of the `k`-truncation,
/// translated by `0, k/4, k/2, 3k/4, k` and checked at depth 2.
pub fn max_entropy_certificate(map: &MapSystem, k: usize) -> Result<EscapeCertificate> {
    let base = MarkovMeasure::max_entropy(map.derive_transitions(k)?)?;
    let offsets: Vec<usize> = (0..=4).map(|i| i * k / 4).collect();
    delta_inf_lower_bound(map, &base, &offsets, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{enumerate_words, truncate, TransitionRule};

    fn brute_z(s: &FiniteSubshift, m: usize, q: Symbol, n: usize) -> usize {
        enumerate_words(s, n + 2)
            .iter()
            .filter(|w| {
                let low = w.symbols().iter().filter(|&&a| a <= q).count();
                w.first() <= q && w.last() <= q && low <= (n + 2) / m
            })
            .count()
    }

    #[test]
    fn f_lambda_small_count() {
        let map = MapSystem::f_lambda(0.25).unwrap();
        assert_eq!(z_n_count(&map, 6, 2, 1, 2).unwrap(), 2);
    }

    #[test]
    fn dp_matches_enumeration() {
        let map = MapSystem::f_lambda(0.25).unwrap();
        let s = truncate(&TransitionRule::f_lambda(), 7).unwrap();
        for m in 1..4 {
            for q in 1..4 {
                for n in 1..6 {
                    let z = z_n_count(&map, 7, m, q, n).unwrap();
                    assert_eq!(z as usize, brute_z(&s, m, q, n), "M={m} q={q} n={n}");
                }
            }
        }
    }

    #[test]
    fn unconstrained_row_is_loop_counting() {
        let map = MapSystem::f_lambda(0.25).unwrap();
        let t = delta_inf_counting(&map, 30, &[1], &[1], 20).unwrap();
        let g = crate::thermo::topological_entropy(&map, 30, 21).unwrap();
        for n in 1..=20 {
            let from_loops = g.log_z[n] / n as f64;
            assert!(
                (t.entries[0].rates[n - 1] - from_loops).abs() < 1e-9,
                "n={n}"
            );
        }
    }

    #[test]
    fn finite_alphabet_has_no_excursions() {
        let map = MapSystem::base_n(3).unwrap();
        let t = delta_inf_counting(&map, 3, &[1, 2, 3], &[3], 10).unwrap();
        assert!(t
            .entries
            .iter()
            .filter(|e| e.m >= 2)
            .all(|e| e.estimate.is_none()));
        assert!(t.corner.estimate.is_none());
        let full = &t.entries[0];
        assert!((full.rates[9] - 12.0 * 3f64.ln() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn full_two_shift_with_all_low() {
        let map = MapSystem::base_n(2).unwrap();
        assert_eq!(z_n_count(&map, 2, 3, 2, 4).unwrap(), 0);
    }

    #[test]
    fn half_half_translate_certificate() {
        let map = MapSystem::f_lambda(0.25).unwrap();
        let s = truncate(&TransitionRule::f_lambda(), 2).unwrap();
        let base = MarkovMeasure::bernoulli(s, &[0.5, 0.5]).unwrap();
        let c = delta_inf_lower_bound(&map, &base, &[0, 1, 2, 3], 2).unwrap();
        assert!((c.entropy - 2f64.ln()).abs() < 1e-12);
        assert!(c.decay_ok);
        assert_eq!(c.decay[0].1, 0.25);
    }

    #[test]
    fn zero_offset_is_degenerate() {
        let map = MapSystem::f_lambda(0.25).unwrap();
        let s = truncate(&TransitionRule::f_lambda(), 2).unwrap();
        let base = MarkovMeasure::bernoulli(s, &[0.5, 0.5]).unwrap();
        let c = delta_inf_lower_bound(&map, &base, &[0], 2).unwrap();
        assert!(c.degenerate && !c.decay_ok);
    }

    #[test]
    fn finite_alphabet_rejects_translation() {
        let map = MapSystem::base_n(2).unwrap();
        let base = MarkovMeasure::max_entropy(map.derive_transitions(2).unwrap()).unwrap();
        assert!(matches!(
            delta_inf_lower_bound(&map, &base, &[1], 1),
            Err(Error::TranslationNotAdmissible { .. })
        ));
    }
}

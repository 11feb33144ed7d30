//! Locally constant potentials of finite order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{enumerate_words, FiniteSubshift, Symbol, Word};

/// A locally constant function on the shift depending on the first `order` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `1` on the cylinder `[symbol]`, `0` elsewhere.
    Indicator { symbol: Symbol },
    /// A constant, formally of the given order.
    Constant {
        value: f64,
        #[serde(default = "one")]
        order: usize,
    },
    /// `values[i - 1]` on `[i]`, zero beyond the end of the list.
    Symbolwise { values: Vec<f64> },
    /// Explicit table on words of length `order`; missing words map to zero.
    Table {
        order: usize,
        entries: Vec<TableEntry>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub word: Word,
    pub value: f64,
}

fn one() -> usize {
    1
}

impl Potential {
    pub fn indicator(symbol: Symbol) -> Self {
        Potential::Indicator { symbol }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        Potential::Constant {
            value,
            order: order.max(1),
        }
    }

    pub fn symbolwise(values: Vec<f64>) -> Self {
        Potential::Symbolwise { values }
    }

    pub fn table(order: usize, entries: Vec<(Word, f64)>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "potential order must be at least 1".into(),
            ));
        }
        if let Some((w, _)) = entries.iter().find(|(w, _)| w.len() != order) {
            return Err(Error::InvalidArgument(format!(
                "table entry {w} does not have length {order}"
            )));
        }
        Ok(Potential::Table {
            order,
            entries: entries
                .into_iter()
                .map(|(word, value)| TableEntry { word, value })
                .collect(),
        })
    }

    pub fn order(&self) -> usize {
        match self {
            Potential::Indicator { .. } | Potential::Symbolwise { .. } => 1,
            Potential::Constant { order, .. } => (*order).max(1),
            Potential::Table { order, .. } => *order,
        }
    }

    /// Value on any point whose coding starts with `word`.
    ///
    /// Panics if `word` is shorter than the order.
    pub fn eval(&self, word: &[Symbol]) -> f64 {
        assert!(
            word.len() >= self.order(),
            "word shorter than potential order"
        );
        match self {
            Potential::Indicator { symbol } => {
                if word[0] == *symbol {
                    1.0
                } else {
                    0.0
                }
            }
            Potential::Constant { value, .. } => *value,
            Potential::Symbolwise { values } => word[0]
                .checked_sub(1)
                .and_then(|i| values.get(i))
                .copied()
                .unwrap_or(0.0),
            Potential::Table { order, entries } => entries
                .iter()
                .find(|e| e.word.symbols() == &word[..*order])
                .map(|e| e.value)
                .unwrap_or(0.0),
        }
    }

    /// Whether the potential vanishes on all cylinders of large enough symbols.
    pub fn vanishes_at_infinity(&self) -> bool {
        match self {
            Potential::Constant { value, .. } => *value == 0.0,
            _ => true,
        }
    }

    /// Largest symbol on which the potential can be nonzero, if bounded.
    pub fn support_bound(&self) -> Option<Symbol> {
        match self {
            Potential::Indicator { symbol } => Some(*symbol),
            Potential::Constant { value, .. } => (*value == 0.0).then_some(0),
            Potential::Symbolwise { values } => Some(values.len()),
            Potential::Table { entries, .. } => Some(
                entries
                    .iter()
                    .flat_map(|e| e.word.symbols().iter().copied())
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    /// The table over every admissible word of length `order`, lexicographically.
    pub fn tabulate(&self, s: &FiniteSubshift) -> Vec<(Word, f64)> {
        enumerate_words(s, self.order())
            .into_iter()
            .map(|w| {
                let v = self.eval(w.symbols());
                (w, v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{truncate, TransitionRule};

    #[test]
    fn indicator_values() {
        let p = Potential::indicator(1);
        assert_eq!(p.eval(&[1, 2]), 1.0);
        assert_eq!(Potential::indicator(3).eval(&[1, 2]), 0.0);
    }

    #[test]
    fn table_covers_admissible_words() {
        let s = truncate(&TransitionRule::f_lambda(), 3).unwrap();
        let p = Potential::table(2, vec![(Word(vec![3, 2]), 0.5)]).unwrap();
        let t = p.tabulate(&s);
        assert_eq!(t.len(), 8);
        assert_eq!(t.iter().filter(|(_, v)| *v != 0.0).count(), 1);
    }

    #[test]
    fn table_rejects_wrong_lengths() {
        assert!(Potential::table(2, vec![(Word(vec![1]), 1.0)]).is_err());
    }

    #[test]
    fn json_shape() {
        let p: Potential = serde_json::from_str(r#"{"kind":"indicator","symbol":4}"#).unwrap();
        assert_eq!(p, Potential::indicator(4));
        let c: Potential = serde_json::from_str(r#"{"kind":"constant","value":2.0}"#).unwrap();
        assert_eq!(c.order(), 1);
        assert!(!c.vanishes_at_infinity());
    }
}

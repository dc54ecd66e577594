use std::collections::BTreeMap;
use std::fmt;

use super::rational::ComplexRational;

/// Highest supported mode index (modes `a` and `b`).
pub const MAX_MODES: usize = 2;

pub const MODE_NAMES: [&str; MAX_MODES] = ["a", "b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ladder {
    Create,
    Annihilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LadderOp {
    pub kind: Ladder,
    pub mode: usize,
}

impl LadderOp {
    pub fn create(mode: usize) -> Self {
        Self { kind: Ladder::Create, mode }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { kind: Ladder::Annihilate, mode }
    }

    pub fn dagger(self) -> Self {
        let kind = match self.kind {
            Ladder::Create => Ladder::Annihilate,
            Ladder::Annihilate => Ladder::Create,
        };
        Self { kind, mode: self.mode }
    }
}

/// A product of ladder operators, leftmost factor first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub Vec<LadderOp>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn ops(&self) -> &[LadderOp] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn creations(&self) -> usize {
        self.0.iter().filter(|o| o.kind == Ladder::Create).count()
    }

    pub fn annihilations(&self) -> usize {
        self.degree() - self.creations()
    }

    pub fn n_modes(&self) -> usize {
        self.0.iter().map(|o| o.mode + 1).max().unwrap_or(0)
    }

    pub fn dagger(&self) -> Word {
        Word(self.0.iter().rev().map(|o| o.dagger()).collect())
    }

    /// All creations (by mode) left of all annihilations (by mode).
    pub fn is_normal_ordered(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    fn first_disorder(&self) -> Option<usize> {
        self.0
            .windows(2)
            .position(|w| w[0].kind == Ladder::Annihilate && w[1].kind == Ladder::Create)
    }

    fn sorted(mut self) -> Word {
        self.0.sort();
        self
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            let op = self.0[i];
            let run = self.0[i..].iter().take_while(|&&o| o == op).count();
            if !first {
                f.write_str("*")?;
            }
            first = false;
            f.write_str(MODE_NAMES.get(op.mode).copied().unwrap_or("?"))?;
            if op.kind == Ladder::Create {
                f.write_str("dag")?;
            }
            if run > 1 {
                write!(f, "^{run}")?;
            }
            i += run;
        }
        Ok(())
    }
}

/// Polynomial in bosonic ladder operators.
///
/// Terms with identical words are merged and zero coefficients dropped, but
/// words are only normal-ordered by [`OperatorExpr::normal_order`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OperatorExpr {
    terms: BTreeMap<Word, ComplexRational>,
}

impl OperatorExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (ComplexRational, Word)>) -> Self {
        let mut e = Self::zero();
        for (c, w) in terms {
            e.add_term(c, w);
        }
        e
    }

    pub fn term(coefficient: ComplexRational, word: Word) -> Self {
        Self::from_terms([(coefficient, word)])
    }

    pub fn add_term(&mut self, coefficient: ComplexRational, word: Word) {
        if coefficient.is_zero() {
            return;
        }
        let slot = self.terms.entry(word).or_default();
        *slot += &coefficient;
        if slot.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn add(&self, other: &OperatorExpr) -> OperatorExpr {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(c.clone(), w.clone());
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &ComplexRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.terms.keys().map(Word::n_modes).max().unwrap_or(0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::degree).max().unwrap_or(0)
    }

    pub fn is_normal_ordered(&self) -> bool {
        self.terms.keys().all(Word::is_normal_ordered)
    }

    pub fn dagger(&self) -> OperatorExpr {
        Self::from_terms(self.terms.iter().map(|(w, c)| (c.conj(), w.dagger())))
    }

    pub fn normal_order(&self) -> OperatorExpr {
        normal_order(self)
    }

    pub fn is_hermitian(&self) -> bool {
        let e = self.normal_order();
        e == e.dagger().normal_order()
    }

    pub fn product(&self, other: &OperatorExpr) -> OperatorExpr {
        let mut out = OperatorExpr::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let mut w = w1.0.clone();
                w.extend_from_slice(&w2.0);
                out.add_term(c1 * c2, Word(w));
            }
        }
        out
    }
}

/// Rewrite every word with `[a_j, a_k†] = δ_jk` until creations precede
/// annihilations; factors within each block are sorted by mode.
pub fn normal_order(e: &OperatorExpr) -> OperatorExpr {
    let mut out = OperatorExpr::zero();
    let mut stack: Vec<(ComplexRational, Word)> = e.terms.iter().map(|(w, c)| (c.clone(), w.clone())).collect();
    while let Some((c, word)) = stack.pop() {
        match word.first_disorder() {
            None => out.add_term(c, word.sorted()),
            Some(i) => {
                let (lower, raise) = (word.0[i], word.0[i + 1]);
                let mut swapped = word.0.clone();
                swapped.swap(i, i + 1);
                if lower.mode == raise.mode {
                    let mut contracted = word.0.clone();
                    contracted.drain(i..i + 2);
                    stack.push((c.clone(), Word(contracted)));
                }
                stack.push((c, Word(swapped)));
            }
        }
    }
    out
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let negative = c.to_string().starts_with('-');
            let c = if negative && k > 0 { -c.clone() } else { c.clone() };
            if k > 0 {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            if w.0.is_empty() {
                write!(f, "{c}")?;
            } else if c == ComplexRational::one() {
                write!(f, "{w}")?;
            } else {
                write!(f, "{c}*{w}")?;
            }
        }
        Ok(())
    }
}

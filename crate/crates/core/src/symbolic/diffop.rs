//! Differential operators on the coherent-state projector.
//!
//! Variables are `α_k` (index `2k`) and `α_k*` (index `2k + 1`), treated as
//! independent. Every term is stored derivatives-left, `c ∂^d (x^m ·)`, which
//! is the divergence form a Fokker-Planck generator needs.

use std::collections::BTreeMap;
use std::fmt;

use super::expr::{Ladder, OperatorExpr, Word, MAX_MODES, MODE_NAMES};
use super::rational::ComplexRational;
use super::FpeError;

/// Exponents of `∂` and of the coordinates, one slot per variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiffMonomial {
    pub deriv: Vec<u32>,
    pub power: Vec<u32>,
}

impl DiffMonomial {
    fn unit(n_vars: usize) -> Self {
        Self { deriv: vec![0; n_vars], power: vec![0; n_vars] }
    }

    pub fn order(&self) -> u32 {
        self.deriv.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffOperator {
    n_modes: usize,
    terms: BTreeMap<DiffMonomial, ComplexRational>,
}

impl DiffOperator {
    pub fn zero(n_modes: usize) -> Self {
        Self { n_modes, terms: BTreeMap::new() }
    }

    pub fn identity(n_modes: usize) -> Self {
        let mut d = Self::zero(n_modes);
        d.add_term(DiffMonomial::unit(2 * n_modes), ComplexRational::one());
        d
    }

    /// Multiplication by the variable with index `var`.
    pub fn variable(n_modes: usize, var: usize) -> Self {
        let mut m = DiffMonomial::unit(2 * n_modes);
        m.power[var] = 1;
        let mut d = Self::zero(n_modes);
        d.add_term(m, ComplexRational::one());
        d
    }

    pub fn derivative(n_modes: usize, var: usize) -> Self {
        let mut m = DiffMonomial::unit(2 * n_modes);
        m.deriv[var] = 1;
        let mut d = Self::zero(n_modes);
        d.add_term(m, ComplexRational::one());
        d
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_vars(&self) -> usize {
        2 * self.n_modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DiffMonomial, &ComplexRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(DiffMonomial::order).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: DiffMonomial, c: ComplexRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m.clone()).or_default();
        *slot += &c;
        if slot.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &DiffOperator) -> DiffOperator {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &ComplexRational) -> DiffOperator {
        let mut out = Self::zero(self.n_modes);
        for (m, k) in &self.terms {
            out.add_term(m.clone(), k * c);
        }
        out
    }

    fn right_mul_variable(&self, var: usize) -> DiffOperator {
        let mut out = Self::zero(self.n_modes);
        for (m, c) in &self.terms {
            let mut m = m.clone();
            m.power[var] += 1;
            out.add_term(m, c.clone());
        }
        out
    }

    /// `∂^d x^m ∂_v = ∂^{d+e_v} x^m − m_v ∂^d x^{m−e_v}`.
    fn right_mul_derivative(&self, var: usize) -> DiffOperator {
        let mut out = Self::zero(self.n_modes);
        for (m, c) in &self.terms {
            let mut raised = m.clone();
            raised.deriv[var] += 1;
            out.add_term(raised, c.clone());
            let k = m.power[var];
            if k > 0 {
                let mut lowered = m.clone();
                lowered.power[var] -= 1;
                out.add_term(lowered, -(c * &ComplexRational::from_int(k as i64)));
            }
        }
        out
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &DiffOperator) -> DiffOperator {
        assert_eq!(self.n_modes, other.n_modes, "mode count mismatch");
        let mut out = Self::zero(self.n_modes);
        for (m, c) in &other.terms {
            let mut acc = self.clone();
            for (var, &k) in m.deriv.iter().enumerate() {
                for _ in 0..k {
                    acc = acc.right_mul_derivative(var);
                }
            }
            for (var, &k) in m.power.iter().enumerate() {
                for _ in 0..k {
                    acc = acc.right_mul_variable(var);
                }
            }
            out = out.add(&acc.scale(c));
        }
        out
    }
}

fn alpha(mode: usize) -> usize {
    2 * mode
}

fn alpha_conj(mode: usize) -> usize {
    2 * mode + 1
}

/// `â†Λ = (∂_α + α*)Λ`, `âΛ = αΛ`.
fn left_action_factor(n_modes: usize, op: super::expr::LadderOp) -> DiffOperator {
    match op.kind {
        Ladder::Create => DiffOperator::derivative(n_modes, alpha(op.mode))
            .add(&DiffOperator::variable(n_modes, alpha_conj(op.mode))),
        Ladder::Annihilate => DiffOperator::variable(n_modes, alpha(op.mode)),
    }
}

/// `Λâ† = α*Λ`, `Λâ = (∂_α* + α)Λ`.
fn right_action_factor(n_modes: usize, op: super::expr::LadderOp) -> DiffOperator {
    match op.kind {
        Ladder::Create => DiffOperator::variable(n_modes, alpha_conj(op.mode)),
        Ladder::Annihilate => DiffOperator::derivative(n_modes, alpha_conj(op.mode))
            .add(&DiffOperator::variable(n_modes, alpha(op.mode))),
    }
}

/// Differential form of `w Λ`. Operators nearest `Λ` act first, so the
/// factors compose in reverse word order.
pub fn left_action(n_modes: usize, word: &Word) -> DiffOperator {
    word.ops()
        .iter()
        .rev()
        .fold(DiffOperator::identity(n_modes), |acc, &op| acc.compose(&left_action_factor(n_modes, op)))
}

/// Differential form of `Λ w`.
pub fn right_action(n_modes: usize, word: &Word) -> DiffOperator {
    word.ops()
        .iter()
        .fold(DiffOperator::identity(n_modes), |acc, &op| acc.compose(&right_action_factor(n_modes, op)))
}

/// Generator `ℒ` of `dQ/dτ = ℒ Q` for `dQ/dτ = i Tr{[H, Λ] ρ}`.
pub fn commutator_action(h: &OperatorExpr) -> Result<DiffOperator, FpeError> {
    let n_modes = h.n_modes().max(1);
    if n_modes > MAX_MODES {
        return Err(FpeError::TooManyModes(n_modes));
    }
    let h = h.normal_order();
    if !h.is_hermitian() {
        return Err(FpeError::NotHermitian(h.to_string()));
    }
    let mut generator = DiffOperator::zero(n_modes);
    for (word, c) in h.terms() {
        let diff = left_action(n_modes, word).add(&right_action(n_modes, word).scale(&ComplexRational::from_int(-1)));
        generator = generator.add(&diff.scale(c));
    }
    Ok(generator.scale(&ComplexRational::i()))
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names: Vec<String> = (0..self.n_modes)
            .flat_map(|k| {
                let base = if self.n_modes == 1 { "α".to_string() } else { format!("α{}", MODE_NAMES[k]) };
                [base.clone(), format!("{base}*")]
            })
            .collect();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}")?;
            for (v, &e) in m.deriv.iter().enumerate() {
                for _ in 0..e {
                    write!(f, "∂[{}]", names[v])?;
                }
            }
            for (v, &e) in m.power.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "·{}", names[v])?,
                    _ => write!(f, "·{}^{e}", names[v])?,
                }
            }
        }
        Ok(())
    }
}

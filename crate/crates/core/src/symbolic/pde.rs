//! Real-coordinate generalized Fokker-Planck equations
//! `dQ/dτ = ∂_μ[−A^μ + ½ ∂_ν D^{μν}] Q`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::diffop::DiffOperator;
use super::rational::{format_rational, parse_rational_text, rat, rational_to_f64, ComplexRational, Rational};
use super::FpeError;
use crate::phase_space::QuadratureConvention;

/// Polynomial with exact real coefficients in the PDE's coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RealPoly {
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl RealPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(n_vars: usize, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![0; n_vars], c);
        p
    }

    pub fn add_term(&mut self, powers: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(powers.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&powers);
        }
    }

    pub fn add(&self, other: &RealPoly) -> RealPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    /// Value when the polynomial has no coordinate dependence.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.iter().all(|&e| e == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter()
                    .zip(point)
                    .fold(rational_to_f64(c), |acc, (&e, &x)| acc * x.powi(e as i32))
            })
            .sum()
    }

    pub fn partial(&self, var: usize) -> RealPoly {
        let mut out = RealPoly::zero();
        for (m, c) in &self.terms {
            if m[var] > 0 {
                let mut m2 = m.clone();
                m2[var] -= 1;
                out.add_term(m2, c * Rational::from_integer(m[var].into()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionSign {
    /// `D^μ > 0`: bound in the past, integrated forward.
    Forward,
    /// `D^μ < 0`: bound in the future, integrated backward.
    Backward,
    DriftOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSpacePDE {
    convention: QuadratureConvention,
    variables: Vec<String>,
    drift: Vec<RealPoly>,
    diffusion: Vec<Vec<RealPoly>>,
}

impl PhaseSpacePDE {
    pub fn zero(n_modes: usize, convention: QuadratureConvention) -> Self {
        let variables = variable_names(n_modes, convention);
        let n = variables.len();
        Self { convention, variables, drift: vec![RealPoly::zero(); n], diffusion: vec![vec![RealPoly::zero(); n]; n] }
    }

    /// Build from constant diagonal diffusion and linear drift
    /// `A^μ = Σ_ν slopes[μ][ν] φ^ν`; convenient for hand-written models.
    pub fn linear(
        n_modes: usize,
        convention: QuadratureConvention,
        slopes: &[Vec<Rational>],
        diffusion: &[Rational],
    ) -> Self {
        let mut pde = Self::zero(n_modes, convention);
        let n = pde.variables.len();
        for mu in 0..n {
            for nu in 0..n {
                let mut powers = vec![0; n];
                powers[nu] = 1;
                pde.drift[mu].add_term(powers, slopes[mu][nu].clone());
            }
            pde.diffusion[mu][mu] = RealPoly::constant(n, diffusion[mu].clone());
        }
        pde
    }

    pub fn convention(&self) -> QuadratureConvention {
        self.convention
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn drift(&self) -> &[RealPoly] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Vec<RealPoly>] {
        &self.diffusion
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn is_zero(&self) -> bool {
        self.drift.iter().all(RealPoly::is_zero) && self.diffusion.iter().flatten().all(RealPoly::is_zero)
    }

    pub fn diffusion_trace(&self) -> RealPoly {
        (0..self.n_vars()).fold(RealPoly::zero(), |acc, mu| acc.add(&self.diffusion[mu][mu]))
    }

    /// Exact check of `Σ_μ D^{μμ} = 0`.
    pub fn is_trace_free(&self) -> bool {
        self.diffusion_trace().is_zero()
    }

    /// `D^μ` when the diffusion matrix is diagonal with constant entries.
    pub fn constant_diagonal_diffusion(&self) -> Result<Vec<Rational>, FpeError> {
        let n = self.n_vars();
        let mut out = Vec::with_capacity(n);
        for mu in 0..n {
            for nu in 0..n {
                if mu != nu && !self.diffusion[mu][nu].is_zero() {
                    return Err(FpeError::NonDiagonalDiffusion);
                }
            }
            out.push(self.diffusion[mu][mu].as_constant().ok_or(FpeError::NonConstantDiffusion)?);
        }
        Ok(out)
    }

    pub fn sign_split(&self) -> Result<Vec<DiffusionSign>, FpeError> {
        Ok(self
            .constant_diagonal_diffusion()?
            .iter()
            .map(|d| {
                if d.is_positive() {
                    DiffusionSign::Forward
                } else if d.is_negative() {
                    DiffusionSign::Backward
                } else {
                    DiffusionSign::DriftOnly
                }
            })
            .collect())
    }

    pub fn drift_at(&self, point: &[f64]) -> Vec<f64> {
        self.drift.iter().map(|a| a.eval(point)).collect()
    }

    /// `∂A^μ/∂φ^ν` as polynomials.
    pub fn drift_jacobian(&self) -> Vec<Vec<RealPoly>> {
        self.drift
            .iter()
            .map(|a| (0..self.n_vars()).map(|nu| a.partial(nu)).collect())
            .collect()
    }

    /// True when every drift component is at most linear.
    pub fn has_linear_drift(&self) -> bool {
        self.drift.iter().all(|a| a.degree() <= 1)
    }

    /// Right-hand side `ℒf` at `point`, with derivatives of `A f` and `D f`
    /// taken by central differences of step `h` (error `O(h²)`).
    pub fn rhs_at(&self, f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> f64 {
        let n = self.n_vars();
        let shifted = |offsets: &[(usize, f64)]| {
            let mut p = point.to_vec();
            for &(i, d) in offsets {
                p[i] += d;
            }
            p
        };
        let mut total = 0.0;
        for mu in 0..n {
            let a = &self.drift[mu];
            if !a.is_zero() {
                let g = |p: &[f64]| a.eval(p) * f(p);
                total -= (g(&shifted(&[(mu, h)])) - g(&shifted(&[(mu, -h)]))) / (2.0 * h);
            }
            for nu in 0..n {
                let d = &self.diffusion[mu][nu];
                if d.is_zero() {
                    continue;
                }
                let g = |p: &[f64]| d.eval(p) * f(p);
                let second = if mu == nu {
                    (g(&shifted(&[(mu, h)])) - 2.0 * g(point) + g(&shifted(&[(mu, -h)]))) / (h * h)
                } else {
                    (g(&shifted(&[(mu, h), (nu, h)])) - g(&shifted(&[(mu, h), (nu, -h)]))
                        - g(&shifted(&[(mu, -h), (nu, h)]))
                        + g(&shifted(&[(mu, -h), (nu, -h)])))
                        / (4.0 * h * h)
                };
                total += 0.5 * second;
            }
        }
        total
    }

    /// Canonical one-line rendering, e.g.
    /// `dQ/dτ = [∂p·p + ∂p² − ∂q·q − ∂q²] Q`.
    pub fn pretty(&self) -> String {
        pretty_print(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PdeDocument::from(self)).expect("PDE document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FpeError> {
        let doc: PdeDocument = serde_json::from_str(text).map_err(|e| FpeError::Json(e.to_string()))?;
        doc.try_into()
    }
}

fn variable_names(n_modes: usize, convention: QuadratureConvention) -> Vec<String> {
    (0..n_modes)
        .flat_map(|k| {
            let (a, b) = convention.coordinate_names(if n_modes == 1 { None } else { Some(k) });
            [a, b]
        })
        .collect()
}

/// Polynomial over commuting symbols with complex-rational coefficients;
/// used for both the coordinate and the derivative factors during the change
/// of variables.
type ComplexPoly = BTreeMap<Vec<u32>, ComplexRational>;

fn poly_mul_linear(p: &ComplexPoly, form: &[(usize, ComplexRational)]) -> ComplexPoly {
    let mut out = ComplexPoly::new();
    for (m, c) in p {
        for (var, k) in form {
            let mut m2 = m.clone();
            m2[*var] += 1;
            let slot = out.entry(m2).or_default();
            *slot += &(c * k);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Change variables to real coordinates and collect drift and diffusion.
///
/// With `α = s(u + iv)` (`s = 1` for amplitude parts, `s = ½` for operator
/// quadratures), `∂_α = (∂_u − i∂_v)/2s` and `∂_α* = (∂_u + i∂_v)/2s`.
pub fn to_phase_space_pde(d: &DiffOperator, convention: QuadratureConvention) -> Result<PhaseSpacePDE, FpeError> {
    let n_modes = d.n_modes();
    let n = 2 * n_modes;
    for (m, c) in d.terms() {
        if m.order() > 2 {
            return Err(FpeError::Order { order: m.order(), term: one_term(n_modes, m, c).to_string() });
        }
    }
    let s = match convention {
        QuadratureConvention::AmplitudeParts => Rational::one(),
        QuadratureConvention::OperatorQuadratures => rat(1, 2),
    };
    let half_over_s = rat(1, 2) / s.clone();
    let re = |r: &Rational| ComplexRational::real(r.clone());
    let im = |r: &Rational| ComplexRational::imag(r.clone());

    // real symbol layout: [∂u_0, ∂v_0, ..., u_0, v_0, ...]
    let mut combined: BTreeMap<Vec<u32>, ComplexRational> = BTreeMap::new();
    for (m, c) in d.terms() {
        let mut poly: ComplexPoly = ComplexPoly::new();
        poly.insert(vec![0; 2 * n], c.clone());
        for k in 0..n_modes {
            let (u, v) = (2 * k, 2 * k + 1);
            let d_alpha = [(u, re(&half_over_s)), (v, -im(&half_over_s))];
            let d_alpha_conj = [(u, re(&half_over_s)), (v, im(&half_over_s))];
            let x_alpha = [(n + u, re(&s)), (n + v, im(&s))];
            let x_alpha_conj = [(n + u, re(&s)), (n + v, -im(&s))];
            for _ in 0..m.deriv[2 * k] {
                poly = poly_mul_linear(&poly, &d_alpha);
            }
            for _ in 0..m.deriv[2 * k + 1] {
                poly = poly_mul_linear(&poly, &d_alpha_conj);
            }
            for _ in 0..m.power[2 * k] {
                poly = poly_mul_linear(&poly, &x_alpha);
            }
            for _ in 0..m.power[2 * k + 1] {
                poly = poly_mul_linear(&poly, &x_alpha_conj);
            }
        }
        for (key, val) in poly {
            let slot = combined.entry(key).or_default();
            *slot += &val;
        }
    }
    combined.retain(|_, c| !c.is_zero());

    let mut pde = PhaseSpacePDE::zero(n_modes, convention);
    for (key, c) in combined {
        let (dpart, xpart) = key.split_at(n);
        if !c.is_real() {
            return Err(FpeError::NonReal(format!("coefficient {c} on derivative {dpart:?}, monomial {xpart:?}")));
        }
        let c = c.re;
        let order: u32 = dpart.iter().sum();
        let vars: Vec<usize> = dpart
            .iter()
            .enumerate()
            .flat_map(|(v, &e)| std::iter::repeat_n(v, e as usize))
            .collect();
        match order {
            0 => return Err(FpeError::Source(format!("{} · {:?}", format_rational(&c), xpart))),
            1 => pde.drift[vars[0]].add_term(xpart.to_vec(), -c),
            2 => {
                let (mu, nu) = (vars[0], vars[1]);
                if mu == nu {
                    pde.diffusion[mu][mu].add_term(xpart.to_vec(), c * Rational::from_integer(2.into()));
                } else {
                    pde.diffusion[mu][nu].add_term(xpart.to_vec(), c.clone());
                    pde.diffusion[nu][mu].add_term(xpart.to_vec(), c);
                }
            }
            _ => unreachable!("order checked above"),
        }
    }
    Ok(pde)
}

fn one_term(n_modes: usize, m: &super::diffop::DiffMonomial, c: &ComplexRational) -> DiffOperator {
    let mut out = DiffOperator::identity(n_modes).scale(c);
    for (v, &e) in m.deriv.iter().enumerate() {
        for _ in 0..e {
            out = out.compose(&DiffOperator::derivative(n_modes, v));
        }
    }
    for (v, &e) in m.power.iter().enumerate() {
        for _ in 0..e {
            out = out.compose(&DiffOperator::variable(n_modes, v));
        }
    }
    out
}

const SUPERSCRIPTS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];

fn superscript(n: u32) -> String {
    n.to_string().bytes().map(|b| SUPERSCRIPTS[(b - b'0') as usize]).collect()
}

fn format_monomial(names: &[String], powers: &[u32]) -> String {
    let mut s = String::new();
    for (name, &e) in names.iter().zip(powers) {
        match e {
            0 => {}
            1 => s.push_str(name),
            _ => {
                s.push_str(name);
                s.push_str(&superscript(e));
            }
        }
    }
    s
}

/// Display rank of a coordinate: per mode, the imaginary-part coordinate
/// (`p`) precedes the real-part one (`q`).
fn display_rank(var: usize) -> usize {
    let mode = var / 2;
    2 * mode + if var % 2 == 1 { 0 } else { 1 }
}

pub fn pretty_print(pde: &PhaseSpacePDE) -> String {
    let names = pde.variables();
    let n = pde.n_vars();
    // (primary rank, order, secondary rank, monomial) -> coefficient
    let mut terms: Vec<((usize, u32, usize, Vec<u32>), Rational, String)> = Vec::new();
    for mu in 0..n {
        for (m, c) in pde.drift[mu].terms() {
            let label = format!("∂{}", names[mu]);
            terms.push(((display_rank(mu), 1, 0, m.clone()), -c.clone(), label));
        }
        for nu in 0..n {
            for (m, c) in pde.diffusion[mu][nu].terms() {
                let (coef, label, first, second) = if mu == nu {
                    (c / Rational::from_integer(2.into()), format!("∂{}²", names[mu]), mu, mu)
                } else if display_rank(mu) < display_rank(nu) {
                    (c.clone(), format!("∂{}∂{}", names[mu], names[nu]), mu, nu)
                } else {
                    continue;
                };
                terms.push(((display_rank(first), 2, display_rank(second), m.clone()), coef, label));
            }
        }
    }
    terms.retain(|t| !t.1.is_zero());
    if terms.is_empty() {
        return "dQ/dτ = 0".to_string();
    }
    terms.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| b.0 .3.iter().sum::<u32>().cmp(&a.0 .3.iter().sum::<u32>())));
    let mut out = String::from("dQ/dτ = [");
    for (k, (key, coef, label)) in terms.iter().enumerate() {
        let negative = coef.is_negative();
        match (k, negative) {
            (0, true) => out.push('−'),
            (0, false) => {}
            (_, true) => out.push_str(" − "),
            (_, false) => out.push_str(" + "),
        }
        let mag = coef.abs();
        if !mag.is_one() {
            out.push_str(&format_rational(&mag));
        }
        out.push_str(label);
        let mono = format_monomial(names, &key.3);
        if !mono.is_empty() {
            let _ = write!(out, "·{mono}");
        }
    }
    out.push_str("] Q");
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct PolyTerm {
    coefficient: String,
    powers: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PdeDocument {
    convention: QuadratureConvention,
    variables: Vec<String>,
    drift: Vec<Vec<PolyTerm>>,
    diffusion: Vec<Vec<Vec<PolyTerm>>>,
}

fn poly_to_doc(p: &RealPoly) -> Vec<PolyTerm> {
    p.terms()
        .map(|(m, c)| PolyTerm { coefficient: format_rational(c), powers: m.clone() })
        .collect()
}

fn poly_from_doc(terms: &[PolyTerm], n: usize) -> Result<RealPoly, FpeError> {
    let mut p = RealPoly::zero();
    for t in terms {
        if t.powers.len() != n {
            return Err(FpeError::Json(format!("monomial has {} powers, expected {n}", t.powers.len())));
        }
        let c = parse_rational_text(&t.coefficient)
            .ok_or_else(|| FpeError::Json(format!("bad coefficient '{}'", t.coefficient)))?;
        p.add_term(t.powers.clone(), c);
    }
    Ok(p)
}

impl From<&PhaseSpacePDE> for PdeDocument {
    fn from(p: &PhaseSpacePDE) -> Self {
        Self {
            convention: p.convention,
            variables: p.variables.clone(),
            drift: p.drift.iter().map(poly_to_doc).collect(),
            diffusion: p.diffusion.iter().map(|row| row.iter().map(poly_to_doc).collect()).collect(),
        }
    }
}

impl TryFrom<PdeDocument> for PhaseSpacePDE {
    type Error = FpeError;

    fn try_from(doc: PdeDocument) -> Result<Self, FpeError> {
        let n = doc.variables.len();
        if n == 0 || !n.is_multiple_of(2) || doc.drift.len() != n || doc.diffusion.len() != n || doc.diffusion.iter().any(|r| r.len() != n) {
            return Err(FpeError::Json("inconsistent dimensions".into()));
        }
        Ok(Self {
            convention: doc.convention,
            variables: doc.variables,
            drift: doc.drift.iter().map(|t| poly_from_doc(t, n)).collect::<Result<_, _>>()?,
            diffusion: doc
                .diffusion
                .iter()
                .map(|row| row.iter().map(|t| poly_from_doc(t, n)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::rational::rat_int;
    use crate::symbolic::{compile, compile_text, parse_hamiltonian, CompileError, OperatorExpr, Word};
    use proptest::prelude::*;

    const OQ: QuadratureConvention = QuadratureConvention::OperatorQuadratures;

    fn amplifier() -> PhaseSpacePDE {
        compile_text("0.5i*adag^2 - 0.5i*a^2", OQ).unwrap()
    }

    #[test]
    fn amplifier_golden() {
        let pde = amplifier();
        assert_eq!(pde.variables(), ["q", "p"]);
        assert_eq!(pde.pretty(), "dQ/dτ = [∂p·p + ∂p² − ∂q·q − ∂q²] Q");
        assert_eq!(pde.constant_diagonal_diffusion().unwrap(), vec![rat_int(-2), rat_int(2)]);
        assert_eq!(pde.drift_at(&[0.7, -1.3]), vec![0.7, 1.3]);
        assert_eq!(pde.sign_split().unwrap(), vec![DiffusionSign::Backward, DiffusionSign::Forward]);
        assert!(pde.is_trace_free());
    }

    #[test]
    fn amplifier_in_amplitude_parts() {
        let pde = compile_text("0.5i*adag^2 - 0.5i*a^2", QuadratureConvention::AmplitudeParts).unwrap();
        assert_eq!(pde.variables(), ["x", "y"]);
        assert_eq!(pde.constant_diagonal_diffusion().unwrap(), vec![rat(-1, 2), rat(1, 2)]);
        assert_eq!(pde.drift_at(&[2.0, 3.0]), vec![2.0, -3.0]);
    }

    #[test]
    fn zero_and_rotation() {
        let zero = compile(&OperatorExpr::zero(), OQ).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.pretty(), "dQ/dτ = 0");
        let rot = compile_text("adag a", OQ).unwrap();
        assert_eq!(rot.pretty(), "dQ/dτ = [∂p·q − ∂q·p] Q");
        let rot2 = compile_text("2 adag a", OQ).unwrap();
        assert_eq!(rot2.pretty(), "dQ/dτ = [2∂p·q − 2∂q·p] Q");
        assert!(rot.constant_diagonal_diffusion().unwrap().iter().all(Zero::is_zero));
    }

    #[test]
    fn cubic_is_rejected() {
        let err = compile_text("adag^3 + a^3", OQ).unwrap_err();
        assert!(matches!(err, CompileError::Fpe(FpeError::Order { order: 3, .. })), "{err}");
        // The lower-level path reports the same failure.
        let gen = crate::symbolic::commutator_action(&parse_hamiltonian("adag^3 + a^3").unwrap()).unwrap();
        assert!(matches!(to_phase_space_pde(&gen, OQ), Err(FpeError::Order { order: 3, .. })));
    }

    #[test]
    fn kerr_has_polynomial_diffusion() {
        let pde = compile_text("adag^2 a^2", OQ).unwrap();
        assert!(pde.is_trace_free());
        assert!(pde.constant_diagonal_diffusion().is_err());
        assert_eq!(pde.diffusion()[0][0].degree(), 2);
        assert!(!pde.diffusion()[0][1].is_zero());
    }

    #[test]
    fn json_round_trip() {
        for text in ["0.5i*adag^2 - 0.5i*a^2", "adag a + 1/3 adag^2 a^2", "adag b + bdag a + 0.25 adag^2 b^2 + 0.25 bdag^2 a^2"] {
            let pde = compile_text(text, OQ).unwrap();
            let back = PhaseSpacePDE::from_json(&pde.to_json()).unwrap();
            assert_eq!(back, pde);
            assert_eq!(back.pretty(), pde.pretty());
        }
        assert!(PhaseSpacePDE::from_json("{}").is_err());
    }

    #[test]
    fn two_mode_names() {
        let pde = compile_text("adag b + bdag a", OQ).unwrap();
        assert_eq!(pde.variables(), ["q1", "p1", "q2", "p2"]);
        assert!(!pde.is_zero() && pde.has_linear_drift());
    }

    #[test]
    fn finite_difference_rhs_matches_linear_form() {
        // For A = (q, −p), D = (−2, 2): ℒf = −∂q(q f) + ∂p(p f) − ∂q² f + ∂p² f.
        let pde = amplifier();
        let f = |x: &[f64]| (-(x[0] * x[0]) / 3.0 - (x[1] - 0.2).powi(2) / 5.0).exp();
        let pt = [0.4, -0.3];
        let (q, p) = (pt[0], pt[1]);
        let fv = f(&pt);
        let fq = -2.0 * q / 3.0 * fv;
        let fp = -2.0 * (p - 0.2) / 5.0 * fv;
        let fqq = (-2.0 / 3.0 + (2.0 * q / 3.0).powi(2)) * fv;
        let fpp = (-2.0 / 5.0 + (2.0 * (p - 0.2) / 5.0).powi(2)) * fv;
        let exact = -(fv + q * fq) + (fv + p * fp) - fqq + fpp;
        assert!((pde.rhs_at(f, &pt, 1e-3) - exact).abs() < 1e-5);
    }

    fn arb_coeff() -> impl Strategy<Value = ComplexRational> {
        (-6i64..=6, 1i64..=4, -6i64..=6, 1i64..=4).prop_map(|(a, b, c, d)| ComplexRational::new(rat(a, b), rat(c, d)))
    }

    /// Normal-ordered words with at most two creations and two annihilations.
    fn arb_word(n_modes: usize) -> impl Strategy<Value = Word> {
        let op = move || (0..n_modes).prop_map(|m| m);
        (proptest::collection::vec(op(), 0..=2), proptest::collection::vec(op(), 0..=2)).prop_map(|(c, a)| {
            let mut ops: Vec<_> = c.into_iter().map(crate::symbolic::LadderOp::create).collect();
            ops.extend(a.into_iter().map(crate::symbolic::LadderOp::annihilate));
            Word(ops)
        })
    }

    fn arb_hermitian() -> impl Strategy<Value = OperatorExpr> {
        (1usize..=2).prop_flat_map(|n| {
            proptest::collection::vec((arb_coeff(), arb_word(n)), 1..5).prop_map(|terms| {
                let e = OperatorExpr::from_terms(terms);
                e.add(&e.dagger()).normal_order()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn hermitian_quartics_have_trace_free_real_pde(h in arb_hermitian()) {
            prop_assert!(h.is_hermitian());
            let pde = compile(&h, OQ).unwrap();
            prop_assert!(pde.is_trace_free());
            let back = PhaseSpacePDE::from_json(&pde.to_json()).unwrap();
            prop_assert_eq!(back, pde);
        }
    }
}

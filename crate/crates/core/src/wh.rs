//! Exact symbolic engine for Weyl–Heisenberg words.
//!
//! A word is kept in the canonical form `c · Π_j Z_j(t_j) X_j(s_j)` with
//! `X(s) = e^{-isp}`, `Z(t) = e^{itx}`, modes in increasing order and `Z`
//! before `X` inside a mode. The only rewriting rule is
//! `X(s) Z(t) = e^{-ist} Z(t) X(s)`, which follows from `[x, p] = i`. Every
//! other scalar factor in this crate (stabilizer commutation, conjugation
//! through Gaussian gates and the cubic phase) is derived from that rule and
//! from BCH splitting of exponentials with a central commutator.
//!
//! Displacement parameters are complex. Finite squeezing produces imaginary
//! displacements and non-unimodular scalars, so the scalar is stored as its
//! logarithm.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::ops::{Mul, MulAssign};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::StabilizerGen;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A scalar held in log form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scalar {
    pub log: Complex64,
}

impl Scalar {
    pub const ONE: Scalar = Scalar { log: ZERO };

    pub fn from_log(log: Complex64) -> Self {
        Scalar { log }
    }

    pub fn value(self) -> Complex64 {
        self.log.exp()
    }

    /// Unit-modulus part `e^{i Im log}`.
    pub fn phase(self) -> Complex64 {
        Complex64::from_polar(1.0, self.log.im)
    }

    /// `ln |c|`.
    pub fn log_modulus(self) -> f64 {
        self.log.re
    }

    pub fn inv(self) -> Self {
        Scalar { log: -self.log }
    }

    /// Same complex number as `other` up to `tol` (relative to the larger modulus,
    /// floored at 1).
    pub fn approx_eq(self, other: Scalar, tol: f64) -> bool {
        let (a, b) = (self.value(), other.value());
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
    }
}

// Stored as a logarithm, so products add.
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar {
            log: self.log + rhs.log,
        }
    }
}

#[allow(clippy::suspicious_op_assign_impl)]
impl MulAssign for Scalar {
    fn mul_assign(&mut self, rhs: Scalar) {
        self.log += rhs.log;
    }
}

/// A single displacement factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    Z { mode: usize, t: Complex64 },
    X { mode: usize, s: Complex64 },
}

impl Factor {
    pub fn z(mode: usize, t: impl Into<Complex64>) -> Self {
        Factor::Z { mode, t: t.into() }
    }

    pub fn x(mode: usize, s: impl Into<Complex64>) -> Self {
        Factor::X { mode, s: s.into() }
    }

    pub fn mode(&self) -> usize {
        match *self {
            Factor::Z { mode, .. } | Factor::X { mode, .. } => mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WHWord {
    pub scalar: Scalar,
    /// mode → (t, s) for `Z(t) X(s)`.
    pub modes: BTreeMap<usize, (Complex64, Complex64)>,
}

impl WHWord {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(f: Factor) -> Self {
        let mut w = Self::identity();
        w.push(f);
        w
    }

    pub fn is_identity(&self) -> bool {
        self.modes.is_empty() && self.scalar.log == ZERO
    }

    /// Displacement part is empty (the scalar may be anything).
    pub fn is_scalar(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn t(&self, mode: usize) -> Complex64 {
        self.modes.get(&mode).map_or(ZERO, |p| p.0)
    }

    pub fn s(&self, mode: usize) -> Complex64 {
        self.modes.get(&mode).map_or(ZERO, |p| p.1)
    }

    /// Right-multiplies by one factor and restores canonical form.
    pub fn push(&mut self, f: Factor) {
        match f {
            Factor::Z { mode, t } => match self.modes.get_mut(&mode) {
                Some((t0, s0)) => {
                    // X(s0) Z(t) = e^{-i s0 t} Z(t) X(s0)
                    self.scalar.log += -I * *s0 * t;
                    *t0 += t;
                }
                None => {
                    self.modes.insert(mode, (t, ZERO));
                }
            },
            Factor::X { mode, s } => match self.modes.get_mut(&mode) {
                Some((_, s0)) => *s0 += s,
                None => {
                    self.modes.insert(mode, (ZERO, s));
                }
            },
        }
        let m = f.mode();
        if let Some(&(t, s)) = self.modes.get(&m) {
            if t == ZERO && s == ZERO {
                self.modes.remove(&m);
            }
        }
    }

    pub fn times_scalar(mut self, c: Scalar) -> Self {
        self.scalar *= c;
        self
    }

    /// Canonical factor list (without the scalar).
    pub fn factors(&self) -> Vec<Factor> {
        let mut out = Vec::with_capacity(2 * self.modes.len());
        for (&mode, &(t, s)) in &self.modes {
            if !is_plus_zero(t) {
                out.push(Factor::Z { mode, t });
            }
            if !is_plus_zero(s) {
                out.push(Factor::X { mode, s });
            }
        }
        out
    }

    /// `self · other`, normal-ordered.
    pub fn compose(&self, other: &WHWord) -> WHWord {
        let mut w = self.clone();
        w.scalar *= other.scalar;
        for f in other.factors() {
            w.push(f);
        }
        w
    }

    pub fn inverse(&self) -> WHWord {
        let mut w = WHWord::identity();
        w.scalar = self.scalar.inv();
        for f in self.factors().into_iter().rev() {
            w.push(match f {
                Factor::Z { mode, t } => Factor::Z { mode, t: -t },
                Factor::X { mode, s } => Factor::X { mode, s: -s },
            });
        }
        w
    }

    /// Shift of the nullifier `gen` caused by this word: `W† g W = g + v`.
    pub fn violation(&self, gen: &StabilizerGen) -> Complex64 {
        gen.coeffs
            .iter()
            .map(|(m, &(a, b))| a * self.s(*m) + b * self.t(*m))
            .sum()
    }

    /// Restriction of the displacement part to `modes`, scalar one.
    pub fn restrict<F: Fn(usize) -> bool>(&self, keep: F) -> WHWord {
        WHWord {
            scalar: Scalar::ONE,
            modes: self
                .modes
                .iter()
                .filter(|(m, _)| keep(**m))
                .map(|(m, p)| (*m, *p))
                .collect(),
        }
    }

    /// Real parts of the displacement parameters: `(mode, Re s, Re t)`, i.e. the
    /// position and momentum shifts a real state would see.
    pub fn real_moments(&self) -> BTreeMap<usize, (f64, f64)> {
        self.modes
            .iter()
            .map(|(&m, &(t, s))| (m, (s.re, t.re)))
            .collect()
    }

    /// Every displacement parameter is real.
    pub fn is_real(&self) -> bool {
        self.modes.values().all(|(t, s)| t.im == 0.0 && s.im == 0.0)
    }
}

fn is_plus_zero(c: Complex64) -> bool {
    c.re.to_bits() == 0 && c.im.to_bits() == 0
}

/// Normal-orders a product of displacement factors (left to right).
pub fn normal_order(factors: &[Factor]) -> WHWord {
    let mut w = WHWord::identity();
    for &f in factors {
        w.push(f);
    }
    w
}

/// `c` with `a · b = c · b · a`.
pub fn commutation_scalar(a: &WHWord, b: &WHWord) -> Scalar {
    let ab = a.compose(b);
    let ba = b.compose(a);
    Scalar::from_log(ab.scalar.log - ba.scalar.log)
}

/// Factor `c(θ)` with `S(θ) W = c(θ) W S(θ)` for `S(θ) = exp(-iθ g)`.
///
/// Since `W† g W = g + v` for a linear nullifier, `c(θ) = e^{-iθ v}`, which is
/// exactly multiplicative in `θ`.
pub fn conjugate_by_stabilizer(word: &WHWord, gen: &StabilizerGen, theta: f64) -> Scalar {
    Scalar::from_log(-I * theta * word.violation(gen))
}

/// `exp(-iθ g)` as a normal-ordered word.
///
/// Per mode `exp(-iθ(αx + βp)) = exp(i(a x − b p))` with `a = −θα`, `b = θβ`,
/// and `exp(i(a x − b p)) = e^{-iab/2} Z(a) X(b)`. For complex `β` this carries
/// the quadratic-in-θ scalar of finitely squeezed plaquettes.
pub fn stabilizer_word(gen: &StabilizerGen, theta: f64) -> WHWord {
    let mut w = WHWord::identity();
    w.scalar.log = -I * theta * gen.offset;
    for (&mode, &(alpha, beta)) in &gen.coeffs {
        let a = -alpha * theta;
        let b = beta * theta;
        w.scalar.log += -I * a * b / 2.0;
        if a != ZERO || b != ZERO {
            w.modes.insert(mode, (a, b));
        }
    }
    w
}

/// Compares two words field by field. `tol = 0` demands bit equality of the
/// parameters and of the scalar value.
pub fn equivalent(a: &WHWord, b: &WHWord, tol: f64) -> bool {
    if a.modes.len() != b.modes.len() || !a.modes.keys().eq(b.modes.keys()) {
        return false;
    }
    let close = |x: Complex64, y: Complex64| {
        if tol == 0.0 {
            x == y
        } else {
            (x - y).norm() <= tol * x.norm().max(y.norm()).max(1.0)
        }
    };
    a.modes
        .values()
        .zip(b.modes.values())
        .all(|(p, q)| close(p.0, q.0) && close(p.1, q.1))
        && close(a.scalar.value(), b.scalar.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quad {
    X,
    P,
}

/// A Weyl-symmetrized product of quadratures, factors sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<(usize, Quad)>);

impl Monomial {
    pub fn new(mut factors: Vec<(usize, Quad)>) -> Self {
        factors.sort();
        Monomial(factors)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn touches(&self, mode: usize) -> bool {
        self.0.iter().any(|f| f.0 == mode)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i;
            while j < self.0.len() && self.0[j] == self.0[i] {
                j += 1;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            let (m, q) = self.0[i];
            let name = if q == Quad::X { "x" } else { "p" };
            write!(f, "{name}{m}")?;
            if j - i > 1 {
                write!(f, "^{}", j - i)?;
            }
            i = j;
        }
        Ok(())
    }
}

/// Polynomial generator of a residual factor `exp(i · poly)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneratorPoly {
    pub terms: BTreeMap<Monomial, Complex64>,
}

impl GeneratorPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, m: Monomial, c: impl Into<Complex64>) {
        let c = c.into();
        let e = self.terms.entry(m.clone()).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&m);
        }
    }

    pub fn with_term(mut self, m: Monomial, c: impl Into<Complex64>) -> Self {
        self.add_term(m, c);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or(ZERO)
    }

    /// Real coefficients on Weyl-ordered monomials give a Hermitian operator.
    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    /// Modes carrying terms of degree ≥ 2.
    pub fn nonlinear_modes(&self) -> Vec<usize> {
        let mut modes: Vec<usize> = self
            .terms
            .keys()
            .filter(|m| m.degree() >= 2)
            .flat_map(|m| m.0.iter().map(|f| f.0))
            .collect();
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    pub fn add(&mut self, other: &GeneratorPoly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), *c);
        }
    }
}

impl fmt::Display for GeneratorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({})*{}", fmt_complex(*c), m)?;
        }
        Ok(())
    }
}

/// The Gaussian gates the algebra can conjugate through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadraticGate {
    /// `P(η) = exp(i η/2 x²)`.
    Squeeze { mode: usize, eta: f64 },
    /// `F = exp(iπ/4 (x² + p²))`.
    Fourier { mode: usize },
    /// `C_Z = exp(i x_a x_b)`.
    ControlledZ { a: usize, b: usize },
}

impl QuadraticGate {
    /// Generator `h` with gate `= exp(i h)`.
    pub fn generator(&self) -> GeneratorPoly {
        match *self {
            QuadraticGate::Squeeze { mode, eta } => GeneratorPoly::zero()
                .with_term(Monomial::new(vec![(mode, Quad::X); 2]), eta / 2.0),
            QuadraticGate::Fourier { mode } => GeneratorPoly::zero()
                .with_term(Monomial::new(vec![(mode, Quad::X); 2]), FRAC_PI_4)
                .with_term(Monomial::new(vec![(mode, Quad::P); 2]), FRAC_PI_4),
            QuadraticGate::ControlledZ { a, b } => GeneratorPoly::zero()
                .with_term(Monomial::new(vec![(a, Quad::X), (b, Quad::X)]), 1.0),
        }
    }

    /// Heisenberg action `G† L G` on a linear form `L = Σ a_j x_j + b_j p_j`,
    /// stored as mode → (a, b).
    fn conjugate_linear(&self, form: &mut BTreeMap<usize, (Complex64, Complex64)>) {
        match *self {
            QuadraticGate::Squeeze { mode, eta } => {
                // p → p + η x
                if let Some((a, b)) = form.get_mut(&mode) {
                    *a += *b * eta;
                }
            }
            QuadraticGate::Fourier { mode } => {
                // x → -p, p → x
                if let Some((a, b)) = form.get_mut(&mode) {
                    let (a0, b0) = (*a, *b);
                    *a = b0;
                    *b = -a0;
                }
            }
            QuadraticGate::ControlledZ { a: i, b: j } => {
                // p_i → p_i + x_j, p_j → p_j + x_i
                let bi = form.get(&i).map_or(ZERO, |v| v.1);
                let bj = form.get(&j).map_or(ZERO, |v| v.1);
                if bi != ZERO {
                    form.entry(j).or_insert((ZERO, ZERO)).0 += bi;
                }
                if bj != ZERO {
                    form.entry(i).or_insert((ZERO, ZERO)).0 += bj;
                }
            }
        }
    }
}

/// `word′ = scalar · residual · exp(i · poly)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugation {
    pub residual: WHWord,
    pub poly: GeneratorPoly,
    pub scalar: Scalar,
}

impl Conjugation {
    /// The residual word with the scalar folded in.
    pub fn word(&self) -> WHWord {
        self.residual.clone().times_scalar(self.scalar)
    }
}

/// Returns `word′ = G† word G`, so that `word · G = G · word′`.
///
/// The word is rewritten as `e^{Σ i t s / 2} exp(i Σ (t x − s p))`, the linear
/// form is pushed through the Heisenberg map of `G`, and the result is split
/// back into canonical order. Displacement words stay displacement words, so
/// the returned polynomial is always zero.
pub fn commute_through_quadratic(word: &WHWord, gate: QuadraticGate) -> Conjugation {
    let mut form: BTreeMap<usize, (Complex64, Complex64)> = BTreeMap::new();
    let mut log = word.scalar.log;
    for (&m, &(t, s)) in &word.modes {
        log += I * t * s / 2.0;
        form.insert(m, (t, -s));
    }
    gate.conjugate_linear(&mut form);
    let mut residual = WHWord::identity();
    for (m, (a, b)) in form {
        let (t, s) = (a, -b);
        log -= I * t * s / 2.0;
        if t != ZERO || s != ZERO {
            residual.modes.insert(m, (t, s));
        }
    }
    Conjugation {
        residual,
        poly: GeneratorPoly::zero(),
        scalar: Scalar::from_log(log),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("residue already carries degree-{degree} terms on mode {mode}; nested cubic gates are unsupported")]
    UnsupportedResidue { mode: usize, degree: usize },
    #[error("cannot parse word: {0}")]
    Parse(String),
}

/// `V(γ)† word V(γ)` for the cubic phase `V(γ) = e^{iγx³}` on `mode`.
///
/// Uses `V† p V = p + 3γx²` and `e^{-is(p + g(x))} = X(s) e^{-i∫_0^s g(x+u) du}`.
/// For `Z(t) X(s)` on the cubic mode this gives
/// `e^{2iγs³} Z(t − 3γs²) X(s) exp(−3iγs x²)`: the cubic terms cancel and the
/// residue is the quadratic `−3γs x²`.
pub fn commute_through_cubic(word: &WHWord, gamma: f64, mode: usize) -> Conjugation {
    let mut residual = word.clone();
    let mut scalar = Scalar::from_log(word.scalar.log);
    residual.scalar = Scalar::ONE;
    let mut poly = GeneratorPoly::zero();
    if let Some(&(t, s)) = word.modes.get(&mode) {
        let g = Complex64::new(gamma, 0.0);
        scalar.log += 2.0 * I * g * s * s * s;
        let t_new = t - 3.0 * g * s * s;
        if t_new == ZERO && s == ZERO {
            residual.modes.remove(&mode);
        } else {
            residual.modes.insert(mode, (t_new, s));
        }
        poly.add_term(Monomial::new(vec![(mode, Quad::X); 2]), -3.0 * g * s);
    }
    Conjugation {
        residual,
        poly,
        scalar,
    }
}

/// Like [`commute_through_cubic`] for a word already dressed with a residue
/// `exp(i · residue)` on its right. The residue may only contain position
/// terms of degree ≤ 1 on the cubic mode, which commute with `V(γ)`.
pub fn commute_dressed_through_cubic(
    word: &WHWord,
    residue: &GeneratorPoly,
    gamma: f64,
    mode: usize,
) -> Result<Conjugation, AlgebraError> {
    for m in residue.terms.keys().filter(|m| m.touches(mode)) {
        if m.degree() >= 2 || m.0.iter().any(|f| f.0 == mode && f.1 == Quad::P) {
            return Err(AlgebraError::UnsupportedResidue {
                mode,
                degree: m.degree(),
            });
        }
    }
    let mut c = commute_through_cubic(word, gamma, mode);
    c.poly.add(residue);
    Ok(c)
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// `re`, or `re+imi` / `re-imi`. Shortest round-trip decimal digits.
pub fn fmt_complex(c: Complex64) -> String {
    if c.im.to_bits() == 0 {
        fmt_f64(c.re)
    } else if c.im.is_sign_negative() {
        format!("{}-{}i", fmt_f64(c.re), fmt_f64(-c.im))
    } else {
        format!("{}+{}i", fmt_f64(c.re), fmt_f64(c.im))
    }
}

pub fn parse_complex(text: &str) -> Result<Complex64, AlgebraError> {
    let t = text.trim();
    let bad = || AlgebraError::Parse(format!("bad complex number `{text}`"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(num(t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = num(&body[..k])?;
            let im_text = &body[k..];
            let im = match im_text {
                "+" => 1.0,
                "-" => -1.0,
                s => num(s.strip_prefix('+').unwrap_or(s))?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => num(s)?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

impl fmt::Display for WHWord {
    /// `exp(<log scalar>) * Z[3](1.5) X[3](2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", fmt_complex(self.scalar.log))?;
        let factors = self.factors();
        if !factors.is_empty() {
            f.write_str(" *")?;
        }
        for fac in factors {
            match fac {
                Factor::Z { mode, t } => write!(f, " Z[{mode}]({})", fmt_complex(t))?,
                Factor::X { mode, s } => write!(f, " X[{mode}]({})", fmt_complex(s))?,
            }
        }
        Ok(())
    }
}

impl FromStr for WHWord {
    type Err = AlgebraError;

    /// Accepts an optional leading scalar (`exp(<log>)` or a plain complex
    /// number) followed by `*` and any product of `Z[m](t)` / `X[m](s)`
    /// factors, which are normal-ordered.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut tokens: Vec<&str> = text.split_whitespace().collect();
        let mut scalar = Scalar::ONE;
        if let Some(star) = tokens.iter().position(|t| *t == "*") {
            let head: String = tokens[..star].concat();
            scalar = parse_scalar(&head)?;
            tokens.drain(..=star);
        } else if tokens.len() == 1 && !tokens[0].starts_with(['Z', 'X']) {
            scalar = parse_scalar(tokens[0])?;
            tokens.clear();
        }
        let mut factors = Vec::with_capacity(tokens.len());
        for tok in tokens {
            factors.push(parse_factor(tok)?);
        }
        let mut w = normal_order(&factors);
        w.scalar *= scalar;
        Ok(w)
    }
}

fn parse_scalar(head: &str) -> Result<Scalar, AlgebraError> {
    if let Some(inner) = head.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
        Ok(Scalar::from_log(parse_complex(inner)?))
    } else {
        let c = parse_complex(head.trim_matches(|c| c == '(' || c == ')'))?;
        if c == ZERO {
            return Err(AlgebraError::Parse("zero scalar".into()));
        }
        Ok(Scalar::from_log(c.ln()))
    }
}

fn parse_factor(tok: &str) -> Result<Factor, AlgebraError> {
    let bad = || AlgebraError::Parse(format!("bad factor `{tok}`"));
    let kind = tok.chars().next().ok_or_else(bad)?;
    let rest = &tok[1..];
    let rest = rest.strip_prefix('[').ok_or_else(bad)?;
    let close = rest.find(']').ok_or_else(bad)?;
    let mode: usize = rest[..close].parse().map_err(|_| bad())?;
    let arg = rest[close + 1..]
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(bad)?;
    let v = parse_complex(arg)?;
    match kind {
        'Z' => Ok(Factor::Z { mode, t: v }),
        'X' => Ok(Factor::X { mode, s: v }),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::StabKind;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weyl_commutation() {
        let (s, t) = (0.75, -2.5);
        let w = normal_order(&[Factor::x(0, s), Factor::z(0, t)]);
        assert_eq!(w.scalar.log, c(0.0, -s * t));
        assert_eq!(w.modes[&0], (c(t, 0.0), c(s, 0.0)));
        let already = normal_order(&[Factor::z(0, t), Factor::x(0, s)]);
        assert_eq!(already.scalar, Scalar::ONE);
    }

    #[test]
    fn inverse_is_identity() {
        let w = normal_order(&[
            Factor::x(1, 2.0),
            Factor::z(1, c(0.5, -1.0)),
            Factor::z(4, 3.0),
            Factor::x(4, -0.25),
        ]);
        let id = w.compose(&w.inverse());
        assert!(id.modes.is_empty());
        assert!(id.scalar.log.norm() < 1e-15);
    }

    #[test]
    fn stabilizer_factor_examples() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(3, (c(0.0, 0.0), c(1.0, 0.0)));
        let star = StabilizerGen {
            kind: StabKind::Star,
            site: 0,
            offset: ZERO,
            coeffs,
        };
        let (xi, s) = (0.4, 1.7);
        let z = WHWord::single(Factor::z(3, s));
        assert_eq!(conjugate_by_stabilizer(&z, &star, xi).log, c(0.0, -xi * s));
        let x = WHWord::single(Factor::x(3, s));
        assert_eq!(conjugate_by_stabilizer(&x, &star, xi), Scalar::ONE);
    }

    #[test]
    fn x_through_squeezer() {
        let (s, eta) = (1.3, 0.6);
        let out = commute_through_quadratic(
            &WHWord::single(Factor::x(0, s)),
            QuadraticGate::Squeeze { mode: 0, eta },
        );
        assert_eq!(out.residual.modes[&0], (c(-eta * s, 0.0), c(s, 0.0)));
        assert!((out.scalar.log - c(0.0, eta * s * s / 2.0)).norm() < 1e-15);
        assert!(out.poly.is_zero());
    }

    #[test]
    fn z_commutes_with_squeezer() {
        let w = WHWord::single(Factor::z(2, 0.9));
        let out = commute_through_quadratic(&w, QuadraticGate::Squeeze { mode: 2, eta: 4.0 });
        assert_eq!(out.residual, w);
        assert_eq!(out.scalar, Scalar::ONE);
    }

    #[test]
    fn x_through_fourier_becomes_z() {
        let out = commute_through_quadratic(
            &WHWord::single(Factor::x(0, 2.0)),
            QuadraticGate::Fourier { mode: 0 },
        );
        assert_eq!(out.residual.modes[&0], (c(-2.0, 0.0), ZERO));
    }

    #[test]
    fn cubic_limits() {
        let w = normal_order(&[Factor::x(0, 0.8), Factor::z(0, -1.1)]);
        let out = commute_through_cubic(&w, 0.0, 0);
        assert_eq!(out.residual.modes, w.modes);
        assert_eq!(out.scalar, w.scalar);
        assert!(out.poly.terms.values().all(|v| *v == ZERO));

        let z = WHWord::single(Factor::z(0, 1.5));
        let out = commute_through_cubic(&z, 0.3, 0);
        assert_eq!(out.residual, z);
        assert!(out.poly.is_zero());
    }

    #[test]
    fn dressed_cubic_rejects_quadratic_residue() {
        let res = GeneratorPoly::zero().with_term(Monomial::new(vec![(0, Quad::X); 2]), 1.0);
        let w = WHWord::single(Factor::x(0, 1.0));
        assert!(commute_dressed_through_cubic(&w, &res, 0.1, 0).is_err());
        let lin = GeneratorPoly::zero().with_term(Monomial::new(vec![(0, Quad::X)]), 1.0);
        assert!(commute_dressed_through_cubic(&w, &lin, 0.1, 0).is_ok());
    }

    #[test]
    fn equivalence() {
        let (s, t) = (0.3, 0.7);
        let a = normal_order(&[Factor::z(0, t), Factor::x(0, s)])
            .times_scalar(Scalar::from_log(c(0.0, -s * t)));
        let b = normal_order(&[Factor::x(0, s), Factor::z(0, t)]);
        assert!(equivalent(&a, &b, 0.0));
        let near = b.clone().times_scalar(Scalar::from_log(c(1e-15, 0.0)));
        assert!(equivalent(&b, &near, 1e-12));
        let other = normal_order(&[Factor::x(1, s), Factor::z(1, t)]);
        assert!(!equivalent(&b, &other, 1.0));
    }

    #[test]
    fn parse_and_print() {
        let w: WHWord = "exp(0.5-2i) * Z[3](1.5) X[3](2.0) Z[7](-1.0+0.5i)".parse().unwrap();
        assert_eq!(w.scalar.log, c(0.5, -2.0));
        assert_eq!(w.modes[&3], (c(1.5, 0.0), c(2.0, 0.0)));
        assert_eq!(w.modes[&7], (c(-1.0, 0.5), ZERO));
        assert_eq!(w.to_string().parse::<WHWord>().unwrap(), w);
        assert_eq!(parse_complex("-2.5e-3-4i").unwrap(), c(-2.5e-3, -4.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert!("Q[1](2)".parse::<WHWord>().is_err());
    }
}

//! Noncommutative monomials and polynomials over party-partitioned
//! measurement generators, reduced modulo the quantum constraint set:
//! cross-party commutation, projector idempotence/orthogonality, and
//! `X^2 = I` for binary observables.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Hard cap on reduced word length; every instance in scope stays far below.
pub const MAX_WORD_LEN: usize = 24;

/// Generator semantics: projectors obey `X^2 = X` and per-setting
/// orthogonality; observables obey `X^2 = I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Projector,
    Observable,
}

/// A single measurement symbol `X_{setting}^{outcome}` owned by one party.
/// `outcome` is `None` in observable mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub party: u8,
    pub setting: u8,
    pub outcome: Option<u8>,
}

impl Generator {
    pub fn projector(party: u8, setting: u8, outcome: u8) -> Self {
        Generator { party, setting, outcome: Some(outcome) }
    }

    pub fn observable(party: u8, setting: u8) -> Self {
        Generator { party, setting, outcome: None }
    }
}

/// Declares the generator universe of one algebra instance: per-party
/// setting counts, per-setting outcome counts (projector mode), and the mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub mode: Mode,
    /// settings[j] = number of measurement settings of party j.
    pub settings: Vec<usize>,
    /// outcomes[j][s] = number of outcomes of party j's setting s.
    /// Empty inner meaning is not allowed in projector mode.
    pub outcomes: Vec<Vec<usize>>,
}

impl Schema {
    pub fn num_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn check_generator(&self, g: &Generator) -> Result<(), AlgebraError> {
        let p = g.party as usize;
        if p >= self.settings.len() {
            return Err(AlgebraError::SchemaMismatch(format!(
                "party {} out of range (have {})",
                p,
                self.settings.len()
            )));
        }
        let s = g.setting as usize;
        if s >= self.settings[p] {
            return Err(AlgebraError::SchemaMismatch(format!(
                "setting {} out of range for party {} (have {})",
                s, p, self.settings[p]
            )));
        }
        match (self.mode, g.outcome) {
            (Mode::Projector, Some(a)) => {
                let m = self.outcomes[p][s];
                if (a as usize) >= m {
                    return Err(AlgebraError::SchemaMismatch(format!(
                        "outcome {} out of range for party {} setting {} (have {})",
                        a, p, s, m
                    )));
                }
            }
            (Mode::Projector, None) => {
                return Err(AlgebraError::SchemaMismatch(
                    "projector-mode generator missing outcome".into(),
                ));
            }
            (Mode::Observable, Some(_)) => {
                return Err(AlgebraError::SchemaMismatch(
                    "observable-mode generator carries an outcome".into(),
                ));
            }
            (Mode::Observable, None) => {}
        }
        Ok(())
    }

    pub fn check_word(&self, word: &[Generator]) -> Result<(), AlgebraError> {
        for g in word {
            self.check_generator(g)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("word of length {0} exceeds the cap of {MAX_WORD_LEN} letters")]
    WordTooLong(usize),
    #[error("dimension mismatch in matrix assignment: {0}")]
    DimensionMismatch(String),
    #[error("matrix assignment violates {0} beyond tolerance")]
    InvalidAssignment(String),
}

/// A canonical reduced word. `zero` marks the annihilated word (a product
/// of orthogonal projectors); the empty live word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    degree: usize,
    word: Vec<Generator>,
    zero: bool,
}

impl Monomial {
    pub fn identity() -> Self {
        Monomial { degree: 0, word: Vec::new(), zero: false }
    }

    pub fn annihilated() -> Self {
        Monomial { degree: 0, word: Vec::new(), zero: true }
    }

    pub fn is_identity(&self) -> bool {
        !self.zero && self.word.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn word(&self) -> &[Generator] {
        &self.word
    }

    pub fn degree(&self) -> usize {
        self.word.len()
    }

    /// Canonicalize a word: stable-sort letters by party (cross-party
    /// commutation), then repeatedly apply within-party contractions:
    /// projector idempotence `XX -> X`, orthogonality `X_s^a X_s^b -> 0`
    /// (a != b), observable involution `XX -> I`.
    pub fn reduce(mode: Mode, word: &[Generator]) -> Result<Self, AlgebraError> {
        if word.len() > MAX_WORD_LEN {
            return Err(AlgebraError::WordTooLong(word.len()));
        }
        let mut w: Vec<Generator> = word.to_vec();
        w.sort_by_key(|g| g.party);
        loop {
            let mut changed = false;
            let mut out: Vec<Generator> = Vec::with_capacity(w.len());
            for g in w.drain(..) {
                match out.last() {
                    Some(prev) if prev.party == g.party && prev.setting == g.setting => {
                        match mode {
                            Mode::Projector => {
                                if prev.outcome == g.outcome {
                                    // idempotent: drop the duplicate
                                    changed = true;
                                } else {
                                    return Ok(Monomial::annihilated());
                                }
                            }
                            Mode::Observable => {
                                out.pop();
                                changed = true;
                            }
                        }
                    }
                    _ => out.push(g),
                }
            }
            w = out;
            if !changed {
                break;
            }
        }
        Ok(Monomial { degree: w.len(), word: w, zero: false })
    }

    /// Word reversal followed by reduction.
    pub fn adjoint(&self, mode: Mode) -> Self {
        if self.zero {
            return Monomial::annihilated();
        }
        let rev: Vec<Generator> = self.word.iter().rev().copied().collect();
        // A reversed canonical word stays under the cap, so reduce cannot fail.
        Monomial::reduce(mode, &rev).expect("adjoint of canonical word")
    }

    /// Concatenate then reduce.
    pub fn concat(&self, other: &Monomial, mode: Mode) -> Result<Self, AlgebraError> {
        if self.zero || other.zero {
            return Ok(Monomial::annihilated());
        }
        let mut w = Vec::with_capacity(self.word.len() + other.word.len());
        w.extend_from_slice(&self.word);
        w.extend_from_slice(&other.word);
        Monomial::reduce(mode, &w)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            return write!(f, "0");
        }
        if self.word.is_empty() {
            return write!(f, "I");
        }
        let mut first = true;
        for g in &self.word {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let letter = (b'A' + g.party) as char;
            match g.outcome {
                Some(a) => write!(f, "{}{}:{}", letter, g.setting + 1, a)?,
                None => write!(f, "{}{}", letter, g.setting + 1)?,
            }
        }
        Ok(())
    }
}

/// A sparse real-coefficient polynomial over canonical monomials.
/// Zero coefficients and the annihilated monomial are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NCPolynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl NCPolynomial {
    pub fn zero() -> Self {
        NCPolynomial::default()
    }

    pub fn identity() -> Self {
        let mut p = NCPolynomial::default();
        p.add_term(Monomial::identity(), 1.0);
        p
    }

    pub fn from_monomial(m: Monomial, coeff: f64) -> Self {
        let mut p = NCPolynomial::default();
        p.add_term(m, coeff);
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, coeff: f64) {
        if m.is_zero() || coeff == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get_mut();
                *v += coeff;
                if *v == 0.0 {
                    e.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }

    pub fn add_assign(&mut self, other: &NCPolynomial, scale: f64) {
        for (m, c) in other.terms() {
            self.add_term(m.clone(), c * scale);
        }
    }

    pub fn scaled(&self, s: f64) -> NCPolynomial {
        let mut out = NCPolynomial::default();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    /// Drop coefficients with |c| <= tol; useful after float cancellations.
    pub fn chop(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    /// Largest absolute coefficient (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn adjoint(&self, mode: Mode) -> NCPolynomial {
        let mut out = NCPolynomial::default();
        for (m, c) in self.terms() {
            out.add_term(m.adjoint(mode), c);
        }
        out
    }

    /// `p` is Hermitian iff every coefficient equals its adjoint's.
    pub fn is_hermitian(&self, mode: Mode, tol: f64) -> bool {
        self.terms()
            .all(|(m, c)| (c - self.coeff(&m.adjoint(mode))).abs() <= tol)
    }

    /// Product in the quotient algebra; annihilated terms are dropped.
    pub fn mul(&self, other: &NCPolynomial, mode: Mode) -> Result<NCPolynomial, AlgebraError> {
        let mut out = NCPolynomial::default();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                let m = ma.concat(mb, mode)?;
                out.add_term(m, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }
}

/// A concrete matrix assignment for the generators of one schema.
pub type Assignment = std::collections::HashMap<Generator, DMatrix<Complex64>>;

fn approx_eq(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) -> bool {
    (a - b).iter().all(|x| x.norm() <= tol)
}

/// Check that an assignment satisfies the declared mode constraints:
/// Hermitian; projectors idempotent, per-setting orthogonal and complete;
/// observables squaring to the identity.
pub fn validate_assignment(
    schema: &Schema,
    assignment: &Assignment,
    tol: f64,
) -> Result<usize, AlgebraError> {
    let mut dim = None;
    for (g, m) in assignment {
        schema.check_generator(g)?;
        if !m.is_square() {
            return Err(AlgebraError::DimensionMismatch(format!(
                "matrix for {g:?} is not square"
            )));
        }
        match dim {
            None => dim = Some(m.nrows()),
            Some(d) if d != m.nrows() => {
                return Err(AlgebraError::DimensionMismatch(format!(
                    "matrix for {g:?} has dimension {} != {}",
                    m.nrows(),
                    d
                )));
            }
            _ => {}
        }
        if !approx_eq(&m.adjoint(), m, tol) {
            return Err(AlgebraError::InvalidAssignment("Hermiticity".into()));
        }
    }
    let d = dim.ok_or_else(|| AlgebraError::DimensionMismatch("empty assignment".into()))?;
    let eye = DMatrix::<Complex64>::identity(d, d);
    for (p, &ns) in schema.settings.iter().enumerate() {
        for s in 0..ns {
            match schema.mode {
                Mode::Projector => {
                    let nout = schema.outcomes[p][s];
                    let mut sum = DMatrix::<Complex64>::zeros(d, d);
                    let mut ops = Vec::new();
                    for a in 0..nout {
                        let g = Generator::projector(p as u8, s as u8, a as u8);
                        let m = assignment.get(&g).ok_or_else(|| {
                            AlgebraError::DimensionMismatch(format!("missing matrix for {g:?}"))
                        })?;
                        if !approx_eq(&(m * m), m, tol) {
                            return Err(AlgebraError::InvalidAssignment("idempotence".into()));
                        }
                        sum += m;
                        ops.push(m);
                    }
                    if !approx_eq(&sum, &eye, tol) {
                        return Err(AlgebraError::InvalidAssignment("completeness".into()));
                    }
                    for i in 0..ops.len() {
                        for j in 0..i {
                            let prod = ops[i] * ops[j];
                            if prod.iter().any(|x| x.norm() > tol) {
                                return Err(AlgebraError::InvalidAssignment(
                                    "orthogonality".into(),
                                ));
                            }
                        }
                    }
                }
                Mode::Observable => {
                    let g = Generator::observable(p as u8, s as u8);
                    let m = assignment.get(&g).ok_or_else(|| {
                        AlgebraError::DimensionMismatch(format!("missing matrix for {g:?}"))
                    })?;
                    if !approx_eq(&(m * m), &eye, tol) {
                        return Err(AlgebraError::InvalidAssignment("involution".into()));
                    }
                }
            }
        }
    }
    Ok(d)
}

/// Evaluate a word literally (no rewriting) under an assignment.
pub fn instantiate_word(
    word: &[Generator],
    assignment: &Assignment,
    dim: usize,
) -> Result<DMatrix<Complex64>, AlgebraError> {
    let mut acc = DMatrix::<Complex64>::identity(dim, dim);
    for g in word {
        let m = assignment
            .get(g)
            .ok_or_else(|| AlgebraError::DimensionMismatch(format!("missing matrix for {g:?}")))?;
        acc = acc * m;
    }
    Ok(acc)
}

/// Evaluate a polynomial literally as a matrix under a validated assignment.
pub fn instantiate(
    p: &NCPolynomial,
    schema: &Schema,
    assignment: &Assignment,
) -> Result<DMatrix<Complex64>, AlgebraError> {
    let dim = validate_assignment(schema, assignment, 1e-10)?;
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for (m, c) in p.terms() {
        let w = instantiate_word(m.word(), assignment, dim)?;
        acc += w * Complex64::new(c, 0.0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pj(party: u8, setting: u8, outcome: u8) -> Generator {
        Generator::projector(party, setting, outcome)
    }

    fn ob(party: u8, setting: u8) -> Generator {
        Generator::observable(party, setting)
    }

    #[test]
    fn idempotence_fixed_point() {
        let m = Monomial::reduce(Mode::Projector, &[pj(0, 0, 0), pj(0, 0, 0)]).unwrap();
        assert_eq!(m, Monomial::reduce(Mode::Projector, &[pj(0, 0, 0)]).unwrap());
        assert_eq!(m.degree(), 1);
    }

    #[test]
    fn orthogonality_annihilates() {
        let m = Monomial::reduce(Mode::Projector, &[pj(0, 0, 0), pj(0, 0, 1)]).unwrap();
        assert!(m.is_zero());
    }

    #[test]
    fn cross_party_commutation() {
        let m = Monomial::reduce(Mode::Projector, &[pj(1, 0, 0), pj(0, 0, 0)]).unwrap();
        assert_eq!(m.word(), &[pj(0, 0, 0), pj(1, 0, 0)]);
    }

    #[test]
    fn observable_involution() {
        let m = Monomial::reduce(Mode::Observable, &[ob(0, 0), ob(0, 0)]).unwrap();
        assert!(m.is_identity());
        // involution can cascade: A1 A2 A2 A1 -> I
        let m = Monomial::reduce(Mode::Observable, &[ob(0, 0), ob(0, 1), ob(0, 1), ob(0, 0)])
            .unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn same_party_order_preserved() {
        let m = Monomial::reduce(Mode::Observable, &[ob(0, 1), ob(0, 0)]).unwrap();
        assert_eq!(m.word(), &[ob(0, 1), ob(0, 0)]);
    }

    #[test]
    fn adjoint_involution_and_cross_party_symmetry() {
        let m = Monomial::reduce(Mode::Projector, &[pj(0, 0, 0), pj(1, 0, 0)]).unwrap();
        assert_eq!(m.adjoint(Mode::Projector), m);
        let m = Monomial::reduce(Mode::Observable, &[ob(0, 0), ob(0, 1)]).unwrap();
        let adj = m.adjoint(Mode::Observable);
        assert_eq!(adj.word(), &[ob(0, 1), ob(0, 0)]);
        assert_eq!(adj.adjoint(Mode::Observable), m);
        assert!(Monomial::identity().adjoint(Mode::Observable).is_identity());
    }

    #[test]
    fn multiply_observable_commutator() {
        // (A1 + A2)(A1 - A2) = I - A1A2 + A2A1 - I = -A1A2 + A2A1
        let a1 = NCPolynomial::from_monomial(
            Monomial::reduce(Mode::Observable, &[ob(0, 0)]).unwrap(),
            1.0,
        );
        let a2 = NCPolynomial::from_monomial(
            Monomial::reduce(Mode::Observable, &[ob(0, 1)]).unwrap(),
            1.0,
        );
        let mut sum = a1.clone();
        sum.add_assign(&a2, 1.0);
        let mut diff = a1;
        diff.add_assign(&a2, -1.0);
        let prod = sum.mul(&diff, Mode::Observable).unwrap();
        let a1a2 = Monomial::reduce(Mode::Observable, &[ob(0, 0), ob(0, 1)]).unwrap();
        let a2a1 = Monomial::reduce(Mode::Observable, &[ob(0, 1), ob(0, 0)]).unwrap();
        assert_eq!(prod.num_terms(), 2);
        assert_eq!(prod.coeff(&a1a2), -1.0);
        assert_eq!(prod.coeff(&a2a1), 1.0);
    }

    #[test]
    fn multiply_identity_and_orthogonal() {
        let p = NCPolynomial::from_monomial(
            Monomial::reduce(Mode::Projector, &[pj(0, 0, 0), pj(1, 0, 1)]).unwrap(),
            2.5,
        );
        let prod = NCPolynomial::identity().mul(&p, Mode::Projector).unwrap();
        assert_eq!(prod, p);
        let x0 = NCPolynomial::from_monomial(
            Monomial::reduce(Mode::Projector, &[pj(0, 0, 0)]).unwrap(),
            1.0,
        );
        let x1 = NCPolynomial::from_monomial(
            Monomial::reduce(Mode::Projector, &[pj(0, 0, 1)]).unwrap(),
            1.0,
        );
        assert!(x0.mul(&x1, Mode::Projector).unwrap().is_zero());
    }

    #[test]
    fn word_cap_enforced() {
        let w: Vec<Generator> = (0..25).map(|i| ob(i % 3, 0)).collect();
        assert!(matches!(
            Monomial::reduce(Mode::Observable, &w),
            Err(AlgebraError::WordTooLong(25))
        ));
    }

    #[test]
    fn schema_rejects_out_of_range() {
        let schema = Schema {
            mode: Mode::Projector,
            settings: vec![2, 2],
            outcomes: vec![vec![2, 2], vec![2, 2]],
        };
        assert!(schema.check_generator(&pj(0, 0, 1)).is_ok());
        assert!(schema.check_generator(&pj(2, 0, 0)).is_err());
        assert!(schema.check_generator(&pj(0, 2, 0)).is_err());
        assert!(schema.check_generator(&pj(0, 0, 2)).is_err());
        assert!(schema.check_generator(&ob(0, 0)).is_err());
    }
}

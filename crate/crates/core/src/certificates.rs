//! Standalone sum-of-squares certificates.
//!
//! A certificate witnesses a bound `nu` on a Bell operator `B` through the
//! polynomial identity
//!
//!   nu I - B  =  sum_i d_i r_i' r_i  +  sum_t m_t p_t     (in the quotient)
//!
//! where each `r_i` is a polynomial over the certificate basis, `d_i >= 0`,
//! and the `p_t` are completeness constraint polynomials. Verification is
//! pure polynomial arithmetic in the quotient algebra: projector
//! idempotence, orthogonality, involution, and cross-party commutation are
//! absorbed by reduction, while completeness is tracked explicitly through
//! the multiplier terms. The residual of the identity is reported as a max
//! absolute coefficient.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::algebra::{AlgebraError, Generator, Mode, Monomial, NCPolynomial};
use crate::games::{Game, GameError};
use crate::hierarchy::{
    add_herm, ConstraintKind, Formulation, HierarchyError, RelaxationProblem,
};
use crate::sdp::{SdpSolution, SolveStatus};

/// Eigenvalues of the Gram matrix in [-PSD_TOL, 0) are clipped to zero;
/// anything below fails extraction.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum CertificateError {
    #[error("gram matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("certificate parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("certificate does not match game: {0}")]
    Mismatch(String),
    #[error("cannot extract certificate: {0}")]
    Extract(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One rank-one term d * r'r with r given by coefficients over the basis.
#[derive(Debug, Clone)]
pub struct Square {
    pub weight: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiplierId {
    /// sum_a zi' X_{party,setting}^a zj - zi' zj (hermitized), with (i, j)
    /// indices into the certificate basis.
    Completeness { party: u8, setting: u8, left: usize, right: usize },
    /// X - X^2 for a single projector generator. Identically zero in the
    /// quotient; recorded for degree-1 bases so the unreduced identity can
    /// be reconstructed.
    Idempotence(Generator),
}

#[derive(Debug, Clone)]
pub struct Multiplier {
    pub id: MultiplierId,
    pub coeff: f64,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// Certified upper bound on the game value (offset included).
    pub bound: f64,
    pub mode: Mode,
    pub basis: Vec<Monomial>,
    /// PSD Gram matrix over the basis; equals sum_i d_i r_i r_i^T up to
    /// clipped eigenvalues.
    pub gram: DMatrix<f64>,
    pub squares: Vec<Square>,
    pub multipliers: Vec<Multiplier>,
    /// Residual polynomial of the certificate identity at extraction time.
    pub residual: NCPolynomial,
}

impl Certificate {
    pub fn residual_norm(&self) -> f64 {
        self.residual.max_abs_coeff()
    }
}

fn square_sum_matrix(n: usize, squares: &[Square]) -> Result<DMatrix<f64>, CertificateError> {
    let mut w = DMatrix::<f64>::zeros(n, n);
    for sq in squares {
        if sq.coeffs.len() != n {
            return Err(CertificateError::Malformed(format!(
                "square has {} coefficients, basis has {n}",
                sq.coeffs.len()
            )));
        }
        if sq.weight < 0.0 {
            return Err(CertificateError::NotPsd(sq.weight));
        }
        for i in 0..n {
            if sq.coeffs[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                w[(i, j)] += sq.weight * sq.coeffs[i] * sq.coeffs[j];
            }
        }
    }
    Ok(w)
}

/// nu I - B - sum_i d_i r_i' r_i - sum comp_t m_t p_t, reduced.
fn residual_of(
    bound: f64,
    bell_total: &NCPolynomial,
    entries: &[Monomial],
    mode: Mode,
    squares: &[Square],
    comp: &[(NCPolynomial, f64)],
) -> Result<NCPolynomial, CertificateError> {
    let n = entries.len();
    let w = square_sum_matrix(n, squares)?;
    let adjoints: Vec<Monomial> = entries.iter().map(|m| m.adjoint(mode)).collect();
    let mut poly = NCPolynomial::from_monomial(Monomial::identity(), bound);
    poly.add_assign(bell_total, -1.0);
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            if v == 0.0 {
                continue;
            }
            let m = adjoints[i].concat(&entries[j], mode)?;
            if !m.is_zero() {
                poly.add_term(m, -v);
            }
        }
    }
    for (p, c) in comp {
        poly.add_assign(p, -*c);
    }
    Ok(poly)
}

fn eigen_squares(gram: &DMatrix<f64>) -> Result<Vec<Square>, CertificateError> {
    let sym = nalgebra::SymmetricEigen::new(gram.clone());
    let mut squares = Vec::new();
    for (k, &d) in sym.eigenvalues.iter().enumerate() {
        if d < -PSD_TOL {
            return Err(CertificateError::NotPsd(d));
        }
        if d <= 0.0 {
            continue;
        }
        squares.push(Square {
            weight: d,
            coeffs: sym.eigenvectors.column(k).iter().copied().collect(),
        });
    }
    squares.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(squares)
}

/// Extract a certificate from an optimal solve of a relaxation.
///
/// Moment form: the dual slack is the SOS Gram matrix and the negated
/// multipliers of the completeness constraints close the identity. SOS
/// form: the primal slack F0 + sum_k x_k F_k is the Gram matrix and the
/// multipliers come from the relation coordinates eliminated during
/// assembly.
pub fn extract(
    relax: &RelaxationProblem,
    sol: &SdpSolution,
) -> Result<Certificate, CertificateError> {
    if sol.status != SolveStatus::Optimal {
        return Err(CertificateError::Extract(format!(
            "solution status is {:?}",
            sol.status
        )));
    }
    let mode = relax.basis.mode;
    let entries = &relax.basis.entries;
    let n = entries.len();

    let (gram_raw, nu_poly, comp): (&DMatrix<f64>, f64, Vec<(usize, NCPolynomial, f64)>) =
        match &relax.formulation {
            Formulation::Moment(meta) => {
                let mut comp = Vec::new();
                for (k, kind) in meta.kinds.iter().enumerate() {
                    if let ConstraintKind::Completeness(t) = kind {
                        comp.push((*t, meta.relations[*t].poly.clone(), sol.dual_vector[k]));
                    }
                }
                (&sol.dual_matrix[0], sol.dual_value, comp)
            }
            Formulation::Sos(meta) => {
                let x = &sol.dual_vector;
                let mut comp = Vec::new();
                for (r, rel) in meta.relations.iter().enumerate() {
                    let mut m = meta.lambda0[r];
                    for (k, lam) in meta.lambda.iter().enumerate() {
                        m += x[k] * lam[r];
                    }
                    comp.push((r, rel.poly.clone(), m));
                }
                (&sol.primal_matrix[0], sol.primal_value, comp)
            }
        };

    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = 0.5 * (gram_raw[(i, j)] + gram_raw[(j, i)]);
        }
    }
    let squares = eigen_squares(&gram)?;

    let mut multipliers = Vec::new();
    let mut comp_pairs = Vec::new();
    let relations = match &relax.formulation {
        Formulation::Moment(meta) => &meta.relations,
        Formulation::Sos(meta) => &meta.relations,
    };
    for (t, poly, coeff) in comp {
        let rel = &relations[t];
        multipliers.push(Multiplier {
            id: MultiplierId::Completeness {
                party: rel.party,
                setting: rel.setting,
                left: rel.left,
                right: rel.right,
            },
            coeff,
        });
        comp_pairs.push((poly, coeff));
    }
    // Idempotence bookkeeping only makes sense when every non-identity
    // basis element is a single projector.
    if mode == Mode::Projector && entries.iter().skip(1).all(|m| m.degree() == 1) {
        for (k, m) in entries.iter().enumerate().skip(1) {
            multipliers.push(Multiplier {
                id: MultiplierId::Idempotence(m.word()[0]),
                coeff: gram[(k, k)],
            });
        }
    }

    let bound = nu_poly + relax.offset;
    let mut bell_total = relax.bell.clone();
    bell_total.add_term(Monomial::identity(), relax.offset);
    let residual = residual_of(bound, &bell_total, entries, mode, &squares, &comp_pairs)?;

    Ok(Certificate {
        bound,
        mode,
        basis: entries.clone(),
        gram,
        squares,
        multipliers,
        residual,
    })
}

/// Re-derive the certificate identity against a game and return the max
/// absolute coefficient of the residual polynomial.
pub fn verify(cert: &Certificate, game: &Game) -> Result<f64, CertificateError> {
    let schema = game.schema();
    let n = cert.basis.len();
    if n == 0 || !cert.basis[0].is_identity() {
        return Err(CertificateError::Malformed(
            "certificate basis must start with the identity".into(),
        ));
    }
    if cert.basis.iter().any(|m| m.degree() > 0) && cert.mode != schema.mode {
        return Err(CertificateError::Mismatch(format!(
            "certificate mode {:?} vs game mode {:?}",
            cert.mode, schema.mode
        )));
    }
    for m in &cert.basis {
        schema
            .check_word(m.word())
            .map_err(|e| CertificateError::Mismatch(e.to_string()))?;
    }
    if cert.gram.nrows() != n || cert.gram.ncols() != n {
        return Err(CertificateError::Malformed(format!(
            "gram is {}x{}, basis has {n} entries",
            cert.gram.nrows(),
            cert.gram.ncols()
        )));
    }

    // Gram and squares must describe the same PSD form.
    let w = square_sum_matrix(n, &cert.squares)?;
    let mut drift: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            drift = drift.max((w[(i, j)] - cert.gram[(i, j)]).abs());
        }
    }
    if drift > 1e-6 {
        return Err(CertificateError::Mismatch(format!(
            "gram differs from the square decomposition by {drift:.3e}"
        )));
    }

    let mut comp = Vec::new();
    for m in &cert.multipliers {
        match &m.id {
            MultiplierId::Completeness { party, setting, left, right } => {
                let p = *party as usize;
                let s = *setting as usize;
                if schema.mode != Mode::Projector {
                    return Err(CertificateError::Mismatch(
                        "completeness multiplier in an observable-mode game".into(),
                    ));
                }
                if p >= game.num_parties || s >= game.settings[p] {
                    return Err(CertificateError::Mismatch(format!(
                        "completeness multiplier party {p} setting {s} out of range"
                    )));
                }
                if *left >= n || *right >= n {
                    return Err(CertificateError::Malformed(
                        "completeness multiplier indexes outside the basis".into(),
                    ));
                }
                let poly = completeness_poly(
                    &cert.basis,
                    cert.mode,
                    *party,
                    *setting,
                    game.outcomes[p][s],
                    *left,
                    *right,
                )?;
                comp.push((poly, m.coeff));
            }
            // Zero in the quotient; the reduction already absorbed it.
            MultiplierId::Idempotence(g) => {
                schema
                    .check_generator(g)
                    .map_err(|e| CertificateError::Mismatch(e.to_string()))?;
            }
        }
    }

    let bell = game.bell_operator()?;
    let mut bell_total = bell.polynomial;
    bell_total.add_term(Monomial::identity(), bell.offset);
    let residual = residual_of(
        cert.bound,
        &bell_total,
        &cert.basis,
        cert.mode,
        &cert.squares,
        &comp,
    )?;
    Ok(residual.max_abs_coeff())
}

fn completeness_poly(
    basis: &[Monomial],
    mode: Mode,
    party: u8,
    setting: u8,
    num_outcomes: usize,
    left: usize,
    right: usize,
) -> Result<NCPolynomial, CertificateError> {
    let zi_adj = basis[left].adjoint(mode);
    let mut poly = NCPolynomial::zero();
    for a in 0..num_outcomes {
        let g = Monomial::reduce(mode, &[Generator::projector(party, setting, a as u8)])?;
        let m = zi_adj.concat(&g, mode)?.concat(&basis[right], mode)?;
        if !m.is_zero() {
            add_herm(&mut poly, &m, 1.0, mode);
        }
    }
    let m = zi_adj.concat(&basis[right], mode)?;
    if !m.is_zero() {
        add_herm(&mut poly, &m, -1.0, mode);
    }
    Ok(poly)
}

// ---------------------------------------------------------------------------
// Serialization. Plain text, 17 significant digits, sections in fixed order:
// bound, basis, gram, squares, multipliers, residual.

fn fmt_val(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn serialize_certificate(cert: &Certificate) -> String {
    let n = cert.basis.len();
    let mut out = String::new();
    let _ = writeln!(out, "bound {}", fmt_val(cert.bound));
    let _ = writeln!(out, "basis {n}");
    for m in &cert.basis {
        let _ = writeln!(out, "{m}");
    }
    let _ = writeln!(out, "gram {n}");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_val(cert.gram[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let _ = writeln!(out, "squares {}", cert.squares.len());
    for sq in &cert.squares {
        let mut line = fmt_val(sq.weight);
        for c in &sq.coeffs {
            line.push(' ');
            line.push_str(&fmt_val(*c));
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "multipliers {}", cert.multipliers.len());
    for m in &cert.multipliers {
        match &m.id {
            MultiplierId::Completeness { party, setting, left, right } => {
                let _ = writeln!(
                    out,
                    "comp {}{} {} {} {}",
                    (b'A' + party) as char,
                    setting + 1,
                    left,
                    right,
                    fmt_val(m.coeff)
                );
            }
            MultiplierId::Idempotence(g) => {
                let tok = Monomial::reduce(Mode::Projector, &[*g])
                    .map(|m| m.to_string())
                    .unwrap_or_default();
                let _ = writeln!(out, "idem {tok} {}", fmt_val(m.coeff));
            }
        }
    }
    let _ = writeln!(out, "residual {}", cert.residual.num_terms());
    for (m, c) in cert.residual.terms() {
        let _ = writeln!(out, "{} {m}", fmt_val(c));
    }
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { iter: text.lines().enumerate(), last: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.iter.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                self.last = i + 1;
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), CertificateError> {
        self.next().ok_or_else(|| CertificateError::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn perr(line: usize, msg: impl Into<String>) -> CertificateError {
    CertificateError::Parse { line, msg: msg.into() }
}

fn parse_f64(line: usize, tok: &str) -> Result<f64, CertificateError> {
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("bad number '{tok}'")))
}

fn parse_usize(line: usize, tok: &str) -> Result<usize, CertificateError> {
    tok.parse::<usize>()
        .map_err(|_| perr(line, format!("bad count '{tok}'")))
}

fn section_header(
    lines: &mut Lines<'_>,
    name: &str,
) -> Result<usize, CertificateError> {
    let (ln, line) = lines.expect(&format!("'{name}' section"))?;
    let mut it = line.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(count), None) if k == name => parse_usize(ln, count),
        _ => Err(perr(ln, format!("expected '{name} <count>'"))),
    }
}

/// Tokens of a monomial line, schema-free. Returns the generator word plus
/// whether any token carried an outcome (projector notation).
fn parse_raw_word(line: usize, text: &str) -> Result<(Vec<Generator>, bool), CertificateError> {
    if text == "I" {
        return Ok((Vec::new(), false));
    }
    let mut word = Vec::new();
    let mut projector = None;
    for tok in text.split_whitespace() {
        let mut chars = tok.chars();
        let letter = chars.next().ok_or_else(|| perr(line, "empty token"))?;
        if !letter.is_ascii_uppercase() {
            return Err(perr(line, format!("bad generator '{tok}'")));
        }
        let party = letter as u8 - b'A';
        let rest = chars.as_str();
        let (setting_str, outcome) = match rest.split_once(':') {
            Some((s, o)) => {
                let o: u8 = o
                    .parse()
                    .map_err(|_| perr(line, format!("bad outcome in '{tok}'")))?;
                (s, Some(o))
            }
            None => (rest, None),
        };
        let setting: u8 = setting_str
            .parse()
            .map_err(|_| perr(line, format!("bad setting in '{tok}'")))?;
        if setting == 0 {
            return Err(perr(line, format!("setting in '{tok}' is 1-based")));
        }
        let has = outcome.is_some();
        if *projector.get_or_insert(has) != has {
            return Err(perr(line, "mixed projector and observable tokens"));
        }
        word.push(match outcome {
            Some(a) => Generator::projector(party, setting - 1, a),
            None => Generator::observable(party, setting - 1),
        });
    }
    Ok((word, projector.unwrap_or(false)))
}

pub fn parse_certificate(text: &str) -> Result<Certificate, CertificateError> {
    let mut lines = Lines::new(text);

    let (ln, line) = lines.expect("'bound' line")?;
    let mut it = line.split_whitespace();
    let bound = match (it.next(), it.next(), it.next()) {
        (Some("bound"), Some(v), None) => parse_f64(ln, v)?,
        _ => return Err(perr(ln, "expected 'bound <value>'")),
    };

    let n = section_header(&mut lines, "basis")?;
    let mut raw_words = Vec::with_capacity(n);
    let mut projector = false;
    let mut observable = false;
    for _ in 0..n {
        let (ln, line) = lines.expect("basis monomial")?;
        let (word, has_outcome) = parse_raw_word(ln, line)?;
        if !word.is_empty() {
            if has_outcome {
                projector = true;
            } else {
                observable = true;
            }
        }
        raw_words.push((ln, word));
    }
    if projector && observable {
        return Err(CertificateError::Malformed(
            "basis mixes projector and observable monomials".into(),
        ));
    }
    let mode = if projector { Mode::Projector } else { Mode::Observable };
    let mut basis = Vec::with_capacity(n);
    for (ln, word) in raw_words {
        let m = Monomial::reduce(mode, &word).map_err(|e| perr(ln, e.to_string()))?;
        basis.push(m);
    }

    let gn = section_header(&mut lines, "gram")?;
    if gn != n {
        return Err(CertificateError::Malformed(format!(
            "gram size {gn} does not match basis size {n}"
        )));
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (ln, line) = lines.expect("gram row")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n {
            return Err(perr(ln, format!("gram row has {} entries, expected {n}", toks.len())));
        }
        for (j, tok) in toks.iter().enumerate() {
            gram[(i, j)] = parse_f64(ln, tok)?;
        }
    }

    let nsq = section_header(&mut lines, "squares")?;
    let mut squares = Vec::with_capacity(nsq);
    for _ in 0..nsq {
        let (ln, line) = lines.expect("square")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n + 1 {
            return Err(perr(ln, format!("square line has {} values, expected {}", toks.len(), n + 1)));
        }
        let weight = parse_f64(ln, toks[0])?;
        let coeffs = toks[1..]
            .iter()
            .map(|t| parse_f64(ln, t))
            .collect::<Result<Vec<_>, _>>()?;
        squares.push(Square { weight, coeffs });
    }

    let nmul = section_header(&mut lines, "multipliers")?;
    let mut multipliers = Vec::with_capacity(nmul);
    for _ in 0..nmul {
        let (ln, line) = lines.expect("multiplier")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["comp", ps, i, j, v] => {
                let mut chars = ps.chars();
                let letter = chars.next().filter(char::is_ascii_uppercase).ok_or_else(
                    || perr(ln, format!("bad party/setting '{ps}'")),
                )?;
                let setting: u8 = chars
                    .as_str()
                    .parse()
                    .map_err(|_| perr(ln, format!("bad setting in '{ps}'")))?;
                if setting == 0 {
                    return Err(perr(ln, "setting is 1-based"));
                }
                multipliers.push(Multiplier {
                    id: MultiplierId::Completeness {
                        party: letter as u8 - b'A',
                        setting: setting - 1,
                        left: parse_usize(ln, i)?,
                        right: parse_usize(ln, j)?,
                    },
                    coeff: parse_f64(ln, v)?,
                });
            }
            ["idem", tok, v] => {
                let (word, has_outcome) = parse_raw_word(ln, tok)?;
                if word.len() != 1 || !has_outcome {
                    return Err(perr(ln, "idem multiplier needs one projector token"));
                }
                multipliers.push(Multiplier {
                    id: MultiplierId::Idempotence(word[0]),
                    coeff: parse_f64(ln, v)?,
                });
            }
            _ => return Err(perr(ln, "expected 'comp <Ps> <i> <j> <v>' or 'idem <tok> <v>'")),
        }
    }

    let nres = section_header(&mut lines, "residual")?;
    let mut residual = NCPolynomial::zero();
    let mut seen: BTreeMap<Monomial, ()> = BTreeMap::new();
    for _ in 0..nres {
        let (ln, line) = lines.expect("residual term")?;
        let (coeff_tok, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| perr(ln, "expected '<coeff> <monomial>'"))?;
        let coeff = parse_f64(ln, coeff_tok)?;
        let (word, _) = parse_raw_word(ln, rest.trim())?;
        let m = Monomial::reduce(mode, &word).map_err(|e| perr(ln, e.to_string()))?;
        if seen.insert(m.clone(), ()).is_some() {
            return Err(perr(ln, format!("duplicate residual monomial {m}")));
        }
        residual.add_term(m, coeff);
    }
    if let Some((ln, line)) = lines.next() {
        return Err(perr(ln, format!("trailing content '{line}'")));
    }

    Ok(Certificate { bound, mode, basis, gram, squares, multipliers, residual })
}

pub fn write_certificate(path: &std::path::Path, cert: &Certificate) -> Result<(), CertificateError> {
    std::fs::write(path, serialize_certificate(cert))?;
    Ok(())
}

pub fn read_certificate(path: &std::path::Path) -> Result<Certificate, CertificateError> {
    parse_certificate(&std::fs::read_to_string(path)?)
}

/// The 25-monomial Yao basis: identity plus all degree-3 one-per-party
/// words with at most two distinct settings absent.
pub const YAO25_BASIS: &str = "\
I
A1 B2 C3
A2 B3 C1
A3 B1 C2
A1 B3 C2
A2 B1 C3
A3 B2 C1
A1 B1 C2
A1 B2 C1
A2 B1 C1
A1 B2 C2
A2 B1 C2
A2 B2 C1
A1 B1 C3
A1 B3 C1
A3 B1 C1
A1 B3 C3
A3 B1 C3
A3 B3 C1
A2 B2 C3
A2 B3 C2
A3 B2 C2
A2 B3 C3
A3 B2 C3
A3 B3 C2
";

/// Closed-form certificate for the CHSH correlator at 2*sqrt(2):
/// squares (A1 + A2 - sqrt(2) B1) and (A1 - A2 - sqrt(2) B2), each with
/// weight 1/(2 sqrt(2)).
pub fn chsh_reference_certificate() -> Certificate {
    let g = crate::games::builtin("chsh-correlator").expect("builtin");
    let schema = g.schema();
    let basis: Vec<Monomial> = ["I", "A1", "A2", "B1", "B2"]
        .iter()
        .map(|t| crate::hierarchy::parse_monomial(t, &schema).expect("fixed monomial"))
        .collect();
    let r2 = 2.0f64.sqrt();
    let w = 1.0 / (2.0 * r2);
    let squares = vec![
        Square { weight: w, coeffs: vec![0.0, 1.0, 1.0, -r2, 0.0] },
        Square { weight: w, coeffs: vec![0.0, 1.0, -1.0, 0.0, -r2] },
    ];
    Certificate {
        bound: 2.0 * r2,
        mode: Mode::Observable,
        gram: square_sum_matrix(5, &squares).expect("consistent squares"),
        basis,
        squares,
        multipliers: Vec::new(),
        residual: NCPolynomial::zero(),
    }
}

/// Closed-form block-Gram certificate for the Yao functional at 3*sqrt(3)
/// over [`YAO25_BASIS`]: a 7x7 leading block plus six rank-one all-ones
/// 3x3 blocks scaled by 1/(12 sqrt(3)).
pub fn yao_reference_certificate() -> Certificate {
    let g = crate::games::builtin("yao").expect("builtin");
    let basis = crate::hierarchy::parse_custom_basis(YAO25_BASIS, &g).expect("fixed basis");
    let s3 = 3.0f64.sqrt();
    let mut gram = DMatrix::<f64>::zeros(25, 25);
    gram[(0, 0)] = 1.5 * s3;
    for k in 1..7 {
        let sgn = if k <= 3 { -0.5 } else { 0.5 };
        gram[(0, k)] = sgn;
        gram[(k, 0)] = sgn;
        gram[(k, k)] = 0.5 / s3;
    }
    for i in 1..4 {
        for j in 4..7 {
            gram[(i, j)] = -1.0 / (6.0 * s3);
            gram[(j, i)] = -1.0 / (6.0 * s3);
        }
    }
    for b in 0..6 {
        let off = 7 + 3 * b;
        for i in 0..3 {
            for j in 0..3 {
                gram[(off + i, off + j)] = 1.0 / (12.0 * s3);
            }
        }
    }
    let squares = eigen_squares(&gram).expect("PSD by construction");
    Certificate {
        bound: 3.0 * s3,
        mode: Mode::Observable,
        basis,
        gram,
        squares,
        multipliers: Vec::new(),
        residual: NCPolynomial::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{builtin, GameForm};
    use crate::hierarchy::{
        build_moment_sdp, build_sos_sdp, generate_basis, parse_monomial, LevelSpec,
    };
    use crate::sdp::{solve, SolveOptions};

    fn mono(text: &str, game: &Game) -> Monomial {
        parse_monomial(text, &game.schema()).unwrap()
    }

    #[test]
    fn chsh_hand_certificate_verifies_exactly() {
        let g = builtin("chsh-correlator").unwrap();
        let cert = chsh_reference_certificate();
        let res = verify(&cert, &g).unwrap();
        assert!(res <= 1e-12, "residual {res:.3e}");
    }

    #[test]
    fn yao_hand_certificate_verifies_exactly() {
        let g = builtin("yao").unwrap();
        let cert = yao_reference_certificate();
        assert_eq!(cert.basis.len(), 25);
        let res = verify(&cert, &g).unwrap();
        assert!(res <= 1e-12, "residual {res:.3e}");
    }

    fn all_win_game() -> Game {
        let mut g = builtin("chsh-game").unwrap();
        if let GameForm::Probability { v, .. } = &mut g.form {
            for s in 0..2u8 {
                for t in 0..2u8 {
                    for a in 0..2u8 {
                        for b in 0..2u8 {
                            v.insert((vec![s, t], vec![a, b]), 1.0);
                        }
                    }
                }
            }
        }
        g
    }

    #[test]
    fn all_win_zero_certificate_at_one() {
        let g = all_win_game();
        let basis: Vec<Monomial> = ["I", "B1:0", "B1:1", "B2:0", "B2:1"]
            .iter()
            .map(|t| mono(t, &g))
            .collect();
        let mut multipliers = Vec::new();
        // 1 - B = -sum_{s,t,b} pi(s,t) [sum_a A_s^a B_t^b - B_t^b]
        //         -sum_t (sum_s pi(s,t)) [sum_b B_t^b - I].
        for s in 0..2u8 {
            for t in 0..2u8 {
                for b in 0..2u8 {
                    multipliers.push(Multiplier {
                        id: MultiplierId::Completeness {
                            party: 0,
                            setting: s,
                            left: 0,
                            right: (1 + 2 * t + b) as usize,
                        },
                        coeff: -0.25,
                    });
                }
            }
        }
        for t in 0..2u8 {
            multipliers.push(Multiplier {
                id: MultiplierId::Completeness { party: 1, setting: t, left: 0, right: 0 },
                coeff: -0.5,
            });
        }
        let cert = Certificate {
            bound: 1.0,
            mode: Mode::Projector,
            basis,
            gram: DMatrix::zeros(5, 5),
            squares: Vec::new(),
            multipliers,
            residual: NCPolynomial::zero(),
        };
        let res = verify(&cert, &g).unwrap();
        assert!(res <= 1e-12, "residual {res:.3e}");
    }

    fn solve_and_extract(game: &Game, spec: &LevelSpec, sos: bool) -> Certificate {
        let basis = generate_basis(game, spec).unwrap();
        let relax = if sos {
            build_sos_sdp(game, &basis).unwrap()
        } else {
            build_moment_sdp(game, &basis).unwrap()
        };
        let sol = solve(&relax.sdp, &SolveOptions::default()).unwrap();
        extract(&relax, &sol).unwrap()
    }

    #[test]
    fn chsh_extracted_certificates_verify() {
        let g = builtin("chsh-correlator").unwrap();
        let target = 2.0 * 2.0f64.sqrt();
        for sos in [false, true] {
            let cert = solve_and_extract(&g, &LevelSpec::Full(1), sos);
            assert!((cert.bound - target).abs() < 1e-6);
            let res = verify(&cert, &g).unwrap();
            assert!(res <= 1e-6, "sos={sos} residual {res:.3e}");
            assert!(cert.residual_norm() <= 1e-6);
        }
    }

    #[test]
    fn i3322_level1_certificates_have_idempotence_entries() {
        let g = builtin("i3322").unwrap();
        for sos in [false, true] {
            let cert = solve_and_extract(&g, &LevelSpec::Full(1), sos);
            assert!((cert.bound - 0.375).abs() < 1e-6);
            let idem: Vec<f64> = cert
                .multipliers
                .iter()
                .filter(|m| matches!(m.id, MultiplierId::Idempotence(_)))
                .map(|m| m.coeff)
                .collect();
            assert_eq!(idem.len(), 6);
            let res = verify(&cert, &g).unwrap();
            assert!(res <= 1e-6, "sos={sos} residual {res:.3e}");
        }
    }

    #[test]
    fn chsh_game_certificate_uses_completeness_multipliers() {
        let g = builtin("chsh-game").unwrap();
        for sos in [false, true] {
            let cert = solve_and_extract(&g, &LevelSpec::Full(1), sos);
            assert!((cert.bound - (2.0 + 2.0f64.sqrt()) / 4.0).abs() < 1e-6);
            assert!(cert
                .multipliers
                .iter()
                .any(|m| matches!(m.id, MultiplierId::Completeness { .. })));
            let res = verify(&cert, &g).unwrap();
            assert!(res <= 1e-6, "sos={sos} residual {res:.3e}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let g = builtin("chsh-game").unwrap();
        let cert = solve_and_extract(&g, &LevelSpec::Full(1), false);
        let text = serialize_certificate(&cert);
        let back = parse_certificate(&text).unwrap();
        assert_eq!(back.bound.to_bits(), cert.bound.to_bits());
        assert_eq!(back.mode, cert.mode);
        assert_eq!(back.basis, cert.basis);
        assert_eq!(back.gram, cert.gram);
        assert_eq!(back.squares.len(), cert.squares.len());
        for (a, b) in back.squares.iter().zip(&cert.squares) {
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
            assert_eq!(a.coeffs, b.coeffs);
        }
        assert_eq!(back.multipliers.len(), cert.multipliers.len());
        for (a, b) in back.multipliers.iter().zip(&cert.multipliers) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.coeff.to_bits(), b.coeff.to_bits());
        }
        let res = verify(&back, &g).unwrap();
        assert!(res <= 1e-6);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let g = builtin("chsh-correlator").unwrap();
        let cert = solve_and_extract(&g, &LevelSpec::Full(1), false);
        let mut text = serialize_certificate(&cert);
        text = text.replacen("A1", "A1:zz", 1);
        match parse_certificate(&text) {
            Err(CertificateError::Parse { line, .. }) => assert!(line > 1),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn wrong_bound_shows_up_in_residual() {
        let g = builtin("chsh-correlator").unwrap();
        let mut cert = solve_and_extract(&g, &LevelSpec::Full(1), false);
        cert.bound -= 0.5;
        let res = verify(&cert, &g).unwrap();
        assert!((res - 0.5).abs() < 1e-6);
    }

    #[test]
    fn indefinite_gram_is_rejected() {
        let g = builtin("chsh-correlator").unwrap();
        let relax = build_moment_sdp(&g, &generate_basis(&g, &LevelSpec::Full(1)).unwrap()).unwrap();
        let mut sol = solve(&relax.sdp, &SolveOptions::default()).unwrap();
        sol.dual_matrix[0][(1, 2)] += 1.0;
        sol.dual_matrix[0][(2, 1)] += 1.0;
        match extract(&relax, &sol) {
            Err(CertificateError::NotPsd(_)) => {}
            other => panic!("unexpected: {:?}", other.map(|_| ())),
        }
    }
}

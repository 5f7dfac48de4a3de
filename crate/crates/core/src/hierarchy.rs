//! Level specifications, monomial basis generation, and assembly of the
//! relaxation as an SDP in the moment-matrix (standard form) and Gram/SOS
//! (inequality form) formulations.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{AlgebraError, Generator, Mode, Monomial, NCPolynomial, Schema};
use crate::games::{Game, GameError, GameForm};
use crate::sdp::{SdpError, SdpForm, SdpProblem, SdpSolution, SparseSym};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("bad level spec: {0}")]
    Spec(String),
    #[error("basis too small: monomial {0} is not expressible as any zi' zj")]
    BasisTooSmall(String),
    #[error("empty basis")]
    EmptyBasis,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("solver did not reach optimality: {0}")]
    Solver(String),
}

/// One token of a shaped level: a plain degree cap, or a per-party degree
/// shape (e.g. "AB" = one letter of party 0 and one of party 1). A shape
/// implicitly includes every word of lower total degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeToken {
    Degree(usize),
    PartyCounts(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelSpec {
    Full(usize),
    Shaped(Vec<ShapeToken>),
    Custom(Vec<Monomial>),
}

/// Parse `full:<n>` or a shape list like `1+AB+AA`. `custom:<path>`
/// indirection is resolved by the caller (read the file, then
/// [`parse_custom_basis`]).
pub fn parse_level_spec(text: &str, num_parties: usize) -> Result<LevelSpec, HierarchyError> {
    let text = text.trim();
    if let Some(n) = text.strip_prefix("full:") {
        let n: usize = n
            .parse()
            .map_err(|_| HierarchyError::Spec(format!("bad level '{n}'")))?;
        if n == 0 {
            return Err(HierarchyError::Spec("level must be >= 1".into()));
        }
        return Ok(LevelSpec::Full(n));
    }
    if text.starts_with("custom:") {
        return Err(HierarchyError::Spec(
            "custom:<path> must be resolved by the caller".into(),
        ));
    }
    let mut tokens = Vec::new();
    for tok in text.split('+') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(HierarchyError::Spec("empty shape token".into()));
        }
        if tok.chars().all(|c| c.is_ascii_digit()) {
            let n: usize = tok
                .parse()
                .map_err(|_| HierarchyError::Spec(format!("bad degree '{tok}'")))?;
            if n == 0 {
                return Err(HierarchyError::Spec("degree token must be >= 1".into()));
            }
            tokens.push(ShapeToken::Degree(n));
        } else if tok.chars().all(|c| c.is_ascii_uppercase()) {
            let mut counts = vec![0usize; num_parties];
            for c in tok.chars() {
                let p = (c as u8 - b'A') as usize;
                if p >= num_parties {
                    return Err(HierarchyError::Spec(format!(
                        "party letter '{c}' out of range for {num_parties} parties"
                    )));
                }
                counts[p] += 1;
            }
            tokens.push(ShapeToken::PartyCounts(counts));
        } else {
            return Err(HierarchyError::Spec(format!("bad shape token '{tok}'")));
        }
    }
    if tokens.is_empty() {
        return Err(HierarchyError::Spec("empty level spec".into()));
    }
    Ok(LevelSpec::Shaped(tokens))
}

/// Parse one monomial in the notation `A1 B2` (observable) or
/// `A1:0 B2:1` (projector); `I` is the identity. Settings are 1-based in
/// the notation, outcomes 0-based.
pub fn parse_monomial(text: &str, schema: &Schema) -> Result<Monomial, HierarchyError> {
    let text = text.trim();
    if text == "I" {
        return Ok(Monomial::identity());
    }
    let mut word = Vec::new();
    for tok in text.split_whitespace() {
        let mut chars = tok.chars();
        let letter = chars
            .next()
            .ok_or_else(|| HierarchyError::Spec("empty generator token".into()))?;
        if !letter.is_ascii_uppercase() {
            return Err(HierarchyError::Spec(format!("bad generator '{tok}'")));
        }
        let party = letter as u8 - b'A';
        let rest = chars.as_str();
        let (setting_str, outcome) = match rest.split_once(':') {
            Some((s, o)) => {
                let o: u8 = o
                    .parse()
                    .map_err(|_| HierarchyError::Spec(format!("bad outcome in '{tok}'")))?;
                (s, Some(o))
            }
            None => (rest, None),
        };
        let setting: u8 = setting_str
            .parse()
            .map_err(|_| HierarchyError::Spec(format!("bad setting in '{tok}'")))?;
        if setting == 0 {
            return Err(HierarchyError::Spec(format!(
                "setting in '{tok}' is 1-based"
            )));
        }
        let g = match (schema.mode, outcome) {
            (Mode::Projector, Some(a)) => Generator::projector(party, setting - 1, a),
            (Mode::Observable, None) => Generator::observable(party, setting - 1),
            (Mode::Projector, None) => {
                return Err(HierarchyError::Spec(format!(
                    "'{tok}' lacks an outcome (projector mode)"
                )))
            }
            (Mode::Observable, Some(_)) => {
                return Err(HierarchyError::Spec(format!(
                    "'{tok}' has an outcome (observable mode)"
                )))
            }
        };
        schema.check_generator(&g)?;
        word.push(g);
    }
    let m = Monomial::reduce(schema.mode, &word)?;
    Ok(m)
}

/// Parse a custom basis file: one monomial per line, '#' comments.
pub fn parse_custom_basis(text: &str, game: &Game) -> Result<Vec<Monomial>, HierarchyError> {
    let schema = game.schema();
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_monomial(line, &schema)?);
    }
    Ok(out)
}

/// An ordered list of distinct canonical monomials, identity first.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub entries: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    pub mode: Mode,
}

impl MonomialBasis {
    fn from_entries(entries: Vec<Monomial>, mode: Mode) -> Result<Self, HierarchyError> {
        if entries.is_empty() {
            return Err(HierarchyError::EmptyBasis);
        }
        if !entries[0].is_identity() {
            return Err(HierarchyError::Spec("basis must start with identity".into()));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, m) in entries.iter().enumerate() {
            if index.insert(m.clone(), i).is_some() {
                return Err(HierarchyError::Spec(format!("duplicate basis monomial {m}")));
            }
        }
        Ok(MonomialBasis { entries, index, mode })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }
}

/// All distinct canonical monomials of degree <= n, by breadth-first
/// extension. Every canonical word of degree d+1 is some canonical word of
/// degree d times a generator, so level-by-level extension is exhaustive.
fn enumerate_full(gens: &[Generator], mode: Mode, n: usize) -> BTreeSet<Monomial> {
    let mut all: BTreeSet<Monomial> = BTreeSet::new();
    all.insert(Monomial::identity());
    let mut frontier: Vec<Monomial> = vec![Monomial::identity()];
    for d in 0..n {
        let mut next = Vec::new();
        for m in &frontier {
            for g in gens {
                let mut w = m.word().to_vec();
                w.push(*g);
                let p = match Monomial::reduce(mode, &w) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                if p.is_zero() || p.degree() != d + 1 {
                    continue;
                }
                if all.insert(p.clone()) {
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    all
}

fn party_counts(m: &Monomial, num_parties: usize) -> Vec<usize> {
    let mut counts = vec![0usize; num_parties];
    for g in m.word() {
        counts[g.party as usize] += 1;
    }
    counts
}

pub fn generate_basis(game: &Game, spec: &LevelSpec) -> Result<MonomialBasis, HierarchyError> {
    let mode = game.mode();
    let gens = game.generators();
    match spec {
        LevelSpec::Full(n) => {
            let set = enumerate_full(&gens, mode, *n);
            MonomialBasis::from_entries(set.into_iter().collect(), mode)
        }
        LevelSpec::Shaped(tokens) => {
            let max_deg = tokens
                .iter()
                .map(|t| match t {
                    ShapeToken::Degree(n) => *n,
                    ShapeToken::PartyCounts(c) => c.iter().sum(),
                })
                .max()
                .unwrap_or(0);
            let pool = enumerate_full(&gens, mode, max_deg);
            let mut set = BTreeSet::new();
            for m in &pool {
                let d = m.degree();
                let keep = tokens.iter().any(|t| match t {
                    ShapeToken::Degree(n) => d <= *n,
                    ShapeToken::PartyCounts(c) => {
                        let total: usize = c.iter().sum();
                        d < total || party_counts(m, game.num_parties) == *c
                    }
                });
                if keep {
                    set.insert(m.clone());
                }
            }
            MonomialBasis::from_entries(set.into_iter().collect(), mode)
        }
        LevelSpec::Custom(monomials) => {
            let schema = game.schema();
            let mut entries = Vec::with_capacity(monomials.len() + 1);
            let mut has_identity = false;
            for m in monomials {
                if m.is_zero() {
                    return Err(HierarchyError::Spec("annihilated monomial in basis".into()));
                }
                schema.check_word(m.word())?;
                let canon = Monomial::reduce(mode, m.word())?;
                if &canon != m {
                    return Err(HierarchyError::Spec(format!(
                        "basis monomial {m} is not canonical"
                    )));
                }
                if m.is_identity() {
                    has_identity = true;
                    continue;
                }
                entries.push(m.clone());
            }
            if !has_identity {
                return Err(HierarchyError::Spec("custom basis must contain I".into()));
            }
            let mut full = vec![Monomial::identity()];
            full.extend(entries);
            MonomialBasis::from_entries(full, mode)
        }
    }
}

/// Products zi' zj over the basis, with the unordered entries grouped into
/// adjoint classes keyed by min(m, adjoint(m)).
struct ProductTable {
    /// reduce(adjoint(zi) zj) per ordered pair; None when annihilated.
    table: Vec<Vec<Option<Monomial>>>,
    /// All ordered (i, j) pairs per exact canonical monomial.
    ordered: BTreeMap<Monomial, Vec<(usize, usize)>>,
    annihilated_ordered: Vec<(usize, usize)>,
    /// Class rep -> unordered entries (i <= j), first entry is the
    /// representative position used for L(m) lookups.
    classes: BTreeMap<Monomial, Vec<(usize, usize)>>,
}

impl ProductTable {
    fn build(basis: &MonomialBasis) -> Result<Self, HierarchyError> {
        let n = basis.len();
        let mode = basis.mode;
        let adjoints: Vec<Monomial> = basis.entries.iter().map(|m| m.adjoint(mode)).collect();
        let mut table = vec![vec![None; n]; n];
        let mut ordered: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        let mut annihilated = Vec::new();
        let mut classes: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let p = adjoints[i].concat(&basis.entries[j], mode)?;
                if p.is_zero() {
                    annihilated.push((i, j));
                    continue;
                }
                ordered.entry(p.clone()).or_default().push((i, j));
                if i <= j {
                    let rep = class_rep(&p, mode);
                    classes.entry(rep).or_default().push((i, j));
                }
                table[i][j] = Some(p);
            }
        }
        Ok(ProductTable { table, ordered, annihilated_ordered: annihilated, classes })
    }

    fn rep_entry(&self, rep: &Monomial) -> Option<(usize, usize)> {
        self.classes.get(rep).map(|v| v[0])
    }
}

fn class_rep(m: &Monomial, mode: Mode) -> Monomial {
    let adj = m.adjoint(mode);
    if adj < *m { adj } else { m.clone() }
}

/// Hermitization (m + adjoint(m)) / 2 accumulated into a polynomial.
pub(crate) fn add_herm(poly: &mut NCPolynomial, m: &Monomial, c: f64, mode: Mode) {
    let adj = m.adjoint(mode);
    if adj == *m {
        poly.add_term(m.clone(), c);
    } else {
        poly.add_term(m.clone(), 0.5 * c);
        poly.add_term(adj, 0.5 * c);
    }
}

/// A completeness relation sum_a zi' X_s^a zj - zi' zj, stored both as the
/// reduced Hermitian polynomial and as class-representative coordinates.
#[derive(Debug, Clone)]
pub struct Relation {
    pub party: u8,
    pub setting: u8,
    /// Basis positions (i, j) of the sandwiching pair zi' . zj.
    pub left: usize,
    pub right: usize,
    pub poly: NCPolynomial,
    coords: BTreeMap<Monomial, f64>,
}

/// Enumerate the completeness relations whose every word stays inside the
/// moment-index domain, dropping exact duplicates and linearly dependent
/// relations (modified Gram-Schmidt, rank tolerance 1e-10).
fn completeness_relations(
    game: &Game,
    basis: &MonomialBasis,
    table: &ProductTable,
) -> Result<Vec<Relation>, HierarchyError> {
    if basis.mode != Mode::Projector {
        return Ok(Vec::new());
    }
    if !matches!(game.form, GameForm::Probability { .. }) {
        return Ok(Vec::new());
    }
    let mode = basis.mode;
    let n = basis.len();
    let adjoints: Vec<Monomial> = basis.entries.iter().map(|m| m.adjoint(mode)).collect();

    // Dense coordinates over the class reps, for the independence test.
    let class_pos: HashMap<&Monomial, usize> = table
        .classes
        .keys()
        .enumerate()
        .map(|(k, m)| (m, k))
        .collect();
    let dim = class_pos.len();
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    let mut seen: BTreeSet<Vec<(Monomial, u64)>> = BTreeSet::new();
    let mut out = Vec::new();

    for party in 0..game.num_parties {
        for setting in 0..game.settings[party] {
            let num_outcomes = game.outcomes[party][setting];
            for i in 0..n {
                for j in 0..n {
                    let mut coords: BTreeMap<Monomial, f64> = BTreeMap::new();
                    let mut in_domain = true;
                    for a in 0..num_outcomes {
                        let g = Generator::projector(party as u8, setting as u8, a as u8);
                        let left = adjoints[i]
                            .concat(&Monomial::reduce(mode, &[g])?, mode)?
                            .concat(&basis.entries[j], mode)?;
                        if left.is_zero() {
                            continue;
                        }
                        let rep = class_rep(&left, mode);
                        if !table.classes.contains_key(&rep) {
                            in_domain = false;
                            break;
                        }
                        *coords.entry(rep).or_insert(0.0) += 1.0;
                    }
                    if !in_domain {
                        continue;
                    }
                    if let Some(w) = &table.table[i][j] {
                        let rep = class_rep(w, mode);
                        *coords.entry(rep).or_insert(0.0) -= 1.0;
                    }
                    coords.retain(|_, v| *v != 0.0);
                    if coords.is_empty() {
                        continue;
                    }
                    let key: Vec<(Monomial, u64)> =
                        coords.iter().map(|(m, v)| (m.clone(), v.to_bits())).collect();
                    if !seen.insert(key) {
                        continue;
                    }
                    let mut vec = DVector::<f64>::zeros(dim);
                    for (m, v) in &coords {
                        vec[class_pos[m]] = *v;
                    }
                    let orig_norm = vec.norm();
                    for u in &accepted {
                        let proj = u.dot(&vec);
                        vec -= u * proj;
                    }
                    if vec.norm() <= 1e-10 * (1.0 + orig_norm) {
                        continue;
                    }
                    let vn = vec.norm();
                    accepted.push(vec / vn);
                    let mut poly = NCPolynomial::zero();
                    for (m, v) in &coords {
                        add_herm(&mut poly, m, *v, mode);
                    }
                    out.push(Relation {
                        party: party as u8,
                        setting: setting as u8,
                        left: i,
                        right: j,
                        poly,
                        coords,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintKind {
    Normalization,
    EqualEntry,
    AnnihilatedZero,
    /// Index into `relations`.
    Completeness(usize),
}

#[derive(Debug, Clone)]
pub struct MomentMeta {
    pub kinds: Vec<ConstraintKind>,
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone)]
pub struct SosMeta {
    pub relations: Vec<Relation>,
    /// Relation multipliers carried by F0.
    pub lambda0: Vec<f64>,
    /// Relation multipliers carried by each F_k (aligned with
    /// sdp.constraints[1..]; index 0 is the nu variable).
    pub lambda: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum Formulation {
    Moment(MomentMeta),
    Sos(SosMeta),
}

pub struct RelaxationProblem {
    pub basis: MonomialBasis,
    pub sdp: SdpProblem,
    pub formulation: Formulation,
    /// Canonical monomial -> ordered (row, col) pairs with
    /// reduce(adjoint(zi) zj) equal to it.
    pub moment_index: BTreeMap<Monomial, Vec<(usize, usize)>>,
    pub annihilated: Vec<(usize, usize)>,
    /// Bell operator polynomial (without the constant offset).
    pub bell: NCPolynomial,
    /// Added to the SDP objective value to produce the game bound.
    pub offset: f64,
}

impl RelaxationProblem {
    /// Game-value bound extracted from a solver run on `self.sdp`.
    pub fn bound_from(&self, sol: &SdpSolution) -> f64 {
        sol.primal_value + self.offset
    }
}

pub fn build_moment_sdp(game: &Game, basis: &MonomialBasis) -> Result<RelaxationProblem, HierarchyError> {
    let bell = game.bell_operator()?;
    let mode = basis.mode;
    let n = basis.len();
    let table = ProductTable::build(basis)?;
    let relations = completeness_relations(game, basis, &table)?;

    let mut constraints: Vec<SparseSym> = Vec::new();
    let mut scalars: Vec<f64> = Vec::new();
    let mut kinds: Vec<ConstraintKind> = Vec::new();

    // (a) normalization M[0,0] = 1
    let mut g = SparseSym::new(n);
    g.push(0, 0, 1.0);
    constraints.push(g);
    scalars.push(1.0);
    kinds.push(ConstraintKind::Normalization);

    // (b) equal entries within each adjoint class
    for entries in table.classes.values() {
        let e0 = entries[0];
        for &e in &entries[1..] {
            let mut g = SparseSym::new(n);
            g.add_tr_coeff(e.0, e.1, 1.0);
            g.add_tr_coeff(e0.0, e0.1, -1.0);
            g.normalize();
            constraints.push(g);
            scalars.push(0.0);
            kinds.push(ConstraintKind::EqualEntry);
        }
    }

    // (c) annihilated products fixed to zero
    for &(i, j) in &table.annihilated_ordered {
        if i > j {
            continue;
        }
        let mut g = SparseSym::new(n);
        g.add_tr_coeff(i, j, 1.0);
        constraints.push(g);
        scalars.push(0.0);
        kinds.push(ConstraintKind::AnnihilatedZero);
    }

    // (d) completeness
    for (t, rel) in relations.iter().enumerate() {
        let mut g = SparseSym::new(n);
        for (rep, c) in &rel.coords {
            let e = table.rep_entry(rep).expect("relation stays in domain");
            g.add_tr_coeff(e.0, e.1, *c);
        }
        g.normalize();
        constraints.push(g);
        scalars.push(0.0);
        kinds.push(ConstraintKind::Completeness(t));
    }

    // objective: maximize sum of Bell coefficients times moments
    let mut obj = SparseSym::new(n);
    for (m, c) in bell.polynomial.terms() {
        let rep = class_rep(m, mode);
        let e = table
            .rep_entry(&rep)
            .ok_or_else(|| HierarchyError::BasisTooSmall(m.to_string()))?;
        obj.add_tr_coeff(e.0, e.1, c);
    }
    // standard form maximizes -Tr[G0 M]
    let mut g0 = SparseSym::new(n);
    for &(i, j, v) in &obj.entries {
        g0.push(i, j, -v);
    }
    g0.normalize();

    let sdp = SdpProblem {
        form: SdpForm::Standard,
        block_sizes: vec![n],
        cost_matrix: g0,
        constraints,
        scalars,
    };
    sdp.validate()?;
    Ok(RelaxationProblem {
        basis: basis.clone(),
        sdp,
        formulation: Formulation::Moment(MomentMeta { kinds, relations }),
        moment_index: table.ordered,
        annihilated: table.annihilated_ordered,
        bell: bell.polynomial,
        offset: bell.offset,
    })
}

pub fn build_sos_sdp(game: &Game, basis: &MonomialBasis) -> Result<RelaxationProblem, HierarchyError> {
    let bell = game.bell_operator()?;
    let mode = basis.mode;
    let n = basis.len();
    let table = ProductTable::build(basis)?;
    let relations = completeness_relations(game, basis, &table)?;

    // Reject Bell monomials outside the product domain, mirroring the
    // moment formulation's error behaviour.
    for (m, _) in bell.polynomial.terms() {
        let rep = class_rep(m, mode);
        if table.rep_entry(&rep).is_none() {
            return Err(HierarchyError::BasisTooSmall(m.to_string()));
        }
    }

    // Columns: symmetric unit matrices S_ij (i <= j), then relations.
    // Rows: raw monomial coordinates of the reduced polynomial z' F z.
    let sym_cols: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();
    let num_sym = sym_cols.len();
    let num_cols = num_sym + relations.len();

    let mut row_of: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut col_entries: Vec<Vec<(Monomial, f64)>> = Vec::with_capacity(num_cols);
    for &(i, j) in &sym_cols {
        let mut entries = Vec::new();
        if let Some(m) = &table.table[i][j] {
            // z' S_ij z = m + adjoint(m) for i < j, m for i = j
            if i == j {
                entries.push((m.clone(), 1.0));
            } else {
                let adj = m.adjoint(mode);
                if adj == *m {
                    entries.push((m.clone(), 2.0));
                } else {
                    entries.push((m.clone(), 1.0));
                    entries.push((adj, 1.0));
                }
            }
        }
        col_entries.push(entries);
    }
    for rel in &relations {
        col_entries.push(rel.poly.terms().map(|(m, c)| (m.clone(), c)).collect());
    }
    let mut target_poly = bell.polynomial.scaled(-1.0);
    target_poly.chop(0.0);
    for entries in &col_entries {
        for (m, _) in entries {
            let next = row_of.len();
            row_of.entry(m.clone()).or_insert(next);
        }
    }
    for (m, _) in target_poly.terms() {
        let next = row_of.len();
        row_of.entry(m.clone()).or_insert(next);
    }
    let num_rows = row_of.len();

    let mut a = DMatrix::<f64>::zeros(num_rows, num_cols);
    for (c, entries) in col_entries.iter().enumerate() {
        for (m, v) in entries {
            a[(row_of[m], c)] += v;
        }
    }
    let mut rhs = DVector::<f64>::zeros(num_rows);
    for (m, v) in target_poly.terms() {
        rhs[row_of[m]] = v;
    }

    // Reduced row echelon form with partial pivoting.
    let tol = 1e-10;
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut row = 0usize;
    for col in 0..num_cols {
        if row >= num_rows {
            break;
        }
        let (best_r, best_v) = (row..num_rows)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_v <= tol {
            continue;
        }
        a.swap_rows(row, best_r);
        rhs.swap_rows(row, best_r);
        let piv = a[(row, col)];
        for c in col..num_cols {
            a[(row, c)] /= piv;
        }
        rhs[row] /= piv;
        for r in 0..num_rows {
            if r == row {
                continue;
            }
            let f = a[(r, col)];
            if f != 0.0 {
                for c in col..num_cols {
                    a[(r, c)] -= f * a[(row, c)];
                }
                rhs[r] -= f * rhs[row];
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    // Consistency: rows with no pivot must have (near) zero rhs.
    for r in row..num_rows {
        if rhs[r].abs() > 1e-8 {
            return Err(HierarchyError::Sdp(SdpError::Numerical(format!(
                "SOS coefficient matching inconsistent (residual {:.3e})",
                rhs[r].abs()
            ))));
        }
    }

    // Particular solution (free variables zero).
    let mut particular = vec![0.0f64; num_cols];
    for &(r, c) in &pivots {
        particular[c] = rhs[r];
    }
    // Nullspace vectors, one per free column.
    let pivot_cols: BTreeSet<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut kernel: Vec<Vec<f64>> = Vec::new();
    for f in 0..num_cols {
        if pivot_cols.contains(&f) {
            continue;
        }
        let mut v = vec![0.0f64; num_cols];
        v[f] = 1.0;
        for &(r, c) in &pivots {
            let coeff = a[(r, f)];
            if coeff.abs() > tol {
                v[c] = -coeff;
            }
        }
        kernel.push(v);
    }

    let sym_part = |v: &[f64]| -> SparseSym {
        let mut m = SparseSym::new(n);
        for (k, &(i, j)) in sym_cols.iter().enumerate() {
            if v[k] != 0.0 {
                m.push(i, j, v[k]);
            }
        }
        m.normalize();
        m
    };
    let rel_part = |v: &[f64]| -> Vec<f64> { v[num_sym..].to_vec() };

    let f0 = sym_part(&particular);
    let lambda0 = rel_part(&particular);

    let mut f_nu = SparseSym::new(n);
    f_nu.push(0, 0, 1.0);

    let mut constraints = vec![f_nu];
    let mut scalars = vec![1.0];
    let mut lambda = vec![vec![0.0; relations.len()]];
    for v in &kernel {
        let m = sym_part(v);
        let l = rel_part(v);
        if m.entries.is_empty() && l.iter().all(|x| x.abs() <= tol) {
            continue;
        }
        constraints.push(m);
        scalars.push(0.0);
        lambda.push(l);
    }

    let sdp = SdpProblem {
        form: SdpForm::Inequality,
        block_sizes: vec![n],
        cost_matrix: f0,
        constraints,
        scalars,
    };
    sdp.validate()?;
    Ok(RelaxationProblem {
        basis: basis.clone(),
        sdp,
        formulation: Formulation::Sos(SosMeta { relations, lambda0, lambda }),
        moment_index: table.ordered,
        annihilated: table.annihilated_ordered,
        bell: bell.polynomial,
        offset: bell.offset,
    })
}

/// Moment bounds for full(1) .. full(max_level), one result per level.
pub fn level_sequence(
    game: &Game,
    max_level: usize,
    opts: &crate::sdp::SolveOptions,
) -> Vec<Result<f64, HierarchyError>> {
    (1..=max_level)
        .map(|lvl| {
            let basis = generate_basis(game, &LevelSpec::Full(lvl))?;
            let relax = build_moment_sdp(game, &basis)?;
            let sol = crate::sdp::solve(&relax.sdp, opts)?;
            if sol.status != crate::sdp::SolveStatus::Optimal {
                return Err(HierarchyError::Solver(format!("level {lvl}: {:?}", sol.status)));
            }
            Ok(relax.bound_from(&sol))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::builtin;
    use crate::sdp::{solve, SolveOptions, SolveStatus};

    fn bound(relax: &RelaxationProblem) -> f64 {
        let sol = solve(&relax.sdp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        relax.bound_from(&sol)
    }

    #[test]
    fn chsh_full1_basis_has_five_entries() {
        let g = builtin("chsh-correlator").unwrap();
        let b = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        assert_eq!(b.len(), 5);
        assert!(b.entries[0].is_identity());
    }

    #[test]
    fn i3322_basis_sizes() {
        let g = builtin("i3322").unwrap();
        let b1 = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        assert_eq!(b1.len(), 7);
        let spec = parse_level_spec("1+AB", g.num_parties).unwrap();
        let b = generate_basis(&g, &spec).unwrap();
        assert_eq!(b.len(), 16);
    }

    #[test]
    fn moment_index_covers_all_pairs() {
        let g = builtin("chsh-game").unwrap();
        let b = generate_basis(&g, &LevelSpec::Full(2)).unwrap();
        let relax = build_moment_sdp(&g, &b).unwrap();
        let counted: usize = relax.moment_index.values().map(|v| v.len()).sum();
        assert_eq!(counted + relax.annihilated.len(), b.len() * b.len());
        assert!(relax.moment_index[&Monomial::identity()].contains(&(0, 0)));
    }

    #[test]
    fn chsh_moment_and_sos_reach_tsirelson() {
        let g = builtin("chsh-correlator").unwrap();
        let b = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        let target = 2.0 * std::f64::consts::SQRT_2;
        let m = build_moment_sdp(&g, &b).unwrap();
        assert!((bound(&m) - target).abs() < 1e-6);
        let s = build_sos_sdp(&g, &b).unwrap();
        assert!((bound(&s) - target).abs() < 1e-6);
    }

    #[test]
    fn i3322_level1_is_three_eighths_and_kernel_has_six_matrices() {
        let g = builtin("i3322").unwrap();
        let b = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        let m = build_moment_sdp(&g, &b).unwrap();
        assert!((bound(&m) - 0.375).abs() < 1e-6);
        let s = build_sos_sdp(&g, &b).unwrap();
        // nu matrix plus six independent F_k
        assert_eq!(s.sdp.constraints.len(), 7);
        assert!((bound(&s) - 0.375).abs() < 1e-6);
    }

    #[test]
    fn i3322_shaped_level() {
        let g = builtin("i3322").unwrap();
        let spec = parse_level_spec("1+AB", g.num_parties).unwrap();
        let b = generate_basis(&g, &spec).unwrap();
        let m = build_moment_sdp(&g, &b).unwrap();
        assert!((bound(&m) - 0.25147090).abs() < 1e-5);
    }

    #[test]
    fn yao_custom_basis_reaches_three_root_three() {
        let g = builtin("yao").unwrap();
        let text = "\
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
        let monos = parse_custom_basis(text, &g).unwrap();
        assert_eq!(monos.len(), 25);
        let b = generate_basis(&g, &LevelSpec::Custom(monos)).unwrap();
        assert_eq!(b.len(), 25);
        let target = 3.0 * 3.0f64.sqrt();
        let s = build_sos_sdp(&g, &b).unwrap();
        assert!((bound(&s) - target).abs() < 1e-5);
        let m = build_moment_sdp(&g, &b).unwrap();
        assert!((bound(&m) - target).abs() < 1e-5);
    }

    #[test]
    fn yao_degree_two_basis_is_too_small() {
        let g = builtin("yao").unwrap();
        let b = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        match build_moment_sdp(&g, &b) {
            Err(HierarchyError::BasisTooSmall(_)) => {}
            other => panic!("unexpected: {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn all_win_game_has_bound_one() {
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
        let b = generate_basis(&g, &LevelSpec::Full(1)).unwrap();
        let m = build_moment_sdp(&g, &b).unwrap();
        assert!((bound(&m) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chsh_level_sequence_is_flat() {
        let g = builtin("chsh-correlator").unwrap();
        let seq = level_sequence(&g, 2, &SolveOptions::default());
        let target = 2.0 * std::f64::consts::SQRT_2;
        for r in &seq {
            let v = r.as_ref().unwrap();
            assert!((v - target).abs() < 1e-6);
        }
    }

    #[test]
    fn level_spec_parser() {
        assert_eq!(parse_level_spec("full:2", 2).unwrap(), LevelSpec::Full(2));
        let s = parse_level_spec("1+AB+AA", 2).unwrap();
        assert_eq!(
            s,
            LevelSpec::Shaped(vec![
                ShapeToken::Degree(1),
                ShapeToken::PartyCounts(vec![1, 1]),
                ShapeToken::PartyCounts(vec![2, 0]),
            ])
        );
        assert!(parse_level_spec("1+AQ", 2).is_err());
        assert!(parse_level_spec("full:0", 2).is_err());
        assert!(parse_level_spec("", 2).is_err());
    }

    #[test]
    fn shaped_superset_bound_is_tighter() {
        let g = builtin("i3322").unwrap();
        let s1 = parse_level_spec("1+AB", g.num_parties).unwrap();
        let s2 = parse_level_spec("1+AB+AA+BB", g.num_parties).unwrap();
        let b1 = generate_basis(&g, &s1).unwrap();
        let b2 = generate_basis(&g, &s2).unwrap();
        assert!(b2.len() > b1.len());
        let m1 = build_moment_sdp(&g, &b1).unwrap();
        let m2 = build_moment_sdp(&g, &b2).unwrap();
        assert!(bound(&m2) <= bound(&m1) + 1e-6);
    }
}

//! Independent reference oracles: exact classical values by enumeration,
//! quantum lower bounds by see-saw ascent at fixed dimension, and random
//! valid matrix assignments for ground-truthing the algebra.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{
    validate_assignment, AlgebraError, Assignment, Generator, Mode, NCPolynomial,
};
use crate::games::{Game, GameError};

pub const MAX_STRATEGIES: f64 = 1e7;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("deterministic strategy space has ~{0:.3e} elements (cap {MAX_STRATEGIES:.0e})")]
    StrategySpaceTooLarge(f64),
    #[error("invalid oracle input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// One deterministic classical strategy: tables[j][s] is party j's response
/// to setting s (an outcome index, or 0/1 encoding +1/-1 in observable mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    pub tables: Vec<Vec<u8>>,
}

/// Exact classical value by enumeration over deterministic strategies.
/// Convexity makes deterministic strategies optimal, so this is the true
/// maximum. Correlator-form games enumerate +/-1 assignments instead of
/// outcome tables; the alphabet changes, the loop does not.
pub fn classical_value(g: &Game) -> Result<f64, OracleError> {
    Ok(classical_value_with_strategy(g)?.0)
}

pub fn classical_value_with_strategy(
    g: &Game,
) -> Result<(f64, DeterministicStrategy), OracleError> {
    let bell = g.bell_operator()?;
    let mode = g.mode();

    // One slot per (party, setting); slot alphabet = outcomes (projector
    // payoffs) or {+1, -1} (observables).
    let mut slot_of = BTreeMap::new();
    let mut radix = Vec::new();
    let mut slot_party_setting = Vec::new();
    for p in 0..g.num_parties {
        for s in 0..g.settings[p] {
            slot_of.insert((p as u8, s as u8), radix.len());
            radix.push(match mode {
                Mode::Projector => g.outcomes[p][s],
                Mode::Observable => 2,
            });
            slot_party_setting.push((p, s));
        }
    }
    let count = radix.iter().map(|&r| r as f64).product::<f64>();
    if count > MAX_STRATEGIES {
        return Err(OracleError::StrategySpaceTooLarge(count));
    }

    // Terms as (coeff, per-generator slot requirements).
    enum Factor {
        Outcome(usize, u8),
        Sign(usize),
    }
    let terms: Vec<(f64, Vec<Factor>)> = bell
        .polynomial
        .terms()
        .map(|(m, c)| {
            let factors = m
                .word()
                .iter()
                .map(|gen| {
                    let slot = slot_of[&(gen.party, gen.setting)];
                    match mode {
                        Mode::Projector => Factor::Outcome(slot, gen.outcome.unwrap_or(0)),
                        Mode::Observable => Factor::Sign(slot),
                    }
                })
                .collect();
            (c, factors)
        })
        .collect();

    let nslots = radix.len();
    let mut assign = vec![0u8; nslots];
    let mut best = f64::NEG_INFINITY;
    let mut best_assign = assign.clone();
    loop {
        let mut val = bell.offset;
        for (c, factors) in &terms {
            let mut prod = *c;
            for f in factors {
                match *f {
                    Factor::Outcome(slot, a) => {
                        if assign[slot] != a {
                            prod = 0.0;
                            break;
                        }
                    }
                    Factor::Sign(slot) => {
                        if assign[slot] == 1 {
                            prod = -prod;
                        }
                    }
                }
            }
            val += prod;
        }
        if val > best {
            best = val;
            best_assign.copy_from_slice(&assign);
        }
        // Mixed-radix increment.
        let mut k = 0;
        loop {
            if k == nslots {
                let mut tables = vec![Vec::new(); g.num_parties];
                for (slot, &(p, _)) in slot_party_setting.iter().enumerate() {
                    tables[p].push(best_assign[slot]);
                }
                return Ok((best, DeterministicStrategy { tables }));
            }
            assign[k] += 1;
            if (assign[k] as usize) < radix[k] {
                break;
            }
            assign[k] = 0;
            k += 1;
        }
    }
}

/// A fixed-dimension quantum strategy: per-party measurements of dimension
/// `dim` plus a shared state on the num_parties-fold tensor space.
#[derive(Debug, Clone)]
pub struct SeeSawState {
    pub dim: usize,
    pub state: DVector<Complex64>,
    pub measurements: Assignment,
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u clamped away from 0.
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(d, d, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix the phase ambiguity so Q is Haar-distributed.
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random valid assignment for the game's schema: Haar-conjugated fixed
/// rank patterns in projector mode, Haar-conjugated random +/-1 spectra in
/// observable mode. Deterministic under `seed`.
pub fn random_valid_assignment(
    g: &Game,
    dim: usize,
    seed: u64,
) -> Result<Assignment, OracleError> {
    if dim < 1 {
        return Err(OracleError::BadInput("dimension must be >= 1".into()));
    }
    let schema = g.schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Assignment = Assignment::new();
    for p in 0..schema.num_parties() {
        for s in 0..schema.settings[p] {
            let u = haar_unitary(dim, &mut rng);
            match schema.mode {
                Mode::Projector => {
                    let nout = schema.outcomes[p][s];
                    // Consecutive index blocks of near-equal rank.
                    let mut start = 0;
                    for a in 0..nout {
                        let rank = dim / nout + usize::from(a < dim % nout);
                        let mut proj = DMatrix::<Complex64>::zeros(dim, dim);
                        for k in start..start + rank {
                            let col = u.column(k);
                            for i in 0..dim {
                                for j in 0..dim {
                                    proj[(i, j)] += col[i] * col[j].conj();
                                }
                            }
                        }
                        start += rank;
                        out.insert(
                            Generator::projector(p as u8, s as u8, a as u8),
                            hermitize(&proj),
                        );
                    }
                }
                Mode::Observable => {
                    // Balanced fixed pattern: +/-I starts are see-saw traps.
                    let signs: Vec<f64> = (0..dim)
                        .map(|k| if k < dim.div_ceil(2) { 1.0 } else { -1.0 })
                        .collect();
                    let mut o = DMatrix::<Complex64>::zeros(dim, dim);
                    for k in 0..dim {
                        let col = u.column(k);
                        for i in 0..dim {
                            for j in 0..dim {
                                o[(i, j)] += col[i] * col[j].conj() * signs[k];
                            }
                        }
                    }
                    out.insert(Generator::observable(p as u8, s as u8), hermitize(&o));
                }
            }
        }
    }
    Ok(out)
}

/// Lift a per-party local assignment (each matrix `dim` x `dim`) to the
/// product space of dimension dim^num_parties, placing party p's operator
/// in the p-th tensor slot. Different parties' lifted operators commute,
/// so the lift is a valid joint strategy assignment.
pub fn tensor_lift_assignment(g: &Game, local: &Assignment, dim: usize) -> Assignment {
    let n = g.num_parties;
    let eye = DMatrix::<Complex64>::identity(dim, dim);
    let mut out = Assignment::new();
    for (gen, m) in local {
        let mut acc = DMatrix::<Complex64>::identity(1, 1);
        for p in 0..n {
            let factor = if p == gen.party as usize { m } else { &eye };
            acc = acc.kronecker(factor);
        }
        out.insert(*gen, acc);
    }
    out
}

/// Digit of `idx` for party `p` when the tensor factors are ordered
/// party 0 (most significant) .. party n-1.
fn digit(idx: usize, p: usize, n: usize, d: usize) -> usize {
    (idx / d.pow((n - 1 - p) as u32)) % d
}

/// Tensor lift of a Bell polynomial under a per-party assignment.
fn tensor_operator(
    poly: &NCPolynomial,
    assignment: &Assignment,
    dim: usize,
    n: usize,
) -> DMatrix<Complex64> {
    let total = dim.pow(n as u32);
    let eye = DMatrix::<Complex64>::identity(dim, dim);
    let mut w = DMatrix::<Complex64>::zeros(total, total);
    for (m, c) in poly.terms() {
        let mut ops = vec![eye.clone(); n];
        for gen in m.word() {
            ops[gen.party as usize] = &ops[gen.party as usize] * &assignment[gen];
        }
        let mut lift = ops[0].clone();
        for op in &ops[1..] {
            lift = lift.kronecker(op);
        }
        w += lift * Complex64::new(c, 0.0);
    }
    hermitize(&w)
}

/// Value of a strategy: <psi| B |psi> + offset.
fn strategy_value(
    poly: &NCPolynomial,
    offset: f64,
    assignment: &Assignment,
    psi: &DVector<Complex64>,
    dim: usize,
    n: usize,
) -> f64 {
    let w = tensor_operator(poly, assignment, dim, n);
    (psi.adjoint() * &w * psi)[(0, 0)].re + offset
}

/// Conditional operators for the (party, setting) measurement update:
/// returns M_a per outcome (projector mode; index 0 only in observable
/// mode) with objective = sum_a Tr(A_s^a M_a) + const.
fn conditional_operators(
    poly: &NCPolynomial,
    assignment: &Assignment,
    psi: &DVector<Complex64>,
    dim: usize,
    n: usize,
    party: usize,
    setting: usize,
    nout: usize,
) -> Vec<DMatrix<Complex64>> {
    let total = dim.pow(n as u32);
    let eye = DMatrix::<Complex64>::identity(dim, dim);
    let mut t = vec![DMatrix::<Complex64>::zeros(dim, dim); nout];
    for (m, c) in poly.terms() {
        let mine: Vec<&Generator> = m
            .word()
            .iter()
            .filter(|gen| gen.party as usize == party)
            .collect();
        // Only terms linear in this setting's measurement move; Bell
        // operators carry at most one generator per party, so anything
        // else is constant for this update.
        if mine.len() != 1 || mine[0].setting as usize != setting {
            continue;
        }
        let target = *mine[0];
        let slot = if nout == 1 { 0 } else { target.outcome.unwrap_or(0) as usize };
        let mut ops = vec![eye.clone(); n];
        for gen in m.word() {
            if gen.party as usize != party {
                ops[gen.party as usize] = &ops[gen.party as usize] * &assignment[gen];
            }
        }
        for i in 0..total {
            for k in 0..total {
                let mut w = Complex64::new(c, 0.0);
                for (p, op) in ops.iter().enumerate() {
                    if p == party {
                        continue;
                    }
                    w *= op[(digit(i, p, n, dim), digit(k, p, n, dim))];
                    if w.norm_sqr() == 0.0 {
                        break;
                    }
                }
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                let a = digit(i, party, n, dim);
                let b = digit(k, party, n, dim);
                t[slot][(b, a)] += psi[i].conj() * w * psi[k];
            }
        }
    }
    t.iter().map(hermitize).collect()
}

/// Projector onto the strictly positive eigenspace of a Hermitian matrix.
fn positive_eigenprojector(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut p = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        if eig.eigenvalues[k] > 0.0 {
            let col = eig.eigenvectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    p[(i, j)] += col[i] * col[j].conj();
                }
            }
        }
    }
    p
}

/// One see-saw run from a seeded start; returns the certified value and the
/// per-sweep objective history.
fn seesaw_once(
    g: &Game,
    poly: &NCPolynomial,
    offset: f64,
    dim: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>), OracleError> {
    let n = g.num_parties;
    let schema = g.schema();
    let mut assignment = random_valid_assignment(g, dim, seed)?;
    let total = dim.pow(n as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ee5_aa77_0123_4567);
    let mut psi =
        DVector::<Complex64>::from_fn(total, |_, _| Complex64::new(gaussian(&mut rng), gaussian(&mut rng)));
    psi /= Complex64::new(psi.norm(), 0.0);

    let mut history = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for _sweep in 0..500 {
        // State best response: top eigenvector of the instantiated Bell
        // operator.
        let w = tensor_operator(poly, &assignment, dim, n);
        let eig = w.symmetric_eigen();
        let mut kmax = 0;
        for k in 1..total {
            if eig.eigenvalues[k] > eig.eigenvalues[kmax] {
                kmax = k;
            }
        }
        psi = eig.eigenvectors.column(kmax).into_owned();
        psi /= Complex64::new(psi.norm(), 0.0);

        // Measurement best responses, one setting at a time.
        for p in 0..n {
            for s in 0..schema.settings[p] {
                match schema.mode {
                    Mode::Observable => {
                        let t = conditional_operators(poly, &assignment, &psi, dim, n, p, s, 1);
                        // Optimal observable: sign of the conditional
                        // operator (Tr(O T) <= sum |lambda|).
                        let eig = t[0].clone().symmetric_eigen();
                        let mut o = DMatrix::<Complex64>::zeros(dim, dim);
                        for k in 0..dim {
                            let sgn = if eig.eigenvalues[k] >= 0.0 { 1.0 } else { -1.0 };
                            let col = eig.eigenvectors.column(k);
                            for i in 0..dim {
                                for j in 0..dim {
                                    o[(i, j)] += col[i] * col[j].conj() * sgn;
                                }
                            }
                        }
                        assignment.insert(Generator::observable(p as u8, s as u8), hermitize(&o));
                    }
                    Mode::Projector => {
                        let nout = schema.outcomes[p][s];
                        let t = conditional_operators(poly, &assignment, &psi, dim, n, p, s, nout);
                        // Pairwise redistribution; exact for two outcomes
                        // (P = I), an ascent pass otherwise.
                        for a in 0..nout {
                            for b in a + 1..nout {
                                let ga = Generator::projector(p as u8, s as u8, a as u8);
                                let gb = Generator::projector(p as u8, s as u8, b as u8);
                                let pa = assignment[&ga].clone();
                                let pb = assignment[&gb].clone();
                                let psum = &pa + &pb;
                                let diff = &psum * (&t[a] - &t[b]) * &psum;
                                let new_a = positive_eigenprojector(&hermitize(&diff));
                                let new_b = &psum - &new_a;
                                assignment.insert(ga, hermitize(&new_a));
                                assignment.insert(gb, hermitize(&new_b));
                            }
                        }
                    }
                }
            }
        }

        let val = strategy_value(poly, offset, &assignment, &psi, dim, n);
        history.push(val);
        let done = (val - prev).abs() <= 1e-10;
        prev = val;
        if done {
            break;
        }
    }

    // Certify: check the measurements are valid and re-evaluate directly.
    validate_assignment(&schema, &assignment, 1e-9)?;
    let certified = strategy_value(poly, offset, &assignment, &psi, dim, n);
    Ok((certified, history))
}

/// Heuristic lower bound on the entangled value at fixed local dimension:
/// alternating exact best responses (state eigenvector / per-setting
/// measurement), best over seeded restarts. Always a valid lower bound; no
/// optimality claim.
pub fn seesaw_lower_bound(
    g: &Game,
    dim: usize,
    restarts: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    if dim < 1 {
        return Err(OracleError::BadInput("dimension must be >= 1".into()));
    }
    if restarts < 1 {
        return Err(OracleError::BadInput("need at least one restart".into()));
    }
    let bell = g.bell_operator()?;
    let mut best = f64::NEG_INFINITY;
    for r in 0..restarts {
        let rseed = seed.wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (val, _) = seesaw_once(g, &bell.polynomial, bell.offset, dim, rseed)?;
        best = best.max(val);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{builtin, GameForm};

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
    fn chsh_game_classical_is_three_quarters() {
        let g = builtin("chsh-game").unwrap();
        assert_eq!(classical_value(&g).unwrap(), 0.75);
    }

    #[test]
    fn all_win_classical_is_one() {
        assert!((classical_value(&all_win_game()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chsh_correlator_classical_is_two() {
        let g = builtin("chsh-correlator").unwrap();
        assert!((classical_value(&g).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn i3322_classical_is_zero() {
        // Shifted convention: the classical optimum sits exactly at 0.
        let g = builtin("i3322").unwrap();
        assert!(classical_value(&g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn oversized_strategy_space_is_rejected() {
        let mut g = builtin("chsh-correlator").unwrap();
        g.settings = vec![13, 13];
        g.outcomes = vec![vec![2; 13], vec![2; 13]];
        match classical_value(&g) {
            Err(OracleError::StrategySpaceTooLarge(_)) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn random_assignment_is_valid_and_deterministic() {
        for name in ["chsh-game", "chsh-correlator", "i3322", "yao"] {
            let g = builtin(name).unwrap();
            let schema = g.schema();
            for dim in [1usize, 2, 3, 4] {
                let a = random_valid_assignment(&g, dim, 7).unwrap();
                assert_eq!(validate_assignment(&schema, &a, 1e-12).unwrap(), dim);
                let b = random_valid_assignment(&g, dim, 7).unwrap();
                for (k, m) in &a {
                    assert_eq!(m, &b[k], "{name} dim {dim} generator {k:?}");
                }
                let c = random_valid_assignment(&g, dim, 8).unwrap();
                assert!(a.iter().any(|(k, m)| m != &c[k]));
            }
        }
    }

    #[test]
    fn seesaw_chsh_reaches_tsirelson() {
        let g = builtin("chsh-correlator").unwrap();
        let v = seesaw_lower_bound(&g, 2, 5, 11).unwrap();
        assert!(v >= 2.0 * 2.0f64.sqrt() - 1e-6, "got {v}");
        assert!(v <= 2.0 * 2.0f64.sqrt() + 1e-6, "got {v}");
    }

    #[test]
    fn seesaw_i3322_reaches_quarter() {
        let g = builtin("i3322").unwrap();
        let v = seesaw_lower_bound(&g, 2, 20, 5).unwrap();
        assert!(v >= 0.25 - 1e-6, "got {v}");
        assert!(v <= 0.2509 + 1e-6, "got {v}");
    }

    #[test]
    fn seesaw_dim_one_is_classical() {
        for name in ["chsh-game", "chsh-correlator", "i3322"] {
            let g = builtin(name).unwrap();
            let cv = classical_value(&g).unwrap();
            let v = seesaw_lower_bound(&g, 1, 10, 3).unwrap();
            assert!(v <= cv + 1e-9, "{name}: {v} vs classical {cv}");
            assert!(v >= cv - 1e-9, "{name}: {v} vs classical {cv}");
        }
    }

    #[test]
    fn seesaw_sweeps_are_monotone() {
        for name in ["chsh-game", "chsh-correlator", "yao"] {
            let g = builtin(name).unwrap();
            let bell = g.bell_operator().unwrap();
            for seed in 0..3u64 {
                let (_, hist) =
                    seesaw_once(&g, &bell.polynomial, bell.offset, 2, seed).unwrap();
                for w in hist.windows(2) {
                    assert!(w[1] >= w[0] - 1e-12, "{name} seed {seed}: {hist:?}");
                }
            }
        }
    }
}

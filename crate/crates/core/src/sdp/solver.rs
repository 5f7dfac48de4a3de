//! Dense primal-dual path-following interior-point solver with the HKM
//! search direction and Mehrotra predictor-corrector steps.
//!
//! Internally both problem forms are reduced to the conic pair
//!   P: min Tr(C X)  s.t. Tr(A_k X) = b_k, X >= 0
//!   D: max b.y      s.t. S = C - sum_k y_k A_k >= 0,
//! solved simultaneously from an infeasible interior start.

use nalgebra::{DMatrix, DVector};

use super::problem::{BlockLayout, SdpError, SdpForm, SdpProblem, SparseSym};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_frac: f64,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 200, step_frac: 0.98, verbose: false }
    }
}

impl SolveOptions {
    /// Parse plain `key=value` pairs (tol, max_iter, step_frac, verbose).
    pub fn parse_pairs(pairs: &[String]) -> Result<Self, SdpError> {
        let mut opts = SolveOptions::default();
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| SdpError::Malformed(format!("bad option '{p}', want key=value")))?;
            match k {
                "tol" => {
                    opts.tol = v
                        .parse()
                        .map_err(|_| SdpError::Malformed(format!("bad tol '{v}'")))?
                }
                "max_iter" => {
                    opts.max_iter = v
                        .parse()
                        .map_err(|_| SdpError::Malformed(format!("bad max_iter '{v}'")))?
                }
                "step_frac" => {
                    opts.step_frac = v
                        .parse()
                        .map_err(|_| SdpError::Malformed(format!("bad step_frac '{v}'")))?
                }
                "verbose" => {
                    opts.verbose = v
                        .parse()
                        .map_err(|_| SdpError::Malformed(format!("bad verbose '{v}'")))?
                }
                other => return Err(SdpError::Malformed(format!("unknown option '{other}'"))),
            }
        }
        Ok(opts)
    }
}

/// Solver output. Orientation of the reported values follows the problem
/// form: for a standard-form problem `primal_value` is the attained
/// max -Tr[G0 Z] and `dual_value` the matching inequality-form bound
/// (primal <= dual at every iterate); for an inequality-form problem
/// `primal_value` is the attained min b'.x and `dual_value` the matching
/// standard-form bound (primal >= dual).
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Standard form: the matrix variable Z. Inequality form: the PSD
    /// slack F0 + sum x_k Fk (one dense matrix per block).
    pub primal_matrix: Vec<DMatrix<f64>>,
    /// The matrix on the other side of the pairing.
    pub dual_matrix: Vec<DMatrix<f64>>,
    /// Standard form: the multipliers y_k of Tr[Gk Z] = bk.
    /// Inequality form: the variables x_k.
    pub dual_vector: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

struct BlockWorkspace {
    layout: BlockLayout,
}

type Blocks = Vec<DMatrix<f64>>;

impl BlockWorkspace {
    fn zeros(&self) -> Blocks {
        self.layout.sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect()
    }

    fn scaled_identity(&self, s: f64) -> Blocks {
        self.layout
            .sizes
            .iter()
            .map(|&n| DMatrix::identity(n, n) * s)
            .collect()
    }
}

fn dot(a: &Blocks, b: &Blocks) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| u * v).sum::<f64>())
        .sum()
}

fn axpy(dst: &mut Blocks, src: &Blocks, s: f64) {
    for (d, m) in dst.iter_mut().zip(src) {
        *d += m * s;
    }
}

fn symmetrize(m: &mut Blocks) {
    for b in m.iter_mut() {
        let t = b.transpose();
        *b += t;
        *b *= 0.5;
    }
}

fn max_abs(m: &Blocks) -> f64 {
    m.iter()
        .flat_map(|b| b.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Cholesky with escalating diagonal jitter, for matrices sitting at the
/// cone boundary. Gives up once the jitter reaches 1e-6 of the diagonal.
fn cholesky_blocks_jittered(m: &Blocks) -> Option<Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>> {
    m.iter()
        .map(|b| {
            let n = b.nrows();
            let scale = 1.0 + b.diagonal().amax();
            let mut jitter = 1e-14 * scale;
            let mut bj = b.clone();
            loop {
                if let Some(c) = bj.clone().cholesky() {
                    return Some(c);
                }
                if jitter > 1e-6 * scale {
                    return None;
                }
                bj += DMatrix::identity(n, n) * jitter;
                jitter *= 4.0;
            }
        })
        .collect()
}

fn inverse_from_cholesky(chol: &[nalgebra::Cholesky<f64, nalgebra::Dyn>]) -> Blocks {
    chol.iter()
        .map(|c| {
            let n = c.l().nrows();
            c.solve(&DMatrix::identity(n, n))
        })
        .collect()
}

/// Largest t with P + t*D >= 0, computed per block via the Cholesky factor
/// of P and a symmetric eigendecomposition. Returns f64::INFINITY when D
/// points inside the cone.
fn max_step(p: &Blocks, d: &Blocks) -> f64 {
    let mut best = f64::INFINITY;
    for (pb, db) in p.iter().zip(d) {
        let n = pb.nrows();
        if n == 0 {
            continue;
        }
        let mut pj = pb.clone();
        let mut jitter = 1e-14 * (1.0 + pj.diagonal().amax());
        let chol = loop {
            match pj.clone().cholesky() {
                Some(c) => break c,
                None => {
                    pj += DMatrix::identity(n, n) * jitter;
                    jitter *= 4.0;
                }
            }
        };
        let l = chol.l();
        // V = L^-1 D L^-T
        let mut v = db.clone();
        l.solve_lower_triangular_mut(&mut v);
        let mut vt = v.transpose();
        l.solve_lower_triangular_mut(&mut vt);
        let sym = (vt.transpose() + vt) * 0.5;
        let eig = sym.symmetric_eigen();
        let lam_min = eig.eigenvalues.min();
        if lam_min < 0.0 {
            best = best.min(-1.0 / lam_min);
        }
    }
    best
}

/// Constraint entries localized to (block, i, j, value), expanded so every
/// off-diagonal entry appears in both mirrored positions.
struct LocalConstraint {
    full_entries: Vec<(usize, usize, usize, f64)>,
}

impl LocalConstraint {
    fn from_sparse(m: &SparseSym, layout: &BlockLayout) -> Self {
        let mut full = Vec::with_capacity(m.entries.len() * 2);
        for &(i, j, v) in &m.entries {
            let (b, li) = layout.locate(i);
            let (_, lj) = layout.locate(j);
            full.push((b, li, lj, v));
            if i != j {
                full.push((b, lj, li, v));
            }
        }
        LocalConstraint { full_entries: full }
    }

    fn dot(&self, x: &Blocks) -> f64 {
        self.full_entries
            .iter()
            .map(|&(b, i, j, v)| v * x[b][(i, j)])
            .sum()
    }
}

struct Iterate {
    x: Blocks,
    y: DVector<f64>,
    s: Blocks,
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let layout = BlockLayout::new(&problem.block_sizes);
    let ws = BlockWorkspace { layout: layout.clone() };
    let n_total: usize = problem.block_sizes.iter().sum();
    let m = problem.constraints.len();
    if m == 0 {
        return Err(SdpError::Malformed("problem has no constraints".into()));
    }

    // Reduce to the conic pair (C, A, b); the inequality form rides on the
    // dual side of the same pair.
    let c_sparse = &problem.cost_matrix;
    let a_sparse = &problem.constraints;
    let b = DVector::from_vec(problem.scalars.clone());

    let mut c_dense = ws.zeros();
    c_sparse.add_to_blocks(&mut c_dense, &layout, 1.0);
    let locals: Vec<LocalConstraint> = a_sparse
        .iter()
        .map(|a| LocalConstraint::from_sparse(a, &layout))
        .collect();

    // Interior warm start: X = S = eta I, y = 0.
    let data_norm = a_sparse
        .iter()
        .zip(problem.scalars.iter())
        .map(|(a, bk)| a.frobenius_norm() + bk.abs())
        .fold(c_sparse.frobenius_norm(), f64::max);
    let eta = 1.0 + data_norm;
    let mut it = Iterate {
        x: ws.scaled_identity(eta),
        y: DVector::zeros(m),
        s: ws.scaled_identity(eta),
    };

    // Gram matrix of the constraint maps, used for least-norm primal
    // feasibility restoration (constant, factored once).
    let gram_chol = {
        let mut q = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let mut acc = 0.0;
                for &(bk, i, j, va) in &locals[k].full_entries {
                    for &(bl, p, q2, vb) in &locals[l].full_entries {
                        if bk == bl && i == p && j == q2 {
                            acc += va * vb;
                        }
                    }
                }
                q[(k, l)] = acc;
                q[(l, k)] = acc;
            }
        }
        let scale = 1.0 + q.diagonal().amax();
        for i in 0..m {
            q[(i, i)] += 1e-13 * scale;
        }
        q.cholesky()
    };

    let b_scale = 1.0 + b.amax();
    let c_scale = 1.0 + c_sparse.max_abs();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut final_res = (f64::NAN, f64::NAN, f64::NAN);

    for iter in 0..opts.max_iter {
        iterations = iter;
        // Residuals.
        let mut rp = DVector::zeros(m); // b - A(X)
        for (k, a) in locals.iter().enumerate() {
            rp[k] = b[k] - a.dot(&it.x);
        }
        let mut rd = c_dense.clone(); // C - S - sum y_k A_k
        axpy(&mut rd, &it.s, -1.0);
        for (k, a) in a_sparse.iter().enumerate() {
            a.add_to_blocks(&mut rd, &layout, -it.y[k]);
        }

        let pobj = dot(&c_dense, &it.x);
        let dobj = b.dot(&it.y);
        let mu = dot(&it.x, &it.s) / n_total as f64;

        let rel_p = rp.amax() / b_scale;
        let rel_d = max_abs(&rd) / c_scale;
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        final_res = (rel_p, rel_d, rel_gap);
        if opts.verbose {
            eprintln!(
                "iter {iter:3}  mu {mu:9.2e}  gap {rel_gap:9.2e}  pinf {rel_p:9.2e}  dinf {rel_d:9.2e}"
            );
        }
        if rel_p <= opts.tol && rel_d <= opts.tol && rel_gap <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }

        // Factor S and form S^-1.
        let s_chol = match cholesky_blocks_jittered(&it.s) {
            Some(c) => c,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let s_inv = inverse_from_cholesky(&s_chol);

        // Schur complement M_kl = Tr(A_k X A_l S^-1); symmetric since X
        // and S^-1 are.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let mut acc = 0.0;
                for &(bk, i, j, va) in &locals[k].full_entries {
                    for &(bl, p, q, vb) in &locals[l].full_entries {
                        if bk == bl {
                            acc += va * vb * it.x[bk][(j, p)] * s_inv[bk][(q, i)];
                        }
                    }
                }
                schur[(k, l)] = acc;
                schur[(l, k)] = acc;
            }
        }

        // Jacobi-equilibrate (the diagonal spans many orders of magnitude
        // near the boundary), then regularize and factor, escalating the
        // regularization on failure.
        let d: DVector<f64> = DVector::from_fn(m, |k, _| {
            let v = schur[(k, k)];
            if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
        });
        let mut schur_eq = schur.clone();
        for k in 0..m {
            for l in 0..m {
                schur_eq[(k, l)] *= d[k] * d[l];
            }
        }
        let mut reg = 1e-12;
        let schur_chol = loop {
            let mut reg_mat = schur_eq.clone();
            for i in 0..m {
                reg_mat[(i, i)] += reg;
            }
            match reg_mat.cholesky() {
                Some(c) => break Some(c),
                None => {
                    reg *= 10.0;
                    if reg > 1e-8 {
                        break None;
                    }
                }
            }
        };
        // When even heavy regularization cannot make the equilibrated matrix
        // factor, fall back to a truncated spectral pseudo-inverse; the
        // refinement below keeps whatever accuracy is attainable.
        let schur_eig = if schur_chol.is_none() {
            let eig = schur_eq.clone().symmetric_eigen();
            let cut = 1e-13 * eig.eigenvalues.amax();
            Some((eig, cut))
        } else {
            None
        };
        // Solve through the equilibration, then refine against the
        // original matrix to recover the accuracy lost to reg.
        let schur_solve = |rhs: &DVector<f64>| -> DVector<f64> {
            let solve_eq = |r: &DVector<f64>| -> DVector<f64> {
                let scaled = DVector::from_fn(m, |k, _| r[k] * d[k]);
                let y = match (&schur_chol, &schur_eig) {
                    (Some(c), _) => c.solve(&scaled),
                    (None, Some((eig, cut))) => {
                        let proj = eig.eigenvectors.transpose() * &scaled;
                        let inv = DVector::from_fn(m, |k, _| {
                            if eig.eigenvalues[k] > *cut {
                                proj[k] / eig.eigenvalues[k]
                            } else {
                                0.0
                            }
                        });
                        &eig.eigenvectors * inv
                    }
                    (None, None) => unreachable!(),
                };
                DVector::from_fn(m, |k, _| y[k] * d[k])
            };
            let mut x = solve_eq(rhs);
            let scale = rhs.amax().max(1e-300);
            // Keep the best iterate seen: near-singular Schur matrices can
            // make the refinement diverge instead of polishing.
            let mut best = x.clone();
            let mut best_res = (rhs - &schur * &x).amax();
            for _ in 0..10 {
                if best_res <= 1e-15 * scale {
                    break;
                }
                let r = rhs - &schur * &x;
                x += solve_eq(&r);
                let res = (rhs - &schur * &x).amax();
                if res < best_res {
                    best_res = res;
                    best = x.clone();
                }
            }
            best
        };

        // Shared right-hand-side pieces.
        let t1: DVector<f64> = DVector::from_fn(m, |k, _| locals[k].dot(&s_inv));
        // W = X * Rd * S^-1 per block.
        let w: Blocks = it
            .x
            .iter()
            .zip(rd.iter())
            .zip(s_inv.iter())
            .map(|((x, r), si)| x * r * si)
            .collect();
        let t2: DVector<f64> = DVector::from_fn(m, |k, _| locals[k].dot(&w));

        let solve_direction = |sigma_mu: f64, corr: Option<&Blocks>| -> (Blocks, DVector<f64>, Blocks) {
            // corr = DX_aff * DS_aff * S^-1 for the corrector pass.
            let mut rhs = DVector::zeros(m);
            for k in 0..m {
                rhs[k] = b[k] - sigma_mu * t1[k] + t2[k];
                if let Some(u) = corr {
                    rhs[k] += locals[k].dot(u);
                }
            }
            let dy = schur_solve(&rhs);
            // DS = Rd - sum dy_k A_k
            let mut ds = rd.clone();
            for (k, a) in a_sparse.iter().enumerate() {
                a.add_to_blocks(&mut ds, &layout, -dy[k]);
            }
            // DX = sigma_mu S^-1 - X - (X DS + corr-part) S^-1
            let mut dx: Blocks = s_inv.iter().map(|si| si * sigma_mu).collect();
            axpy(&mut dx, &it.x, -1.0);
            for (bidx, d) in dx.iter_mut().enumerate() {
                *d -= &it.x[bidx] * &ds[bidx] * &s_inv[bidx];
                if let Some(u) = corr {
                    *d -= &u[bidx];
                }
            }
            symmetrize(&mut dx);
            (dx, dy, ds)
        };

        // Predictor (affine scaling).
        let (dx_aff, _dy_aff, ds_aff) = solve_direction(0.0, None);
        let ap_aff = max_step(&it.x, &dx_aff).min(1.0 / opts.step_frac) * opts.step_frac;
        let ad_aff = max_step(&it.s, &ds_aff).min(1.0 / opts.step_frac) * opts.step_frac;

        let mut x_trial = it.x.clone();
        axpy(&mut x_trial, &dx_aff, ap_aff.min(1.0));
        let mut s_trial = it.s.clone();
        axpy(&mut s_trial, &ds_aff, ad_aff.min(1.0));
        let gap_aff = dot(&x_trial, &s_trial).max(0.0);
        let sigma = (gap_aff / dot(&it.x, &it.s)).powi(3).clamp(0.0, 1.0);
        // Keep the complementarity target from collapsing far below the
        // infeasibility level, or the iterate pins to the cone boundary
        // before the residuals can be driven out.
        let infeas = rel_p.max(rel_d);
        let mu_floor = 0.3 * infeas * (1.0 + pobj.abs() + dobj.abs()) / n_total as f64;
        let sigma_mu = (sigma * mu).max(mu_floor);

        // Corrector.
        let corr: Blocks = dx_aff
            .iter()
            .zip(ds_aff.iter())
            .zip(s_inv.iter())
            .map(|((dx, ds), si)| dx * ds * si)
            .collect();
        let (dx, dy, ds) = solve_direction(sigma_mu, Some(&corr));

        let ap = (opts.step_frac * max_step(&it.x, &dx)).min(1.0);
        let ad = (opts.step_frac * max_step(&it.s, &ds)).min(1.0);
        if opts.verbose {
            let newton_err = (0..m)
                .map(|k| (locals[k].dot(&dx) - rp[k]).abs())
                .fold(0.0f64, f64::max);
            let xnorm = max_abs(&it.x);
            eprintln!(
                "        ap {ap:8.2e}  ad {ad:8.2e}  |A(dX)-rp| {newton_err:8.2e}  |X| {xnorm:8.2e}"
            );
        }
        axpy(&mut it.x, &dx, ap);
        it.y += &dy * ad;
        axpy(&mut it.s, &ds, ad);
        iterations = iter + 1;

        // Least-norm projection of X back onto the affine constraints;
        // this removes the infeasibility that roundoff in the X dS S^-1
        // products re-injects once S is nearly singular. Skipped if it
        // would push X off the cone.
        if let Some(qc) = &gram_chol {
            let mut rp2 = DVector::zeros(m);
            for (k, a) in locals.iter().enumerate() {
                rp2[k] = b[k] - a.dot(&it.x);
            }
            // Only in the boundary phase; the projection is tiny there and
            // any eigenvalue it pushes marginally negative is below the
            // noise the jittered line search already tolerates.
            if rp2.amax() <= 1e-6 * b_scale {
                let corr_y = qc.solve(&rp2);
                for (k, a) in a_sparse.iter().enumerate() {
                    a.add_to_blocks(&mut it.x, &layout, corr_y[k]);
                }
                // The projection ignores the cone; clip any (tiny)
                // negative eigenvalues it introduced, since S^-1 in the
                // Schur product magnifies them enormously.
                for blk in it.x.iter_mut() {
                    let eig = blk.clone().symmetric_eigen();
                    // Lift to a strictly positive floor rather than zero: an
                    // exactly singular X freezes the line search and makes
                    // the Schur complement exactly rank-deficient.
                    let floor = 1e-12 * (1.0 + eig.eigenvalues.amax());
                    if eig.eigenvalues.min() < floor {
                        let vals = eig.eigenvalues.map(|v| v.max(floor));
                        *blk = &eig.eigenvectors
                            * DMatrix::from_diagonal(&vals)
                            * eig.eigenvectors.transpose();
                    }
                }
            }
        }
        // Same on the dual side: S is a dependent quantity, so once the
        // residual is small snap it to the exact slack C - A*(y).
        let mut s_exact = c_dense.clone();
        for (k, a) in a_sparse.iter().enumerate() {
            a.add_to_blocks(&mut s_exact, &layout, -it.y[k]);
        }
        let drift = s_exact
            .iter()
            .zip(it.s.iter())
            .flat_map(|(a2, b2)| a2.iter().zip(b2.iter()).map(|(u, v)| (u - v).abs()))
            .fold(0.0f64, f64::max);
        if drift <= 1e-6 * c_scale {
            it.s = s_exact;
        }
    }

    let pobj = dot(&c_dense, &it.x);
    let dobj = b.dot(&it.y);
    let (rel_p, rel_d, rel_gap) = final_res;

    // Map back to the orientation of the input form (see struct docs).
    let sol = match problem.form {
        SdpForm::Standard => SdpSolution {
            status,
            primal_value: -pobj,
            dual_value: -dobj,
            primal_matrix: it.x,
            dual_matrix: it.s,
            dual_vector: it.y.iter().copied().collect(),
            iterations,
            primal_residual: rel_p,
            dual_residual: rel_d,
            gap: rel_gap,
        },
        SdpForm::Inequality => SdpSolution {
            status,
            primal_value: -dobj,
            dual_value: -pobj,
            primal_matrix: it.s,
            dual_matrix: it.x,
            dual_vector: it.y.iter().map(|v| -v).collect(),
            iterations,
            primal_residual: rel_d,
            dual_residual: rel_p,
            gap: rel_gap,
        },
    };
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_inequality_problem() {
        // minimize x s.t. x - 2.5 >= 0
        let mut f0 = SparseSym::new(1);
        f0.push(0, 0, -2.5);
        let mut f1 = SparseSym::new(1);
        f1.push(0, 0, 1.0);
        let p = SdpProblem {
            form: SdpForm::Inequality,
            block_sizes: vec![1],
            cost_matrix: f0,
            constraints: vec![f1],
            scalars: vec![1.0],
        };
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 2.5).abs() < 1e-6, "{}", sol.primal_value);
        // dual form has the same optimal value
        let sol_d = solve(&p.translate(), &SolveOptions::default()).unwrap();
        assert!((sol_d.primal_value - 2.5).abs() < 1e-6);
    }

    #[test]
    fn two_block_diagonal_problem() {
        // min x s.t. diag(x - 1, x - 3) >= 0  ->  x = 3
        let mut f0 = SparseSym::new(2);
        f0.push(0, 0, -1.0);
        f0.push(1, 1, -3.0);
        let mut f1 = SparseSym::new(2);
        f1.push(0, 0, 1.0);
        f1.push(1, 1, 1.0);
        let p = SdpProblem {
            form: SdpForm::Inequality,
            block_sizes: vec![1, 1],
            cost_matrix: f0,
            constraints: vec![f1],
            scalars: vec![1.0],
        };
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 3.0).abs() < 1e-6);
    }

    #[test]
    fn standard_form_trace_problem() {
        // max -Tr(G0 Z) s.t. Tr(Z) = 1, Z >= 0 (2x2), G0 = diag(1, -2).
        // Optimum puts all weight on the -2 eigenvalue: value 2.
        let mut g0 = SparseSym::new(2);
        g0.push(0, 0, 1.0);
        g0.push(1, 1, -2.0);
        let mut g1 = SparseSym::new(2);
        g1.push(0, 0, 1.0);
        g1.push(1, 1, 1.0);
        let p = SdpProblem {
            form: SdpForm::Standard,
            block_sizes: vec![2],
            cost_matrix: g0,
            constraints: vec![g1],
            scalars: vec![1.0],
        };
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 2.0).abs() < 1e-6);
        assert!(sol.primal_value <= sol.dual_value + 1e-8);
    }

    #[test]
    fn deterministic_iterates() {
        let mut f0 = SparseSym::new(3);
        f0.push(0, 1, -0.7);
        f0.push(2, 2, 1.3);
        f0.push(0, 0, 0.4);
        let mut f1 = SparseSym::new(3);
        f1.push(0, 0, 1.0);
        f1.push(1, 1, 1.0);
        f1.push(2, 2, 1.0);
        let mut f2 = SparseSym::new(3);
        f2.push(0, 2, 0.5);
        let p = SdpProblem {
            form: SdpForm::Inequality,
            block_sizes: vec![3],
            cost_matrix: f0,
            constraints: vec![f1, f2],
            scalars: vec![1.0, 0.25],
        };
        let a = solve(&p, &SolveOptions::default()).unwrap();
        let b = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }
}

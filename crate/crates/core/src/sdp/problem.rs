//! SDP problem containers in the standard form
//! (maximize -Tr[G0 Z] s.t. Tr[Gk Z] = bk, Z >= 0) and the inequality form
//! (minimize b'.x s.t. F0 + sum_k x_k Fk >= 0), over a direct sum of
//! real symmetric blocks.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed SDP: {0}")]
    Malformed(String),
    #[error("SDPA parse error at line {0}: {1}")]
    SdpaParse(usize, String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// A sparse real symmetric matrix: entries (i, j, v) with i <= j, each
/// standing for both mirrored positions. Indices are global over the
/// direct-sum dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSym {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        SparseSym { dim, entries: Vec::new() }
    }

    /// Set the matrix entry at (i, j) (and mirror) to `v`, accumulating.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((i, j, v));
    }

    /// Add `c` to the coefficient of X[i,j] in the linear functional
    /// Tr(self * X); off-diagonal positions contribute twice under the
    /// trace, so the stored entry is c/2 there.
    pub fn add_tr_coeff(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.push(i, j, c);
        } else {
            self.push(i, j, 0.5 * c);
        }
    }

    /// Sort entries, merge duplicates, drop exact zeros.
    pub fn normalize(&mut self) {
        self.entries
            .sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc.max(e.2.abs()))
    }

    /// Tr(self * X) against dense per-block storage.
    pub fn dot_blocks(&self, blocks: &[nalgebra::DMatrix<f64>], layout: &BlockLayout) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            let (bi, li) = layout.locate(i);
            let (bj, lj) = layout.locate(j);
            debug_assert_eq!(bi, bj);
            let x = blocks[bi][(li, lj)];
            acc += if i == j { v * x } else { 2.0 * v * x };
        }
        acc
    }

    /// Accumulate `scale * self` into dense per-block storage.
    pub fn add_to_blocks(
        &self,
        blocks: &mut [nalgebra::DMatrix<f64>],
        layout: &BlockLayout,
        scale: f64,
    ) {
        for &(i, j, v) in &self.entries {
            let (bi, li) = layout.locate(i);
            let (_, lj) = layout.locate(j);
            blocks[bi][(li, lj)] += v * scale;
            if i != j {
                blocks[bi][(lj, li)] += v * scale;
            }
        }
    }
}

/// Maps global indices of a direct sum to (block, local) pairs.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        BlockLayout { sizes: sizes.to_vec(), offsets }
    }

    pub fn total_dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn locate(&self, global: usize) -> (usize, usize) {
        // sizes lists are tiny; linear scan is fine
        for (b, &off) in self.offsets.iter().enumerate() {
            if global < off + self.sizes[b] {
                return (b, global - off);
            }
        }
        panic!("global index {global} out of range");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpForm {
    Standard,
    Inequality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub form: SdpForm,
    /// Sizes of the PSD blocks of the matrix variable / constraint matrix.
    pub block_sizes: Vec<usize>,
    /// G0 (standard) or F0 (inequality).
    pub cost_matrix: SparseSym,
    /// G_k (standard) or F_k (inequality).
    pub constraints: Vec<SparseSym>,
    /// b_k (standard) or b'_k (inequality).
    pub scalars: Vec<f64>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        let n: usize = self.block_sizes.iter().sum();
        if n == 0 {
            return Err(SdpError::Malformed("empty block structure".into()));
        }
        if self.constraints.len() != self.scalars.len() {
            return Err(SdpError::Malformed(
                "constraint/scalar count mismatch".into(),
            ));
        }
        let layout = BlockLayout::new(&self.block_sizes);
        let check = |m: &SparseSym| -> Result<(), SdpError> {
            if m.dim != n {
                return Err(SdpError::Malformed(format!(
                    "matrix dimension {} != {}",
                    m.dim, n
                )));
            }
            for &(i, j, _) in &m.entries {
                if j >= n {
                    return Err(SdpError::Malformed(format!("entry ({i},{j}) out of range")));
                }
                if layout.locate(i).0 != layout.locate(j).0 {
                    return Err(SdpError::Malformed(format!(
                        "entry ({i},{j}) crosses block boundaries"
                    )));
                }
            }
            Ok(())
        };
        check(&self.cost_matrix)?;
        for c in &self.constraints {
            check(c)?;
        }
        Ok(())
    }

    pub fn normalize(&mut self) {
        self.cost_matrix.normalize();
        for c in &mut self.constraints {
            c.normalize();
        }
    }

    /// Lagrangian dual in the other form. The matrices and scalars carry
    /// over unchanged: the dual of max -Tr[G0 Z] s.t. Tr[Gk Z] = bk, Z >= 0
    /// is min b.x s.t. G0 + sum x_k Gk >= 0, and conversely.
    pub fn translate(&self) -> SdpProblem {
        SdpProblem {
            form: match self.form {
                SdpForm::Standard => SdpForm::Inequality,
                SdpForm::Inequality => SdpForm::Standard,
            },
            block_sizes: self.block_sizes.clone(),
            cost_matrix: self.cost_matrix.clone(),
            constraints: self.constraints.clone(),
            scalars: self.scalars.clone(),
        }
    }
}

//! Cholesky factorization and solve for symmetric positive definite
//! block-tridiagonal matrices with `N` square diagonal blocks of order `nx`.
//!
//! `offdiag[i]` is the block at block-row `i + 1`, block-column `i`. The
//! factor has the same structure:
//!
//! ```text
//! L_0 L_0^T = D_0
//! M_i = E_i L_i^{-T}
//! L_{i+1} L_{i+1}^T = D_{i+1} - M_i M_i^T
//! ```
//!
//! Work and storage grow linearly in `N`.

use crate::error::{Error, Result};
use crate::level12::{gemv, trsv, TrVariant, Trans};
use crate::level3::{potrf_l, syrk_ln, trsm_rltn};
use crate::matstore::PanelMatrix;

pub struct BlockTridiagFactor {
    pub nx: usize,
    /// Lower-triangular diagonal factors `L_i`.
    pub diag: Vec<PanelMatrix<'static>>,
    /// Subdiagonal factors `M_i`.
    pub offdiag: Vec<PanelMatrix<'static>>,
    schur: PanelMatrix<'static>,
}

impl BlockTridiagFactor {
    /// Zeroed storage for `n` blocks of order `nx`, to be filled by
    /// [`block_tridiag_chol_factor_into`].
    pub fn new(nx: usize, n: usize) -> BlockTridiagFactor {
        BlockTridiagFactor {
            nx,
            diag: (0..n).map(|_| PanelMatrix::allocate(nx, nx)).collect(),
            offdiag: (0..n.saturating_sub(1))
                .map(|_| PanelMatrix::allocate(nx, nx))
                .collect(),
            schur: PanelMatrix::allocate(nx, nx),
        }
    }
}

/// Factors the matrix. A failing block Cholesky is reported with its block
/// index.
pub fn block_tridiag_chol_factor(
    nx: usize,
    diag: &[PanelMatrix<'_>],
    offdiag: &[PanelMatrix<'_>],
) -> Result<BlockTridiagFactor> {
    let mut f = BlockTridiagFactor::new(nx, diag.len());
    block_tridiag_chol_factor_into(&mut f, diag, offdiag)?;
    Ok(f)
}

/// Same as [`block_tridiag_chol_factor`], overwriting existing storage.
/// Nothing is allocated, so repeated factorizations of same-sized problems
/// cost only the arithmetic.
pub fn block_tridiag_chol_factor_into(
    f: &mut BlockTridiagFactor,
    diag: &[PanelMatrix<'_>],
    offdiag: &[PanelMatrix<'_>],
) -> Result<()> {
    let (nx, n) = (f.nx, diag.len());
    if n == 0 || offdiag.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "{} diagonal and {} off-diagonal blocks",
            n,
            offdiag.len()
        )));
    }
    if f.diag.len() != n {
        return Err(Error::Dimension(format!(
            "factor holds {} blocks, problem has {n}",
            f.diag.len()
        )));
    }
    let BlockTridiagFactor {
        diag: ld,
        offdiag: lo,
        schur,
        ..
    } = f;
    potrf_l(nx, Some(diag[0].sub(0, 0)), ld[0].sub_mut(0, 0)).map_err(|e| e.at_stage(0))?;
    for i in 0..n - 1 {
        trsm_rltn(
            nx,
            nx,
            1.0,
            ld[i].sub(0, 0),
            Some(offdiag[i].sub(0, 0)),
            lo[i].sub_mut(0, 0),
        )
        .map_err(|e| e.at_stage(i))?;
        syrk_ln(
            nx,
            nx,
            -1.0,
            lo[i].sub(0, 0),
            lo[i].sub(0, 0),
            1.0,
            Some(diag[i + 1].sub(0, 0)),
            schur.sub_mut(0, 0),
        )
        .map_err(|e| e.at_stage(i + 1))?;
        potrf_l(nx, Some(schur.sub(0, 0)), ld[i + 1].sub_mut(0, 0))
            .map_err(|e| e.at_stage(i + 1))?;
    }
    Ok(())
}

/// Solves `T x = rhs` where `rhs` stacks the `N` block right-hand sides.
pub fn block_tridiag_chol_solve(f: &BlockTridiagFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    let (nx, n) = (f.nx, f.diag.len());
    if rhs.len() != nx * n {
        return Err(Error::Dimension(format!(
            "rhs has {} entries, expected {}",
            rhs.len(),
            nx * n
        )));
    }
    let mut y = vec![0.0; nx * n];
    let mut t = vec![0.0; nx];
    // Forward: L y = rhs.
    trsv(
        TrVariant::Lnn,
        nx,
        f.diag[0].sub(0, 0),
        &rhs[..nx],
        &mut y[..nx],
    )?;
    for i in 1..n {
        let (done, rest) = y.split_at_mut(i * nx);
        gemv(
            Trans::N,
            nx,
            nx,
            -1.0,
            f.offdiag[i - 1].sub(0, 0),
            &done[(i - 1) * nx..],
            1.0,
            Some(&rhs[i * nx..]),
            &mut t,
        )?;
        trsv(TrVariant::Lnn, nx, f.diag[i].sub(0, 0), &t, &mut rest[..nx])?;
    }
    // Backward: L^T x = y.
    let mut x = vec![0.0; nx * n];
    let last = (n - 1) * nx;
    trsv(
        TrVariant::Ltn,
        nx,
        f.diag[n - 1].sub(0, 0),
        &y[last..],
        &mut x[last..],
    )?;
    for i in (0..n - 1).rev() {
        let (head, done) = x.split_at_mut((i + 1) * nx);
        gemv(
            Trans::T,
            nx,
            nx,
            -1.0,
            f.offdiag[i].sub(0, 0),
            &done[..nx],
            1.0,
            Some(&y[i * nx..]),
            &mut t,
        )?;
        trsv(
            TrVariant::Ltn,
            nx,
            f.diag[i].sub(0, 0),
            &t,
            &mut head[i * nx..],
        )?;
    }
    Ok(x)
}

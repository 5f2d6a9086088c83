//! Column-major reference code.
//!
//! The `rf_*` routines are portable small-matrix implementations with 2x2
//! register blocking and the innermost loop over `k`. The `oracle_*` routines
//! are textbook loops with a fixed summation order; they touch nothing but
//! [`ColMatrix`] and are the ground truth for the tests and for the bench
//! correctness gate.
//!
//! The `rf_*` routines take raw column-major slices with a leading dimension
//! so that any window of a [`ColMatrix`] can be passed as
//! `&m.data()[i + j * lda..]`.

use crate::error::{Error, Result};
use crate::matstore::ColMatrix;

fn check_slice(name: &str, len: usize, rows: usize, cols: usize, ld: usize) -> Result<()> {
    if rows > ld && cols > 0 {
        return Err(Error::Dimension(format!(
            "{name}: leading dimension {ld} below {rows} rows"
        )));
    }
    let need = if rows == 0 || cols == 0 {
        0
    } else {
        (cols - 1) * ld + rows
    };
    if len < need {
        return Err(Error::Dimension(format!(
            "{name}: slice of {len} holds fewer than {need} entries"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum BLayout {
    /// `B` is `n x k`, read as `B^T`.
    Nt,
    /// `B` is `k x n`.
    Nn,
}

#[allow(clippy::too_many_arguments)]
fn rf_gemm(
    layout: BLayout,
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: Option<(&[f64], usize)>,
    d: &mut [f64],
    ldd: usize,
) -> Result<()> {
    check_slice("A", a.len(), m, k, lda)?;
    match layout {
        BLayout::Nt => check_slice("B", b.len(), n, k, ldb)?,
        BLayout::Nn => check_slice("B", b.len(), k, n, ldb)?,
    }
    if let Some((c, ldc)) = c {
        check_slice("C", c.len(), m, n, ldc)?;
    }
    check_slice("D", d.len(), m, n, ldd)?;
    // (row stride, column stride) of B as seen by the product A * op(B).
    let (bs_l, bs_j) = match layout {
        BLayout::Nt => (ldb, 1),
        BLayout::Nn => (1, ldb),
    };
    let cval = |d: &[f64], i: usize, j: usize| -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        match c {
            Some((c, ldc)) => beta * c[i + j * ldc],
            None => beta * d[i + j * ldd],
        }
    };

    let mut j = 0;
    while j + 1 < n {
        let mut i = 0;
        while i + 1 < m {
            let (mut c00, mut c10, mut c01, mut c11) = (0.0, 0.0, 0.0, 0.0);
            for l in 0..k {
                let a0 = a[i + l * lda];
                let a1 = a[i + 1 + l * lda];
                let b0 = b[l * bs_l + j * bs_j];
                let b1 = b[l * bs_l + (j + 1) * bs_j];
                c00 += a0 * b0;
                c10 += a1 * b0;
                c01 += a0 * b1;
                c11 += a1 * b1;
            }
            let v = [
                alpha * c00 + cval(d, i, j),
                alpha * c10 + cval(d, i + 1, j),
                alpha * c01 + cval(d, i, j + 1),
                alpha * c11 + cval(d, i + 1, j + 1),
            ];
            d[i + j * ldd] = v[0];
            d[i + 1 + j * ldd] = v[1];
            d[i + (j + 1) * ldd] = v[2];
            d[i + 1 + (j + 1) * ldd] = v[3];
            i += 2;
        }
        if i < m {
            let (mut c00, mut c01) = (0.0, 0.0);
            for l in 0..k {
                let a0 = a[i + l * lda];
                c00 += a0 * b[l * bs_l + j * bs_j];
                c01 += a0 * b[l * bs_l + (j + 1) * bs_j];
            }
            let v0 = alpha * c00 + cval(d, i, j);
            let v1 = alpha * c01 + cval(d, i, j + 1);
            d[i + j * ldd] = v0;
            d[i + (j + 1) * ldd] = v1;
        }
        j += 2;
    }
    if j < n {
        let mut i = 0;
        while i + 1 < m {
            let (mut c00, mut c10) = (0.0, 0.0);
            for l in 0..k {
                let b0 = b[l * bs_l + j * bs_j];
                c00 += a[i + l * lda] * b0;
                c10 += a[i + 1 + l * lda] * b0;
            }
            let v0 = alpha * c00 + cval(d, i, j);
            let v1 = alpha * c10 + cval(d, i + 1, j);
            d[i + j * ldd] = v0;
            d[i + 1 + j * ldd] = v1;
            i += 2;
        }
        if i < m {
            let mut c00 = 0.0;
            for l in 0..k {
                c00 += a[i + l * lda] * b[l * bs_l + j * bs_j];
            }
            d[i + j * ldd] = alpha * c00 + cval(d, i, j);
        }
    }
    Ok(())
}

/// `D = alpha * A * B^T + beta * C`, `A` `m x k`, `B` `n x k`. `c = None`
/// reads C from D.
#[allow(clippy::too_many_arguments)]
pub fn rf_gemm_nt(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: Option<(&[f64], usize)>,
    d: &mut [f64],
    ldd: usize,
) -> Result<()> {
    rf_gemm(BLayout::Nt, m, n, k, alpha, a, lda, b, ldb, beta, c, d, ldd)
}

/// `D = alpha * A * B + beta * C`, `A` `m x k`, `B` `k x n`.
#[allow(clippy::too_many_arguments)]
pub fn rf_gemm_nn(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: Option<(&[f64], usize)>,
    d: &mut [f64],
    ldd: usize,
) -> Result<()> {
    rf_gemm(BLayout::Nn, m, n, k, alpha, a, lda, b, ldb, beta, c, d, ldd)
}

/// Cholesky of the lower triangle of the `m x m` matrix C into the lower
/// triangle of D, left-looking with 2x2 blocks. `c = None` factors D in
/// place. Returns the reciprocals of the diagonal of L.
pub fn rf_potrf_l(
    m: usize,
    c: Option<(&[f64], usize)>,
    d: &mut [f64],
    ldd: usize,
) -> Result<Vec<f64>> {
    check_slice("D", d.len(), m, m, ldd)?;
    if let Some((c, ldc)) = c {
        check_slice("C", c.len(), m, m, ldc)?;
        for j in 0..m {
            for i in j..m {
                d[i + j * ldd] = c[i + j * ldc];
            }
        }
    }
    let mut dinv = vec![0.0; m];
    let mut j = 0;
    while j < m {
        let w = if j + 1 < m { 2 } else { 1 };
        // Diagonal block.
        let (mut c00, mut c10, mut c11) = (d[j + j * ldd], 0.0, 0.0);
        if w == 2 {
            c10 = d[j + 1 + j * ldd];
            c11 = d[j + 1 + (j + 1) * ldd];
        }
        for l in 0..j {
            let x0 = d[j + l * ldd];
            c00 -= x0 * x0;
            if w == 2 {
                let x1 = d[j + 1 + l * ldd];
                c10 -= x1 * x0;
                c11 -= x1 * x1;
            }
        }
        if !(c00 > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j });
        }
        let l00 = c00.sqrt();
        let i00 = 1.0 / l00;
        d[j + j * ldd] = l00;
        dinv[j] = i00;
        let mut i11 = 0.0;
        if w == 2 {
            let l10 = c10 * i00;
            let p = c11 - l10 * l10;
            if !(p > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j + 1 });
            }
            let l11 = p.sqrt();
            i11 = 1.0 / l11;
            d[j + 1 + j * ldd] = l10;
            d[j + 1 + (j + 1) * ldd] = l11;
            dinv[j + 1] = i11;
        }
        let l10 = if w == 2 { d[j + 1 + j * ldd] } else { 0.0 };

        // Panel below the diagonal block, two rows at a time.
        let mut i = j + w;
        while i < m {
            let h = if i + 1 < m { 2 } else { 1 };
            let mut acc = [[0.0f64; 2]; 2];
            for (r, row) in acc.iter_mut().enumerate().take(h) {
                row[0] = d[i + r + j * ldd];
                if w == 2 {
                    row[1] = d[i + r + (j + 1) * ldd];
                }
            }
            for l in 0..j {
                let y0 = d[j + l * ldd];
                let y1 = if w == 2 { d[j + 1 + l * ldd] } else { 0.0 };
                for (r, row) in acc.iter_mut().enumerate().take(h) {
                    let x = d[i + r + l * ldd];
                    row[0] -= x * y0;
                    row[1] -= x * y1;
                }
            }
            for (r, row) in acc.iter().enumerate().take(h) {
                let v0 = row[0] * i00;
                d[i + r + j * ldd] = v0;
                if w == 2 {
                    d[i + r + (j + 1) * ldd] = (row[1] - v0 * l10) * i11;
                }
            }
            i += h;
        }
        j += w;
    }
    Ok(dinv)
}

// ---------------------------------------------------------------------------
// Oracles

fn dim_err(what: &str) -> Error {
    Error::Dimension(what.to_string())
}

/// `alpha * A * B + beta * C`. Transposes are passed in explicitly via
/// [`ColMatrix::transpose`].
pub fn oracle_gemm(
    alpha: f64,
    a: &ColMatrix,
    b: &ColMatrix,
    beta: f64,
    c: Option<&ColMatrix>,
) -> Result<ColMatrix> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(dim_err("oracle_gemm: inner dimensions differ"));
    }
    if let Some(c) = c {
        if c.rows() != m || c.cols() != n {
            return Err(dim_err("oracle_gemm: C shape"));
        }
    }
    Ok(ColMatrix::from_fn(m, n, |i, j| {
        let mut s = 0.0;
        for l in 0..k {
            s += a[(i, l)] * b[(l, j)];
        }
        let cij = c.map_or(0.0, |c| c[(i, j)]);
        alpha * s + beta * cij
    }))
}

/// Lower triangle of `alpha * A * B^T + beta * C`; the strict upper
/// triangle of the result is zero.
pub fn oracle_syrk(
    alpha: f64,
    a: &ColMatrix,
    b: &ColMatrix,
    beta: f64,
    c: Option<&ColMatrix>,
) -> Result<ColMatrix> {
    let full = oracle_gemm(alpha, a, &b.transpose(), beta, c)?;
    if full.rows() != full.cols() {
        return Err(dim_err("oracle_syrk: result not square"));
    }
    Ok(lower(&full))
}

/// Lower triangle of `a` (strict upper part zeroed).
pub fn lower(a: &ColMatrix) -> ColMatrix {
    ColMatrix::from_fn(
        a.rows(),
        a.cols(),
        |i, j| if i >= j { a[(i, j)] } else { 0.0 },
    )
}

/// Upper triangle of `a` (strict lower part zeroed).
pub fn upper(a: &ColMatrix) -> ColMatrix {
    ColMatrix::from_fn(
        a.rows(),
        a.cols(),
        |i, j| if i <= j { a[(i, j)] } else { 0.0 },
    )
}

/// `alpha * B * tril(A)`.
pub fn oracle_trmm(alpha: f64, b: &ColMatrix, a: &ColMatrix) -> Result<ColMatrix> {
    oracle_gemm(alpha, b, &lower(a), 0.0, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uplo {
    Lower,
    Upper,
}

/// Solution X of `op(A) * X = alpha * B` (left) or `X * op(A) = alpha * B`
/// (right), where `A` is the given triangle of `a`, transposed when
/// `trans`, with an implicit unit diagonal when `unit`.
pub fn oracle_trsm(
    side: Side,
    uplo: Uplo,
    trans: bool,
    unit: bool,
    alpha: f64,
    a: &ColMatrix,
    b: &ColMatrix,
) -> Result<ColMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(dim_err("oracle_trsm: A not square"));
    }
    let mut t = match uplo {
        Uplo::Lower => lower(a),
        Uplo::Upper => upper(a),
    };
    if unit {
        for i in 0..n {
            t[(i, i)] = 1.0;
        }
    }
    let mut t_lower = uplo == Uplo::Lower;
    if trans {
        t = t.transpose();
        t_lower = !t_lower;
    }
    // Right side: X T = B  <=>  T^T X^T = B^T.
    let rhs = match side {
        Side::Left => b.clone(),
        Side::Right => {
            t = t.transpose();
            t_lower = !t_lower;
            b.transpose()
        }
    };
    if rhs.rows() != n {
        return Err(dim_err("oracle_trsm: B shape"));
    }
    let cols = rhs.cols();
    let mut x = ColMatrix::zeros(n, cols);
    for c in 0..cols {
        let order: Vec<usize> = if t_lower {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        };
        for &i in &order {
            let mut s = alpha * rhs[(i, c)];
            for &l in order.iter().take_while(|&&l| l != i) {
                s -= t[(i, l)] * x[(l, c)];
            }
            let piv = t[(i, i)];
            if piv == 0.0 {
                return Err(Error::SingularTriangle { col: i });
            }
            x[(i, c)] = s / piv;
        }
    }
    Ok(match side {
        Side::Left => x,
        Side::Right => x.transpose(),
    })
}

/// Textbook column Cholesky of the lower triangle of `c`.
pub fn oracle_potrf(c: &ColMatrix) -> Result<ColMatrix> {
    let n = c.rows();
    if c.cols() != n {
        return Err(dim_err("oracle_potrf: not square"));
    }
    let mut l = ColMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = c[(j, j)];
        for p in 0..j {
            s -= l[(j, p)] * l[(j, p)];
        }
        if !(s > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j });
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = c[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Outer-product LU with partial pivoting (largest magnitude, lowest index
/// on ties). Returns the packed `L\U` and the transposition list.
pub fn oracle_getrf(c: &ColMatrix) -> Result<(ColMatrix, Vec<usize>)> {
    let (m, n) = (c.rows(), c.cols());
    let mut a = ColMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            a[(i, j)] = c[(i, j)];
        }
    }
    let k = m.min(n);
    let mut ipiv = Vec::with_capacity(k);
    for j in 0..k {
        let mut p = j;
        for i in j + 1..m {
            if a[(i, j)].abs() > a[(p, j)].abs() {
                p = i;
            }
        }
        ipiv.push(p);
        if a[(p, j)] == 0.0 {
            return Err(Error::ZeroPivot { index: j });
        }
        if p != j {
            for col in 0..n {
                let t = a[(j, col)];
                a[(j, col)] = a[(p, col)];
                a[(p, col)] = t;
            }
        }
        let piv = a[(j, j)];
        for i in j + 1..m {
            let l = a[(i, j)] / piv;
            a[(i, j)] = l;
            for col in j + 1..n {
                let v = a[(i, col)] - l * a[(j, col)];
                a[(i, col)] = v;
            }
        }
    }
    Ok((a, ipiv))
}

/// Unit lower `L` (`m x k`) and upper `U` (`k x n`) from a packed `L\U`.
pub fn split_lu(lu: &ColMatrix) -> (ColMatrix, ColMatrix) {
    let (m, n) = (lu.rows(), lu.cols());
    let k = m.min(n);
    let l = ColMatrix::from_fn(m, k, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => lu[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let u = ColMatrix::from_fn(k, n, |i, j| if i <= j { lu[(i, j)] } else { 0.0 });
    (l, u)
}

/// Applies a transposition list to the rows of `a`, first entry first.
pub fn permute_rows(a: &ColMatrix, ipiv: &[usize]) -> ColMatrix {
    let mut p = a.clone();
    for (k, &r) in ipiv.iter().enumerate() {
        for c in 0..a.cols() {
            let t = p[(k, c)];
            p[(k, c)] = p[(r, c)];
            p[(r, c)] = t;
        }
    }
    p
}

/// Unblocked LQ by one Householder reflector per row. Returns `L` (`m x k`)
/// and the explicit `Q` (`k x n`), `k = min(m, n)`, with `C = L * Q`.
pub fn oracle_gelqf(c: &ColMatrix) -> Result<(ColMatrix, ColMatrix)> {
    let (m, n) = (c.rows(), c.cols());
    let k = m.min(n);
    let mut a = ColMatrix::from_fn(m, n, |i, j| c[(i, j)]);
    // Full n x n orthogonal accumulator, rows of Q.
    let mut q = ColMatrix::identity(n);
    for i in 0..k {
        let norm2: f64 = (i..n).map(|j| a[(i, j)] * a[(i, j)]).sum();
        let tail2: f64 = (i + 1..n).map(|j| a[(i, j)] * a[(i, j)]).sum();
        if tail2 == 0.0 {
            continue;
        }
        let alpha = a[(i, i)];
        let norm = norm2.sqrt();
        let beta = if alpha >= 0.0 { -norm } else { norm };
        // v = x - beta * e_i, H = I - 2 v v^T / (v^T v).
        let mut v = vec![0.0; n];
        for (j, vj) in v.iter_mut().enumerate().skip(i) {
            *vj = a[(i, j)];
        }
        v[i] -= beta;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for r in 0..m {
            let s: f64 = (i..n).map(|j| a[(r, j)] * v[j]).sum();
            let f = 2.0 * s / vv;
            for j in i..n {
                let val = a[(r, j)] - f * v[j];
                a[(r, j)] = val;
            }
        }
        // Q <- H * Q, so that A_original = A_final * Q.
        for col in 0..n {
            let s: f64 = (i..n).map(|j| v[j] * q[(j, col)]).sum();
            let f = 2.0 * s / vv;
            for j in i..n {
                let val = q[(j, col)] - f * v[j];
                q[(j, col)] = val;
            }
        }
    }
    let l = ColMatrix::from_fn(m, k, |i, j| if i >= j { a[(i, j)] } else { 0.0 });
    Ok((l, q.block(0, 0, k, n)))
}

/// `||a - b||_F / max(||b||_F, tiny)`.
pub fn rel_err(a: &ColMatrix, b: &ColMatrix) -> f64 {
    let nb = b.norm_fro();
    a.dist_fro(b) / if nb > 0.0 { nb } else { f64::MIN_POSITIVE }
}

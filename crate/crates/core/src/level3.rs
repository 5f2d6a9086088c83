//! Level-3 and factorization routines.
//!
//! Each routine is two loops around a kernel: the outer loop walks row blocks
//! of the result and the inner loop walks column blocks, so the `mr` rows of
//! the left factor stay hot while the right factor streams past. There is no
//! cache blocking. Interior tiles use the nominal store, the last row and
//! column blocks the variable-size store, and destinations that do not start
//! on a panel top the generalized store.
//!
//! Factorizations are tiled the same way, with the kernel block size doubling
//! as the LAPACK block size: `potrf` is `trsm_rltn` kernels below the diagonal
//! and `potrf` kernels on it, `getrf` panels are updated with `gemm_nn`, and
//! `gelqf` applies blocks of four reflectors with one `gemm_nt`/`gemm_nn` pair.
//!
//! Argument order follows the usual convention: sizes, then scalars and
//! operands, then the output. `C` is passed as `Option`; `None` means C is
//! the same window as D (in-place update). Partially overlapping operands
//! are not supported.

use crate::error::{Error, Result};
use crate::kernels::{self, KernelShape, StoreSpec, NR};
use crate::matstore::{memsize_panel_matrix, PanelMatrix, SubMut, SubRef, ALIGN, PS};
use crate::raw::{aligned_operand, copy_window, Scratch, Win};

/// Row blocks `(start, mr)`: 8-row blocks while more than four rows remain.
fn row_blocks(m: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut i = 0;
    std::iter::from_fn(move || {
        if i >= m {
            return None;
        }
        let mr = if m - i > PS { 8 } else { 4 };
        let out = (i, mr);
        i += mr;
        Some(out)
    })
}

fn shape_of(mr: usize) -> KernelShape {
    if mr == 8 {
        KernelShape::K8X4
    } else {
        KernelShape::K4X4
    }
}

macro_rules! by_mr {
    ($mr:expr, $f:ident ( $($arg:expr),* $(,)? )) => {
        if $mr == 8 { $f::<8>($($arg),*) } else { $f::<4>($($arg),*) }
    };
}

fn c_win(c: &Option<SubRef<'_>>) -> Option<Win> {
    c.as_ref().map(Win::from_ref)
}

fn check_c(c: &Option<SubRef<'_>>, rows: usize, cols: usize) -> Result<()> {
    c.as_ref().map_or(Ok(()), |c| c.check("C", rows, cols))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Writeback {
    Full,
    Lower,
}

/// Runs `f(c, d)` with `d` panel aligned. When the real destination is not
/// aligned, `f` works in place on an aligned copy of the input which is then
/// copied back (the full window or only its lower trapezoid).
unsafe fn on_aligned_output<R>(
    rows: usize,
    cols: usize,
    c: Option<Win>,
    d: Win,
    writeback: Writeback,
    f: impl FnOnce(Option<Win>, Win) -> R,
) -> R {
    if d.aligned() {
        return f(c, d);
    }
    let mut s = Scratch::copy_of(c.unwrap_or(d), rows, cols);
    let sw = s.win();
    let out = f(None, sw);
    match writeback {
        Writeback::Full => copy_window(rows, cols, sw, d),
        Writeback::Lower => {
            for col in 0..cols.min(rows) {
                for r in col..rows {
                    d.set(r, col, sw.at(r, col));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// gemm

pub(crate) unsafe fn gemm_nt_raw(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (a, _sa) = aligned_operand(a, m, k);
    let (b, _sb) = aligned_operand(b, n, k);
    let off = d.row_offset();
    for (i, mr) in row_blocks(m) {
        let km = mr.min(m - i);
        let shape = shape_of(mr);
        for j in (0..n).step_by(NR) {
            let kn = NR.min(n - j);
            let spec = StoreSpec::for_tile(shape, km, kn, off);
            let ct = c.map(|c| c.shift(i, j));
            by_mr!(
                mr,
                gemm_nt_tile(
                    k,
                    alpha,
                    a.shift(i, 0),
                    b.shift(j, 0),
                    beta,
                    ct,
                    d.shift(i, j),
                    spec
                )
            );
        }
    }
}

#[inline(always)]
unsafe fn gemm_nt_tile<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
    spec: StoreSpec,
) {
    kernels::gemm_nt_blk::<MR>(k, alpha, a, b, beta, c, d, spec, false)
}

/// `D = alpha * A * B^T + beta * C` with `A` `m x k` and `B` `n x k`.
pub fn gemm_nt(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    a.check("A", m, k)?;
    b.check("B", n, k)?;
    check_c(&c, m, n)?;
    d.check("D", m, n)?;
    let (aw, bw, cw, dw) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c_win(&c),
        Win::from_mut(&mut d),
    );
    unsafe { gemm_nt_raw(m, n, k, alpha, aw, bw, beta, cw, dw) };
    Ok(())
}

pub(crate) unsafe fn gemm_nn_raw(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (a, _sa) = aligned_operand(a, m, k);
    let off = d.row_offset();
    for (i, mr) in row_blocks(m) {
        let km = mr.min(m - i);
        let shape = shape_of(mr);
        for j in (0..n).step_by(NR) {
            let kn = NR.min(n - j);
            let spec = StoreSpec::for_tile(shape, km, kn, off);
            let ct = c.map(|c| c.shift(i, j));
            by_mr!(
                mr,
                gemm_nn_tile(
                    k,
                    alpha,
                    a.shift(i, 0),
                    b.shift(0, j),
                    beta,
                    ct,
                    d.shift(i, j),
                    spec
                )
            );
        }
    }
}

#[inline(always)]
unsafe fn gemm_nn_tile<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
    spec: StoreSpec,
) {
    kernels::gemm_nn_blk::<MR>(k, alpha, a, b, beta, c, d, spec)
}

/// `D = alpha * A * B + beta * C` with `A` `m x k` and `B` `k x n`.
pub fn gemm_nn(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    a.check("A", m, k)?;
    b.check("B", k, n)?;
    check_c(&c, m, n)?;
    d.check("D", m, n)?;
    let (aw, bw, cw, dw) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c_win(&c),
        Win::from_mut(&mut d),
    );
    unsafe { gemm_nn_raw(m, n, k, alpha, aw, bw, beta, cw, dw) };
    Ok(())
}

// ---------------------------------------------------------------------------
// syrk / trmm

pub(crate) unsafe fn syrk_ln_raw(
    m: usize,
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
) {
    if m == 0 {
        return;
    }
    let (a, _sa) = aligned_operand(a, m, k);
    let (b, _sb) = aligned_operand(b, m, k);
    let off = d.row_offset();
    let shape = KernelShape::K4X4;
    for i in (0..m).step_by(PS) {
        let km = PS.min(m - i);
        for j in (0..=i).step_by(NR) {
            let kn = NR.min(m - j);
            let spec = StoreSpec::for_tile(shape, km, kn, off);
            let ct = c.map(|c| c.shift(i, j));
            kernels::gemm_nt_blk::<4>(
                k,
                alpha,
                a.shift(i, 0),
                b.shift(j, 0),
                beta,
                ct,
                d.shift(i, j),
                spec,
                i == j,
            );
        }
    }
}

/// Lower triangle of `D = alpha * A * B^T + beta * C`, all `m x m`, with `A`
/// and `B` `m x k` (they may differ). The strict upper triangle of D is not
/// written.
pub fn syrk_ln(
    m: usize,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    a.check("A", m, k)?;
    b.check("B", m, k)?;
    check_c(&c, m, m)?;
    d.check("D", m, m)?;
    let (aw, bw, cw, dw) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c_win(&c),
        Win::from_mut(&mut d),
    );
    unsafe { syrk_ln_raw(m, k, alpha, aw, bw, beta, cw, dw) };
    Ok(())
}

pub(crate) unsafe fn trmm_rlnn_raw(m: usize, n: usize, alpha: f64, a: Win, b: Option<Win>, d: Win) {
    if m == 0 || n == 0 {
        return;
    }
    // The left factor is read along panels; in place it is D itself, and
    // ascending column blocks only overwrite columns no later block reads.
    let (bw, _sb) = match b {
        Some(b) => aligned_operand(b, m, n),
        None if d.aligned() => (d, None),
        None => aligned_operand(d, m, n),
    };
    let off = d.row_offset();
    for (i, mr) in row_blocks(m) {
        let km = mr.min(m - i);
        let shape = shape_of(mr);
        for j in (0..n).step_by(NR) {
            let kn = NR.min(n - j);
            let spec = StoreSpec::for_tile(shape, km, kn, off);
            by_mr!(
                mr,
                trmm_tile(
                    n - j,
                    alpha,
                    bw.shift(i, j),
                    a.shift(j, j),
                    d.shift(i, j),
                    spec
                )
            );
        }
    }
}

#[inline(always)]
unsafe fn trmm_tile<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    d: Win,
    spec: StoreSpec,
) {
    kernels::trmm_rlnn_blk::<MR>(k, alpha, a, b, d, spec)
}

/// `D = alpha * B * A` with `A` `n x n` lower triangular (its strict upper
/// triangle is never read) and `B`, `D` `m x n`. `b == None` computes in
/// place on D.
pub fn trmm_rlnn(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    a.check("A", n, n)?;
    if let Some(b) = &b {
        b.check("B", m, n)?;
    }
    d.check("D", m, n)?;
    let (aw, bw, dw) = (
        Win::from_ref(&a),
        b.as_ref().map(Win::from_ref),
        Win::from_mut(&mut d),
    );
    unsafe { trmm_rlnn_raw(m, n, alpha, aw, bw, dw) };
    Ok(())
}

// ---------------------------------------------------------------------------
// trsm

/// Side/triangle/transpose/diagonal of a triangular solve, named after the
/// routine suffix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrsmVariant {
    /// `A * D = alpha * B`, A lower, unit diagonal.
    Llnu,
    /// `A * D = alpha * B`, A upper.
    Lunn,
    /// `D * A^T = alpha * B`, A lower.
    Rltn,
    /// `D * A^T = alpha * B`, A lower, unit diagonal.
    Rltu,
    /// `D * A^T = alpha * B`, A upper.
    Rutn,
}

impl TrsmVariant {
    pub const ALL: [TrsmVariant; 5] = [
        TrsmVariant::Llnu,
        TrsmVariant::Lunn,
        TrsmVariant::Rltn,
        TrsmVariant::Rltu,
        TrsmVariant::Rutn,
    ];

    pub fn is_left(self) -> bool {
        matches!(self, TrsmVariant::Llnu | TrsmVariant::Lunn)
    }

    pub fn is_unit(self) -> bool {
        matches!(self, TrsmVariant::Llnu | TrsmVariant::Rltu)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrsmVariant::Llnu => "llnu",
            TrsmVariant::Lunn => "lunn",
            TrsmVariant::Rltn => "rltn",
            TrsmVariant::Rltu => "rltu",
            TrsmVariant::Rutn => "rutn",
        }
    }
}

/// Reciprocals of the first `n` diagonal entries of `a`: reused from a
/// factorization when valid, otherwise computed once per column.
fn diag_reciprocals(a: &SubRef<'_>, n: usize) -> Result<Vec<f64>> {
    if a.dinv_valid && a.ai == 0 && a.aj == 0 && a.dinv.len() >= n {
        return Ok(a.dinv[..n].to_vec());
    }
    (0..n)
        .map(|j| {
            let v = a.get(j, j)?;
            if v == 0.0 {
                Err(Error::SingularTriangle { col: j })
            } else {
                Ok(1.0 / v)
            }
        })
        .collect()
}

pub(crate) unsafe fn trsm_raw(
    variant: TrsmVariant,
    m: usize,
    n: usize,
    alpha: f64,
    a: Win,
    dinv: &[f64],
    b: Option<Win>,
    d: Win,
) {
    if m == 0 || n == 0 {
        return;
    }
    let order = if variant.is_left() { m } else { n };
    let (a, _sa) = aligned_operand(a, order, order);
    on_aligned_output(m, n, b, d, Writeback::Full, |b, d| match variant {
        TrsmVariant::Rltn | TrsmVariant::Rltu => {
            for (i, mr) in row_blocks(m) {
                let km = mr.min(m - i);
                for j in (0..n).step_by(NR) {
                    let kn = NR.min(n - j);
                    let spec = StoreSpec::for_tile(shape_of(mr), km, kn, 0);
                    let bt = b.map(|b| b.shift(i, j));
                    by_mr!(
                        mr,
                        rltn_tile(
                            j,
                            d.shift(i, 0),
                            a.shift(j, 0),
                            alpha,
                            bt,
                            d.shift(i, j),
                            a.shift(j, j),
                            &dinv[j..],
                            spec
                        )
                    );
                }
            }
        }
        TrsmVariant::Rutn => {
            let blocks: Vec<usize> = (0..n).step_by(NR).collect();
            for (i, mr) in row_blocks(m) {
                let km = mr.min(m - i);
                for &j in blocks.iter().rev() {
                    let kn = NR.min(n - j);
                    let spec = StoreSpec::for_tile(shape_of(mr), km, kn, 0);
                    let bt = b.map(|b| b.shift(i, j));
                    let k = n - j - kn;
                    by_mr!(
                        mr,
                        rutn_tile(
                            k,
                            d.shift(i, j + kn),
                            a.shift(j, j + kn),
                            alpha,
                            bt,
                            d.shift(i, j),
                            a.shift(j, j),
                            &dinv[j..],
                            spec
                        )
                    );
                }
            }
        }
        TrsmVariant::Llnu => {
            for (i, mr) in row_blocks(m) {
                let km = mr.min(m - i);
                for j in (0..n).step_by(NR) {
                    let kn = NR.min(n - j);
                    let spec = StoreSpec::for_tile(shape_of(mr), km, kn, 0);
                    let bt = b.map(|b| b.shift(i, j));
                    by_mr!(
                        mr,
                        llnu_tile(
                            i,
                            a.shift(i, 0),
                            d.shift(0, j),
                            alpha,
                            bt,
                            d.shift(i, j),
                            a.shift(i, i),
                            spec
                        )
                    );
                }
            }
        }
        TrsmVariant::Lunn => {
            let blocks: Vec<(usize, usize)> = row_blocks(m).collect();
            for &(i, mr) in blocks.iter().rev() {
                let km = mr.min(m - i);
                let k = m - i - km;
                for j in (0..n).step_by(NR) {
                    let kn = NR.min(n - j);
                    let spec = StoreSpec::for_tile(shape_of(mr), km, kn, 0);
                    let bt = b.map(|b| b.shift(i, j));
                    by_mr!(
                        mr,
                        lunn_tile(
                            k,
                            a.shift(i, i + km),
                            d.shift(i + km, j),
                            alpha,
                            bt,
                            d.shift(i, j),
                            a.shift(i, i),
                            &dinv[i..],
                            spec
                        )
                    );
                }
            }
        }
    })
}

#[inline(always)]
unsafe fn rltn_tile<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    alpha: f64,
    c: Option<Win>,
    d: Win,
    e: Win,
    dinv: &[f64],
    spec: StoreSpec,
) {
    kernels::trsm_rltn_blk::<MR>(k, a, b, alpha, c, d, e, dinv, spec)
}

#[inline(always)]
unsafe fn rutn_tile<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    alpha: f64,
    c: Option<Win>,
    d: Win,
    e: Win,
    dinv: &[f64],
    spec: StoreSpec,
) {
    kernels::trsm_rutn_blk::<MR>(k, a, b, alpha, c, d, e, dinv, spec)
}

#[inline(always)]
unsafe fn llnu_tile<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    alpha: f64,
    c: Option<Win>,
    d: Win,
    e: Win,
    spec: StoreSpec,
) {
    kernels::trsm_llnu_blk::<MR>(k, a, b, alpha, c, d, e, spec)
}

#[inline(always)]
unsafe fn lunn_tile<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    alpha: f64,
    c: Option<Win>,
    d: Win,
    e: Win,
    dinv: &[f64],
    spec: StoreSpec,
) {
    kernels::trsm_lunn_blk::<MR>(k, a, b, alpha, c, d, e, dinv, spec)
}

/// Triangular solve with `m x n` right-hand side `B` and solution `D`; see
/// [`TrsmVariant`]. `A` is `m x m` for left variants, `n x n` for right ones.
/// Only the referenced triangle of `A` is read. Non-unit variants reuse A's
/// inverse diagonal when A carries a valid one at origin `(0, 0)`.
pub fn trsm(
    variant: TrsmVariant,
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    let order = if variant.is_left() { m } else { n };
    a.check("A", order, order)?;
    if let Some(b) = &b {
        b.check("B", m, n)?;
    }
    d.check("D", m, n)?;
    if m == 0 || n == 0 {
        return Ok(());
    }
    let dinv = if variant.is_unit() {
        vec![1.0; order]
    } else {
        diag_reciprocals(&a, order)?
    };
    let (aw, bw, dw) = (
        Win::from_ref(&a),
        b.as_ref().map(Win::from_ref),
        Win::from_mut(&mut d),
    );
    unsafe { trsm_raw(variant, m, n, alpha, aw, &dinv, bw, dw) };
    Ok(())
}

pub fn trsm_llnu(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    d: SubMut<'_>,
) -> Result<()> {
    trsm(TrsmVariant::Llnu, m, n, alpha, a, b, d)
}

pub fn trsm_lunn(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    d: SubMut<'_>,
) -> Result<()> {
    trsm(TrsmVariant::Lunn, m, n, alpha, a, b, d)
}

pub fn trsm_rltn(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    d: SubMut<'_>,
) -> Result<()> {
    trsm(TrsmVariant::Rltn, m, n, alpha, a, b, d)
}

pub fn trsm_rltu(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    d: SubMut<'_>,
) -> Result<()> {
    trsm(TrsmVariant::Rltu, m, n, alpha, a, b, d)
}

pub fn trsm_rutn(
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: Option<SubRef<'_>>,
    d: SubMut<'_>,
) -> Result<()> {
    trsm(TrsmVariant::Rutn, m, n, alpha, a, b, d)
}

// ---------------------------------------------------------------------------
// Cholesky

/// Picks D's own inverse-diagonal array when D starts at the matrix origin,
/// else a throwaway buffer.
struct DiagOut {
    local: Vec<f64>,
    use_matrix: bool,
}

impl DiagOut {
    fn new(d: &SubMut<'_>, n: usize) -> DiagOut {
        let use_matrix = d.ai == 0 && d.aj == 0 && d.dinv.len() >= n;
        DiagOut {
            local: if use_matrix { Vec::new() } else { vec![0.0; n] },
            use_matrix,
        }
    }

    fn buf<'s>(&'s mut self, d: &'s mut SubMut<'_>) -> &'s mut [f64] {
        if self.use_matrix {
            d.dinv
        } else {
            &mut self.local
        }
    }

    fn finish(self, d: &mut SubMut<'_>, ok: bool) {
        *d.dinv_valid = ok && self.use_matrix;
    }
}

pub(crate) unsafe fn potrf_l_mn_raw(
    m: usize,
    n: usize,
    c: Option<Win>,
    d: Win,
    dinv: &mut [f64],
) -> Result<()> {
    on_aligned_output(m, n, c, d, Writeback::Lower, |c, d| {
        for i in (0..m).step_by(PS) {
            let km = PS.min(m - i);
            for j in (0..n.min(i + 1)).step_by(NR) {
                let kn = NR.min(n - j);
                let spec = StoreSpec::for_tile(KernelShape::K4X4, km, kn, 0);
                let ct = c.map(|c| c.shift(i, j));
                if j < i {
                    kernels::trsm_rltn_blk::<4>(
                        j,
                        d.shift(i, 0),
                        d.shift(j, 0),
                        1.0,
                        ct,
                        d.shift(i, j),
                        d.shift(j, j),
                        &dinv[j..],
                        spec,
                    );
                } else {
                    kernels::potrf_blk::<4>(
                        j,
                        d.shift(i, 0),
                        d.shift(i, 0),
                        ct,
                        d.shift(i, j),
                        &mut dinv[j..],
                        spec,
                    )
                    .map_err(|idx| Error::NotPositiveDefinite { index: j + idx })?;
                }
            }
        }
        Ok(())
    })
}

/// Cholesky factorization `L * L^T = C` of the lower triangle of the `m x m`
/// matrix C. The factor goes to the lower triangle of D; D's strict upper
/// triangle is not written.
pub fn potrf_l(m: usize, c: Option<SubRef<'_>>, d: SubMut<'_>) -> Result<()> {
    potrf_l_mn(m, m, c, d)
}

/// Cholesky of the leading `n x n` block of the `m x n` matrix C (`m >= n`),
/// with the remaining `m - n` rows solved against the factor. This is the
/// factorization of a stacked `[H; A]` matrix: it yields `L` and `A * L^{-T}`
/// in one pass.
pub fn potrf_l_mn(m: usize, n: usize, c: Option<SubRef<'_>>, mut d: SubMut<'_>) -> Result<()> {
    if n > m {
        return Err(Error::Dimension(format!(
            "potrf_l_mn needs m >= n, got {m}x{n}"
        )));
    }
    check_c(&c, m, n)?;
    d.check("D", m, n)?;
    let mut diag = DiagOut::new(&d, n);
    let (cw, dw) = (c_win(&c), Win::from_mut(&mut d));
    let res = unsafe { potrf_l_mn_raw(m, n, cw, dw, diag.buf(&mut d)) };
    diag.finish(&mut d, res.is_ok());
    res
}

pub(crate) unsafe fn syrk_potrf_ln_raw(
    m: usize,
    k: usize,
    a: Win,
    b: Win,
    c: Option<Win>,
    d: Win,
    dinv: &mut [f64],
) -> Result<()> {
    let (a, _sa) = aligned_operand(a, m, k);
    let (b, _sb) = aligned_operand(b, m, k);
    on_aligned_output(m, m, c, d, Writeback::Lower, |c, d| {
        for i in (0..m).step_by(PS) {
            let km = PS.min(m - i);
            for j in (0..=i).step_by(NR) {
                let kn = NR.min(m - j);
                let spec = StoreSpec::for_tile(KernelShape::K4X4, km, kn, 0);
                let ct = c.map(|c| c.shift(i, j));
                if j < i {
                    kernels::gemm_trsm_blk::<4>(
                        k,
                        a.shift(i, 0),
                        b.shift(j, 0),
                        j,
                        d.shift(i, 0),
                        d.shift(j, 0),
                        ct,
                        d.shift(i, j),
                        d.shift(j, j),
                        &dinv[j..],
                        spec,
                    );
                } else {
                    kernels::syrk_potrf_blk::<4>(
                        k,
                        a.shift(i, 0),
                        b.shift(i, 0),
                        j,
                        d.shift(i, 0),
                        d.shift(i, 0),
                        ct,
                        d.shift(i, j),
                        &mut dinv[j..],
                        spec,
                    )
                    .map_err(|idx| Error::NotPositiveDefinite { index: j + idx })?;
                }
            }
        }
        Ok(())
    })
}

/// Fused `D = chol(C + A * B^T)` on the lower triangle, `A` and `B` `m x k`.
/// Each block runs its update and its downdate in one kernel call.
pub fn syrk_potrf_ln(
    m: usize,
    k: usize,
    a: SubRef<'_>,
    b: SubRef<'_>,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
) -> Result<()> {
    a.check("A", m, k)?;
    b.check("B", m, k)?;
    check_c(&c, m, m)?;
    d.check("D", m, m)?;
    let mut diag = DiagOut::new(&d, m);
    let (aw, bw, cw, dw) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c_win(&c),
        Win::from_mut(&mut d),
    );
    let res = unsafe { syrk_potrf_ln_raw(m, k, aw, bw, cw, dw, diag.buf(&mut d)) };
    diag.finish(&mut d, res.is_ok());
    res
}

// ---------------------------------------------------------------------------
// LU

unsafe fn swap_rows(n: usize, d: Win, r1: usize, r2: usize) {
    if r1 == r2 {
        return;
    }
    for c in 0..n {
        let p1 = d.ptr(r1, c);
        let p2 = d.ptr(r2, c);
        std::ptr::swap(p1, p2);
    }
}

/// Right-looking blocked LU on an aligned window, in place.
unsafe fn getrf_raw(
    m: usize,
    n: usize,
    d: Win,
    dinv: &mut [f64],
    mut ipiv: Option<&mut [usize]>,
) -> Result<()> {
    let kmin = m.min(n);
    for jb in (0..kmin).step_by(NR) {
        let w = NR.min(kmin - jb);
        // Unblocked factorization of the column panel jb..jb+w.
        for j in jb..jb + w {
            if let Some(ipiv) = ipiv.as_deref_mut() {
                let mut p = j;
                let mut best = d.at(j, j).abs();
                for r in j + 1..m {
                    let v = d.at(r, j).abs();
                    if v > best {
                        best = v;
                        p = r;
                    }
                }
                if best == 0.0 {
                    return Err(Error::ZeroPivot { index: j });
                }
                ipiv[j] = p;
                swap_rows(n, d, j, p);
            } else if d.at(j, j) == 0.0 {
                return Err(Error::ZeroPivot { index: j });
            }
            let inv = 1.0 / d.at(j, j);
            dinv[j] = inv;
            for r in j + 1..m {
                d.set(r, j, d.at(r, j) * inv);
            }
            for c in j + 1..jb + w {
                let u = d.at(j, c);
                for r in j + 1..m {
                    d.set(r, c, d.at(r, c) - d.at(r, j) * u);
                }
            }
        }
        // U12 = L11^{-1} A12.
        let rest = n - jb - w;
        for j in (0..rest).step_by(NR) {
            let kn = NR.min(rest - j);
            let spec = StoreSpec::for_tile(KernelShape::K4X4, w, kn, 0);
            let t = d.shift(jb, jb + w + j);
            kernels::trsm_llnu_blk::<4>(0, d.shift(jb, 0), t, 1.0, None, t, d.shift(jb, jb), spec);
        }
        // A22 -= L21 * U12.
        let below = m - jb - w;
        if below > 0 && rest > 0 {
            gemm_nn_raw(
                below,
                rest,
                w,
                -1.0,
                d.shift(jb + w, jb),
                d.shift(jb, jb + w),
                1.0,
                None,
                d.shift(jb + w, jb + w),
            );
        }
    }
    Ok(())
}

fn getrf_common(
    m: usize,
    n: usize,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    ipiv: Option<&mut [usize]>,
) -> Result<()> {
    check_c(&c, m, n)?;
    d.check("D", m, n)?;
    let kmin = m.min(n);
    if let Some(p) = &ipiv {
        if p.len() < kmin {
            return Err(Error::Dimension(format!(
                "ipiv has {} entries, need {kmin}",
                p.len()
            )));
        }
    }
    let mut diag = DiagOut::new(&d, kmin);
    let (cw, dw) = (c_win(&c), Win::from_mut(&mut d));
    let res = unsafe {
        let buf = diag.buf(&mut d);
        on_aligned_output(m, n, cw, dw, Writeback::Full, |cw, dw| {
            if let Some(cw) = cw {
                copy_window(m, n, cw, dw);
            }
            getrf_raw(m, n, dw, buf, ipiv)
        })
    };
    diag.finish(&mut d, res.is_ok());
    res
}

/// LU factorization without pivoting, `C = L * U`, packed into D (unit lower
/// L strictly below the diagonal, U on and above it).
pub fn getrf_nopivot(m: usize, n: usize, c: Option<SubRef<'_>>, d: SubMut<'_>) -> Result<()> {
    getrf_common(m, n, c, d, None)
}

/// LU factorization with partial pivoting, `P * C = L * U`. `ipiv[k] = r`
/// means row `k` was swapped with row `r >= k`. Ties in the pivot search go
/// to the lowest row index.
pub fn getrf_pivot(
    m: usize,
    n: usize,
    c: Option<SubRef<'_>>,
    d: SubMut<'_>,
    ipiv: &mut [usize],
) -> Result<()> {
    getrf_common(m, n, c, d, Some(ipiv))
}

// ---------------------------------------------------------------------------
// LQ

/// Size in bytes of the `work` argument of [`gelqf`].
pub fn gelqf_worksize(m: usize, n: usize) -> usize {
    let k = m.min(n);
    (k * 8).div_ceil(ALIGN) * ALIGN + memsize_panel_matrix(PS, n) + memsize_panel_matrix(m, PS)
}

/// Householder reflector `H = I - tau * v * v^T` with `v[0] = 1` mapping
/// `[alpha; x]` to `[beta; 0]`. Returns `(beta, tau, scale)` where the tail
/// of `v` is `x * scale`.
pub(crate) fn householder(alpha: f64, xnorm: f64) -> (f64, f64, f64) {
    if xnorm == 0.0 {
        return (alpha, 0.0, 0.0);
    }
    let norm = alpha.hypot(xnorm);
    let beta = if alpha >= 0.0 { -norm } else { norm };
    (beta, (beta - alpha) / beta, 1.0 / (alpha - beta))
}

/// Blocked LQ factorization `C = L * Q` of the `m x n` matrix C.
///
/// On return D holds L in its lower trapezoid (first `min(m, n)` columns) and
/// the reflector vectors to the right of the diagonal: row `i` stores `v_i`
/// in columns `i+1..n` with an implicit unit at column `i`. The reflector
/// scalars go to `work[0..min(m, n)]`. `Q = H_k ... H_1` restricted to its
/// first `k` rows, `H_i = I - tau_i * v_i * v_i^T`; see [`gelqf_form_q`].
/// `work` must be 64-byte aligned and hold [`gelqf_worksize`] bytes.
pub fn gelqf(
    m: usize,
    n: usize,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    work: &mut [f64],
) -> Result<()> {
    check_c(&c, m, n)?;
    d.check("D", m, n)?;
    let need = gelqf_worksize(m, n);
    if work.len() * 8 < need {
        return Err(Error::Undersized {
            need,
            got: work.len() * 8,
        });
    }
    if !(work.as_ptr() as usize).is_multiple_of(ALIGN) {
        return Err(Error::Misaligned { align: ALIGN });
    }
    let k = m.min(n);
    let tau_len = (k * 8).div_ceil(ALIGN) * ALIGN / 8;
    let (tau, rest) = work.split_at_mut(tau_len);
    let (vbuf, wbuf) = rest.split_at_mut(memsize_panel_matrix(PS, n) / 8);
    let mut v = PanelMatrix::create(PS, n, vbuf)?;
    let mut wm = PanelMatrix::create(m, PS, wbuf)?;
    let (cw, dw) = (c_win(&c), Win::from_mut(&mut d));
    let (vw, ww) = (Win::of(&mut v), Win::of(&mut wm));
    unsafe {
        on_aligned_output(m, n, cw, dw, Writeback::Full, |cw, dw| {
            if let Some(cw) = cw {
                copy_window(m, n, cw, dw);
            }
            gelqf_raw(m, n, dw, &mut tau[..k], vw, ww);
        });
    }
    Ok(())
}

unsafe fn gelqf_raw(m: usize, n: usize, d: Win, tau: &mut [f64], v: Win, w: Win) {
    let k = m.min(n);
    for i0 in (0..k).step_by(PS) {
        let ib = PS.min(k - i0);
        for i in i0..i0 + ib {
            let alpha = d.at(i, i);
            let mut xx = 0.0;
            for c in i + 1..n {
                xx += d.at(i, c) * d.at(i, c);
            }
            let (beta, t, scale) = householder(alpha, xx.sqrt());
            tau[i] = t;
            d.set(i, i, beta);
            if t != 0.0 {
                for c in i + 1..n {
                    d.set(i, c, d.at(i, c) * scale);
                }
            }
            // Apply H_i from the right to the remaining rows of the panel.
            for r in i + 1..i0 + ib {
                let mut s = d.at(r, i);
                for c in i + 1..n {
                    s += d.at(r, c) * d.at(i, c);
                }
                s *= t;
                d.set(r, i, d.at(r, i) - s);
                for c in i + 1..n {
                    d.set(r, c, d.at(r, c) - s * d.at(i, c));
                }
            }
        }
        let below = m - i0 - ib;
        if below == 0 {
            continue;
        }
        let width = n - i0;
        // Explicit V rows (unit diagonal, zeros to its left).
        for t in 0..ib {
            for c in 0..width {
                let val = match c.cmp(&t) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Greater => d.at(i0 + t, i0 + c),
                };
                v.set(t, c, val);
            }
        }
        // Triangular factor T with H_1 ... H_ib = I - V^T T V.
        let mut tm = [[0.0; PS]; PS];
        for t in 0..ib {
            let mut dots = [0.0; PS];
            for (s, dot) in dots.iter_mut().enumerate().take(t) {
                let mut acc = 0.0;
                for c in t..width {
                    acc += v.at(s, c) * v.at(t, c);
                }
                *dot = acc;
            }
            let tt = tau[i0 + t];
            for s in 0..t {
                let mut acc = 0.0;
                for q in s..t {
                    acc += tm[s][q] * dots[q];
                }
                tm[s][t] = -tt * acc;
            }
            tm[t][t] = tt;
        }
        // W = A_trailing * V^T, W = W * T, A_trailing -= W * V.
        let at = d.shift(i0 + ib, i0);
        gemm_nt_raw(below, ib, width, 1.0, at, v, 0.0, None, w);
        for r in 0..below {
            let mut row = [0.0; PS];
            for (t, x) in row.iter_mut().enumerate().take(ib) {
                *x = w.at(r, t);
            }
            for t in 0..ib {
                let mut acc = 0.0;
                for s in 0..=t {
                    acc += row[s] * tm[s][t];
                }
                w.set(r, t, acc);
            }
        }
        gemm_nn_raw(below, width, ib, -1.0, w, v, 1.0, None, at);
    }
}

/// Explicit `k x n` orthonormal factor (`k = min(m, n)`) from the output of
/// [`gelqf`]: `tau` is `work[0..k]`.
pub fn gelqf_form_q(
    m: usize,
    n: usize,
    d: SubRef<'_>,
    tau: &[f64],
) -> Result<PanelMatrix<'static>> {
    d.check("D", m, n)?;
    let k = m.min(n);
    let mut q = PanelMatrix::allocate(k, n);
    for i in 0..k {
        q.put(i, i, 1.0);
    }
    for i in (0..k).rev() {
        let vi = |c: usize| -> Result<f64> { Ok(if c == i { 1.0 } else { d.get(i, c)? }) };
        for r in 0..k {
            let mut s = 0.0;
            for c in i..n {
                s += q.at(r, c) * vi(c)?;
            }
            s *= tau[i];
            if s != 0.0 {
                for c in i..n {
                    let val = q.at(r, c) - s * vi(c)?;
                    q.put(r, c, val);
                }
            }
        }
    }
    Ok(q)
}

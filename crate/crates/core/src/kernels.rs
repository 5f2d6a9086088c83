//! Register-blocked kernels on panel-major operands.
//!
//! Every kernel is assembled from the same building blocks: one inner loop
//! that accumulates an `mr x nr` block over the shared dimension `k`, a
//! prologue that folds in `C`, an optional in-register factorization or
//! substitution step, and one of three store routines:
//!
//! * nominal: the whole `mr x nr` block, destination aligned to a panel top;
//! * variable size: only the leading `m_store x n_store` corner;
//! * generalized: like variable size, but the destination may start
//!   `panel_row_offset` rows into a panel, spilling the tail rows into the
//!   next panel.
//!
//! The block is always computed at full size. Only the store differs between
//! the variants, so their outputs are bit-identical on the stored elements.
//!
//! `A` and `B` operands read along panels must start at a panel top.
//! Operands read across panels (the right factor of the `nn` kernels) may
//! start at any row.

use crate::error::{Error, Result};
use crate::matstore::{SubMut, SubRef, PS};
use crate::raw::Win;

/// Columns of every accumulator block.
pub(crate) const NR: usize = 4;

/// Accumulator block, column-major: `acc[col][row]`.
pub(crate) type Acc<const MR: usize> = [[f64; MR]; NR];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelShape {
    pub mr: usize,
    pub nr: usize,
}

impl KernelShape {
    pub const K4X4: KernelShape = KernelShape { mr: 4, nr: 4 };
    pub const K8X4: KernelShape = KernelShape { mr: 8, nr: 4 };
    pub const ALL: [KernelShape; 2] = [Self::K4X4, Self::K8X4];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoreMode {
    Nominal,
    VariableSize,
    Generalized,
}

/// What part of the accumulator block a kernel writes, and where.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreSpec {
    pub mode: StoreMode,
    pub m_store: usize,
    pub n_store: usize,
    pub panel_row_offset: usize,
}

impl StoreSpec {
    pub fn nominal(shape: KernelShape) -> StoreSpec {
        StoreSpec {
            mode: StoreMode::Nominal,
            m_store: shape.mr,
            n_store: shape.nr,
            panel_row_offset: 0,
        }
    }

    pub fn variable(m_store: usize, n_store: usize) -> StoreSpec {
        StoreSpec {
            mode: StoreMode::VariableSize,
            m_store,
            n_store,
            panel_row_offset: 0,
        }
    }

    pub fn generalized(m_store: usize, n_store: usize, panel_row_offset: usize) -> StoreSpec {
        StoreSpec {
            mode: StoreMode::Generalized,
            m_store,
            n_store,
            panel_row_offset,
        }
    }

    /// Cheapest spec that stores `km x kn` at a destination starting
    /// `offset` rows into its panel.
    pub(crate) fn for_tile(shape: KernelShape, km: usize, kn: usize, offset: usize) -> StoreSpec {
        if offset != 0 {
            StoreSpec::generalized(km, kn, offset)
        } else if km == shape.mr && kn == shape.nr {
            StoreSpec::nominal(shape)
        } else {
            StoreSpec::variable(km, kn)
        }
    }

    fn validate(&self, shape: KernelShape) -> Result<()> {
        let ok = self.m_store <= shape.mr
            && self.n_store <= shape.nr
            && self.panel_row_offset < PS
            && match self.mode {
                StoreMode::Nominal => {
                    self.m_store == shape.mr
                        && self.n_store == shape.nr
                        && self.panel_row_offset == 0
                }
                StoreMode::VariableSize => self.panel_row_offset == 0,
                StoreMode::Generalized => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "store spec {self:?} invalid for kernel {shape:?}"
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// Inner loops.

/// `acc += A * B^T` (or `-=` when `!ADD`); `A` is `MR x k` starting at a panel
/// top, `B` is `NR x k` starting at a panel top. `sa` is A's panel stride.
#[inline(always)]
pub(crate) unsafe fn gemm_nt_loop<const MR: usize, const ADD: bool>(
    k: usize,
    a: *const f64,
    sa: usize,
    b: *const f64,
    acc: &mut Acc<MR>,
) {
    for l in 0..k {
        let bv: [f64; NR] = *(b.add(l * PS) as *const [f64; NR]);
        let mut av = [0.0; MR];
        for p in 0..MR / PS {
            let col: [f64; PS] = *(a.add(p * sa + l * PS) as *const [f64; PS]);
            av[p * PS..p * PS + PS].copy_from_slice(&col);
        }
        for c in 0..NR {
            for r in 0..MR {
                if ADD {
                    acc[c][r] += av[r] * bv[c];
                } else {
                    acc[c][r] -= av[r] * bv[c];
                }
            }
        }
    }
}

/// `acc += A * B` (or `-=`); `A` as in [`gemm_nt_loop`], `B` is a `k x NR`
/// window read across panels from any starting row. Only the first `nb`
/// columns of `B` are read; the rest count as zero.
#[inline(always)]
pub(crate) unsafe fn gemm_nn_loop<const MR: usize, const ADD: bool>(
    k: usize,
    a: *const f64,
    sa: usize,
    b: Win,
    nb: usize,
    acc: &mut Acc<MR>,
) {
    let mut l = 0;
    while l < k {
        let run = (PS - (b.i + l) % PS).min(k - l);
        let base = b.ptr(l, 0);
        for t in 0..run {
            let mut bv = [0.0; NR];
            if nb == NR {
                for (c, v) in bv.iter_mut().enumerate() {
                    *v = *base.add(t + c * PS);
                }
            } else {
                for (c, v) in bv.iter_mut().enumerate().take(nb) {
                    *v = *base.add(t + c * PS);
                }
            }
            let mut av = [0.0; MR];
            for p in 0..MR / PS {
                let col: [f64; PS] = *(a.add(p * sa + (l + t) * PS) as *const [f64; PS]);
                av[p * PS..p * PS + PS].copy_from_slice(&col);
            }
            for c in 0..NR {
                for r in 0..MR {
                    if ADD {
                        acc[c][r] += av[r] * bv[c];
                    } else {
                        acc[c][r] -= av[r] * bv[c];
                    }
                }
            }
        }
        l += run;
    }
}

/// Triangular head of the `trmm_rlnn` kernel: the first `min(NR, k)` rows of
/// the lower-triangular right factor, where row `l` only has columns `0..=l`.
#[inline(always)]
unsafe fn trmm_head_loop<const MR: usize>(
    k: usize,
    a: *const f64,
    sa: usize,
    b: Win,
    nb: usize,
    acc: &mut Acc<MR>,
) -> usize {
    let head = k.min(NR);
    for l in 0..head {
        let mut bv = [0.0; NR];
        for (c, v) in bv.iter_mut().enumerate().take(nb.min(l + 1)) {
            *v = b.at(l, c);
        }
        let mut av = [0.0; MR];
        for p in 0..MR / PS {
            let col: [f64; PS] = *(a.add(p * sa + l * PS) as *const [f64; PS]);
            av[p * PS..p * PS + PS].copy_from_slice(&col);
        }
        for c in 0..NR {
            for r in 0..MR {
                acc[c][r] += av[r] * bv[c];
            }
        }
    }
    head
}

// ---------------------------------------------------------------------------
// Loads and stores.

/// Reads the leading `km x kn` corner of `src` into a zeroed block.
#[inline(always)]
pub(crate) unsafe fn load_block<const MR: usize>(src: Win, km: usize, kn: usize) -> Acc<MR> {
    let mut out = [[0.0; MR]; NR];
    // Rows before the panel end come from the current panel, the rest from
    // the following ones. For aligned sources `o == 0`.
    let o = src.row_offset();
    let base = src.panel_ptr();
    let sd = src.panel_stride();
    for (c, col) in out.iter_mut().enumerate().take(kn) {
        for (r, v) in col.iter_mut().enumerate().take(km) {
            let rr = o + r;
            *v = *base.add((rr / PS) * sd + c * PS + rr % PS);
        }
    }
    out
}

/// `acc = alpha * acc + beta * C` on the `km x kn` corner; `C` is not read
/// when `beta == 0`.
#[inline(always)]
pub(crate) unsafe fn scale_add_c<const MR: usize>(
    acc: &mut Acc<MR>,
    alpha: f64,
    beta: f64,
    c: Win,
    km: usize,
    kn: usize,
) {
    if beta == 0.0 {
        for col in acc.iter_mut() {
            for v in col.iter_mut() {
                *v *= alpha;
            }
        }
        return;
    }
    let cb = load_block::<MR>(c, km, kn);
    for (col, ccol) in acc.iter_mut().zip(cb.iter()) {
        for (v, &cv) in col.iter_mut().zip(ccol.iter()) {
            *v = alpha * *v + beta * cv;
        }
    }
}

/// Writes the block according to `spec`. With `lower`, only elements on or
/// below the block diagonal (`r >= c`) are written.
#[inline(always)]
pub(crate) unsafe fn store_block<const MR: usize>(
    acc: &Acc<MR>,
    d: Win,
    spec: StoreSpec,
    lower: bool,
) {
    let base = d.panel_ptr();
    let sd = d.panel_stride();
    match spec.mode {
        StoreMode::Nominal if !lower => {
            for (c, col) in acc.iter().enumerate() {
                for p in 0..MR / PS {
                    let dst = base.add(p * sd + c * PS) as *mut [f64; PS];
                    let mut v = [0.0; PS];
                    v.copy_from_slice(&col[p * PS..p * PS + PS]);
                    *dst = v;
                }
            }
        }
        StoreMode::Nominal | StoreMode::VariableSize => {
            for (c, col) in acc.iter().enumerate().take(spec.n_store) {
                let start = if lower { c } else { 0 };
                for (r, &v) in col.iter().enumerate().take(spec.m_store).skip(start) {
                    *base.add((r / PS) * sd + c * PS + r % PS) = v;
                }
            }
        }
        StoreMode::Generalized => {
            let o = spec.panel_row_offset;
            for (c, col) in acc.iter().enumerate().take(spec.n_store) {
                let start = if lower { c } else { 0 };
                for (r, &v) in col.iter().enumerate().take(spec.m_store).skip(start) {
                    let rr = o + r;
                    *base.add((rr / PS) * sd + c * PS + rr % PS) = v;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// In-register factorization and substitution steps.

/// Solves `X * E^T = acc` for the first `kn` columns, `E` lower triangular
/// with reciprocal diagonal `dinv`.
#[inline(always)]
pub(crate) unsafe fn subst_rl_inv<const MR: usize>(
    acc: &mut Acc<MR>,
    e: Win,
    dinv: &[f64],
    kn: usize,
) {
    for c in 0..kn {
        for l in 0..c {
            let f = e.at(c, l);
            let (done, rest) = acc.split_at_mut(c);
            for (v, &x) in rest[0].iter_mut().zip(done[l].iter()) {
                *v -= x * f;
            }
        }
        let inv = dinv[c];
        for v in acc[c].iter_mut() {
            *v *= inv;
        }
    }
}

/// Solves `X * E^T = acc` for the first `kn` columns, `E` upper triangular.
#[inline(always)]
pub(crate) unsafe fn subst_ru_inv<const MR: usize>(
    acc: &mut Acc<MR>,
    e: Win,
    dinv: &[f64],
    kn: usize,
) {
    for c in (0..kn).rev() {
        for l in c + 1..kn {
            let f = e.at(c, l);
            let (head, tail) = acc.split_at_mut(l);
            for (v, &x) in head[c].iter_mut().zip(tail[0].iter()) {
                *v -= x * f;
            }
        }
        let inv = dinv[c];
        for v in acc[c].iter_mut() {
            *v *= inv;
        }
    }
}

/// Solves `E * X = acc` for the first `km` rows, `E` unit lower triangular.
#[inline(always)]
pub(crate) unsafe fn subst_ll_one<const MR: usize>(acc: &mut Acc<MR>, e: Win, km: usize) {
    for r in 1..km {
        for l in 0..r {
            let f = e.at(r, l);
            for col in acc.iter_mut() {
                col[r] -= f * col[l];
            }
        }
    }
}

/// Solves `E * X = acc` for the first `km` rows, `E` upper triangular.
#[inline(always)]
pub(crate) unsafe fn subst_lu_inv<const MR: usize>(
    acc: &mut Acc<MR>,
    e: Win,
    dinv: &[f64],
    km: usize,
) {
    for r in (0..km).rev() {
        for l in r + 1..km {
            let f = e.at(r, l);
            for col in acc.iter_mut() {
                col[r] -= f * col[l];
            }
        }
        for col in acc.iter_mut() {
            col[r] *= dinv[r];
        }
    }
}

/// Cholesky of the leading `kn` columns of the block; rows below `kn` are
/// solved against the factor. Returns the block-local index of the first
/// non-positive pivot.
#[inline(always)]
pub(crate) fn factor_potrf<const MR: usize>(
    acc: &mut Acc<MR>,
    kn: usize,
    dinv: &mut [f64],
) -> std::result::Result<(), usize> {
    for c in 0..kn {
        let piv = acc[c][c];
        if !(piv > 0.0) {
            return Err(c);
        }
        let d = piv.sqrt();
        let inv = 1.0 / d;
        dinv[c] = inv;
        for v in acc[c].iter_mut() {
            *v *= inv;
        }
        acc[c][c] = d;
        for cc in c + 1..kn {
            let f = acc[c][cc];
            let (done, rest) = acc.split_at_mut(cc);
            for (v, &x) in rest[0].iter_mut().zip(done[c].iter()) {
                *v -= x * f;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Unchecked kernels. `c == None` reads C from D's window.

pub(crate) unsafe fn gemm_nt_blk<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
    spec: StoreSpec,
    lower: bool,
) {
    let mut acc = [[0.0; MR]; NR];
    gemm_nt_loop::<MR, true>(k, a.panel_ptr(), a.panel_stride(), b.panel_ptr(), &mut acc);
    scale_add_c(
        &mut acc,
        alpha,
        beta,
        c.unwrap_or(d),
        spec.m_store,
        spec.n_store,
    );
    store_block(&acc, d, spec, lower);
}

pub(crate) unsafe fn gemm_nn_blk<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    beta: f64,
    c: Option<Win>,
    d: Win,
    spec: StoreSpec,
) {
    let mut acc = [[0.0; MR]; NR];
    gemm_nn_loop::<MR, true>(
        k,
        a.panel_ptr(),
        a.panel_stride(),
        b,
        spec.n_store,
        &mut acc,
    );
    scale_add_c(
        &mut acc,
        alpha,
        beta,
        c.unwrap_or(d),
        spec.m_store,
        spec.n_store,
    );
    store_block(&acc, d, spec, false);
}

/// `D = (alpha * C - A * B^T) * E^{-T}`.
pub(crate) unsafe fn trsm_rltn_blk<const MR: usize>(
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
    let mut acc = load_block::<MR>(c.unwrap_or(d), spec.m_store, spec.n_store);
    if alpha != 1.0 {
        acc.iter_mut().flatten().for_each(|v| *v *= alpha);
    }
    gemm_nt_loop::<MR, false>(k, a.panel_ptr(), a.panel_stride(), b.panel_ptr(), &mut acc);
    subst_rl_inv(&mut acc, e, dinv, spec.n_store);
    store_block(&acc, d, spec, false);
}

/// `D = chol(C - A * B^T)` on the block (trailing rows solved against it).
pub(crate) unsafe fn potrf_blk<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    c: Option<Win>,
    d: Win,
    dinv: &mut [f64],
    spec: StoreSpec,
) -> std::result::Result<(), usize> {
    let mut acc = load_block::<MR>(c.unwrap_or(d), spec.m_store, spec.n_store);
    gemm_nt_loop::<MR, false>(k, a.panel_ptr(), a.panel_stride(), b.panel_ptr(), &mut acc);
    let res = factor_potrf(&mut acc, spec.n_store.min(spec.m_store), dinv);
    store_block(&acc, d, spec, true);
    res
}

/// Fused `D = chol(C + Ap * Bp^T - Am * Bm^T)`: the update and downdate loops
/// run back to back on one accumulator before a single store.
pub(crate) unsafe fn syrk_potrf_blk<const MR: usize>(
    kp: usize,
    ap: Win,
    bp: Win,
    km_: usize,
    am: Win,
    bm: Win,
    c: Option<Win>,
    d: Win,
    dinv: &mut [f64],
    spec: StoreSpec,
) -> std::result::Result<(), usize> {
    let mut acc = [[0.0; MR]; NR];
    gemm_nt_loop::<MR, true>(
        kp,
        ap.panel_ptr(),
        ap.panel_stride(),
        bp.panel_ptr(),
        &mut acc,
    );
    scale_add_c(
        &mut acc,
        1.0,
        1.0,
        c.unwrap_or(d),
        spec.m_store,
        spec.n_store,
    );
    gemm_nt_loop::<MR, false>(
        km_,
        am.panel_ptr(),
        am.panel_stride(),
        bm.panel_ptr(),
        &mut acc,
    );
    let res = factor_potrf(&mut acc, spec.n_store.min(spec.m_store), dinv);
    store_block(&acc, d, spec, true);
    res
}

/// Fused off-diagonal step: `D = (C + Ap * Bp^T - Am * Bm^T) * E^{-T}`.
pub(crate) unsafe fn gemm_trsm_blk<const MR: usize>(
    kp: usize,
    ap: Win,
    bp: Win,
    km_: usize,
    am: Win,
    bm: Win,
    c: Option<Win>,
    d: Win,
    e: Win,
    dinv: &[f64],
    spec: StoreSpec,
) {
    let mut acc = [[0.0; MR]; NR];
    gemm_nt_loop::<MR, true>(
        kp,
        ap.panel_ptr(),
        ap.panel_stride(),
        bp.panel_ptr(),
        &mut acc,
    );
    scale_add_c(
        &mut acc,
        1.0,
        1.0,
        c.unwrap_or(d),
        spec.m_store,
        spec.n_store,
    );
    gemm_nt_loop::<MR, false>(
        km_,
        am.panel_ptr(),
        am.panel_stride(),
        bm.panel_ptr(),
        &mut acc,
    );
    subst_rl_inv(&mut acc, e, dinv, spec.n_store);
    store_block(&acc, d, spec, false);
}

/// `D = (alpha * C - A * B^T) * U^{-T}`, `U` upper triangular (`A` holds the
/// columns right of the block, `B` the matching rows of `U`).
pub(crate) unsafe fn trsm_rutn_blk<const MR: usize>(
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
    let mut acc = load_block::<MR>(c.unwrap_or(d), spec.m_store, spec.n_store);
    if alpha != 1.0 {
        acc.iter_mut().flatten().for_each(|v| *v *= alpha);
    }
    gemm_nt_loop::<MR, false>(k, a.panel_ptr(), a.panel_stride(), b.panel_ptr(), &mut acc);
    subst_ru_inv(&mut acc, e, dinv, spec.n_store);
    store_block(&acc, d, spec, false);
}

/// `D = E^{-1} (alpha * C - A * B)`, `E` unit lower triangular.
pub(crate) unsafe fn trsm_llnu_blk<const MR: usize>(
    k: usize,
    a: Win,
    b: Win,
    alpha: f64,
    c: Option<Win>,
    d: Win,
    e: Win,
    spec: StoreSpec,
) {
    let mut acc = load_block::<MR>(c.unwrap_or(d), spec.m_store, spec.n_store);
    if alpha != 1.0 {
        acc.iter_mut().flatten().for_each(|v| *v *= alpha);
    }
    gemm_nn_loop::<MR, false>(
        k,
        a.panel_ptr(),
        a.panel_stride(),
        b,
        spec.n_store,
        &mut acc,
    );
    subst_ll_one(&mut acc, e, spec.m_store);
    store_block(&acc, d, spec, false);
}

/// `D = E^{-1} (alpha * C - A * B)`, `E` upper triangular.
pub(crate) unsafe fn trsm_lunn_blk<const MR: usize>(
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
    let mut acc = load_block::<MR>(c.unwrap_or(d), spec.m_store, spec.n_store);
    if alpha != 1.0 {
        acc.iter_mut().flatten().for_each(|v| *v *= alpha);
    }
    gemm_nn_loop::<MR, false>(
        k,
        a.panel_ptr(),
        a.panel_stride(),
        b,
        spec.n_store,
        &mut acc,
    );
    subst_lu_inv(&mut acc, e, dinv, spec.m_store);
    store_block(&acc, d, spec, false);
}

/// `D = alpha * A * B` where `B` is the `k x NR` slice of a lower-triangular
/// matrix starting on its diagonal.
pub(crate) unsafe fn trmm_rlnn_blk<const MR: usize>(
    k: usize,
    alpha: f64,
    a: Win,
    b: Win,
    d: Win,
    spec: StoreSpec,
) {
    let mut acc = [[0.0; MR]; NR];
    let head = trmm_head_loop::<MR>(
        k,
        a.panel_ptr(),
        a.panel_stride(),
        b,
        spec.n_store,
        &mut acc,
    );
    let a_rest = a.shift(0, head);
    gemm_nn_loop::<MR, true>(
        k - head,
        a_rest.panel_ptr(),
        a.panel_stride(),
        b.shift(head, 0),
        spec.n_store,
        &mut acc,
    );
    acc.iter_mut().flatten().for_each(|v| *v *= alpha);
    store_block(&acc, d, spec, false);
}

// ---------------------------------------------------------------------------
// Checked entry points.

fn check_panel_operand(name: &'static str, s: &SubRef<'_>, rows: usize, k: usize) -> Result<()> {
    let allocated_rows = s.m.div_ceil(PS) * PS;
    if !s.ai.is_multiple_of(PS) {
        return Err(Error::Dimension(format!(
            "{name}: row origin {} is not at a panel top",
            s.ai
        )));
    }
    if s.ai + rows > allocated_rows || s.aj + k > s.n || (rows > 0 && s.ai >= s.m) {
        return Err(Error::OutOfBounds {
            operand: name,
            ai: s.ai,
            aj: s.aj,
            rows,
            cols: k,
            m: s.m,
            n: s.n,
        });
    }
    Ok(())
}

fn check_dest(shape: KernelShape, spec: &StoreSpec, d: &SubMut<'_>) -> Result<()> {
    spec.validate(shape)?;
    d.check("D", spec.m_store, spec.n_store)?;
    if d.ai % PS != spec.panel_row_offset {
        return Err(Error::Dimension(format!(
            "D starts {} rows into its panel but the store spec says {}",
            d.ai % PS,
            spec.panel_row_offset
        )));
    }
    Ok(())
}

fn check_c(c: &Option<SubRef<'_>>, spec: &StoreSpec) -> Result<()> {
    match c {
        Some(c) => c.check("C", spec.m_store, spec.n_store),
        None => Ok(()),
    }
}

macro_rules! dispatch {
    ($shape:expr, $f:ident ( $($arg:expr),* $(,)? )) => {
        match $shape.mr {
            4 => $f::<4>($($arg),*),
            8 => $f::<8>($($arg),*),
            _ => unreachable!(),
        }
    };
}

fn check_shape(shape: KernelShape) -> Result<()> {
    if KernelShape::ALL.contains(&shape) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "unsupported kernel shape {}x{}",
            shape.mr, shape.nr
        )))
    }
}

/// `D = alpha * A * B^T + beta * C` on one block. `c == None` reads C from
/// D's window.
pub fn kernel_gemm_nt(
    shape: KernelShape,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    check_panel_operand("B", &b, shape.nr, k)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    let (a, b, c, d) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c.map(|c| Win::from_ref(&c)),
        Win::from_mut(&mut d),
    );
    unsafe { dispatch!(shape, gemm_nt_blk(k, alpha, a, b, beta, c, d, spec, false)) };
    Ok(())
}

/// Lower-triangle variant of [`kernel_gemm_nt`] used on diagonal blocks of
/// symmetric updates: only elements with row >= column are stored.
pub fn kernel_syrk_nt_l(
    shape: KernelShape,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    check_panel_operand("B", &b, shape.nr, k)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    let (a, b, c, d) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c.map(|c| Win::from_ref(&c)),
        Win::from_mut(&mut d),
    );
    unsafe { dispatch!(shape, gemm_nt_blk(k, alpha, a, b, beta, c, d, spec, true)) };
    Ok(())
}

/// `D = alpha * A * B + beta * C` on one block. `B` may start at any row;
/// its offset inside the first panel is `b.ai % PS`.
pub fn kernel_gemm_nn(
    shape: KernelShape,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    beta: f64,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    b.check("B", k, spec.n_store)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    let (a, b, c, d) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c.map(|c| Win::from_ref(&c)),
        Win::from_mut(&mut d),
    );
    unsafe { dispatch!(shape, gemm_nn_blk(k, alpha, a, b, beta, c, d, spec)) };
    Ok(())
}

/// `D * E^T = C - A * B^T` on one block, `E` lower triangular with
/// reciprocal diagonal `diag_inv`.
pub fn kernel_trsm_rltn(
    shape: KernelShape,
    k: usize,
    a: SubRef<'_>,
    b: SubRef<'_>,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    e: SubRef<'_>,
    diag_inv: &[f64],
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    check_panel_operand("B", &b, shape.nr, k)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    e.check("E", spec.n_store, spec.n_store)?;
    if diag_inv.len() < spec.n_store {
        return Err(Error::Dimension(format!(
            "diag_inv has {} entries, need {}",
            diag_inv.len(),
            spec.n_store
        )));
    }
    let (a, b, c, d, e) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c.map(|c| Win::from_ref(&c)),
        Win::from_mut(&mut d),
        Win::from_ref(&e),
    );
    unsafe { dispatch!(shape, trsm_rltn_blk(k, a, b, 1.0, c, d, e, diag_inv, spec)) };
    Ok(())
}

/// `D = chol(C - A * B^T)` on one block: the leading `n_store` columns are
/// factorized and any further rows are solved against the factor. Only the
/// lower triangle is stored. `diag_inv_out[j]` receives `1 / D[j, j]`.
pub fn kernel_potrf(
    shape: KernelShape,
    k: usize,
    a: SubRef<'_>,
    b: SubRef<'_>,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    diag_inv_out: &mut [f64],
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    check_panel_operand("B", &b, shape.nr, k)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    if diag_inv_out.len() < spec.n_store {
        return Err(Error::Dimension(format!(
            "diag_inv_out has {} entries",
            diag_inv_out.len()
        )));
    }
    let (a, b, c, d) = (
        Win::from_ref(&a),
        Win::from_ref(&b),
        c.map(|c| Win::from_ref(&c)),
        Win::from_mut(&mut d),
    );
    unsafe { dispatch!(shape, potrf_blk(k, a, b, c, d, diag_inv_out, spec)) }
        .map_err(|index| Error::NotPositiveDefinite { index })
}

/// Fused `D = chol(C + Ap * Bp^T - Am * Bm^T)` on one block.
#[allow(clippy::too_many_arguments)]
pub fn kernel_syrk_potrf(
    shape: KernelShape,
    k_syrk: usize,
    ap: SubRef<'_>,
    bp: SubRef<'_>,
    k_potrf: usize,
    am: SubRef<'_>,
    bm: SubRef<'_>,
    c: Option<SubRef<'_>>,
    mut d: SubMut<'_>,
    diag_inv_out: &mut [f64],
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("Ap", &ap, shape.mr, k_syrk)?;
    check_panel_operand("Bp", &bp, shape.nr, k_syrk)?;
    check_panel_operand("Am", &am, shape.mr, k_potrf)?;
    check_panel_operand("Bm", &bm, shape.nr, k_potrf)?;
    check_c(&c, &spec)?;
    check_dest(shape, &spec, &d)?;
    if diag_inv_out.len() < spec.n_store {
        return Err(Error::Dimension(format!(
            "diag_inv_out has {} entries",
            diag_inv_out.len()
        )));
    }
    let (ap, bp, am, bm) = (
        Win::from_ref(&ap),
        Win::from_ref(&bp),
        Win::from_ref(&am),
        Win::from_ref(&bm),
    );
    let (c, d) = (c.map(|c| Win::from_ref(&c)), Win::from_mut(&mut d));
    unsafe {
        dispatch!(
            shape,
            syrk_potrf_blk(k_syrk, ap, bp, k_potrf, am, bm, c, d, diag_inv_out, spec)
        )
    }
    .map_err(|index| Error::NotPositiveDefinite { index })
}

/// `D = alpha * A * B` where `B` is the `k x nr` slice of a lower-triangular
/// matrix whose first row is on the diagonal (row `l` has nonzeros in
/// columns `0..=l`).
pub fn kernel_trmm_rlnn(
    shape: KernelShape,
    k: usize,
    alpha: f64,
    a: SubRef<'_>,
    b: SubRef<'_>,
    mut d: SubMut<'_>,
    spec: StoreSpec,
) -> Result<()> {
    check_shape(shape)?;
    check_panel_operand("A", &a, shape.mr, k)?;
    b.check("B", k, spec.n_store.min(k))?;
    check_dest(shape, &spec, &d)?;
    let (a, b, d) = (Win::from_ref(&a), Win::from_ref(&b), Win::from_mut(&mut d));
    unsafe { dispatch!(shape, trmm_rlnn_blk(k, alpha, a, b, d, spec)) };
    Ok(())
}

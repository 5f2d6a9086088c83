//! One randomized case per routine: build operands, embed them at the given
//! origins, run the routine, and return the relative error against the
//! column-major oracle. A routine that writes outside its output window
//! returns infinity.

use super::*;
use panelblas::level12::{self, TrVariant, Trans};
use panelblas::level3::{self, TrsmVariant};
use panelblas::ref_impl::{
    oracle_gelqf, oracle_gemm, oracle_getrf, oracle_potrf, oracle_syrk, oracle_trmm, oracle_trsm,
    permute_rows, split_lu, Side, Uplo,
};
use rand_chacha::ChaCha8Rng;

pub const ORIGINS: [usize; 4] = [0, 1, 3, 4];

/// Operand origins for one case: each operand gets its own row origin drawn
/// from `o` and the column origin `oj`.
#[derive(Clone, Copy, Debug)]
pub struct Origins {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub c: (usize, usize),
    pub d: (usize, usize),
}

impl Origins {
    pub fn same(o: usize) -> Origins {
        Origins {
            a: (o, o),
            b: (o, o),
            c: (o, o),
            d: (o, o),
        }
    }

    pub fn mixed(rng: &mut ChaCha8Rng, o: usize) -> Origins {
        let pick = |rng: &mut ChaCha8Rng| ORIGINS[rng.gen_range(0..ORIGINS.len())];
        Origins {
            a: (o, pick(rng)),
            b: (pick(rng), o),
            c: (pick(rng), pick(rng)),
            d: (o, pick(rng)),
        }
    }
}

fn guard(ok: bool, err: f64) -> f64 {
    if ok {
        err
    } else {
        f64::INFINITY
    }
}

/// gemm_nt; `in_place` runs with C taken from D.
pub fn gemm_nt(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    k: usize,
    o: Origins,
    in_place: bool,
) -> f64 {
    let (a, b, c) = (
        rand_mat(rng, m, k),
        rand_mat(rng, n, k),
        rand_mat(rng, m, n),
    );
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let want = oracle_gemm(alpha, &a, &b.transpose(), beta, Some(&c)).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = if in_place {
        embed(rng, &c, o.d.0, o.d.1)
    } else {
        embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1)
    };
    let before = pd.to_owned();
    let copt = if in_place {
        None
    } else {
        Some(pc.sub(o.c.0, o.c.1))
    };
    level3::gemm_nt(
        m,
        n,
        k,
        alpha,
        pa.sub(o.a.0, o.a.1),
        pb.sub(o.b.0, o.b.1),
        beta,
        copt,
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&got, &want),
    )
}

pub fn gemm_nn(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    k: usize,
    o: Origins,
    in_place: bool,
) -> f64 {
    let (a, b, c) = (
        rand_mat(rng, m, k),
        rand_mat(rng, k, n),
        rand_mat(rng, m, n),
    );
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let want = oracle_gemm(alpha, &a, &b, beta, Some(&c)).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = if in_place {
        embed(rng, &c, o.d.0, o.d.1)
    } else {
        embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1)
    };
    let before = pd.to_owned();
    let copt = if in_place {
        None
    } else {
        Some(pc.sub(o.c.0, o.c.1))
    };
    level3::gemm_nn(
        m,
        n,
        k,
        alpha,
        pa.sub(o.a.0, o.a.1),
        pb.sub(o.b.0, o.b.1),
        beta,
        copt,
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&got, &want),
    )
}

pub fn syrk_ln(rng: &mut ChaCha8Rng, m: usize, k: usize, o: Origins) -> f64 {
    let (a, b, c) = (
        rand_mat(rng, m, k),
        rand_mat(rng, m, k),
        rand_mat(rng, m, m),
    );
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let want = oracle_syrk(alpha, &a, &b, beta, Some(&c)).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, m), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::syrk_ln(
        m,
        k,
        alpha,
        pa.sub(o.a.0, o.a.1),
        pb.sub(o.b.0, o.b.1),
        beta,
        Some(pc.sub(o.c.0, o.c.1)),
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = lower_of(&window(&pd, o.d.0, o.d.1, m, m));
    let ok = outside_untouched(&pd, &before, o.d.0, o.d.1, m, m)
        && upper_untouched(&pd, &before, o.d.0, o.d.1, m);
    guard(ok, rel(&got, &want))
}

pub fn trmm_rlnn(rng: &mut ChaCha8Rng, m: usize, n: usize, o: Origins) -> f64 {
    let (a, b) = (rand_mat(rng, n, n), rand_mat(rng, m, n));
    let alpha = rng.gen_range(-2.0..2.0);
    let want = oracle_trmm(alpha, &b, &a).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::trmm_rlnn(
        m,
        n,
        alpha,
        pa.sub(o.a.0, o.a.1),
        Some(pb.sub(o.b.0, o.b.1)),
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&got, &want),
    )
}

pub fn trsm(rng: &mut ChaCha8Rng, variant: TrsmVariant, m: usize, n: usize, o: Origins) -> f64 {
    let order = if variant.is_left() { m } else { n };
    let l = well_lower(rng, order);
    let upper = matches!(variant, TrsmVariant::Lunn | TrsmVariant::Rutn);
    // The unreferenced triangle carries noise that must be ignored.
    let noise = rand_mat(rng, order, order);
    let a = ColMatrix::from_fn(order, order, |i, j| {
        let (r, c) = if upper { (j, i) } else { (i, j) };
        if r >= c {
            l[(r, c)]
        } else {
            noise[(i, j)]
        }
    });
    let b = rand_mat(rng, m, n);
    let alpha = rng.gen_range(-2.0..2.0);
    let (side, uplo, trans) = match variant {
        TrsmVariant::Llnu => (Side::Left, Uplo::Lower, false),
        TrsmVariant::Lunn => (Side::Left, Uplo::Upper, false),
        TrsmVariant::Rltn | TrsmVariant::Rltu => (Side::Right, Uplo::Lower, true),
        TrsmVariant::Rutn => (Side::Right, Uplo::Upper, true),
    };
    let want = oracle_trsm(side, uplo, trans, variant.is_unit(), alpha, &a, &b).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::trsm(
        variant,
        m,
        n,
        alpha,
        pa.sub(o.a.0, o.a.1),
        Some(pb.sub(o.b.0, o.b.1)),
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&got, &want),
    )
}

pub fn potrf_l(rng: &mut ChaCha8Rng, m: usize, o: Origins) -> f64 {
    let c = spd(rng, m);
    let want = oracle_potrf(&c).unwrap();
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, m), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::potrf_l(m, Some(pc.sub(o.c.0, o.c.1)), pd.sub_mut(o.d.0, o.d.1)).unwrap();
    let got = lower_of(&window(&pd, o.d.0, o.d.1, m, m));
    let ok = outside_untouched(&pd, &before, o.d.0, o.d.1, m, m)
        && upper_untouched(&pd, &before, o.d.0, o.d.1, m);
    guard(ok, rel(&got, &want))
}

/// potrf_l_mn on a stacked `[C; E]` with `C` `n x n` SPD and `E` `(m-n) x n`.
pub fn potrf_l_mn(rng: &mut ChaCha8Rng, m: usize, n: usize, o: Origins) -> f64 {
    let top = spd(rng, n);
    let e = rand_mat(rng, m - n, n);
    let c = ColMatrix::from_fn(m, n, |i, j| if i < n { top[(i, j)] } else { e[(i - n, j)] });
    let l = oracle_potrf(&top).unwrap();
    let bottom = oracle_trsm(Side::Right, Uplo::Lower, true, false, 1.0, &l, &e).unwrap();
    let want = ColMatrix::from_fn(
        m,
        n,
        |i, j| if i < n { l[(i, j)] } else { bottom[(i - n, j)] },
    );
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::potrf_l_mn(m, n, Some(pc.sub(o.c.0, o.c.1)), pd.sub_mut(o.d.0, o.d.1)).unwrap();
    let w = window(&pd, o.d.0, o.d.1, m, n);
    let got = ColMatrix::from_fn(m, n, |i, j| if i >= j { w[(i, j)] } else { 0.0 });
    let ok = outside_untouched(&pd, &before, o.d.0, o.d.1, m, n)
        && upper_untouched(&pd, &before, o.d.0, o.d.1, n);
    guard(ok, rel(&got, &want))
}

pub fn syrk_potrf_ln(rng: &mut ChaCha8Rng, m: usize, k: usize, o: Origins) -> f64 {
    let (a, b0) = (rand_mat(rng, m, k), rand_mat(rng, m, k));
    // A * B^T must keep C + A * B^T SPD: use B = A plus a small perturbation.
    let b = ColMatrix::from_fn(m, k, |i, j| a[(i, j)] + 1e-3 * b0[(i, j)]);
    let c = spd(rng, m);
    let sum = oracle_syrk(1.0, &a, &b, 1.0, Some(&c)).unwrap();
    let sym = ColMatrix::from_fn(m, m, |i, j| if i >= j { sum[(i, j)] } else { sum[(j, i)] });
    let want = oracle_potrf(&sym).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let pb = embed(rng, &b, o.b.0, o.b.1);
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, m), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::syrk_potrf_ln(
        m,
        k,
        pa.sub(o.a.0, o.a.1),
        pb.sub(o.b.0, o.b.1),
        Some(pc.sub(o.c.0, o.c.1)),
        pd.sub_mut(o.d.0, o.d.1),
    )
    .unwrap();
    let got = lower_of(&window(&pd, o.d.0, o.d.1, m, m));
    let ok = outside_untouched(&pd, &before, o.d.0, o.d.1, m, m)
        && upper_untouched(&pd, &before, o.d.0, o.d.1, m);
    guard(ok, rel(&got, &want))
}

pub fn getrf_pivot(rng: &mut ChaCha8Rng, m: usize, n: usize, o: Origins) -> f64 {
    let c = rand_mat(rng, m, n);
    let (want, want_piv) = oracle_getrf(&c).unwrap();
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    let mut ipiv = vec![0; m.min(n)];
    level3::getrf_pivot(
        m,
        n,
        Some(pc.sub(o.c.0, o.c.1)),
        pd.sub_mut(o.d.0, o.d.1),
        &mut ipiv,
    )
    .unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    let (l, u) = split_lu(&got);
    let resid = rel(
        &oracle_gemm(1.0, &l, &u, 0.0, None).unwrap(),
        &permute_rows(&c, &ipiv),
    );
    let ok = outside_untouched(&pd, &before, o.d.0, o.d.1, m, n) && ipiv == want_piv;
    guard(ok, rel(&got, &want).max(resid))
}

pub fn getrf_nopivot(rng: &mut ChaCha8Rng, m: usize, n: usize, o: Origins) -> f64 {
    // Strict column diagonal dominance: partial pivoting would not swap, so
    // the pivoting oracle is also the unpivoted answer.
    let mut c = rand_mat(rng, m, n);
    for j in 0..m.min(n) {
        c[(j, j)] = (m + 1) as f64 * if j % 2 == 0 { 1.0 } else { -1.0 };
    }
    let (want, piv) = oracle_getrf(&c).unwrap();
    assert!(piv.iter().enumerate().all(|(k, &p)| k == p));
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    level3::getrf_nopivot(m, n, Some(pc.sub(o.c.0, o.c.1)), pd.sub_mut(o.d.0, o.d.1)).unwrap();
    let got = window(&pd, o.d.0, o.d.1, m, n);
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&got, &want),
    )
}

/// Returns the worst of: L against the oracle's L, `||L Q - C|| / ||C||`,
/// and `||Q Q^T - I||`.
pub fn gelqf(rng: &mut ChaCha8Rng, m: usize, n: usize, o: Origins) -> f64 {
    let c = rand_mat(rng, m, n);
    let (want_l, _) = oracle_gelqf(&c).unwrap();
    let pc = embed(rng, &c, o.c.0, o.c.1);
    let mut pd = embed(rng, &ColMatrix::zeros(m, n), o.d.0, o.d.1);
    let before = pd.to_owned();
    let mut work = panelblas::DenseVector::allocate(level3::gelqf_worksize(m, n) / 8);
    level3::gelqf(
        m,
        n,
        Some(pc.sub(o.c.0, o.c.1)),
        pd.sub_mut(o.d.0, o.d.1),
        &mut work[..],
    )
    .unwrap();
    let k = m.min(n);
    let w = window(&pd, o.d.0, o.d.1, m, n);
    let l = ColMatrix::from_fn(m, k, |i, j| if i >= j { w[(i, j)] } else { 0.0 });
    let q = level3::gelqf_form_q(m, n, pd.sub(o.d.0, o.d.1), &work[..k])
        .unwrap()
        .to_col();
    let recon = rel(&oracle_gemm(1.0, &l, &q, 0.0, None).unwrap(), &c);
    let orth = oracle_gemm(1.0, &q, &q.transpose(), 0.0, None)
        .unwrap()
        .dist_fro(&ColMatrix::identity(k));
    guard(
        outside_untouched(&pd, &before, o.d.0, o.d.1, m, n),
        rel(&l, &want_l).max(recon).max(orth),
    )
}

fn vec_rel(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / if den > 0.0 { den } else { f64::MIN_POSITIVE }
}

fn col(v: &[f64]) -> ColMatrix {
    ColMatrix::from_fn(v.len(), 1, |i, _| v[i])
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn gemv(rng: &mut ChaCha8Rng, trans: Trans, m: usize, n: usize, o: Origins) -> f64 {
    let a = rand_mat(rng, m, n);
    let (xl, yl) = match trans {
        Trans::N => (n, m),
        Trans::T => (m, n),
    };
    let (x, y) = (rand_vec(rng, xl), rand_vec(rng, yl));
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let op = if trans == Trans::N {
        a.clone()
    } else {
        a.transpose()
    };
    let want = oracle_gemm(alpha, &op, &col(&x), beta, Some(&col(&y))).unwrap();
    let pa = embed(rng, &a, o.a.0, o.a.1);
    let mut z = vec![0.0; yl];
    level12::gemv(
        trans,
        m,
        n,
        alpha,
        pa.sub(o.a.0, o.a.1),
        &x,
        beta,
        Some(&y),
        &mut z,
    )
    .unwrap();
    vec_rel(&z, want.data())
}

pub fn symv_l(rng: &mut ChaCha8Rng, m: usize, o: Origins) -> f64 {
    let s = rand_mat(rng, m, m);
    let sym = ColMatrix::from_fn(m, m, |i, j| if i >= j { s[(i, j)] } else { s[(j, i)] });
    let (x, y) = (rand_vec(rng, m), rand_vec(rng, m));
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let want = oracle_gemm(alpha, &sym, &col(&x), beta, Some(&col(&y))).unwrap();
    // Only the lower triangle is meaningful in the stored matrix.
    let pa = embed(rng, &s, o.a.0, o.a.1);
    let mut z = vec![0.0; m];
    level12::symv_l(m, alpha, pa.sub(o.a.0, o.a.1), &x, beta, Some(&y), &mut z).unwrap();
    vec_rel(&z, want.data())
}

fn tr_parts(v: TrVariant) -> (Uplo, bool, bool) {
    match v {
        TrVariant::Lnn => (Uplo::Lower, false, false),
        TrVariant::Lnu => (Uplo::Lower, false, true),
        TrVariant::Ltn => (Uplo::Lower, true, false),
        TrVariant::Ltu => (Uplo::Lower, true, true),
        TrVariant::Unn => (Uplo::Upper, false, false),
        TrVariant::Utn => (Uplo::Upper, true, false),
    }
}

pub fn trmv_trsv(rng: &mut ChaCha8Rng, v: TrVariant, m: usize, o: Origins) -> f64 {
    let (uplo, trans, unit) = tr_parts(v);
    let l = well_lower(rng, m);
    let noise = rand_mat(rng, m, m);
    let a = ColMatrix::from_fn(m, m, |i, j| {
        let (r, c) = if uplo == Uplo::Upper { (j, i) } else { (i, j) };
        if r >= c {
            l[(r, c)]
        } else {
            noise[(i, j)]
        }
    });
    let x = rand_vec(rng, m);
    let pa = embed(rng, &a, o.a.0, o.a.1);

    let mut t = match uplo {
        Uplo::Lower => panelblas::ref_impl::lower(&a),
        Uplo::Upper => panelblas::ref_impl::upper(&a),
    };
    if unit {
        for i in 0..m {
            t[(i, i)] = 1.0;
        }
    }
    let op = if trans { t.transpose() } else { t };
    let want_mv = oracle_gemm(1.0, &op, &col(&x), 0.0, None).unwrap();
    let mut z = vec![0.0; m];
    level12::trmv(v, m, pa.sub(o.a.0, o.a.1), &x, &mut z).unwrap();
    let e1 = vec_rel(&z, want_mv.data());

    let want_sv = oracle_trsm(Side::Left, uplo, trans, unit, 1.0, &a, &col(&x)).unwrap();
    level12::trsv(v, m, pa.sub(o.a.0, o.a.1), &x, &mut z).unwrap();
    e1.max(vec_rel(&z, want_sv.data()))
}

pub fn axpy_dot(rng: &mut ChaCha8Rng, m: usize) -> f64 {
    let (x, y) = (rand_vec(rng, m), rand_vec(rng, m));
    let alpha = rng.gen_range(-2.0..2.0);
    let mut z = vec![0.0; m];
    level12::axpy(m, alpha, &x, Some(&y), &mut z).unwrap();
    let want: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
    let mut e = vec_rel(&z, &want);
    let d = level12::dot(m, &x, &y).unwrap();
    let mut s = 0.0;
    for i in 0..m {
        s += x[i] * y[i];
    }
    let scale: f64 = x.iter().zip(&y).map(|(a, b)| (a * b).abs()).sum();
    e = e.max((d - s).abs() / scale.max(f64::MIN_POSITIVE));
    e
}

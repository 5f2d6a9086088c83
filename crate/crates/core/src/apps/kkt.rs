//! Range-space (Schur complement) solution of an equality-constrained QP
//!
//! ```text
//! [H  A^T] [x     ]     [g]
//! [A  0  ] [lambda] = - [b]
//! ```
//!
//! with `H` `n x n` SPD and `A` `m x n` of full row rank.

use crate::error::Result;
use crate::level12::{gemv, trsv, TrVariant, Trans};
use crate::level3::{potrf_l, potrf_l_mn, syrk_ln, syrk_potrf_ln, trsm_rltn};
use crate::matstore::{PanelMatrix, SubRef};
use crate::pack::gecp;

/// `L_H` with `H = L_H L_H^T`, `M = A L_H^{-T}`, and `L_S` with
/// `M M^T = A H^{-1} A^T = L_S L_S^T`.
pub struct KktFactor {
    pub n: usize,
    pub m: usize,
    pub l_h: PanelMatrix<'static>,
    pub m_mat: PanelMatrix<'static>,
    pub l_s: PanelMatrix<'static>,
}

/// Four-call factorization: potrf, trsm, syrk, potrf. A failing Cholesky is
/// reported as stage 0 (H) or stage 1 (Schur complement).
pub fn kkt_schur_factor(n: usize, m: usize, h: SubRef<'_>, a: SubRef<'_>) -> Result<KktFactor> {
    let mut l_h = PanelMatrix::allocate(n, n);
    potrf_l(n, Some(h), l_h.sub_mut(0, 0)).map_err(|e| e.at_stage(0))?;
    let mut m_mat = PanelMatrix::allocate(m, n);
    trsm_rltn(m, n, 1.0, l_h.sub(0, 0), Some(a), m_mat.sub_mut(0, 0))?;
    let mut schur = PanelMatrix::allocate(m, m);
    syrk_ln(
        m,
        n,
        1.0,
        m_mat.sub(0, 0),
        m_mat.sub(0, 0),
        0.0,
        None,
        schur.sub_mut(0, 0),
    )?;
    let mut l_s = PanelMatrix::allocate(m, m);
    potrf_l(m, Some(schur.sub(0, 0)), l_s.sub_mut(0, 0)).map_err(|e| e.at_stage(1))?;
    Ok(KktFactor {
        n,
        m,
        l_h,
        m_mat,
        l_s,
    })
}

/// Same factorization with `H` and `A` stacked into one `(n + m) x n`
/// matrix: a single rectangular Cholesky yields `L_H` and `M`, then the
/// fused syrk + potrf yields `L_S`.
pub fn kkt_schur_factor_fused(
    n: usize,
    m: usize,
    h: SubRef<'_>,
    a: SubRef<'_>,
) -> Result<KktFactor> {
    let mut stacked = PanelMatrix::allocate(n + m, n);
    gecp(n, n, h, stacked.sub_mut(0, 0))?;
    gecp(m, n, a, stacked.sub_mut(n, 0))?;
    potrf_l_mn(n + m, n, None, stacked.sub_mut(0, 0)).map_err(|e| e.at_stage(0))?;
    let mut l_s = PanelMatrix::allocate(m, m);
    {
        // l_s starts zeroed, so reading C from it gives chol(M * M^T).
        let bottom = stacked.sub(n, 0);
        syrk_potrf_ln(m, n, bottom, bottom, None, l_s.sub_mut(0, 0)).map_err(|e| e.at_stage(1))?;
    }
    let mut l_h = PanelMatrix::allocate(n, n);
    gecp(n, n, stacked.sub(0, 0), l_h.sub_mut(0, 0))?;
    let mut m_mat = PanelMatrix::allocate(m, n);
    gecp(m, n, stacked.sub(n, 0), m_mat.sub_mut(0, 0))?;
    Ok(KktFactor {
        n,
        m,
        l_h,
        m_mat,
        l_s,
    })
}

/// Returns `(x, lambda)` with `lambda = (A H^{-1} A^T)^{-1} (b - A H^{-1} g)`
/// and `x = -H^{-1} (g + A^T lambda)`.
pub fn kkt_schur_solve(f: &KktFactor, g: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (f.n, f.m);
    let mut w = vec![0.0; n];
    trsv(TrVariant::Lnn, n, f.l_h.sub(0, 0), g, &mut w)?;
    // t = b - M w
    let mut t = vec![0.0; m];
    gemv(
        Trans::N,
        m,
        n,
        -1.0,
        f.m_mat.sub(0, 0),
        &w,
        1.0,
        Some(b),
        &mut t,
    )?;
    let mut lambda = vec![0.0; m];
    trsv(TrVariant::Lnn, m, f.l_s.sub(0, 0), &t, &mut lambda)?;
    let y = lambda.clone();
    trsv(TrVariant::Ltn, m, f.l_s.sub(0, 0), &y, &mut lambda)?;
    // x = -L_H^{-T} (w + M^T lambda)
    let mut u = vec![0.0; n];
    gemv(
        Trans::T,
        m,
        n,
        1.0,
        f.m_mat.sub(0, 0),
        &lambda,
        1.0,
        Some(&w),
        &mut u,
    )?;
    let mut x = vec![0.0; n];
    trsv(TrVariant::Ltn, n, f.l_h.sub(0, 0), &u, &mut x)?;
    for v in &mut x {
        *v = -*v;
    }
    Ok((x, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::matstore::ColMatrix;
    use crate::ref_impl::{oracle_gemm, oracle_potrf, oracle_trsm, rel_err, Side, Uplo};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ColMatrix {
        ColMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn spd(rng: &mut ChaCha8Rng, n: usize) -> ColMatrix {
        let g = rand_mat(rng, n, n);
        let mut c = oracle_gemm(1.0, &g, &g.transpose(), 0.0, None).unwrap();
        for i in 0..n {
            c[(i, i)] += n as f64;
        }
        c
    }

    fn lower(p: &PanelMatrix<'_>) -> ColMatrix {
        let n = p.rows();
        ColMatrix::from_fn(n, n, |i, j| if i >= j { p.at(i, j) } else { 0.0 })
    }

    fn pm(a: &ColMatrix) -> PanelMatrix<'static> {
        PanelMatrix::from_col(a)
    }

    #[test]
    fn identity_hessian_cases() {
        let h = pm(&ColMatrix::identity(2));
        let a = pm(&ColMatrix::from_rows(&[&[1.0, 0.0]]));
        let f = kkt_schur_factor(2, 1, h.sub(0, 0), a.sub(0, 0)).unwrap();
        assert_eq!(lower(&f.l_h), ColMatrix::identity(2));
        assert_eq!(f.m_mat.to_rows(), vec![vec![1.0, 0.0]]);
        assert_eq!(f.l_s.to_rows(), vec![vec![1.0]]);

        let h = pm(&ColMatrix::identity(5));
        let f = kkt_schur_factor(5, 5, h.sub(0, 0), h.sub(0, 0)).unwrap();
        assert_eq!(lower(&f.l_s), ColMatrix::identity(5));
        let (x, l) = kkt_schur_solve(&f, &[0.0; 5], &[0.0; 5]).unwrap();
        assert_eq!((x, l), (vec![0.0; 5], vec![0.0; 5]));
    }

    #[test]
    fn schur_factor_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, m) = (9, 5);
        let h = spd(&mut rng, n);
        let a = rand_mat(&mut rng, m, n);
        // A H^{-1} A^T via an explicit inverse.
        let lh = oracle_potrf(&h).unwrap();
        let linv = oracle_trsm(
            Side::Left,
            Uplo::Lower,
            false,
            false,
            1.0,
            &lh,
            &ColMatrix::identity(n),
        )
        .unwrap();
        let hinv = oracle_gemm(1.0, &linv.transpose(), &linv, 0.0, None).unwrap();
        let s = oracle_gemm(
            1.0,
            &oracle_gemm(1.0, &a, &hinv, 0.0, None).unwrap(),
            &a.transpose(),
            0.0,
            None,
        )
        .unwrap();
        let want = oracle_potrf(&s).unwrap();
        let f = kkt_schur_factor(n, m, pm(&h).sub(0, 0), pm(&a).sub(0, 0)).unwrap();
        assert!(rel_err(&lower(&f.l_s), &want) <= 1e-12);
        let ff = kkt_schur_factor_fused(n, m, pm(&h).sub(0, 0), pm(&a).sub(0, 0)).unwrap();
        assert!(rel_err(&lower(&ff.l_s), &lower(&f.l_s)) <= 1e-12);
        assert!(rel_err(&ff.m_mat.to_col(), &f.m_mat.to_col()) <= 1e-12);
    }

    #[test]
    fn solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, m) = (11, 6);
        let h = spd(&mut rng, n);
        let a = rand_mat(&mut rng, m, n);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = kkt_schur_factor(n, m, pm(&h).sub(0, 0), pm(&a).sub(0, 0)).unwrap();
        let (x, lam) = kkt_schur_solve(&f, &g, &b).unwrap();
        // H x + A^T lambda + g = 0 and A x + b = 0.
        let mut r2 = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            let mut s = g[i];
            for j in 0..n {
                s += h[(i, j)] * x[j];
            }
            for j in 0..m {
                s += a[(j, i)] * lam[j];
            }
            r2 += s * s;
            scale += g[i] * g[i];
        }
        for i in 0..m {
            let mut s = b[i];
            for j in 0..n {
                s += a[(i, j)] * x[j];
            }
            r2 += s * s;
            scale += b[i] * b[i];
        }
        assert!(r2.sqrt() <= 1e-10 * scale.sqrt());
    }

    #[test]
    fn failures_carry_stage() {
        let h = pm(&ColMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]));
        let a = pm(&ColMatrix::from_rows(&[&[1.0, 0.0]]));
        let err = kkt_schur_factor(2, 1, h.sub(0, 0), a.sub(0, 0))
            .err()
            .unwrap();
        assert_eq!(err, Error::NotPositiveDefinite { index: 1 }.at_stage(0));
        let h = pm(&ColMatrix::identity(2));
        let a = pm(&ColMatrix::from_rows(&[&[1.0, 0.0], &[2.0, 0.0]]));
        let err = kkt_schur_factor_fused(2, 2, h.sub(0, 0), a.sub(0, 0))
            .err()
            .unwrap();
        assert_eq!(err, Error::NotPositiveDefinite { index: 1 }.at_stage(1));
    }
}

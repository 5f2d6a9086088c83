#![allow(dead_code)]

use panelblas::pack::{pack_matrix, unpack_matrix};
use panelblas::ref_impl::oracle_gemm;
use panelblas::{ColMatrix, PanelMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ColMatrix {
    ColMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
}

/// `M * M^T + n * I` with uniform entries.
pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> ColMatrix {
    let m = rand_mat(rng, n, n);
    let mut c = oracle_gemm(1.0, &m, &m.transpose(), 0.0, None).unwrap();
    for i in 0..n {
        c[(i, i)] += n as f64;
    }
    c
}

/// Lower-triangular matrix with a diagonal bounded away from zero.
pub fn well_lower(rng: &mut ChaCha8Rng, n: usize) -> ColMatrix {
    ColMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let v: f64 = rng.gen_range(1.0..2.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        } else if i > j {
            rng.gen_range(-1.0..1.0) / n as f64
        } else {
            0.0
        }
    })
}

/// Panel matrix holding `a` at `(ai, aj)`, surrounded by a margin of
/// random filler.
pub fn embed(rng: &mut ChaCha8Rng, a: &ColMatrix, ai: usize, aj: usize) -> PanelMatrix<'static> {
    let (m, n) = (a.rows(), a.cols());
    let filler = rand_mat(rng, ai + m + 3, aj + n + 2);
    let mut p = PanelMatrix::from_col(&filler);
    pack_matrix(m, n, a, 0, 0, p.sub_mut(ai, aj)).unwrap();
    p
}

pub fn window(p: &PanelMatrix<'_>, ai: usize, aj: usize, m: usize, n: usize) -> ColMatrix {
    let mut c = ColMatrix::zeros(m, n);
    unpack_matrix(m, n, p.sub(ai, aj), &mut c, 0, 0).unwrap();
    c
}

pub fn lower_of(a: &ColMatrix) -> ColMatrix {
    panelblas::ref_impl::lower(a)
}

/// Largest `|a - b| / max(1, |b|)`-style error normalised by `||b||_F`.
pub fn rel(a: &ColMatrix, b: &ColMatrix) -> f64 {
    panelblas::ref_impl::rel_err(a, b)
}

/// True when every element of `p` outside the window equals `orig`.
pub fn outside_untouched(
    p: &PanelMatrix<'_>,
    orig: &PanelMatrix<'_>,
    ai: usize,
    aj: usize,
    m: usize,
    n: usize,
) -> bool {
    for j in 0..p.cols() {
        for i in 0..p.rows() {
            let inside = i >= ai && i < ai + m && j >= aj && j < aj + n;
            if !inside && p.at(i, j).to_bits() != orig.at(i, j).to_bits() {
                return false;
            }
        }
    }
    true
}

/// Same check restricted to the strict upper triangle of the window, which
/// lower-storing routines must leave alone.
pub fn upper_untouched(
    p: &PanelMatrix<'_>,
    orig: &PanelMatrix<'_>,
    ai: usize,
    aj: usize,
    m: usize,
) -> bool {
    for j in 0..m {
        for i in 0..j.min(m) {
            if p.at(ai + i, aj + j).to_bits() != orig.at(ai + i, aj + j).to_bits() {
                return false;
            }
        }
    }
    true
}
pub mod cases;

//! Conversions between column-major and panel-major storage, and the
//! auxiliary copy / scale / extract / insert / permutation routines.
//!
//! All routines take arbitrary window origins, including rows that do not
//! start at a panel top.

use crate::error::{Error, Result};
use crate::matstore::{ColMatrix, PanelMatrix, SubMut, SubRef, PS};
use crate::raw::{copy_window, Win};

/// `dst(i, j) = src(ai + i, aj + j)` for `i < m`, `j < n`.
pub fn pack_matrix(
    m: usize,
    n: usize,
    src: &ColMatrix,
    ai: usize,
    aj: usize,
    mut dst: SubMut<'_>,
) -> Result<()> {
    src.check("src", ai, aj, m, n)?;
    dst.check("dst", m, n)?;
    let d = Win::from_mut(&mut dst);
    let lda = src.lda();
    let data = src.data();
    for j in 0..n {
        let col = &data[ai + (aj + j) * lda..];
        let mut i = 0;
        while i < m {
            // Contiguous run up to the end of the destination panel.
            let run = (PS - (d.i + i) % PS).min(m - i);
            unsafe { std::ptr::copy_nonoverlapping(col[i..i + run].as_ptr(), d.ptr(i, j), run) };
            i += run;
        }
    }
    Ok(())
}

/// `dst(j, i) = src(ai + i, aj + j)`: packs the transpose of an `m x n` window.
pub fn pack_matrix_transposed(
    m: usize,
    n: usize,
    src: &ColMatrix,
    ai: usize,
    aj: usize,
    mut dst: SubMut<'_>,
) -> Result<()> {
    src.check("src", ai, aj, m, n)?;
    dst.check("dst", n, m)?;
    for j in 0..n {
        for i in 0..m {
            dst.set(j, i, src[(ai + i, aj + j)])?;
        }
    }
    Ok(())
}

/// Inverse of [`pack_matrix`].
pub fn unpack_matrix(
    m: usize,
    n: usize,
    src: SubRef<'_>,
    dst: &mut ColMatrix,
    ai: usize,
    aj: usize,
) -> Result<()> {
    src.check("src", m, n)?;
    dst.check("dst", ai, aj, m, n)?;
    let s = Win::from_ref(&src);
    let lda = dst.lda();
    let data = dst.data_mut();
    for j in 0..n {
        let col = &mut data[ai + (aj + j) * lda..];
        let mut i = 0;
        while i < m {
            let run = (PS - (s.i + i) % PS).min(m - i);
            unsafe {
                std::ptr::copy_nonoverlapping(s.ptr(i, j), col[i..i + run].as_mut_ptr(), run)
            };
            i += run;
        }
    }
    Ok(())
}

impl PanelMatrix<'static> {
    /// Panel-major copy of a column-major matrix.
    pub fn from_col(a: &ColMatrix) -> Self {
        let mut p = PanelMatrix::allocate(a.rows(), a.cols());
        pack_matrix(a.rows(), a.cols(), a, 0, 0, p.sub_mut(0, 0))
            .expect("window sized from source");
        p
    }
}

impl PanelMatrix<'_> {
    /// Column-major copy of the whole matrix.
    pub fn to_col(&self) -> ColMatrix {
        let mut c = ColMatrix::zeros(self.rows(), self.cols());
        unpack_matrix(self.rows(), self.cols(), self.sub(0, 0), &mut c, 0, 0)
            .expect("window sized from source");
        c
    }
}

/// Copy of the `m x n` window at `a` into the window at `b`.
pub fn gecp(m: usize, n: usize, a: SubRef<'_>, mut b: SubMut<'_>) -> Result<()> {
    a.check("A", m, n)?;
    b.check("B", m, n)?;
    unsafe { copy_window(m, n, Win::from_ref(&a), Win::from_mut(&mut b)) };
    Ok(())
}

/// `B = A^T` with `A` `m x n` and `B` `n x m`.
pub fn getr(m: usize, n: usize, a: SubRef<'_>, mut b: SubMut<'_>) -> Result<()> {
    a.check("A", m, n)?;
    b.check("B", n, m)?;
    let (aw, bw) = (Win::from_ref(&a), Win::from_mut(&mut b));
    for j in 0..n {
        for i in 0..m {
            unsafe { bw.set(j, i, aw.at(i, j)) };
        }
    }
    Ok(())
}

/// `A = alpha * A` on the window.
pub fn gesc(m: usize, n: usize, alpha: f64, mut a: SubMut<'_>) -> Result<()> {
    a.check("A", m, n)?;
    let w = Win::from_mut(&mut a);
    for j in 0..n {
        for i in 0..m {
            unsafe { w.set(i, j, alpha * w.at(i, j)) };
        }
    }
    Ok(())
}

/// Sets every element of the window to `alpha`.
pub fn gese(m: usize, n: usize, alpha: f64, mut a: SubMut<'_>) -> Result<()> {
    a.check("A", m, n)?;
    let w = Win::from_mut(&mut a);
    for j in 0..n {
        for i in 0..m {
            unsafe { w.set(i, j, alpha) };
        }
    }
    Ok(())
}

/// `B = alpha * A + B` on the window.
pub fn gead(m: usize, n: usize, alpha: f64, a: SubRef<'_>, mut b: SubMut<'_>) -> Result<()> {
    a.check("A", m, n)?;
    b.check("B", m, n)?;
    let (aw, bw) = (Win::from_ref(&a), Win::from_mut(&mut b));
    for j in 0..n {
        for i in 0..m {
            unsafe { bw.set(i, j, alpha * aw.at(i, j) + bw.at(i, j)) };
        }
    }
    Ok(())
}

fn check_vec(len: usize, need: usize) -> Result<()> {
    if len < need {
        Err(Error::Dimension(format!(
            "vector has {len} entries, need {need}"
        )))
    } else {
        Ok(())
    }
}

/// `x[k] = A(k, k)` for `k < n`.
pub fn diag_extract(n: usize, a: SubRef<'_>, x: &mut [f64]) -> Result<()> {
    a.check("A", n, n)?;
    check_vec(x.len(), n)?;
    for (k, v) in x[..n].iter_mut().enumerate() {
        *v = a.get(k, k)?;
    }
    Ok(())
}

/// `A(k, k) = x[k]` for `k < n`.
pub fn diag_insert(n: usize, x: &[f64], mut a: SubMut<'_>) -> Result<()> {
    a.check("A", n, n)?;
    check_vec(x.len(), n)?;
    for (k, &v) in x[..n].iter().enumerate() {
        a.set(k, k, v)?;
    }
    Ok(())
}

/// `x[j] = A(0, j)`: the first row of the window, `n` columns.
pub fn row_extract(n: usize, a: SubRef<'_>, x: &mut [f64]) -> Result<()> {
    a.check("A", 1, n)?;
    check_vec(x.len(), n)?;
    for (j, v) in x[..n].iter_mut().enumerate() {
        *v = a.get(0, j)?;
    }
    Ok(())
}

pub fn row_insert(n: usize, x: &[f64], mut a: SubMut<'_>) -> Result<()> {
    a.check("A", 1, n)?;
    check_vec(x.len(), n)?;
    for (j, &v) in x[..n].iter().enumerate() {
        a.set(0, j, v)?;
    }
    Ok(())
}

/// `x[i] = A(i, 0)`: the first column of the window, `m` rows.
pub fn col_extract(m: usize, a: SubRef<'_>, x: &mut [f64]) -> Result<()> {
    a.check("A", m, 1)?;
    check_vec(x.len(), m)?;
    for (i, v) in x[..m].iter_mut().enumerate() {
        *v = a.get(i, 0)?;
    }
    Ok(())
}

pub fn col_insert(m: usize, x: &[f64], mut a: SubMut<'_>) -> Result<()> {
    a.check("A", m, 1)?;
    check_vec(x.len(), m)?;
    for (i, &v) in x[..m].iter().enumerate() {
        a.set(i, 0, v)?;
    }
    Ok(())
}

/// Exchanges rows `i` and `j` (relative to the window origin) over `n`
/// columns. The rows may sit in different panels.
pub fn row_swap(n: usize, a: &mut SubMut<'_>, i: usize, j: usize) -> Result<()> {
    a.check("A", i.max(j) + 1, n)?;
    if i == j {
        return Ok(());
    }
    let w = Win::from_mut(a);
    for c in 0..n {
        unsafe { std::ptr::swap(w.ptr(i, c), w.ptr(j, c)) };
    }
    Ok(())
}

/// Applies the transposition list `ipiv` in order: row `k` is swapped with
/// row `ipiv[k]`.
pub fn apply_row_permutation(n: usize, ipiv: &[usize], a: &mut SubMut<'_>) -> Result<()> {
    for (k, &p) in ipiv.iter().enumerate() {
        row_swap(n, a, k, p)?;
    }
    Ok(())
}

/// Undoes [`apply_row_permutation`] by applying the swaps in reverse order.
pub fn apply_inverse_row_permutation(n: usize, ipiv: &[usize], a: &mut SubMut<'_>) -> Result<()> {
    for (k, &p) in ipiv.iter().enumerate().rev() {
        row_swap(n, a, k, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matstore::element_offset;

    fn seq(m: usize, n: usize) -> ColMatrix {
        ColMatrix::from_fn(m, n, |i, j| (i * 100 + j) as f64 + 0.5)
    }

    #[test]
    fn pack_small() {
        let src = ColMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let mut p = PanelMatrix::allocate(2, 2);
        pack_matrix(2, 2, &src, 0, 0, p.sub_mut(0, 0)).unwrap();
        assert_eq!(p.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn pack_at_offset_lands_on_formula() {
        let src = seq(3, 3);
        let mut p = PanelMatrix::allocate(8, 8);
        pack_matrix(3, 3, &src, 0, 0, p.sub_mut(2, 1)).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                assert_eq!(p.data()[element_offset(2 + i, 1 + j, PS, 8)], src[(i, j)]);
            }
        }
        // Nothing else written.
        assert_eq!(p.at(0, 0), 0.0);
        assert_eq!(p.at(5, 1), 0.0);
    }

    #[test]
    fn pack_unpack_across_panel() {
        let src = seq(5, 3);
        let p = PanelMatrix::from_col(&src);
        assert_eq!(p.to_col(), src);
        let z = PanelMatrix::allocate(4, 4);
        assert_eq!(z.to_col(), ColMatrix::zeros(4, 4));
    }

    #[test]
    fn transposed_pack() {
        let i3 = ColMatrix::identity(3);
        let mut p = PanelMatrix::allocate(3, 3);
        pack_matrix_transposed(3, 3, &i3, 0, 0, p.sub_mut(0, 0)).unwrap();
        assert_eq!(p.to_col(), i3);
        let row = ColMatrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        let mut q = PanelMatrix::allocate(3, 1);
        pack_matrix_transposed(1, 3, &row, 0, 0, q.sub_mut(0, 0)).unwrap();
        assert_eq!(q.to_rows(), vec![vec![1.0], vec![2.0], vec![3.0]]);
    }

    #[test]
    fn getr_involution_and_gesc() {
        let a = PanelMatrix::from_col(&seq(5, 7));
        let mut t = PanelMatrix::allocate(7, 5);
        let mut back = PanelMatrix::allocate(5, 7);
        getr(5, 7, a.sub(0, 0), t.sub_mut(0, 0)).unwrap();
        getr(7, 5, t.sub(0, 0), back.sub_mut(0, 0)).unwrap();
        assert_eq!(back.to_col(), a.to_col());

        let mut b = PanelMatrix::from_col(&seq(2, 2));
        gesc(2, 2, 0.0, b.sub_mut(0, 0)).unwrap();
        assert_eq!(b.to_col(), ColMatrix::zeros(2, 2));
        gese(2, 1, 7.0, b.sub_mut(0, 1)).unwrap();
        assert_eq!(b.to_rows(), vec![vec![0.0, 7.0], vec![0.0, 7.0]]);
    }

    #[test]
    fn extract_insert() {
        let id = PanelMatrix::from_col(&ColMatrix::identity(6));
        let mut x = [0.0; 6];
        diag_extract(6, id.sub(0, 0), &mut x).unwrap();
        assert_eq!(x, [1.0; 6]);

        let mut a = PanelMatrix::allocate(6, 5);
        row_insert(4, &[1.0, 2.0, 3.0, 4.0], a.sub_mut(5, 1)).unwrap();
        let mut y = [0.0; 4];
        row_extract(4, a.sub(5, 1), &mut y).unwrap();
        assert_eq!(y, [1.0, 2.0, 3.0, 4.0]);

        let s = PanelMatrix::from_col(&seq(9, 4));
        let mut col = [0.0; 6];
        col_extract(6, s.sub(3, 2), &mut col).unwrap();
        for (i, v) in col.iter().enumerate() {
            assert_eq!(*v, seq(9, 4)[(3 + i, 2)]);
        }
        assert!(col_extract(7, s.sub(3, 2), &mut [0.0; 7]).is_err());
    }

    #[test]
    fn swaps() {
        let mut a = PanelMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        row_swap(2, &mut a.sub_mut(0, 0), 0, 0).unwrap();
        assert_eq!(a.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        row_swap(2, &mut a.sub_mut(0, 0), 0, 1).unwrap();
        assert_eq!(a.to_rows(), vec![vec![3.0, 4.0], vec![1.0, 2.0]]);

        let src = seq(8, 3);
        let mut b = PanelMatrix::from_col(&src);
        row_swap(3, &mut b.sub_mut(0, 0), 2, 6).unwrap();
        for j in 0..3 {
            assert_eq!(b.at(2, j), src[(6, j)]);
            assert_eq!(b.at(6, j), src[(2, j)]);
        }

        let mut c = PanelMatrix::from_col(&src);
        apply_row_permutation(3, &[], &mut c.sub_mut(0, 0)).unwrap();
        assert_eq!(c.to_col(), src);
        apply_row_permutation(3, &[1], &mut c.sub_mut(0, 0)).unwrap();
        assert_eq!(c.at(0, 0), src[(1, 0)]);
        let ipiv = [5, 1, 7, 4, 6, 5];
        let mut d = PanelMatrix::from_col(&src);
        apply_row_permutation(3, &ipiv, &mut d.sub_mut(0, 0)).unwrap();
        apply_inverse_row_permutation(3, &ipiv, &mut d.sub_mut(0, 0)).unwrap();
        assert_eq!(d.to_col(), src);
    }
}

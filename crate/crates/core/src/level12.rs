//! Level-1 and level-2 routines. Vectors are unit-stride slices; matrix rows
//! and columns are reached through the extract/insert routines in `pack`.
//!
//! Where BLAS would update `y` in place, these routines write to a separate
//! `z`; passing `None` for `y` reads it from `z`.

use crate::error::{Error, Result};
use crate::matstore::SubRef;

fn check_len(name: &'static str, v: usize, need: usize) -> Result<()> {
    if v < need {
        Err(Error::Dimension(format!(
            "{name} has {v} entries, need {need}"
        )))
    } else {
        Ok(())
    }
}

/// `z = alpha * x + y`.
pub fn axpy(m: usize, alpha: f64, x: &[f64], y: Option<&[f64]>, z: &mut [f64]) -> Result<()> {
    axpby(m, alpha, x, 1.0, y, z)
}

/// `z = alpha * x + beta * y`.
pub fn axpby(
    m: usize,
    alpha: f64,
    x: &[f64],
    beta: f64,
    y: Option<&[f64]>,
    z: &mut [f64],
) -> Result<()> {
    check_len("x", x.len(), m)?;
    check_len("z", z.len(), m)?;
    match y {
        Some(y) => {
            check_len("y", y.len(), m)?;
            for ((zi, &xi), &yi) in z[..m].iter_mut().zip(x).zip(y) {
                *zi = alpha * xi + beta * yi;
            }
        }
        None => {
            for (zi, &xi) in z[..m].iter_mut().zip(x) {
                *zi = alpha * xi + beta * *zi;
            }
        }
    }
    Ok(())
}

/// Inner product, summed in index order.
pub fn dot(m: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("x", x.len(), m)?;
    check_len("y", y.len(), m)?;
    Ok(x[..m].iter().zip(&y[..m]).fold(0.0, |s, (a, b)| s + a * b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    N,
    T,
}

/// `z = alpha * op(A) * x + beta * y` with `A` `m x n`.
pub fn gemv(
    trans: Trans,
    m: usize,
    n: usize,
    alpha: f64,
    a: SubRef<'_>,
    x: &[f64],
    beta: f64,
    y: Option<&[f64]>,
    z: &mut [f64],
) -> Result<()> {
    a.check("A", m, n)?;
    let (rows, cols) = match trans {
        Trans::N => (m, n),
        Trans::T => (n, m),
    };
    check_len("x", x.len(), cols)?;
    check_len("z", z.len(), rows)?;
    if let Some(y) = y {
        check_len("y", y.len(), rows)?;
    }
    let mut out = vec![0.0; rows];
    match trans {
        Trans::N => {
            for j in 0..n {
                let xj = x[j];
                for (i, o) in out.iter_mut().enumerate() {
                    *o += a.get(i, j)? * xj;
                }
            }
        }
        Trans::T => {
            for (j, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for (i, &xi) in x[..m].iter().enumerate() {
                    s += a.get(i, j)? * xi;
                }
                *o = s;
            }
        }
    }
    finish(alpha, beta, &out, y, z);
    Ok(())
}

fn finish(alpha: f64, beta: f64, out: &[f64], y: Option<&[f64]>, z: &mut [f64]) {
    for (i, &o) in out.iter().enumerate() {
        let yi = match y {
            Some(y) => y[i],
            None => z[i],
        };
        z[i] = if beta == 0.0 {
            alpha * o
        } else {
            alpha * o + beta * yi
        };
    }
}

/// `z = alpha * A * x + beta * y` with `A` symmetric, read from its lower
/// triangle only.
pub fn symv_l(
    m: usize,
    alpha: f64,
    a: SubRef<'_>,
    x: &[f64],
    beta: f64,
    y: Option<&[f64]>,
    z: &mut [f64],
) -> Result<()> {
    a.check("A", m, m)?;
    check_len("x", x.len(), m)?;
    check_len("z", z.len(), m)?;
    if let Some(y) = y {
        check_len("y", y.len(), m)?;
    }
    let mut out = vec![0.0; m];
    for j in 0..m {
        out[j] += a.get(j, j)? * x[j];
        for i in j + 1..m {
            let v = a.get(i, j)?;
            out[i] += v * x[j];
            out[j] += v * x[i];
        }
    }
    finish(alpha, beta, &out, y, z);
    Ok(())
}

/// Triangular matrix variants for `trmv` / `trsv`: triangle, transpose,
/// diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrVariant {
    Lnn,
    Lnu,
    Ltn,
    Ltu,
    Unn,
    Utn,
}

impl TrVariant {
    pub const ALL: [TrVariant; 6] = [
        TrVariant::Lnn,
        TrVariant::Lnu,
        TrVariant::Ltn,
        TrVariant::Ltu,
        TrVariant::Unn,
        TrVariant::Utn,
    ];

    fn lower(self) -> bool {
        matches!(
            self,
            TrVariant::Lnn | TrVariant::Lnu | TrVariant::Ltn | TrVariant::Ltu
        )
    }

    fn transposed(self) -> bool {
        matches!(self, TrVariant::Ltn | TrVariant::Ltu | TrVariant::Utn)
    }

    fn unit(self) -> bool {
        matches!(self, TrVariant::Lnu | TrVariant::Ltu)
    }

    /// Is element `(i, j)` of `op(A)` inside the referenced triangle?
    fn entry(self, a: &SubRef<'_>, i: usize, j: usize) -> Result<f64> {
        let (r, c) = if self.transposed() { (j, i) } else { (i, j) };
        if r == c && self.unit() {
            return Ok(1.0);
        }
        let inside = if self.lower() { r >= c } else { r <= c };
        if inside {
            a.get(r, c)
        } else {
            Ok(0.0)
        }
    }

    /// Whether `op(A)` is lower triangular.
    fn op_lower(self) -> bool {
        self.lower() != self.transposed()
    }
}

/// `z = op(A) * x` with `A` `m x m` triangular.
pub fn trmv(variant: TrVariant, m: usize, a: SubRef<'_>, x: &[f64], z: &mut [f64]) -> Result<()> {
    a.check("A", m, m)?;
    check_len("x", x.len(), m)?;
    check_len("z", z.len(), m)?;
    let mut out = vec![0.0; m];
    for (i, o) in out.iter_mut().enumerate() {
        let range = if variant.op_lower() { 0..i + 1 } else { i..m };
        let mut s = 0.0;
        for j in range {
            s += variant.entry(&a, i, j)? * x[j];
        }
        *o = s;
    }
    z[..m].copy_from_slice(&out);
    Ok(())
}

/// Solves `op(A) * z = x` with `A` `m x m` triangular.
pub fn trsv(variant: TrVariant, m: usize, a: SubRef<'_>, x: &[f64], z: &mut [f64]) -> Result<()> {
    a.check("A", m, m)?;
    check_len("x", x.len(), m)?;
    check_len("z", z.len(), m)?;
    let mut out = x[..m].to_vec();
    let order: Box<dyn Iterator<Item = usize>> = if variant.op_lower() {
        Box::new(0..m)
    } else {
        Box::new((0..m).rev())
    };
    for i in order {
        let range = if variant.op_lower() { 0..i } else { i + 1..m };
        let mut s = out[i];
        for j in range {
            s -= variant.entry(&a, i, j)? * out[j];
        }
        let diag = variant.entry(&a, i, i)?;
        if diag == 0.0 {
            return Err(Error::SingularTriangle { col: i });
        }
        out[i] = if variant.unit() { s } else { s / diag };
    }
    z[..m].copy_from_slice(&out);
    Ok(())
}

/// Givens rotation `(c, s, r)` with `c * a + s * b = r`, `-s * a + c * b = 0`.
/// `r` takes the sign of `a` when `|a| > |b|`, else the sign of `b`.
pub fn rotg(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0, a);
    }
    if a == 0.0 {
        return (0.0, 1.0, b);
    }
    let roe = if a.abs() > b.abs() { a } else { b };
    let r = a.hypot(b).copysign(roe);
    (a / r, b / r, r)
}

/// Applies the rotation to columns `i` and `j` of the `m`-row window:
/// `[A_i A_j] <- [A_i A_j] * [c -s; s c]`.
pub fn apply_col_rot(
    m: usize,
    a: &mut crate::matstore::SubMut<'_>,
    i: usize,
    j: usize,
    c: f64,
    s: f64,
) -> Result<()> {
    a.check("A", m, i.max(j) + 1)?;
    for r in 0..m {
        let (x, y) = (a.get(r, i)?, a.get(r, j)?);
        a.set(r, i, c * x + s * y)?;
        a.set(r, j, -s * x + c * y)?;
    }
    Ok(())
}

/// Applies the rotation to rows `i` and `j` of the `n`-column window:
/// `[A_i; A_j] <- [c s; -s c] * [A_i; A_j]`.
pub fn apply_row_rot(
    n: usize,
    a: &mut crate::matstore::SubMut<'_>,
    i: usize,
    j: usize,
    c: f64,
    s: f64,
) -> Result<()> {
    a.check("A", i.max(j) + 1, n)?;
    for col in 0..n {
        let (x, y) = (a.get(i, col)?, a.get(j, col)?);
        a.set(i, col, c * x + s * y)?;
        a.set(j, col, -s * x + c * y)?;
    }
    Ok(())
}

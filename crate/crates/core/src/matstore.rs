//! Matrix and vector containers.
//!
//! A [`PanelMatrix`] stores an `m x n` matrix as `ceil(m / PS)` horizontal
//! panels of `PS` rows. Inside a panel the elements are column-major with a
//! leading dimension of `PS`, and consecutive panels are `PS * cn` elements
//! apart, where `cn` (the panel length) is the number of columns allocated per
//! panel. Element `(i, j)` therefore lives at
//! `(i - i % PS) * cn + j * PS + i % PS`.
//!
//! Every panel matrix also carries an inverse-diagonal array of `min(m, n)`
//! entries which factorizations fill with the reciprocals of their pivots.

use std::fmt;
use std::io::{BufRead, Write};
use std::slice;

use crate::error::{Error, Result};

/// Rows per panel. Shared by every panel matrix in the library.
pub const PS: usize = 4;

/// Byte alignment of every matrix and vector allocation.
pub const ALIGN: usize = 64;

const ELEM: usize = std::mem::size_of::<f64>();
const LINE_ELEMS: usize = ALIGN / ELEM;

/// Linear index of element `(ai, aj)` in a panel-major buffer.
#[inline(always)]
pub const fn element_offset(ai: usize, aj: usize, ps: usize, sda: usize) -> usize {
    let air = ai & (ps - 1);
    (ai - air) * sda + aj * ps + air
}

/// Columns allocated per panel for a matrix with `n` columns.
#[inline]
pub const fn panel_length(n: usize) -> usize {
    n.div_ceil(PS) * PS
}

#[inline]
const fn round_up(x: usize, to: usize) -> usize {
    x.div_ceil(to) * to
}

fn data_len(m: usize, n: usize) -> usize {
    m.div_ceil(PS) * PS * panel_length(n)
}

/// Bytes needed by an `m x n` panel matrix: data, inverse diagonal, alignment padding.
pub fn memsize_panel_matrix(m: usize, n: usize) -> usize {
    round_up((data_len(m, n) + m.min(n)) * ELEM, ALIGN)
}

/// Bytes needed by a vector of length `m`.
pub fn memsize_vector(m: usize) -> usize {
    round_up(m * ELEM, ALIGN)
}

#[derive(Clone, Copy)]
#[repr(C, align(64))]
struct Line([f64; LINE_ELEMS]);

enum Storage<'a> {
    Owned(Vec<Line>),
    Borrowed(&'a mut [f64]),
}

impl Storage<'_> {
    fn owned(elems: usize) -> Storage<'static> {
        Storage::Owned(vec![Line([0.0; LINE_ELEMS]); elems.div_ceil(LINE_ELEMS)])
    }

    fn as_slice(&self) -> &[f64] {
        match self {
            // SAFETY: `Line` is `repr(C)` over `[f64; 8]` with no padding.
            Storage::Owned(v) => unsafe {
                slice::from_raw_parts(v.as_ptr() as *const f64, v.len() * LINE_ELEMS)
            },
            Storage::Borrowed(s) => s,
        }
    }

    fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            // SAFETY: see `as_slice`.
            Storage::Owned(v) => unsafe {
                slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f64, v.len() * LINE_ELEMS)
            },
            Storage::Borrowed(s) => s,
        }
    }
}

fn check_region(region: &[f64], need: usize) -> Result<()> {
    if !(region.as_ptr() as usize).is_multiple_of(ALIGN) && need > 0 {
        return Err(Error::Misaligned { align: ALIGN });
    }
    let got = std::mem::size_of_val(region);
    if got < need {
        return Err(Error::Undersized { need, got });
    }
    Ok(())
}

/// Matrix in panel-major format.
pub struct PanelMatrix<'a> {
    m: usize,
    n: usize,
    cn: usize,
    data_len: usize,
    storage: Storage<'a>,
    dinv_valid: bool,
}

impl PanelMatrix<'static> {
    /// Allocates a zero-filled `m x n` matrix.
    pub fn allocate(m: usize, n: usize) -> Self {
        let elems = memsize_panel_matrix(m, n) / ELEM;
        PanelMatrix {
            m,
            n,
            cn: panel_length(n),
            data_len: data_len(m, n),
            storage: Storage::owned(elems),
            dinv_valid: false,
        }
    }

    /// Builds a matrix from row-major nested data. Mostly useful in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut a = Self::allocate(m, n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                a.put(i, j, v);
            }
        }
        a
    }
}

impl<'a> PanelMatrix<'a> {
    /// Wraps an externally allocated region. The region is not touched, so any
    /// values already in it are reinterpreted as matrix elements.
    pub fn create(m: usize, n: usize, region: &'a mut [f64]) -> Result<Self> {
        check_region(region, memsize_panel_matrix(m, n))?;
        Ok(PanelMatrix {
            m,
            n,
            cn: panel_length(n),
            data_len: data_len(m, n),
            storage: Storage::Borrowed(region),
            dinv_valid: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// Columns allocated per panel (`sda`).
    pub fn panel_length(&self) -> usize {
        self.cn
    }

    pub fn panel_size(&self) -> usize {
        PS
    }

    pub fn memsize(&self) -> usize {
        memsize_panel_matrix(self.m, self.n)
    }

    /// The panel-major element buffer.
    pub fn data(&self) -> &[f64] {
        &self.storage.as_slice()[..self.data_len]
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.dinv_valid = false;
        let len = self.data_len;
        &mut self.storage.as_mut_slice()[..len]
    }

    /// Inverse-diagonal array left behind by the last factorization.
    pub fn diag_inv(&self) -> &[f64] {
        let k = self.m.min(self.n);
        &self.storage.as_slice()[self.data_len..self.data_len + k]
    }

    /// Whether `diag_inv` holds the reciprocals of the current diagonal.
    pub fn diag_inv_valid(&self) -> bool {
        self.dinv_valid
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.m || j >= self.n {
            return Err(Error::IndexOutOfBounds {
                i,
                j,
                m: self.m,
                n: self.n,
            });
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i, j)?;
        Ok(self.data()[element_offset(i, j, PS, self.cn)])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        self.check_index(i, j)?;
        let cn = self.cn;
        self.data_mut()[element_offset(i, j, PS, cn)] = v;
        Ok(())
    }

    /// Unchecked-result variant of [`get`](Self::get); panics out of bounds.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Panicking variant of [`set`](Self::set).
    pub fn put(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Sets every element, padding included, to zero.
    pub fn fill_zero(&mut self) {
        self.dinv_valid = false;
        self.storage.as_mut_slice().fill(0.0);
    }

    /// Read view with origin `(ai, aj)`.
    pub fn sub(&self, ai: usize, aj: usize) -> SubRef<'_> {
        let (data, dinv) = self.storage.as_slice().split_at(self.data_len);
        SubRef {
            data,
            dinv: &dinv[..self.m.min(self.n)],
            dinv_valid: self.dinv_valid,
            m: self.m,
            n: self.n,
            cn: self.cn,
            ai,
            aj,
        }
    }

    /// Write view with origin `(ai, aj)`. Taking one invalidates `diag_inv`.
    pub fn sub_mut(&mut self, ai: usize, aj: usize) -> SubMut<'_> {
        self.dinv_valid = false;
        let k = self.m.min(self.n);
        let (data, dinv) = self.storage.as_mut_slice().split_at_mut(self.data_len);
        SubMut {
            data,
            dinv: &mut dinv[..k],
            dinv_valid: &mut self.dinv_valid,
            m: self.m,
            n: self.n,
            cn: self.cn,
            ai,
            aj,
        }
    }

    /// Owned copy of the whole matrix (data and inverse diagonal).
    pub fn to_owned(&self) -> PanelMatrix<'static> {
        let mut out = PanelMatrix::allocate(self.m, self.n);
        let src = self.storage.as_slice();
        let len = self.data_len + self.m.min(self.n);
        out.storage.as_mut_slice()[..len].copy_from_slice(&src[..len]);
        out.dinv_valid = self.dinv_valid;
        out
    }

    /// Row-major nested copy of the logical matrix.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|i| (0..self.n).map(|j| self.at(i, j)).collect())
            .collect()
    }
}

impl fmt::Debug for PanelMatrix<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PanelMatrix")
            .field("rows", &self.m)
            .field("cols", &self.n)
            .field("panel_length", &self.cn)
            .field("values", &self.to_rows())
            .finish()
    }
}

/// Read-only view of a panel matrix anchored at `(ai, aj)`.
#[derive(Clone, Copy)]
pub struct SubRef<'a> {
    pub(crate) data: &'a [f64],
    pub(crate) dinv: &'a [f64],
    pub(crate) dinv_valid: bool,
    pub(crate) m: usize,
    pub(crate) n: usize,
    pub(crate) cn: usize,
    pub ai: usize,
    pub aj: usize,
}

impl<'a> SubRef<'a> {
    /// Element `(i, j)` relative to the view origin.
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let (r, c) = (self.ai + i, self.aj + j);
        if r >= self.m || c >= self.n {
            return Err(Error::IndexOutOfBounds {
                i: r,
                j: c,
                m: self.m,
                n: self.n,
            });
        }
        Ok(self.data[element_offset(r, c, PS, self.cn)])
    }

    /// Same matrix, origin moved by `(di, dj)`.
    pub fn offset(self, di: usize, dj: usize) -> SubRef<'a> {
        SubRef {
            ai: self.ai + di,
            aj: self.aj + dj,
            ..self
        }
    }

    pub fn matrix_rows(&self) -> usize {
        self.m
    }

    pub fn matrix_cols(&self) -> usize {
        self.n
    }

    pub(crate) fn check(&self, operand: &'static str, rows: usize, cols: usize) -> Result<()> {
        check_window(operand, self.m, self.n, self.ai, self.aj, rows, cols)
    }
}

/// Mutable view of a panel matrix anchored at `(ai, aj)`.
pub struct SubMut<'a> {
    pub(crate) data: &'a mut [f64],
    pub(crate) dinv: &'a mut [f64],
    pub(crate) dinv_valid: &'a mut bool,
    pub(crate) m: usize,
    pub(crate) n: usize,
    pub(crate) cn: usize,
    pub ai: usize,
    pub aj: usize,
}

impl<'a> SubMut<'a> {
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.as_ref().get(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let (r, c) = (self.ai + i, self.aj + j);
        if r >= self.m || c >= self.n {
            return Err(Error::IndexOutOfBounds {
                i: r,
                j: c,
                m: self.m,
                n: self.n,
            });
        }
        self.data[element_offset(r, c, PS, self.cn)] = v;
        Ok(())
    }

    pub fn as_ref(&self) -> SubRef<'_> {
        SubRef {
            data: self.data,
            dinv: self.dinv,
            dinv_valid: *self.dinv_valid,
            m: self.m,
            n: self.n,
            cn: self.cn,
            ai: self.ai,
            aj: self.aj,
        }
    }

    pub fn reborrow(&mut self) -> SubMut<'_> {
        SubMut {
            data: self.data,
            dinv: self.dinv,
            dinv_valid: self.dinv_valid,
            m: self.m,
            n: self.n,
            cn: self.cn,
            ai: self.ai,
            aj: self.aj,
        }
    }

    pub fn offset(self, di: usize, dj: usize) -> SubMut<'a> {
        SubMut {
            ai: self.ai + di,
            aj: self.aj + dj,
            ..self
        }
    }

    pub(crate) fn check(&self, operand: &'static str, rows: usize, cols: usize) -> Result<()> {
        check_window(operand, self.m, self.n, self.ai, self.aj, rows, cols)
    }
}

pub(crate) fn check_window(
    operand: &'static str,
    m: usize,
    n: usize,
    ai: usize,
    aj: usize,
    rows: usize,
    cols: usize,
) -> Result<()> {
    // Empty windows may sit anywhere up to the matrix edge.
    if ai + rows > m || aj + cols > n || (rows > 0 && cols > 0 && (ai >= m || aj >= n)) {
        return Err(Error::OutOfBounds {
            operand,
            ai,
            aj,
            rows,
            cols,
            m,
            n,
        });
    }
    Ok(())
}

/// Column-major matrix with leading dimension.
#[derive(Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    lda: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::with_lda(rows, cols, rows.max(1))
    }

    pub fn with_lda(rows: usize, cols: usize, lda: usize) -> Self {
        assert!(lda >= rows, "leading dimension {lda} < rows {rows}");
        ColMatrix {
            rows,
            cols,
            lda,
            data: vec![0.0; lda * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 1.0;
        }
        a
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut a = Self::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        a
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                a[(i, j)] = f(i, j);
            }
        }
        a
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lda(&self) -> usize {
        self.lda
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> ColMatrix {
        ColMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                s += self[(i, j)] * self[(i, j)];
            }
        }
        s.sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn dist_fro(&self, other: &ColMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut s = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let d = self[(i, j)] - other[(i, j)];
                s += d * d;
            }
        }
        s.sqrt()
    }

    /// Copy of the `rows x cols` block at `(ai, aj)`.
    pub fn block(&self, ai: usize, aj: usize, rows: usize, cols: usize) -> ColMatrix {
        ColMatrix::from_fn(rows, cols, |i, j| self[(ai + i, aj + j)])
    }

    pub(crate) fn check(
        &self,
        operand: &'static str,
        ai: usize,
        aj: usize,
        rows: usize,
        cols: usize,
    ) -> Result<()> {
        check_window(operand, self.rows, self.cols, ai, aj, rows, cols)
    }

    /// Parses the text fixture format: a `m n` header line followed by `m`
    /// rows of `n` space-separated decimals.
    pub fn read_fixture(reader: &mut impl BufRead) -> Result<ColMatrix> {
        let header = next_line(reader)?.ok_or_else(|| Error::Fixture("missing header".into()))?;
        let dims = parse_numbers::<usize>(&header)?;
        let [m, n] = dims[..] else {
            return Err(Error::Fixture(format!("bad header {header:?}")));
        };
        let mut a = ColMatrix::zeros(m, n);
        for i in 0..m {
            let line =
                next_line(reader)?.ok_or_else(|| Error::Fixture(format!("missing row {i}")))?;
            let vals = parse_numbers::<f64>(&line)?;
            if vals.len() != n {
                return Err(Error::Fixture(format!(
                    "row {i} has {} values, expected {n}",
                    vals.len()
                )));
            }
            for (j, v) in vals.into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        Ok(a)
    }

    /// Writes the text fixture format. Values use the shortest round-trip
    /// representation, so read-after-write is bit-exact.
    pub fn write_fixture(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:?}", self[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn next_line(reader: &mut impl BufRead) -> Result<Option<String>> {
    loop {
        let mut line = String::new();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::Fixture(e.to_string()))?;
        if read == 0 {
            return Ok(None);
        }
        if !line.trim().is_empty() {
            return Ok(Some(line));
        }
    }
}

fn parse_numbers<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Fixture(format!("cannot parse {t:?}")))
        })
        .collect()
}

impl std::ops::Index<(usize, usize)> for ColMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.lda]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ColMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.lda]
    }
}

impl fmt::Debug for ColMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ColMatrix {}x{} (lda {})",
            self.rows, self.cols, self.lda
        )?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:>12.5e}", self[(i, j)]))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Contiguous vector.
pub struct DenseVector<'a> {
    len: usize,
    storage: Storage<'a>,
}

impl DenseVector<'static> {
    pub fn allocate(len: usize) -> Self {
        DenseVector {
            len,
            storage: Storage::owned(memsize_vector(len) / ELEM),
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut x = Self::allocate(v.len());
        x.copy_from_slice(v);
        x
    }
}

impl<'a> DenseVector<'a> {
    pub fn create(len: usize, region: &'a mut [f64]) -> Result<Self> {
        check_region(region, memsize_vector(len))?;
        Ok(DenseVector {
            len,
            storage: Storage::Borrowed(region),
        })
    }

    pub fn memsize(&self) -> usize {
        memsize_vector(self.len)
    }
}

impl std::ops::Deref for DenseVector<'_> {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.storage.as_slice()[..self.len]
    }
}

impl std::ops::DerefMut for DenseVector<'_> {
    fn deref_mut(&mut self) -> &mut [f64] {
        let len = self.len;
        &mut self.storage.as_mut_slice()[..len]
    }
}

impl fmt::Debug for DenseVector<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

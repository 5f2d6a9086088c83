//! Unchecked panel-major windows shared by kernels and routines.
//!
//! Public entry points validate every window against its matrix before
//! building a [`Win`]; everything below that boundary trusts the indices.
//! Factorizations read and write disjoint windows of the same buffer, which is
//! why these are raw pointers rather than slices.

use crate::matstore::{element_offset, PanelMatrix, SubMut, SubRef, PS};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Win {
    ptr: *mut f64,
    len: usize,
    pub cn: usize,
    /// Absolute origin inside the matrix.
    pub i: usize,
    pub j: usize,
}

impl Win {
    pub fn from_ref(s: &SubRef<'_>) -> Win {
        Win {
            ptr: s.data.as_ptr() as *mut f64,
            len: s.data.len(),
            cn: s.cn,
            i: s.ai,
            j: s.aj,
        }
    }

    pub fn from_mut(s: &mut SubMut<'_>) -> Win {
        Win {
            ptr: s.data.as_mut_ptr(),
            len: s.data.len(),
            cn: s.cn,
            i: s.ai,
            j: s.aj,
        }
    }

    pub fn of(a: &mut PanelMatrix<'_>) -> Win {
        let mut s = a.sub_mut(0, 0);
        Win::from_mut(&mut s)
    }

    #[inline(always)]
    pub fn shift(self, di: usize, dj: usize) -> Win {
        Win {
            i: self.i + di,
            j: self.j + dj,
            ..self
        }
    }

    /// Row offset of the origin inside its panel.
    #[inline(always)]
    pub fn row_offset(&self) -> usize {
        self.i & (PS - 1)
    }

    #[inline(always)]
    pub fn aligned(&self) -> bool {
        self.row_offset() == 0
    }

    /// Distance between vertically adjacent panels.
    #[inline(always)]
    pub fn panel_stride(&self) -> usize {
        PS * self.cn
    }

    #[inline(always)]
    fn off(&self, r: usize, c: usize) -> usize {
        let o = element_offset(self.i + r, self.j + c, PS, self.cn);
        debug_assert!(o < self.len, "offset {o} outside buffer of {}", self.len);
        o
    }

    /// Pointer to element `(r, c)` relative to the origin. Only dereference
    /// when the element is inside the matrix.
    #[inline(always)]
    pub fn ptr(&self, r: usize, c: usize) -> *mut f64 {
        self.ptr
            .wrapping_add(element_offset(self.i + r, self.j + c, PS, self.cn))
    }

    /// Pointer to the top of the panel holding the origin row, at the origin column.
    #[inline(always)]
    pub fn panel_ptr(&self) -> *mut f64 {
        self.ptr.wrapping_add(element_offset(
            self.i - self.row_offset(),
            self.j,
            PS,
            self.cn,
        ))
    }

    #[inline(always)]
    pub unsafe fn at(&self, r: usize, c: usize) -> f64 {
        *self.ptr.add(self.off(r, c))
    }

    #[inline(always)]
    pub unsafe fn set(&self, r: usize, c: usize, v: f64) {
        *self.ptr.add(self.off(r, c)) = v;
    }
}

/// Owned panel matrix holding a copy of a window, with the copy's origin at
/// `(0, 0)`. Used when kernels need a panel-aligned operand.
pub(crate) struct Scratch {
    pub mat: PanelMatrix<'static>,
}

impl Scratch {
    pub unsafe fn copy_of(src: Win, rows: usize, cols: usize) -> Scratch {
        let mut mat = PanelMatrix::allocate(rows, cols);
        let dst = Win::of(&mut mat);
        copy_window(rows, cols, src, dst);
        Scratch { mat }
    }

    pub fn win(&mut self) -> Win {
        Win::of(&mut self.mat)
    }
}

/// Returns `w` if it is panel aligned, otherwise an aligned copy and its window.
pub(crate) unsafe fn aligned_operand(w: Win, rows: usize, cols: usize) -> (Win, Option<Scratch>) {
    if w.aligned() {
        (w, None)
    } else {
        let mut s = Scratch::copy_of(w, rows, cols);
        (s.win(), Some(s))
    }
}

pub(crate) unsafe fn copy_window(rows: usize, cols: usize, src: Win, dst: Win) {
    if src.row_offset() == dst.row_offset() {
        // Same phase: whole panel columns line up.
        for c in 0..cols {
            let mut r = 0;
            while r < rows {
                let run = (PS - (src.i + r) % PS).min(rows - r);
                std::ptr::copy(src.ptr(r, c), dst.ptr(r, c), run);
                r += run;
            }
        }
    } else {
        for c in 0..cols {
            for r in 0..rows {
                dst.set(r, c, src.at(r, c));
            }
        }
    }
}

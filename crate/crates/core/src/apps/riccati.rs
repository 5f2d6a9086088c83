//! Backward Riccati recursion for the linear-quadratic optimal control
//! problem with dynamics `x+ = A x + B u` and stage cost
//! `[u; x]^T [R S; S^T Q] [u; x]`.
//!
//! With `P_{n+1} = Lc Lc^T`, one step forms `C = [B^T; A^T] Lc` and factors
//!
//! ```text
//! [R S; S^T Q] + C C^T = [Lam 0; L Lc_n] [Lam 0; L Lc_n]^T
//! ```
//!
//! so that `P_n = Lc_n Lc_n^T
//!             = Q + A^T P A - (S^T + A^T P B)(R + B^T P B)^{-1}(S + B^T P A)`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::level3::{potrf_l, syrk_potrf_ln, trmm_rlnn};
use crate::matstore::{ColMatrix, PanelMatrix, SubMut, SubRef};
use crate::pack::{gecp, getr, pack_matrix};

/// Problem dimensions: states, controls, horizon length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OcpDims {
    pub nx: usize,
    pub nu: usize,
    pub horizon: usize,
}

impl OcpDims {
    pub fn new(nx: usize, nu: usize, horizon: usize) -> Result<OcpDims> {
        if nx == 0 || horizon == 0 {
            return Err(Error::Dimension(format!(
                "need nx >= 1 and N >= 1, got nx={nx} N={horizon}"
            )));
        }
        Ok(OcpDims { nx, nu, horizon })
    }

    /// Order of the stacked stage factor, `nu + nx`.
    pub fn stacked(&self) -> usize {
        self.nu + self.nx
    }
}

/// Data of one stage: `A` `nx x nx`, `B` `nx x nu`, `Q` `nx x nx`,
/// `R` `nu x nu`, `S` `nu x nx`. Only the lower triangles of `Q` and `R`
/// are read.
pub struct StageData {
    pub a: PanelMatrix<'static>,
    pub b: PanelMatrix<'static>,
    pub q: PanelMatrix<'static>,
    pub r: PanelMatrix<'static>,
    pub s: PanelMatrix<'static>,
}

impl StageData {
    pub fn from_col(
        a: &ColMatrix,
        b: &ColMatrix,
        q: &ColMatrix,
        r: &ColMatrix,
        s: &ColMatrix,
    ) -> Result<StageData> {
        let (nx, nu) = (a.rows(), b.cols());
        let shapes = [
            ("A", a, nx, nx),
            ("B", b, nx, nu),
            ("Q", q, nx, nx),
            ("R", r, nu, nu),
            ("S", s, nu, nx),
        ];
        for (name, m, rows, cols) in shapes {
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(StageData {
            a: PanelMatrix::from_col(a),
            b: PanelMatrix::from_col(b),
            q: PanelMatrix::from_col(q),
            r: PanelMatrix::from_col(r),
            s: PanelMatrix::from_col(s),
        })
    }

    fn check(&self, dims: &OcpDims) -> Result<()> {
        let (nx, nu) = (dims.nx, dims.nu);
        let shapes = [
            ("A", &self.a, nx, nx),
            ("B", &self.b, nx, nu),
            ("Q", &self.q, nx, nx),
            ("R", &self.r, nu, nu),
            ("S", &self.s, nu, nx),
        ];
        for (name, m, rows, cols) in shapes {
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(())
    }
}

/// Scratch buffers for one step: the stacked `[B^T; A^T]`, its product
/// with the next factor, and the stacked cost `[R S; S^T Q]`.
pub struct RiccatiWorkspace {
    dims: OcpDims,
    bat: PanelMatrix<'static>,
    c: PanelMatrix<'static>,
    rsq: PanelMatrix<'static>,
}

impl RiccatiWorkspace {
    pub fn new(dims: OcpDims) -> RiccatiWorkspace {
        let (nx, ns) = (dims.nx, dims.stacked());
        RiccatiWorkspace {
            dims,
            bat: PanelMatrix::allocate(ns, nx),
            c: PanelMatrix::allocate(ns, nx),
            rsq: PanelMatrix::allocate(ns, ns),
        }
    }

    pub fn dims(&self) -> OcpDims {
        self.dims
    }
}

/// One backward step. `l_next` is the `nx x nx` lower Cholesky factor of
/// `P_{n+1}`; `out` receives the `(nu + nx)` square stacked factor
/// `[Lam 0; L Lc_n]` in its lower triangle, with `Lc_n` at `(nu, nu)`.
pub fn riccati_factor_step(
    ws: &mut RiccatiWorkspace,
    stage: &StageData,
    l_next: SubRef<'_>,
    out: SubMut<'_>,
) -> Result<()> {
    let OcpDims { nx, nu, .. } = ws.dims;
    let ns = nu + nx;
    stage.check(&ws.dims)?;
    getr(nx, nu, stage.b.sub(0, 0), ws.bat.sub_mut(0, 0))?;
    getr(nx, nx, stage.a.sub(0, 0), ws.bat.sub_mut(nu, 0))?;
    trmm_rlnn(
        ns,
        nx,
        1.0,
        l_next,
        Some(ws.bat.sub(0, 0)),
        ws.c.sub_mut(0, 0),
    )?;

    gecp(nu, nu, stage.r.sub(0, 0), ws.rsq.sub_mut(0, 0))?;
    getr(nu, nx, stage.s.sub(0, 0), ws.rsq.sub_mut(nu, 0))?;
    gecp(nx, nx, stage.q.sub(0, 0), ws.rsq.sub_mut(nu, nu))?;

    let c = ws.c.sub(0, 0);
    syrk_potrf_ln(ns, nx, c, c, Some(ws.rsq.sub(0, 0)), out)
}

/// Factors of a full backward sweep: `stage(n)` for `n < N` and the
/// terminal factor of `P_N`.
pub struct RiccatiFactors {
    pub dims: OcpDims,
    pub stages: Vec<PanelMatrix<'static>>,
    pub terminal: PanelMatrix<'static>,
}

impl RiccatiFactors {
    /// Window of `Lc_n` (lower triangular, `nx x nx`); `n = N` gives the
    /// terminal factor.
    pub fn lcal(&self, n: usize) -> SubRef<'_> {
        if n == self.dims.horizon {
            self.terminal.sub(0, 0)
        } else {
            self.stages[n].sub(self.dims.nu, self.dims.nu)
        }
    }

    /// `P_n = Lc_n Lc_n^T` in column-major form.
    pub fn cost_to_go(&self, n: usize) -> Result<ColMatrix> {
        let nx = self.dims.nx;
        let l = self.lcal(n);
        let mut lm = ColMatrix::zeros(nx, nx);
        for j in 0..nx {
            for i in j..nx {
                lm[(i, j)] = l.get(i, j)?;
            }
        }
        Ok(ColMatrix::from_fn(nx, nx, |i, j| {
            let mut s = 0.0;
            for p in 0..=i.min(j) {
                s += lm[(i, p)] * lm[(j, p)];
            }
            s
        }))
    }
}

/// Runs the recursion backward from `P_N` over all stages. A failing
/// Cholesky is reported with the stage index (`N` for the terminal cost).
pub fn riccati_factorize(
    dims: OcpDims,
    stages: &[StageData],
    p_n: SubRef<'_>,
) -> Result<RiccatiFactors> {
    if stages.len() != dims.horizon {
        return Err(Error::Dimension(format!(
            "{} stages for horizon {}",
            stages.len(),
            dims.horizon
        )));
    }
    let (nx, ns) = (dims.nx, dims.stacked());
    let mut terminal = PanelMatrix::allocate(nx, nx);
    potrf_l(nx, Some(p_n), terminal.sub_mut(0, 0)).map_err(|e| e.at_stage(dims.horizon))?;
    let mut ws = RiccatiWorkspace::new(dims);
    let mut out: Vec<PanelMatrix<'static>> = (0..dims.horizon)
        .map(|_| PanelMatrix::allocate(ns, ns))
        .collect();
    for n in (0..dims.horizon).rev() {
        let (head, tail) = out.split_at_mut(n + 1);
        let l_next = match tail.first() {
            Some(next) => next.sub(dims.nu, dims.nu),
            None => terminal.sub(0, 0),
        };
        riccati_factor_step(&mut ws, &stages[n], l_next, head[n].sub_mut(0, 0))
            .map_err(|e| e.at_stage(n))?;
    }
    Ok(RiccatiFactors {
        dims,
        stages: out,
        terminal,
    })
}

/// Reads a problem file: a `nx nu N` header, then `A B Q R S` for each
/// stage and finally `P_N`, each in the matrix fixture format.
pub fn read_problem(
    reader: &mut impl BufRead,
) -> Result<(OcpDims, Vec<StageData>, PanelMatrix<'static>)> {
    let mut header = String::new();
    while header.trim().is_empty() {
        header.clear();
        let read = reader
            .read_line(&mut header)
            .map_err(|e| Error::Fixture(e.to_string()))?;
        if read == 0 {
            return Err(Error::Fixture("missing problem header".into()));
        }
    }
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Fixture(format!("bad header field {t:?}")))
        })
        .collect::<Result<_>>()?;
    let [nx, nu, horizon] = nums[..] else {
        return Err(Error::Fixture(format!(
            "header needs `nx nu N`, got {:?}",
            header.trim()
        )));
    };
    let dims = OcpDims::new(nx, nu, horizon)?;
    let mut stages = Vec::with_capacity(horizon);
    for n in 0..horizon {
        let mut mats = Vec::with_capacity(5);
        for _ in 0..5 {
            mats.push(ColMatrix::read_fixture(reader).map_err(|e| e.at_stage(n))?);
        }
        let stage = StageData::from_col(&mats[0], &mats[1], &mats[2], &mats[3], &mats[4])
            .map_err(|e| e.at_stage(n))?;
        stage.check(&dims).map_err(|e| e.at_stage(n))?;
        stages.push(stage);
    }
    let p = ColMatrix::read_fixture(reader)?;
    if p.rows() != nx || p.cols() != nx {
        return Err(Error::Fixture(format!(
            "P_N is {}x{}, expected {nx}x{nx}",
            p.rows(),
            p.cols()
        )));
    }
    let mut pn = PanelMatrix::allocate(nx, nx);
    pack_matrix(nx, nx, &p, 0, 0, pn.sub_mut(0, 0))?;
    Ok((dims, stages, pn))
}

/// Inverse of [`read_problem`].
pub fn write_problem(
    w: &mut impl Write,
    dims: OcpDims,
    stages: &[StageData],
    p_n: &PanelMatrix<'_>,
) -> std::io::Result<()> {
    writeln!(w, "{} {} {}", dims.nx, dims.nu, dims.horizon)?;
    for s in stages {
        for m in [&s.a, &s.b, &s.q, &s.r, &s.s] {
            m.to_col().write_fixture(w)?;
        }
    }
    p_n.to_col().write_fixture(w)
}

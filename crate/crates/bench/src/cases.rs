//! Benchmark workloads: operands built once per size, a timed call, and the
//! oracle answer used by the correctness gate.

use panelblas::apps::{riccati_factorize, OcpDims, RiccatiFactors, StageData};
use panelblas::level3::{self, gelqf_worksize};
use panelblas::ref_impl::{
    self, oracle_gelqf, oracle_gemm, oracle_getrf, oracle_potrf, oracle_syrk, oracle_trmm,
    oracle_trsm, Side, Uplo,
};
use panelblas::{ColMatrix, DenseVector, PanelMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{BenchError, Impl, Routine};

/// A prepared call. `run` is what gets timed; `output` extracts the result
/// compared against `expected` by the gate.
pub trait Workload {
    fn run(&mut self) -> Result<(), BenchError>;
    fn output(&self) -> ColMatrix;
}

type RunFn<S> = Box<dyn Fn(&mut S) -> panelblas::Result<()>>;
type OutFn<S> = Box<dyn Fn(&S) -> ColMatrix>;

struct Work<S> {
    state: S,
    run: RunFn<S>,
    out: OutFn<S>,
}

impl<S> Workload for Work<S> {
    fn run(&mut self) -> Result<(), BenchError> {
        (self.run)(&mut self.state).map_err(BenchError::Lib)
    }

    fn output(&self) -> ColMatrix {
        (self.out)(&self.state)
    }
}

fn work<S: 'static>(
    state: S,
    run: impl Fn(&mut S) -> panelblas::Result<()> + 'static,
    out: impl Fn(&S) -> ColMatrix + 'static,
) -> Box<dyn Workload> {
    Box::new(Work {
        state,
        run: Box::new(run),
        out: Box::new(out),
    })
}

pub struct Case {
    pub workload: Box<dyn Workload>,
    pub expected: ColMatrix,
    /// Column-major inputs, for `--dump`.
    pub inputs: Vec<(&'static str, ColMatrix)>,
    /// `(m, n, k)` recorded for this size.
    pub dims: (usize, usize, usize),
}

/// Operand generator for one size. Depends only on `(seed, size)`.
pub fn operand_rng(seed: u64, size: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (size as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn rand_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ColMatrix {
    ColMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> ColMatrix {
    let g = rand_mat(rng, n, n);
    let mut c = oracle_gemm(1.0, &g, &g.transpose(), 0.0, None).expect("square");
    for i in 0..n {
        c[(i, i)] += n as f64;
    }
    c
}

fn well_lower(rng: &mut ChaCha8Rng, n: usize) -> ColMatrix {
    ColMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => rng.gen_range(1.0..2.0),
        std::cmp::Ordering::Greater => rng.gen_range(-1.0..1.0) / n as f64,
        std::cmp::Ordering::Less => 0.0,
    })
}

fn lower_of(p: &PanelMatrix<'_>, m: usize) -> ColMatrix {
    ColMatrix::from_fn(m, m, |i, j| if i >= j { p.at(i, j) } else { 0.0 })
}

fn lower_col(a: &ColMatrix) -> ColMatrix {
    ref_impl::lower(a)
}

struct Hp {
    a: PanelMatrix<'static>,
    b: PanelMatrix<'static>,
    c: PanelMatrix<'static>,
    d: PanelMatrix<'static>,
    ipiv: Vec<usize>,
    work: DenseVector<'static>,
}

impl Hp {
    fn new(a: &ColMatrix, b: &ColMatrix, c: &ColMatrix, d: (usize, usize)) -> Hp {
        Hp {
            a: PanelMatrix::from_col(a),
            b: PanelMatrix::from_col(b),
            c: PanelMatrix::from_col(c),
            d: PanelMatrix::allocate(d.0, d.1),
            ipiv: Vec::new(),
            work: DenseVector::allocate(0),
        }
    }
}

struct Col {
    a: ColMatrix,
    b: ColMatrix,
    c: ColMatrix,
    d: ColMatrix,
}

/// Dense evaluation of one Riccati step,
/// `Q + A^T P A - (S^T + A^T P B)(R + B^T P B)^{-1}(S + B^T P A)`.
pub fn dense_riccati_step(
    a: &ColMatrix,
    b: &ColMatrix,
    q: &ColMatrix,
    r: &ColMatrix,
    s: &ColMatrix,
    p: &ColMatrix,
) -> panelblas::Result<ColMatrix> {
    let mm = |x: &ColMatrix, y: &ColMatrix| oracle_gemm(1.0, x, y, 0.0, None);
    let (at, bt) = (a.transpose(), b.transpose());
    let atpa = mm(&mm(&at, p)?, a)?;
    let gram = oracle_gemm(1.0, &mm(&bt, p)?, b, 1.0, Some(r))?;
    let cross = oracle_gemm(1.0, &mm(&bt, p)?, a, 1.0, Some(s))?;
    let lg = oracle_potrf(&gram)?;
    let y = oracle_trsm(Side::Left, Uplo::Lower, false, false, 1.0, &lg, &cross)?;
    let z = oracle_trsm(Side::Left, Uplo::Lower, true, false, 1.0, &lg, &y)?;
    let base = oracle_gemm(1.0, q, &ColMatrix::identity(q.rows()), 1.0, Some(&atpa))?;
    oracle_gemm(-1.0, &cross.transpose(), &z, 1.0, Some(&base))
}

/// Riccati benchmark problem for size `s`: `nx = s`, `nu = max(1, s / 2)`,
/// horizon 10.
pub const RICCATI_HORIZON: usize = 10;

pub fn riccati_dims(s: usize) -> (usize, usize, usize) {
    (s, (s / 2).max(1), RICCATI_HORIZON)
}

struct RiccatiRaw {
    stages: Vec<[ColMatrix; 5]>,
    pn: ColMatrix,
}

fn riccati_problem(rng: &mut ChaCha8Rng, nx: usize, nu: usize, horizon: usize) -> RiccatiRaw {
    let stages = (0..horizon)
        .map(|_| {
            let a = ColMatrix::from_fn(nx, nx, |i, j| {
                let v: f64 = rng.gen_range(-0.3..0.3);
                if i == j {
                    0.9 + v
                } else {
                    v / nx as f64
                }
            });
            let b = rand_mat(rng, nx, nu);
            let q = spd(rng, nx);
            let r = spd(rng, nu);
            let s = ColMatrix::from_fn(nu, nx, |_, _| rng.gen_range(-0.1..0.1));
            [a, b, q, r, s]
        })
        .collect();
    RiccatiRaw {
        stages,
        pn: spd(rng, nx),
    }
}

fn to_stages(raw: &RiccatiRaw) -> panelblas::Result<Vec<StageData>> {
    raw.stages
        .iter()
        .map(|m| StageData::from_col(&m[0], &m[1], &m[2], &m[3], &m[4]))
        .collect()
}

/// Builds the workload for `routine` / `imp` at size `s`. Unsupported pairs
/// are rejected before any operand is generated.
pub fn build_case(routine: Routine, imp: Impl, s: usize, seed: u64) -> Result<Case, BenchError> {
    if !routine.supports(imp) {
        return Err(BenchError::Unsupported { routine, imp });
    }
    let mut rng = operand_rng(seed, s);
    let square = (s, s, s);
    let case = match routine {
        Routine::GemmNt | Routine::GemmNn => {
            let a = rand_mat(&mut rng, s, s);
            let b = rand_mat(&mut rng, s, s);
            let c = rand_mat(&mut rng, s, s);
            let nt = routine == Routine::GemmNt;
            let expected = if nt {
                oracle_gemm(1.0, &a, &b.transpose(), 1.0, Some(&c))?
            } else {
                oracle_gemm(1.0, &a, &b, 1.0, Some(&c))?
            };
            let inputs = vec![("A", a.clone()), ("B", b.clone()), ("C", c.clone())];
            let workload = match imp {
                Impl::Hp => work(
                    Hp::new(&a, &b, &c, (s, s)),
                    move |h| {
                        let (a, b, c, d) = (
                            h.a.sub(0, 0),
                            h.b.sub(0, 0),
                            Some(h.c.sub(0, 0)),
                            h.d.sub_mut(0, 0),
                        );
                        if nt {
                            level3::gemm_nt(s, s, s, 1.0, a, b, 1.0, c, d)
                        } else {
                            level3::gemm_nn(s, s, s, 1.0, a, b, 1.0, c, d)
                        }
                    },
                    |h| h.d.to_col(),
                ),
                Impl::Rf => work(
                    Col {
                        a,
                        b,
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    move |x| {
                        let ld = s.max(1);
                        let f = if nt {
                            ref_impl::rf_gemm_nt
                        } else {
                            ref_impl::rf_gemm_nn
                        };
                        f(
                            s,
                            s,
                            s,
                            1.0,
                            x.a.data(),
                            ld,
                            x.b.data(),
                            ld,
                            1.0,
                            Some((x.c.data(), ld)),
                            x.d.data_mut(),
                            ld,
                        )
                    },
                    |x| x.d.clone(),
                ),
                Impl::Naive => work(
                    Col {
                        a,
                        b,
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    move |x| {
                        x.d = if nt {
                            oracle_gemm(1.0, &x.a, &x.b.transpose(), 1.0, Some(&x.c))?
                        } else {
                            oracle_gemm(1.0, &x.a, &x.b, 1.0, Some(&x.c))?
                        };
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::SyrkLn => {
            let a = rand_mat(&mut rng, s, s);
            let c = rand_mat(&mut rng, s, s);
            let expected = oracle_syrk(1.0, &a, &a, 1.0, Some(&c))?;
            let inputs = vec![("A", a.clone()), ("C", c.clone())];
            let workload = match imp {
                Impl::Hp => work(
                    Hp::new(&a, &a, &c, (s, s)),
                    move |h| {
                        level3::syrk_ln(
                            s,
                            s,
                            1.0,
                            h.a.sub(0, 0),
                            h.a.sub(0, 0),
                            1.0,
                            Some(h.c.sub(0, 0)),
                            h.d.sub_mut(0, 0),
                        )
                    },
                    move |h| lower_of(&h.d, s),
                ),
                _ => work(
                    Col {
                        a,
                        b: ColMatrix::zeros(0, 0),
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_syrk(1.0, &x.a, &x.a, 1.0, Some(&x.c))?;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::TrmmRlnn => {
            let a = rand_mat(&mut rng, s, s);
            let b = rand_mat(&mut rng, s, s);
            let expected = oracle_trmm(1.0, &b, &a)?;
            let inputs = vec![("A", a.clone()), ("B", b.clone())];
            let workload = match imp {
                Impl::Hp => work(
                    Hp::new(&a, &b, &ColMatrix::zeros(0, 0), (s, s)),
                    move |h| {
                        level3::trmm_rlnn(
                            s,
                            s,
                            1.0,
                            h.a.sub(0, 0),
                            Some(h.b.sub(0, 0)),
                            h.d.sub_mut(0, 0),
                        )
                    },
                    |h| h.d.to_col(),
                ),
                _ => work(
                    Col {
                        a,
                        b,
                        c: ColMatrix::zeros(0, 0),
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_trmm(1.0, &x.b, &x.a)?;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: (s, s, s),
            }
        }
        Routine::TrsmRltn => {
            let a = well_lower(&mut rng, s);
            let b = rand_mat(&mut rng, s, s);
            let expected = oracle_trsm(Side::Right, Uplo::Lower, true, false, 1.0, &a, &b)?;
            let inputs = vec![("A", a.clone()), ("B", b.clone())];
            let workload = match imp {
                Impl::Hp => work(
                    Hp::new(&a, &b, &ColMatrix::zeros(0, 0), (s, s)),
                    move |h| {
                        level3::trsm_rltn(
                            s,
                            s,
                            1.0,
                            h.a.sub(0, 0),
                            Some(h.b.sub(0, 0)),
                            h.d.sub_mut(0, 0),
                        )
                    },
                    |h| h.d.to_col(),
                ),
                _ => work(
                    Col {
                        a,
                        b,
                        c: ColMatrix::zeros(0, 0),
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_trsm(Side::Right, Uplo::Lower, true, false, 1.0, &x.a, &x.b)?;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::PotrfL => {
            let c = spd(&mut rng, s);
            let expected = oracle_potrf(&c)?;
            let inputs = vec![("C", c.clone())];
            let workload = match imp {
                Impl::Hp => work(
                    Hp::new(&ColMatrix::zeros(0, 0), &ColMatrix::zeros(0, 0), &c, (s, s)),
                    move |h| level3::potrf_l(s, Some(h.c.sub(0, 0)), h.d.sub_mut(0, 0)),
                    move |h| lower_of(&h.d, s),
                ),
                Impl::Rf => work(
                    Col {
                        a: ColMatrix::zeros(0, 0),
                        b: ColMatrix::zeros(0, 0),
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    move |x| {
                        let ld = s.max(1);
                        ref_impl::rf_potrf_l(s, Some((x.c.data(), ld)), x.d.data_mut(), ld)
                            .map(|_| ())
                    },
                    |x| lower_col(&x.d),
                ),
                Impl::Naive => work(
                    Col {
                        a: ColMatrix::zeros(0, 0),
                        b: ColMatrix::zeros(0, 0),
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_potrf(&x.c)?;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::SyrkPotrfLn => {
            let a = rand_mat(&mut rng, s, s);
            let c = spd(&mut rng, s);
            let sum = oracle_syrk(1.0, &a, &a, 1.0, Some(&c))?;
            let sym =
                ColMatrix::from_fn(s, s, |i, j| if i >= j { sum[(i, j)] } else { sum[(j, i)] });
            let expected = oracle_potrf(&sym)?;
            let inputs = vec![("A", a.clone()), ("C", c.clone())];
            let workload = work(
                Hp::new(&a, &a, &c, (s, s)),
                move |h| {
                    level3::syrk_potrf_ln(
                        s,
                        s,
                        h.a.sub(0, 0),
                        h.a.sub(0, 0),
                        Some(h.c.sub(0, 0)),
                        h.d.sub_mut(0, 0),
                    )
                },
                move |h| lower_of(&h.d, s),
            );
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::GetrfPivot => {
            let c = rand_mat(&mut rng, s, s);
            let (expected, _) = oracle_getrf(&c)?;
            let inputs = vec![("C", c.clone())];
            let workload = match imp {
                Impl::Hp => {
                    let mut h =
                        Hp::new(&ColMatrix::zeros(0, 0), &ColMatrix::zeros(0, 0), &c, (s, s));
                    h.ipiv = vec![0; s];
                    work(
                        h,
                        move |h| {
                            level3::getrf_pivot(
                                s,
                                s,
                                Some(h.c.sub(0, 0)),
                                h.d.sub_mut(0, 0),
                                &mut h.ipiv,
                            )
                        },
                        |h| h.d.to_col(),
                    )
                }
                _ => work(
                    Col {
                        a: ColMatrix::zeros(0, 0),
                        b: ColMatrix::zeros(0, 0),
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_getrf(&x.c)?.0;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::Gelqf => {
            let c = rand_mat(&mut rng, s, s);
            let (expected, _) = oracle_gelqf(&c)?;
            let inputs = vec![("C", c.clone())];
            let workload = match imp {
                Impl::Hp => {
                    let mut h =
                        Hp::new(&ColMatrix::zeros(0, 0), &ColMatrix::zeros(0, 0), &c, (s, s));
                    h.work = DenseVector::allocate(gelqf_worksize(s, s) / 8);
                    work(
                        h,
                        move |h| {
                            level3::gelqf(
                                s,
                                s,
                                Some(h.c.sub(0, 0)),
                                h.d.sub_mut(0, 0),
                                &mut h.work[..],
                            )
                        },
                        move |h| lower_of(&h.d, s),
                    )
                }
                _ => work(
                    Col {
                        a: ColMatrix::zeros(0, 0),
                        b: ColMatrix::zeros(0, 0),
                        c,
                        d: ColMatrix::zeros(s, s),
                    },
                    |x| {
                        x.d = oracle_gelqf(&x.c)?.0;
                        Ok(())
                    },
                    |x| x.d.clone(),
                ),
            };
            Case {
                workload,
                expected,
                inputs,
                dims: square,
            }
        }
        Routine::Riccati | Routine::RiccatiConv => {
            let (nx, nu, horizon) = riccati_dims(s);
            let raw = riccati_problem(&mut rng, nx, nu, horizon);
            let mut p = raw.pn.clone();
            for m in raw.stages.iter().rev() {
                p = dense_riccati_step(&m[0], &m[1], &m[2], &m[3], &m[4], &p)?;
            }
            let expected = p;
            let mut inputs = Vec::new();
            for m in &raw.stages {
                for (name, x) in ["A", "B", "Q", "R", "S"].into_iter().zip(m.iter()) {
                    inputs.push((name, x.clone()));
                }
            }
            inputs.push(("P_N", raw.pn.clone()));
            let dims = OcpDims::new(nx, nu, horizon)?;
            struct Ric {
                raw: RiccatiRaw,
                stages: Vec<StageData>,
                pn: PanelMatrix<'static>,
                out: Option<RiccatiFactors>,
            }
            let state = Ric {
                stages: to_stages(&raw)?,
                pn: PanelMatrix::from_col(&raw.pn),
                raw,
                out: None,
            };
            let convert = routine == Routine::RiccatiConv;
            let workload = work(
                state,
                move |r| {
                    if convert {
                        r.stages = to_stages(&r.raw)?;
                        r.pn = PanelMatrix::from_col(&r.raw.pn);
                    }
                    r.out = Some(riccati_factorize(dims, &r.stages, r.pn.sub(0, 0))?);
                    Ok(())
                },
                move |r| match &r.out {
                    Some(f) => f.cost_to_go(0).unwrap_or_else(|_| ColMatrix::zeros(0, 0)),
                    None => ColMatrix::zeros(0, 0),
                },
            );
            Case {
                workload,
                expected,
                inputs,
                dims: (nx, nu, horizon),
            }
        }
    };
    Ok(case)
}

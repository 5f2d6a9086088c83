//! Size-sweep benchmarks for the panelblas routines, with a correctness gate
//! against the dense oracles before any timing.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use panelblas::ColMatrix;

pub mod cases;

pub use cases::{build_case, Case};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(
        "{routine} has no '{imp}' implementation; valid pairs: {}",
        valid_pairs()
    )]
    Unsupported { routine: Routine, imp: Impl },

    #[error("unknown routine '{0}'; valid routines: {names}", names = Routine::ALL.map(|r| r.name()).join(", "))]
    UnknownRoutine(String),

    #[error("unknown implementation '{0}'; expected hp, rf or naive")]
    UnknownImpl(String),

    #[error("invalid size range: {0}")]
    Range(String),

    #[error("correctness gate failed for {routine}/{imp} at size {size}: relative error {err:e} > {tol:e}")]
    Gate {
        routine: Routine,
        imp: Impl,
        size: usize,
        err: f64,
        tol: f64,
    },

    #[error(transparent)]
    Lib(#[from] panelblas::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Usage errors exit with status 2, everything else with 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            BenchError::Unsupported { .. }
                | BenchError::UnknownRoutine(_)
                | BenchError::UnknownImpl(_)
                | BenchError::Range(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Impl {
    Hp,
    Rf,
    Naive,
}

impl Impl {
    pub const ALL: [Impl; 3] = [Impl::Hp, Impl::Rf, Impl::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Impl::Hp => "hp",
            Impl::Rf => "rf",
            Impl::Naive => "naive",
        }
    }
}

impl fmt::Display for Impl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Impl {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Impl, BenchError> {
        Impl::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| BenchError::UnknownImpl(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Routine {
    GemmNt,
    GemmNn,
    SyrkLn,
    TrmmRlnn,
    TrsmRltn,
    PotrfL,
    SyrkPotrfLn,
    GetrfPivot,
    Gelqf,
    /// Riccati recursion on panel-major stage data.
    Riccati,
    /// Same, including conversion of column-major stage data on every call.
    RiccatiConv,
}

impl Routine {
    pub const ALL: [Routine; 11] = [
        Routine::GemmNt,
        Routine::GemmNn,
        Routine::SyrkLn,
        Routine::TrmmRlnn,
        Routine::TrsmRltn,
        Routine::PotrfL,
        Routine::SyrkPotrfLn,
        Routine::GetrfPivot,
        Routine::Gelqf,
        Routine::Riccati,
        Routine::RiccatiConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Routine::GemmNt => "gemm_nt",
            Routine::GemmNn => "gemm_nn",
            Routine::SyrkLn => "syrk_ln",
            Routine::TrmmRlnn => "trmm_rlnn",
            Routine::TrsmRltn => "trsm_rltn",
            Routine::PotrfL => "potrf_l",
            Routine::SyrkPotrfLn => "syrk_potrf_ln",
            Routine::GetrfPivot => "getrf_pivot",
            Routine::Gelqf => "gelqf",
            Routine::Riccati => "riccati",
            Routine::RiccatiConv => "riccati_conv",
        }
    }

    pub fn supports(self, imp: Impl) -> bool {
        match imp {
            Impl::Hp => true,
            Impl::Rf => matches!(self, Routine::GemmNt | Routine::GemmNn | Routine::PotrfL),
            Impl::Naive => !matches!(
                self,
                Routine::SyrkPotrfLn | Routine::Riccati | Routine::RiccatiConv
            ),
        }
    }
}

impl fmt::Display for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Routine {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Routine, BenchError> {
        Routine::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| BenchError::UnknownRoutine(s.to_string()))
    }
}

/// Every supported `routine/impl` pair, comma separated.
pub fn valid_pairs() -> String {
    let mut out = Vec::new();
    for r in Routine::ALL {
        for i in Impl::ALL {
            if r.supports(i) {
                out.push(format!("{r}/{i}"));
            }
        }
    }
    out.join(", ")
}

/// Floating-point operation count for one call with the recorded `(m, n, k)`.
///
/// gemm `2mnk`, syrk `m(m+1)k`, trsm/trmm `m*n*n` (triangle on the right),
/// potrf `m^3/3`, getrf `2m^3/3`, gelqf `2m^2 n - 2m^3/3`. For the Riccati
/// routines `m = nx`, `n = nu`, `k` is the horizon and each stage costs one
/// trmm plus one fused syrk and Cholesky on the `(nu + nx)`-row stack.
pub fn flop_count(routine: Routine, m: usize, n: usize, k: usize) -> f64 {
    let (m, n, k) = (m as f64, n as f64, k as f64);
    match routine {
        Routine::GemmNt | Routine::GemmNn => 2.0 * m * n * k,
        Routine::SyrkLn => m * (m + 1.0) * k,
        Routine::TrmmRlnn | Routine::TrsmRltn => m * n * n,
        Routine::PotrfL => m * m * m / 3.0,
        Routine::SyrkPotrfLn => m * (m + 1.0) * k + m * m * m / 3.0,
        Routine::GetrfPivot => 2.0 * m * m * m / 3.0,
        Routine::Gelqf => 2.0 * m * m * n - 2.0 * m * m * m / 3.0,
        Routine::Riccati | Routine::RiccatiConv => {
            let ns = n + m;
            k * (ns * m * m + ns * (ns + 1.0) * m + ns * ns * ns / 3.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub routine: Routine,
    pub imp: Impl,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    /// Median seconds per call.
    pub seconds: f64,
    pub gflops: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Shortest wall time of one timed repetition; short calls are batched
    /// until a repetition takes at least this long.
    pub min_rep_seconds: f64,
    /// Writes the operands of every size into this directory.
    pub dump: Option<std::path::PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: size_range(4, 300, 4).expect("default range"),
            reps: 10,
            warmup: 2,
            seed: 0,
            min_rep_seconds: 2e-5,
            dump: None,
        }
    }
}

pub fn size_range(min: usize, max: usize, step: usize) -> Result<Vec<usize>, BenchError> {
    if min == 0 || step == 0 || min > max {
        return Err(BenchError::Range(format!(
            "min {min}, max {max}, step {step}"
        )));
    }
    Ok((min..=max).step_by(step).collect())
}

/// Relative tolerance of the correctness gate.
pub const GATE_TOL: f64 = 1e-10;

fn rel(got: &ColMatrix, want: &ColMatrix) -> f64 {
    if got.rows() != want.rows() || got.cols() != want.cols() {
        return f64::INFINITY;
    }
    let err = got.dist_fro(want);
    if err.is_nan() {
        return f64::INFINITY;
    }
    err / want.norm_fro().max(1.0)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn dump_case(
    dir: &Path,
    routine: Routine,
    imp: Impl,
    size: usize,
    case: &Case,
) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{routine}_{imp}_{size}.txt"));
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (name, m) in &case.inputs {
        writeln!(w, "# {name}")?;
        m.write_fixture(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the gate once, then times `cfg.reps` repetitions at every size.
pub fn run_sweep(
    routine: Routine,
    imp: Impl,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRecord>, BenchError> {
    if !routine.supports(imp) {
        return Err(BenchError::Unsupported { routine, imp });
    }
    if cfg.reps == 0 {
        return Err(BenchError::Range("reps must be positive".into()));
    }
    let mut out = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let mut case = build_case(routine, imp, size, cfg.seed)?;
        if let Some(dir) = &cfg.dump {
            dump_case(dir, routine, imp, size, &case)?;
        }
        case.workload.run()?;
        let err = rel(&case.workload.output(), &case.expected);
        if !(err <= GATE_TOL) {
            return Err(BenchError::Gate {
                routine,
                imp,
                size,
                err,
                tol: GATE_TOL,
            });
        }

        let mut batch = 1usize;
        for _ in 0..cfg.warmup.max(1) {
            loop {
                let t = Instant::now();
                for _ in 0..batch {
                    case.workload.run()?;
                }
                if t.elapsed().as_secs_f64() >= cfg.min_rep_seconds || batch >= 1 << 20 {
                    break;
                }
                batch *= 2;
            }
        }
        let mut times = Vec::with_capacity(cfg.reps);
        for _ in 0..cfg.reps {
            let t = Instant::now();
            for _ in 0..batch {
                case.workload.run()?;
            }
            times.push(t.elapsed().as_secs_f64() / batch as f64);
        }
        let seconds = median(&mut times).max(f64::MIN_POSITIVE);
        let (m, n, k) = case.dims;
        let gflops = flop_count(routine, m, n, k) / seconds / 1e9;
        out.push(SweepRecord {
            routine,
            imp,
            m,
            n,
            k,
            reps: cfg.reps,
            seconds,
            gflops,
        });
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 7] = ["routine", "impl", "m", "n", "k", "seconds", "gflops"];

/// Writes the records sorted by `(routine, impl, m)`, floats with 17
/// significant digits.
pub fn emit_csv(records: &[SweepRecord], w: impl Write) -> Result<(), BenchError> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.routine.name(), a.imp.name(), a.m).cmp(&(b.routine.name(), b.imp.name(), b.m))
    });
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in sorted {
        wr.write_record([
            r.routine.name().to_string(),
            r.imp.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            format!("{:.16e}", r.seconds),
            format!("{:.16e}", r.gflops),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads records written by [`emit_csv`]. `reps` is not stored and comes
/// back as 0.
pub fn parse_csv(r: impl Read) -> Result<Vec<SweepRecord>, BenchError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(BenchError::Range(format!("unexpected header {:?}", header)));
    }
    let bad = |what: &str| BenchError::Range(format!("bad {what} field"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        out.push(SweepRecord {
            routine: field(0).parse()?,
            imp: field(1).parse()?,
            m: field(2).parse().map_err(|_| bad("m"))?,
            n: field(3).parse().map_err(|_| bad("n"))?,
            k: field(4).parse().map_err(|_| bad("k"))?,
            reps: 0,
            seconds: field(5).parse().map_err(|_| bad("seconds"))?,
            gflops: field(6).parse().map_err(|_| bad("gflops"))?,
        });
    }
    Ok(out)
}

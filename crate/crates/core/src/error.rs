use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{operand}: {rows}x{cols} window at ({ai}, {aj}) exceeds the {m}x{n} matrix")]
    OutOfBounds {
        operand: &'static str,
        ai: usize,
        aj: usize,
        rows: usize,
        cols: usize,
        m: usize,
        n: usize,
    },

    #[error("element ({i}, {j}) is outside the {m}x{n} matrix")]
    IndexOutOfBounds {
        i: usize,
        j: usize,
        m: usize,
        n: usize,
    },

    #[error("memory region is not aligned to {align} bytes")]
    Misaligned { align: usize },

    #[error("memory region holds {got} bytes but {need} are required")]
    Undersized { need: usize, got: usize },

    #[error("Cholesky pivot {index} is not positive")]
    NotPositiveDefinite { index: usize },

    #[error("zero pivot at index {index}")]
    ZeroPivot { index: usize },

    #[error("zero diagonal element in column {col} of triangular operand")]
    SingularTriangle { col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },

    #[error("fixture: {0}")]
    Fixture(String),
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

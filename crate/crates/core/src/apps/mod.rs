//! Structured solvers from embedded optimization, written against the
//! level-2 and level-3 routines only.

mod kkt;
mod riccati;
mod tridiag;

pub use kkt::{kkt_schur_factor, kkt_schur_factor_fused, kkt_schur_solve, KktFactor};
pub use riccati::{
    read_problem, riccati_factor_step, riccati_factorize, write_problem, OcpDims, RiccatiFactors,
    RiccatiWorkspace, StageData,
};
pub use tridiag::{
    block_tridiag_chol_factor, block_tridiag_chol_factor_into, block_tridiag_chol_solve,
    BlockTridiagFactor,
};

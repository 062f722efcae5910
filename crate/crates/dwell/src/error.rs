use thiserror::Error;

/// Errors surfaced by the numerical kernels.
///
/// Validation failures are caller mistakes (bad grids, bad parameters);
/// the solver variants signal that an iteration left its regime of
/// validity and carry enough context to diagnose the run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("eigensolver failed to converge: {what} (residual {residual:.3e})")]
    SolverFailure { what: String, residual: f64 },

    #[error("operator does not satisfy the two-bound-state hypothesis; negative eigenvalues found: {eigenvalues:?}")]
    H1Violation { eigenvalues: Vec<f64> },

    #[error("contraction for the continuous-spectrum correction diverged after {iterations} iterations (amplitude too large: rho0={rho0:.3e}, rho1={rho1:.3e})")]
    AmplitudeTooLarge {
        iterations: usize,
        rho0: f64,
        rho1: f64,
    },

    #[error("continuation step failed: {0}")]
    ContinuationStep(String),

    #[error("Jacobian singular near the bifurcation point; refine the first step (|det| = {det:.3e})")]
    JacobianSingular { det: f64 },

    #[error("no sign change of the reduced equation over the scan range [{lo:.3e}, {hi:.3e}]; interaction coefficients and gap are inconsistent")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("unexpected discrete spectrum of the second-variation operator: {0}")]
    SpectralStructure(String),

    #[error("internal-mode frequency squared is non-positive ({lambda_sq:.3e}); branch point outside the stability regime")]
    InstabilityFlag { lambda_sq: f64 },

    #[error("biorthogonal pairing is degenerate (|<xi, s3 xi>| = {pairing:.3e})")]
    DegeneratePairing { pairing: f64 },

    #[error("branch parameter not monotone; reparameterize before differencing ({0})")]
    NonMonotone(String),

    #[error("field left the precomputed branch neighbourhood: {0}")]
    OutOfBasin(String),

    #[error("reduced-state mass constraint violated: alpha^2 + beta^2 = {amp_sq:.6e} exceeds N = {mass:.6e}")]
    MassDomain { amp_sq: f64, mass: f64 },

    #[error("field amplitude exceeded the blow-up guard (|u|_max = {linf:.3e}, cap = {cap:.3e}) at t = {t:.6}")]
    BlowUp { linf: f64, cap: f64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

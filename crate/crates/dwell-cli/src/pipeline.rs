//! Assembly of the numerical pipeline from a parsed configuration, plus
//! the error-to-exit-code contract.

use std::fmt;

use dwell::branch::{asymmetric_branch, find_bifurcation, BifurcationPoint, BranchPoint, TwoModeSystem};
use dwell::grid::{GradedGrid, Grid};
use dwell::hypotheses::{h4_report, H4Report};
use dwell::linstab::{internal_mode, LinSpectrum};
use dwell::nlssim::{BranchTable, ModeTable};
use dwell::potential::{make_potential, Potential, PotentialKind};
use dwell::spectral::{spectral_pair, spectral_pair_graded, SpectralPair};

use crate::config::{PotentialSpec, ToolkitConfig};

/// Failure class determines the process exit code: validation errors exit
/// with 1, numerical failures with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<dwell::Error> for CliError {
    fn from(e: dwell::Error) -> Self {
        match e {
            dwell::Error::Validation(_) => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub fn potential_kind(spec: &PotentialSpec) -> PotentialKind {
    match *spec {
        PotentialSpec::GaussianDoubleWell {
            sigma,
            separation,
            depth,
        } => PotentialKind::GaussianDoubleWell {
            sigma,
            separation,
            depth,
        },
        PotentialSpec::PoschlTeller { m } => PotentialKind::PoschlTeller { m },
    }
}

/// The assembled linear stage: grid, sampled potential, spectral pair.
pub struct LinearStage {
    pub grid: Grid,
    pub potential: Potential,
    pub sp: SpectralPair,
}

pub fn build_linear(cfg: &ToolkitConfig) -> Result<LinearStage, CliError> {
    let grid = Grid::symmetric(cfg.grid.x_max, cfg.grid.n)?;
    let potential = make_potential(potential_kind(&cfg.potential), &grid)?;
    if potential.under_resolved {
        eprintln!(
            "warning: potential width is under-resolved on the uniform grid; \
             use the graded mesh ([grid] graded = true)"
        );
    }
    let sp = spectral_pair(&potential, &grid)?;
    Ok(LinearStage {
        grid,
        potential,
        sp,
    })
}

/// Graded-mesh variant for needle wells.
pub struct GradedStage {
    pub mesh: GradedGrid,
    pub potential: Potential,
    pub sp: SpectralPair,
}

pub fn build_graded(cfg: &ToolkitConfig) -> Result<GradedStage, CliError> {
    let centers = match cfg.potential {
        PotentialSpec::GaussianDoubleWell { separation, .. } => vec![separation, -separation],
        PotentialSpec::PoschlTeller { .. } => vec![0.0],
    };
    let fine_radius = match cfg.potential {
        PotentialSpec::GaussianDoubleWell { sigma, .. } => 8.0 * sigma,
        PotentialSpec::PoschlTeller { .. } => 1.0,
    };
    let mesh = GradedGrid::refined(
        cfg.grid.x_max,
        &centers,
        cfg.grid.graded_h_fine,
        fine_radius,
        cfg.grid.graded_h_coarse,
        cfg.grid.graded_ratio,
    )?;
    let potential = make_potential(potential_kind(&cfg.potential), &mesh)?;
    let sp = spectral_pair_graded(&potential, &mesh)?;
    Ok(GradedStage {
        mesh,
        potential,
        sp,
    })
}

/// The nonlinear stage shared by branch, linearization and NLS commands.
pub struct NonlinearStage {
    pub sys: TwoModeSystem,
    pub report: H4Report,
    pub bif: BifurcationPoint,
}

pub fn build_nonlinear(cfg: &ToolkitConfig) -> Result<NonlinearStage, CliError> {
    let lin = build_linear(cfg)?;
    let report = h4_report(&lin.sp, &lin.grid)?;
    let sys = TwoModeSystem::new(&lin.potential, lin.grid, lin.sp)?;
    let bif = find_bifurcation(&sys)?;
    Ok(NonlinearStage { sys, report, bif })
}

/// Asymmetric branch over the configured fraction window, with internal
/// modes at every node, packaged into interpolation tables.
pub struct BranchStage {
    pub points: Vec<BranchPoint>,
    pub modes: Vec<LinSpectrum>,
    pub table: BranchTable,
    pub mode_table: ModeTable,
}

pub fn build_branch_tables(
    cfg: &ToolkitConfig,
    stage: &NonlinearStage,
) -> Result<BranchStage, CliError> {
    let lo = cfg.branch.table_lo_frac;
    let hi = cfg.branch.table_hi_frac;
    let m = cfg.branch.table_points;
    let fracs: Vec<f64> = (0..=m)
        .map(|k| lo + (hi - lo) * k as f64 / m as f64)
        .collect();
    let rho1s: Vec<f64> = fracs.iter().map(|f| f * stage.bif.rho0_star).collect();
    let points = asymmetric_branch(&rho1s, &stage.bif, &stage.sys)?;
    let mut modes = Vec::with_capacity(points.len());
    for bp in &points {
        modes.push(internal_mode(bp, &stage.sys)?);
    }
    let table = BranchTable::from_branch(&points)?;
    let omegas: Vec<f64> = points.iter().map(|p| p.omega).collect();
    let mode_table = ModeTable::from_modes(omegas, modes.clone())?;
    Ok(BranchStage {
        points,
        modes,
        table,
        mode_table,
    })
}

//! Nonlinear ground-state branches of the quintic stationary problem
//! `(-d^2/dx^2 + V + omega) phi = phi^5` via two-mode reduction: the even
//! branch, the symmetry-breaking point, the asymmetric branch, and the
//! mass curve along it.
//!
//! The stationary solution is decomposed as
//! `phi = rho0 psi0 + rho1 psi1 + eta` with `eta` orthogonal to both
//! linear modes. The correction `eta` is found as a fixed point of the
//! projected inverse, the two scalar equations are the projections onto
//! `psi0` and `psi1`, and branch tracing is Newton continuation on those
//! scalars.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mesh};
use crate::operator::{self, SymTridiag};
use crate::spectral::{discretize, SpectralPair};
use crate::potential::Potential;

/// Below this magnitude of `rho1` the second scalar equation is evaluated
/// through its analytic limit instead of dividing by `rho1`.
const RHO1_LIMIT: f64 = 1e-9;

const PICARD_MAX: usize = 150;

/// Everything the branch solves need: the grid, the linear modes, the bare
/// operator `H = -d^2/dx^2 + V`, and plain-normalized copies of the modes
/// for deflation.
#[derive(Debug, Clone)]
pub struct TwoModeSystem {
    pub grid: Grid,
    pub sp: SpectralPair,
    pub h_op: SymTridiag,
    v0: Vec<f64>,
    v1: Vec<f64>,
}

impl TwoModeSystem {
    pub fn new(potential: &Potential, grid: Grid, sp: SpectralPair) -> Result<Self> {
        let h_op = discretize(potential, &grid)?;
        let scale = grid.h.sqrt();
        let v0 = sp.psi0.iter().map(|x| x * scale).collect();
        let v1 = sp.psi1.iter().map(|x| x * scale).collect();
        Ok(TwoModeSystem {
            grid,
            sp,
            h_op,
            v0,
            v1,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// Project onto the continuous spectral component (drop both modes).
    pub fn project_continuum(&self, f: &mut [f64]) {
        operator::project_out(f, &self.v0);
        operator::project_out(f, &self.v1);
    }

    /// Accurate solve of `(H + omega) x = b` on the continuum subspace.
    fn solve_continuum(&self, omega: f64, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = b.to_vec();
        operator::project_out(&mut rhs, &self.v0);
        operator::project_out(&mut rhs, &self.v1);
        let mut x = self.h_op.solve_shifted(-omega, &rhs)?;
        self.project_continuum(&mut x);
        // one refinement round keeps the near-singular mode directions from
        // polluting the continuum solution
        for _ in 0..2 {
            let hx = self.h_op.apply(&x);
            let mut r: Vec<f64> = rhs
                .iter()
                .zip(hx.iter().zip(&x))
                .map(|(b, (hx, x))| b - (hx + omega * x))
                .collect();
            self.project_continuum(&mut r);
            if operator::norm(&r) <= 1e-15 * operator::norm(&rhs).max(1e-300) {
                break;
            }
            let mut dx = self.h_op.solve_shifted(-omega, &r)?;
            self.project_continuum(&mut dx);
            operator::axpy(&mut x, 1.0, &dx);
        }
        Ok(x)
    }

    fn mode_sum(&self, rho0: f64, rho1: f64, eta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| rho0 * self.sp.psi0[i] + rho1 * self.sp.psi1[i] + eta[i])
            .collect()
    }
}

fn quintic(phi: &[f64]) -> Vec<f64> {
    phi.iter().map(|&v| v.powi(5)).collect()
}

/// Fixed point of `eta = P_c (H + omega)^{-1} P_c (rho0 psi0 + rho1 psi1 + eta)^5`.
///
/// Plain Picard iteration with a damped retry; diverging amplitudes abort
/// with [`Error::AmplitudeTooLarge`].
pub fn solve_eta(
    rho0: f64,
    rho1: f64,
    omega: f64,
    sys: &TwoModeSystem,
) -> Result<Vec<f64>> {
    solve_eta_from(rho0, rho1, omega, sys, None)
}

pub fn solve_eta_from(
    rho0: f64,
    rho1: f64,
    omega: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if omega <= 0.0 {
        return Err(Error::Validation(format!(
            "frequency must sit below the continuum threshold: omega = {omega} <= 0"
        )));
    }
    if rho0 == 0.0 && rho1 == 0.0 {
        return Ok(vec![0.0; sys.n()]);
    }
    match picard_eta(rho0, rho1, omega, sys, warm, 1.0) {
        Ok(eta) => return Ok(eta),
        Err(Error::AmplitudeTooLarge { .. }) => {}
        Err(e) => return Err(e),
    }
    // outside the contraction regime: Newton on the discretized correction
    newton_eta(rho0, rho1, omega, sys, warm)
}

/// Newton iteration on the strong-form residual
/// `S(eta) = (H + omega) eta - P_c phi^5`. Each step solves the linearized
/// operator `(H + omega - 5 phi^4) + (projector correction)` through the
/// rank-2 Woodbury identity, so the cost stays at a few tridiagonal solves.
fn newton_eta(
    rho0: f64,
    rho1: f64,
    omega: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = sys.n();
    let mut eta = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    sys.project_continuum(&mut eta);
    let amp = rho0.abs().max(rho1.abs());
    let tol = 1e-13 * amp.max(1e-6);
    let mut last_norm = f64::MAX;
    for it in 0..80 {
        let phi = sys.mode_sum(rho0, rho1, &eta);
        // strong residual restricted to the continuum subspace
        let mut s = sys.h_op.apply(&eta);
        let p5 = quintic(&phi);
        let mut pc_p5 = p5.clone();
        sys.project_continuum(&mut pc_p5);
        for i in 0..n {
            s[i] += omega * eta[i] - pc_p5[i];
        }
        sys.project_continuum(&mut s);
        let sn = sys.grid.norm(&s);
        if sn <= tol {
            return Ok(eta);
        }
        if sn > 4.0 * last_norm {
            return Err(Error::AmplitudeTooLarge {
                iterations: it,
                rho0,
                rho1,
            });
        }
        last_norm = sn;

        // linearized operator: L = (H + omega - 5 phi^4) + sum_j psi_j <psi_j, 5 phi^4 .>
        let w4: Vec<f64> = phi.iter().map(|v| -5.0 * v.powi(4)).collect();
        let lt = sys.h_op.add_scalar(omega).add_diag(&w4);
        let rhs: Vec<f64> = s.iter().map(|v| -v).collect();
        let base = lt.solve_shifted(0.0, &rhs)?;
        let sol0 = lt.solve_shifted(0.0, &sys.sp.psi0)?;
        let sol1 = lt.solve_shifted(0.0, &sys.sp.psi1)?;
        // weighted functionals v_j(x) = <psi_j, 5 phi^4 x>
        let vfun = |x: &[f64], j: usize| -> f64 {
            let psi = if j == 0 { &sys.sp.psi0 } else { &sys.sp.psi1 };
            let mut acc = 0.0;
            for i in 0..n {
                acc += sys.grid.weight(i) * psi[i] * 5.0 * phi[i].powi(4) * x[i];
            }
            acc
        };
        // 2x2 capacitance system (I + V^T L^{-1} U) c = V^T L^{-1} rhs
        let a00 = 1.0 + vfun(&sol0, 0);
        let a01 = vfun(&sol1, 0);
        let a10 = vfun(&sol0, 1);
        let a11 = 1.0 + vfun(&sol1, 1);
        let b0 = vfun(&base, 0);
        let b1 = vfun(&base, 1);
        let det = a00 * a11 - a01 * a10;
        if det.abs() < 1e-14 {
            return Err(Error::AmplitudeTooLarge {
                iterations: it,
                rho0,
                rho1,
            });
        }
        let c0 = (b0 * a11 - b1 * a01) / det;
        let c1 = (-b0 * a10 + b1 * a00) / det;
        let mut delta = base;
        operator::axpy(&mut delta, -c0, &sol0);
        operator::axpy(&mut delta, -c1, &sol1);
        sys.project_continuum(&mut delta);
        // damped update when the step is large relative to the state scale
        let step_norm = sys.grid.norm(&delta);
        let cap = 0.5 * amp.max(sys.grid.norm(&eta));
        let scale = if step_norm > cap { cap / step_norm } else { 1.0 };
        for i in 0..n {
            eta[i] += scale * delta[i];
        }
    }
    Err(Error::AmplitudeTooLarge {
        iterations: 80,
        rho0,
        rho1,
    })
}

fn picard_eta(
    rho0: f64,
    rho1: f64,
    omega: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
    damping: f64,
) -> Result<Vec<f64>> {
    let n = sys.n();
    let mut eta = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let amp = rho0.abs().max(rho1.abs());
    // the update difference bounds the equation residual up to the
    // contraction modulus; this target leaves ample margin below the
    // 1e-10 branch-point budget without chasing the roundoff plateau
    let tol = 1e-13 * amp.max(1e-6);
    let mut last_delta = f64::MAX;
    for it in 0..PICARD_MAX {
        let phi = sys.mode_sum(rho0, rho1, &eta);
        let next_raw = sys.solve_continuum(omega, &quintic(&phi))?;
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] = (1.0 - damping) * eta[i] + damping * next_raw[i];
        }
        let delta = sys.grid.norm(
            &next
                .iter()
                .zip(&eta)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        );
        eta = next;
        if delta <= tol {
            return Ok(eta);
        }
        // bail out early once the update stops contracting; the Newton
        // fallback picks up from there
        if it > 8 && delta > 0.97 * last_delta && delta > 1e3 * tol {
            return Err(Error::AmplitudeTooLarge {
                iterations: it,
                rho0,
                rho1,
            });
        }
        last_delta = delta;
    }
    Err(Error::AmplitudeTooLarge {
        iterations: PICARD_MAX,
        rho0,
        rho1,
    })
}

/// Derivative of `eta` with respect to `rho1` at `rho1 = 0`, the odd
/// function solving the linearized fixed-point equation. Needed for the
/// analytic small-`rho1` limit of the second scalar equation.
fn deta_drho1_at_zero(
    rho0: f64,
    omega: f64,
    eta0: &[f64],
    sys: &TwoModeSystem,
) -> Result<Vec<f64>> {
    let n = sys.n();
    let phi0 = sys.mode_sum(rho0, 0.0, eta0);
    let phi4: Vec<f64> = phi0.iter().map(|v| v.powi(4)).collect();
    let mut deta = vec![0.0; n];
    let tol = 1e-13 * rho0.abs().max(1e-6);
    for _ in 0..PICARD_MAX {
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 5.0 * phi4[i] * (sys.sp.psi1[i] + deta[i]);
        }
        let next = sys.solve_continuum(omega, &rhs)?;
        let delta = sys.grid.norm(
            &next
                .iter()
                .zip(&deta)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        );
        deta = next;
        if delta <= tol {
            return Ok(deta);
        }
    }
    Err(Error::AmplitudeTooLarge {
        iterations: PICARD_MAX,
        rho0,
        rho1: 0.0,
    })
}

/// Output of one evaluation of the reduced system.
#[derive(Debug, Clone)]
pub struct FgValue {
    pub f: f64,
    /// `rho1 * G`, the literal second equation (vanishes with `rho1`).
    pub g_times_rho1: f64,
    /// `G` itself; near `rho1 = 0` from the analytic directional limit.
    pub g: f64,
    pub eta: Vec<f64>,
}

/// Evaluate the two projected scalar equations at `(rho0, rho1, omega)`.
pub fn residual_fg(
    rho0: f64,
    rho1: f64,
    omega: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
) -> Result<FgValue> {
    let eta = solve_eta_from(rho0, rho1, omega, sys, warm)?;
    let phi = sys.mode_sum(rho0, rho1, &eta);
    let p5 = quintic(&phi);
    let f = (omega - sys.sp.omega0) * rho0 - sys.grid.dot(&sys.sp.psi0, &p5);
    let g = if rho1.abs() >= RHO1_LIMIT {
        (omega - sys.sp.omega1) - sys.grid.dot(&sys.sp.psi1, &p5) / rho1
    } else {
        let deta = deta_drho1_at_zero(rho0, omega, &eta, sys)?;
        let phi4: Vec<f64> = phi.iter().map(|v| v.powi(4)).collect();
        let mut coupling = 0.0;
        for i in 0..sys.n() {
            coupling += sys.grid.weight(i)
                * sys.sp.psi1[i]
                * 5.0
                * phi4[i]
                * (sys.sp.psi1[i] + deta[i]);
        }
        (omega - sys.sp.omega1) - coupling
    };
    let g_times_rho1 = if rho1.abs() >= RHO1_LIMIT { rho1 * g } else { 0.0 };
    Ok(FgValue {
        f,
        g_times_rho1,
        g,
        eta,
    })
}

/// One converged solution of the reduced system with its assembled state.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub rho0: f64,
    pub rho1: f64,
    pub omega: f64,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Squared mass of the assembled state.
    pub q: f64,
    /// Weighted-norm residual of the full stationary equation.
    pub residual: f64,
    /// `∫_{x>0} phi^2 - ∫_{x<0} phi^2`.
    pub asymmetry: f64,
}

impl BranchPoint {
    fn assemble(rho0: f64, rho1: f64, omega: f64, eta: Vec<f64>, sys: &TwoModeSystem) -> Self {
        let phi = sys.mode_sum(rho0, rho1, &eta);
        let q = sys.grid.dot(&phi, &phi);
        let residual = full_residual(&phi, omega, sys);
        let mut asym = 0.0;
        for i in 0..sys.n() {
            let x = sys.grid.node(i);
            let w = sys.grid.weight(i) * phi[i] * phi[i];
            if x > 0.0 {
                asym += w;
            } else if x < 0.0 {
                asym -= w;
            }
        }
        BranchPoint {
            rho0,
            rho1,
            omega,
            eta,
            phi,
            q,
            residual,
            asymmetry: asym,
        }
    }

    /// Orthogonality defect `|<eta, psi0>| + |<eta, psi1>|`.
    pub fn eta_orthogonality(&self, sys: &TwoModeSystem) -> f64 {
        sys.grid.dot(&self.eta, &sys.sp.psi0).abs() + sys.grid.dot(&self.eta, &sys.sp.psi1).abs()
    }
}

/// Weighted L2 norm of `(H + omega) phi - phi^5`.
pub fn full_residual(phi: &[f64], omega: f64, sys: &TwoModeSystem) -> f64 {
    let hphi = sys.h_op.apply(phi);
    let r: Vec<f64> = (0..sys.n())
        .map(|i| hphi[i] + omega * phi[i] - phi[i].powi(5))
        .collect();
    sys.grid.norm(&r)
}

/// Trace the even branch over an ascending `rho0` grid: for each amplitude,
/// solve the first scalar equation for `omega` by damped Newton with a
/// bisection fallback, warm-starting from the previous point.
pub fn symmetric_branch(rho0_values: &[f64], sys: &TwoModeSystem) -> Result<Vec<BranchPoint>> {
    let mut out = Vec::with_capacity(rho0_values.len());
    let mut omega_guess = sys.sp.omega0;
    let mut eta_warm: Option<Vec<f64>> = None;
    for &rho0 in rho0_values {
        if rho0 < 0.0 {
            return Err(Error::Validation("rho0 grid must be nonnegative".into()));
        }
        if rho0 == 0.0 {
            out.push(BranchPoint::assemble(
                0.0,
                0.0,
                sys.sp.omega0,
                vec![0.0; sys.n()],
                sys,
            ));
            continue;
        }
        let (omega, fg) = solve_omega_for_rho0(rho0, omega_guess, sys, eta_warm.as_deref())?;
        omega_guess = omega;
        eta_warm = Some(fg.eta.clone());
        out.push(BranchPoint::assemble(rho0, 0.0, omega, fg.eta, sys));
    }
    Ok(out)
}

fn solve_omega_for_rho0(
    rho0: f64,
    omega_start: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
) -> Result<(f64, FgValue)> {
    // predictor from the leading amplitude expansion of the branch
    let i60 = {
        let mut acc = 0.0;
        for i in 0..sys.n() {
            acc += sys.grid.weight(i) * sys.sp.psi0[i].powi(6);
        }
        acc
    };
    let mut omega = omega_start.max(sys.sp.omega0 + rho0.powi(4) * i60 * 0.5);
    let f_scale = rho0.max(1e-6);
    let tol = 1e-13 * f_scale.max(1.0);
    let mut fg = residual_fg(rho0, 0.0, omega, sys, warm)?;
    for _ in 0..60 {
        if fg.f.abs() <= tol {
            return Ok((omega, fg));
        }
        // d f / d omega = rho0 + O(rho0^9); refine by a secant step
        let slope0 = rho0;
        let mut step = -fg.f / slope0;
        let max_step = 0.25 * (sys.sp.omega0.abs() + rho0.powi(4) * i60 + 1e-6);
        if step.abs() > max_step {
            step = step.signum() * max_step;
        }
        let omega_next = (omega + step).max(1e-12);
        let fg_next = residual_fg(rho0, 0.0, omega_next, sys, Some(&fg.eta))?;
        // secant refinement using the actual pair of evaluations
        let denom = fg_next.f - fg.f;
        if denom.abs() > 0.0 {
            let omega_sec = omega - fg.f * (omega_next - omega) / denom;
            if omega_sec > 0.0 && (omega_sec - omega_next).abs() < max_step {
                let fg_sec = residual_fg(rho0, 0.0, omega_sec, sys, Some(&fg_next.eta))?;
                if fg_sec.f.abs() < fg_next.f.abs() {
                    omega = omega_sec;
                    fg = fg_sec;
                    continue;
                }
            }
        }
        omega = omega_next;
        fg = fg_next;
    }
    if fg.f.abs() <= 1e3 * tol {
        return Ok((omega, fg));
    }
    // bisection fallback on a bracket around the predictor
    let lo = sys.sp.omega0 * 0.5;
    let hi = sys.sp.omega0 + 4.0 * rho0.powi(4) * i60 + 0.1 * sys.sp.omega0;
    bisect_omega(rho0, lo, hi, sys).ok_or_else(|| {
        Error::ContinuationStep(format!(
            "omega solve stalled at rho0 = {rho0} (|F| = {:.3e}); reduce the amplitude step",
            fg.f.abs()
        ))
    })
}

fn bisect_omega(rho0: f64, lo: f64, hi: f64, sys: &TwoModeSystem) -> Option<(f64, FgValue)> {
    let f_lo = residual_fg(rho0, 0.0, lo, sys, None).ok()?;
    let f_hi = residual_fg(rho0, 0.0, hi, sys, None).ok()?;
    if f_lo.f * f_hi.f > 0.0 {
        return None;
    }
    let (mut lo, mut hi, mut flo) = (lo, hi, f_lo.f);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = residual_fg(rho0, 0.0, mid, sys, None).ok()?;
        if fm.f.abs() < 1e-13 * rho0.max(1.0) || hi - lo < 1e-16 * mid.abs() {
            return Some((mid, fm));
        }
        if fm.f * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm.f;
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub struct BifurcationPoint {
    pub rho0_star: f64,
    pub omega_star: f64,
    /// Leading-order prediction `(gap / h4a)^{1/4}`.
    pub predicted_rho0_star: f64,
}

/// Locate the symmetry-breaking point: the amplitude on the even branch at
/// which the second scalar equation develops a nontrivial root. Scans for
/// a sign change of `G(rho0, 0, omega(rho0))` and refines by bisection.
pub fn find_bifurcation(sys: &TwoModeSystem) -> Result<BifurcationPoint> {
    let gap = sys.sp.gap;
    let report = crate::hypotheses::h4_report(&sys.sp, &sys.grid)?;
    if report.h4a <= 0.0 {
        return Err(Error::Validation(format!(
            "interaction margin h4a = {:.3e} is not positive; no bifurcation expected",
            report.h4a
        )));
    }
    let predicted = (gap / report.h4a).powf(0.25);

    let g_at = |rho0: f64| -> Result<f64> {
        let (omega, _) = solve_omega_for_rho0(rho0, sys.sp.omega0, sys, None)?;
        let fg = residual_fg(rho0, 0.0, omega, sys, None)?;
        Ok(fg.g)
    };

    // scan outward around the prediction for the sign change
    let mut lo = 0.2 * predicted;
    let mut g_lo = g_at(lo)?;
    if g_lo <= 0.0 {
        // already past the root at a fifth of the prediction: scan downward
        let mut shrink = lo;
        loop {
            shrink *= 0.5;
            if shrink < 1e-6 * predicted {
                return Err(Error::BracketFailure { lo: shrink, hi: lo });
            }
            let g = g_at(shrink)?;
            if g > 0.0 {
                let hi = lo;
                lo = shrink;
                g_lo = g;
                return refine_bifurcation(lo, hi, g_lo, predicted, sys);
            }
        }
    }
    let mut hi = lo;
    for _ in 0..40 {
        hi *= 1.25;
        let g_hi = g_at(hi)?;
        if g_hi <= 0.0 {
            return refine_bifurcation(lo, hi, g_lo, predicted, sys);
        }
        lo = hi;
        g_lo = g_hi;
        if hi > 4.0 * predicted {
            break;
        }
    }
    Err(Error::BracketFailure {
        lo: 0.2 * predicted,
        hi,
    })
}

fn refine_bifurcation(
    mut lo: f64,
    mut hi: f64,
    mut g_lo: f64,
    predicted: f64,
    sys: &TwoModeSystem,
) -> Result<BifurcationPoint> {
    let g_at = |rho0: f64| -> Result<(f64, f64)> {
        let (omega, _) = solve_omega_for_rho0(rho0, sys.sp.omega0, sys, None)?;
        let fg = residual_fg(rho0, 0.0, omega, sys, None)?;
        Ok((fg.g, omega))
    };
    let mut omega_star = sys.sp.omega0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (g_mid, omega_mid) = g_at(mid)?;
        omega_star = omega_mid;
        if hi - lo <= 1e-13 * mid {
            break;
        }
        if g_mid * g_lo > 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    let rho0_star = 0.5 * (lo + hi);
    Ok(BifurcationPoint {
        rho0_star,
        omega_star,
        predicted_rho0_star: predicted,
    })
}

/// Trace the asymmetric branch over an ascending `|rho1|` grid by 2-D
/// Newton on the pair of scalar equations in `(rho0, omega)`, continuation
/// warm-started and step-halved on failure.
pub fn asymmetric_branch(
    rho1_values: &[f64],
    bif: &BifurcationPoint,
    sys: &TwoModeSystem,
) -> Result<Vec<BranchPoint>> {
    let mut out = Vec::with_capacity(rho1_values.len());
    let mut rho0 = bif.rho0_star;
    let mut omega = bif.omega_star;
    let mut eta_warm: Option<Vec<f64>> = None;
    let mut reached = 0.0f64;
    // keeping individual steps well below the bifurcation amplitude stops
    // the corrector from wandering onto a different solution root
    let step_cap = 0.12 * bif.rho0_star.max(1e-6);
    for &rho1_target in rho1_values {
        if rho1_target.abs() < reached.abs() {
            return Err(Error::Validation(
                "rho1 grid must move away from the bifurcation monotonically".into(),
            ));
        }
        // adaptive sub-steps from the last reached rho1 to the target
        let mut step = (rho1_target - reached).clamp(-step_cap, step_cap);
        let mut guard = 0usize;
        while (rho1_target - reached).abs() > 0.0 {
            step = step.clamp(-step_cap, step_cap);
            if step.abs() > (rho1_target - reached).abs() {
                step = rho1_target - reached;
            }
            let rho1 = reached + step;
            match newton_2d(rho0, omega, rho1, sys, eta_warm.as_deref()) {
                Ok((r0, om, fg)) => {
                    rho0 = r0;
                    omega = om;
                    eta_warm = Some(fg.eta);
                    reached = rho1;
                    // cautious growth after successful solves
                    step *= 1.6;
                }
                Err(Error::JacobianSingular { det }) => {
                    return Err(Error::JacobianSingular { det });
                }
                Err(_) => {
                    step *= 0.5;
                    guard += 1;
                    if guard > 30 {
                        return Err(Error::ContinuationStep(format!(
                            "no progress toward rho1 = {rho1_target} from {reached}"
                        )));
                    }
                }
            }
        }
        let fg = residual_fg(rho0, reached, omega, sys, eta_warm.as_deref())?;
        eta_warm = Some(fg.eta.clone());
        out.push(BranchPoint::assemble(rho0, reached, omega, fg.eta, sys));
    }
    Ok(out)
}

fn newton_2d(
    rho0_init: f64,
    omega_init: f64,
    rho1: f64,
    sys: &TwoModeSystem,
    warm: Option<&[f64]>,
) -> Result<(f64, f64, FgValue)> {
    let mut rho0 = rho0_init;
    let mut omega = omega_init;
    let mut fg = residual_fg(rho0, rho1, omega, sys, warm)?;
    let tol = 1e-13;
    for _ in 0..25 {
        let resid = fg.f.abs().max((fg.g * rho1.max(1e-3)).abs());
        if fg.f.abs() < tol && fg.g.abs() * rho1.abs().max(1e-3) < tol {
            return Ok((rho0, omega, fg));
        }
        let d_r = (1e-7 * rho0.abs()).max(1e-9);
        let d_w = (1e-7 * omega.abs()).max(1e-10);
        let fg_r = residual_fg(rho0 + d_r, rho1, omega, sys, Some(&fg.eta))?;
        let fg_w = residual_fg(rho0, rho1, omega + d_w, sys, Some(&fg.eta))?;
        let j00 = (fg_r.f - fg.f) / d_r;
        let j01 = (fg_w.f - fg.f) / d_w;
        let j10 = (fg_r.g - fg.g) / d_r;
        let j11 = (fg_w.g - fg.g) / d_w;
        let det = j00 * j11 - j01 * j10;
        if det.abs() < 1e-14 * (j00.abs() * j11.abs() + j01.abs() * j10.abs()).max(1e-30) {
            return Err(Error::JacobianSingular { det });
        }
        let drho0 = (-fg.f * j11 + fg.g * j01) / det;
        let domega = (fg.f * j10 - fg.g * j00) / det;
        // limit the Newton step to stay inside the contraction regime
        let limit = 0.5 * rho0.abs().max(0.1);
        let scale = 1.0f64.min(limit / drho0.abs().max(1e-300));
        rho0 += scale * drho0;
        omega = (omega + scale * domega).max(1e-12);
        let fg_new = residual_fg(rho0, rho1, omega, sys, Some(&fg.eta))?;
        if fg_new.f.abs().max(fg_new.g.abs() * rho1.abs().max(1e-3)) > 10.0 * resid.max(tol) {
            return Err(Error::ContinuationStep("Newton step diverged".into()));
        }
        fg = fg_new;
    }
    Err(Error::ContinuationStep(format!(
        "2-D Newton did not converge at rho1 = {rho1}"
    )))
}

/// Centered finite-difference `dq/domega` at the interior points of a
/// branch. Errors when `omega` is not strictly monotone along the input.
pub fn mass_slope(branch: &[BranchPoint]) -> Result<Vec<f64>> {
    if branch.len() < 3 {
        return Err(Error::Validation(
            "mass slope needs at least three branch points".into(),
        ));
    }
    let inc = branch.windows(2).all(|w| w[1].omega > w[0].omega);
    let dec = branch.windows(2).all(|w| w[1].omega < w[0].omega);
    if !inc && !dec {
        return Err(Error::NonMonotone(
            "omega is not strictly monotone along the branch".into(),
        ));
    }
    Ok(branch
        .windows(3)
        .map(|w| (w[2].q - w[0].q) / (w[2].omega - w[0].omega))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::hypotheses::h4_report;
    use crate::potential::{make_potential, PotentialKind};
    use crate::spectral::spectral_pair;
    use approx::assert_relative_eq;

    fn test_system(separation: f64, n: usize) -> TwoModeSystem {
        let g = Grid::symmetric(30.0, n).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        TwoModeSystem::new(&p, g, sp).unwrap()
    }

    #[test]
    fn eta_vanishes_for_zero_amplitude() {
        let sys = test_system(3.0, 1200);
        let eta = solve_eta(0.0, 0.0, sys.sp.omega0, &sys).unwrap();
        assert!(eta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eta_scales_as_fifth_power_and_stays_even() {
        let sys = test_system(3.0, 1600);
        let omega = sys.sp.omega0 * 1.0001;
        let mut ratios = Vec::new();
        for rho0 in [1e-2, 5e-3, 2.5e-3] {
            let eta = solve_eta(rho0, 0.0, omega, &sys).unwrap();
            assert!(sys.grid.odd_part_max(&eta) < 1e-10, "eta must stay even");
            ratios.push(sys.grid.norm(&eta) / rho0.powi(5));
        }
        // the ratio ||eta|| / rho0^5 stabilizes as rho0 -> 0
        assert_relative_eq!(ratios[0], ratios[1], max_relative = 1e-3);
        assert_relative_eq!(ratios[1], ratios[2], max_relative = 1e-3);
    }

    #[test]
    fn fg_vanish_identically_at_zero_amplitude() {
        let sys = test_system(3.0, 1200);
        for omega in [sys.sp.omega0 * 0.9, sys.sp.omega0, sys.sp.omega0 * 1.2] {
            let fg = residual_fg(0.0, 0.0, omega, &sys, None).unwrap();
            assert_eq!(fg.f, 0.0);
            assert_eq!(fg.g_times_rho1, 0.0);
        }
    }

    #[test]
    fn analytic_g_limit_matches_centered_difference() {
        let sys = test_system(3.0, 1600);
        let rho0 = 0.3;
        let (omega, _) = solve_omega_for_rho0(rho0, sys.sp.omega0, &sys, None).unwrap();
        let fg0 = residual_fg(rho0, 0.0, omega, &sys, None).unwrap();
        // centered difference of <psi1, phi^5> / rho1 through rho1 = +-1e-5
        let d = 1e-5;
        let plus = residual_fg(rho0, d, omega, &sys, None).unwrap();
        let minus = residual_fg(rho0, -d, omega, &sys, None).unwrap();
        let g_fd = 0.5 * (plus.g + minus.g);
        assert_relative_eq!(fg0.g, g_fd, max_relative = 1e-6);
    }

    #[test]
    fn symmetric_branch_leading_order_expansion() {
        let sys = test_system(4.0, 1600);
        let report = h4_report(&sys.sp, &sys.grid).unwrap();
        let bif = find_bifurcation(&sys).unwrap();
        let rho0 = 0.3 * bif.rho0_star;
        let pts = symmetric_branch(&[0.0, 0.5 * rho0, rho0], &sys).unwrap();
        let last = pts.last().unwrap();
        assert_eq!(pts[0].omega, sys.sp.omega0);
        let ratio = (last.omega - sys.sp.omega0) / (rho0.powi(4) * report.i60);
        assert!((ratio - 1.0).abs() < 0.05, "expansion ratio {ratio}");
        // mass increases with amplitude along the small symmetric branch
        assert!(pts[1].q < pts[2].q);
        // branch points satisfy the full stationary equation
        assert!(last.residual < 1e-10, "residual {}", last.residual);
        assert!(last.eta_orthogonality(&sys) < 1e-10);
    }

    #[test]
    fn bifurcation_prediction_improves_with_separation() {
        let mut errors = Vec::new();
        for sep in [3.0, 4.0] {
            let sys = test_system(sep, 1600);
            let report = h4_report(&sys.sp, &sys.grid).unwrap();
            let bif = find_bifurcation(&sys).unwrap();
            let gap = sys.sp.gap;
            let err = (bif.rho0_star.powi(4) * report.h4a - gap).abs() / gap;
            errors.push(err);
            assert!(err < 0.10, "prediction error {err} at separation {sep}");
            // G changes sign across the root
            let g = |rho0: f64| {
                let (omega, _) = solve_omega_for_rho0(rho0, sys.sp.omega0, &sys, None).unwrap();
                residual_fg(rho0, 0.0, omega, &sys, None).unwrap().g
            };
            assert!(g(0.97 * bif.rho0_star) > 0.0);
            assert!(g(1.03 * bif.rho0_star) < 0.0);
        }
        assert!(
            errors[1] < errors[0],
            "prediction error should shrink with the gap: {errors:?}"
        );
    }

    #[test]
    fn asymmetric_branch_structure() {
        let sys = test_system(4.0, 1600);
        let bif = find_bifurcation(&sys).unwrap();
        let rho1_grid: Vec<f64> = (1..=6).map(|k| 0.02 * k as f64 * bif.rho0_star).collect();
        let branch = asymmetric_branch(&rho1_grid, &bif, &sys).unwrap();
        for bp in &branch {
            assert!(bp.omega > bif.omega_star, "pitchfork opens upward in omega");
            assert!(bp.residual < 1e-8, "residual {}", bp.residual);
            assert!(bp.eta_orthogonality(&sys) < 1e-10);
            assert!(bp.asymmetry.abs() > 0.0);
        }
        // reflection: -rho1 gives the mirror state with identical (rho0, omega, q)
        let minus = asymmetric_branch(&[rho1_grid[2]], &bif, &sys).unwrap();
        let plus = &branch[2];
        let m = asymmetric_branch_mirror(&minus[0]);
        assert_relative_eq!(m.omega, plus.omega, max_relative = 1e-10);
        assert_relative_eq!(m.q, plus.q, max_relative = 1e-10);

        // quadratic leading order: log-log slope of omega(rho1) - omega* in [1.9, 2.1]
        let lo = &branch[0];
        let hi = &branch[3];
        let slope = ((hi.omega - bif.omega_star) / (lo.omega - bif.omega_star)).ln()
            / (hi.rho1 / lo.rho1).ln();
        assert!((slope - 2.0).abs() < 0.1, "pitchfork exponent {slope}");

        // mass increases with omega along the asymmetric branch
        let slopes = mass_slope(&branch).unwrap();
        assert!(slopes.iter().all(|&s| s > 0.0), "dq/domega {slopes:?}");
    }

    // reflect a (-rho1) branch point to compare against the +rho1 one
    fn asymmetric_branch_mirror(bp: &BranchPoint) -> BranchPoint {
        let mut out = bp.clone();
        out.rho1 = -bp.rho1;
        out.asymmetry = -bp.asymmetry;
        out
    }

    #[test]
    fn mass_slope_rejects_degenerate_branch() {
        let sys = test_system(3.0, 1200);
        let bp = BranchPoint::assemble(0.1, 0.0, sys.sp.omega0 * 1.001, vec![0.0; sys.n()], &sys);
        let err = mass_slope(&[bp.clone(), bp.clone(), bp]).unwrap_err();
        assert!(matches!(err, Error::NonMonotone(_)));
    }

    #[test]
    fn gauge_negation_also_solves() {
        let sys = test_system(3.0, 1600);
        let (omega, fg) = solve_omega_for_rho0(0.3, sys.sp.omega0, &sys, None).unwrap();
        let phi = sys.mode_sum(0.3, 0.0, &fg.eta);
        let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
        assert!(full_residual(&neg, omega, &sys) < 1e-10);
    }
}

//! Reduced two-mode dynamics: the closed planar system for the excited-mode
//! quadratures `(alpha, beta)` at fixed total mass, its equilibria, and
//! fixed-step phase-portrait integration.
//!
//! The closed form substitutes `A^2 = N - alpha^2 - beta^2` everywhere. The
//! three-variable form that evolves `A` independently is kept behind
//! [`integrate_fd_three_variable`]; it does not conserve
//! `alpha^2 + beta^2 + A^2` exactly (the drift rate is
//! `-2 alpha^3 beta A^2`), which is precisely why the closed substitution
//! is the default.

use crate::error::{Error, Result};

/// Parameters of the reduced system. The couplings are the four sextic
/// interaction integrals; the rescaled reference system corresponds to all
/// of them equal to one, and that is the only form integrated here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDParams {
    pub omega0: f64,
    pub omega1: f64,
    /// Conserved total mass `N = A^2 + alpha^2 + beta^2`.
    pub mass: f64,
    /// `(i60, i42, i24, i06)`; recorded for provenance, unit in the
    /// rescaled dynamics.
    pub couplings: [f64; 4],
}

impl FDParams {
    pub fn rescaled(omega0: f64, omega1: f64, mass: f64) -> Result<Self> {
        if !(omega0 > omega1) {
            return Err(Error::Validation(format!(
                "need omega0 > omega1, got {omega0} <= {omega1}"
            )));
        }
        if !(mass > 0.0) {
            return Err(Error::Validation(format!("mass must be positive, got {mass}")));
        }
        Ok(FDParams {
            omega0,
            omega1,
            mass,
            couplings: [1.0; 4],
        })
    }

    pub fn gap(&self) -> f64 {
        self.omega0 - self.omega1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDState {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub t: f64,
}

impl FDState {
    pub fn new(alpha: f64, beta: f64) -> Self {
        FDState {
            alpha,
            beta,
            theta: 0.0,
            t: 0.0,
        }
    }

    pub fn amplitude_sq(&self) -> f64 {
        self.alpha * self.alpha + self.beta * self.beta
    }
}

/// Right-hand side of the closed planar system plus the phase equation.
/// `A^2 = N - alpha^2 - beta^2` is substituted before evaluating.
pub fn fd_rhs(s: &FDState, p: &FDParams) -> Result<(f64, f64, f64)> {
    let amp_sq = s.amplitude_sq();
    if amp_sq > p.mass * (1.0 + 1e-12) {
        return Err(Error::MassDomain {
            amp_sq,
            mass: p.mass,
        });
    }
    Ok(fd_rhs_unchecked(s.alpha, s.beta, p))
}

fn fd_rhs_unchecked(alpha: f64, beta: f64, p: &FDParams) -> (f64, f64, f64) {
    let a_sq = (p.mass - alpha * alpha - beta * beta).max(0.0);
    let (da, db) = planar_rhs(alpha, beta, a_sq, p.gap());
    let dtheta = theta_rhs(alpha, beta, a_sq, p.omega0);
    (da, db, dtheta)
}

/// Planar vector field for given `A^2`; shared by the closed and
/// three-variable integrators.
fn planar_rhs(alpha: f64, beta: f64, a_sq: f64, gap: f64) -> (f64, f64) {
    let s = alpha * alpha + beta * beta;
    let d = alpha * alpha - beta * beta;
    let da = (gap + 4.0 * a_sq * alpha * alpha + 2.0 * s * s + 2.0 * s * d) * beta;
    let db = -(gap - 4.0 * a_sq * a_sq - 4.0 * a_sq * beta * beta
        + a_sq * alpha * alpha
        + 2.0 * s * s
        + 2.0 * s * d)
        * alpha;
    (da, db)
}

fn theta_rhs(alpha: f64, beta: f64, a_sq: f64, omega0: f64) -> f64 {
    let s = alpha * alpha + beta * beta;
    let d = alpha * alpha - beta * beta;
    omega0 + a_sq * a_sq + 10.0 * a_sq * alpha * alpha + 2.0 * a_sq * beta * beta
        + 2.0 * s * d
        + 3.0 * s * s
}

/// Analytic Jacobian of the closed planar field at `(alpha, beta)`.
///
/// Uses the collapsed forms `d(alpha)/dt = (gap + 4 N alpha^2) beta` and
/// `d(beta)/dt = -(gap - 4N^2 + 9N alpha^2 + 4N beta^2 - (alpha^2+beta^2) alpha^2) alpha`,
/// which are algebraically identical to the substituted expressions.
pub fn planar_jacobian(alpha: f64, beta: f64, p: &FDParams) -> [[f64; 2]; 2] {
    let gap = p.gap();
    let n = p.mass;
    let q = gap - 4.0 * n * n + 9.0 * n * alpha * alpha + 4.0 * n * beta * beta
        - (alpha * alpha + beta * beta) * alpha * alpha;
    let dq_da = 18.0 * n * alpha - 4.0 * alpha.powi(3) - 2.0 * alpha * beta * beta;
    let dq_db = 8.0 * n * beta - 2.0 * alpha * alpha * beta;
    [
        [8.0 * n * alpha * beta, gap + 4.0 * n * alpha * alpha],
        [-q - alpha * dq_da, -alpha * dq_db],
    ]
}

/// Overshoot handling for the fixed-step integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OvershootPolicy {
    /// Scale `(alpha, beta)` back onto the disk and record a warning.
    Clamp,
    /// Abort with a domain error.
    Strict,
}

#[derive(Debug, Clone)]
pub struct FdTrajectory {
    pub states: Vec<FDState>,
    pub clamped_steps: usize,
}

/// Classical fixed-step fourth-order Runge-Kutta on the closed system.
/// Samples every `sample_every` steps (and always the final state).
pub fn integrate_fd(
    s0: &FDState,
    p: &FDParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
    policy: OvershootPolicy,
) -> Result<FdTrajectory> {
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(Error::Validation(format!(
            "need positive dt and horizon, got dt={dt}, T={t_final}"
        )));
    }
    if s0.amplitude_sq() > p.mass {
        return Err(Error::MassDomain {
            amp_sq: s0.amplitude_sq(),
            mass: p.mass,
        });
    }
    let sample_every = sample_every.max(1);
    let steps = (t_final / dt).ceil() as usize;
    let mut s = *s0;
    let mut out = Vec::with_capacity(steps / sample_every + 2);
    let mut clamped = 0usize;
    out.push(s);
    for k in 0..steps {
        s = rk4_step(&s, p, dt);
        let amp = s.amplitude_sq();
        if amp > p.mass {
            match policy {
                OvershootPolicy::Strict => {
                    return Err(Error::MassDomain {
                        amp_sq: amp,
                        mass: p.mass,
                    })
                }
                OvershootPolicy::Clamp => {
                    // pull back onto the invariant disk; an overshoot here is
                    // integrator error, not dynamics
                    let scale = (p.mass / amp).sqrt();
                    s.alpha *= scale;
                    s.beta *= scale;
                    clamped += 1;
                }
            }
        }
        if (k + 1) % sample_every == 0 || k + 1 == steps {
            out.push(s);
        }
    }
    Ok(FdTrajectory {
        states: out,
        clamped_steps: clamped,
    })
}

fn rk4_step(s: &FDState, p: &FDParams, dt: f64) -> FDState {
    let f = |a: f64, b: f64| fd_rhs_unchecked(a, b, p);
    let (k1a, k1b, k1t) = f(s.alpha, s.beta);
    let (k2a, k2b, k2t) = f(s.alpha + 0.5 * dt * k1a, s.beta + 0.5 * dt * k1b);
    let (k3a, k3b, k3t) = f(s.alpha + 0.5 * dt * k2a, s.beta + 0.5 * dt * k2b);
    let (k4a, k4b, k4t) = f(s.alpha + dt * k3a, s.beta + dt * k3b);
    FDState {
        alpha: s.alpha + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        beta: s.beta + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
        theta: s.theta + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
        t: s.t + dt,
    }
}

/// Three-variable trajectory point: the amplitude `a` is integrated
/// independently instead of being reconstructed from the mass.
#[derive(Debug, Clone, Copy)]
pub struct FDStateA {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub theta: f64,
    pub t: f64,
}

/// Integrate the three-variable form and report the maximum drift of
/// `alpha^2 + beta^2 + A^2` from its initial value. Kept for exhibiting the
/// non-conservation of the uncontracted system.
pub fn integrate_fd_three_variable(
    s0: &FDState,
    p: &FDParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<(Vec<FDStateA>, f64)> {
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(Error::Validation("need positive dt and horizon".into()));
    }
    let a0_sq = p.mass - s0.amplitude_sq();
    if a0_sq < 0.0 {
        return Err(Error::MassDomain {
            amp_sq: s0.amplitude_sq(),
            mass: p.mass,
        });
    }
    let gap = p.gap();
    let rhs = |st: &FDStateA| -> (f64, f64, f64, f64) {
        let a_sq = st.a * st.a;
        let (da, db) = planar_rhs(st.alpha, st.beta, a_sq, gap);
        let s = st.alpha * st.alpha + st.beta * st.beta;
        let da_amp = -4.0 * st.a * (a_sq + s) * st.alpha * st.beta;
        let dt_phase = theta_rhs(st.alpha, st.beta, a_sq, p.omega0);
        (da, db, da_amp, dt_phase)
    };
    let sample_every = sample_every.max(1);
    let steps = (t_final / dt).ceil() as usize;
    let mut s = FDStateA {
        alpha: s0.alpha,
        beta: s0.beta,
        a: a0_sq.sqrt(),
        theta: s0.theta,
        t: s0.t,
    };
    let mut out = vec![s];
    let mut max_drift: f64 = 0.0;
    for k in 0..steps {
        let (k1a, k1b, k1c, k1t) = rhs(&s);
        let mid1 = FDStateA {
            alpha: s.alpha + 0.5 * dt * k1a,
            beta: s.beta + 0.5 * dt * k1b,
            a: s.a + 0.5 * dt * k1c,
            theta: s.theta,
            t: s.t,
        };
        let (k2a, k2b, k2c, k2t) = rhs(&mid1);
        let mid2 = FDStateA {
            alpha: s.alpha + 0.5 * dt * k2a,
            beta: s.beta + 0.5 * dt * k2b,
            a: s.a + 0.5 * dt * k2c,
            theta: s.theta,
            t: s.t,
        };
        let (k3a, k3b, k3c, k3t) = rhs(&mid2);
        let end = FDStateA {
            alpha: s.alpha + dt * k3a,
            beta: s.beta + dt * k3b,
            a: s.a + dt * k3c,
            theta: s.theta,
            t: s.t,
        };
        let (k4a, k4b, k4c, k4t) = rhs(&end);
        s = FDStateA {
            alpha: s.alpha + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
            beta: s.beta + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
            a: s.a + dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c),
            theta: s.theta + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
            t: s.t + dt,
        };
        let mass_now = s.alpha * s.alpha + s.beta * s.beta + s.a * s.a;
        max_drift = max_drift.max((mass_now - p.mass).abs());
        if (k + 1) % sample_every == 0 || k + 1 == steps {
            out.push(s);
        }
    }
    Ok((out, max_drift))
}

/// Reference critical mass of the reduced system, `((omega0 - omega1)/4)^{1/4}`.
///
/// Note this expression equals the critical value of the central-mode
/// amplitude `A = sqrt(N)` at the symmetric equilibrium; the mass at which
/// the origin actually changes type is its square, see
/// [`origin_flip_mass`]. Both are reported by the CLI.
pub fn critical_mass(p: &FDParams) -> Result<f64> {
    let gap = p.gap();
    if gap <= 0.0 {
        return Err(Error::Validation(format!(
            "critical mass needs a positive gap, got {gap}"
        )));
    }
    Ok((gap / 4.0).powf(0.25))
}

/// Classification of the origin at a given mass from the analytic Jacobian:
/// `true` for elliptic (purely imaginary eigenvalues), `false` for hyperbolic.
pub fn origin_is_elliptic(p: &FDParams, mass: f64) -> bool {
    let probe = FDParams { mass, ..*p };
    let j = planar_jacobian(0.0, 0.0, &probe);
    // det > 0 with zero trace: center; det < 0: saddle
    j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0
}

/// Mass at which the origin loses ellipticity, located by bisection on the
/// Jacobian-determinant sign to absolute tolerance `tol`.
pub fn origin_flip_mass(p: &FDParams, tol: f64) -> Result<f64> {
    let gap = p.gap();
    if gap <= 0.0 {
        return Err(Error::Validation("origin flip needs a positive gap".into()));
    }
    let mut lo = 1e-12;
    let mut hi = 10.0 * (1.0 + gap);
    if !origin_is_elliptic(p, lo) || origin_is_elliptic(p, hi) {
        return Err(Error::BracketFailure { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if origin_is_elliptic(p, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Elliptic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub alpha: f64,
    pub beta: f64,
    pub kind: EquilibriumKind,
}

/// All equilibria of the closed planar system: the origin, plus the
/// symmetry-broken pair `(+-alpha_cr, 0)` once the mass exceeds the origin
/// flip point. `alpha_cr` is found by bracketed bisection on the
/// `beta`-equation bracket at `beta = 0`.
pub fn equilibria(p: &FDParams) -> Result<Vec<Equilibrium>> {
    let gap = p.gap();
    let n = p.mass;
    let mut out = vec![classify(0.0, 0.0, p)];
    // bracket of d(beta)/dt at beta = 0, as a function of s = alpha^2:
    // gap - 4 (N - s)^2 + (N - s) s + 4 s^2, strictly increasing in s
    let f = |s: f64| -> f64 {
        let a_sq = n - s;
        gap - 4.0 * a_sq * a_sq + a_sq * s + 4.0 * s * s
    };
    if f(0.0) < 0.0 {
        let mut lo = 0.0;
        let mut hi = n;
        if f(hi) <= 0.0 {
            return Err(Error::BracketFailure { lo, hi });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-15 * n.max(1.0) {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha_cr = (0.5 * (lo + hi)).sqrt();
        out.push(classify(alpha_cr, 0.0, p));
        out.push(classify(-alpha_cr, 0.0, p));
    }
    Ok(out)
}

fn classify(alpha: f64, beta: f64, p: &FDParams) -> Equilibrium {
    let j = planar_jacobian(alpha, beta, p);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    Equilibrium {
        alpha,
        beta,
        kind: if det > 0.0 {
            EquilibriumKind::Elliptic
        } else {
            EquilibriumKind::Hyperbolic
        },
    }
}

/// One labelled point of a phase-portrait dataset.
#[derive(Debug, Clone, Copy)]
pub struct PortraitSample {
    pub traj_id: usize,
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Integrate a family of initial conditions and emit flattened samples for
/// external plotting. Initial conditions outside the mass disk are rejected.
pub fn phase_portrait(
    p: &FDParams,
    initial_conditions: &[FDState],
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<PortraitSample>> {
    let mut rows = Vec::new();
    for (id, ic) in initial_conditions.iter().enumerate() {
        let traj = integrate_fd(ic, p, t_final, dt, sample_every, OvershootPolicy::Clamp)?;
        for s in traj.states {
            rows.push(PortraitSample {
                traj_id: id,
                t: s.t,
                alpha: s.alpha,
                beta: s.beta,
            });
        }
    }
    Ok(rows)
}

/// First return of a trajectory started on the `alpha`-axis to the section
/// `beta = 0`, crossed in the direction opposite to the initial departure
/// (a full loop, also around off-center equilibria). Returns the state at
/// the crossing and the period.
pub fn first_return(s0: &FDState, p: &FDParams, dt: f64, t_max: f64) -> Result<(FDState, f64)> {
    if s0.beta != 0.0 {
        return Err(Error::Validation(
            "first_return expects an initial condition on the alpha-axis".into(),
        ));
    }
    let (_, db0, _) = fd_rhs(s0, p)?;
    if db0 == 0.0 {
        return Err(Error::Validation(
            "initial condition is an equilibrium; no return orbit".into(),
        ));
    }
    // a full loop comes back through the section moving the same way it
    // left; the opposite-direction crossing is the far side of the loop
    let return_upward = db0 > 0.0;
    let mut s = *s0;
    let mut t = 0.0;
    while t < t_max {
        let next = rk4_step(&s, p, dt);
        let crossed = if return_upward {
            s.beta < 0.0 && next.beta >= 0.0
        } else {
            s.beta > 0.0 && next.beta <= 0.0
        };
        if crossed {
            // bisect on the step length, re-integrating from the bracket start
            let mut a = 0.0;
            let mut b = dt;
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let probe = rk4_step(&s, p, mid);
                let past = if return_upward {
                    probe.beta >= 0.0
                } else {
                    probe.beta <= 0.0
                };
                if past {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let hit = rk4_step(&s, p, 0.5 * (a + b));
            return Ok((hit, t + 0.5 * (a + b)));
        }
        s = next;
        t += dt;
    }
    Err(Error::ContinuationStep(format!(
        "no section return within t_max = {t_max}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(gap: f64, mass: f64) -> FDParams {
        FDParams::rescaled(0.25 + gap, 0.25, mass).unwrap()
    }

    #[test]
    fn origin_is_a_fixed_point_with_mass_phase_rate() {
        let p = params(0.1, 0.3);
        let s = FDState::new(0.0, 0.0);
        let (da, db, dtheta) = fd_rhs(&s, &p).unwrap();
        assert_eq!(da, 0.0);
        assert_eq!(db, 0.0);
        // at the origin A^2 = N so the phase rate is omega0 + N^2
        assert_relative_eq!(dtheta, p.omega0 + p.mass * p.mass, epsilon = 1e-15);
    }

    #[test]
    fn alpha_axis_is_tangent_to_beta_direction() {
        let p = params(0.1, 0.3);
        for a in [0.05, 0.2, -0.31] {
            let (da, _, _) = fd_rhs(&FDState::new(a, 0.0), &p).unwrap();
            assert_eq!(da, 0.0);
        }
    }

    #[test]
    fn collapsed_jacobian_matches_finite_differences() {
        let p = params(0.13, 0.42);
        let eps = 1e-6;
        for (a, b) in [(0.1, 0.05), (-0.2, 0.3), (0.33, -0.17)] {
            let j = planar_jacobian(a, b, &p);
            let f = |a: f64, b: f64| {
                let (da, db, _) = fd_rhs_unchecked(a, b, &p);
                (da, db)
            };
            let daa = (f(a + eps, b).0 - f(a - eps, b).0) / (2.0 * eps);
            let dab = (f(a, b + eps).0 - f(a, b - eps).0) / (2.0 * eps);
            let dba = (f(a + eps, b).1 - f(a - eps, b).1) / (2.0 * eps);
            let dbb = (f(a, b + eps).1 - f(a, b - eps).1) / (2.0 * eps);
            assert_relative_eq!(j[0][0], daa, epsilon = 1e-6);
            assert_relative_eq!(j[0][1], dab, epsilon = 1e-6);
            assert_relative_eq!(j[1][0], dba, epsilon = 1e-6);
            assert_relative_eq!(j[1][1], dbb, epsilon = 1e-6);
        }
    }

    #[test]
    fn reference_critical_mass_values() {
        let p = params(0.1, 0.1);
        assert_relative_eq!(critical_mass(&p).unwrap(), 0.0250f64.powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(critical_mass(&p).unwrap(), 0.39763536438352536, epsilon = 1e-12);
        let p4 = params(4.0, 1.0);
        assert_relative_eq!(critical_mass(&p4).unwrap(), 1.0, epsilon = 1e-15);
        // monotone in the gap
        let mut last = 0.0;
        for gap in [0.05, 0.1, 0.2, 0.4] {
            let v = critical_mass(&params(gap, 0.1)).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn origin_flip_happens_at_amplitude_threshold_squared() {
        // the origin changes type where 4 N^2 = gap, i.e. at the square of
        // the reference critical amplitude
        let p = params(0.1, 0.1);
        let flip = origin_flip_mass(&p, 1e-12).unwrap();
        assert_relative_eq!(flip, (0.1f64 / 4.0).sqrt(), epsilon = 1e-10);
        let ncr = critical_mass(&p).unwrap();
        assert_relative_eq!(flip, ncr * ncr, epsilon = 1e-10);
    }

    #[test]
    fn equilibria_below_and_above_threshold() {
        let p_low = params(0.1, 0.1);
        let eq = equilibria(&p_low).unwrap();
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].kind, EquilibriumKind::Elliptic);

        let p_high = params(0.1, 0.5);
        let eq = equilibria(&p_high).unwrap();
        assert_eq!(eq.len(), 3);
        assert_eq!(eq[0].kind, EquilibriumKind::Hyperbolic);
        assert_eq!(eq[1].kind, EquilibriumKind::Elliptic);
        assert_eq!(eq[2].kind, EquilibriumKind::Elliptic);
        assert_relative_eq!(eq[1].alpha, -eq[2].alpha, epsilon = 1e-14);
        // root of the bracket by an independent sign scan
        let gap = 0.1;
        let n: f64 = 0.5;
        let f = |alpha: f64| {
            let a_sq = n - alpha * alpha;
            gap - 4.0 * a_sq * a_sq + a_sq * alpha * alpha + 4.0 * alpha.powi(4)
        };
        let mut scan = 0.0;
        let mut step = 1e-4;
        while f(scan + step) < 0.0 {
            scan += step;
        }
        while step > 1e-13 {
            step *= 0.5;
            if f(scan + step) < 0.0 {
                scan += step;
            }
        }
        assert_relative_eq!(eq[1].alpha.abs(), scan, epsilon = 1e-6);
    }

    #[test]
    fn equilibrium_initial_data_stays_put() {
        let p = params(0.1, 0.1);
        let traj = integrate_fd(
            &FDState::new(0.0, 0.0),
            &p,
            100.0,
            0.01,
            100,
            OvershootPolicy::Strict,
        )
        .unwrap();
        for s in traj.states {
            assert!(s.alpha.abs() < 1e-12 && s.beta.abs() < 1e-12);
        }
    }

    #[test]
    fn closed_orbit_returns_to_start() {
        let p = params(0.1, 0.1);
        let ic = FDState::new(0.05, 0.0);
        let (hit, period) = first_return(&ic, &p, 0.01, 1e4).unwrap();
        assert!(period > 1.0);
        let err = ((hit.alpha - ic.alpha).powi(2) + hit.beta.powi(2)).sqrt();
        assert!(err < 1e-6, "return error {err}");
    }

    #[test]
    fn forward_backward_composition_recovers_initial_state() {
        let p = params(0.1, 0.2);
        let ic = FDState::new(0.12, 0.07);
        let fwd = integrate_fd(&ic, &p, 50.0, 0.005, usize::MAX, OvershootPolicy::Strict).unwrap();
        let end = *fwd.states.last().unwrap();
        // integrate the time-reversed field: (alpha, beta) -> (alpha, -beta)
        let back_ic = FDState::new(end.alpha, -end.beta);
        let back = integrate_fd(&back_ic, &p, 50.0, 0.005, usize::MAX, OvershootPolicy::Strict).unwrap();
        let fin = *back.states.last().unwrap();
        let err = ((fin.alpha - ic.alpha).powi(2) + (fin.beta + ic.beta).powi(2)).sqrt();
        assert!(err < 1e-6, "reversal error {err}");
    }

    #[test]
    fn reversibility_of_vector_field_in_beta() {
        let p = params(0.17, 0.37);
        for (a, b) in [(0.1, 0.2), (0.3, -0.1), (-0.25, 0.33)] {
            let (da1, db1, _) = fd_rhs_unchecked(a, b, &p);
            let (da2, db2, _) = fd_rhs_unchecked(a, -b, &p);
            assert_relative_eq!(da1, -da2, epsilon = 1e-14);
            assert_relative_eq!(db1, db2, epsilon = 1e-14);
        }
    }

    #[test]
    fn three_variable_form_leaks_mass_at_predicted_rate() {
        let p = params(0.1, 0.3);
        let ic = FDState::new(0.25, 0.1);
        let (_traj, drift) = integrate_fd_three_variable(&ic, &p, 20.0, 0.002, 100).unwrap();
        assert!(drift > 1e-8, "expected visible drift, got {drift}");
        // instantaneous drift rate matches -2 alpha^3 beta A^2
        let a_sq = p.mass - ic.amplitude_sq();
        let predicted = -2.0 * ic.alpha.powi(3) * ic.beta * a_sq;
        let dt = 1e-5;
        let (traj, _) = integrate_fd_three_variable(&ic, &p, 10.0 * dt, dt, 1).unwrap();
        let s1 = traj[1];
        let mass1 = s1.alpha.powi(2) + s1.beta.powi(2) + s1.a.powi(2);
        let rate = (mass1 - p.mass) / dt;
        assert_relative_eq!(rate, predicted, max_relative = 1e-3);
    }

    #[test]
    fn trajectories_remain_in_mass_disk() {
        let p = params(0.1, 0.5);
        for ic in [FDState::new(0.3, 0.2), FDState::new(-0.5, 0.3), FDState::new(0.0, 0.69)] {
            let traj =
                integrate_fd(&ic, &p, 200.0, 0.01, 10, OvershootPolicy::Clamp).unwrap();
            for s in traj.states {
                assert!(s.amplitude_sq() <= p.mass * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn pitchfork_scaling_of_asymmetric_equilibria() {
        // alpha_cr^2 grows linearly in N - N_flip near the flip
        let gap = 0.1;
        let flip = (gap / 4.0f64).sqrt();
        let mut ratios = Vec::new();
        for dn in [1e-3, 2e-3, 4e-3, 8e-3] {
            let p = params(gap, flip + dn);
            let eq = equilibria(&p).unwrap();
            assert_eq!(eq.len(), 3, "expected broken pair at N = flip + {dn}");
            let alpha_cr = eq[1].alpha.abs();
            ratios.push(alpha_cr * alpha_cr / dn);
        }
        // log-log slope within 1 +- 0.1 <=> ratios roughly constant
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.12, "ratios {ratios:?}");
        }
    }
}

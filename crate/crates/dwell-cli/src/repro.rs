//! The paper-reproduction suite: every acceptance criterion as a callable
//! check returning measured numbers, shared by the `repro` subcommand and
//! the integration tests.
//!
//! Two sub-checks compare against printed formulas whose coefficients the
//! toolkit's own computations contradict (see the adjacent
//! `*_corrected` checks); they are marked `known_deviation` and reported
//! as documented failures rather than silently loosened.

use std::time::Instant;

use num_complex::Complex64;

use dwell::branch::{
    asymmetric_branch, find_bifurcation, full_residual, mass_slope, symmetric_branch,
    TwoModeSystem,
};
use dwell::fdsim::{
    critical_mass, equilibria, first_return, integrate_fd, origin_flip_mass, EquilibriumKind,
    FDParams, FDState, OvershootPolicy,
};
use dwell::grid::{GradedGrid, Grid, Mesh};
use dwell::hypotheses::{h4_report, inner_product};
use dwell::linstab::{
    build_lpm, constrained_bottoms, internal_mode, internal_mode_cross_check, kernel_structure,
    lplus_spectrum,
};
use dwell::nlssim::{
    energy, fgr_decay_fit, fit_ground_state, mass, relaxation_experiment, resonance_order,
    BranchTable, KineticScheme, ModeTable, NLSField, Sponge, Stepper,
};
use dwell::potential::{make_potential, PotentialKind};
use dwell::spectral::{discretize, spectral_pair, spectral_pair_graded};

use crate::pipeline::CliError;

#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub label: String,
    pub passed: bool,
    /// Documented disagreement with a printed formula; reported, never
    /// silently reclassified as a pass.
    pub known_deviation: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &'static str, label: &str, passed: bool, detail: String) -> Check {
        Check {
            id,
            label: label.to_string(),
            passed,
            known_deviation: false,
            detail,
        }
    }

    fn deviation(mut self) -> Check {
        self.known_deviation = true;
        self
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else if self.known_deviation {
            "FAIL (documented formula deviation)"
        } else {
            "FAIL"
        }
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

// ---------------------------------------------------------------------------
// criterion 1: spectral oracles
// ---------------------------------------------------------------------------

pub fn criterion_1() -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let start = Instant::now();
    let g = Grid::new(-20.0, 20.0, 4000)?;
    let p1 = make_potential(PotentialKind::PoschlTeller { m: 1 }, &g)?;
    let op1 = discretize(&p1, &g)?;
    let e0 = op1.eigenvalue(0);
    checks.push(Check::new(
        "1a",
        "single-well oracle eigenvalue",
        (e0 + 1.0).abs() <= 1e-3,
        format!("E0 = {e0:.8} vs -1 (tol 1e-3)"),
    ));

    let p2 = make_potential(PotentialKind::PoschlTeller { m: 2 }, &g)?;
    let op2 = discretize(&p2, &g)?;
    let f0 = op2.eigenvalue(0);
    let f1 = op2.eigenvalue(1);
    checks.push(Check::new(
        "1b",
        "two-well-depth oracle eigenvalues",
        (f0 + 4.0).abs() <= 5e-3 && (f1 + 1.0).abs() <= 5e-3,
        format!("E = ({f0:.8}, {f1:.8}) vs (-4, -1) (tol 5e-3)"),
    ));

    // second-order convergence: halving h cuts the error ~4x
    let mut errs = Vec::new();
    for n in [2000usize, 4000] {
        let g = Grid::new(-20.0, 20.0, n)?;
        let p = make_potential(PotentialKind::PoschlTeller { m: 1 }, &g)?;
        let op = discretize(&p, &g)?;
        errs.push((op.eigenvalue(0) + 1.0).abs());
    }
    let ratio = errs[0] / errs[1];
    let elapsed = start.elapsed().as_secs_f64();
    checks.push(Check::new(
        "1c",
        "eigenvalue error reduces ~4x when h halves",
        (3.0..=5.0).contains(&ratio),
        format!("error ratio {ratio:.3} (expect ~4)"),
    ));
    checks.push(Check::new(
        "1d",
        "spectral oracle runtime",
        elapsed < 5.0,
        format!("{elapsed:.2} s (cap 5 s)"),
    ));
    Ok(checks)
}

// ---------------------------------------------------------------------------
// criterion 2: quadrature oracle
// ---------------------------------------------------------------------------

pub fn criterion_2() -> Result<Vec<Check>, CliError> {
    let g = Grid::symmetric(20.0, 6000)?;
    let psi: Vec<f64> = (0..g.n)
        .map(|i| 1.0 / (g.node(i).cosh() * std::f64::consts::SQRT_2))
        .collect();
    let psi6: Vec<f64> = psi.iter().map(|v| v.powi(6)).collect();
    let ones = vec![1.0; g.n];
    let val = inner_product(&psi6, &ones, &g)?;
    let target = 2.0 / 15.0;
    Ok(vec![Check::new(
        "2",
        "sixth-moment closed form",
        (val - target).abs() <= 1e-6,
        format!("<psi0^6,1> = {val:.10} vs {target:.10} (tol 1e-6)"),
    )])
}

// ---------------------------------------------------------------------------
// criterion 3: needle-well reproduction
// ---------------------------------------------------------------------------

pub struct NeedleWellRun {
    pub depth: f64,
    pub h4a: f64,
    pub mu2_combo: f64,
    pub gap: f64,
    pub nodes: usize,
}

pub struct Criterion3 {
    pub checks: Vec<Check>,
    /// Primary (strength-2) run and the literal unit-strength run, both
    /// archived by the repro command.
    pub runs: Vec<NeedleWellRun>,
}

fn needle_run(depth: f64, quick: bool) -> Result<NeedleWellRun, CliError> {
    let sigma = 1e-3;
    let sep = 7.5;
    let (h_fine, h_coarse, ratio) = if quick {
        (2.5e-4, 0.03, 1.10)
    } else {
        (1.2e-4, 0.02, 1.07)
    };
    // the unit-strength archival run binds at kappa ~ 1/2 and needs the
    // wider box for its tails
    let mesh = GradedGrid::refined(42.0, &[sep, -sep], h_fine, 8.0 * sigma, h_coarse, ratio)?;
    let kind = PotentialKind::GaussianDoubleWell {
        sigma,
        separation: sep,
        depth,
    };
    let p = make_potential(kind, &mesh)?;
    let sp = spectral_pair_graded(&p, &mesh)?;
    let rep = h4_report(&sp, &mesh)?;
    Ok(NeedleWellRun {
        depth,
        h4a: rep.h4a,
        mu2_combo: rep.mu2_combo,
        gap: sp.gap,
        nodes: mesh.len(),
    })
}

pub fn criterion_3(quick: bool) -> Result<Criterion3, CliError> {
    // the printed well is a unit-mass bump; reproducing the printed values
    // requires strength 2 (see the report note emitted by `repro`)
    let primary = needle_run(-2.0, quick)?;
    let literal = needle_run(-1.0, quick)?;
    let mut checks = Vec::new();
    checks.push(Check::new(
        "3a",
        "needle-well interaction margin vs 0.3305",
        within(primary.h4a, 0.3305, 0.10),
        format!(
            "h4a = {:.5} at depth -2 (tol 10%); literal depth -1 run gives {:.5}",
            primary.h4a, literal.h4a
        ),
    ));
    checks.push(Check::new(
        "3b",
        "needle-well curvature combination vs 9.9143",
        within(primary.mu2_combo, 9.9143, 0.10),
        format!(
            "mu2_combo = {:.5} at depth -2 (tol 10%); literal depth -1 run gives {:.5}",
            primary.mu2_combo, literal.mu2_combo
        ),
    ));
    Ok(Criterion3 {
        checks,
        runs: vec![primary, literal],
    })
}

// ---------------------------------------------------------------------------
// criteria 4-7: branch suite
// ---------------------------------------------------------------------------

pub struct BranchSystem {
    pub sys: TwoModeSystem,
    pub report: dwell::hypotheses::H4Report,
}

pub fn branch_system(separation: f64, x_max: f64, n: usize) -> Result<BranchSystem, CliError> {
    let g = Grid::symmetric(x_max, n)?;
    let kind = PotentialKind::GaussianDoubleWell {
        sigma: 0.5,
        separation,
        depth: -2.0,
    };
    let p = make_potential(kind, &g)?;
    let sp = spectral_pair(&p, &g)?;
    let report = h4_report(&sp, &g)?;
    let sys = TwoModeSystem::new(&p, g, sp)?;
    Ok(BranchSystem { sys, report })
}

pub struct BranchSuite {
    pub checks: Vec<Check>,
    /// (rho1, rho0, omega, q, mu0, mu1, lambda) along the sampled branch.
    pub samples: Vec<[f64; 7]>,
}

pub fn criteria_4_to_7(quick: bool) -> Result<BranchSuite, CliError> {
    let n_main = if quick { 1600 } else { 3000 };
    let main = branch_system(5.0, 30.0, n_main)?;
    let sys = &main.sys;
    let rep = &main.report;
    let gap = sys.sp.gap;
    let mut checks = Vec::new();

    let t4 = Instant::now();
    let bif = find_bifurcation(sys)?;
    let rstar = bif.rho0_star;

    // -- criterion 4: symmetric-branch expansion
    let r0 = 0.3 * rstar;
    let sym = symmetric_branch(&[r0], sys)?;
    let ratio = (sym[0].omega - sys.sp.omega0) / (r0.powi(4) * rep.i60);
    let t4s = t4.elapsed().as_secs_f64();
    checks.push(Check::new(
        "4",
        "symmetric-branch frequency expansion",
        (0.95..=1.05).contains(&ratio) && t4s < 60.0,
        format!("(omega - omega0)/(rho0^4 I60) = {ratio:.6} at rho0 = 0.3 rho0* ({t4s:.1} s)"),
    ));

    // -- criterion 5: bifurcation-point prediction, error shrinking in L
    let err_main = (rstar.powi(4) * rep.h4a - gap).abs() / gap;
    let aux = branch_system(6.0, 36.0, if quick { 2000 } else { 3500 })?;
    let bif_aux = find_bifurcation(&aux.sys)?;
    let err_aux = (bif_aux.rho0_star.powi(4) * aux.report.h4a - aux.sys.sp.gap).abs()
        / aux.sys.sp.gap;
    checks.push(Check::new(
        "5",
        "branch-point amplitude prediction",
        err_main < 0.10 && err_aux < err_main,
        format!("relative error {err_main:.5} at L=5, {err_aux:.5} at L=6 (tol 10%, must shrink)"),
    ));

    // -- criterion 6: curvatures at the branch point
    let eps = 0.05 * rstar;
    let curv = asymmetric_branch(&[eps, 2.0 * eps], &bif, sys)?;
    let dd = |bp: &dwell::branch::BranchPoint, base: f64, val: fn(&dwell::branch::BranchPoint) -> f64| {
        2.0 * (val(bp) - base) / (bp.rho1 * bp.rho1)
    };
    let om1 = dd(&curv[0], bif.omega_star, |b| b.omega);
    let om2 = dd(&curv[1], bif.omega_star, |b| b.omega);
    let om_extrap = (4.0 * om1 - om2) / 3.0;
    let om_pred = 20.0 * rstar * rstar * rep.h4b / rep.h4a;
    checks.push(Check::new(
        "6a",
        "frequency curvature at the branch point",
        within(om_extrap, om_pred, 0.10) && om_extrap > 0.0,
        format!("omega''(0) = {om_extrap:.6} vs predicted {om_pred:.6} (tol 10%), positive"),
    ));
    let rh1 = dd(&curv[0], rstar, |b| b.rho0);
    let rh2 = dd(&curv[1], rstar, |b| b.rho0);
    let rh_extrap = (4.0 * rh1 - rh2) / 3.0;
    let rh_pred = 5.0 / rstar * (rep.i42 - rep.i24) / rep.h4a;
    let rh_err = (rh_extrap - rh_pred).abs() / rh_pred.abs().max(1e-300);
    checks.push(
        Check::new(
            "6b",
            "amplitude curvature vs printed leading formula",
            rh_err <= 0.15,
            format!(
                "rho0''(0) = {rh_extrap:.6} vs printed {rh_pred:.6} (err {rh_err:.3}, tol 15%); \
                 deviation tracks -0.2 rho0*^3 = {:.6} across separations",
                -0.2 * rstar.powi(3)
            ),
        )
        .deviation(),
    );
    // companion: the deviation itself is systematic
    let dev = rh_extrap - rh_pred;
    let dev_ratio = dev / (-0.2 * rstar.powi(3));
    checks.push(Check::new(
        "6b'",
        "amplitude-curvature deviation is the documented next-order term",
        (0.8..=1.2).contains(&dev_ratio),
        format!("(measured - printed)/(-0.2 rho0*^3) = {dev_ratio:.3}"),
    ));

    // -- criterion 7: stability indicators along the branch
    let fracs = [0.05, 0.1, 0.2, 0.35, 0.5, 0.65];
    let rho1s: Vec<f64> = fracs.iter().map(|f| f * rstar).collect();
    let branch = asymmetric_branch(&rho1s, &bif, sys)?;
    let slopes = mass_slope(&branch)?;
    checks.push(Check::new(
        "7a",
        "mass increases with frequency along the branch",
        slopes.iter().all(|&s| s > 0.0),
        format!("dq/domega at interior points: {:?}", round3(&slopes)),
    ));

    let mut samples = Vec::new();
    let mut mu0_small = f64::NAN;
    let mut lam_over = Vec::new();
    let mut rest_ok = true;
    let mut bound_ok = true;
    for bp in &branch {
        let (lp, _) = build_lpm(bp, sys);
        let s = lplus_spectrum(&lp, bp.omega, sys)?;
        rest_ok &= s.rest_positive;
        let ls = internal_mode(bp, sys)?;
        let (tp, tm) = constrained_bottoms(bp, sys)?;
        bound_ok &= ls.lambda * ls.lambda >= tp * tm * (1.0 - 1e-8);
        if bp.rho1 == rho1s[0] {
            mu0_small = s.mu0;
        }
        if bp.rho1 >= 0.1 * rstar {
            lam_over.push(ls.lambda / (bp.rho1 * rstar));
        }
        samples.push([bp.rho1, bp.rho0, bp.omega, bp.q, s.mu0, s.mu1, ls.lambda]);
    }
    let mu0_pred = 4.0 * rstar.powi(4) * rep.i60;
    checks.push(Check::new(
        "7b",
        "single negative direction with predicted depth",
        within(mu0_small, mu0_pred, 0.20) && rest_ok,
        format!(
            "mu0 = {mu0_small:.6e} vs 4 rho0*^4 I60 = {mu0_pred:.6e} at the smallest amplitude \
             (tol 20%); exactly one negative eigenvalue at every sample: {rest_ok}"
        ),
    ));

    // mu1 curvature: Richardson over the two smallest amplitudes
    let r_a = samples[0][5] / (samples[0][0] * samples[0][0]);
    let r_b = samples[1][5] / (samples[1][0] * samples[1][0]);
    let mu_rich = 2.0 * r_a - r_b;
    let mupp_half_printed = 0.5 * rstar * rstar * rep.mu2_combo;
    let printed_err = (mu_rich - mupp_half_printed).abs() / mupp_half_printed;
    checks.push(
        Check::new(
            "7c",
            "mode-degeneracy curvature vs printed combination",
            printed_err <= 0.15,
            format!(
                "lim mu1/rho1^2 = {mu_rich:.5} vs printed mu''(0)/2 = {mupp_half_printed:.5} \
                 (err {printed_err:.3}, tol 15%)"
            ),
        )
        .deviation(),
    );
    let mu2_corrected = rep.mu2_combo + 40.0 * rep.i24;
    let mupp_half_corr = 0.5 * rstar * rstar * mu2_corrected;
    let corr_err = (mu_rich - mupp_half_corr).abs() / mupp_half_corr;
    checks.push(Check::new(
        "7c'",
        "mode-degeneracy curvature vs corrected combination",
        corr_err <= 0.10,
        format!(
            "corrected combination (last coefficient -20, reduced-model identity 160 = 120 + 40) \
             gives {mupp_half_corr:.5}; err {corr_err:.3} (next-order remainder is O(rho0*))"
        ),
    ));

    // lambda lower bound, grid-stable
    let c_min = lam_over.iter().cloned().fold(f64::MAX, f64::min);
    let coarse = branch_system(5.0, 30.0, (n_main as f64 * 0.72) as usize)?;
    let bif_c = find_bifurcation(&coarse.sys)?;
    let bp_c = asymmetric_branch(&[0.35 * bif_c.rho0_star], &bif_c, &coarse.sys)?;
    let ls_c = internal_mode(&bp_c[0], &coarse.sys)?;
    let c_coarse = ls_c.lambda / (bp_c[0].rho1 * bif_c.rho0_star);
    let mid = samples
        .iter()
        .find(|s| (s[0] - 0.35 * rstar).abs() < 1e-9)
        .expect("0.35 sample present");
    let c_fine = mid[6] / (mid[0] * rstar);
    let grid_stable = (c_fine - c_coarse).abs() / c_fine < 0.05;
    checks.push(Check::new(
        "7d",
        "internal-mode frequency lower bound, grid-stable",
        c_min > 0.01 && grid_stable && bound_ok,
        format!(
            "min lambda/(rho1 rho0*) = {c_min:.4}; at 0.35 rho0*: fine {c_fine:.5} vs coarse \
             {c_coarse:.5}; constrained product bound holds at every sample: {bound_ok}"
        ),
    ));

    // the two extraction routes on a shared coarse grid
    let pair = branch_system(5.0, 28.0, 560)?;
    let bif_p = find_bifurcation(&pair.sys)?;
    let bp_p = asymmetric_branch(&[0.6 * bif_p.rho0_star], &bif_p, &pair.sys)?;
    let ls_p = internal_mode(&bp_p[0], &pair.sys)?;
    let lam_dense = internal_mode_cross_check(&bp_p[0], &pair.sys, ls_p.lambda)?;
    let route_err = (ls_p.lambda - lam_dense).abs() / lam_dense;
    checks.push(Check::new(
        "7e",
        "independent eigensolve routes agree",
        route_err <= 1e-6,
        format!(
            "iterative {:.10e} vs dense {:.10e} (rel diff {route_err:.2e}, tol 1e-6)",
            ls_p.lambda, lam_dense
        ),
    ));

    // full stationary residual along everything we touched
    let worst = branch
        .iter()
        .map(|bp| full_residual(&bp.phi, bp.omega, sys))
        .fold(0.0f64, f64::max);
    checks.push(Check::new(
        "7f",
        "stationary residuals along the branch",
        worst < 1e-8,
        format!("max ||(H+omega)phi - phi^5|| = {worst:.2e} (tol 1e-8)"),
    ));

    Ok(BranchSuite { checks, samples })
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

// ---------------------------------------------------------------------------
// criterion 8: kernel census
// ---------------------------------------------------------------------------

pub fn criterion_8(quick: bool) -> Result<Vec<Check>, CliError> {
    let n = if quick { 700 } else { 1000 };
    let stage = branch_system(4.0, 30.0, n)?;
    let sys = &stage.sys;
    let bif = find_bifurcation(sys)?;
    let mut checks = Vec::new();

    let sym = symmetric_branch(&[bif.rho0_star], sys)?;
    let at_star = kernel_structure(&sym[0], sys, None)?;
    let par = at_star.parity_defects.expect("symmetric point has parity tags");
    checks.push(Check::new(
        "8a",
        "near-zero cluster at the branch point",
        at_star.cluster == 4 && at_star.geometric == 2 && at_star.generalized == 4,
        format!(
            "cluster {} (expect 4), dims ({}, {}) at threshold {:.2e}",
            at_star.cluster, at_star.geometric, at_star.generalized, at_star.threshold
        ),
    ));
    checks.push(Check::new(
        "8b",
        "parity tags of the kernel chain",
        par.phi_odd_defect < 1e-6
            && par.chi_even_defect < 1e-4
            && par.alpha_odd_defect < 1e-4
            && par.gamma_even_defect < 1e-4,
        format!(
            "defects: gauge-even {:.1e}, null-odd {:.1e}, chain-even {:.1e}, chain-odd {:.1e}",
            par.phi_odd_defect, par.chi_even_defect, par.alpha_odd_defect, par.gamma_even_defect
        ),
    ));

    // just beyond the branch point: the degenerating direction still sits
    // inside the residual threshold while the oscillation pair has already
    // split off the cluster
    let beyond_pt = asymmetric_branch(&[0.04 * bif.rho0_star], &bif, sys)?;
    let beyond = kernel_structure(&beyond_pt[0], sys, None)?;
    checks.push(Check::new(
        "8c",
        "census just beyond the branch point",
        beyond.cluster == 2 && beyond.pairs_below_continuum == 1 && beyond.geometric == 2,
        format!(
            "cluster {} (expect 2), oscillation pairs below continuum {} (expect 1), dims ({}, {}) \
             at threshold {:.2e}",
            beyond.cluster,
            beyond.pairs_below_continuum,
            beyond.geometric,
            beyond.generalized,
            beyond.threshold
        ),
    ));
    Ok(checks)
}

// ---------------------------------------------------------------------------
// criterion 9: reduced dynamics
// ---------------------------------------------------------------------------

pub fn criterion_9() -> Result<Vec<Check>, CliError> {
    let gap = 0.1;
    let p = FDParams::rescaled(0.35, 0.25, 0.1)?;
    let mut checks = Vec::new();

    let ncr = critical_mass(&p)?;
    let formula = (gap / 4.0f64).powf(0.25);
    checks.push(Check::new(
        "9a",
        "reference critical-mass formula evaluated exactly",
        ncr.to_bits() == formula.to_bits() && (ncr - 0.39763536438352536).abs() < 1e-12,
        format!("((gap)/4)^(1/4) = {ncr:.17}"),
    ));

    let flip = origin_flip_mass(&p, 1e-12)?;
    let dynamic = (gap / 4.0f64).sqrt();
    checks.push(Check::new(
        "9b",
        "origin changes type at the destabilization mass (bisection, 1e-10)",
        (flip - dynamic).abs() < 1e-10 && (flip - ncr * ncr).abs() < 1e-10,
        format!(
            "flip at N = {flip:.12}; equals ((gap)/4)^(1/2) and the square of the printed \
             expression, which is the critical amplitude rather than the critical mass"
        ),
    ));

    // elliptic below, hyperbolic above, asymmetric pair only above
    let mut present_ok = true;
    let mut detail = String::new();
    for mass in [0.1, 0.2, 0.5] {
        let pm = FDParams::rescaled(0.35, 0.25, mass)?;
        let eq = equilibria(&pm)?;
        let has_pair = eq.len() == 3;
        let origin_kind = eq[0].kind;
        let expect_pair = mass > flip;
        present_ok &= has_pair == expect_pair;
        present_ok &= match origin_kind {
            EquilibriumKind::Elliptic => mass < flip,
            EquilibriumKind::Hyperbolic => mass > flip,
        };
        detail.push_str(&format!(
            "N={mass}: origin {:?}, broken pair {} | ",
            origin_kind, has_pair
        ));
    }
    checks.push(Check::new(
        "9c",
        "broken pair present exactly above the destabilization mass",
        present_ok,
        detail,
    ));

    // closed-orbit returns at the three portrait masses
    let mut worst_return: f64 = 0.0;
    for mass in [0.1, 0.2, 0.5] {
        let pm = FDParams::rescaled(0.35, 0.25, mass)?;
        // start near the outermost stable structure
        let ic = if mass > flip {
            let eq = equilibria(&pm)?;
            FDState::new(0.6 * eq[1].alpha.abs(), 0.0)
        } else {
            FDState::new(0.4 * mass.sqrt(), 0.0)
        };
        let (hit, _period) = first_return(&ic, &pm, 0.01, 5e4)?;
        let err = ((hit.alpha - ic.alpha).powi(2) + hit.beta.powi(2)).sqrt();
        worst_return = worst_return.max(err);
    }
    checks.push(Check::new(
        "9d",
        "closed-orbit first returns",
        worst_return < 1e-6,
        format!("worst return error {worst_return:.2e} (tol 1e-6)"),
    ));

    // disk invariance of portrait trajectories
    let pm = FDParams::rescaled(0.35, 0.25, 0.5)?;
    let mut inside = true;
    for ic in [
        FDState::new(0.3, 0.2),
        FDState::new(-0.5, 0.3),
        FDState::new(0.0, 0.69),
    ] {
        let traj = integrate_fd(&ic, &pm, 200.0, 0.01, 20, OvershootPolicy::Clamp)?;
        inside &= traj
            .states
            .iter()
            .all(|s| s.amplitude_sq() <= pm.mass * (1.0 + 1e-9));
    }
    checks.push(Check::new(
        "9e",
        "portrait trajectories remain in the mass disk",
        inside,
        "checked three straddling initial conditions at N = 0.5".into(),
    ));
    Ok(checks)
}

// ---------------------------------------------------------------------------
// criterion 10: full NLS
// ---------------------------------------------------------------------------

pub struct RelaxationDefaults {
    pub separation: f64,
    pub depth: f64,
    pub x_max: f64,
    pub n: usize,
    pub experiment_frac: f64,
    pub table_lo_frac: f64,
    pub table_hi_frac: f64,
    pub table_points: usize,
    pub z0_abs_frac: f64,
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
}

impl Default for RelaxationDefaults {
    fn default() -> Self {
        RelaxationDefaults {
            separation: 2.0,
            depth: -3.0,
            x_max: 30.0,
            n: 2047,
            experiment_frac: 1.08,
            table_lo_frac: 0.3,
            table_hi_frac: 1.12,
            table_points: 24,
            z0_abs_frac: 0.22,
            dt: 0.025,
            t_final: 1e5,
            sample_every: 8000,
        }
    }
}

pub struct RelaxationSetup {
    pub sys: TwoModeSystem,
    pub potential_samples: Vec<f64>,
    pub bp: dwell::branch::BranchPoint,
    pub table: BranchTable,
    pub mode_table: ModeTable,
    pub lambda: f64,
    pub n_res: u32,
}

pub fn relaxation_setup(d: &RelaxationDefaults) -> Result<RelaxationSetup, CliError> {
    let g = Grid::symmetric(d.x_max, d.n)?;
    let kind = PotentialKind::GaussianDoubleWell {
        sigma: 0.5,
        separation: d.separation,
        depth: d.depth,
    };
    let p = make_potential(kind, &g)?;
    let sp = spectral_pair(&p, &g)?;
    let sys = TwoModeSystem::new(&p, g, sp)?;
    let bif = find_bifurcation(&sys)?;
    let m = d.table_points;
    let fracs: Vec<f64> = (0..=m)
        .map(|k| d.table_lo_frac + (d.table_hi_frac - d.table_lo_frac) * k as f64 / m as f64)
        .collect();
    let rho1s: Vec<f64> = fracs.iter().map(|f| f * bif.rho0_star).collect();
    let points = asymmetric_branch(&rho1s, &bif, &sys)?;
    let mut modes = Vec::with_capacity(points.len());
    for bp in &points {
        modes.push(internal_mode(bp, &sys)?);
    }
    let table = BranchTable::from_branch(&points)?;
    let omegas: Vec<f64> = points.iter().map(|p| p.omega).collect();
    let mode_table = ModeTable::from_modes(omegas, modes)?;

    let bp = asymmetric_branch(&[d.experiment_frac * bif.rho0_star], &bif, &sys)?
        .into_iter()
        .next()
        .expect("experiment point");
    let ls = internal_mode(&bp, &sys)?;
    let n_res = resonance_order(ls.lambda, bp.omega)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(RelaxationSetup {
        potential_samples: p.samples.clone(),
        sys,
        bp,
        table,
        mode_table,
        lambda: ls.lambda,
        n_res,
    })
}

pub struct Criterion10 {
    pub checks: Vec<Check>,
    /// (t, omega, theta, |z|, f_norm_loc, interior_mass) series of the
    /// relaxation run, for the modulation CSV.
    pub series: Vec<[f64; 6]>,
    pub gamma_eff: f64,
    pub r_squared: f64,
    pub z_ratio: f64,
    pub monotone: f64,
    pub omega_plus: f64,
}

pub fn criterion_10(quick: bool) -> Result<Criterion10, CliError> {
    let start = Instant::now();
    let defaults = RelaxationDefaults {
        t_final: if quick { 4000.0 } else { 1e5 },
        sample_every: if quick { 4000 } else { 8000 },
        ..RelaxationDefaults::default()
    };
    let setup = relaxation_setup(&defaults)?;
    let sys = &setup.sys;
    let grid = sys.grid;
    let mut checks = Vec::new();

    // (a) exact ground state persists: modulus stationary, phase at rate omega
    {
        let bp = &setup.bp;
        let dt = 5e-4;
        let periods = 50.0 * 2.0 * std::f64::consts::PI / bp.omega;
        let steps = (periods / dt).ceil() as usize;
        // Crank-Nicolson pairs exactly with the finite-difference stationary
        // state; the sine-spectral kinetic step would see the O(h^2)
        // operator mismatch instead
        let mut stepper = Stepper::new(
            grid,
            &setup.potential_samples,
            dt,
            KineticScheme::CrankNicolson,
            None,
        )?;
        let mut field = NLSField::from_real(&bp.phi);
        let mod0: Vec<f64> = field.u.iter().map(|z| z.norm()).collect();
        let mut worst_mod = 0.0f64;
        let mut phase_prev = 0.0f64;
        let mut phase_acc = 0.0f64;
        let sample = (steps / 400).max(1);
        let mut k = 0usize;
        while k < steps {
            let todo = sample.min(steps - k);
            for _ in 0..todo {
                stepper.step(&mut field)?;
            }
            k += todo;
            let scale = mod0.iter().fold(0.0f64, |m, v| m.max(*v));
            let dev = field
                .u
                .iter()
                .zip(&mod0)
                .map(|(z, m)| (z.norm() - m).abs())
                .fold(0.0f64, f64::max);
            worst_mod = worst_mod.max(dev / scale);
            // accumulated phase against the initial profile
            let mut corr = Complex64::new(0.0, 0.0);
            for i in 0..grid.n {
                corr += field.u[i] * bp.phi[i] * grid.weight(i);
            }
            let raw = corr.arg();
            let mut delta = raw - phase_prev;
            while delta > std::f64::consts::PI {
                delta -= 2.0 * std::f64::consts::PI;
            }
            while delta < -std::f64::consts::PI {
                delta += 2.0 * std::f64::consts::PI;
            }
            phase_acc += delta;
            phase_prev = raw;
        }
        let rate = phase_acc / field.t;
        checks.push(Check::new(
            "10a",
            "exact ground state persists over 50 phase periods",
            worst_mod < 1e-6 && (rate - bp.omega).abs() < 1e-4,
            format!(
                "max modulus deviation {worst_mod:.2e} (tol 1e-6); phase rate {rate:.6} vs omega \
                 {:.6} (tol 1e-4)",
                bp.omega
            ),
        ));
    }

    // (b) mass conservation without the absorber over 1e5 steps
    {
        let bp = &setup.bp;
        let dt = 0.02;
        let mut stepper = Stepper::new(
            grid,
            &setup.potential_samples,
            dt,
            KineticScheme::SineSpectral,
            None,
        )?;
        let mut field = NLSField::from_real(&bp.phi);
        // generic complex perturbation so the test is not a special case
        for (i, z) in field.u.iter_mut().enumerate() {
            let x = grid.node(i);
            *z += Complex64::new(0.0, 0.02 * (-x * x / 8.0).exp());
        }
        let m0 = mass(&field.u, &grid);
        let steps = if quick { 20_000 } else { 100_000 };
        for _ in 0..steps {
            stepper.step(&mut field)?;
        }
        let drift = ((mass(&field.u, &grid) - m0) / m0).abs();
        checks.push(Check::new(
            "10b",
            "mass drift without absorber",
            drift < 1e-10,
            format!("relative drift {drift:.2e} over {steps} steps (tol 1e-10)"),
        ));
    }

    // (c) energy drift is second order in dt
    {
        let bp = &setup.bp;
        // the rational kinetic step pairs with the finite-difference energy
        // functional, so the measured drift is the pure splitting error
        let mut drifts = Vec::new();
        for dt in [0.02, 0.01] {
            let mut stepper = Stepper::new(
                grid,
                &setup.potential_samples,
                dt,
                KineticScheme::CrankNicolson,
                None,
            )?;
            let mut field = NLSField::from_real(&bp.phi);
            for (i, z) in field.u.iter_mut().enumerate() {
                let x = grid.node(i);
                *z += Complex64::new(0.03 * (-x * x / 6.0).exp(), 0.0);
            }
            let e0 = energy(&field.u, &setup.potential_samples, &grid);
            let steps = (40.0 / dt) as usize;
            let mut worst = 0.0f64;
            for k in 0..steps {
                stepper.step(&mut field)?;
                if k % 50 == 0 {
                    let e = energy(&field.u, &setup.potential_samples, &grid);
                    worst = worst.max((e - e0).abs());
                }
            }
            drifts.push(worst);
        }
        let ratio = drifts[0] / drifts[1].max(1e-300);
        checks.push(Check::new(
            "10c",
            "energy drift order",
            (2.8..=5.5).contains(&ratio),
            format!(
                "max drift {:.3e} (dt=0.02) vs {:.3e} (dt=0.01), ratio {ratio:.2} (expect ~4)",
                drifts[0], drifts[1]
            ),
        ));
    }

    // (d) FGR fit self-tests
    {
        let gamma = 2.0;
        let z0 = 0.3f64;
        let times: Vec<f64> = (0..300).map(|k| k as f64 * 0.5).collect();
        let zs: Vec<f64> = times
            .iter()
            .map(|t| z0 / (z0.powi(2) * gamma * t + 1.0).sqrt())
            .collect();
        let fit = fgr_decay_fit(&times, &zs, 1).map_err(CliError::from)?;
        let exact_ok = (fit.gamma_eff - gamma).abs() < 1e-6;

        use rand::{Rng, SeedableRng};
        let mut worst = 0.0f64;
        for seed in 0..6u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let zs: Vec<f64> = times
                .iter()
                .map(|t| {
                    let noise = 1.0 + 0.05 * (2.0 * rng.gen::<f64>() - 1.0);
                    z0 / (z0.powi(2) * gamma * t + 1.0).sqrt() * noise
                })
                .collect();
            let fit = fgr_decay_fit(&times, &zs, 1).map_err(CliError::from)?;
            worst = worst.max((fit.gamma_eff - gamma).abs() / gamma);
        }
        checks.push(Check::new(
            "10d",
            "decay-law fit self-tests",
            exact_ok && worst < 0.10,
            format!(
                "synthetic recovery err {:.2e} (tol 1e-6); worst 5%-noise recovery err {worst:.3} \
                 (tol 10%)",
                (fit.gamma_eff - gamma).abs()
            ),
        ));
    }

    // (e) the pinned relaxation run
    let mut stepper = Stepper::new(
        grid,
        &setup.potential_samples,
        defaults.dt,
        KineticScheme::SineSpectral,
        Some(Sponge {
            width_fraction: 0.2,
            strength: 2.0,
        }),
    )?;
    let z0 = defaults.z0_abs_frac * setup.bp.q.sqrt();
    let rep = relaxation_experiment(
        &setup.bp,
        Complex64::new(z0, 0.0),
        &setup.table,
        &setup.mode_table,
        &mut stepper,
        defaults.t_final,
        defaults.sample_every,
        &setup.potential_samples,
    )?;
    let times: Vec<f64> = rep.series.iter().map(|s| s.t).collect();
    let zs: Vec<f64> = rep.series.iter().map(|s| s.z.norm()).collect();
    let fit = fgr_decay_fit(&times, &zs, setup.n_res).map_err(CliError::from)?;
    let elapsed = start.elapsed().as_secs_f64();

    if quick {
        checks.push(Check::new(
            "10e",
            "relaxation trend (quick profile; halving asserted in the full profile)",
            rep.escape_time.is_none() && fit.gamma_eff > 0.0 && rep.monotone_fraction > 0.8,
            format!(
                "T = {:.0}: |z| ratio {:.4}, monotone {:.3}, Gamma_eff {:.3e} (R2 {:.3})",
                defaults.t_final, rep.z_ratio, rep.monotone_fraction, fit.gamma_eff, fit.r_squared
            ),
        ));
    } else {
        checks.push(Check::new(
            "10e",
            "internal-mode amplitude halves at the pinned defaults",
            rep.z_ratio < 0.5 && rep.monotone_fraction > 0.8,
            format!(
                "|z(T)|/|z(0)| = {:.4} (tol < 0.5), monotone fraction {:.3} (tol > 0.8)",
                rep.z_ratio, rep.monotone_fraction
            ),
        ));
        checks.push(Check::new(
            "10f",
            "carrier frequency settles",
            rep.omega_settle < 0.10 && rep.escape_time.is_none(),
            format!(
                "last-quarter excursion fraction {:.3} (tol 0.10); omega+ = {:.6}",
                rep.omega_settle, rep.omega_plus
            ),
        ));
        checks.push(Check::new(
            "10g",
            "positive measured damping on the real run",
            fit.gamma_eff > 0.0 && fit.reliable,
            format!(
                "Gamma_eff = {:.4e}, R2 = {:.4}, resonance order N = {}",
                fit.gamma_eff, fit.r_squared, setup.n_res
            ),
        ));
        checks.push(Check::new(
            "10h",
            "pinned-default runtime",
            elapsed < 600.0,
            format!("{elapsed:.0} s (cap 600 s)"),
        ));
    }

    let series = rep
        .series
        .iter()
        .map(|s| [s.t, s.omega, s.theta, s.z.norm(), s.f_norm_loc, s.interior_mass])
        .collect();
    Ok(Criterion10 {
        checks,
        series,
        gamma_eff: fit.gamma_eff,
        r_squared: fit.r_squared,
        z_ratio: rep.z_ratio,
        monotone: rep.monotone_fraction,
        omega_plus: rep.omega_plus,
    })
}

/// Decomposition-exactness and interior-flux property checks (module
/// invariants surfaced through the repro report).
pub fn nls_invariants() -> Result<Vec<Check>, CliError> {
    let defaults = RelaxationDefaults::default();
    let setup = relaxation_setup(&defaults)?;
    let sys = &setup.sys;
    let grid = sys.grid;
    let mut checks = Vec::new();

    // decomposition is exact algebra at a generic field
    {
        let bp = &setup.bp;
        let mut u: Vec<Complex64> = bp
            .phi
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = grid.node(i);
                Complex64::new(v + 0.01 * (-x * x / 5.0).exp(), 0.006 * (-x * x / 7.0).exp())
            })
            .collect();
        // a rigid gauge rotation must shift theta and nothing else
        let fit0 = fit_ground_state(&u, &setup.table, &grid)?;
        let delta = 0.37;
        for z in u.iter_mut() {
            *z *= Complex64::from_polar(1.0, delta);
        }
        let fit1 = fit_ground_state(&u, &setup.table, &grid)?;
        let dtheta = (fit1.theta - fit0.theta - delta).rem_euclid(2.0 * std::f64::consts::PI);
        let gauge_ok = dtheta.min(2.0 * std::f64::consts::PI - dtheta) < 1e-8
            && (fit1.omega - fit0.omega).abs() < 1e-9;

        let (lam, xi1, xi2) = setup.mode_table.at(fit1.omega, &grid);
        let _ = lam;
        let (z, f, _) = dwell::nlssim::extract_mode(&fit1.r, &xi1, &xi2, &grid)?;
        let phi = setup.table.phi_at(fit1.omega);
        let rot = Complex64::from_polar(1.0, fit1.theta);
        let mut worst = 0.0f64;
        for i in 0..grid.n {
            let rebuilt = rot * (phi[i] + z * xi1[i] + z.conj() * xi2[i] + f[i]);
            worst = worst.max((rebuilt - u[i]).norm());
        }
        checks.push(Check::new(
            "nls-i1",
            "modulation decomposition reassembles the field exactly",
            worst < 1e-10 && gauge_ok,
            format!("max reconstruction error {worst:.2e}; gauge covariance {gauge_ok}"),
        ));
    }

    // interior mass changes only by boundary flux (no absorber)
    {
        let bp = &setup.bp;
        let dt = 0.004;
        let mut stepper = Stepper::new(
            grid,
            &setup.potential_samples,
            dt,
            KineticScheme::SineSpectral,
            None,
        )?;
        let mut field = NLSField::from_real(&bp.phi);
        for (i, z) in field.u.iter_mut().enumerate() {
            let x = grid.node(i);
            *z += Complex64::from_polar(0.05 * (-(x - 6.0) * (x - 6.0) / 4.0).exp(), 0.8 * x);
        }
        let half = 0.5 * grid.x_max;
        let il = (0..grid.n).find(|&i| grid.node(i) >= -half).unwrap();
        let ir = (0..grid.n).rfind(|&i| grid.node(i) <= half).unwrap();
        let interior = |u: &[Complex64]| -> f64 {
            (il..=ir).map(|i| grid.weight(i) * u[i].norm_sqr()).sum()
        };
        let flux_at = |u: &[Complex64], i: usize| -> f64 {
            // j = 2 Im(conj(u) u_x), centered difference
            let du = (u[i + 1] - u[i - 1]) / (2.0 * grid.h);
            2.0 * (u[i].conj() * du).im
        };
        let m_start = interior(&field.u);
        let mut flux_integral = 0.0;
        let mut last = flux_at(&field.u, il) - flux_at(&field.u, ir);
        let steps = 4000usize;
        for _ in 0..steps {
            stepper.step(&mut field)?;
            let now = flux_at(&field.u, il) - flux_at(&field.u, ir);
            flux_integral += 0.5 * (last + now) * dt;
            last = now;
        }
        let m_end = interior(&field.u);
        let defect = ((m_end - m_start) - flux_integral).abs();
        checks.push(Check::new(
            "nls-i2",
            "interior mass balances the boundary flux",
            defect < 1e-6,
            format!(
                "interior change {:.6e} vs integrated flux {:.6e} (defect {defect:.2e}, tol 1e-6)",
                m_end - m_start,
                flux_integral
            ),
        ));
    }

    Ok(checks)
}

// ---------------------------------------------------------------------------
// reduced-vs-full consistency (module invariant)
// ---------------------------------------------------------------------------

/// Project a full NLS evolution of small two-mode data onto the linear
/// modes and compare the excited-mode quadratures against the reduced
/// integrator over one beat period; the deviation must shrink with N.
pub fn two_mode_shadowing() -> Result<Vec<Check>, CliError> {
    let g = Grid::symmetric(30.0, 1023)?;
    let kind = PotentialKind::GaussianDoubleWell {
        sigma: 0.5,
        separation: 2.0,
        depth: -3.0,
    };
    let p = make_potential(kind, &g)?;
    let sp = spectral_pair(&p, &g)?;
    let gap = sp.gap;
    let mut errs = Vec::new();
    for total_mass in [2e-3f64, 8e-3] {
        // initial data: both modes populated, real amplitudes
        let a0 = (0.7 * total_mass).sqrt();
        let b0 = (0.3 * total_mass).sqrt();
        let u0: Vec<Complex64> = (0..g.n)
            .map(|i| Complex64::new(a0 * sp.psi0[i] + b0 * sp.psi1[i], 0.0))
            .collect();
        let dt = 0.01;
        let beat = 2.0 * std::f64::consts::PI / gap;
        let steps = (beat / dt).ceil() as usize;
        let mut stepper = Stepper::new(g, &p.samples, dt, KineticScheme::CrankNicolson, None)?;
        let mut field = NLSField { u: u0, t: 0.0 };

        // reduced dynamics in the rescaled variables: amplitudes scale by
        // J^{1/4} with J the common interaction integral
        let rep = h4_report(&sp, &g)?;
        let j_mean = (rep.i60 + rep.i42 + rep.i24 + rep.i06) / 4.0;
        let scale = j_mean.powf(0.25);
        let n_fd = total_mass * scale * scale;
        let pfd = FDParams::rescaled(sp.omega0, sp.omega1, n_fd).map_err(CliError::from)?;
        let s0 = FDState::new(b0 * scale, 0.0);
        let traj = integrate_fd(&s0, &pfd, beat, dt, 1, OvershootPolicy::Clamp)?;

        let mut worst = 0.0f64;
        let mut k = 0usize;
        let sample = 25usize;
        let mut idx = 0usize;
        while k < steps {
            let todo = sample.min(steps - k);
            for _ in 0..todo {
                stepper.step(&mut field)?;
            }
            k += todo;
            idx += todo;
            // project onto the odd mode in the frame of the even mode
            let mut c0 = Complex64::new(0.0, 0.0);
            let mut c1 = Complex64::new(0.0, 0.0);
            for i in 0..g.n {
                c0 += field.u[i] * sp.psi0[i] * g.weight(i);
                c1 += field.u[i] * sp.psi1[i] * g.weight(i);
            }
            let frame = c0 / c0.norm();
            let w = c1 / frame;
            let fd = traj.states[idx.min(traj.states.len() - 1)];
            let da = w.re * scale - fd.alpha;
            let db = w.im * scale - fd.beta;
            worst = worst.max((da * da + db * db).sqrt() / n_fd.sqrt());
        }
        errs.push(worst);
    }
    // relative deviation grows with N: err ~ O(N) relative to sqrt(N) scale
    let improving = errs[0] < errs[1];
    Ok(vec![Check::new(
        "fd-shadow",
        "reduced dynamics tracks the full equation for small two-mode data",
        improving && errs[0] < 0.2,
        format!(
            "relative beat-period deviation {:.3e} (N small) vs {:.3e} (4x N): trend {}",
            errs[0],
            errs[1],
            if improving { "shrinks" } else { "grows" }
        ),
    )])
}

//! Scratch diagnostics: internal-mode frequencies along the asymmetric
//! branch and a trial relaxation run, used to pin experiment defaults.

use num_complex::Complex64;

use dwell::branch::{asymmetric_branch, find_bifurcation, TwoModeSystem};
use dwell::grid::{Grid, Mesh};
use dwell::hypotheses::h4_report;
use dwell::linstab::internal_mode;
use dwell::nlssim::{
    fit_ground_state, relaxation_experiment, resonance_order, BranchTable, KineticScheme,
    ModeTable, NLSField, Sponge, Stepper,
};
use dwell::potential::{make_potential, PotentialKind};
use dwell::spectral::spectral_pair;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sep: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3.0);
    let frac: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.27);
    let zfrac: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.10);
    let t_final: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1500.0);
    let depth = -2.0;
    let g = Grid::symmetric(30.0, 2047).unwrap();
    let kind = PotentialKind::GaussianDoubleWell {
        sigma: 0.5,
        separation: sep,
        depth,
    };
    let p = make_potential(kind, &g).unwrap();
    let sp = spectral_pair(&p, &g).unwrap();
    println!(
        "omega0 {:.6} omega1 {:.6} gap {:.4e}",
        sp.omega0, sp.omega1, sp.gap
    );
    let sys = TwoModeSystem::new(&p, g, sp).unwrap();
    let rep = h4_report(&sys.sp, &sys.grid).unwrap();
    println!("h4a {:.4} mu2 {:.4}", rep.h4a, rep.mu2_combo);
    let bif = find_bifurcation(&sys).unwrap();
    println!(
        "rho0* {:.5} omega* {:.6} predicted {:.5}",
        bif.rho0_star, bif.omega_star, bif.predicted_rho0_star
    );

    let fractions: Vec<f64> = vec![0.6, 0.8, 1.0, 1.1, 1.2, frac];
    let rho1s: Vec<f64> = fractions.iter().map(|f| f * bif.rho0_star).collect();
    let mut branch = Vec::new();
    for &r in &rho1s {
        match asymmetric_branch(&[r], &bif, &sys) {
            Ok(mut b) => branch.append(&mut b),
            Err(e) => {
                println!("branch stopped at rho1 = {r:.4}: {e}");
                break;
            }
        }
    }
    if branch.is_empty() {
        return;
    }
    for bp in &branch {
        match internal_mode(bp, &sys) {
            Ok(ls) => {
                let nres = resonance_order(ls.lambda, bp.omega);
                println!(
                    "rho1 {:.4} rho0 {:.4} omega {:.6} q {:.4} mu0 {:.3e} mu1 {:.3e} lambda {:.4e} om/l {:.2} N {:?} resid {:.2e}",
                    bp.rho1,
                    bp.rho0,
                    bp.omega,
                    bp.q,
                    ls.mu0,
                    ls.mu1,
                    ls.lambda,
                    bp.omega / ls.lambda,
                    nres,
                    bp.residual,
                );
            }
            Err(e) => println!("rho1 {:.4}: {e}", bp.rho1),
        }
    }

    // trial relaxation at the largest viable point
    let target = branch.len() - 1;
    let bp = &branch[target];
    let ls = internal_mode(bp, &sys).unwrap();
    println!(
        "\nrelaxation trial at rho1 = {:.4}, omega = {:.6}, lambda = {:.4e}",
        bp.rho1, bp.omega, ls.lambda
    );

    // branch + mode tables spanning the neighbourhood
    let hi = (frac + 0.035).max(1.2);
    let nodes = 24usize;
    let nbh: Vec<f64> = (0..=nodes)
        .map(|k| (0.5 + (hi - 0.5) * k as f64 / nodes as f64) * bif.rho0_star)
        .collect();
    let nbh_branch = asymmetric_branch(&nbh, &bif, &sys).unwrap();
    let table = BranchTable::from_branch(&nbh_branch).unwrap();
    let mode_omegas: Vec<f64> = nbh_branch.iter().map(|b| b.omega).collect();
    let modes: Vec<_> = nbh_branch
        .iter()
        .map(|b| internal_mode(b, &sys).unwrap())
        .collect();
    let mode_table = ModeTable::from_modes(mode_omegas, modes).unwrap();

    let znorm = zfrac * bp.q.sqrt();
    let dt = 0.02;
    let mut stepper = Stepper::new(
        sys.grid,
        &p.samples,
        dt,
        KineticScheme::SineSpectral,
        Some(Sponge::default()),
    )
    .unwrap();
    let start = std::time::Instant::now();
    match relaxation_experiment(
        bp,
        Complex64::new(znorm, 0.0),
        &table,
        &mode_table,
        &mut stepper,
        t_final,
        125,
        &p.samples,
    ) {
        Ok(rep) => {
            println!(
                "elapsed {:.1?}; samples {} monotone {:.3} z_ratio {:.4} omega+ {:.6} settle {:.3} escape {:?}",
                start.elapsed(),
                rep.series.len(),
                rep.monotone_fraction,
                rep.z_ratio,
                rep.omega_plus,
                rep.omega_settle,
                rep.escape_time
            );
            for s in rep.series.iter().step_by(rep.series.len() / 12 + 1) {
                println!(
                    "  t {:8.1} omega {:.6} |z| {:.5e} f_loc {:.3e} m_int {:.5}",
                    s.t,
                    s.omega,
                    s.z.norm(),
                    s.f_norm_loc,
                    s.interior_mass
                );
            }
        }
        Err(e) => println!("relaxation failed: {e}"),
    }

    // sanity: a pure ground state should fit itself exactly
    let u: Vec<Complex64> = bp.phi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let fit = fit_ground_state(&u, &table, &sys.grid).unwrap();
    println!(
        "self-fit: omega {:.8} (branch {:.8}), |r| = {:.2e}",
        fit.omega,
        bp.omega,
        sys.grid.norm(&fit.r.iter().map(|z| z.norm()).collect::<Vec<_>>())
    );
    let _ = NLSField::from_real(&bp.phi);
}

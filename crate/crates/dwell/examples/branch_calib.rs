//! Scratch calibration of the branch-expansion checks at the candidate
//! default wells.

use dwell::branch::{asymmetric_branch, find_bifurcation, mass_slope, symmetric_branch, TwoModeSystem};
use dwell::grid::Grid;
use dwell::hypotheses::h4_report;
use dwell::linstab::{build_lpm, constrained_bottoms, internal_mode, lplus_spectrum};
use dwell::potential::{make_potential, PotentialKind};
use dwell::spectral::spectral_pair;

fn main() {
    for (sep, n) in [(8.0, 4000usize), (9.0, 4200)] {
        let g = Grid::symmetric(36.0, n).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: sep,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        let sys = TwoModeSystem::new(&p, g, sp).unwrap();
        let rep = h4_report(&sys.sp, &sys.grid).unwrap();
        let gap = sys.sp.gap;
        println!("== L = {sep}: gap {gap:.4e} h4a {:.5} h4b {:.6} mu2 {:.4}", rep.h4a, rep.h4b, rep.mu2_combo);

        let bif = find_bifurcation(&sys).unwrap();
        let rstar = bif.rho0_star;
        println!(
            "rho0* {:.6} predicted {:.6}  |rho0*^4 h4a - gap|/gap = {:.4}",
            rstar,
            bif.predicted_rho0_star,
            (rstar.powi(4) * rep.h4a - gap).abs() / gap
        );

        // criterion 4: symmetric-branch expansion at 0.3 rho0*
        let r0 = 0.3 * rstar;
        let pts = symmetric_branch(&[r0], &sys).unwrap();
        let ratio = (pts[0].omega - sys.sp.omega0) / (r0.powi(4) * rep.i60);
        println!("expansion ratio at 0.3 rho0*: {ratio:.5}");

        // criterion 6: curvatures via Richardson second differences
        for eps_frac in [0.025, 0.04, 0.06] {
        let eps = eps_frac * rstar;
        let b = asymmetric_branch(&[eps, 2.0 * eps], &bif, &sys).unwrap();
        let om_dd = |r: &dwell::branch::BranchPoint| 2.0 * (r.omega - bif.omega_star) / (r.rho1 * r.rho1);
        let rh_dd = |r: &dwell::branch::BranchPoint| 2.0 * (r.rho0 - bif.rho0_star) / (r.rho1 * r.rho1);
        let om1 = om_dd(&b[0]);
        let om2 = om_dd(&b[1]);
        let om_extrap = (4.0 * om1 - om2) / 3.0;
        let om_pred = 20.0 * rstar * rstar * rep.h4b / rep.h4a;
        let rh1 = rh_dd(&b[0]);
        let rh2 = rh_dd(&b[1]);
        let rh_extrap = (4.0 * rh1 - rh2) / 3.0;
        let rh_pred = 5.0 / rstar * (rep.i42 - rep.i24) / rep.h4a;
        println!(
            "omega''(0): raw {:.5}/{:.5} extrap {:.5} vs pred {:.5}  err {:.3}",
            om1, om2, om_extrap, om_pred,
            (om_extrap - om_pred).abs() / om_pred.abs()
        );
        println!(
            "rho0''(0) eps_frac {eps_frac}: raw {:.5}/{:.5} extrap {:.5} vs pred {:.5}  err {:.3}",
            rh1, rh2, rh_extrap, rh_pred,
            (rh_extrap - rh_pred).abs() / rh_pred.abs().max(1e-300)
        );
        }

        if true {
            continue;
        }
        // criterion 7: along-branch indicators
        let fr: Vec<f64> = vec![0.05, 0.1];
        let rho1s: Vec<f64> = fr.iter().map(|f| f * rstar).collect();
        let branch = asymmetric_branch(&rho1s, &bif, &sys).unwrap();
        let slopes = mass_slope(&branch).unwrap();
        println!("dq/domega: {:?}", slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        let mu0_pred = 4.0 * rstar.powi(4) * rep.i60;
        let mupp_half = 0.5 * rstar * rstar * rep.mu2_combo;
        for bp in &branch {
            let (lp, _) = build_lpm(bp, &sys);
            let s = lplus_spectrum(&lp, bp.omega, &sys).unwrap();
            let ls = internal_mode(bp, &sys).unwrap();
            let (tp, tm) = constrained_bottoms(bp, &sys).unwrap();
            println!(
                "  f {:.2} mu0 {:.4e} (pred_lb ratio {:.3}) mu1/r^2 {:.4} (vs {:.4}: err {:.3}) lam/(r r*) {:.4} bound_ok {}",
                bp.rho1 / rstar,
                s.mu0,
                s.mu0 / mu0_pred,
                s.mu1 / (bp.rho1 * bp.rho1),
                mupp_half,
                (s.mu1 / (bp.rho1 * bp.rho1) - mupp_half).abs() / mupp_half,
                ls.lambda / (bp.rho1 * rstar),
                ls.lambda * ls.lambda >= tp * tm * (1.0 - 1e-8),
            );
        }

        // Richardson for mu1/rho1^2 at 0.05/0.1
        let (lp_a, _) = build_lpm(&branch[0], &sys);
        let (lp_b, _) = build_lpm(&branch[1], &sys);
        let ra = lplus_spectrum(&lp_a, branch[0].omega, &sys).unwrap().mu1 / (branch[0].rho1 * branch[0].rho1);
        let rb = lplus_spectrum(&lp_b, branch[1].omega, &sys).unwrap().mu1 / (branch[1].rho1 * branch[1].rho1);
        let richardson = 2.0 * ra - rb;
        println!(
            "mu1/rho1^2 Richardson: {:.5} vs mu''/2 {:.5} err {:.3}",
            richardson,
            mupp_half,
            (richardson - mupp_half).abs() / mupp_half
        );
    }
}

//! Scratch parameter scan: effective internal-mode damping across well
//! families, used to pin the relaxation-experiment defaults.

use num_complex::Complex64;

use dwell::branch::{asymmetric_branch, find_bifurcation, TwoModeSystem};
use dwell::grid::{Grid, Mesh};
use dwell::linstab::internal_mode;
use dwell::nlssim::{
    fgr_decay_fit, relaxation_experiment, resonance_order, BranchTable, KineticScheme, ModeTable,
    Sponge, Stepper,
};
use dwell::potential::{make_potential, Potential, PotentialKind};
use dwell::spectral::spectral_pair;

fn double_pt(g: &Grid, l: f64, m: f64) -> Potential {
    let samples: Vec<f64> = (0..g.n)
        .map(|i| {
            let x = g.node(i);
            let s1 = 1.0 / (x - l).cosh();
            let s2 = 1.0 / (x + l).cosh();
            -m * (m + 1.0) * (s1 * s1 + s2 * s2)
        })
        .collect();
    Potential::from_samples(samples, true, g).unwrap()
}

fn run_config(tag: &str, g: Grid, p: &Potential, zfrac: f64, t_final: f64, frac_exp_req: f64) {
    let sp = match spectral_pair(p, &g) {
        Ok(sp) => sp,
        Err(e) => {
            println!("{tag}: spectral pair failed: {e}");
            return;
        }
    };
    print!(
        "{tag}: omega0 {:.4} gap {:.3e} ",
        sp.omega0, sp.gap
    );
    let sys = TwoModeSystem::new(p, g, sp).unwrap();
    let bif = match find_bifurcation(&sys) {
        Ok(b) => b,
        Err(e) => {
            println!("bifurcation failed: {e}");
            return;
        }
    };
    print!("rho0* {:.3} ", bif.rho0_star);

    let frac_top = frac_exp_req + 0.045;
    let frac_exp = frac_exp_req;

    // table up to the top node; experiment strictly inside
    let grid_fracs: Vec<f64> = (0..=24)
        .map(|k| 0.3 + (frac_top - 0.3) * k as f64 / 24.0)
        .collect();
    let rho1s: Vec<f64> = grid_fracs.iter().map(|f| f * bif.rho0_star).collect();
    let branch = match asymmetric_branch(&rho1s, &bif, &sys) {
        Ok(b) => b,
        Err(e) => {
            println!("table branch failed: {e}");
            return;
        }
    };
    let bp = asymmetric_branch(&[frac_exp * bif.rho0_star], &bif, &sys)
        .unwrap()
        .into_iter()
        .next()
        .unwrap();
    let ls = internal_mode(&bp, &sys).unwrap();
    let n_res = resonance_order(ls.lambda, bp.omega).unwrap();
    print!(
        "exp at frac {:.2} omega {:.4} lambda {:.4} q {:.3} k_rad {:.3} N {} ",
        frac_exp,
        bp.omega,
        ls.lambda,
        bp.q,
        (2.0 * ls.lambda - bp.omega).max(0.0).sqrt(),
        n_res
    );
    let table = BranchTable::from_branch(&branch).unwrap();
    let omegas: Vec<f64> = branch.iter().map(|b| b.omega).collect();
    let modes: Vec<_> = match branch.iter().map(|b| internal_mode(b, &sys)).collect() {
        Ok(m) => m,
        Err(e) => {
            println!("mode table failed: {e}");
            return;
        }
    };
    let mode_table = ModeTable::from_modes(omegas, modes).unwrap();

    let mut stepper = Stepper::new(
        sys.grid,
        &p.samples,
        0.025,
        KineticScheme::SineSpectral,
        Some(Sponge {
            width_fraction: 0.2,
            strength: 2.0,
        }),
    )
    .unwrap();
    let z0 = zfrac * bp.q.sqrt();
    match relaxation_experiment(
        &bp,
        Complex64::new(z0, 0.0),
        &table,
        &mode_table,
        &mut stepper,
        t_final,
        8000,
        &p.samples,
    ) {
        Ok(rep) => {
            if rep.series.len() < 3 {
                println!(
                    "escaped early: {} samples, escape {:?}",
                    rep.series.len(),
                    rep.escape_time
                );
                return;
            }
            let times: Vec<f64> = rep.series.iter().map(|s| s.t).collect();
            let zs: Vec<f64> = rep.series.iter().map(|s| s.z.norm()).collect();
            let fit = fgr_decay_fit(&times, &zs, n_res).unwrap();
            println!(
                "z_ratio {:.4} monotone {:.3} Gamma_eff {:.3e} R2 {:.3} escape {:?}",
                rep.z_ratio, rep.monotone_fraction, fit.gamma_eff, fit.r_squared, rep.escape_time
            );
            for s in rep.series.iter().step_by(rep.series.len() / 10 + 1) {
                println!(
                    "    t {:7.0} omega {:.5} |z| {:.5e} m_int {:.5}",
                    s.t, s.omega, s.z.norm(), s.interior_mass
                );
            }
        }
        Err(e) => println!("relaxation failed: {e}"),
    }
}

fn main() {
    let configs: Vec<(String, f64, f64, f64, f64, f64)> = vec![
        // tag, sigma, depth, separation, x_max, experiment fraction
        ("d-3 L2 f1.08".into(), 0.5, -3.0, 2.0, 30.0, 1.08),
    ];
    let zfrac: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(0.30);
    let t_final: f64 = std::env::args()
        .nth(2)
        .map(|s| s.parse().unwrap())
        .unwrap_or(2500.0);
    for (tag, sigma, depth, sep, x_max, fr) in configs {
        let g = Grid::symmetric(x_max, 2047).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma,
            separation: sep,
            depth,
        };
        match make_potential(kind, &g) {
            Ok(p) => run_config(&tag, g, &p, zfrac, t_final, fr),
            Err(e) => println!("{tag}: {e}"),
        }
    }
}

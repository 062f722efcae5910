//! Second-variation operators at a ground state, their discrete spectra,
//! and the internal oscillation mode of the linearized flow.
//!
//! With `phi` a stationary state at frequency `omega`, the two real
//! operators are `L_plus = H + omega - 5 phi^4` and
//! `L_minus = H + omega - phi^4`; the linearized flow pairs them as
//! `J diag(L_plus, L_minus)`, whose nonzero discrete eigenvalues are
//! `+- i lambda` with `lambda^2` an eigenvalue of `L_minus L_plus` on the
//! complement of the gauge direction.
//!
//! `lambda` is computed two independent ways: deflated inverse-power
//! iteration on the operator product (the default, O(n) per step), and a
//! dense nonsymmetric eigensolve of the assembled product matrix kept as a
//! cross-check.

use nalgebra::DMatrix;

use crate::branch::BranchPoint;
use crate::branch::TwoModeSystem;
use crate::error::{Error, Result};
use crate::grid::Mesh;
use crate::operator::{self, SymTridiag};

/// Fraction of `omega` below which an eigenvalue of `L_plus` counts as
/// genuinely discrete rather than a boxed continuum mode.
const CONTINUUM_GUARD: f64 = 0.9;

/// Assemble `(L_plus, L_minus)` at a branch point.
pub fn build_lpm(bp: &BranchPoint, sys: &TwoModeSystem) -> (SymTridiag, SymTridiag) {
    let n = sys.n();
    let mut w_plus = Vec::with_capacity(n);
    let mut w_minus = Vec::with_capacity(n);
    for i in 0..n {
        let p4 = bp.phi[i].powi(4);
        w_plus.push(-5.0 * p4);
        w_minus.push(-p4);
    }
    let shifted = sys.h_op.add_scalar(bp.omega);
    (shifted.add_diag(&w_plus), shifted.add_diag(&w_minus))
}

/// Discrete spectrum of `L_plus` below the continuum threshold.
#[derive(Debug, Clone, Copy)]
pub struct LplusSpectrum {
    pub mu0: f64,
    pub mu1: f64,
    /// No further localized eigenvalue below the continuum guard.
    pub rest_positive: bool,
}

/// Localization score: fraction of mass within the window `|x| <= cut`.
fn localized_fraction(v: &[f64], sys: &TwoModeSystem, cut: f64) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for i in 0..sys.n() {
        let m = sys.grid.weight(i) * v[i] * v[i];
        total += m;
        if sys.grid.node(i).abs() <= cut {
            inside += m;
        }
    }
    inside / total.max(1e-300)
}

/// Window inside which bound modes carry most of their mass; generous
/// multiple of the well region.
fn localization_cut(sys: &TwoModeSystem) -> f64 {
    0.6 * sys.grid.x_max
}

/// Extract `(-mu0, mu1)` from `L_plus`, separating genuine bound modes from
/// discretized-continuum stragglers by eigenvector localization.
pub fn lplus_spectrum(
    l_plus: &SymTridiag,
    omega: f64,
    sys: &TwoModeSystem,
) -> Result<LplusSpectrum> {
    // band around zero inside which the second eigenvalue is treated as the
    // degenerating near-null mode rather than a second negative direction
    let zero_band = 1e-8 * omega.max(1.0);
    let negatives = l_plus.eigenvalues_below(-zero_band);
    if negatives.len() != 1 {
        return Err(Error::SpectralStructure(format!(
            "expected exactly one negative eigenvalue of the even-variation operator, found {}: {:?}",
            negatives.len(),
            negatives
        )));
    }
    let mu0 = -negatives[0];

    // remaining spectrum below the continuum guard, classified by
    // eigenvector localization to drop boxed continuum stragglers
    let cut = localization_cut(sys);
    let bound: Vec<f64> = {
        let below = l_plus.eigenvalues_below(CONTINUUM_GUARD * omega);
        let mut found = Vec::new();
        for ev in below.iter().filter(|e| **e >= -zero_band) {
            let (v, _) = l_plus.inverse_iteration(*ev, 8)?;
            if localized_fraction(&v, sys, cut) > 0.8 {
                found.push(*ev);
            }
        }
        found
    };
    if bound.is_empty() {
        return Err(Error::SpectralStructure(format!(
            "no localized near-zero or positive eigenvalue below {CONTINUUM_GUARD} * omega; \
             the branch point sits outside the expected regime"
        )));
    }
    let mu1 = bound[0];
    Ok(LplusSpectrum {
        mu0,
        mu1,
        rest_positive: bound.len() == 1,
    })
}

/// Internal mode data at one branch point.
#[derive(Debug, Clone)]
pub struct LinSpectrum {
    pub mu0: f64,
    pub mu1: f64,
    /// Internal-mode frequency, the `+- i lambda` pair of the linearization.
    pub lambda: f64,
    /// Two-component eigenfunction `(xi_1, xi_2)` in the conjugate-pair
    /// frame, normalized so the signature pairing `<xi, s3 xi> = 1`.
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    /// Estimated near-kernel dimensions (geometric, generalized) of the
    /// linearized flow at this point.
    pub kernel_dims: (usize, usize),
}

/// Deflated inverse-power iteration for the smallest nonzero eigenvalue of
/// the product `T = L_minus L_plus`. Returns `(lambda_sq, u)` with `u`
/// plain-normalized.
///
/// The product has an exact near-zero mode inherited from the gauge
/// direction: its left vector is the kernel of `L_minus` and its right
/// vector is `L_plus^{-1}` of that kernel. Removing it with the oblique
/// spectral projector (rather than an orthogonal one) leaves the remaining
/// spectrum untouched; the eigenvalue is then read off the stationary
/// quotient `<L_plus u, L_minus L_plus u> / <u, L_plus u>`, which is
/// second-order accurate in the eigenvector error.
pub fn product_bottom_eigenpair(
    l_plus: &SymTridiag,
    l_minus: &SymTridiag,
) -> Result<(f64, Vec<f64>)> {
    let n = l_plus.n();
    // left null vector: kernel of L_minus; right null vector of the
    // product: L_plus^{-1} applied to it
    let nu0 = l_minus.eigenvalue(0);
    let (left, _) = l_minus.inverse_iteration(nu0, 8)?;
    let mut right = l_plus.solve_shifted(0.0, &left)?;
    operator::normalize(&mut right);
    let overlap = operator::dot(&left, &right);
    if overlap.abs() < 1e-10 {
        return Err(Error::SpectralStructure(
            "gauge chain of the linearization is degenerate".into(),
        ));
    }
    let deflate = |x: &mut Vec<f64>| {
        let c = operator::dot(&left, x) / overlap;
        operator::axpy(x, -c, &right);
    };

    let mut x: Vec<f64> = (0..n)
        .map(|i| (0.37 * (i as f64 + 1.0)).sin() + 0.1)
        .collect();
    deflate(&mut x);
    operator::normalize(&mut x);
    let mut lambda_sq = f64::MAX;
    for _ in 0..80 {
        // T^{-1} x = L_plus^{-1} (L_minus^{-1} x); the deflated iterate is
        // orthogonal to the L_minus kernel, so the first solve is clean
        let y = operator::solve_deflated(l_minus, 0.0, &left, &x)?;
        let mut z = l_plus.solve_shifted(0.0, &y)?;
        deflate(&mut z);
        operator::normalize(&mut z);
        let lpz = l_plus.apply(&z);
        let tz = l_minus.apply(&lpz);
        let next = operator::dot(&lpz, &tz) / operator::dot(&z, &lpz);
        let delta = (next - lambda_sq).abs();
        x = z;
        lambda_sq = next;
        if delta <= 1e-12 * lambda_sq.abs().max(1e-16) {
            break;
        }
    }
    Ok((lambda_sq, x))
}

/// Compute the internal mode at an asymmetric branch point: `lambda`, the
/// two-component eigenfunction, and the `L_plus` spectrum.
pub fn internal_mode(bp: &BranchPoint, sys: &TwoModeSystem) -> Result<LinSpectrum> {
    let (l_plus, l_minus) = build_lpm(bp, sys);
    let lp_spec = lplus_spectrum(&l_plus, bp.omega, sys)?;
    let (lambda_sq, u_plain) = product_bottom_eigenpair(&l_plus, &l_minus)?;
    if lambda_sq <= 0.0 {
        return Err(Error::InstabilityFlag { lambda_sq });
    }
    let lambda = lambda_sq.sqrt();

    // physical normalization and the conjugate-frame eigenfunction:
    // xi = ( (u + L_plus u / lambda)/2, (u - L_plus u / lambda)/2 )
    let mut u = u_plain;
    let nw = sys.grid.norm(&u);
    for v in u.iter_mut() {
        *v /= nw;
    }
    let lpu = l_plus.apply(&u);
    let n = sys.n();
    let mut xi1 = Vec::with_capacity(n);
    let mut xi2 = Vec::with_capacity(n);
    for i in 0..n {
        let s = lpu[i] / lambda;
        xi1.push(0.5 * (u[i] + s));
        xi2.push(0.5 * (u[i] - s));
    }
    // signature pairing <xi, s3 xi> = <L_plus u, u> / lambda > 0
    let pairing = sys.grid.dot(&xi1, &xi1) - sys.grid.dot(&xi2, &xi2);
    if pairing <= 1e-12 {
        return Err(Error::DegeneratePairing { pairing });
    }
    let scale = pairing.sqrt();
    for v in xi1.iter_mut() {
        *v /= scale;
    }
    for v in xi2.iter_mut() {
        *v /= scale;
    }

    let kernel_dims = kernel_dims_cheap(bp, sys, &l_plus, &l_minus, lp_spec.mu1)?;

    Ok(LinSpectrum {
        mu0: lp_spec.mu0,
        mu1: lp_spec.mu1,
        lambda,
        xi1,
        xi2,
        kernel_dims,
    })
}

/// Threshold used for near-kernel estimates, relative to `omega`.
pub const KERNEL_CLUSTER_FRACTION: f64 = 1e-3;

/// Residual-based estimate of the near-kernel dimensions from the two
/// explicit candidate directions: the gauge vector `(0, phi)` and the
/// even-variation near-null vector `(chi_1, 0)`.
fn kernel_dims_cheap(
    bp: &BranchPoint,
    sys: &TwoModeSystem,
    _l_plus: &SymTridiag,
    l_minus: &SymTridiag,
    mu1: f64,
) -> Result<(usize, usize)> {
    let thr = KERNEL_CLUSTER_FRACTION * bp.omega;
    let mut geometric = 0usize;
    // gauge direction
    let lm_phi = l_minus.apply(&bp.phi);
    let r_gauge = sys.grid.norm(&lm_phi) / sys.grid.norm(&bp.phi).max(1e-300);
    if r_gauge < thr {
        geometric += 1;
    }
    // near-null of the even variation: residual is |mu1| by construction
    if mu1.abs() < thr {
        geometric += 1;
    }
    let generalized = 2 * geometric.max(1);
    Ok((geometric, generalized))
}

/// Dense assembly of the product `L_minus L_plus` (pentadiagonal).
fn dense_product(l_plus: &SymTridiag, l_minus: &SymTridiag) -> DMatrix<f64> {
    let n = l_plus.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let lm = |i: usize, k: usize| -> f64 {
        if i == k {
            l_minus.diag[i]
        } else if k + 1 == i {
            l_minus.off[k]
        } else if i + 1 == k {
            l_minus.off[i]
        } else {
            0.0
        }
    };
    let lp = |k: usize, j: usize| -> f64 {
        if k == j {
            l_plus.diag[k]
        } else if j + 1 == k {
            l_plus.off[j]
        } else if k + 1 == j {
            l_plus.off[k]
        } else {
            0.0
        }
    };
    for i in 0..n {
        let j_lo = i.saturating_sub(2);
        let j_hi = (i + 2).min(n - 1);
        for j in j_lo..=j_hi {
            let k_lo = i.saturating_sub(1).max(j.saturating_sub(1));
            let k_hi = (i + 1).min(j + 1).min(n - 1);
            let mut acc = 0.0;
            for k in k_lo..=k_hi {
                acc += lm(i, k) * lp(k, j);
            }
            m[(i, j)] = acc;
        }
    }
    m
}

/// Full eigenvalue list of the assembled product, for cross-checks and
/// cluster counting. O(n^3); intended for moderate grids.
pub fn product_eigenvalues_dense(
    l_plus: &SymTridiag,
    l_minus: &SymTridiag,
) -> Vec<num_complex::Complex64> {
    let m = dense_product(l_plus, l_minus);
    m.complex_eigenvalues()
        .iter()
        .map(|z| num_complex::Complex64::new(z.re, z.im))
        .collect()
}

/// Independent route to `lambda`: pick from the dense spectrum of the
/// product matrix the eigenvalue nearest the primary estimate.
pub fn internal_mode_cross_check(
    bp: &BranchPoint,
    sys: &TwoModeSystem,
    lambda_primary: f64,
) -> Result<f64> {
    let (l_plus, l_minus) = build_lpm(bp, sys);
    let evs = product_eigenvalues_dense(&l_plus, &l_minus);
    let target = lambda_primary * lambda_primary;
    let best = evs
        .iter()
        .filter(|z| z.re > 0.0)
        .min_by(|a, b| {
            ((a.re - target).abs() + a.im.abs())
                .partial_cmp(&((b.re - target).abs() + b.im.abs()))
                .unwrap()
        })
        .ok_or_else(|| Error::SpectralStructure("dense product has no positive eigenvalue".into()))?;
    if best.im.abs() > 1e-6 * best.re.abs().max(1e-12) {
        return Err(Error::SpectralStructure(format!(
            "dense product eigenvalue near lambda^2 is not real: {best}"
        )));
    }
    Ok(best.re.sqrt())
}

/// Near-kernel census of the linearized flow from the dense product
/// spectrum: `cluster` counts eigenvalues of the flow within the threshold
/// disk (two per near-zero product eigenvalue), `pairs_below` counts
/// `+- i lambda` pairs strictly between the cluster and the continuum guard.
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub geometric: usize,
    pub generalized: usize,
    pub cluster: usize,
    pub pairs_below_continuum: usize,
    pub threshold: f64,
    /// Parity labels of the explicit near-kernel chain `(phi, chi, alpha,
    /// gamma)` as (max odd part, max even part) pairs, present when the
    /// point is symmetric.
    pub parity_defects: Option<KernelParity>,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelParity {
    /// gauge vector `phi`: should be even
    pub phi_odd_defect: f64,
    /// even-variation null vector: should be odd
    pub chi_even_defect: f64,
    /// first generalized vector (`L_plus alpha = phi`): should be even
    pub alpha_odd_defect: f64,
    /// second generalized vector (`L_minus gamma = chi`): should be odd
    pub gamma_even_defect: f64,
}

/// Census at a branch point, combining the dense cluster count with the
/// explicit candidate-vector residuals. `threshold` defaults to
/// `KERNEL_CLUSTER_FRACTION * omega` when `None`.
pub fn kernel_structure(
    bp: &BranchPoint,
    sys: &TwoModeSystem,
    threshold: Option<f64>,
) -> Result<KernelReport> {
    let thr = threshold.unwrap_or(KERNEL_CLUSTER_FRACTION * bp.omega);
    let (l_plus, l_minus) = build_lpm(bp, sys);
    let evs = product_eigenvalues_dense(&l_plus, &l_minus);
    let thr_sq = thr * thr;
    let guard_sq = (CONTINUUM_GUARD * bp.omega).powi(2);
    let mut near_zero = 0usize;
    let mut pairs = 0usize;
    for z in &evs {
        if z.norm() < thr_sq {
            near_zero += 1;
        } else if z.re > 0.0 && z.re < guard_sq && z.im.abs() < 1e-6 * z.re {
            pairs += 1;
        }
    }
    let cluster = 2 * near_zero;

    // geometric estimate from explicit candidates
    let lp_spec = lplus_spectrum(&l_plus, bp.omega, sys)?;
    let (geometric, generalized) = kernel_dims_cheap(bp, sys, &l_plus, &l_minus, lp_spec.mu1)?;

    // parity tags only make sense for a symmetric state
    let parity_defects = if bp.rho1 == 0.0 {
        let phi_norm = sys.grid.norm(&bp.phi).max(1e-300);
        let (chi, _) = l_plus.inverse_iteration(lp_spec.mu1, 8)?;
        // generalized chain: L_plus alpha = phi, L_minus gamma = chi
        let chi_plain_kernel = chi.clone();
        let alpha = operator::solve_deflated(&l_plus, lp_spec.mu1.min(0.0), &chi_plain_kernel, &bp.phi)?;
        let nu0 = l_minus.eigenvalue(0);
        let (gauge, _) = l_minus.inverse_iteration(nu0, 8)?;
        let gamma = operator::solve_deflated(&l_minus, 0.0, &gauge, &chi)?;
        Some(KernelParity {
            phi_odd_defect: sys.grid.odd_part_max(&bp.phi) / phi_norm,
            chi_even_defect: sys.grid.even_part_max(&chi) / operator::norm(&chi).max(1e-300),
            alpha_odd_defect: sys.grid.odd_part_max(&alpha)
                / operator::norm(&alpha).max(1e-300),
            gamma_even_defect: sys.grid.even_part_max(&gamma)
                / operator::norm(&gamma).max(1e-300),
        })
    } else {
        None
    };

    Ok(KernelReport {
        geometric,
        generalized,
        cluster,
        pairs_below_continuum: pairs,
        threshold: thr,
        parity_defects,
    })
}

/// Constrained bottom Rayleigh quotients of both operators over the
/// complement of `phi`, for the product lower bound on `lambda^2`.
pub fn constrained_bottoms(
    bp: &BranchPoint,
    sys: &TwoModeSystem,
) -> Result<(f64, f64)> {
    let (l_plus, l_minus) = build_lpm(bp, sys);
    let mut phi_unit = bp.phi.clone();
    operator::normalize(&mut phi_unit);
    let (theta_plus, _) = operator::constrained_smallest_eigenpair(&l_plus, &phi_unit)?;
    let (theta_minus, _) = operator::constrained_smallest_eigenpair(&l_minus, &phi_unit)?;
    Ok((theta_plus, theta_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{asymmetric_branch, find_bifurcation, symmetric_branch};
    use crate::grid::Grid;
    use crate::potential::{make_potential, PotentialKind};
    use crate::spectral::spectral_pair;
    use approx::assert_relative_eq;

    fn system() -> TwoModeSystem {
        let g = Grid::symmetric(30.0, 1200).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 4.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        TwoModeSystem::new(&p, g, sp).unwrap()
    }

    #[test]
    fn gauge_mode_annihilated_and_operator_difference() {
        let sys = system();
        let bif = find_bifurcation(&sys).unwrap();
        let branch = asymmetric_branch(&[0.05 * bif.rho0_star], &bif, &sys).unwrap();
        let bp = &branch[0];
        let (l_plus, l_minus) = build_lpm(bp, &sys);
        let lm_phi = l_minus.apply(&bp.phi);
        let rel = sys.grid.norm(&lm_phi) / sys.grid.norm(&bp.phi);
        assert!(rel < 1e-7, "gauge residual {rel}");
        // L_plus = L_minus - 4 phi^4 elementwise on the diagonal
        for i in 0..sys.n() {
            assert_relative_eq!(
                l_plus.diag[i],
                l_minus.diag[i] - 4.0 * bp.phi[i].powi(4),
                epsilon = 1e-14
            );
        }
        assert_eq!(l_plus.off, l_minus.off);
    }

    #[test]
    fn small_amplitude_limit_recovers_linear_spectrum() {
        let sys = system();
        let pts = symmetric_branch(&[1e-3], &sys).unwrap();
        let bp = &pts[0];
        let (l_plus, _) = build_lpm(bp, &sys);
        // for a vanishing state, L_plus -> H + omega with spectrum
        // {omega - omega0, omega - omega1, ...}
        let e0 = l_plus.eigenvalue(0);
        let e1 = l_plus.eigenvalue(1);
        assert_relative_eq!(e0, bp.omega - sys.sp.omega0, epsilon = 1e-8);
        assert_relative_eq!(e1, bp.omega - sys.sp.omega1, epsilon = 1e-8);
    }

    #[test]
    fn internal_mode_positive_and_cross_checked() {
        let sys = system();
        let bif = find_bifurcation(&sys).unwrap();
        let rho1 = 0.25 * bif.rho0_star;
        let branch = asymmetric_branch(&[rho1], &bif, &sys).unwrap();
        let bp = &branch[0];
        let ls = internal_mode(bp, &sys).unwrap();
        assert!(ls.lambda > 0.0);
        assert!(ls.mu0 > 0.0 && ls.mu1 > 0.0);
        // signature normalization
        let pairing = sys.grid.dot(&ls.xi1, &ls.xi1) - sys.grid.dot(&ls.xi2, &ls.xi2);
        assert_relative_eq!(pairing, 1.0, epsilon = 1e-10);
        // product lower bound from the constrained quotients
        let (tp, tm) = constrained_bottoms(bp, &sys).unwrap();
        assert!(tp > 0.0 && tm > 0.0);
        assert!(
            ls.lambda * ls.lambda >= tp * tm * (1.0 - 1e-8),
            "lambda^2 = {} vs bound {}",
            ls.lambda * ls.lambda,
            tp * tm
        );
    }

    #[test]
    fn dense_route_agrees_on_shared_grid() {
        // the dense eigensolve carries an absolute floor of eps * ||L-||
        // * ||L+|| ~ h^{-4}; the comparison is run on a coarser grid and a
        // larger amplitude where one part in 1e6 on lambda is meaningful
        let g = Grid::symmetric(26.0, 520).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 4.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        let sys = TwoModeSystem::new(&p, g, sp).unwrap();
        let bif = find_bifurcation(&sys).unwrap();
        let branch = asymmetric_branch(&[0.7 * bif.rho0_star], &bif, &sys).unwrap();
        let bp = &branch[0];
        let ls = internal_mode(bp, &sys).unwrap();
        let lambda_dense = internal_mode_cross_check(bp, &sys, ls.lambda).unwrap();
        assert_relative_eq!(ls.lambda, lambda_dense, max_relative = 1e-6);
    }

    #[test]
    fn mu1_vanishes_at_bifurcation_and_grows_quadratically() {
        let sys = system();
        let bif = find_bifurcation(&sys).unwrap();
        // at the bifurcation point itself (rho1 = 0) the second eigenvalue
        // of L_plus crosses zero
        let sym = symmetric_branch(&[bif.rho0_star], &sys).unwrap();
        let (l_plus, _) = build_lpm(&sym[0], &sys);
        let e1 = l_plus.eigenvalue(1);
        assert!(
            e1.abs() < 5e-5,
            "second eigenvalue at the branch point: {e1}"
        );
        // along the asymmetric branch mu1 ~ rho1^2: the rescaled values
        // mu1 / rho1^2 drift linearly in rho1, so the drift itself must
        // shrink when rho1 halves
        let r1 = 0.05 * bif.rho0_star;
        let r2 = 0.1 * bif.rho0_star;
        let r4 = 0.2 * bif.rho0_star;
        let branch = asymmetric_branch(&[r1, r2, r4], &bif, &sys).unwrap();
        let ratios: Vec<f64> = branch
            .iter()
            .map(|bp| {
                let s = lplus_spectrum(&build_lpm(bp, &sys).0, bp.omega, &sys).unwrap();
                s.mu1 / (bp.rho1 * bp.rho1)
            })
            .collect();
        let drift_small = (ratios[1] - ratios[0]).abs();
        let drift_large = (ratios[2] - ratios[1]).abs();
        assert!(
            drift_small < 0.7 * drift_large,
            "mu1/rho1^2 not converging linearly: {ratios:?}"
        );
    }

    #[test]
    fn kernel_census_at_and_beyond_the_branch_point() {
        let sys = system();
        let bif = find_bifurcation(&sys).unwrap();
        let sym = symmetric_branch(&[bif.rho0_star], &sys).unwrap();
        let at_star = kernel_structure(&sym[0], &sys, None).unwrap();
        assert_eq!(at_star.cluster, 4, "cluster at the branch point");
        assert_eq!(at_star.geometric, 2);
        assert_eq!(at_star.generalized, 4);
        let par = at_star.parity_defects.unwrap();
        assert!(par.phi_odd_defect < 1e-8);
        assert!(par.chi_even_defect < 1e-6);
        assert!(par.alpha_odd_defect < 1e-6);
        assert!(par.gamma_even_defect < 1e-6);

        let branch = asymmetric_branch(&[0.3 * bif.rho0_star], &bif, &sys).unwrap();
        let beyond = kernel_structure(&branch[0], &sys, None).unwrap();
        assert_eq!(beyond.cluster, 2, "cluster beyond the branch point");
        assert_eq!(beyond.pairs_below_continuum, 1, "one internal-mode pair");
    }
}

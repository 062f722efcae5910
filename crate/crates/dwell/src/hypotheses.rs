//! Interaction integrals of the two linear modes and the derived
//! positivity quantities that control the symmetry-breaking branch.

use crate::error::{Error, Result};
use crate::grid::Mesh;
use crate::spectral::SpectralPair;

/// Quadrature inner product `∫ f g dx` on the mesh.
pub fn inner_product<M: Mesh>(f: &[f64], g: &[f64], mesh: &M) -> Result<f64> {
    if f.len() != g.len() || f.len() != mesh.len() {
        return Err(Error::Validation(format!(
            "inner product length mismatch: {} vs {} on mesh of {}",
            f.len(),
            g.len(),
            mesh.len()
        )));
    }
    Ok(mesh.dot(f, g))
}

/// The four sextic interaction integrals and the derived quantities.
///
/// `h4a = 5 I42 - I60` and `h4b = 5 I42^2 - I60 I24` must both be positive
/// for the asymmetric branch to bifurcate with the expected signs;
/// `mu2_combo` is the prefactor-free curvature combination
/// `20 h4b / h4a + 160 I42^2 / I60 - 60 I24`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H4Report {
    /// `<psi0^6, 1>`
    pub i60: f64,
    /// `<psi0^4, psi1^2>`
    pub i42: f64,
    /// `<psi0^2, psi1^4>`
    pub i24: f64,
    /// `<psi1^6, 1>`
    pub i06: f64,
    pub h4a: f64,
    pub h4b: f64,
    pub mu2_combo: f64,
    /// Margin threshold; defaults to `h4a / 2` when not supplied.
    pub a0_margin: f64,
    pub pass: bool,
}

impl H4Report {
    /// Re-evaluate the pass flag against a caller-chosen margin.
    pub fn passes_with_margin(&self, a0: f64) -> bool {
        self.h4a > a0 && self.h4b > a0
    }
}

/// Evaluate the interaction integrals for a spectral pair.
pub fn h4_report<M: Mesh>(sp: &SpectralPair, mesh: &M) -> Result<H4Report> {
    h4_report_with_margin(sp, mesh, None)
}

pub fn h4_report_with_margin<M: Mesh>(
    sp: &SpectralPair,
    mesh: &M,
    a0: Option<f64>,
) -> Result<H4Report> {
    let n = mesh.len();
    if sp.len() != n {
        return Err(Error::Validation(format!(
            "spectral pair on {} nodes, mesh has {}",
            sp.len(),
            n
        )));
    }
    let mut i60 = 0.0;
    let mut i42 = 0.0;
    let mut i24 = 0.0;
    let mut i06 = 0.0;
    for i in 0..n {
        let w = mesh.weight(i);
        let a2 = sp.psi0[i] * sp.psi0[i];
        let b2 = sp.psi1[i] * sp.psi1[i];
        i60 += w * a2 * a2 * a2;
        i42 += w * a2 * a2 * b2;
        i24 += w * a2 * b2 * b2;
        i06 += w * b2 * b2 * b2;
    }
    let h4a = 5.0 * i42 - i60;
    let h4b = 5.0 * i42 * i42 - i60 * i24;
    let mu2_combo = 20.0 * h4b / h4a + 160.0 * i42 * i42 / i60 - 60.0 * i24;
    let a0_margin = a0.unwrap_or(0.5 * h4a);
    let pass = h4a > a0_margin.max(0.0) && h4b > a0_margin.max(0.0) && h4a > 0.0 && h4b > 0.0;
    Ok(H4Report {
        i60,
        i42,
        i24,
        i06,
        h4a,
        h4b,
        mu2_combo,
        a0_margin,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Mesh};
    use crate::potential::{make_potential, PotentialKind};
    use crate::spectral::spectral_pair;
    use approx::assert_relative_eq;

    #[test]
    fn sech_sixth_moment_closed_form() {
        // psi0 = sech(x)/sqrt(2): <psi0^6, 1> = (1/8)(16/15) = 2/15
        let g = Grid::symmetric(20.0, 6000).unwrap();
        let psi: Vec<f64> = (0..g.n)
            .map(|i| 1.0 / (g.node(i).cosh() * 2.0f64.sqrt()))
            .collect();
        let psi6: Vec<f64> = psi.iter().map(|v| v.powi(6)).collect();
        let ones = vec![1.0; g.n];
        let val = inner_product(&psi6, &ones, &g).unwrap();
        assert_relative_eq!(val, 2.0 / 15.0, epsilon = 1e-6);
    }

    #[test]
    fn normalization_and_orthogonality_via_inner_product() {
        let g = Grid::symmetric(30.0, 2500).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 3.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        assert_relative_eq!(inner_product(&sp.psi0, &sp.psi0, &g).unwrap(), 1.0, epsilon = 1e-10);
        assert!(inner_product(&sp.psi0, &sp.psi1, &g).unwrap().abs() < 1e-10);
    }

    #[test]
    fn sign_gauge_leaves_report_unchanged() {
        let g = Grid::symmetric(30.0, 2000).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 3.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let mut sp = spectral_pair(&p, &g).unwrap();
        let r1 = h4_report(&sp, &g).unwrap();
        for v in sp.psi0.iter_mut() {
            *v = -*v;
        }
        for v in sp.psi1.iter_mut() {
            *v = -*v;
        }
        let r2 = h4_report(&sp, &g).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn integrals_approach_each_other_at_large_separation() {
        let g = Grid::symmetric(35.0, 3200).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 5.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        let r = h4_report(&sp, &g).unwrap();
        assert!(r.i60 > 0.0 && r.i42 > 0.0 && r.i24 > 0.0 && r.i06 > 0.0);
        assert!((r.i60 - r.i42).abs() / r.i60 < 0.2);
        assert!((r.i60 - r.i24).abs() / r.i60 < 0.2);
    }

    #[test]
    fn pass_flag_monotone_in_margin() {
        let g = Grid::symmetric(30.0, 2000).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 4.0,
            depth: -2.0,
        };
        let p = make_potential(kind, &g).unwrap();
        let sp = spectral_pair(&p, &g).unwrap();
        let r = h4_report(&sp, &g).unwrap();
        let margins = [r.a0_margin, 0.5 * r.a0_margin, 0.1 * r.a0_margin];
        let mut last = r.passes_with_margin(margins[0]);
        for m in margins {
            let now = r.passes_with_margin(m);
            // shrinking the margin can only keep or gain a pass
            assert!(now || !last);
            last = now;
        }
    }

    #[test]
    fn quadrature_converges_when_grid_doubles() {
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 3.0,
            depth: -2.0,
        };
        let mut vals = Vec::new();
        for n in [30000usize, 60000] {
            let g = Grid::symmetric(30.0, n).unwrap();
            let p = make_potential(kind.clone(), &g).unwrap();
            let sp = spectral_pair(&p, &g).unwrap();
            vals.push(h4_report(&sp, &g).unwrap());
        }
        for (a, b) in [
            (vals[0].i60, vals[1].i60),
            (vals[0].i42, vals[1].i42),
            (vals[0].i24, vals[1].i24),
        ] {
            assert!(((a - b) / b).abs() < 1e-6, "quadrature drift {a} vs {b}");
        }
    }
}

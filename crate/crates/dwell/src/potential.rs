//! Potential descriptors and their sampled form.
//!
//! The Gaussian double well is the workhorse: two normalized Gaussian bumps
//! of signed strength `depth` centered at `±separation`. A negative depth
//! gives attractive wells and is the only sign that admits bound states;
//! the constructor enforces nothing here beyond basic validity, the
//! spectral stage reports if the two-bound-state hypothesis fails.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `depth * [g_sigma(x - separation) + g_sigma(x + separation)]` with
    /// `g_sigma` the unit-mass Gaussian of width `sigma`.
    GaussianDoubleWell {
        sigma: f64,
        separation: f64,
        depth: f64,
    },
    /// `-m (m + 1) sech^2 x`, whose bound states are known in closed form.
    PoschlTeller { m: u32 },
    /// Arbitrary samples supplied by the caller; `even` must be declared.
    Custom { even: bool },
}

impl PotentialKind {
    pub fn is_even(&self) -> bool {
        match self {
            PotentialKind::GaussianDoubleWell { .. } | PotentialKind::PoschlTeller { .. } => true,
            PotentialKind::Custom { even } => *even,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PotentialKind::GaussianDoubleWell {
                sigma,
                separation,
                depth,
            } => depth * (gaussian_bump(x - separation, sigma) + gaussian_bump(x + separation, sigma)),
            PotentialKind::PoschlTeller { m } => {
                let m = m as f64;
                let sech = 1.0 / x.cosh();
                -m * (m + 1.0) * sech * sech
            }
            PotentialKind::Custom { .. } => {
                unreachable!("custom potentials carry samples, not a formula")
            }
        }
    }
}

fn gaussian_bump(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt()
}

/// A potential sampled on the interior nodes of a mesh.
#[derive(Debug, Clone)]
pub struct Potential {
    pub samples: Vec<f64>,
    pub kind: PotentialKind,
    pub even: bool,
    /// Set when the descriptor has structure narrower than the local mesh
    /// spacing; results on this mesh are unreliable.
    pub under_resolved: bool,
}

impl Potential {
    /// Sample a formula-backed descriptor on `mesh`.
    pub fn sample<M: Mesh>(kind: PotentialKind, mesh: &M) -> Result<Self> {
        match kind {
            PotentialKind::GaussianDoubleWell { sigma, separation, .. } => {
                if sigma <= 0.0 {
                    return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
                }
                if separation < 0.0 {
                    return Err(Error::Validation(format!(
                        "well separation must be nonnegative, got {separation}"
                    )));
                }
            }
            PotentialKind::PoschlTeller { m } => {
                if m == 0 {
                    return Err(Error::Validation("Poschl-Teller index m must be >= 1".into()));
                }
            }
            PotentialKind::Custom { .. } => {
                return Err(Error::Validation(
                    "custom potentials are built with Potential::from_samples".into(),
                ))
            }
        }
        let samples: Vec<f64> = (0..mesh.len()).map(|i| kind.eval(mesh.node(i))).collect();
        let under_resolved = match kind {
            PotentialKind::GaussianDoubleWell { sigma, separation, .. } => {
                // the mesh must place several nodes across each bump
                let local_h = local_spacing_near(mesh, separation)
                    .min(local_spacing_near(mesh, -separation));
                sigma < 2.0 * local_h
            }
            _ => false,
        };
        let even = kind.is_even();
        let p = Potential {
            samples,
            kind,
            even,
            under_resolved,
        };
        p.check_parity(mesh)?;
        Ok(p)
    }

    pub fn from_samples<M: Mesh>(samples: Vec<f64>, even: bool, mesh: &M) -> Result<Self> {
        if samples.len() != mesh.len() {
            return Err(Error::Validation(format!(
                "sample count {} does not match mesh size {}",
                samples.len(),
                mesh.len()
            )));
        }
        let p = Potential {
            samples,
            kind: PotentialKind::Custom { even },
            even,
            under_resolved: false,
        };
        p.check_parity(mesh)?;
        Ok(p)
    }

    fn check_parity<M: Mesh>(&self, mesh: &M) -> Result<()> {
        if !self.even {
            return Ok(());
        }
        let n = mesh.len();
        let scale = self
            .samples
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        for i in 0..n {
            // symmetric meshes reflect exactly through index reversal
            if (self.samples[i] - self.samples[n - 1 - i]).abs() > 1e-12 * scale {
                return Err(Error::Validation(
                    "potential declared even but samples are not symmetric; \
                     use a symmetric grid (x_min = -x_max)"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

fn local_spacing_near<M: Mesh>(mesh: &M, x: f64) -> f64 {
    let n = mesh.len();
    let mut best_i = 0usize;
    let mut best_d = f64::MAX;
    for i in 0..n {
        let d = (mesh.node(i) - x).abs();
        if d < best_d {
            best_d = d;
            best_i = i;
        }
    }
    if best_i + 1 < n {
        mesh.node(best_i + 1) - mesh.node(best_i)
    } else if best_i > 0 {
        mesh.node(best_i) - mesh.node(best_i - 1)
    } else {
        f64::MAX
    }
}

/// Convenience constructor mirroring the descriptor names used in config files.
pub fn make_potential<M: Mesh>(kind: PotentialKind, mesh: &M) -> Result<Potential> {
    Potential::sample(kind, mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    #[test]
    fn poschl_teller_m1_matches_closed_form() {
        let g = Grid::symmetric(20.0, 801).unwrap();
        let p = make_potential(PotentialKind::PoschlTeller { m: 1 }, &g).unwrap();
        for (i, &v) in p.samples.iter().enumerate() {
            let x = g.node(i);
            let sech2 = 1.0 / x.cosh().powi(2);
            assert_relative_eq!(v, -2.0 * sech2, epsilon = 1e-14);
        }
        assert!(p.even);
        assert!(!p.under_resolved);
    }

    #[test]
    fn gaussian_double_well_is_even_with_two_minima() {
        let g = Grid::symmetric(12.0, 2001).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.5,
            separation: 3.0,
            depth: -1.0,
        };
        let p = make_potential(kind, &g).unwrap();
        assert_eq!(g.odd_part_max(&p.samples), 0.0);
        // minima at +-3 within one spacing
        let (imin, _) = p
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| g.node(*i) > 0.0)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((g.node(imin) - 3.0).abs() <= g.h);
    }

    #[test]
    fn needle_well_flags_under_resolution() {
        let g = Grid::symmetric(20.0, 2001).unwrap(); // h ~ 0.02 >> sigma
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 1e-3,
            separation: 7.5,
            depth: -1.0,
        };
        let p = make_potential(kind, &g).unwrap();
        assert!(p.under_resolved, "sigma far below h must be flagged");
    }

    #[test]
    fn invalid_sigma_rejected() {
        let g = Grid::symmetric(10.0, 101).unwrap();
        let kind = PotentialKind::GaussianDoubleWell {
            sigma: 0.0,
            separation: 1.0,
            depth: -1.0,
        };
        assert!(make_potential(kind, &g).is_err());
    }
}

//! Spatial discretization: uniform Dirichlet grids and a graded variant
//! for needle-thin wells.
//!
//! All operators act on interior nodes only; the field is pinned to zero
//! at `x_min` and `x_max`. With homogeneous boundary values the composite
//! trapezoid rule collapses to a plain weighted sum over interior nodes,
//! which is what [`Mesh::weights`] returns.

use crate::error::{Error, Result};

/// Minimum number of interior nodes accepted by [`Grid::new`].
pub const MIN_NODES: usize = 16;

/// Common interface of the uniform and graded meshes.
pub trait Mesh {
    fn len(&self) -> usize;
    fn node(&self, i: usize) -> f64;
    /// Quadrature weight of node `i` (trapezoid / lumped mass).
    fn weight(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Weighted inner product `∫ f g dx` under the mesh quadrature.
    fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.weight(i) * f[i] * g[i];
        }
        acc
    }

    fn norm(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }
}

/// Uniform grid of `n` interior nodes on `(x_min, x_max)` with Dirichlet
/// truncation; spacing `h = (x_max - x_min) / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::Validation(format!(
                "grid domain inverted or degenerate: [{x_min}, {x_max}]"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::Validation(format!(
                "n too small: {n} interior nodes (minimum {MIN_NODES})"
            )));
        }
        let h = (x_max - x_min) / (n as f64 + 1.0);
        Ok(Grid { x_min, x_max, n, h })
    }

    /// Symmetric grid on `(-x_max, x_max)`, the form every even potential uses.
    pub fn symmetric(x_max: f64, n: usize) -> Result<Self> {
        Self::new(-x_max, x_max, n)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }

    /// Index of the reflected node: on a symmetric grid `x[reflect(i)] = -x[i]`
    /// exactly, for both even and odd `n`.
    pub fn reflect(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    /// Largest odd-part magnitude of `f` under the exact index reflection.
    pub fn odd_part_max(&self, f: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| 0.5 * (f[i] - f[self.reflect(i)]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest even-part magnitude of `f` (zero for odd functions).
    pub fn even_part_max(&self, f: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| 0.5 * (f[i] + f[self.reflect(i)]).abs())
            .fold(0.0, f64::max)
    }
}

impl Mesh for Grid {
    fn len(&self) -> usize {
        self.n
    }

    fn node(&self, i: usize) -> f64 {
        // centered form: on symmetric domains the reflected node is the
        // exact floating-point negation
        let mid = 0.5 * (self.x_min + self.x_max);
        mid + ((i as f64 + 1.0) - 0.5 * (self.n as f64 + 1.0)) * self.h
    }

    fn weight(&self, _i: usize) -> f64 {
        self.h
    }
}

/// Build a uniform Dirichlet grid. Thin wrapper kept for symmetry with the
/// other constructors.
pub fn build_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n)
}

/// Nonuniform symmetric mesh, refined geometrically around a set of
/// centers. Used for wells far thinner than any practical uniform spacing.
///
/// Interior nodes only; `weights` are the lumped P1 finite-element masses
/// `(h_{i-1} + h_i) / 2`, consistent with the symmetrized stiffness
/// operator assembled in [`crate::spectral`].
#[derive(Debug, Clone)]
pub struct GradedGrid {
    pub x_min: f64,
    pub x_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GradedGrid {
    /// Symmetric graded mesh on `(-x_max, x_max)`: spacing `h_fine` inside a
    /// radius `r_fine` of each center, growing geometrically by `ratio` up
    /// to `h_coarse` elsewhere.
    pub fn refined(
        x_max: f64,
        centers: &[f64],
        h_fine: f64,
        r_fine: f64,
        h_coarse: f64,
        ratio: f64,
    ) -> Result<Self> {
        if !(h_fine > 0.0 && h_coarse >= h_fine && ratio > 1.0 && x_max > 0.0) {
            return Err(Error::Validation(
                "graded grid needs 0 < h_fine <= h_coarse, ratio > 1, x_max > 0".into(),
            ));
        }
        // Build the right half [0, x_max], then mirror. Positions are laid
        // out left to right with the local target spacing.
        let spacing = |x: f64| -> f64 {
            let mut h = h_coarse;
            for &c in centers {
                let d = (x - c).abs();
                let local = if d <= r_fine {
                    h_fine
                } else {
                    // geometric growth away from the refined window
                    (h_fine * ratio.powf((d - r_fine) / h_fine * (ratio - 1.0).min(1.0)))
                        .min(h_coarse)
                };
                h = h.min(local);
            }
            h
        };
        let mut right = Vec::new();
        let mut x = 0.0;
        loop {
            let h = spacing(x).min(spacing(x + spacing(x)));
            x += h;
            if x >= x_max - 1e-12 {
                break;
            }
            right.push(x);
        }
        // Mirror into (-x_max, 0) ∪ {0} ∪ (0, x_max).
        let mut nodes: Vec<f64> = right.iter().rev().map(|&v| -v).collect();
        nodes.push(0.0);
        nodes.extend_from_slice(&right);
        if nodes.len() < MIN_NODES {
            return Err(Error::Validation(format!(
                "graded grid too coarse: {} interior nodes",
                nodes.len()
            )));
        }

        let n = nodes.len();
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let left = if i == 0 { nodes[0] + x_max } else { nodes[i] - nodes[i - 1] };
            let rightgap = if i == n - 1 {
                x_max - nodes[n - 1]
            } else {
                nodes[i + 1] - nodes[i]
            };
            weights.push(0.5 * (left + rightgap));
        }
        Ok(GradedGrid {
            x_min: -x_max,
            x_max,
            nodes,
            weights,
        })
    }

    /// Spacings h_i between consecutive mesh points, boundaries included
    /// (length `n + 1`).
    pub fn spacings(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut h = Vec::with_capacity(n + 1);
        h.push(self.nodes[0] - self.x_min);
        for i in 1..n {
            h.push(self.nodes[i] - self.nodes[i - 1]);
        }
        h.push(self.x_max - self.nodes[n - 1]);
        h
    }

    /// Linear interpolation of mesh data onto an arbitrary abscissa, zero
    /// outside the domain. Used to hand graded-mesh eigenfunctions to
    /// modules that work on uniform grids.
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        debug_assert_eq!(f.len(), self.nodes.len());
        if x <= self.x_min || x >= self.x_max {
            return 0.0;
        }
        match self.nodes.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => f[i],
            Err(i) => {
                // segment (x_{i-1}, x_i), with virtual zero nodes at the walls
                let (xl, fl) = if i == 0 {
                    (self.x_min, 0.0)
                } else {
                    (self.nodes[i - 1], f[i - 1])
                };
                let (xr, fr) = if i == self.nodes.len() {
                    (self.x_max, 0.0)
                } else {
                    (self.nodes[i], f[i])
                };
                fl + (fr - fl) * (x - xl) / (xr - xl)
            }
        }
    }
}

impl Mesh for GradedGrid {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spacing_matches_definition() {
        let g = Grid::new(-20.0, 20.0, 3999).unwrap();
        assert_relative_eq!(g.h, 0.01, max_relative = 1e-14);
        assert_relative_eq!(g.node(0), -20.0 + 0.01, max_relative = 1e-12);
        assert_relative_eq!(g.node(3998), 20.0 - 0.01, max_relative = 1e-12);
    }

    #[test]
    fn too_coarse_grid_rejected() {
        let err = Grid::new(-20.0, 20.0, 15).unwrap_err();
        assert!(err.to_string().contains("n too small"));
    }

    #[test]
    fn inverted_domain_rejected() {
        assert!(Grid::new(5.0, -5.0, 100).is_err());
    }

    #[test]
    fn even_n_reflection_is_exact_without_midpoint() {
        // No node at x = 0, yet index reflection still negates nodes exactly.
        let g = Grid::symmetric(10.0, 64).unwrap();
        for i in 0..g.n {
            assert_relative_eq!(g.node(g.reflect(i)), -g.node(i), epsilon = 1e-13);
        }
        assert!(g.nodes().iter().all(|&x| x.abs() > 1e-14));
    }

    #[test]
    fn trapezoid_weights_sum_to_interior_length() {
        let g = Grid::new(-1.0, 1.0, 199).unwrap();
        let total: f64 = (0..g.n).map(|i| g.weight(i)).sum();
        assert_relative_eq!(total, 2.0 - g.h, max_relative = 1e-12);
    }

    #[test]
    fn graded_grid_is_symmetric_and_refined() {
        let g = GradedGrid::refined(15.0, &[7.5, -7.5], 1e-3, 5e-3, 0.05, 1.12).unwrap();
        let n = g.len();
        for i in 0..n {
            assert_relative_eq!(g.node(n - 1 - i), -g.node(i), epsilon = 1e-12);
        }
        // weights integrate a constant to the interior measure
        let total: f64 = (0..n).map(|i| g.weight(i)).sum();
        let h = g.spacings();
        let expect = 30.0 - 0.5 * (h[0] + h[n]);
        assert_relative_eq!(total, expect, max_relative = 1e-10);
        // fine spacing realized near the centers
        let near = (0..n - 1)
            .filter(|&i| (g.node(i) - 7.5).abs() < 4e-3)
            .map(|i| g.node(i + 1) - g.node(i))
            .fold(f64::MAX, f64::min);
        assert!(near <= 1.2e-3, "near-center spacing {near}");
    }

    #[test]
    fn graded_interpolation_hits_nodes_and_walls() {
        let g = GradedGrid::refined(10.0, &[3.0, -3.0], 0.01, 0.1, 0.2, 1.3).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&x| (-x * x).exp()).collect();
        assert_relative_eq!(g.interpolate(&f, g.node(5)), f[5], epsilon = 1e-14);
        assert_eq!(g.interpolate(&f, 10.0), 0.0);
        assert_eq!(g.interpolate(&f, -12.0), 0.0);
        let mid = 0.5 * (g.node(5) + g.node(6));
        let lin = 0.5 * (f[5] + f[6]);
        assert_relative_eq!(g.interpolate(&f, mid), lin, epsilon = 1e-12);
    }
}

//! Symmetric tridiagonal operators and the dependency-free eigen machinery
//! built on them: Sturm-sequence counting, bisection eigenvalues, pivoted
//! direct solves, inverse iteration, and constrained/deflated solves.
//!
//! Everything here works in the plain Euclidean inner product; callers map
//! to the quadrature-weighted norm where it matters.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar abstraction so the pivoted tridiagonal solver serves both the
/// real operators and the complex Crank-Nicolson steps.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn magnitude(self) -> f64;
    fn zero() -> Self;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn zero() -> Self {
        0.0
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// Solve a general tridiagonal system by Gaussian elimination with partial
/// pivoting (the classic gtsv sweep). `dl`, `d`, `du` are the sub-, main
/// and super-diagonals; the right-hand side is overwritten with the solution.
pub fn solve_tridiag_pivoted<S: Scalar>(
    dl: &[S],
    d: &[S],
    du: &[S],
    b: &mut [S],
) -> Result<()> {
    let n = d.len();
    debug_assert_eq!(dl.len(), n.saturating_sub(1));
    debug_assert_eq!(du.len(), n.saturating_sub(1));
    debug_assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(());
    }
    let dl = dl.to_vec();
    let mut d = d.to_vec();
    let mut du = du.to_vec();
    let mut du2 = vec![S::zero(); n.saturating_sub(2)];

    for i in 0..n - 1 {
        if d[i].magnitude() >= dl[i].magnitude() {
            if d[i].magnitude() == 0.0 {
                return Err(Error::SolverFailure {
                    what: format!("exactly singular tridiagonal pivot at row {i}"),
                    residual: 0.0,
                });
            }
            let fact = dl[i] / d[i];
            d[i + 1] = d[i + 1] - fact * du[i];
            let bi = b[i];
            b[i + 1] = b[i + 1] - fact * bi;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - fact * tmp;
            du[i] = tmp;
            if i < n - 2 {
                du2[i] = du[i + 1];
                du[i + 1] = S::zero() - fact * du2[i];
            }
            b.swap(i, i + 1);
            let bi = b[i];
            b[i + 1] = b[i + 1] - fact * bi;
        }
    }
    if d[n - 1].magnitude() == 0.0 {
        return Err(Error::SolverFailure {
            what: "exactly singular tridiagonal pivot at last row".into(),
            residual: 0.0,
        });
    }

    b[n - 1] = b[n - 1] / d[n - 1];
    if n >= 2 {
        let t = b[n - 1];
        b[n - 2] = (b[n - 2] - du[n - 2] * t) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        let t1 = b[i + 1];
        let t2 = b[i + 2];
        b[i] = (b[i] - du[i] * t1 - du2[i] * t2) / d[i];
    }
    Ok(())
}

/// Symmetric tridiagonal operator: main diagonal `diag`, off-diagonal `off`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
        SymTridiag { diag, off }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    pub fn apply_complex(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        debug_assert_eq!(v.len(), n);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = v[i] * self.diag[i];
            if i > 0 {
                acc += v[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                acc += v[i + 1] * self.off[i];
            }
            out[i] = acc;
        }
        out
    }

    /// `A + s I`.
    pub fn add_scalar(&self, s: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|d| d + s).collect(),
            off: self.off.clone(),
        }
    }

    /// `A + diag(w)`.
    pub fn add_diag(&self, w: &[f64]) -> SymTridiag {
        debug_assert_eq!(w.len(), self.n());
        SymTridiag {
            diag: self.diag.iter().zip(w).map(|(d, w)| d + w).collect(),
            off: self.off.clone(),
        }
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm / LDLT pivot count).
    pub fn count_below(&self, lambda: f64) -> usize {
        let n = self.n();
        let mut count = 0usize;
        let mut q = self.diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let q_safe = if q.abs() < 1e-300 {
                if q >= 0.0 {
                    1e-300
                } else {
                    -1e-300
                }
            } else {
                q
            };
            q = (self.diag[i] - lambda) - self.off[i - 1] * self.off[i - 1] / q_safe;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for i in 0..n {
            let el = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let er = if i < n - 1 { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - el - er);
            hi = hi.max(self.diag[i] + el + er);
        }
        (lo, hi)
    }

    /// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.n());
        let (mut a, mut b) = self.gershgorin();
        a -= 1.0;
        b += 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (b - a) <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
            if self.count_below(mid) <= k {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// All eigenvalues strictly below `bound`, ascending.
    pub fn eigenvalues_below(&self, bound: f64) -> Vec<f64> {
        let m = self.count_below(bound);
        (0..m).map(|k| self.eigenvalue(k)).collect()
    }

    /// Solve `(A - shift) x = b` with partial pivoting.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut x = b.to_vec();
        solve_tridiag_pivoted(&self.off, &d, &self.off, &mut x)?;
        debug_assert_eq!(x.len(), n);
        Ok(x)
    }

    /// Refine the eigenvector for an eigenvalue already known from bisection.
    /// The returned residual is measured against the Rayleigh quotient of
    /// the final iterate, which removes the bisection offset of order
    /// `eps * ||A||`. Returns `(vector, rayleigh_value, residual)`.
    pub fn inverse_iteration_polished(
        &self,
        lambda: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, f64, f64)> {
        let n = self.n();
        // deterministic start vector with no particular symmetry
        let mut v: Vec<f64> = (0..n)
            .map(|i| (0.7548776662 * (i as f64 + 1.0)).sin() + 0.003 * (i as f64 * 0.1).cos())
            .collect();
        normalize(&mut v);
        let floor = 20.0 * f64::EPSILON * self.norm_estimate().max(1.0);
        let mut best = (v.clone(), lambda, f64::MAX);
        for _ in 0..max_iter {
            let mut w = self.solve_shifted(lambda, &v)?;
            normalize(&mut w);
            let aw = self.apply(&w);
            let theta = dot(&aw, &w);
            let residual = (0..n)
                .map(|i| (aw[i] - theta * w[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            v = w;
            if residual < best.2 {
                best = (v.clone(), theta, residual);
            }
            if residual < floor {
                break;
            }
        }
        Ok(best)
    }

    /// Back-compatible wrapper returning `(vector, residual)`.
    pub fn inverse_iteration(&self, lambda: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let (v, _, r) = self.inverse_iteration_polished(lambda, max_iter)?;
        Ok((v, r))
    }

    /// Cheap upper bound on the operator norm.
    pub fn norm_estimate(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Eigenpair for the k-th smallest eigenvalue, plain-l2 normalized; the
    /// eigenvalue is the Rayleigh quotient of the refined vector.
    pub fn eigenpair(&self, k: usize) -> Result<(f64, Vec<f64>)> {
        let lambda = self.eigenvalue(k);
        let (v, theta, residual) = self.inverse_iteration_polished(lambda, 10)?;
        let tol = (1e-8_f64).max(100.0 * f64::EPSILON * self.norm_estimate());
        if residual > tol {
            return Err(Error::SolverFailure {
                what: format!("inverse iteration for eigenvalue {k} stalled"),
                residual,
            });
        }
        Ok((theta, v))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        for v in a.iter_mut() {
            *v /= n;
        }
    }
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Remove the component of `v` along the unit vector `u`.
pub fn project_out(v: &mut [f64], u: &[f64]) {
    let c = dot(v, u);
    axpy(v, -c, u);
}

/// Solve `(A - shift) y = b` restricted to the complement of a (near-)null
/// direction `kernel` (unit vector). The right-hand side is projected, the
/// pivoted solve runs as usual, the contaminated kernel component is
/// projected away, and one round of iterative refinement restores the
/// residual on the complement.
pub fn solve_deflated(
    a: &SymTridiag,
    shift: f64,
    kernel: &[f64],
    b: &[f64],
) -> Result<Vec<f64>> {
    let mut rhs = b.to_vec();
    project_out(&mut rhs, kernel);
    let mut y = a.solve_shifted(shift, &rhs)?;
    project_out(&mut y, kernel);
    for _ in 0..2 {
        let ay = a.apply(&y);
        let mut r: Vec<f64> = rhs
            .iter()
            .zip(ay.iter().zip(&y))
            .map(|(b, (ay, y))| b - (ay - shift * y))
            .collect();
        project_out(&mut r, kernel);
        let rn = norm(&r);
        if rn <= 1e-14 * norm(&rhs).max(1e-300) {
            break;
        }
        let mut dy = a.solve_shifted(shift, &r)?;
        project_out(&mut dy, kernel);
        axpy(&mut y, 1.0, &dy);
    }
    Ok(y)
}

/// Solve the bordered system `(A - shift) y + mu c = b`, `<c, y> = 0`,
/// for nonsingular `A - shift`. Returns `(y, mu)`.
pub fn bordered_solve(
    a: &SymTridiag,
    shift: f64,
    c: &[f64],
    b: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let ainv_b = a.solve_shifted(shift, b)?;
    let ainv_c = a.solve_shifted(shift, c)?;
    let denom = dot(&ainv_c, c);
    if denom.abs() < 1e-300 {
        return Err(Error::SolverFailure {
            what: "bordered solve: constraint direction degenerate".into(),
            residual: denom.abs(),
        });
    }
    let mu = dot(&ainv_b, c) / denom;
    let mut y = ainv_b;
    axpy(&mut y, -mu, &ainv_c);
    Ok((y, mu))
}

/// Secular function of the constrained eigenproblem: with `A v_k = nu_k v_k`,
/// the eigenvalues of `A` restricted to the complement of `c` are the roots
/// of `f(theta) = <(A - theta)^{-1} c, c>`, which is strictly increasing
/// between consecutive `nu_k`. One pivoted solve per evaluation.
fn secular(a: &SymTridiag, c: &[f64], theta: f64) -> Result<f64> {
    let y = a.solve_shifted(theta, c)?;
    Ok(dot(&y, c))
}

/// Smallest eigenvalue of `A` restricted to the orthogonal complement of a
/// unit vector `constraint`, located as the secular-equation root in the
/// gap between the two lowest unconstrained eigenvalues. Falls back to the
/// bottom eigenvalue itself when the constraint has no component on it.
/// Returns the eigenvalue and the constrained eigenvector.
pub fn constrained_smallest_eigenpair(
    a: &SymTridiag,
    constraint: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let nu0 = a.eigenvalue(0);
    let nu1 = a.eigenvalue(1);
    let scale = a.norm_estimate().max(1.0);
    let pad = 1e-13 * scale + 1e-13 * (nu1 - nu0).abs();
    let mut lo = nu0 + pad;
    let mut hi = nu1 - pad;
    if hi <= lo {
        // (near-)degenerate bottom pair: constrained minimum is pinned there
        let (v, _) = a.inverse_iteration(nu0, 6)?;
        return Ok((nu0, v));
    }
    let flo = secular(a, constraint, lo)?;
    let fhi = secular(a, constraint, hi)?;
    if flo >= 0.0 {
        // constraint has no component on the bottom eigenvector, which
        // therefore stays feasible: the constrained minimum is nu0
        let (mut v, _) = a.inverse_iteration(nu0, 6)?;
        project_out(&mut v, constraint);
        normalize(&mut v);
        return Ok((nu0, v));
    }
    if fhi <= 0.0 {
        // constraint is (numerically) the bottom eigenvector itself: the
        // root hugs nu1 to within the squared residual angle
        let (mut v, _) = a.inverse_iteration(nu1, 6)?;
        project_out(&mut v, constraint);
        normalize(&mut v);
        return Ok((nu1, v));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 8.0 * f64::EPSILON * mid.abs().max(1e-300) {
            break;
        }
        if secular(a, constraint, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut v = a.solve_shifted(theta, constraint)?;
    normalize(&mut v);
    project_out(&mut v, constraint);
    normalize(&mut v);
    Ok((theta, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian(n: usize, h: f64) -> SymTridiag {
        SymTridiag::new(vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1])
    }

    #[test]
    fn free_operator_matches_formula() {
        // diag 2/h^2 + V with V = 0, n = 3, h = 1
        let a = laplacian(3, 1.0);
        assert_eq!(a.diag, vec![2.0, 2.0, 2.0]);
        assert_eq!(a.off, vec![-1.0, -1.0]);
    }

    #[test]
    fn dirichlet_laplacian_eigenvalues_are_sine_modes() {
        let n = 400;
        let len = 1.0;
        let h = len / (n as f64 + 1.0);
        let a = laplacian(n, h);
        // exact discrete eigenvalues: (2 - 2 cos(k pi h)) / h^2; the Sturm
        // count is backward stable, so the bisection root carries an
        // absolute error of order eps * ||A||
        let tol = 1e3 * f64::EPSILON * a.norm_estimate();
        for k in 1..=3usize {
            let exact = (2.0 - 2.0 * (k as f64 * std::f64::consts::PI * h).cos()) / (h * h);
            assert_relative_eq!(a.eigenvalue(k - 1), exact, epsilon = tol);
        }
    }

    #[test]
    fn sturm_count_consistent_with_bisection() {
        let n = 200;
        let h = 0.05;
        let mut a = laplacian(n, h);
        for i in 0..n {
            a.diag[i] += -3.0 * (-(i as f64 - 100.0).powi(2) / 200.0).exp();
        }
        let evs = a.eigenvalues_below(0.0);
        assert_eq!(a.count_below(0.0), evs.len());
        for w in evs.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn pivoted_solve_handles_indefinite_matrix() {
        let n = 50;
        let mut a = laplacian(n, 0.3);
        for i in 0..n {
            a.diag[i] -= 20.0 * (-((i as f64) - 25.0).powi(2) / 10.0).exp();
        }
        let b: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x = a.solve_shifted(0.0, &b).unwrap();
        let r = a.apply(&x);
        let err: f64 = r.iter().zip(&b).map(|(r, b)| (r - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-9 * norm(&b) * a.norm_estimate());
    }

    #[test]
    fn complex_solve_round_trips() {
        use num_complex::Complex64 as C;
        let n = 40;
        let dl: Vec<C> = (0..n - 1).map(|i| C::new(-1.0, 0.1 * i as f64)).collect();
        let du: Vec<C> = (0..n - 1).map(|i| C::new(-1.0, -0.05 * i as f64)).collect();
        let d: Vec<C> = (0..n).map(|i| C::new(2.5 + (i % 3) as f64, 0.4)).collect();
        let b: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0 - i as f64 * 0.2)).collect();
        let mut x = b.clone();
        solve_tridiag_pivoted(&dl, &d, &du, &mut x).unwrap();
        // verify A x = b
        for i in 0..n {
            let mut acc = d[i] * x[i];
            if i > 0 {
                acc += dl[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += du[i] * x[i + 1];
            }
            assert!((acc - b[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_iteration_recovers_ground_state() {
        let n = 500;
        let h = 20.0 / (n as f64 + 1.0);
        let mut a = laplacian(n, h);
        for i in 0..n {
            let x = -10.0 + (i as f64 + 1.0) * h;
            a.diag[i] += -2.0 / x.cosh().powi(2);
        }
        let (e, v) = a.eigenpair(0).unwrap();
        assert_relative_eq!(e, -1.0, epsilon = 2e-3);
        // ground state has no nodes
        let sign = v[n / 2].signum();
        assert!(v.iter().all(|&x| x * sign > -1e-8));
    }

    #[test]
    fn deflated_solve_respects_complement() {
        let n = 300;
        let h = 0.1;
        let mut a = laplacian(n, h);
        for i in 0..n {
            a.diag[i] -= 1.1e1 * (-((i as f64) - 150.0).powi(2) / 400.0).exp();
        }
        // make the operator singular in a known direction: shift by -e0
        let (e0, v0) = a.eigenpair(0).unwrap();
        let sing = a.add_scalar(-e0);
        // rhs orthogonal to the kernel
        let mut b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.11).sin()).collect();
        project_out(&mut b, &v0);
        let y = solve_deflated(&sing, 0.0, &v0, &b).unwrap();
        let mut r = sing.apply(&y);
        for i in 0..n {
            r[i] -= b[i];
        }
        project_out(&mut r, &v0);
        assert!(norm(&r) < 1e-9 * norm(&b).max(1.0));
        assert!(dot(&y, &v0).abs() < 1e-10);
    }

    #[test]
    fn constrained_eigenvalue_interlaces() {
        let n = 300;
        let h = 0.08;
        let mut a = laplacian(n, h);
        for i in 0..n {
            a.diag[i] -= 8.0 * (-((i as f64) - 150.0).powi(2) / 300.0).exp();
        }
        let (e0, v0) = a.eigenpair(0).unwrap();
        let e1 = a.eigenvalue(1);
        // constrain against the ground state: minimum must land on e1
        let (theta, _) = constrained_smallest_eigenpair(&a, &v0).unwrap();
        assert_relative_eq!(theta, e1, max_relative = 1e-7);

        // constraining against a generic vector interlaces strictly
        let mut c: Vec<f64> = (0..n).map(|i| 1.0 + 0.2 * ((i as f64) * 0.3).sin()).collect();
        normalize(&mut c);
        let (theta_g, vg) = constrained_smallest_eigenpair(&a, &c).unwrap();
        assert!(theta_g > e0 && theta_g < e1, "interlacing violated: {theta_g}");
        assert!(dot(&vg, &c).abs() < 1e-8);
        // residual within the constrained subspace
        let av = a.apply(&vg);
        let mut r: Vec<f64> = av.iter().zip(&vg).map(|(a, v)| a - theta_g * v).collect();
        project_out(&mut r, &c);
        assert!(norm(&r) < 1e-7 * a.norm_estimate());
    }
}

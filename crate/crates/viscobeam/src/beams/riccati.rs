//! Complex symmetric matrix Riccati equation along a bicharacteristic.
//!
//! The quadratic phase Hessian `H(σ)` of a Gaussian beam satisfies
//!
//! `Ḣ + D + Bᵀ H + H B + H C H = 0`
//!
//! with `B = q_ζz`, `C = q_ζζ`, `D = q_zz` evaluated along the ray, for the
//! principal symbol `q(z, ζ) = (τ² - c(x)|ξ|²)/2` over spacetime coordinates
//! `z = (x, y, t)` (time last). Positivity of `Im H` is preserved by the
//! continuous flow; the integrator checks it at every accepted sample and
//! reports the parameter of first failure otherwise, which signals step
//! failure rather than a property of the equation.

use crate::error::{Error, Result};
use crate::media::SoundSpeedField;
use crate::rays::Bicharacteristic;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;

pub type CMat3 = Matrix3<C64>;

/// Minimum eigenvalue of the imaginary part of a complex symmetric matrix.
pub fn min_im_eigenvalue(h: &CMat3) -> f64 {
    let im = nalgebra::Matrix3::from_fn(|i, j| h[(i, j)].im);
    let sym = nalgebra::SymmetricEigen::new(im);
    sym.eigenvalues.min()
}

fn symmetrize(h: &CMat3) -> CMat3 {
    (h + h.transpose()) * C64::new(0.5, 0.0)
}

/// Second derivatives of `q` at a ray point, as the three coefficient
/// matrices of the Riccati equation.
fn coefficients(field: &SoundSpeedField, x: &crate::media::Point, xi: &nalgebra::Vector2<f64>) -> Result<(CMat3, CMat3, CMat3)> {
    let c = field.value(x)?;
    let gc = field.gradient(x)?;
    let hc = field.hessian(x)?;
    let xi2 = xi.norm_squared();

    // C = q_ζζ = diag(-c, -c, 1).
    let mut cc = CMat3::zeros();
    cc[(0, 0)] = C64::new(-c, 0.0);
    cc[(1, 1)] = C64::new(-c, 0.0);
    cc[(2, 2)] = C64::new(1.0, 0.0);

    // B = q_ζz with rows indexed by ζ, columns by z: B_jl = -ξ_j ∂_l c.
    let mut b = CMat3::zeros();
    for j in 0..2 {
        for l in 0..2 {
            b[(j, l)] = C64::new(-xi[j] * gc[l], 0.0);
        }
    }

    // D = q_zz: D_jl = -(1/2) |ξ|² ∂²_jl c on the spatial block.
    let mut d = CMat3::zeros();
    for j in 0..2 {
        for l in 0..2 {
            d[(j, l)] = C64::new(-0.5 * xi2 * hc[(j, l)], 0.0);
        }
    }
    Ok((b, cc, d))
}

fn riccati_rhs(field: &SoundSpeedField, ray: &Bicharacteristic, sigma: f64, h: &CMat3) -> Result<CMat3> {
    let p = ray.at(sigma);
    let (b, c, d) = coefficients(field, &p.x, &p.xi)?;
    Ok(-(d + b.transpose() * h + h * b + h * c * h))
}

/// Sampled Riccati solution with Hermite dense output.
#[derive(Debug, Clone)]
pub struct RiccatiPath {
    pub sigmas: Vec<f64>,
    pub h: Vec<CMat3>,
    pub hdot: Vec<CMat3>,
    /// Smallest eigenvalue of `Im H` seen along the path.
    pub min_im_eig: f64,
}

impl RiccatiPath {
    pub fn dsigma(&self) -> f64 {
        self.sigmas[1] - self.sigmas[0]
    }

    pub fn span(&self) -> f64 {
        *self.sigmas.last().unwrap()
    }

    /// Cubic Hermite interpolation of `H` (entrywise) at `sigma`.
    pub fn at(&self, sigma: f64) -> CMat3 {
        let n = self.sigmas.len();
        let ds = self.dsigma();
        let sig = sigma.clamp(0.0, self.span());
        let i = ((sig / ds).floor() as usize).min(n - 2);
        let s = (sig - self.sigmas[i]) / ds;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        self.h[i] * C64::new(h00, 0.0)
            + self.hdot[i] * C64::new(h10 * ds, 0.0)
            + self.h[i + 1] * C64::new(h01, 0.0)
            + self.hdot[i + 1] * C64::new(h11 * ds, 0.0)
    }

    /// `Ḣ` at `sigma` (linear interpolation; one order below `at`).
    pub fn derivative_at(&self, sigma: f64) -> CMat3 {
        let n = self.sigmas.len();
        let ds = self.dsigma();
        let sig = sigma.clamp(0.0, self.span());
        let i = ((sig / ds).floor() as usize).min(n - 2);
        let s = (sig - self.sigmas[i]) / ds;
        self.hdot[i] * C64::new(1.0 - s, 0.0) + self.hdot[i + 1] * C64::new(s, 0.0)
    }
}

/// Integrate the Riccati equation along `ray` with classical RK4 on a
/// uniform grid of `n_steps` panels, starting from `h0` with `Im h0 ≻ 0`.
pub fn solve_riccati(
    field: &SoundSpeedField,
    ray: &Bicharacteristic,
    h0: &CMat3,
    n_steps: usize,
) -> Result<RiccatiPath> {
    if (h0 - h0.transpose()).norm() > 1e-10 {
        return Err(Error::Argument("initial Riccati matrix must be symmetric".into()));
    }
    if min_im_eigenvalue(h0) <= 0.0 {
        return Err(Error::Argument("Im H0 must be positive definite".into()));
    }
    let span = ray.span();
    let ds = span / n_steps as f64;
    let mut sigmas = Vec::with_capacity(n_steps + 1);
    let mut hs = Vec::with_capacity(n_steps + 1);
    let mut hdots = Vec::with_capacity(n_steps + 1);
    let mut h = *h0;
    let mut min_eig = min_im_eigenvalue(&h);
    sigmas.push(0.0);
    hs.push(h);
    hdots.push(riccati_rhs(field, ray, 0.0, &h)?);

    for step in 0..n_steps {
        let s0 = step as f64 * ds;
        let k1 = riccati_rhs(field, ray, s0, &h)?;
        let k2 = riccati_rhs(field, ray, s0 + 0.5 * ds, &(h + k1 * C64::new(0.5 * ds, 0.0)))?;
        let k3 = riccati_rhs(field, ray, s0 + 0.5 * ds, &(h + k2 * C64::new(0.5 * ds, 0.0)))?;
        let k4 = riccati_rhs(field, ray, s0 + ds, &(h + k3 * C64::new(ds, 0.0)))?;
        h = h + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(ds / 6.0, 0.0);
        h = symmetrize(&h);
        let sig = s0 + ds;
        let eig = min_im_eigenvalue(&h);
        if !(eig > 0.0) || !h.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "Riccati solution lost Im-positivity at sigma = {sig} (min eig {eig}); \
                 the continuous flow preserves it, so this indicates step failure or a caustic-scale blow-up"
            )));
        }
        min_eig = min_eig.min(eig);
        sigmas.push(sig);
        hs.push(h);
        hdots.push(riccati_rhs(field, ray, sig, &h)?);
    }

    Ok(RiccatiPath { sigmas, h: hs, hdot: hdots, min_im_eig: min_eig })
}

/// Closed form for constant sound speed: `H(σ) = (H0^{-1} + σ C)^{-1}`.
pub fn constant_speed_closed_form(c: f64, h0: &CMat3, sigma: f64) -> Result<CMat3> {
    let mut cc = CMat3::zeros();
    cc[(0, 0)] = C64::new(-c, 0.0);
    cc[(1, 1)] = C64::new(-c, 0.0);
    cc[(2, 2)] = C64::new(1.0, 0.0);
    let h0inv = h0
        .try_inverse()
        .ok_or_else(|| Error::Numerical("H0 is not invertible".into()))?;
    (h0inv + cc * C64::new(sigma, 0.0))
        .try_inverse()
        .ok_or_else(|| Error::Numerical("closed-form resolvent is singular".into()))
}

/// `i I`, the standard launch Hessian.
pub fn standard_h0() -> CMat3 {
    CMat3::identity() * C64::new(0.0, 1.0)
}

/// Random symmetric `H0` with `Im H0 ≻ 0`, for positivity sweeps.
pub fn random_h0(rng: &mut impl rand::Rng) -> CMat3 {
    let mut re = Matrix3::<f64>::zeros();
    let mut a = Matrix3::<f64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            re[(i, j)] = rng.gen_range(-1.0..1.0);
            a[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    let re = (re + re.transpose()) * 0.5;
    // A Aᵀ + εI is symmetric positive definite.
    let im = a * a.transpose() + Matrix3::identity() * 0.3;
    CMat3::from_fn(|i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// Spacetime tangent `ż = (-cξ, τ)` of the ray at `sigma`.
pub fn ray_zdot(field: &SoundSpeedField, ray: &Bicharacteristic, sigma: f64) -> Result<Vector3<f64>> {
    let p = ray.at(sigma);
    let c = field.value(&p.x)?;
    Ok(Vector3::new(-c * p.xi[0], -c * p.xi[1], p.tau))
}

/// Covector velocity `ζ̇ = (|ξ|² ∇c / 2, 0)` at `sigma`.
pub fn ray_zetadot(field: &SoundSpeedField, ray: &Bicharacteristic, sigma: f64) -> Result<Vector3<f64>> {
    let p = ray.at(sigma);
    let gc = field.gradient(&p.x)?;
    let xi2 = p.xi.norm_squared();
    Ok(Vector3::new(0.5 * xi2 * gc[0], 0.5 * xi2 * gc[1], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Bounds, Point};
    use crate::rays::{trace_bicharacteristic, PhasePoint};
    use nalgebra::Vector2;
    use rand::SeedableRng;

    fn straight_ray(c: f64, span: f64) -> (SoundSpeedField, Bicharacteristic) {
        let field = SoundSpeedField::constant(c, Bounds::new([-10.0, -10.0], [10.0, 10.0])).unwrap();
        let start = PhasePoint {
            x: Point::new(0.0, 0.0),
            t: 0.0,
            xi: Vector2::new(-1.0 / c.sqrt(), 0.0),
            tau: 1.0,
        };
        let ray = trace_bicharacteristic(&field, &start, span, 1e-10).unwrap();
        (field, ray)
    }

    #[test]
    fn matches_constant_speed_closed_form() {
        let (field, ray) = straight_ray(1.0, 2.0);
        let h0 = standard_h0();
        let path = solve_riccati(&field, &ray, &h0, 400).unwrap();
        for (i, sig) in path.sigmas.iter().enumerate() {
            let want = constant_speed_closed_form(1.0, &h0, *sig).unwrap();
            assert!((path.h[i] - want).norm() <= 1e-8, "mismatch at sigma {sig}");
            // Im H_jj = 1/(1+σ²) for H0 = iI, c = 1.
            let im_diag = path.h[i][(0, 0)].im;
            let want_diag = 1.0 / (1.0 + sig * sig);
            assert!((im_diag - want_diag).abs() <= 1e-8);
        }
    }

    #[test]
    fn initial_condition_is_exact() {
        let (field, ray) = straight_ray(2.0, 1.0);
        let h0 = random_h0(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let path = solve_riccati(&field, &ray, &h0, 100).unwrap();
        assert!((path.h[0] - h0).norm() == 0.0);
    }

    #[test]
    fn symmetry_and_positivity_along_lens() {
        let field = SoundSpeedField::gaussian_lens(1.0, 0.3, [0.0, 0.0], 1.0, Bounds::new([-3.0, -3.0], [3.0, 3.0]))
            .unwrap();
        let start = PhasePoint::null_from_direction(&field, Point::new(-2.0, 0.2), 0.0, Vector2::new(1.0, 0.0))
            .unwrap();
        let ray = trace_bicharacteristic(&field, &start, 3.5, 1e-10).unwrap();
        let path = solve_riccati(&field, &ray, &standard_h0(), 800).unwrap();
        assert!(path.min_im_eig > 0.0);
        for h in &path.h {
            assert!((h - h.transpose()).norm() <= 1e-10);
        }
    }

    #[test]
    fn refinement_agreement_on_lens() {
        let field = SoundSpeedField::gaussian_lens(1.0, 0.3, [0.0, 0.0], 1.0, Bounds::new([-3.0, -3.0], [3.0, 3.0]))
            .unwrap();
        let start = PhasePoint::null_from_direction(&field, Point::new(-2.0, 0.0), 0.0, Vector2::new(1.0, 0.1).normalize())
            .unwrap();
        let ray = trace_bicharacteristic(&field, &start, 3.0, 1e-11).unwrap();
        let coarse = solve_riccati(&field, &ray, &standard_h0(), 400).unwrap();
        let fine = solve_riccati(&field, &ray, &standard_h0(), 800).unwrap();
        let h_c = coarse.at(ray.span());
        let h_f = fine.at(ray.span());
        assert!((h_c - h_f).norm() <= 1e-7, "diff {}", (h_c - h_f).norm());
    }

    #[test]
    fn positivity_over_random_initializations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let lens = SoundSpeedField::gaussian_lens(1.0, 0.3, [0.0, 0.0], 1.0, Bounds::new([-3.0, -3.0], [3.0, 3.0]))
            .unwrap();
        let (cfield, cray) = straight_ray(1.0, 2.5);
        let start = PhasePoint::null_from_direction(&lens, Point::new(-2.0, 0.1), 0.0, Vector2::new(1.0, 0.0))
            .unwrap();
        let lray = trace_bicharacteristic(&lens, &start, 3.0, 1e-10).unwrap();
        for i in 0..100 {
            let h0 = random_h0(&mut rng);
            let path = if i % 2 == 0 {
                solve_riccati(&cfield, &cray, &h0, 300).unwrap()
            } else {
                solve_riccati(&lens, &lray, &h0, 300).unwrap()
            };
            assert!(path.min_im_eig > 0.0);
        }
    }

    #[test]
    fn rejects_bad_initial_matrix() {
        let (field, ray) = straight_ray(1.0, 1.0);
        let bad = CMat3::identity(); // Im = 0.
        assert!(solve_riccati(&field, &ray, &bad, 50).is_err());
    }
}

//! Volterra integral equations of the second kind on uniform time grids.
//!
//! Equations of the form `u(t) = f(t) + ∫_0^t K(t-s) u(s) ds` are solved
//! directly by product-trapezoid forward substitution (second order in `dt`)
//! and, alternatively, through the resolvent kernel built from the Neumann
//! series `R = Σ K_n`, `K_n = K_1 * K_{n-1}`. The same machinery backs the
//! memory operator applied to quasimode amplitude corrections.

use crate::error::{Error, Result};

/// Uniform grid on `[t0, t1]` with `n_steps` panels (`n_steps + 1` samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::Argument("time grid needs t1 > t0".into()));
        }
        if n_steps == 0 {
            return Err(Error::Argument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { t0, t1, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps).map(|i| self.t0 + i as f64 * dt).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.times().into_iter().map(f).collect()
    }
}

/// Difference kernel `K(t)` sampled on `[0, t1 - t0]`.
#[derive(Debug, Clone)]
pub struct ConvolutionKernel {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl ConvolutionKernel {
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &TimeGrid, k: F) -> Result<Self> {
        let dt = grid.dt();
        let samples: Vec<f64> = (0..=grid.n_steps).map(|i| k(i as f64 * dt)).collect();
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("kernel is not finite on the grid".into()));
        }
        Ok(ConvolutionKernel { samples, dt })
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Solve `u = f + ∫_0^t K(t-s) u(s) ds` by product-trapezoid forward
/// substitution. Discretization error is `O(dt^2)`.
pub fn solve_second_kind(kernel: &ConvolutionKernel, source: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    if source.len() != grid.len() {
        return Err(Error::Argument(format!(
            "source has {} samples, grid expects {}",
            source.len(),
            grid.len()
        )));
    }
    if kernel.samples.len() < grid.len() {
        return Err(Error::Argument("kernel sampled on a shorter grid than the solve".into()));
    }
    let dt = grid.dt();
    let k = &kernel.samples;
    let n = grid.len();
    let mut u = vec![0.0; n];
    u[0] = source[0];
    for i in 1..n {
        // Trapezoid over [0, t_i]: half weights at both endpoints.
        let mut acc = 0.5 * k[i] * u[0];
        for j in 1..i {
            acc += k[i - j] * u[j];
        }
        let denom = 1.0 - 0.5 * dt * k[0];
        if denom.abs() < 1e-300 {
            return Err(Error::SingularOperator("vanishing diagonal in Volterra solve".into()));
        }
        u[i] = (source[i] + dt * acc) / denom;
    }
    Ok(u)
}

/// Same forward substitution for a general (non-difference) kernel `K(t, s)`.
pub fn solve_second_kind_general<K: Fn(f64, f64) -> f64>(
    kernel: K,
    source: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    if source.len() != grid.len() {
        return Err(Error::Argument("source/grid length mismatch".into()));
    }
    let dt = grid.dt();
    let ts = grid.times();
    let n = grid.len();
    let mut u = vec![0.0; n];
    u[0] = source[0];
    for i in 1..n {
        let ti = ts[i];
        let mut acc = 0.5 * kernel(ti, ts[0]) * u[0];
        for j in 1..i {
            acc += kernel(ti, ts[j]) * u[j];
        }
        let denom = 1.0 - 0.5 * dt * kernel(ti, ti);
        if denom.abs() < 1e-300 {
            return Err(Error::SingularOperator("vanishing diagonal in Volterra solve".into()));
        }
        u[i] = (source[i] + dt * acc) / denom;
    }
    Ok(u)
}

/// Trapezoid convolution `(a * b)(t_i) = ∫_0^{t_i} a(t-s) b(s) ds` on the grid.
fn convolve(a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.5 * (a[i] * b[0] + a[0] * b[i]);
        for j in 1..i {
            acc += a[i - j] * b[j];
        }
        *o = acc * dt;
    }
    out
}

/// Hard cap on Neumann terms; kernels at the scales used here converge in
/// roughly twenty terms.
pub const RESOLVENT_TERM_CAP: usize = 64;

/// Resolvent kernel via the Neumann series, truncated once the next term's
/// sup norm drops below `tol`.
pub fn resolvent_kernel(kernel: &ConvolutionKernel, grid: &TimeGrid, tol: f64) -> Result<ConvolutionKernel> {
    if !(tol > 0.0) {
        return Err(Error::Argument("resolvent tolerance must be positive".into()));
    }
    let dt = grid.dt();
    let base = &kernel.samples[..grid.len()];
    let mut term: Vec<f64> = base.to_vec();
    let mut sum = term.clone();
    for _ in 1..RESOLVENT_TERM_CAP {
        term = convolve(base, &term, dt);
        let sup = term.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        if sup <= tol {
            return Ok(ConvolutionKernel { samples: sum, dt });
        }
    }
    Err(Error::Convergence(format!(
        "Neumann series for the resolvent did not reach tol {tol} within {RESOLVENT_TERM_CAP} terms"
    )))
}

/// Apply a resolvent: `u = f + ∫_0^t R(t-s) f(s) ds`.
pub fn apply_resolvent(resolvent: &ConvolutionKernel, source: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let conv = convolve(&resolvent.samples[..grid.len()], source, grid.dt());
    source.iter().zip(conv).map(|(f, c)| f + c).collect()
}

/// The memory operator acting on amplitude corrections:
///
/// `V w(t) = (1/2) c w(0_weight) w(t) - (1/2) ∫_0^t G(t-s) weight(s) w(s) ds`
///
/// where `weight` is the squared phase-gradient profile along the launch
/// slice and `c` the stiffness at the evaluation point. Inversion divides
/// through by the leading coefficient and solves a second-kind equation.
#[derive(Debug, Clone)]
pub struct MemoryOperatorV {
    /// Stiffness value `c` at the spatial point.
    pub c: f64,
    /// `weight(s)` sampled on the grid.
    pub weight: Vec<f64>,
    /// `G(t)` sampled on the grid (kernel profile at the spatial point).
    pub g: Vec<f64>,
    pub grid: TimeGrid,
}

impl MemoryOperatorV {
    pub fn new(c: f64, weight: Vec<f64>, g: Vec<f64>, grid: TimeGrid) -> Result<Self> {
        if weight.len() != grid.len() || g.len() != grid.len() {
            return Err(Error::Argument("V operator samples must match the grid".into()));
        }
        Ok(MemoryOperatorV { c, weight, g, grid })
    }

    fn leading(&self) -> Result<f64> {
        let lead = 0.5 * self.c * self.weight[0];
        if lead.abs() < 1e-300 {
            return Err(Error::SingularOperator(
                "vanishing leading coefficient (1/2) c |∇φ(0)|² in V".into(),
            ));
        }
        Ok(lead)
    }

    /// Forward application `V input`.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        let lead = self.leading()?;
        if input.len() != self.grid.len() {
            return Err(Error::Argument("input length mismatch in V".into()));
        }
        let dt = self.grid.dt();
        let n = input.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            if i >= 1 {
                acc += 0.5 * (self.g[i] * self.weight[0] * input[0] + self.g[0] * self.weight[i] * input[i]);
                for j in 1..i {
                    acc += self.g[i - j] * self.weight[j] * input[j];
                }
                acc *= dt;
            }
            out[i] = lead * input[i] - 0.5 * acc;
        }
        Ok(out)
    }

    /// Solve `V w = rhs` for `w`.
    pub fn invert(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lead = self.leading()?;
        let scaled: Vec<f64> = rhs.iter().map(|r| r / lead).collect();
        let c = self.c;
        let w0 = self.weight[0];
        let g = self.g.clone();
        let weight = self.weight.clone();
        let dt = self.grid.dt();
        solve_second_kind_general(
            |t, s| {
                let i = ((t - self.grid.t0) / dt).round() as usize;
                let j = ((s - self.grid.t0) / dt).round() as usize;
                g[i - j] * weight[j] / (c * w0)
            },
            &scaled,
            &self.grid,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn vanishing_kernel_returns_source() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| 0.0).unwrap();
        let f = grid.sample(|t| (3.0 * t).sin());
        let u = solve_second_kind(&kernel, &f, &grid).unwrap();
        for (a, b) in u.iter().zip(&f) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_kernel_gives_exponential() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| 1.0).unwrap();
        let f = vec![1.0; grid.len()];
        let u = solve_second_kind(&kernel, &f, &grid).unwrap();
        let max_rel = u
            .iter()
            .zip(grid.times())
            .map(|(ui, t)| (ui - t.exp()).abs() / t.exp())
            .fold(0.0_f64, f64::max);
        assert!(max_rel <= 1e-5, "max rel err {max_rel}");
    }

    #[test]
    fn linear_kernel_gives_cosh() {
        // u = 1 + ∫ (t-s) u ds  ⇔  u'' = u, u(0)=1, u'(0)=0.
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |t| t).unwrap();
        let f = vec![1.0; grid.len()];
        let u = solve_second_kind(&kernel, &f, &grid).unwrap();
        for (ui, t) in u.iter().zip(grid.times()) {
            assert_relative_eq!(*ui, t.cosh(), max_relative = 2e-6);
        }
    }

    #[test]
    fn second_order_convergence() {
        // Halving dt should cut the error by roughly four.
        let err_at = |n: usize| {
            let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
            let kernel = ConvolutionKernel::from_fn(&grid, |_| 1.0).unwrap();
            let f = vec![1.0; grid.len()];
            let u = solve_second_kind(&kernel, &f, &grid).unwrap();
            u.iter()
                .zip(grid.times())
                .map(|(ui, t)| (ui - t.exp()).abs())
                .fold(0.0_f64, f64::max)
        };
        let ratio = err_at(200) / err_at(400);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn resolvent_of_constant_kernel() {
        let grid = TimeGrid::new(0.0, 1.0, 800).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| 1.0).unwrap();
        let r = resolvent_kernel(&kernel, &grid, 1e-12).unwrap();
        for (ri, t) in r.samples.iter().zip(grid.times()) {
            assert_relative_eq!(*ri, t.exp(), max_relative = 2e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn resolvent_of_zero_kernel_is_zero() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| 0.0).unwrap();
        let r = resolvent_kernel(&kernel, &grid, 1e-10).unwrap();
        assert!(r.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn resolvent_negative_constant() {
        let grid = TimeGrid::new(0.0, 2.0, 1600).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| -0.5).unwrap();
        let r = resolvent_kernel(&kernel, &grid, 1e-12).unwrap();
        for (ri, t) in r.samples.iter().zip(grid.times()) {
            let want = -0.5 * (-0.5 * t).exp();
            assert_relative_eq!(*ri, want, max_relative = 2e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn memory_operator_identity_when_kernel_vanishes() {
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let v = MemoryOperatorV::new(
            2.0,
            vec![1.0; grid.len()],
            vec![0.0; grid.len()],
            grid,
        )
        .unwrap();
        let input = grid.sample(|t| t * t - 0.3);
        let out = v.apply(&input).unwrap();
        // Reduces to multiplication by (1/2) c.
        for (o, i) in out.iter().zip(&input) {
            assert_relative_eq!(*o, *i, max_relative = 1e-14);
        }
        let back = v.invert(&out).unwrap();
        for (b, i) in back.iter().zip(&input) {
            assert_relative_eq!(*b, *i, max_relative = 1e-12);
        }
    }

    #[test]
    fn memory_operator_matches_second_kind_form() {
        // Constant G and unit weight: V w = (c/2) [w - ∫ (G/c)(t-s) w ds],
        // so V w = rhs matches a direct second-kind solve.
        let grid = TimeGrid::new(0.0, 1.0, 400).unwrap();
        let c = 1.7;
        let g0 = 0.8;
        let v = MemoryOperatorV::new(c, vec![1.0; grid.len()], vec![g0; grid.len()], grid).unwrap();
        let rhs = grid.sample(|t| (2.0 * t).cos());
        let w = v.invert(&rhs).unwrap();
        let kernel = ConvolutionKernel::from_fn(&grid, |_| g0 / c).unwrap();
        let scaled: Vec<f64> = rhs.iter().map(|r| 2.0 * r / c).collect();
        let w2 = solve_second_kind(&kernel, &scaled, &grid).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            assert_relative_eq!(*a, *b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn memory_operator_zero_input() {
        let grid = TimeGrid::new(0.0, 1.0, 32).unwrap();
        let v = MemoryOperatorV::new(
            1.0,
            vec![1.0; grid.len()],
            grid.sample(|t| (-t).exp()),
            grid,
        )
        .unwrap();
        let out = v.apply(&vec![0.0; grid.len()]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singular_leading_coefficient_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let v = MemoryOperatorV::new(1.0, vec![0.0; grid.len()], vec![1.0; grid.len()], grid).unwrap();
        assert!(matches!(
            v.invert(&vec![1.0; grid.len()]),
            Err(crate::error::Error::SingularOperator(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn resolvent_route_matches_direct_solve(
            a in -1.5_f64..1.5,
            b in -1.0_f64..1.0,
            w in 0.5_f64..4.0,
            phase in 0.0_f64..3.0,
        ) {
            // Random smooth kernel and source on [0, 1].
            let tol = 1e-10;
            let grid = TimeGrid::new(0.0, 1.0, 500).unwrap();
            let kernel = ConvolutionKernel::from_fn(&grid, |t| a * (w * t).cos() + b * (-t).exp()).unwrap();
            let f = grid.sample(|t| (w * t + phase).sin());
            let direct = solve_second_kind(&kernel, &f, &grid).unwrap();
            let r = resolvent_kernel(&kernel, &grid, tol).unwrap();
            let via_resolvent = apply_resolvent(&r, &f, &grid);
            let dt = grid.dt();
            let err = direct
                .iter()
                .zip(&via_resolvent)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0_f64, f64::max);
            // Truncation plus O(dt^2) discretization mismatch between routes.
            prop_assert!(err <= 10.0 * tol + 50.0 * dt * dt, "err {err}");
        }
    }
}

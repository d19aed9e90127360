//! Small numerical helpers used across modules: quadrature rules,
//! least-squares slope fits, cubic splines, and deterministic hashing.

use crate::error::{Error, Result};

/// Composite Simpson weights for `n + 1` equispaced samples (`n` even).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson rule needs an even panel count");
    let mut w = vec![0.0; n + 1];
    w[0] = 1.0;
    w[n] = 1.0;
    for (i, wi) in w.iter_mut().enumerate().take(n).skip(1) {
        *wi = if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    for wi in w.iter_mut() {
        *wi *= h / 3.0;
    }
    w
}

/// Integrate samples on a uniform grid with composite Simpson,
/// falling back to trapezoid on the last panel when the count is even.
pub fn integrate_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let panels = n - 1;
    if panels % 2 == 0 {
        simpson_weights(panels, h)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    } else {
        // Simpson on the first n-2 panels, trapezoid on the last.
        let head: f64 = simpson_weights(panels - 1, h)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum();
        head + 0.5 * h * (values[n - 2] + values[n - 1])
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// computed by Newton iteration on Legendre polynomials.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument(
            "linear fit needs at least two matching samples".into(),
        ));
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Numerical("degenerate abscissae in linear fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept))
}

/// Fitted slope of log(y) against log(x); used for residual-rate scans.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y
        .iter()
        .map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    if ly.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-positive value in log-log fit".into()));
    }
    Ok(linear_fit(&lx, &ly)?.0)
}

/// Natural cubic spline through `(x_i, y_i)` on a uniform grid.
///
/// Stores second derivatives; evaluation gives value, first and second
/// derivative of the interpolant.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    d2: Vec<f64>,
}

impl CubicSpline {
    pub fn new_uniform(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 2 && h > 0.0);
        let mut d2 = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the natural-spline tridiagonal system.
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                rhs[i] = 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]) / (h * h);
            }
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            d2[1..=m].copy_from_slice(&sol);
        }
        CubicSpline { x0, h, y: y.to_vec(), d2 }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.y.len();
        let t = (x - self.x0) / self.h;
        let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, x - (self.x0 + i as f64 * self.h))
    }

    pub fn value(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        let h = self.h;
        let a = (h - dx) / h;
        let b = dx / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.d2[i] + (b * b * b - b) * self.d2[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        let h = self.h;
        let a = (h - dx) / h;
        let b = dx / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.d2[i + 1] - (3.0 * a * a - 1.0) * self.d2[i]) * h / 6.0
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        let h = self.h;
        let a = (h - dx) / h;
        let b = dx / h;
        a * self.d2[i] + b * self.d2[i + 1]
    }
}

/// FNV-1a 64-bit hash; used to stamp output files with a config digest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Format a float so equal values always serialize to identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Normalize -0.0.
        return "0".into();
    }
    let s = format!("{v:.17e}");
    // Trim redundant trailing zeros in the mantissa for readability while
    // keeping round-trip exactness.
    match s.split_once('e') {
        Some((mant, exp)) => {
            let trimmed = mant.trim_end_matches('0').trim_end_matches('.');
            format!("{trimmed}e{exp}")
        }
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let n = 10;
        let h = 0.1;
        let vals: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
        let got: f64 = simpson_weights(n, h).iter().zip(&vals).map(|(w, v)| w * v).sum();
        assert_relative_eq!(got, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_degree() {
        // 5-point rule is exact for degree 9.
        let (x, w) = gauss_legendre_on(5, 0.0, 1.0);
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(9)).collect::<Vec<_>>().iter().sum();
        assert_relative_eq!(got, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let n = 200;
        let h = 1.0 / n as f64;
        let y: Vec<f64> = (0..=n).map(|i| (2.0 * i as f64 * h).sin()).collect();
        let sp = CubicSpline::new_uniform(0.0, h, &y);
        let x = 0.377;
        assert_relative_eq!(sp.value(x), (2.0 * x).sin(), max_relative = 1e-7);
        assert_relative_eq!(sp.derivative(x), 2.0 * (2.0 * x).cos(), max_relative = 1e-5);
        assert_relative_eq!(
            sp.second_derivative(x),
            -4.0 * (2.0 * x).sin(),
            max_relative = 1e-3
        );
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [20.0_f64, 40.0, 80.0, 160.0];
        let y: Vec<f64> = x.iter().map(|k| 3.0 * k.powf(-1.5)).collect();
        assert_relative_eq!(loglog_slope(&x, &y).unwrap(), -1.5, max_relative = 1e-12);
    }

    #[test]
    fn fmt_f64_round_trips() {
        for v in [1.0, -0.125, 3.141592653589793, 1.0e-17, -2.5e300] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}

//! Sound-speed fields and memory kernels.
//!
//! The medium is a pair `(c, G)`: a time-independent stiffness field `c(x)`
//! (speed-squared units; the travel-time metric is `c^{-1} δ_jk` and rays move
//! at speed `sqrt(c)`) and a memory kernel `G(x, t)` entering the evolution
//! through a time convolution against `∇u`. Every consumer downstream needs
//! exact first/second derivative jets of `c` and time-derivative jets of `G`
//! at `t = 0`, so both are represented analytically where possible and by a
//! tensor-product cubic spline for gridded data.

use crate::error::{Error, Result};
use crate::util::CubicSpline;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub type Point = Vector2<f64>;

/// Axis-aligned box of validity for a field.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Bounds { min, max }
    }

    pub fn contains(&self, x: &Point) -> bool {
        x[0] >= self.min[0] && x[0] <= self.max[0] && x[1] >= self.min[1] && x[1] <= self.max[1]
    }

    pub fn diameter(&self) -> f64 {
        let dx = self.max[0] - self.min[0];
        let dy = self.max[1] - self.min[1];
        (dx * dx + dy * dy).sqrt()
    }
}

/// Uniform grid of scalar samples with tensor-product cubic-spline
/// evaluation. The spline supplies values and derivative jets from one
/// interpolant so that the jets stay consistent with finite differences
/// of the value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GriddedField {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    /// Row-major: `values[j * nx + i]` is the sample at `(x0 + i dx, y0 + j dy)`.
    pub values: Vec<f64>,
}

impl GriddedField {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, dx: f64, dy: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Argument("gridded field needs at least 4x4 samples".into()));
        }
        if values.len() != nx * ny {
            return Err(Error::Argument(format!(
                "gridded field expects {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Argument("grid spacings must be positive".into()));
        }
        Ok(GriddedField { nx, ny, x0, y0, dx, dy, values })
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            [self.x0, self.y0],
            [
                self.x0 + (self.nx - 1) as f64 * self.dx,
                self.y0 + (self.ny - 1) as f64 * self.dy,
            ],
        )
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    /// Value, gradient and Hessian of the tensor-product spline at `x`.
    pub fn jet(&self, x: &Point) -> (f64, Vector2<f64>, Matrix2<f64>) {
        // Spline each grid row in x, then spline the per-row results in y.
        let mut v = Vec::with_capacity(self.ny);
        let mut vx = Vec::with_capacity(self.ny);
        let mut vxx = Vec::with_capacity(self.ny);
        for j in 0..self.ny {
            let sp = CubicSpline::new_uniform(self.x0, self.dx, self.row(j));
            v.push(sp.value(x[0]));
            vx.push(sp.derivative(x[0]));
            vxx.push(sp.second_derivative(x[0]));
        }
        let sv = CubicSpline::new_uniform(self.y0, self.dy, &v);
        let svx = CubicSpline::new_uniform(self.y0, self.dy, &vx);
        let svxx = CubicSpline::new_uniform(self.y0, self.dy, &vxx);
        let value = sv.value(x[1]);
        let grad = Vector2::new(svx.value(x[1]), sv.derivative(x[1]));
        let hess = Matrix2::new(
            svxx.value(x[1]),
            svx.derivative(x[1]),
            svx.derivative(x[1]),
            sv.second_derivative(x[1]),
        );
        (value, grad, hess)
    }

    /// Load from the documented CSV layout: a header row
    /// `nx, ny, x0, y0, dx, dy` followed by `ny` rows of `nx` values each.
    /// Lines starting with `#` are comments.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty grid CSV".into()))?;
        let h: Vec<f64> = header
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad grid CSV header: {e}")))?;
        if h.len() != 6 {
            return Err(Error::Config("grid CSV header must be nx,ny,x0,y0,dx,dy".into()));
        }
        let (nx, ny) = (h[0] as usize, h[1] as usize);
        let mut values = Vec::with_capacity(nx * ny);
        for line in lines {
            for tok in line.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad grid CSV value: {e}")))?,
                );
            }
        }
        GriddedField::new(nx, ny, h[2], h[3], h[4], h[5], values)
    }

    pub fn to_csv(&self, path: &Path, header_comment: Option<&str>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        if let Some(c) = header_comment {
            writeln!(f, "# {c}")?;
        }
        writeln!(f, "{},{},{},{},{},{}", self.nx, self.ny, self.x0, self.y0, self.dx, self.dy)?;
        for j in 0..self.ny {
            let row: Vec<String> = self.row(j).iter().map(|v| crate::util::fmt_f64(*v)).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Spatial coefficient field `c(x)` with exact derivative jets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SoundSpeedField {
    Constant {
        c: f64,
        bounds: Bounds,
    },
    /// Radial profile `c(x) = c0 - amp * exp(-|x - center|^2 / width^2)`.
    GaussianLens {
        c0: f64,
        amp: f64,
        center: [f64; 2],
        width: f64,
        bounds: Bounds,
    },
    Gridded(GriddedField),
}

impl SoundSpeedField {
    pub fn constant(c: f64, bounds: Bounds) -> Result<Self> {
        let f = SoundSpeedField::Constant { c, bounds };
        f.validate()?;
        Ok(f)
    }

    pub fn gaussian_lens(c0: f64, amp: f64, center: [f64; 2], width: f64, bounds: Bounds) -> Result<Self> {
        let f = SoundSpeedField::GaussianLens { c0, amp, center, width, bounds };
        f.validate()?;
        Ok(f)
    }

    pub fn gridded(grid: GriddedField) -> Result<Self> {
        let f = SoundSpeedField::Gridded(grid);
        f.validate()?;
        Ok(f)
    }

    pub fn bounds(&self) -> Bounds {
        match self {
            SoundSpeedField::Constant { bounds, .. } => *bounds,
            SoundSpeedField::GaussianLens { bounds, .. } => *bounds,
            SoundSpeedField::Gridded(g) => g.bounds(),
        }
    }

    /// Positivity check on a dense sample grid.
    pub fn validate(&self) -> Result<f64> {
        let b = self.bounds();
        let n = 64;
        let mut cmin = f64::INFINITY;
        for j in 0..=n {
            for i in 0..=n {
                let x = Point::new(
                    b.min[0] + (b.max[0] - b.min[0]) * i as f64 / n as f64,
                    b.min[1] + (b.max[1] - b.min[1]) * j as f64 / n as f64,
                );
                cmin = cmin.min(self.value_unchecked(&x));
            }
        }
        if !(cmin > 0.0) {
            return Err(Error::Domain(format!(
                "sound speed field is not positive (min sample {cmin})"
            )));
        }
        Ok(cmin)
    }

    /// Minimum of `c` over the dense sample grid (positive by construction).
    pub fn c_min(&self) -> f64 {
        self.validate().expect("validated at construction")
    }

    fn check(&self, x: &Point) -> Result<()> {
        if self.bounds().contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point ({}, {}) outside field bounds",
                x[0], x[1]
            )))
        }
    }

    fn value_unchecked(&self, x: &Point) -> f64 {
        match self {
            SoundSpeedField::Constant { c, .. } => *c,
            SoundSpeedField::GaussianLens { c0, amp, center, width, .. } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                c0 - amp * (-d.norm_squared() / (width * width)).exp()
            }
            SoundSpeedField::Gridded(g) => g.jet(x).0,
        }
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &Point) -> Result<Vector2<f64>> {
        self.check(x)?;
        Ok(match self {
            SoundSpeedField::Constant { .. } => Vector2::zeros(),
            SoundSpeedField::GaussianLens { amp, center, width, .. } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                let w2 = width * width;
                let e = (-d.norm_squared() / w2).exp();
                d * (2.0 * amp * e / w2)
            }
            SoundSpeedField::Gridded(g) => g.jet(x).1,
        })
    }

    pub fn hessian(&self, x: &Point) -> Result<Matrix2<f64>> {
        self.check(x)?;
        Ok(match self {
            SoundSpeedField::Constant { .. } => Matrix2::zeros(),
            SoundSpeedField::GaussianLens { amp, center, width, .. } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                let w2 = width * width;
                let e = (-d.norm_squared() / w2).exp();
                let s = 2.0 * amp * e / w2;
                // d/dx of (s * d): s' picks up -2 d / w2.
                Matrix2::identity() * s - d * d.transpose() * (2.0 * s / w2)
            }
            SoundSpeedField::Gridded(g) => g.jet(x).2,
        })
    }
}

/// Polynomial-times-exponential time profile `g(t) = (sum_i c_i t^i) e^{-rate t}`.
///
/// Closed under differentiation, which keeps every time jet exact.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TimeProfile {
    pub coeffs: Vec<f64>,
    pub rate: f64,
}

impl TimeProfile {
    pub fn constant(v: f64) -> Self {
        TimeProfile { coeffs: vec![v], rate: 0.0 }
    }

    pub fn exp_decay(amp: f64, rate: f64) -> Self {
        TimeProfile { coeffs: vec![amp], rate }
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut p = 0.0;
        for c in self.coeffs.iter().rev() {
            p = p * t + c;
        }
        p * (-self.rate * t).exp()
    }

    /// Profile of the derivative: d/dt [(poly) e^{-rt}] = (poly' - r poly) e^{-rt}.
    pub fn derivative_profile(&self) -> TimeProfile {
        let n = self.coeffs.len();
        let mut c = vec![0.0; n.max(1)];
        for i in 1..n {
            c[i - 1] += i as f64 * self.coeffs[i];
        }
        for i in 0..n {
            c[i] -= self.rate * self.coeffs[i];
        }
        while c.len() > 1 && c.last() == Some(&0.0) {
            c.pop();
        }
        TimeProfile { coeffs: c, rate: self.rate }
    }

    /// `[g(0), g'(0), ..., g^{(order)}(0)]`, exactly.
    pub fn jet(&self, order: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(order + 1);
        let mut p = self.clone();
        out.push(p.value(0.0));
        for _ in 0..order {
            p = p.derivative_profile();
            out.push(p.value(0.0));
        }
        out
    }
}

/// Spatial amplitude profile for separable kernels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SpaceProfile {
    Constant(f64),
    /// `amp * exp(-|x - center|^2 / width^2)`.
    GaussianBump { amp: f64, center: [f64; 2], width: f64 },
    Gridded(GriddedField),
}

impl SpaceProfile {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            SpaceProfile::Constant(v) => *v,
            SpaceProfile::GaussianBump { amp, center, width } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                amp * (-d.norm_squared() / (width * width)).exp()
            }
            SpaceProfile::Gridded(g) => g.jet(x).0,
        }
    }

    pub fn gradient(&self, x: &Point) -> Vector2<f64> {
        match self {
            SpaceProfile::Constant(_) => Vector2::zeros(),
            SpaceProfile::GaussianBump { amp, center, width } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                let w2 = width * width;
                let e = (-d.norm_squared() / w2).exp();
                d * (-2.0 * amp * e / w2)
            }
            SpaceProfile::Gridded(g) => g.jet(x).1,
        }
    }
}

/// One coefficient of an extended-Maxwell component: a constant or a field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Coefficient {
    Constant(f64),
    Gridded(GriddedField),
}

impl Coefficient {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Gridded(g) => g.jet(x).0,
        }
    }
}

/// Extended Maxwell model: relaxation function
/// `G̃(x,t) = Σ_j β_j(x) exp(t α_j(x))` with `α_j < 0` distinct and `β_j > 0`.
///
/// As a memory kernel this contributes `G = ∂_t G̃ = Σ α_j β_j e^{t α_j}`,
/// so `∂_t^k G(x,0) = Σ_j α_j^{k+1} β_j(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmmKernel {
    pub alphas: Vec<Coefficient>,
    pub betas: Vec<Coefficient>,
    pub support: Bounds,
    pub t_max: f64,
}

impl EmmKernel {
    pub fn constant(alphas: &[f64], betas: &[f64], support: Bounds, t_max: f64) -> Result<Self> {
        let k = EmmKernel {
            alphas: alphas.iter().map(|a| Coefficient::Constant(*a)).collect(),
            betas: betas.iter().map(|b| Coefficient::Constant(*b)).collect(),
            support,
            t_max,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn component_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas_at(&self, x: &Point) -> Vec<f64> {
        self.alphas.iter().map(|a| a.value(x)).collect()
    }

    pub fn betas_at(&self, x: &Point) -> Vec<f64> {
        self.betas.iter().map(|b| b.value(x)).collect()
    }

    /// Check distinctness and sign constraints on a sample of points.
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.len() != self.betas.len() {
            return Err(Error::Argument(
                "EMM kernel needs matching, non-empty alpha/beta lists".into(),
            ));
        }
        let b = self.support;
        let n = 8;
        for j in 0..=n {
            for i in 0..=n {
                let x = Point::new(
                    b.min[0] + (b.max[0] - b.min[0]) * i as f64 / n as f64,
                    b.min[1] + (b.max[1] - b.min[1]) * j as f64 / n as f64,
                );
                let a = self.alphas_at(&x);
                let be = self.betas_at(&x);
                for (idx, ai) in a.iter().enumerate() {
                    if *ai >= 0.0 {
                        return Err(Error::Argument(format!("alpha_{idx} must be negative")));
                    }
                    for aj in a.iter().skip(idx + 1) {
                        if (ai - aj).abs() < 1e-12 {
                            return Err(Error::Argument("EMM rates must be pairwise distinct".into()));
                        }
                    }
                }
                if be.iter().any(|v| *v <= 0.0) {
                    return Err(Error::Argument("EMM weights must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Relaxation function `G̃(x,t) = Σ β_j e^{t α_j}`.
    pub fn relaxation(&self, x: &Point, t: f64) -> f64 {
        self.alphas_at(x)
            .iter()
            .zip(self.betas_at(x))
            .map(|(a, b)| b * (t * a).exp())
            .sum()
    }

    /// Load constant coefficient arrays from a JSON document
    /// `{"alphas": [...], "betas": [...], "t_max": ...}`.
    pub fn from_json(path: &Path, support: Bounds) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            alphas: Vec<f64>,
            betas: Vec<f64>,
            #[serde(default = "default_tmax")]
            t_max: f64,
        }
        fn default_tmax() -> f64 {
            10.0
        }
        let doc: Doc = serde_json::from_reader(std::fs::File::open(path)?)?;
        EmmKernel::constant(&doc.alphas, &doc.betas, support, doc.t_max)
    }
}

/// Instantaneous stiffness of the relaxation function: `c(x) = G̃(x, 0) = Σ β_j(x)`.
pub fn derive_wave_speed(kernel: &EmmKernel, x: &Point) -> Result<f64> {
    if !kernel.support.contains(x) {
        return Err(Error::Domain("point outside EMM kernel support".into()));
    }
    Ok(kernel.betas_at(x).iter().sum())
}

/// Memory kernel `G(x, t)` on `t ∈ [0, t_max]` with exact time jets at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MemoryKernel {
    Zero,
    /// `G(x,t) = space(x) * time(t)`.
    Separable {
        space: SpaceProfile,
        time: TimeProfile,
        support: Bounds,
        t_max: f64,
    },
    Emm(EmmKernel),
}

impl MemoryKernel {
    pub fn zero() -> Self {
        MemoryKernel::Zero
    }

    pub fn separable(space: SpaceProfile, time: TimeProfile, support: Bounds, t_max: f64) -> Self {
        MemoryKernel::Separable { space, time, support, t_max }
    }

    pub fn t_max(&self) -> f64 {
        match self {
            MemoryKernel::Zero => f64::INFINITY,
            MemoryKernel::Separable { t_max, .. } => *t_max,
            MemoryKernel::Emm(k) => k.t_max,
        }
    }

    pub fn support(&self) -> Option<Bounds> {
        match self {
            MemoryKernel::Zero => None,
            MemoryKernel::Separable { support, .. } => Some(*support),
            MemoryKernel::Emm(k) => Some(k.support),
        }
    }

    fn check(&self, x: &Point, t: f64) -> Result<()> {
        if t < 0.0 || t > self.t_max() {
            return Err(Error::Domain(format!(
                "kernel evaluation time {t} outside [0, {}]",
                self.t_max()
            )));
        }
        if let Some(b) = self.support() {
            if !b.contains(x) {
                return Err(Error::Domain("point outside kernel support".into()));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Point, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Separable { space, time, .. } => space.value(x) * time.value(t),
            MemoryKernel::Emm(k) => k
                .alphas_at(x)
                .iter()
                .zip(k.betas_at(x))
                .map(|(a, b)| a * b * (t * a).exp())
                .sum(),
        })
    }

    /// Spatial gradient of `G(·, t)` at `x`.
    pub fn space_gradient(&self, x: &Point, t: f64) -> Result<Vector2<f64>> {
        self.check(x, t)?;
        Ok(match self {
            MemoryKernel::Zero => Vector2::zeros(),
            MemoryKernel::Separable { space, time, .. } => space.gradient(x) * time.value(t),
            // Variable-coefficient EMM gradients are only needed for constant
            // coefficients in the recovery pipeline; finite differences cover
            // the gridded case.
            MemoryKernel::Emm(_) => {
                let h = 1e-6;
                let fxp = self.value(&Point::new(x[0] + h, x[1]), t)?;
                let fxm = self.value(&Point::new(x[0] - h, x[1]), t)?;
                let fyp = self.value(&Point::new(x[0], x[1] + h), t)?;
                let fym = self.value(&Point::new(x[0], x[1] - h), t)?;
                Vector2::new((fxp - fxm) / (2.0 * h), (fyp - fym) / (2.0 * h))
            }
        })
    }

    /// `[G(x,0), ∂_t G(x,0), ..., ∂_t^order G(x,0)]`.
    pub fn time_jet(&self, x: &Point, order: usize) -> Result<Vec<f64>> {
        self.check(x, 0.0)?;
        Ok(match self {
            MemoryKernel::Zero => vec![0.0; order + 1],
            MemoryKernel::Separable { space, time, .. } => {
                let s = space.value(x);
                time.jet(order).into_iter().map(|g| s * g).collect()
            }
            MemoryKernel::Emm(k) => {
                let a = k.alphas_at(x);
                let b = k.betas_at(x);
                (0..=order)
                    .map(|j| {
                        a.iter()
                            .zip(&b)
                            .map(|(ai, bi)| ai.powi(j as i32 + 1) * bi)
                            .sum()
                    })
                    .collect()
            }
        })
    }

    /// Spatial gradient of each jet entry, `∇_x ∂_t^j G(x, 0)`.
    pub fn time_jet_gradient(&self, x: &Point, order: usize) -> Result<Vec<Vector2<f64>>> {
        self.check(x, 0.0)?;
        Ok(match self {
            MemoryKernel::Zero => vec![Vector2::zeros(); order + 1],
            MemoryKernel::Separable { space, time, .. } => {
                let g = space.gradient(x);
                time.jet(order).into_iter().map(|v| g * v).collect()
            }
            MemoryKernel::Emm(_) => {
                let h = 1e-6;
                let jxp = self.time_jet(&Point::new(x[0] + h, x[1]), order)?;
                let jxm = self.time_jet(&Point::new(x[0] - h, x[1]), order)?;
                let jyp = self.time_jet(&Point::new(x[0], x[1] + h), order)?;
                let jym = self.time_jet(&Point::new(x[0], x[1] - h), order)?;
                (0..=order)
                    .map(|j| {
                        Vector2::new(
                            (jxp[j] - jxm[j]) / (2.0 * h),
                            (jyp[j] - jym[j]) / (2.0 * h),
                        )
                    })
                    .collect()
            }
        })
    }
}

/// `m_k = Σ_j α_j^k β_j` for `k = 0 .. count-1`.
pub fn emm_moments(alphas: &[f64], betas: &[f64], count: usize) -> Result<Vec<f64>> {
    if alphas.len() != betas.len() {
        return Err(Error::Argument(format!(
            "alpha/beta length mismatch: {} vs {}",
            alphas.len(),
            betas.len()
        )));
    }
    if count == 0 {
        return Err(Error::Argument("moment count must be at least 1".into()));
    }
    for (i, a) in alphas.iter().enumerate() {
        for b in alphas.iter().skip(i + 1) {
            if (a - b).abs() < 1e-14 {
                return Err(Error::Argument("alphas must be distinct".into()));
            }
        }
    }
    Ok((0..count)
        .map(|k| {
            alphas
                .iter()
                .zip(betas)
                .map(|(a, b)| a.powi(k as i32) * b)
                .sum()
        })
        .collect())
}

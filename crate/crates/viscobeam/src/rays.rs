//! Null bicharacteristics of the principal symbol, travel times, and lens data.
//!
//! The principal symbol is `q(z, ζ) = (τ² - c(x)|ξ|²)/2` on phase space over
//! spacetime points `z = (x, t)`. Hamilton's equations read
//! `ẋ = -c ξ`, `ṫ = τ`, `ξ̇ = |ξ|² ∇c / 2`, `τ̇ = 0`; with the launch
//! normalization `τ = 1` the flow parameter coincides with time and the
//! spatial speed along null rays is `sqrt(c)`.

use crate::error::{Error, Result};
use crate::media::{Point, SoundSpeedField};
use crate::util::integrate_samples;
use nalgebra::Vector2;
use std::io::Write;
use std::path::Path;

/// Point in phase space: spacetime position and codirection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Point,
    pub t: f64,
    pub xi: Vector2<f64>,
    pub tau: f64,
}

impl PhasePoint {
    /// Null phase point at `x` with unit inward spatial direction `dir`
    /// and `τ = 1`: `ξ = -dir / sqrt(c)` so that `ẋ = -cξ` points along `dir`.
    pub fn null_from_direction(field: &SoundSpeedField, x: Point, t: f64, dir: Vector2<f64>) -> Result<Self> {
        let c = field.value(&x)?;
        let d = dir.normalize();
        Ok(PhasePoint { x, t, xi: -d / c.sqrt(), tau: 1.0 })
    }
}

/// `q(z, ζ) = (τ² - c(x) |ξ|²) / 2`.
pub fn hamiltonian(field: &SoundSpeedField, p: &PhasePoint) -> Result<f64> {
    let c = field.value(&p.x)?;
    Ok(0.5 * (p.tau * p.tau - c * p.xi.norm_squared()))
}

type State = [f64; 6];

fn pack(p: &PhasePoint) -> State {
    [p.x[0], p.x[1], p.t, p.xi[0], p.xi[1], p.tau]
}

fn unpack(y: &State) -> PhasePoint {
    PhasePoint {
        x: Point::new(y[0], y[1]),
        t: y[2],
        xi: Vector2::new(y[3], y[4]),
        tau: y[5],
    }
}

fn rhs(field: &SoundSpeedField, y: &State) -> Result<State> {
    let x = Point::new(y[0], y[1]);
    let xi = Vector2::new(y[3], y[4]);
    let c = field.value(&x)?;
    let gc = field.gradient(&x)?;
    let xi2 = xi.norm_squared();
    Ok([
        -c * xi[0],
        -c * xi[1],
        y[5],
        0.5 * gc[0] * xi2,
        0.5 * gc[1] * xi2,
        0.0,
    ])
}

/// One accepted integrator sample: parameter, state, derivative.
#[derive(Debug, Clone, Copy)]
pub struct RaySample {
    pub sigma: f64,
    pub point: PhasePoint,
    deriv: State,
}

/// Sampled Hamiltonian trajectory with Hermite dense output.
#[derive(Debug, Clone)]
pub struct Bicharacteristic {
    pub samples: Vec<RaySample>,
    /// Set when the ray left the field's bounding box before the requested span.
    pub truncated_at: Option<f64>,
    pub tol: f64,
}

impl Bicharacteristic {
    pub fn span(&self) -> f64 {
        self.samples.last().map(|s| s.sigma).unwrap_or(0.0)
    }

    /// Cubic Hermite interpolation of the state at `sigma`.
    pub fn at(&self, sigma: f64) -> PhasePoint {
        let n = self.samples.len();
        let sig = sigma.clamp(0.0, self.span());
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.samples[mid].sigma <= sig {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = &self.samples[lo];
        let b = &self.samples[hi];
        let h = b.sigma - a.sigma;
        if h <= 0.0 {
            return a.point;
        }
        let s = (sig - a.sigma) / h;
        let ya = pack(&a.point);
        let yb = pack(&b.point);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut y = [0.0; 6];
        for i in 0..6 {
            y[i] = h00 * ya[i] + h10 * h * a.deriv[i] + h01 * yb[i] + h11 * h * b.deriv[i];
        }
        unpack(&y)
    }

    /// Spatial velocity `ẋ = -cξ` at `sigma`.
    pub fn velocity(&self, field: &SoundSpeedField, sigma: f64) -> Result<Vector2<f64>> {
        let p = self.at(sigma);
        let c = field.value(&p.x)?;
        Ok(-c * p.xi)
    }

    /// Uniformly resampled phase points, `n + 1` of them over the full span.
    pub fn resample(&self, n: usize) -> Vec<(f64, PhasePoint)> {
        let span = self.span();
        (0..=n)
            .map(|i| {
                let s = span * i as f64 / n as f64;
                (s, self.at(s))
            })
            .collect()
    }

    /// Arc length of the spatial projection.
    pub fn arc_length(&self, field: &SoundSpeedField, n: usize) -> Result<f64> {
        let pts = self.resample(n);
        let speeds: Vec<f64> = pts
            .iter()
            .map(|(_, p)| field.value(&p.x).map(|c| c * p.xi.norm()))
            .collect::<Result<_>>()?;
        Ok(integrate_samples(&speeds, self.span() / n as f64))
    }

    /// Largest Hamiltonian drift over the stored samples.
    pub fn max_drift(&self, field: &SoundSpeedField) -> Result<f64> {
        let mut m = 0.0_f64;
        for s in &self.samples {
            m = m.max(hamiltonian(field, &s.point)?.abs());
        }
        Ok(m)
    }
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub const DEFAULT_TRACE_TOL: f64 = 1e-9;

/// Trace the bicharacteristic through `start` over parameter span `span`
/// with adaptive Dormand–Prince 4(5) steps at local error `tol`.
///
/// Leaving the field's bounding box truncates the trajectory (flagged, not an
/// error); step-size underflow is an integration error.
pub fn trace_bicharacteristic(
    field: &SoundSpeedField,
    start: &PhasePoint,
    span: f64,
    tol: f64,
) -> Result<Bicharacteristic> {
    if !(span > 0.0) {
        return Err(Error::Argument("trace span must be positive".into()));
    }
    let q0 = hamiltonian(field, start)?;
    let zeta2 = start.xi.norm_squared() + start.tau * start.tau;
    if q0.abs() > 1e-10 * (1.0 + zeta2) {
        return Err(Error::Argument(format!(
            "start point is not null: q = {q0}"
        )));
    }

    let mut sigma = 0.0;
    let mut y = pack(start);
    let mut d = rhs(field, &y)?;
    let mut h = (span / 100.0).min(0.05);
    let min_h = span * 1e-14;
    let mut samples = vec![RaySample { sigma, point: *start, deriv: d }];
    let mut truncated_at = None;

    'outer: while sigma < span {
        h = h.min(span - sigma);
        // Attempt a step; on stage evaluation outside the box, bisect toward
        // the boundary by shrinking the step instead of failing.
        let mut k = [[0.0; 6]; 7];
        k[0] = d;
        let mut stage_ok = true;
        for i in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                for m in 0..6 {
                    yi[m] += h * DP_A[i][j] * kj[m];
                }
            }
            match rhs(field, &yi) {
                Ok(ki) => k[i] = ki,
                Err(_) => {
                    stage_ok = false;
                    break;
                }
            }
            let _ = DP_C[i];
        }
        if !stage_ok {
            // Ray is about to exit: shrink; below min step, truncate here.
            h *= 0.5;
            if h < min_h.max(1e-13) {
                truncated_at = Some(sigma);
                break 'outer;
            }
            continue;
        }
        let mut y5 = y;
        let mut y4 = y;
        for (j, kj) in k.iter().enumerate() {
            for m in 0..6 {
                y5[m] += h * DP_B5[j] * kj[m];
                y4[m] += h * DP_B4[j] * kj[m];
            }
        }
        let mut err = 0.0_f64;
        for m in 0..6 {
            let sc = 1.0 + y[m].abs().max(y5[m].abs());
            err = err.max(((y5[m] - y4[m]) / sc).abs());
        }
        if err <= tol {
            sigma += h;
            y = y5;
            d = match rhs(field, &y) {
                Ok(v) => v,
                Err(_) => {
                    truncated_at = Some(sigma);
                    samples.push(RaySample { sigma, point: unpack(&y), deriv: k[6] });
                    break 'outer;
                }
            };
            samples.push(RaySample { sigma, point: unpack(&y), deriv: d });
        }
        let factor = if err > 0.0 {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < min_h {
            return Err(Error::Numerical(format!(
                "step size underflow at sigma = {sigma}"
            )));
        }
    }

    Ok(Bicharacteristic { samples, truncated_at, tol })
}

/// Convex spatial region with a smooth boundary.
#[derive(Debug, Clone, Copy)]
pub enum Region {
    Disc { center: [f64; 2], radius: f64 },
}

impl Region {
    /// Negative inside, zero on the boundary, positive outside.
    pub fn boundary_fn(&self, x: &Point) -> f64 {
        match self {
            Region::Disc { center, radius } => {
                let d = Vector2::new(x[0] - center[0], x[1] - center[1]);
                d.norm() - radius
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.boundary_fn(x) < 0.0
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Disc { radius, .. } => 2.0 * radius,
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, x: &Point) -> Vector2<f64> {
        match self {
            Region::Disc { center, .. } => {
                Vector2::new(x[0] - center[0], x[1] - center[1]).normalize()
            }
        }
    }
}

/// Entry/exit phase points and travel time for one ray through a region.
#[derive(Debug, Clone)]
pub struct LensRecord {
    pub entry_point: Point,
    pub entry_dir: Vector2<f64>,
    pub exit_point: Point,
    pub exit_dir: Vector2<f64>,
    pub travel_time: f64,
    pub arc_length: f64,
    /// The traced path, kept for downstream line integrals.
    pub path: Bicharacteristic,
}

const BOUNDARY_TOL: f64 = 1e-10;

/// Trace the null bicharacteristic launched inward at `entry` until it exits
/// the region, recording exit point/direction and the elapsed flow time.
pub fn lens_data(
    field: &SoundSpeedField,
    domain: &Region,
    entry: Point,
    inward_dir: Vector2<f64>,
) -> Result<LensRecord> {
    if domain.boundary_fn(&entry).abs() > 1e-8 {
        return Err(Error::Argument("entry point must lie on the boundary".into()));
    }
    let n = domain.outward_normal(&entry);
    let d = inward_dir.normalize();
    if n.dot(&d) >= 0.0 {
        return Err(Error::Argument("direction must point inward".into()));
    }
    let cmin = field.validate()?;
    let cap = 10.0 * domain.diameter() / cmin.sqrt();

    // Nudge the start inside so the whole trace stays in the region.
    let start = PhasePoint::null_from_direction(field, entry, 0.0, d)?;
    let ray = trace_bicharacteristic(field, &start, cap, DEFAULT_TRACE_TOL)?;

    // First sample past the boundary.
    let mut exit_bracket = None;
    for w in ray.samples.windows(2) {
        let f0 = domain.boundary_fn(&w[0].point.x);
        let f1 = domain.boundary_fn(&w[1].point.x);
        if w[1].sigma > 1e-12 && f0 <= 0.0 && f1 > 0.0 {
            exit_bracket = Some((w[0].sigma, w[1].sigma));
            break;
        }
    }
    let (mut lo, mut hi) = exit_bracket.ok_or_else(|| {
        Error::TrappedRay(format!(
            "ray did not exit within sigma cap {cap} (truncated: {:?})",
            ray.truncated_at
        ))
    })?;

    // Bisection on the implicit boundary function.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if domain.boundary_fn(&ray.at(mid).x) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < BOUNDARY_TOL {
            break;
        }
    }
    let sigma_exit = 0.5 * (lo + hi);
    let exit = ray.at(sigma_exit);
    let vel = ray.velocity(field, sigma_exit)?;

    // Re-trace over [0, sigma_exit] so the stored path ends at the boundary.
    let path = trace_bicharacteristic(field, &start, sigma_exit, DEFAULT_TRACE_TOL)?;
    let arc = path.arc_length(field, 400)?;

    Ok(LensRecord {
        entry_point: entry,
        entry_dir: d,
        exit_point: exit.x,
        exit_dir: vel.normalize(),
        travel_time: sigma_exit,
        arc_length: arc,
        path,
    })
}

/// Deterministic parallel-beam chord coverage of a disc: `n_angles`
/// directions `θ_a = a π / n_angles`, each with `n_offsets` impact
/// parameters spread symmetrically inside the disc.
pub fn chord_family(domain: &Region, n_angles: usize, n_offsets: usize) -> Result<Vec<(Point, Vector2<f64>)>> {
    if n_angles == 0 || n_offsets == 0 {
        return Err(Error::Argument("chord counts must be at least 1".into()));
    }
    let Region::Disc { center, radius } = domain;
    let c = Point::new(center[0], center[1]);
    let mut out = Vec::with_capacity(n_angles * n_offsets);
    // Keep chords away from tangency.
    let r_max = 0.95 * radius;
    for a in 0..n_angles {
        let theta = std::f64::consts::PI * a as f64 / n_angles as f64;
        let dir = Vector2::new(theta.cos(), theta.sin());
        let normal = Vector2::new(-theta.sin(), theta.cos());
        for o in 0..n_offsets {
            let u = if n_offsets == 1 {
                0.0
            } else {
                (2.0 * (o as f64 + 0.5) / n_offsets as f64 - 1.0) * r_max
            };
            let half_chord = (radius * radius - u * u).sqrt();
            let entry = c + normal * u - dir * half_chord;
            out.push((entry, dir));
        }
    }
    Ok(out)
}

/// Lens table CSV: one row per chord.
pub fn write_lens_csv(records: &[LensRecord], path: &Path, header_comment: Option<&str>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    if let Some(c) = header_comment {
        writeln!(f, "# {c}")?;
    }
    writeln!(
        f,
        "entry_x,entry_y,entry_dir_x,entry_dir_y,exit_x,exit_y,exit_dir_x,exit_dir_y,travel_time"
    )?;
    for r in records {
        let row = [
            r.entry_point[0],
            r.entry_point[1],
            r.entry_dir[0],
            r.entry_dir[1],
            r.exit_point[0],
            r.exit_point[1],
            r.exit_dir[0],
            r.exit_dir[1],
            r.travel_time,
        ];
        let cells: Vec<String> = row.iter().map(|v| crate::util::fmt_f64(*v)).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

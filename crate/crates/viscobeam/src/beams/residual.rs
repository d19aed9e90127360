//! Discretized `L²((0,T), L²)` norm of `P u` for an assembled quasimode.
//!
//! The wave-operator part of `P u` is evaluated in closed form from the
//! phase/amplitude jets; the memory part is a time quadrature of the
//! explicitly known integrand. Nothing is subtracted analytically: every
//! cancellation that makes the residual small has to happen numerically,
//! which keeps the measurement honest about truncation choices (quadratic
//! phase, ray-restricted amplitudes).
//!
//! Quadrature scales: the oscillatory memory integrals use composite Simpson
//! with at least 18 samples per oscillation period `2π/k`, restricted to the
//! Gaussian envelope window where `k Im φ ≤ 6 ln 10 · 2`. Cutoff-derivative
//! terms are dropped; the cutoff plateau sits at `6 (λ k_min)^{-1/2}`, where
//! the envelope factor is already `≤ e^{-18}`.

use super::quasimode::{cutoff, BeamQuasimode};
use super::transport::BeamPhase;
use crate::error::{Error, Result};
use crate::media::Point;
use nalgebra::{Vector2, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Node-centered evaluation grid over a spacetime box.
#[derive(Debug, Clone, Copy)]
pub struct SpaceTimeGrid {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub y0: f64,
    pub y1: f64,
    pub ny: usize,
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x0, self.x1, self.nx)
    }
    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y0, self.y1, self.ny)
    }
    pub fn ts(&self) -> Vec<f64> {
        linspace(self.t0, self.t1, self.nt)
    }
    pub fn cell_volume(&self) -> f64 {
        let dx = if self.nx > 1 { (self.x1 - self.x0) / (self.nx - 1) as f64 } else { 1.0 };
        let dy = if self.ny > 1 { (self.y1 - self.y0) / (self.ny - 1) as f64 } else { 1.0 };
        let dt = if self.nt > 1 { (self.t1 - self.t0) / (self.nt - 1) as f64 } else { 1.0 };
        dx * dy * dt
    }

    /// Minimum distance from the grid box to a spacetime point.
    fn distance_to(&self, p: &Vector3<f64>) -> f64 {
        let cx = p[0].clamp(self.x0, self.x1);
        let cy = p[1].clamp(self.y0, self.y1);
        let ct = p[2].clamp(self.t0, self.t1);
        ((p[0] - cx).powi(2) + (p[1] - cy).powi(2) + (p[2] - ct).powi(2)).sqrt()
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

const FLOOR_EXP: f64 = 46.0;
const WINDOW_DECADES: f64 = 6.0;

/// Per-column kernel access with the spatial part resolved once.
struct KernelColumn {
    g: Box<dyn Fn(f64) -> f64>,
    grad_g: Box<dyn Fn(f64) -> Vector2<f64>>,
}

fn kernel_column(kernel: &crate::media::MemoryKernel, x: &Point) -> Result<KernelColumn> {
    use crate::media::MemoryKernel as MK;
    Ok(match kernel {
        MK::Zero => KernelColumn {
            g: Box::new(|_| 0.0),
            grad_g: Box::new(|_| Vector2::zeros()),
        },
        MK::Separable { space, time, .. } => {
            let sp = space.value(x);
            let gsp = space.gradient(x);
            let t1 = time.clone();
            let t2 = time.clone();
            KernelColumn {
                g: Box::new(move |r| sp * t1.value(r)),
                grad_g: Box::new(move |r| gsp * t2.value(r)),
            }
        }
        MK::Emm(k) => {
            let a = k.alphas_at(x);
            let b = k.betas_at(x);
            let a2 = a.clone();
            let b2 = b.clone();
            let constant = k
                .alphas
                .iter()
                .chain(k.betas.iter())
                .all(|c| matches!(c, crate::media::Coefficient::Constant(_)));
            let kc = kernel.clone();
            let xc = *x;
            KernelColumn {
                g: Box::new(move |r| a.iter().zip(&b).map(|(ai, bi)| ai * bi * (ai * r).exp()).sum()),
                grad_g: Box::new(move |r| {
                    if constant {
                        let _ = (&a2, &b2);
                        Vector2::zeros()
                    } else {
                        kc.space_gradient(&xc, r).unwrap_or_else(|_| Vector2::zeros())
                    }
                }),
            }
        }
    })
}

/// Trapezoid causal convolution of `kernel(t - s)` against samples on a
/// uniform axis.
fn convolve_axis(g_at: &dyn Fn(f64) -> f64, values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let g: Vec<f64> = (0..n).map(|i| g_at(i as f64 * dt)).collect();
    let mut out = vec![0.0; n];
    for i in 1..n {
        let mut acc = 0.5 * (g[i] * values[0] + g[0] * values[i]);
        for j in 1..i {
            acc += g[i - j] * values[j];
        }
        out[i] = acc * dt;
    }
    out
}

struct CorrectionColumn {
    axis_dt: f64,
    v: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    lapv: Vec<f64>,
    vtt: Vec<f64>,
    j_gv: Vec<f64>,
    j_gvx: Vec<f64>,
    j_gvy: Vec<f64>,
    j_glap: Vec<f64>,
    j_ggv_x: Vec<f64>,
    j_ggv_y: Vec<f64>,
    j_ggdv: Vec<f64>,
}

impl CorrectionColumn {
    fn sample(&self, arr: &[f64], t: f64) -> f64 {
        let s = t / self.axis_dt;
        let i = (s.floor() as isize).clamp(0, arr.len() as isize - 2) as usize;
        let f = (s - i as f64).clamp(0.0, 1.0);
        arr[i] * (1.0 - f) + arr[i + 1] * f
    }
}

/// Residual norm of `P u` over the grid. The grid must keep at least
/// `exclusion_radius` away from both ray endpoints, where the construction
/// intentionally leaves order-`k` endpoint terms.
pub fn residual_norm(qm: &BeamQuasimode, grid: &SpaceTimeGrid, exclusion_radius: f64) -> Result<f64> {
    let z_start = qm.phase.frame(0.0)?.z;
    let z_end = qm.phase.frame(qm.phase.span())?.z;
    for (name, z) in [("start", z_start), ("end", z_end)] {
        let d = grid.distance_to(&z);
        if d < exclusion_radius {
            return Err(Error::Argument(format!(
                "grid overlaps the σ-{name} endpoint support: distance {d:.3} < {exclusion_radius:.3}"
            )));
        }
    }

    let k = qm.k;
    let lam = qm.phase.im_lower_bound();
    let r_s = (2.0 * WINDOW_DECADES * std::f64::consts::LN_10 / (k * lam)).sqrt();
    let ds_target = (2.0 * std::f64::consts::PI / (18.0 * k)).min(r_s / 12.0);

    let xs = grid.xs();
    let ys = grid.ys();
    let ts = grid.ts();

    // Correction support: v on an internal axis from time zero, plus finite
    // differences across columns.
    let corr = if qm.parts.use_corrections {
        let n_axis = (4 * grid.nt).max(320);
        let t_hi = grid.t1.max(qm.correction_grid.t1);
        let axis = crate::volterra::TimeGrid::new(0.0, t_hi, n_axis)?;
        let mut v_all: Vec<Vec<f64>> = Vec::with_capacity(grid.nx * grid.ny);
        for x in &xs {
            for y in &ys {
                v_all.push(super::transport::correction_profile(
                    &qm.phase.field,
                    &qm.kernel,
                    &Point::new(*x, *y),
                    &axis,
                )?);
            }
        }
        Some((axis, v_all))
    } else {
        None
    };

    let col_sums: Vec<f64> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|col| -> Result<f64> {
            let ix = col / grid.ny;
            let iy = col % grid.ny;
            let x = Point::new(xs[ix], ys[iy]);
            let c = qm.phase.field.value(&x)?;
            let gc = qm.phase.field.gradient(&x)?;
            let kcol = kernel_column(&qm.kernel, &x)?;

            let ccol = match &corr {
                Some((axis, v_all)) => {
                    Some(build_correction_column(grid, axis, v_all, ix, iy, &kcol))
                }
                None => None,
            };

            let mut sum = 0.0;
            for t in &ts {
                let pu = pu_at_point(qm, &x, *t, c, &gc, &kcol, ccol.as_ref(), r_s, ds_target)?;
                sum += pu.norm_sqr();
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>>>()?;

    let total: f64 = col_sums.iter().sum();
    Ok((total * grid.cell_volume()).sqrt())
}

fn build_correction_column(
    grid: &SpaceTimeGrid,
    axis: &crate::volterra::TimeGrid,
    v_all: &[Vec<f64>],
    ix: usize,
    iy: usize,
    kcol: &KernelColumn,
) -> CorrectionColumn {
    let idx = |i: usize, j: usize| i * grid.ny + j;
    let v = &v_all[idx(ix, iy)];
    let n = v.len();
    let dx = if grid.nx > 1 { (grid.x1 - grid.x0) / (grid.nx - 1) as f64 } else { 1.0 };
    let dy = if grid.ny > 1 { (grid.y1 - grid.y0) / (grid.ny - 1) as f64 } else { 1.0 };
    let dt = axis.dt();

    let xp = &v_all[idx(ix.min(grid.nx - 2) + 1, iy)];
    let xm = &v_all[idx(ix.max(1) - 1, iy)];
    let xden = if ix == 0 || ix == grid.nx - 1 { dx } else { 2.0 * dx };
    let yp = &v_all[idx(ix, iy.min(grid.ny - 2) + 1)];
    let ym = &v_all[idx(ix, iy.max(1) - 1)];
    let yden = if iy == 0 || iy == grid.ny - 1 { dy } else { 2.0 * dy };

    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut lapv = vec![0.0; n];
    let mut vtt = vec![0.0; n];
    for i in 0..n {
        vx[i] = (xp[i] - xm[i]) / xden;
        vy[i] = (yp[i] - ym[i]) / yden;
        let lxx = if ix > 0 && ix < grid.nx - 1 {
            (xp[i] - 2.0 * v[i] + xm[i]) / (dx * dx)
        } else {
            0.0
        };
        let lyy = if iy > 0 && iy < grid.ny - 1 {
            (yp[i] - 2.0 * v[i] + ym[i]) / (dy * dy)
        } else {
            0.0
        };
        lapv[i] = lxx + lyy;
        vtt[i] = if i > 0 && i < n - 1 {
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dt * dt)
        } else {
            0.0
        };
    }

    let grad_dot: Vec<f64> = (0..n)
        .map(|i| {
            let gg = (kcol.grad_g)(i as f64 * dt);
            let _ = gg;
            0.0
        })
        .collect();
    let _ = grad_dot;

    let j_gv = convolve_axis(&*kcol.g, v, dt);
    let j_gvx = convolve_axis(&*kcol.g, &vx, dt);
    let j_gvy = convolve_axis(&*kcol.g, &vy, dt);
    let j_glap = convolve_axis(&*kcol.g, &lapv, dt);
    let ggx = |r: f64| (kcol.grad_g)(r)[0];
    let ggy = |r: f64| (kcol.grad_g)(r)[1];
    let j_ggv_x = convolve_axis(&ggx, v, dt);
    let j_ggv_y = convolve_axis(&ggy, v, dt);
    // ∫ ∇G·∇v: componentwise convolutions summed.
    let j_ggdv: Vec<f64> = {
        let a = convolve_axis(&ggx, &vx, dt);
        let b = convolve_axis(&ggy, &vy, dt);
        a.iter().zip(&b).map(|(p, q)| p + q).collect()
    };

    CorrectionColumn {
        axis_dt: dt,
        v: v.clone(),
        vx,
        vy,
        lapv,
        vtt,
        j_gv,
        j_gvx,
        j_gvy,
        j_glap,
        j_ggv_x,
        j_ggv_y,
        j_ggdv,
    }
}

#[allow(clippy::too_many_arguments)]
fn pu_at_point(
    qm: &BeamQuasimode,
    x: &Point,
    t: f64,
    c: f64,
    gc: &Vector2<f64>,
    kcol: &KernelColumn,
    ccol: Option<&CorrectionColumn>,
    r_s: f64,
    ds_target: f64,
) -> Result<C64> {
    let k = qm.k;
    let ik = C64::new(0.0, k);
    let k2 = C64::new(k * k, 0.0);
    let inv_mik = C64::new(0.0, -k).powi(-1);
    let z = Vector3::new(x[0], x[1], t);
    let mut acc = C64::new(0.0, 0.0);

    for node in &qm.nodes {
        let frame = &node.frame;
        let a_prime = if qm.parts.use_a1 {
            node.a0 + node.a1 * inv_mik
        } else {
            node.a0
        };
        if a_prime.norm() == 0.0 {
            continue;
        }

        // Wave-operator part at (x, t).
        let w = z - frame.z;
        let r = w.norm();
        if r < qm.cutoff_support {
            let phi = BeamPhase::phi(frame, &z);
            if k * phi.im <= FLOOR_EXP {
                let eta = cutoff(r, qm.cutoff_plateau, qm.cutoff_support);
                let grad = BeamPhase::grad_phi(frame, &z);
                let gx2 = grad[0] * grad[0] + grad[1] * grad[1];
                let q = (grad[2] * grad[2] - gx2 * C64::new(c, 0.0)) * C64::new(0.5, 0.0);
                let htt = frame.h[(2, 2)];
                let trhxx = frame.h[(0, 0)] + frame.h[(1, 1)];
                let gcd = grad[0] * C64::new(gc[0], 0.0) + grad[1] * C64::new(gc[1], 0.0);
                let qphi = -(htt - gcd - trhxx * C64::new(c, 0.0)) * C64::new(0.5, 0.0);
                let osc = (C64::new(0.0, k) * phi).exp();
                acc += osc * (k2 * q + ik * qphi) * a_prime * C64::new(node.weight * eta, 0.0);
            }
        }

        // Memory part: -1/2 ∫_0^t e^{ikφ(x,s,σ)} [...] ds over the envelope
        // window in s.
        let im_h = frame.h.map(|v| v.im);
        let dxs = Vector2::new(x[0] - frame.z[0], x[1] - frame.z[1]);
        let im_tt = im_h[(2, 2)];
        if im_tt <= 0.0 {
            continue;
        }
        let s_c = frame.z[2] - (im_h[(2, 0)] * dxs[0] + im_h[(2, 1)] * dxs[1]) / im_tt;
        let lo = (s_c - r_s).max(0.0);
        let hi = (s_c + r_s).min(t);
        if hi - lo < 1e-12 {
            continue;
        }
        // Quick envelope rejection at the window center.
        let z_probe = Vector3::new(x[0], x[1], s_c.clamp(lo, hi));
        if k * BeamPhase::phi(frame, &z_probe).im > FLOOR_EXP {
            continue;
        }
        let trhxx = frame.h[(0, 0)] + frame.h[(1, 1)];
        let n_panels = ((hi - lo) / ds_target).ceil() as usize;
        let n = (n_panels.max(2) + 1) & !1usize; // even
        let ds = (hi - lo) / n as f64;
        let mut integral = C64::new(0.0, 0.0);
        for j in 0..=n {
            let s = lo + j as f64 * ds;
            let zs = Vector3::new(x[0], x[1], s);
            let ws = zs - frame.z;
            let rs_norm = ws.norm();
            if rs_norm >= qm.cutoff_support {
                continue;
            }
            let phis = BeamPhase::phi(frame, &zs);
            if k * phis.im > FLOOR_EXP {
                continue;
            }
            let eta_s = cutoff(rs_norm, qm.cutoff_plateau, qm.cutoff_support);
            let grads = BeamPhase::grad_phi(frame, &zs);
            let gx = Vector2::new(grads[0], grads[1]);
            let p2 = gx[0] * gx[0] + gx[1] * gx[1];
            let r_arg = t - s;
            let gval = (kcol.g)(r_arg);
            let ggrad = (kcol.grad_g)(r_arg);
            let gg_dot = gx[0] * C64::new(ggrad[0], 0.0) + gx[1] * C64::new(ggrad[1], 0.0);
            let term = (-k2 * p2 * C64::new(gval, 0.0)
                + ik * (gg_dot + trhxx * C64::new(gval, 0.0)))
                * (C64::new(0.0, k) * phis).exp()
                * C64::new(eta_s, 0.0);
            let w_simp = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += term * C64::new(w_simp * ds / 3.0, 0.0);
        }
        acc += integral * a_prime * C64::new(-0.5 * node.weight, 0.0);
    }

    // Stationary correction part.
    if let Some(cc) = ccol {
        let v_t = cc.sample(&cc.v, t);
        let vx_t = cc.sample(&cc.vx, t);
        let vy_t = cc.sample(&cc.vy, t);
        let lap_t = cc.sample(&cc.lapv, t);
        let vtt_t = cc.sample(&cc.vtt, t);
        let jgv = cc.sample(&cc.j_gv, t);
        let jgvx = cc.sample(&cc.j_gvx, t);
        let jgvy = cc.sample(&cc.j_gvy, t);
        let jglap = cc.sample(&cc.j_glap, t);
        let jggx = cc.sample(&cc.j_ggv_x, t);
        let jggy = cc.sample(&cc.j_ggv_y, t);
        let jggdv = cc.sample(&cc.j_ggdv, t);

        for node in &qm.nodes {
            let frame = &node.frame;
            let z0 = Vector3::new(x[0], x[1], 0.0);
            let w0 = z0 - frame.z;
            let r0 = w0.norm();
            if r0 >= qm.cutoff_support {
                continue;
            }
            let phi0 = BeamPhase::phi(frame, &z0);
            if k * phi0.im > FLOOR_EXP {
                continue;
            }
            let eta0 = cutoff(r0, qm.cutoff_plateau, qm.cutoff_support);
            let grad0 = BeamPhase::grad_phi(frame, &z0);
            let gx0 = Vector2::new(grad0[0], grad0[1]);
            let l = grad0[2];
            if l.norm() < 1e-12 {
                continue;
            }
            let g_node = node.a0 / l;
            let htx = Vector2::new(frame.h[(2, 0)], frame.h[(2, 1)]);
            let grad_gn = Vector2::new(-node.a0 * htx[0] / (l * l), -node.a0 * htx[1] / (l * l));
            let lap_gn = C64::new(2.0, 0.0) * node.a0 * (htx[0] * htx[0] + htx[1] * htx[1]) / (l * l * l);
            let trhxx = frame.h[(0, 0)] + frame.h[(1, 1)];
            let gx0_sq = gx0[0] * gx0[0] + gx0[1] * gx0[1];
            let cgx0_grad_c = gx0[0] * C64::new(gc[0], 0.0) + gx0[1] * C64::new(gc[1], 0.0);

            // a'' and its jets at (x, t) for this node.
            let a2v = g_node * C64::new(v_t, 0.0);
            let da2 = Vector2::new(
                g_node * C64::new(vx_t, 0.0) + grad_gn[0] * C64::new(v_t, 0.0),
                g_node * C64::new(vy_t, 0.0) + grad_gn[1] * C64::new(v_t, 0.0),
            );
            let lap_a2 = g_node * C64::new(lap_t, 0.0)
                + C64::new(2.0, 0.0) * (grad_gn[0] * C64::new(vx_t, 0.0) + grad_gn[1] * C64::new(vy_t, 0.0))
                + lap_gn * C64::new(v_t, 0.0);
            let dtt_a2 = g_node * C64::new(vtt_t, 0.0);

            // Q(e^{ikφ0} a''):
            let q_term = -k2 * C64::new(0.5 * c, 0.0) * gx0_sq * a2v
                + ik * (C64::new(0.5, 0.0) * (cgx0_grad_c + trhxx * C64::new(c, 0.0)) * a2v
                    + C64::new(c, 0.0) * (gx0[0] * da2[0] + gx0[1] * da2[1]))
                - C64::new(0.5, 0.0) * dtt_a2
                + C64::new(0.5, 0.0)
                    * (C64::new(gc[0], 0.0) * da2[0] + C64::new(gc[1], 0.0) * da2[1]
                        + C64::new(c, 0.0) * lap_a2);

            // R(e^{ikφ0} a''): assembled from the causal convolutions.
            let a_int = g_node * C64::new(jgv, 0.0);
            let b_int = Vector2::new(
                g_node * C64::new(jgvx, 0.0) + grad_gn[0] * C64::new(jgv, 0.0),
                g_node * C64::new(jgvy, 0.0) + grad_gn[1] * C64::new(jgv, 0.0),
            );
            let c_int = g_node * ((gx0[0] * C64::new(jggx, 0.0) + gx0[1] * C64::new(jggy, 0.0))
                + trhxx * C64::new(jgv, 0.0));
            let d_int = g_node * C64::new(jggdv + jglap, 0.0)
                + grad_gn[0] * C64::new(jggx + 2.0 * jgvx, 0.0)
                + grad_gn[1] * C64::new(jggy + 2.0 * jgvy, 0.0)
                + lap_gn * C64::new(jgv, 0.0);
            let r_term = C64::new(-0.5, 0.0)
                * (-k2 * gx0_sq * a_int
                    + ik * (C64::new(2.0, 0.0) * (gx0[0] * b_int[0] + gx0[1] * b_int[1]) + c_int)
                    + d_int);

            let osc0 = (C64::new(0.0, k) * phi0).exp();
            acc += osc0 * (q_term + r_term) * C64::new(node.weight * eta0, 0.0) * inv_mik;
        }
    }

    Ok(acc)
}

/// Single-point `P u` evaluation for diagnostics and tests.
pub fn pu_at(qm: &BeamQuasimode, x: &Point, t: f64) -> Result<C64> {
    let c = qm.phase.field.value(x)?;
    let gc = qm.phase.field.gradient(x)?;
    let kcol = kernel_column(&qm.kernel, x)?;
    let lam = qm.phase.im_lower_bound();
    let r_s = (2.0 * WINDOW_DECADES * std::f64::consts::LN_10 / (qm.k * lam)).sqrt();
    let ds_target = (2.0 * std::f64::consts::PI / (18.0 * qm.k)).min(r_s / 12.0);
    // Corrections at a single point reuse the column machinery with a 1x1 grid.
    if qm.parts.use_corrections {
        let grid = SpaceTimeGrid {
            x0: x[0],
            x1: x[0],
            nx: 1,
            y0: x[1],
            y1: x[1],
            ny: 1,
            t0: t,
            t1: t,
            nt: 1,
        };
        let n_axis = 320;
        let axis = crate::volterra::TimeGrid::new(0.0, t.max(1e-6) * 1.05, n_axis)?;
        let v = super::transport::correction_profile(&qm.phase.field, &qm.kernel, x, &axis)?;
        let ccol = build_correction_column(&grid, &axis, &[v], 0, 0, &kcol);
        return pu_at_point(qm, x, t, c, &gc, &kcol, Some(&ccol), r_s, ds_target);
    }
    pu_at_point(qm, x, t, c, &gc, &kcol, None, r_s, ds_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::quasimode::{build_beam, BeamQuasimode, QuasimodeParts};
    use crate::beams::transport::{AmplitudeLadder, TransportConvention};
    use crate::media::{Bounds, MemoryKernel, SoundSpeedField, SpaceProfile, TimeProfile};
    use nalgebra::Vector2;
    use num_complex::Complex64 as C64;

    fn big_box() -> Bounds {
        Bounds::new([-10.0, -10.0], [10.0, 10.0])
    }

    fn interior_grid() -> SpaceTimeGrid {
        SpaceTimeGrid {
            x0: -0.6,
            x1: 0.6,
            nx: 25,
            y0: -0.25,
            y1: 0.25,
            ny: 11,
            t0: 0.5,
            t1: 1.5,
            nt: 21,
        }
    }

    #[test]
    fn grid_overlapping_endpoints_is_rejected() {
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::zero();
        let (phase, ladder) =
            build_beam(&field, &kernel, crate::media::Point::new(-1.0, 0.0), Vector2::new(1.0, 0.0), 2.0, 0)
                .unwrap();
        let qm = BeamQuasimode::assemble(phase, ladder, kernel, 40.0, 40.0, Default::default()).unwrap();
        let bad = SpaceTimeGrid { t0: 0.0, ..interior_grid() };
        assert!(residual_norm(&qm, &bad, 0.5).is_err());
    }

    #[test]
    fn constant_speed_no_memory_residual_is_small() {
        // With constant c the quadratic phase solves the eikonal identity
        // exactly and a0 solves the transport exactly, so the interior
        // residual collapses to quadrature noise, far below the k^2 scale.
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::zero();
        let (phase, ladder) =
            build_beam(&field, &kernel, crate::media::Point::new(-1.0, 0.0), Vector2::new(1.0, 0.0), 2.0, 0)
                .unwrap();
        let k = 60.0;
        let qm = BeamQuasimode::assemble(phase, ladder, kernel, k, k, Default::default()).unwrap();
        let u_scale = qm.eval(&crate::media::Point::new(0.0, 0.0), 1.0).unwrap().norm();
        let r = residual_norm(&qm, &interior_grid(), 0.35).unwrap();
        assert!(r <= 1e-4 * k * k * u_scale, "residual {r} vs scale {u_scale}");
    }

    #[test]
    fn transport_convention_scan_picks_negative_half() {
        // Residual-minimization scan over the four damping-factor candidates
        // on the constant-coefficient case; the real negative factor wins and
        // is the crate default.
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::separable(
            SpaceProfile::Constant(0.8),
            TimeProfile::exp_decay(1.0, 1.0),
            big_box(),
            20.0,
        );
        let k = 40.0;
        let start = crate::rays::PhasePoint::null_from_direction(
            &field,
            crate::media::Point::new(-1.0, 0.0),
            0.0,
            Vector2::new(1.0, 0.0),
        )
        .unwrap();
        let ray = crate::rays::trace_bicharacteristic(&field, &start, 2.0, 1e-10).unwrap();
        let phase = crate::beams::transport::BeamPhase::new(
            &field,
            ray,
            &crate::beams::riccati::standard_h0(),
            1200,
        )
        .unwrap();
        let mut norms = Vec::new();
        for mem in [
            C64::new(-0.5, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.0, -0.5),
            C64::new(0.0, 0.5),
        ] {
            let conv = TransportConvention { geometric: 1.0, memory: mem };
            let ladder = AmplitudeLadder::principal(&phase, &kernel, conv).unwrap();
            let qm = BeamQuasimode::assemble(
                phase.clone(),
                ladder,
                kernel.clone(),
                k,
                k,
                Default::default(),
            )
            .unwrap();
            norms.push(residual_norm(&qm, &interior_grid(), 0.35).unwrap());
        }
        let best = norms
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 0, "norms {norms:?}");
    }

    #[test]
    fn geometric_convention_scan_prefers_unit_factor() {
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::zero();
        let k = 40.0;
        let start = crate::rays::PhasePoint::null_from_direction(
            &field,
            crate::media::Point::new(-1.0, 0.0),
            0.0,
            Vector2::new(1.0, 0.0),
        )
        .unwrap();
        let ray = crate::rays::trace_bicharacteristic(&field, &start, 2.0, 1e-10).unwrap();
        let phase = crate::beams::transport::BeamPhase::new(
            &field,
            ray,
            &crate::beams::riccati::standard_h0(),
            1200,
        )
        .unwrap();
        let norm_with = |geom: f64| {
            let conv = TransportConvention { geometric: geom, memory: C64::new(-0.5, 0.0) };
            let ladder = AmplitudeLadder::principal(&phase, &kernel, conv).unwrap();
            let qm = BeamQuasimode::assemble(
                phase.clone(),
                ladder,
                kernel.clone(),
                k,
                k,
                Default::default(),
            )
            .unwrap();
            residual_norm(&qm, &interior_grid(), 0.35).unwrap()
        };
        let good = norm_with(1.0);
        let double = norm_with(2.0);
        assert!(good < 0.2 * double, "good {good}, double {double}");
    }

    #[test]
    fn zero_quasimode_zero_residual() {
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::zero();
        let (phase, ladder) =
            build_beam(&field, &kernel, crate::media::Point::new(-1.0, 0.0), Vector2::new(1.0, 0.0), 2.0, 0)
                .unwrap();
        let mut qm =
            BeamQuasimode::assemble(phase, ladder, kernel, 40.0, 40.0, Default::default()).unwrap();
        for node in &mut qm.nodes {
            node.a0 = C64::new(0.0, 0.0);
            node.a1 = C64::new(0.0, 0.0);
        }
        assert_eq!(residual_norm(&qm, &interior_grid(), 0.35).unwrap(), 0.0);
    }

    #[test]
    fn endpoint_identity_structure() {
        // Near (but outside) the endpoint exclusion zone, Pu is dominated by
        // the k-order endpoint blob; deep in the interior it is orders of
        // magnitude smaller.
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::zero();
        let (phase, ladder) =
            build_beam(&field, &kernel, crate::media::Point::new(-1.0, 0.0), Vector2::new(1.0, 0.0), 2.0, 0)
                .unwrap();
        let k = 60.0;
        let qm = BeamQuasimode::assemble(phase, ladder, kernel, k, k, Default::default()).unwrap();
        let near_end = pu_at(&qm, &crate::media::Point::new(-0.97, 0.0), 0.03).unwrap().norm();
        let interior = pu_at(&qm, &crate::media::Point::new(0.0, 0.0), 1.0).unwrap().norm();
        assert!(near_end > 1e3 * interior, "near {near_end}, interior {interior}");
    }

    #[test]
    fn corrections_parts_flag_runs() {
        let field = SoundSpeedField::constant(1.0, big_box()).unwrap();
        let kernel = MemoryKernel::separable(
            SpaceProfile::Constant(0.5),
            TimeProfile::exp_decay(1.0, 1.0),
            big_box(),
            20.0,
        );
        let (phase, ladder) = build_beam(
            &field,
            &kernel,
            crate::media::Point::new(-1.0, 0.0),
            Vector2::new(1.0, 0.0),
            2.0,
            1,
        )
        .unwrap();
        let parts = QuasimodeParts { use_a1: true, use_corrections: true };
        let qm = BeamQuasimode::assemble(phase, ladder, kernel, 40.0, 40.0, parts).unwrap();
        let grid = SpaceTimeGrid { nx: 13, ny: 7, nt: 11, ..interior_grid() };
        let r = residual_norm(&qm, &grid, 0.35).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}

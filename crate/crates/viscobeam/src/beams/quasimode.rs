//! Quasimode assembly: σ-superposition of phase/amplitude data, compact
//! cutoff, point evaluation, and the stationary-phase value along the ray.

use super::riccati::CMat3;
use super::transport::{AmplitudeLadder, BeamPhase, Frame};
use crate::error::{Error, Result};
use crate::media::{MemoryKernel, Point, SoundSpeedField};
use crate::util::gauss_legendre_on;
use crate::volterra::TimeGrid;
use nalgebra::{Vector2, Vector3};
use num_complex::Complex64 as C64;

/// Which ladder levels enter the superposition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuasimodeParts {
    pub use_a1: bool,
    pub use_corrections: bool,
}

/// Smooth cutoff: 1 on `[0, plateau]`, 0 beyond `support`, C^∞ in between.
pub fn cutoff(r: f64, plateau: f64, support: f64) -> f64 {
    if r <= plateau {
        1.0
    } else if r >= support {
        0.0
    } else {
        let s = (r - plateau) / (support - plateau);
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

/// One σ-quadrature node with its precomputed frame and amplitudes.
#[derive(Debug, Clone)]
pub struct QNode {
    pub weight: f64,
    pub frame: Frame,
    pub a0: C64,
    pub a1: C64,
}

/// Gaussian-beam quasimode at a fixed frequency `k`.
#[derive(Debug, Clone)]
pub struct BeamQuasimode {
    pub phase: BeamPhase,
    pub ladder: AmplitudeLadder,
    pub kernel: MemoryKernel,
    pub k: f64,
    pub parts: QuasimodeParts,
    /// Cutoff radii around the ray (plateau, support).
    pub cutoff_plateau: f64,
    pub cutoff_support: f64,
    pub nodes: Vec<QNode>,
    /// Internal grid for amplitude-correction Volterra solves.
    pub correction_grid: TimeGrid,
}

/// Exponent threshold below which envelope factors are treated as zero.
const ENVELOPE_FLOOR: f64 = 46.0; // e^{-46} ≈ 1e-20

impl BeamQuasimode {
    /// Assemble the quasimode: composite Gauss–Legendre σ-rule with at least
    /// `8√k` nodes, cutoff sized from the smallest frequency the beam family
    /// will use.
    pub fn assemble(
        phase: BeamPhase,
        ladder: AmplitudeLadder,
        kernel: MemoryKernel,
        k: f64,
        k_min_in_family: f64,
        parts: QuasimodeParts,
    ) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Argument("frequency k must be positive".into()));
        }
        let span = phase.span();
        let lam = phase.im_lower_bound();
        let plateau = 6.0 / (lam * k_min_in_family).sqrt();
        let support = 2.0 * plateau;

        let n_nodes = ((9.0 * k.sqrt()).ceil() as usize).max(96);
        let panels = n_nodes.div_ceil(16);
        let mut nodes = Vec::with_capacity(panels * 16);
        for p in 0..panels {
            let a = span * p as f64 / panels as f64;
            let b = span * (p + 1) as f64 / panels as f64;
            let (xs, ws) = gauss_legendre_on(16, a, b);
            for (sig, w) in xs.iter().zip(&ws) {
                let frame = phase.frame(*sig)?;
                nodes.push(QNode {
                    weight: *w,
                    frame,
                    a0: ladder.a0_at(*sig),
                    a1: ladder.a1_at(*sig),
                });
            }
        }

        let t_hi = phase.ray.at(span).t.max(1e-6);
        let correction_grid = TimeGrid::new(0.0, t_hi, 800)?;
        Ok(BeamQuasimode {
            phase,
            ladder,
            kernel,
            k,
            parts,
            cutoff_plateau: plateau,
            cutoff_support: support,
            nodes,
            correction_grid,
        })
    }

    /// Amplitude factor `a'(σ) = a0 + (-ik)^{-1} a1` at a node.
    fn a_prime(&self, node: &QNode) -> C64 {
        if self.parts.use_a1 {
            node.a0 + node.a1 / C64::new(0.0, -self.k)
        } else {
            node.a0
        }
    }

    /// Evaluate `u(x, t)`; the correction profile is resolved per call, so
    /// prefer [`Self::eval_column`] when scanning many times at one point.
    pub fn eval(&self, x: &Point, t: f64) -> Result<C64> {
        Ok(self.eval_column(x, &[t])?[0])
    }

    /// Evaluate `u(x, t_j)` for a column of times at fixed `x`.
    pub fn eval_column(&self, x: &Point, times: &[f64]) -> Result<Vec<C64>> {
        let k = self.k;
        let mut out = vec![C64::new(0.0, 0.0); times.len()];

        // Propagating part: Σ_q w_q η e^{ikφ(z,σ_q)} a'(σ_q).
        for node in &self.nodes {
            for (j, t) in times.iter().enumerate() {
                let z = Vector3::new(x[0], x[1], *t);
                let r = (z - node.frame.z).norm();
                if r >= self.cutoff_support {
                    continue;
                }
                let eta = cutoff(r, self.cutoff_plateau, self.cutoff_support);
                let phi = BeamPhase::phi(&node.frame, &z);
                if k * phi.im > ENVELOPE_FLOOR {
                    continue;
                }
                let osc = (C64::new(0.0, k) * phi).exp();
                out[j] += osc * self.a_prime(node) * C64::new(node.weight * eta, 0.0);
            }
        }

        // Stationary correction part:
        // (-ik)^{-1} Σ_q w_q η e^{ikφ((x,0),σ_q)} v(x,t) a0(σ_q)/∂_tφ((x,0),σ_q).
        if self.parts.use_corrections {
            let v = super::transport::correction_profile(
                &self.phase.field,
                &self.kernel,
                x,
                &self.correction_grid,
            )?;
            let dt = self.correction_grid.dt();
            let v_at = |t: f64| -> f64 {
                let s = (t - self.correction_grid.t0) / dt;
                let i = (s.floor() as isize).clamp(0, self.correction_grid.n_steps as isize - 1) as usize;
                let frac = (s - i as f64).clamp(0.0, 1.0);
                v[i] * (1.0 - frac) + v[i + 1] * frac
            };
            let inv_mik = C64::new(0.0, -k).powi(-1);
            for node in &self.nodes {
                let z0 = Vector3::new(x[0], x[1], 0.0);
                let r = (z0 - node.frame.z).norm();
                if r >= self.cutoff_support {
                    continue;
                }
                let eta = cutoff(r, self.cutoff_plateau, self.cutoff_support);
                let phi0 = BeamPhase::phi(&node.frame, &z0);
                if k * phi0.im > ENVELOPE_FLOOR {
                    continue;
                }
                let grad = BeamPhase::grad_phi(&node.frame, &z0);
                let dtphi0 = grad[2];
                if dtphi0.norm() < 1e-12 {
                    continue;
                }
                let osc = (C64::new(0.0, k) * phi0).exp();
                let factor = osc * node.a0 / dtphi0 * C64::new(node.weight * eta, 0.0) * inv_mik;
                for (j, t) in times.iter().enumerate() {
                    out[j] += factor * C64::new(v_at(*t), 0.0);
                }
            }
        }
        Ok(out)
    }
}

/// Leading-order stationary-phase prediction of the quasimode value at the
/// ray point `z(σ0)`:
///
/// `u(z(σ0)) ≈ k^{-1/2} (2π)^{1/2} (-i ∂²_σ φ)^{-1/2} a0(σ0)`,
///
/// with `∂²_σ φ(z0, σ0) = (H ż - ζ̇)·ż`. The square root uses the principal
/// branch, which stays continuous along the ray because
/// `Re(-i ∂²_σ φ) = k Im H ż·ż > 0` throughout.
///
/// Requires `σ0` at least `0.1 · span` away from both endpoints so the
/// endpoint blobs and the stationary correction tail stay negligible.
pub fn stationary_phase_value(qm: &BeamQuasimode, sigma0: f64) -> Result<C64> {
    let span = qm.phase.span();
    if sigma0 < 0.1 * span || sigma0 > 0.9 * span {
        return Err(Error::Argument(format!(
            "sigma0 = {sigma0} must lie within [0.1, 0.9] of the span {span}"
        )));
    }
    let frame = qm.phase.frame(sigma0)?;
    let zdot = Vector3::new(
        C64::new(frame.zdot[0], 0.0),
        C64::new(frame.zdot[1], 0.0),
        C64::new(frame.zdot[2], 0.0),
    );
    let zetadot = Vector3::new(
        C64::new(frame.zetadot[0], 0.0),
        C64::new(frame.zetadot[1], 0.0),
        C64::new(frame.zetadot[2], 0.0),
    );
    let d2: C64 = (frame.h * zdot - zetadot).dot(&zdot);
    let m = C64::new(0.0, -1.0) * d2;
    if m.re <= 0.0 {
        return Err(Error::Numerical(
            "degenerate σ-Hessian of the phase; cannot happen while Im H ≻ 0".into(),
        ));
    }
    let amp = qm.ladder.a0_at(sigma0);
    let root = (C64::new(2.0 * std::f64::consts::PI, 0.0) / m).sqrt();
    Ok(root * amp / C64::new(qm.k.sqrt(), 0.0))
}

/// Summary of a beam for JSON export: ray samples, `Im H` spectra and the
/// principal amplitude profile.
#[derive(Debug, serde::Serialize)]
pub struct BeamSummary {
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub xi_x: Vec<f64>,
    pub xi_y: Vec<f64>,
    pub min_im_h_eig: Vec<f64>,
    pub a0_re: Vec<f64>,
    pub a0_im: Vec<f64>,
    pub cutoff_plateau: f64,
    pub cutoff_support: f64,
}

pub fn beam_summary(qm: &BeamQuasimode, n: usize) -> Result<BeamSummary> {
    let span = qm.phase.span();
    let mut s = BeamSummary {
        sigma: vec![],
        x: vec![],
        y: vec![],
        t: vec![],
        xi_x: vec![],
        xi_y: vec![],
        min_im_h_eig: vec![],
        a0_re: vec![],
        a0_im: vec![],
        cutoff_plateau: qm.cutoff_plateau,
        cutoff_support: qm.cutoff_support,
    };
    for i in 0..=n {
        let sig = span * i as f64 / n as f64;
        let frame = qm.phase.frame(sig)?;
        s.sigma.push(sig);
        s.x.push(frame.z[0]);
        s.y.push(frame.z[1]);
        s.t.push(frame.z[2]);
        s.xi_x.push(frame.zeta[0]);
        s.xi_y.push(frame.zeta[1]);
        s.min_im_h_eig.push(super::riccati::min_im_eigenvalue(&frame.h));
        let a0 = qm.ladder.a0_at(sig);
        s.a0_re.push(a0.re);
        s.a0_im.push(a0.im);
    }
    Ok(s)
}

/// Convenience builder: trace nothing, reuse an existing phase/ladder.
pub fn assemble_quasimode(
    phase: &BeamPhase,
    ladder: &AmplitudeLadder,
    kernel: &MemoryKernel,
    k: f64,
    parts: QuasimodeParts,
) -> Result<BeamQuasimode> {
    BeamQuasimode::assemble(phase.clone(), ladder.clone(), kernel.clone(), k, k, parts)
}

/// Standard beam construction path: trace a null ray from `x0` in direction
/// `dir`, solve the Riccati equation from `iI`, run the ladder.
pub fn build_beam(
    field: &SoundSpeedField,
    kernel: &MemoryKernel,
    x0: Point,
    dir: Vector2<f64>,
    span: f64,
    levels: usize,
) -> Result<(BeamPhase, AmplitudeLadder)> {
    let start = crate::rays::PhasePoint::null_from_direction(field, x0, 0.0, dir)?;
    let ray = crate::rays::trace_bicharacteristic(field, &start, span, crate::rays::DEFAULT_TRACE_TOL)?;
    let phase = BeamPhase::new(field, ray, &super::riccati::standard_h0(), 1200)?;
    let mut ladder = AmplitudeLadder::principal(&phase, kernel, Default::default())?;
    for level in 1..=levels.min(2) {
        ladder.higher(&phase, kernel, level)?;
    }
    Ok((phase, ladder))
}

pub fn h0_identity() -> CMat3 {
    super::riccati::standard_h0()
}

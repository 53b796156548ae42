//! Numerical realization of the homogeneous symplectomorphism taking a
//! neighborhood of the trapped set to model coordinates: the unstable
//! manifold goes to {x1 = 0}, the stable manifold to {xi1 = 0}.
//!
//! The closed-form components are
//!   x1 = -phi-hat^u, x2 = theta, xi1 = T^s, xi2 = xi_theta,
//!   xi3 = xi_phi, xi4 = xi_t;
//! x1 is the defining function of the unstable manifold oriented so that
//! (xi1, x1) is a canonical pair, {xi1, x1} = +1, under the crate bracket
//! convention. The corrections X3 in x3 = phi + X3 and X4 in x4 = t + X4 are
//! defined by characteristic ODE systems and computed here by path
//! integration from the base manifold {T^s = phi-hat^u = 0}, where X3 = 0,
//! with X4 additionally pinned at the xi_phi = 0 momentum direction. Every
//! path starts with an exact dilation to the unit momentum sphere, which
//! makes degree-0 homogeneity of the corrections hold identically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{bracket_of_gradients, field_gradient_fd, Coord, PhasePoint, ScalarField};
use crate::scalar::{DualN, Scalar};
use crate::spacetime::BlackHoleParams;
use crate::trapping::{PhasePointRecord, RadialContext};

/// Knobs of the path construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormConfig {
    /// Fixed RK4 steps per path leg.
    pub leg_steps: usize,
    /// Lower bound on xi_t / (xi_t^2 + xi_phi^2)^{1/2}; the normalized chart
    /// degenerates as xi_t -> 0.
    pub xi_floor: f64,
    /// Floor for the generating-function rank check |d xi1 / d xi_r|.
    pub rank_floor: f64,
    /// Asserted bound on |x4 - t| over dilation-invariant samples.
    pub x4_bound: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self {
            leg_steps: 12,
            xi_floor: 1e-3,
            rank_floor: 1e-6,
            x4_bound: 10.0,
        }
    }
}

/// Leg ordering for the X3 path; the swapped order exists for the
/// path-independence verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegOrder {
    /// Dilate, H_{T^s} leg, H_{phi-hat^u} leg.
    Canonical,
    /// Dilate, H_{phi-hat^u} leg, H_{T^s} leg.
    Swapped,
}

/// Leg ordering for the X4 path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X4Order {
    Canonical,
    /// Swap the two transverse legs, keeping the base leg last.
    SwapAb,
}

fn rk4_leg<S: Scalar, const D: usize>(
    rhs: &dyn Fn(&[S; D]) -> Result<[S; D]>,
    y0: [S; D],
    duration: S,
    steps: usize,
) -> Result<[S; D]> {
    let h = duration / S::from_f64(steps as f64);
    let half = S::from_f64(0.5);
    let sixth = S::from_f64(1.0 / 6.0);
    let two = S::from_f64(2.0);
    let mut y = y0;
    let shift = |y: &[S; D], c: S, k: &[S; D]| {
        let mut out = *y;
        for i in 0..D {
            out[i] += c * k[i];
        }
        out
    };
    for _ in 0..steps {
        let k1 = rhs(&y)?;
        let k2 = rhs(&shift(&y, h * half, &k1))?;
        let k3 = rhs(&shift(&y, h * half, &k2))?;
        let k4 = rhs(&shift(&y, h, &k3))?;
        for i in 0..D {
            y[i] += h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
    }
    Ok(y)
}

fn path_err(leg: &str, e: Error) -> Error {
    match e {
        Error::Domain(_) | Error::OutOfRange { .. } | Error::NoInteriorCritical { .. } => {
            Error::PathEscape(format!("{leg}: {e}"))
        }
        other => other,
    }
}

/// One transverse leg: follow the Hamilton flow of T^s or phi-hat^u in the
/// (r, xi_r) plane, accumulating the (negative) xi_phi- or xi_t-derivative of
/// the flowed function. (xi_t, xi_phi) are constants of these flows.
#[allow(clippy::too_many_arguments)]
fn transverse_leg<S: Scalar>(
    params: &BlackHoleParams,
    xi_t: S,
    xi_phi: S,
    flow_travel_time: bool,
    seed_xi_t: bool,
    state: (S, S, S),
    duration: S,
    steps: usize,
) -> Result<(S, S, S)> {
    type D3<S> = DualN<S, 3>;
    let ctx = RadialContext::new(
        params,
        if seed_xi_t {
            D3::variable(xi_t, 2)
        } else {
            D3::constant(xi_t)
        },
        if seed_xi_t {
            D3::constant(xi_phi)
        } else {
            D3::variable(xi_phi, 2)
        },
    )?;
    let rhs = move |y: &[S; 3]| -> Result<[S; 3]> {
        let rd = D3::variable(y[0], 0);
        let xrd = D3::variable(y[1], 1);
        let g = if flow_travel_time {
            ctx.travel_time(rd, xrd)?
        } else {
            ctx.phi_hat_u(rd, xrd)?
        };
        Ok([g.eps[1], -g.eps[0], -g.eps[2]])
    };
    let y = rk4_leg(&rhs, [state.0, state.1, state.2], duration, steps)?;
    Ok((y[0], y[1], y[2]))
}

/// Dilated reduced coordinates (r, xi_r, xi_t, xi_phi, xi_theta) of a point.
fn dilate<S: Scalar>(point: &PhasePoint<S>) -> (S, S, S, S, S) {
    let lam = S::one() / point.momentum_norm();
    (
        point.r,
        point.xi_r * lam,
        point.xi_t * lam,
        point.xi_phi * lam,
        point.xi_theta * lam,
    )
}

fn check_xi_floor<S: Scalar>(point: &PhasePoint<S>, cfg: &NormalFormConfig) -> Result<()> {
    let (xi_t, xi_phi) = (point.xi_t.base_f64(), point.xi_phi.base_f64());
    let ratio = xi_t / (xi_t * xi_t + xi_phi * xi_phi).sqrt();
    let above = ratio.is_finite() && ratio > cfg.xi_floor;
    if !above {
        return Err(Error::Domain(format!(
            "xi_t / |(xi_t, xi_phi)| = {ratio:.3e} at or below the floor {}",
            cfg.xi_floor
        )));
    }
    Ok(())
}

/// The angular correction X3 in x3 = phi + X3.
pub fn x3_correction<S: Scalar>(params: &BlackHoleParams, point: &PhasePoint<S>) -> Result<S> {
    x3_correction_with(
        params,
        point,
        &NormalFormConfig::default(),
        LegOrder::Canonical,
    )
}

pub fn x3_correction_with<S: Scalar>(
    params: &BlackHoleParams,
    point: &PhasePoint<S>,
    cfg: &NormalFormConfig,
    order: LegOrder,
) -> Result<S> {
    check_xi_floor(point, cfg)?;
    let (r, xi_r, xi_t, xi_phi, _) = dilate(point);
    let ctx = RadialContext::new(params, xi_t, xi_phi).map_err(|e| path_err("x3 context", e))?;
    let a = ctx
        .phi_hat_u(r, xi_r)
        .map_err(|e| path_err("x3 start", e))?;
    let b = ctx
        .travel_time(r, xi_r)
        .map_err(|e| path_err("x3 start", e))?;

    // H_{T^s} reduces phi-hat^u to zero over parameter a ({T^s, phi-hat^u} =
    // -1); H_{phi-hat^u} reduces T^s to zero over parameter -b
    let legs: [(bool, S); 2] = match order {
        LegOrder::Canonical => [(true, a), (false, -b)],
        LegOrder::Swapped => [(false, -b), (true, a)],
    };
    let mut state = (r, xi_r, S::zero());
    for (flow_ts, dur) in legs {
        state = transverse_leg(
            params,
            xi_t,
            xi_phi,
            flow_ts,
            false,
            state,
            dur,
            cfg.leg_steps,
        )
        .map_err(|e| path_err("x3 leg", e))?;
    }
    Ok(-state.2)
}

/// The time correction X4 in x4 = t + X4.
pub fn x4_correction<S: Scalar>(params: &BlackHoleParams, point: &PhasePoint<S>) -> Result<S> {
    x4_correction_with(
        params,
        point,
        &NormalFormConfig::default(),
        X4Order::Canonical,
    )
}

pub fn x4_correction_with<S: Scalar>(
    params: &BlackHoleParams,
    point: &PhasePoint<S>,
    cfg: &NormalFormConfig,
    order: X4Order,
) -> Result<S> {
    check_xi_floor(point, cfg)?;
    let (r, xi_r, xi_t, xi_phi, xi_theta) = dilate(point);
    let ctx = RadialContext::new(params, xi_t, xi_phi).map_err(|e| path_err("x4 context", e))?;
    let a = ctx
        .phi_hat_u(r, xi_r)
        .map_err(|e| path_err("x4 start", e))?;
    let b = ctx
        .travel_time(r, xi_r)
        .map_err(|e| path_err("x4 start", e))?;

    let legs: [(bool, S); 2] = match order {
        X4Order::Canonical => [(true, a), (false, -b)],
        X4Order::SwapAb => [(false, -b), (true, a)],
    };
    let mut state = (r, xi_r, S::zero());
    for (flow_ts, dur) in legs {
        state = transverse_leg(
            params,
            xi_t,
            xi_phi,
            flow_ts,
            true,
            state,
            dur,
            cfg.leg_steps,
        )
        .map_err(|e| path_err("x4 leg", e))?;
    }

    // base leg along H_{x3}: moves xi_phi at exact rate -1 while staying on
    // {T^s = phi-hat^u = 0}, accumulating -d x3/d xi_t = -d X3/d xi_t; the X3
    // gradient comes from differentiating the whole X3 path construction
    type D4<S> = DualN<S, 4>;
    let params_owned = *params;
    let cfg_owned = *cfg;
    let rhs_c = move |y: &[S; 4]| -> Result<[S; 4]> {
        let pt = PhasePoint::new(
            D4::<S>::constant(S::zero()),
            D4::variable(y[0], 0),
            D4::constant(S::from_f64(std::f64::consts::FRAC_PI_2)),
            D4::constant(S::zero()),
            D4::variable(xi_t, 2),
            D4::variable(y[1], 1),
            D4::constant(xi_theta),
            D4::variable(y[2], 3),
        );
        let g = x3_correction_with(&params_owned, &pt, &cfg_owned, LegOrder::Canonical)?;
        Ok([g.eps[1], -g.eps[0], -S::one(), -g.eps[2]])
    };
    let y = rk4_leg(
        &rhs_c,
        [state.0, state.1, xi_phi, state.2],
        xi_phi,
        cfg.leg_steps,
    )
    .map_err(|e| path_err("x4 base leg", e))?;
    Ok(-y[3])
}

/// Closed-form components of the map: (x1, x2, xi1, xi2, xi3, xi4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpCore {
    pub x1: f64,
    pub x2: f64,
    pub xi: [f64; 4],
}

pub fn sp_core(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<SpCore> {
    sp_core_with(params, point, &NormalFormConfig::default())
}

pub fn sp_core_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &NormalFormConfig,
) -> Result<SpCore> {
    check_xi_floor(point, cfg)?;
    let ctx = RadialContext::new(params, point.xi_t, point.xi_phi)?;
    let x1 = -ctx.phi_hat_u(point.r, point.xi_r)?;
    let xi1 = ctx.travel_time(point.r, point.xi_r)?;
    Ok(SpCore {
        x1,
        x2: point.theta,
        xi: [xi1, point.xi_theta, point.xi_phi, point.xi_t],
    })
}

/// The full image of a phase point under the symplectomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormImage {
    /// (x1, x2, x3, x4); x3 is reduced mod 2 pi.
    pub x: [f64; 4],
    /// (xi1, xi2, xi3, xi4).
    pub xi: [f64; 4],
    pub path_report: String,
}

pub fn normal_form_image(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
) -> Result<NormalFormImage> {
    normal_form_image_with(params, point, &NormalFormConfig::default())
}

pub fn normal_form_image_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &NormalFormConfig,
) -> Result<NormalFormImage> {
    let core = sp_core_with(params, point, cfg)?;
    let x3c = x3_correction_with(params, point, cfg, LegOrder::Canonical)?;
    let x4c = x4_correction_with(params, point, cfg, X4Order::Canonical)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let x3 = (point.phi + x3c).rem_euclid(two_pi);
    let x4 = point.t + x4c;
    let norm = point.momentum_norm();
    Ok(NormalFormImage {
        x: [core.x1, core.x2, x3, x4],
        xi: core.xi,
        path_report: format!(
            "dilate to |xi| = 1; legs H_Ts({:+.3e}) then H_phihatu({:+.3e}) at {} RK4 steps; \
             X3 = 0 assumed on the whole reduced base {{T^s = phi-hat^u = 0}}, \
             X4 = 0 at its xi_phi = 0 point (base leg {:+.3e})",
            -core.x1,
            -core.xi[0] / norm,
            cfg.leg_steps,
            core.xi[2] / norm,
        ),
    })
}

/// The eight pulled-back coordinate functions as scalar fields.
#[derive(Debug, Clone, Copy)]
pub enum SpComponent {
    X1,
    X2,
    X3,
    X4,
    Xi1,
    Xi2,
    Xi3,
    Xi4,
}

/// Field wrapper for one component of the map.
#[derive(Debug, Clone, Copy)]
pub struct SpField {
    pub params: BlackHoleParams,
    pub cfg: NormalFormConfig,
    pub component: SpComponent,
}

impl ScalarField for SpField {
    fn eval<S: Scalar>(&self, point: &PhasePoint<S>) -> Result<S> {
        match self.component {
            SpComponent::X1 => {
                let ctx = RadialContext::new(&self.params, point.xi_t, point.xi_phi)?;
                Ok(-ctx.phi_hat_u(point.r, point.xi_r)?)
            }
            SpComponent::X2 => Coord::Theta.eval(point),
            // unwrapped angle: brackets differentiate locally, where the
            // 2 pi reduction is constant
            SpComponent::X3 => Ok(point.phi
                + x3_correction_with(&self.params, point, &self.cfg, LegOrder::Canonical)?),
            SpComponent::X4 => {
                Ok(point.t
                    + x4_correction_with(&self.params, point, &self.cfg, X4Order::Canonical)?)
            }
            SpComponent::Xi1 => {
                let ctx = RadialContext::new(&self.params, point.xi_t, point.xi_phi)?;
                ctx.travel_time(point.r, point.xi_r)
            }
            SpComponent::Xi2 => Coord::XiTheta.eval(point),
            SpComponent::Xi3 => Coord::XiPhi.eval(point),
            SpComponent::Xi4 => Coord::XiT.eval(point),
        }
    }
}

const COMPONENTS: [SpComponent; 8] = [
    SpComponent::X1,
    SpComponent::X2,
    SpComponent::X3,
    SpComponent::X4,
    SpComponent::Xi1,
    SpComponent::Xi2,
    SpComponent::Xi3,
    SpComponent::Xi4,
];

/// Differentiation route for the bracket verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BracketMode {
    DualNumber,
    FiniteDifference,
}

impl BracketMode {
    fn name(self) -> &'static str {
        match self {
            BracketMode::DualNumber => "dual-number",
            BracketMode::FiniteDifference => "finite-difference",
        }
    }
}

/// All pairwise Poisson brackets of the pulled-back coordinates against the
/// canonical pattern {x_i, x_j} = {xi_i, xi_j} = 0, {xi_i, x_j} = delta_ij.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketResidual {
    pub point: PhasePointRecord,
    /// Entry (i, j) holds {c_i, c_j} minus the canonical target, components
    /// ordered (x1..x4, xi1..xi4).
    pub residual_matrix: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub mode: String,
}

/// FD step used by the finite-difference bracket mode.
pub const FD_BRACKET_STEP: f64 = 1e-5;

pub fn verify_canonical(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    mode: BracketMode,
) -> Result<BracketResidual> {
    verify_canonical_with(params, point, mode, &NormalFormConfig::default())
}

/// Dual-number 8-gradient of one map component. The nontrivial components
/// depend only on (r, xi_r, xi_t, xi_phi) plus an additive t or phi, so a
/// single 4-lane dual evaluation fills the gradient; the t, theta, phi,
/// xi_theta partials of the corrections vanish identically.
fn sp_gradient_dual(
    params: &BlackHoleParams,
    cfg: &NormalFormConfig,
    component: SpComponent,
    point: &PhasePoint<f64>,
) -> Result<[f64; 8]> {
    let mut out = [0.0; 8];
    match component {
        SpComponent::X2 => out[2] = 1.0,
        SpComponent::Xi2 => out[6] = 1.0,
        SpComponent::Xi3 => out[7] = 1.0,
        SpComponent::Xi4 => out[4] = 1.0,
        SpComponent::X1 | SpComponent::Xi1 | SpComponent::X3 | SpComponent::X4 => {
            type D4 = DualN<f64, 4>;
            let pt4 = PhasePoint::new(
                D4::constant(point.t),
                D4::variable(point.r, 0),
                D4::constant(point.theta),
                D4::constant(point.phi),
                D4::variable(point.xi_t, 2),
                D4::variable(point.xi_r, 1),
                D4::constant(point.xi_theta),
                D4::variable(point.xi_phi, 3),
            );
            let field = SpField {
                params: *params,
                cfg: *cfg,
                component,
            };
            let g = field.eval(&pt4)?;
            out[1] = g.eps[0];
            out[5] = g.eps[1];
            out[4] = g.eps[2];
            out[7] = g.eps[3];
            match component {
                SpComponent::X3 => out[3] = 1.0,
                SpComponent::X4 => out[0] = 1.0,
                _ => {}
            }
        }
    }
    Ok(out)
}

pub fn verify_canonical_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    mode: BracketMode,
    cfg: &NormalFormConfig,
) -> Result<BracketResidual> {
    let mut grads = Vec::with_capacity(8);
    for component in COMPONENTS {
        let field = SpField {
            params: *params,
            cfg: *cfg,
            component,
        };
        let g = match mode {
            BracketMode::DualNumber => sp_gradient_dual(params, cfg, component, point)?,
            BracketMode::FiniteDifference => field_gradient_fd(&field, point, FD_BRACKET_STEP)?,
        };
        grads.push(g);
    }
    let target = |i: usize, j: usize| -> f64 {
        // indices 0..4 are x, 4..8 are xi
        if i >= 4 && j < 4 && i - 4 == j {
            1.0
        } else if j >= 4 && i < 4 && j - 4 == i {
            -1.0
        } else {
            0.0
        }
    };
    let mut residual = vec![vec![0.0; 8]; 8];
    let mut max_residual = 0.0_f64;
    for i in 0..8 {
        for j in 0..8 {
            let br = bracket_of_gradients(&grads[i], &grads[j]);
            residual[i][j] = br - target(i, j);
            max_residual = max_residual.max(residual[i][j].abs());
        }
    }
    Ok(BracketResidual {
        point: (*point).into(),
        residual_matrix: residual,
        max_residual,
        mode: mode.name().to_string(),
    })
}

/// d xi1 / d xi_r, the quantity behind the generating-function rank
/// condition; errors if it falls below the configured floor.
pub fn verify_generating_rank(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    verify_generating_rank_with(params, point, &NormalFormConfig::default())
}

pub fn verify_generating_rank_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &NormalFormConfig,
) -> Result<f64> {
    let g = sp_gradient_dual(params, cfg, SpComponent::Xi1, point)?;
    let d = g[5]; // xi_r lane
    if d.abs() <= cfg.rank_floor {
        return Err(Error::Domain(format!(
            "generating-function rank check failed: |d xi1 / d xi_r| = {:.3e} <= {:.3e}",
            d.abs(),
            cfg.rank_floor
        )));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trapping::{complete_gamma_point, sample_near_gamma, sample_trapped_set};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn kerr() -> BlackHoleParams {
        BlackHoleParams::new(1.0, 0.5, 0.0).unwrap()
    }

    #[test]
    fn gamma_maps_to_origin_of_transverse_plane() {
        let params = kerr();
        let sample = sample_trapped_set(&params, 4, 17).unwrap();
        for d in &sample.data {
            let pt = d.phase_point();
            let core = sp_core(&params, &pt).unwrap();
            assert!(core.x1.abs() < 1e-10);
            assert!(core.xi[0].abs() < 1e-10);
            // X3, X4 vanish on the base manifold (X4 to integrator noise:
            // its base leg integrand is an integrated-zero there)
            assert!(x3_correction(&params, &pt).unwrap().abs() < 1e-12);
            assert!(x4_correction(&params, &pt).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn unstable_manifold_maps_to_x1_zero() {
        let params = kerr();
        let ctx = RadialContext::new(&params, 0.95, 0.2).unwrap();
        for dr in [-0.05, 0.02, 0.08] {
            let r = ctx.r_crit + dr;
            // Gamma^u: xi_r = +(1 + alpha-hat) S(r)
            let xi_r = params.delta0 * ctx.s_fn(r).unwrap();
            let pt = PhasePoint::new(0.0, r, 1.2, 0.3, 0.95, xi_r, 0.7, 0.2);
            let core = sp_core(&params, &pt).unwrap();
            assert!(core.x1.abs() < 1e-10, "x1 = {} off Gamma^u", core.x1);
            // Gamma^s: xi_r = -(1 + alpha-hat) S(r) maps to xi1 = 0
            let pt_s = PhasePoint::new(0.0, r, 1.2, 0.3, 0.95, -xi_r, 0.7, 0.2);
            let core_s = sp_core(&params, &pt_s).unwrap();
            assert!(
                core_s.xi[0].abs() < 1e-9,
                "xi1 = {} off Gamma^s",
                core_s.xi[0]
            );
        }
    }

    #[test]
    fn x3_dilation_invariance_is_exact() {
        let params = kerr();
        let pts = sample_near_gamma(&params, 2, 31, 0.03, false).unwrap();
        for pt in &pts {
            let v = x3_correction(&params, pt).unwrap();
            // invariance up to the r_crit Newton cutoff jitter, well inside
            // the 1e-8 contract
            for lam in [0.5, 2.0, 3.0] {
                let vs = x3_correction(&params, &pt.scale_momentum(lam)).unwrap();
                assert_abs_diff_eq!(vs, v, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn x3_path_order_independence() {
        let params = kerr();
        let cfg = NormalFormConfig::default();
        let pts = sample_near_gamma(&params, 4, 32, 0.04, false).unwrap();
        for pt in &pts {
            let a = x3_correction_with(&params, pt, &cfg, LegOrder::Canonical).unwrap();
            let b = x3_correction_with(&params, pt, &cfg, LegOrder::Swapped).unwrap();
            assert!(
                (a - b).abs() < 1e-9,
                "path-order difference {:.3e}",
                (a - b).abs()
            );
        }
    }

    #[test]
    fn x4_path_order_spot_check() {
        let params = kerr();
        let cfg = NormalFormConfig::default();
        let pts = sample_near_gamma(&params, 2, 33, 0.04, false).unwrap();
        for pt in &pts {
            let a = x4_correction_with(&params, pt, &cfg, X4Order::Canonical).unwrap();
            let b = x4_correction_with(&params, pt, &cfg, X4Order::SwapAb).unwrap();
            assert!(
                (a - b).abs() < 1e-9,
                "x4 path-order difference {:.3e}",
                (a - b).abs()
            );
        }
    }

    #[test]
    fn canonical_brackets_dual_mode() {
        let params = kerr();
        let pts = sample_near_gamma(&params, 5, 34, 0.05, false).unwrap();
        for pt in &pts {
            let rep = verify_canonical(&params, pt, BracketMode::DualNumber).unwrap();
            assert!(
                rep.max_residual < 1e-5,
                "dual-mode residual {:.3e}",
                rep.max_residual
            );
            // antisymmetry of the bracket matrix itself
            for i in 0..8 {
                for j in 0..8 {
                    let bij = rep.residual_matrix[i][j];
                    let bji = rep.residual_matrix[j][i];
                    // residual = bracket - antisymmetric target, so the
                    // bracket part must cancel
                    assert!((bij + bji).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn named_bracket_values() {
        let params = kerr();
        let pt = sample_near_gamma(&params, 1, 35, 0.05, false).unwrap()[0];
        let rep = verify_canonical(&params, &pt, BracketMode::DualNumber).unwrap();
        // {xi1, x1} = 1: residual entry (4, 0) ~ 0
        assert!(rep.residual_matrix[4][0].abs() < 1e-6);
        // {xi4, x4} = 1
        assert!(rep.residual_matrix[7][3].abs() < 1e-6);
        // {x2, xi3} = 0 exactly (independent canonical coordinates)
        assert_abs_diff_eq!(rep.residual_matrix[1][6], 0.0);
    }

    #[test]
    fn canonical_brackets_fd_mode() {
        let params = kerr();
        let cfg = NormalFormConfig {
            leg_steps: 8,
            ..NormalFormConfig::default()
        };
        let pt = sample_near_gamma(&params, 1, 36, 0.04, false).unwrap()[0];
        let rep = verify_canonical_with(&params, &pt, BracketMode::FiniteDifference, &cfg).unwrap();
        assert!(
            rep.max_residual < 1e-3,
            "fd-mode residual {:.3e}",
            rep.max_residual
        );
    }

    #[test]
    fn canonical_brackets_fd_mode_full_sweep() {
        use rayon::prelude::*;
        let params = kerr();
        let pts = sample_near_gamma(&params, 100, 44, 0.05, false).unwrap();
        let worst = pts
            .par_iter()
            .map(|pt| {
                verify_canonical(&params, pt, BracketMode::FiniteDifference)
                    .unwrap()
                    .max_residual
            })
            .reduce(|| 0.0, f64::max);
        assert!(worst < 1e-3, "fd-mode residual {worst:.3e} over 100 points");
    }

    #[test]
    fn homogeneity_of_components() {
        let params = kerr();
        let pt = sample_near_gamma(&params, 1, 37, 0.05, false).unwrap()[0];
        let image = normal_form_image(&params, &pt).unwrap();
        for lam in [0.5, 3.0] {
            let scaled = normal_form_image(&params, &pt.scale_momentum(lam)).unwrap();
            for i in 0..4 {
                let denom = image.x[i].abs().max(1.0);
                assert!(
                    (scaled.x[i] - image.x[i]).abs() / denom < 1e-7,
                    "x{} not degree 0",
                    i + 1
                );
                let denom = image.xi[i].abs().max(1.0);
                assert!(
                    (scaled.xi[i] - lam * image.xi[i]).abs() / denom < 1e-7,
                    "xi{} not degree 1",
                    i + 1
                );
            }
        }
    }

    #[test]
    fn x4_stays_bounded_and_t_shifts_through() {
        let params = kerr();
        let cfg = NormalFormConfig::default();
        let pts = sample_near_gamma(&params, 6, 38, 0.05, false).unwrap();
        let mut max_x4 = 0.0_f64;
        for pt in &pts {
            let image = normal_form_image(&params, pt).unwrap();
            max_x4 = max_x4.max((image.x[3] - pt.t).abs());
            // t-translation passes straight through x4
            let mut shifted = *pt;
            shifted.t += 2.5;
            let image2 = normal_form_image(&params, &shifted).unwrap();
            assert_relative_eq!(image2.x[3] - image.x[3], 2.5, epsilon = 1e-12);
        }
        assert!(max_x4 < cfg.x4_bound, "max |x4 - t| = {max_x4}");
    }

    #[test]
    fn generating_rank_is_bounded_away_from_zero() {
        let params = kerr();
        let pts = sample_near_gamma(&params, 3, 39, 0.05, false).unwrap();
        for pt in &pts {
            let d = verify_generating_rank(&params, pt).unwrap();
            assert!(d.abs() > 1e-3);
        }
        // and the closed-form sign: d xi1 / d xi_r = -xi_t / (2 (1+ah) S'(r0))
        let pt = pts[0];
        let ctx = RadialContext::new(&params, pt.xi_t, pt.xi_phi).unwrap();
        let target = -ctx.phi_u(pt.r, pt.xi_r).unwrap() / (2.0 * params.delta0);
        let r0 = ctx.s_inv(target).unwrap();
        let ds = crate::scalar::derivative(
            |rd: crate::scalar::Dual<f64>| ctx.lift::<1>().s_fn(rd).unwrap(),
            r0,
        )
        .1;
        let expect = pt.xi_t / (2.0 * params.delta0 * ds);
        let got = verify_generating_rank(&params, &pt).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-8);
    }

    #[test]
    fn injectivity_spot_check() {
        let params = kerr();
        let pts = sample_near_gamma(&params, 12, 40, 0.05, false).unwrap();
        let images: Vec<NormalFormImage> = pts
            .iter()
            .map(|p| normal_form_image(&params, p).unwrap())
            .collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        for i in 0..images.len() {
            for j in (i + 1)..images.len() {
                let mut sep = 0.0_f64;
                for k in 0..4 {
                    let dx = if k == 2 {
                        let d = (images[i].x[2] - images[j].x[2]).rem_euclid(two_pi);
                        d.min(two_pi - d)
                    } else {
                        (images[i].x[k] - images[j].x[k]).abs()
                    };
                    sep = sep.max(dx);
                    sep = sep.max((images[i].xi[k] - images[j].xi[k]).abs());
                }
                assert!(sep >= 1e-6, "images {i} and {j} collide: sep = {sep:.3e}");
            }
        }
    }

    #[test]
    fn phihat_u_and_travel_time_pair_at_unit_bracket() {
        // {phi-hat^u, T^s} = 1 near the trapped set
        let params = kerr();
        let pts = sample_near_gamma(&params, 3, 41, 0.05, false).unwrap();
        let phihat = crate::trapping::PhiHatU { params };
        let ts = SpField {
            params,
            cfg: NormalFormConfig::default(),
            component: SpComponent::Xi1,
        };
        for pt in &pts {
            let br = crate::phase::poisson_bracket(&phihat, &ts, pt).unwrap();
            assert_relative_eq!(br, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn schwarzschild_x3_vanishes() {
        // a = 0: T^s and phi-hat^u are xi_phi-independent, so X3 = 0
        let params = BlackHoleParams::new(1.0, 0.0, 0.0).unwrap();
        let d = complete_gamma_point(&params, 0.9, 0.3, 1.3, 1.0).unwrap();
        let mut pt = d.phase_point();
        pt.xi_r += 0.03;
        pt.r += 0.02;
        assert!(x3_correction(&params, &pt).unwrap().abs() < 1e-12);
    }
}

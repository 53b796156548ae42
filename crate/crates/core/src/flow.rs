//! Hamiltonian flow integration, conservation diagnostics, event detection on
//! the stable manifold, and the travel-time function by closed formula and by
//! flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{p_symbol, PhasePoint};
use crate::scalar::Scalar;
use crate::spacetime::BlackHoleParams;
use crate::trapping::RadialContext;

/// Integration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Classical fixed-step 4th order Runge-Kutta.
    FixedRk4,
    /// Embedded adaptive Fehlberg 4(5).
    AdaptiveRkf45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    /// Step size for the fixed-step method.
    pub step: f64,
    /// Mixed absolute/relative tolerance for the adaptive method.
    pub tol: f64,
    pub max_steps: usize,
}

impl IntegratorSpec {
    pub fn fixed(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("step must be positive, got {step}")));
        }
        Ok(Self {
            method: Method::FixedRk4,
            step,
            tol: 1e-10,
            max_steps: 10_000_000,
        })
    }

    pub fn adaptive(tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self {
            method: Method::AdaptiveRkf45,
            step: 1e-3,
            tol,
            max_steps: 10_000_000,
        })
    }

    fn descriptor(&self) -> String {
        match self.method {
            Method::FixedRk4 => format!("rk4 fixed step {}", self.step),
            Method::AdaptiveRkf45 => format!("rkf45 adaptive tol {}", self.tol),
        }
    }
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self::adaptive(1e-10).unwrap()
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// The state left the exterior/pole-band domain at flow parameter `s`.
    DomainExit {
        s: f64,
    },
}

/// Conservation drifts measured on the stored samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_p_drift: f64,
    pub max_xi_t_drift: f64,
    pub max_xi_phi_drift: f64,
}

/// Time-stamped integration output with dense cubic-Hermite evaluation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhasePoint<f64>)>,
    /// State derivative at each sample, for the Hermite interpolant.
    pub derivs: Vec<[f64; 8]>,
    pub integrator: String,
    pub diagnostics: Diagnostics,
    pub termination: Termination,
}

impl Trajectory {
    pub fn end(&self) -> (f64, PhasePoint<f64>) {
        *self.samples.last().expect("trajectory has samples")
    }

    /// Dense state by cubic Hermite interpolation between accepted steps.
    pub fn sample_dense(&self, s: f64) -> PhasePoint<f64> {
        let n = self.samples.len();
        if n == 1 {
            return self.samples[0].1;
        }
        let s0 = self.samples[0].0;
        let s1 = self.samples[n - 1].0;
        let forward = s1 >= s0;
        // locate the bracketing accepted interval
        let mut k = 0;
        while k + 2 < n {
            let next = self.samples[k + 1].0;
            if (forward && next >= s) || (!forward && next <= s) {
                break;
            }
            k += 1;
        }
        let (sa, za) = self.samples[k];
        let (sb, zb) = self.samples[k + 1];
        let h = sb - sa;
        if h == 0.0 {
            return za;
        }
        let t = (s - sa) / h;
        let (za, zb) = (za.to_array(), zb.to_array());
        let (fa, fb) = (self.derivs[k], self.derivs[k + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = h00 * za[i] + h10 * h * fa[i] + h01 * zb[i] + h11 * h * fb[i];
        }
        PhasePoint::from_array(out)
    }
}

const RKF45_A: [[f64; 5]; 5] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [
        -8.0 / 27.0,
        2.0,
        -3544.0 / 2565.0,
        1859.0 / 4104.0,
        -11.0 / 40.0,
    ],
];
const RKF45_B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -0.2,
    0.0,
];
const RKF45_B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

type Rhs<'a> = dyn Fn(&[f64; 8]) -> Result<[f64; 8]> + 'a;

fn axpy(z: &[f64; 8], h: f64, coeffs: &[f64], ks: &[[f64; 8]]) -> [f64; 8] {
    let mut out = *z;
    for (c, k) in coeffs.iter().zip(ks.iter()) {
        if *c != 0.0 {
            for i in 0..8 {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn rk4_step(rhs: &Rhs, z: &[f64; 8], h: f64) -> Result<[f64; 8]> {
    let k1 = rhs(z)?;
    let k2 = rhs(&axpy(z, 0.5 * h, &[1.0], &[k1]))?;
    let k3 = rhs(&axpy(z, 0.5 * h, &[1.0], &[k2]))?;
    let k4 = rhs(&axpy(z, h, &[1.0], &[k3]))?;
    let mut out = *z;
    for i in 0..8 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Integrate `rhs` from `init` over a signed `duration`. Domain errors from
/// the right-hand side terminate the run with a `DomainExit` record.
fn integrate(
    rhs: &Rhs,
    init: &PhasePoint<f64>,
    duration: f64,
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
    if !duration.is_finite() {
        return Err(Error::Config(format!(
            "duration must be finite: {duration}"
        )));
    }
    let dir = if duration < 0.0 { -1.0 } else { 1.0 };
    let s_end = duration;
    let mut s = 0.0;
    let mut z = init.to_array();
    let mut f = rhs(&z)?;
    let mut samples = vec![(0.0, *init)];
    let mut derivs = vec![f];
    let mut termination = Termination::Completed;
    if duration == 0.0 {
        return Ok(Trajectory {
            samples,
            derivs,
            integrator: spec.descriptor(),
            diagnostics: Diagnostics {
                max_p_drift: 0.0,
                max_xi_t_drift: 0.0,
                max_xi_phi_drift: 0.0,
            },
            termination,
        });
    }

    match spec.method {
        Method::FixedRk4 => {
            let n = (duration.abs() / spec.step).ceil().max(1.0) as usize;
            let h = duration / n as f64;
            'outer: for _ in 0..n.min(spec.max_steps) {
                match rk4_step(rhs, &z, h) {
                    Ok(zn) => match rhs(&zn) {
                        Ok(fn_) => {
                            s += h;
                            z = zn;
                            f = fn_;
                            samples.push((s, PhasePoint::from_array(z)));
                            derivs.push(f);
                        }
                        Err(_) => {
                            termination = Termination::DomainExit { s };
                            break 'outer;
                        }
                    },
                    Err(_) => {
                        termination = Termination::DomainExit { s };
                        break 'outer;
                    }
                }
            }
        }
        Method::AdaptiveRkf45 => {
            let mut h = dir * (duration.abs() / 100.0).clamp(1e-8, 0.1);
            let h_min = duration.abs() * 1e-15;
            let mut steps = 0;
            while (s_end - s) * dir > 0.0 {
                if steps >= spec.max_steps {
                    return Err(Error::StepFailure { s, h });
                }
                steps += 1;
                if (s + h - s_end) * dir > 0.0 {
                    h = s_end - s;
                }
                let mut ks = [[0.0; 8]; 6];
                ks[0] = f;
                let mut stage_err = false;
                for i in 0..5 {
                    let zi = axpy(&z, h, &RKF45_A[i][..=i], &ks[..=i]);
                    match rhs(&zi) {
                        Ok(k) => ks[i + 1] = k,
                        Err(_) => {
                            stage_err = true;
                            break;
                        }
                    }
                }
                let (z4, z5);
                if stage_err {
                    z4 = z;
                    z5 = z;
                } else {
                    z4 = axpy(&z, h, &RKF45_B4, &ks);
                    z5 = axpy(&z, h, &RKF45_B5, &ks);
                }
                let mut err = 0.0_f64;
                if stage_err {
                    err = f64::INFINITY;
                } else {
                    for i in 0..8 {
                        let scale = spec.tol + spec.tol * z[i].abs().max(z5[i].abs());
                        err = err.max((z4[i] - z5[i]).abs() / scale);
                    }
                }
                if err <= 1.0 {
                    match rhs(&z5) {
                        Ok(fn_) => {
                            s += h;
                            z = z5;
                            f = fn_;
                            samples.push((s, PhasePoint::from_array(z)));
                            derivs.push(f);
                        }
                        Err(_) => {
                            termination = Termination::DomainExit { s };
                            break;
                        }
                    }
                }
                let factor = if err.is_finite() && err > 0.0 {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                } else if err == 0.0 {
                    5.0
                } else {
                    0.2
                };
                h *= factor;
                if h.abs() < h_min {
                    // collapse driven by stages leaving the (margin-padded)
                    // domain is an exit, not an integrator failure
                    if stage_err {
                        termination = Termination::DomainExit { s };
                        break;
                    }
                    return Err(Error::StepFailure { s, h });
                }
            }
        }
    }

    Ok(Trajectory {
        samples,
        derivs,
        integrator: spec.descriptor(),
        diagnostics: Diagnostics {
            max_p_drift: 0.0,
            max_xi_t_drift: 0.0,
            max_xi_phi_drift: 0.0,
        },
        termination,
    })
}

/// Fill in the conservation drifts from the stored samples.
fn finalize_diagnostics(params: &BlackHoleParams, traj: &mut Trajectory) {
    let (xi_t0, xi_phi0) = (traj.samples[0].1.xi_t, traj.samples[0].1.xi_phi);
    let p0 = p_symbol(params, &traj.samples[0].1).unwrap_or(f64::NAN);
    let mut d = Diagnostics {
        max_p_drift: 0.0,
        max_xi_t_drift: 0.0,
        max_xi_phi_drift: 0.0,
    };
    for (_, pt) in &traj.samples {
        if let Ok(p) = p_symbol(params, pt) {
            d.max_p_drift = d.max_p_drift.max((p - p0).abs());
        }
        d.max_xi_t_drift = d.max_xi_t_drift.max((pt.xi_t - xi_t0).abs());
        d.max_xi_phi_drift = d.max_xi_phi_drift.max((pt.xi_phi - xi_phi0).abs());
    }
    traj.diagnostics = d;
}

/// Degree-0 normalization of the H_p field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rescale {
    /// Raw H_p.
    Off,
    /// Multiply by (xi_t^2 + xi_phi^2)^{-1/2}, matching the expansion-rate
    /// normalization.
    MomentumPlane,
    /// Multiply by rho-hat = |xi|^{-1}, the rescaled field on the cosphere
    /// bundle.
    FullFiber,
}

impl Rescale {
    /// Spec-level boolean flag: on = momentum-plane normalization.
    pub fn from_flag(rescale: bool) -> Self {
        if rescale {
            Rescale::MomentumPlane
        } else {
            Rescale::Off
        }
    }
}

/// Integrate the H_p flow under the chosen normalization. Escapes past the
/// cosmological horizon (or the Kerr scan cap) terminate with `DomainExit`.
/// Horizon proximity margin: integration stops once Delta(r) falls below this
/// times mass^2, keeping the near-singular field out of the stepper.
const DELTA_MARGIN: f64 = 1e-4;

fn check_flow_domain(params: &BlackHoleParams, r: f64, r_cap: f64) -> Result<()> {
    if r >= r_cap {
        return Err(Error::Domain(format!("r = {r} beyond the scan cap")));
    }
    if crate::spacetime::delta_r(params, r) < DELTA_MARGIN * params.mass * params.mass {
        return Err(Error::Domain(format!("r = {r} within the horizon margin")));
    }
    Ok(())
}

pub fn integrate_hp(
    params: &BlackHoleParams,
    init: &PhasePoint<f64>,
    duration: f64,
    spec: &IntegratorSpec,
    rescale: Rescale,
) -> Result<Trajectory> {
    let r_cap = crate::trapping::ExteriorDomain::of(params)
        .map(|d| d.r_hi)
        .unwrap_or(f64::INFINITY);
    let rhs = move |z: &[f64; 8]| -> Result<[f64; 8]> {
        let pt = PhasePoint::from_array(*z);
        check_flow_domain(params, pt.r, r_cap)?;
        let tang = crate::phase::hamilton_field(params, &pt)?;
        let mut out = [
            tang.dx[0],
            tang.dx[1],
            tang.dx[2],
            tang.dx[3],
            tang.dxi[0],
            tang.dxi[1],
            tang.dxi[2],
            tang.dxi[3],
        ];
        let n = match rescale {
            Rescale::Off => 1.0,
            Rescale::MomentumPlane => (pt.xi_t * pt.xi_t + pt.xi_phi * pt.xi_phi).sqrt(),
            Rescale::FullFiber => pt.momentum_norm(),
        };
        if n != 1.0 {
            for v in &mut out {
                *v /= n;
            }
        }
        Ok(out)
    };
    let mut traj = integrate(&rhs, init, duration, spec)?;
    finalize_diagnostics(params, &mut traj);
    Ok(traj)
}

/// Integrate the flow of phi-hat^u.
///
/// xi_t and xi_phi are exactly conserved by this field, so the radial context
/// (with its dual-number sensitivities in the momentum-plane directions) is
/// built once and reused across every stage evaluation.
pub fn integrate_hphiu(
    params: &BlackHoleParams,
    init: &PhasePoint<f64>,
    duration: f64,
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
    // lanes: 0 = r, 1 = xi_r, 2 = xi_t, 3 = xi_phi
    type D4 = crate::scalar::DualN<f64, 4>;
    let ctx = RadialContext::new(
        params,
        D4::variable(init.xi_t, 2),
        D4::variable(init.xi_phi, 3),
    )?;
    let r_cap = ctx.domain.r_hi;
    let params = *params;
    let rhs = move |z: &[f64; 8]| -> Result<[f64; 8]> {
        check_flow_domain(&params, z[1], r_cap)?;
        let g = ctx.phi_hat_u(D4::variable(z[1], 0), D4::variable(z[5], 1))?;
        let [d_r, d_xi_r, d_xi_t, d_xi_phi] = g.eps;
        // H under the crate bracket convention; theta, xi_theta are inert
        Ok([d_xi_t, d_xi_r, 0.0, d_xi_phi, 0.0, -d_r, 0.0, 0.0])
    };
    let mut traj = integrate(&rhs, init, duration, spec)?;
    finalize_diagnostics(&params, &mut traj);
    Ok(traj)
}

/// Travel time to the stable manifold by the closed inversion formula,
/// T^s = xi_t (r - r_0) with r_0 from the monotone inverse of S.
pub fn travel_time_closed(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    RadialContext::new(params, point.xi_t, point.xi_phi)?.travel_time(point.r, point.xi_r)
}

/// Configuration for the numeric travel-time search.
#[derive(Debug, Clone, Copy)]
pub struct CrossingConfig {
    pub max_duration: f64,
    pub spec: IntegratorSpec,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        // tol below the default 1e-10 because the secant runs on the Hermite
        // interpolant, whose inter-node error exceeds the step error
        Self {
            max_duration: 5.0,
            spec: IntegratorSpec::adaptive(1e-12).unwrap(),
        }
    }
}

/// Travel time by flow: locate the phi^s sign change along the H_{phi-hat^u}
/// flow (bracket on accepted steps, then secant on the dense interpolant) and
/// return minus the crossing parameter.
pub fn travel_time_numeric(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    travel_time_numeric_with(params, point, &CrossingConfig::default())
}

pub fn travel_time_numeric_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &CrossingConfig,
) -> Result<f64> {
    let ctx = RadialContext::new(params, point.xi_t, point.xi_phi)?;
    let phi_s_of = |pt: &PhasePoint<f64>| ctx.phi_s(pt.r, pt.xi_r);
    let v0 = phi_s_of(point)?;
    let norm = point.momentum_norm();
    let tol = 1e-10 * norm;
    if v0.abs() < tol {
        return Ok(0.0);
    }
    // phi^s increases along the flow, so integrate toward its zero, in chunks
    let dir = if v0 > 0.0 { -1.0 } else { 1.0 };
    let chunk = dir * cfg.max_duration / 10.0;
    let mut offset = 0.0;
    let mut start = *point;
    let mut prev = (0.0, v0);
    while offset.abs() < cfg.max_duration {
        let traj = integrate_hphiu(params, &start, chunk, &cfg.spec)?;
        let mut bracket = None;
        for (s, pt) in traj.samples.iter().skip(1) {
            let v = phi_s_of(pt)?;
            let s_glob = offset + s;
            if prev.1 * v <= 0.0 {
                bracket = Some((prev, (s_glob, v)));
                break;
            }
            prev = (s_glob, v);
        }
        if let Some(((mut s0, mut f0), (mut s1, mut f1))) = bracket {
            // secant refinement on the dense interpolant
            for _ in 0..100 {
                if (f1 - f0).abs() == 0.0 {
                    break;
                }
                let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
                let f2 = phi_s_of(&traj.sample_dense(s2 - offset))?;
                s0 = s1;
                f0 = f1;
                s1 = s2;
                f1 = f2;
                if f1.abs() < tol {
                    return Ok(-s1);
                }
            }
            return Err(Error::NoCrossing {
                max_duration: cfg.max_duration,
            });
        }
        let (s_end, z_end) = traj.end();
        if matches!(traj.termination, Termination::DomainExit { .. }) || s_end == 0.0 {
            break;
        }
        offset += s_end;
        start = z_end;
    }
    Err(Error::NoCrossing {
        max_duration: cfg.max_duration,
    })
}

/// Trajectory CSV: header plus one row per sample, 17 significant digits.
/// `p_residual` is the drift of p relative to the first sample.
pub fn trajectory_to_csv(params: &BlackHoleParams, traj: &Trajectory) -> String {
    let mut out = String::from("s,t,r,theta,phi,xi_t,xi_r,xi_theta,xi_phi,p_residual\n");
    let p0 = p_symbol(params, &traj.samples[0].1).unwrap_or(f64::NAN);
    for (s, pt) in &traj.samples {
        let p = p_symbol(params, pt).map(|p| p - p0).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s, pt.t, pt.r, pt.theta, pt.phi, pt.xi_t, pt.xi_r, pt.xi_theta, pt.xi_phi, p
        ));
    }
    out
}

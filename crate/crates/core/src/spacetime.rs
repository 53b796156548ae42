//! Black-hole parameters, horizon structure and the dual metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhasePoint;
use crate::roots::{scan_brackets, solve_bracketed};
use crate::scalar::{Dual, Scalar};

/// Default polar exclusion band half-width (radians).
pub const DEFAULT_THETA_MIN: f64 = 1e-3;

/// Absolute separation below which horizon roots count as degenerate.
pub const ROOT_SEPARATION_TOL: f64 = 1e-8;

/// Mass, spin and cosmological constant of the spacetime, with the derived
/// constants everything downstream keeps reusing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackHoleParams {
    /// Mass m > 0 in geometric units.
    pub mass: f64,
    /// Angular momentum a.
    pub spin: f64,
    /// Cosmological constant Lambda >= 0.
    pub cosmo: f64,
    /// Lambda a^2 / 3.
    pub alpha_hat: f64,
    /// 1 + Lambda a^2 / 3.
    pub delta0: f64,
    /// Polar exclusion band: theta is restricted to [theta_min, pi - theta_min].
    pub theta_min: f64,
}

impl BlackHoleParams {
    pub fn new(mass: f64, spin: f64, cosmo: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {mass}")));
        }
        if !(cosmo.is_finite() && cosmo >= 0.0) {
            return Err(Error::Config(format!(
                "cosmological constant must be non-negative, got {cosmo}"
            )));
        }
        let alpha_hat = cosmo * spin * spin / 3.0;
        Ok(Self {
            mass,
            spin,
            cosmo,
            alpha_hat,
            delta0: 1.0 + alpha_hat,
            theta_min: DEFAULT_THETA_MIN,
        })
    }

    pub fn with_theta_min(mut self, theta_min: f64) -> Self {
        self.theta_min = theta_min;
        self
    }

    /// Cheap exterior-region predicate: Delta(r) > 0 on the component above
    /// the event horizon. Valid for subextremal parameters, where the inner
    /// positivity component of Delta lies entirely below r = mass.
    pub fn in_exterior(&self, r: f64) -> bool {
        r > self.mass && delta_r(self, r) > 0.0
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if theta < self.theta_min || theta > std::f64::consts::PI - self.theta_min {
            return Err(Error::PoleExclusion {
                theta,
                min: self.theta_min,
            });
        }
        Ok(())
    }

    /// Exterior r-interval `(r_e, r_c)`; upper end is `None` for Lambda = 0.
    pub fn exterior_interval(&self) -> Result<(f64, Option<f64>)> {
        let rep = classify_subextremal(self)?;
        let r_e = rep
            .r_e
            .ok_or_else(|| Error::Domain("parameters are not subextremal".into()))?;
        Ok((r_e, rep.r_c_horizon))
    }
}

/// Horizon classification of a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubextremalReport {
    pub is_subextremal: bool,
    /// Real roots of Delta, ascending.
    pub roots: Vec<f64>,
    /// Event horizon, present when subextremal.
    pub r_e: Option<f64>,
    /// Cosmological horizon, present when subextremal and Lambda > 0.
    pub r_c_horizon: Option<f64>,
    /// The stricter classical condition |a| < m, reported alongside.
    pub abs_spin_below_mass: bool,
}

/// Delta(r) = (r^2 + a^2)(1 - Lambda r^2 / 3) - 2 m r.
pub fn delta_r<S: Scalar>(params: &BlackHoleParams, r: S) -> S {
    let a2 = S::from_f64(params.spin * params.spin);
    let third_lambda = S::from_f64(params.cosmo / 3.0);
    let two_m = S::from_f64(2.0 * params.mass);
    (r * r + a2) * (S::one() - third_lambda * r * r) - two_m * r
}

/// Delta_theta = 1 + (Lambda a^2 / 3) cos^2 theta, on the pole-excluded band.
pub fn delta_theta<S: Scalar>(params: &BlackHoleParams, theta: S) -> Result<S> {
    params.check_theta(theta.base_f64())?;
    let c = theta.cos();
    Ok(S::one() + S::from_f64(params.alpha_hat) * c * c)
}

/// All real roots of Delta with the subextremality verdict.
///
/// Lambda = 0 reduces to the quadratic r^2 - 2 m r + a^2; Lambda > 0 scans the
/// quartic for sign changes over a coefficient-bounded interval, bisects and
/// Newton-polishes each bracket.
pub fn classify_subextremal(params: &BlackHoleParams) -> Result<SubextremalReport> {
    let abs_spin_below_mass = params.spin.abs() < params.mass;
    let mut roots = if params.cosmo == 0.0 {
        let disc = params.mass * params.mass - params.spin * params.spin;
        if disc <= 0.0 {
            return Ok(SubextremalReport {
                is_subextremal: false,
                roots: if disc == 0.0 {
                    vec![params.mass]
                } else {
                    vec![]
                },
                r_e: None,
                r_c_horizon: None,
                abs_spin_below_mass,
            });
        }
        let s = disc.sqrt();
        vec![params.mass - s, params.mass + s]
    } else {
        // Cauchy bound on quartic root magnitude from the monic coefficients
        let lead = params.cosmo / 3.0;
        let coeff_max = [
            1.0 - params.cosmo * params.spin * params.spin / 3.0,
            2.0 * params.mass,
            params.spin * params.spin,
        ]
        .into_iter()
        .fold(0.0_f64, |acc, c| acc.max(c.abs() / lead));
        let bound = 1.0 + coeff_max;
        let f = |r: f64| delta_r(params, r);
        let mut roots = Vec::new();
        for (lo, hi) in scan_brackets(f, -bound, bound, 4000) {
            let g = |r: Dual<f64>| {
                let p = params;
                let a2 = Dual::constant(p.spin * p.spin);
                let tl = Dual::constant(p.cosmo / 3.0);
                let tm = Dual::constant(2.0 * p.mass);
                (r * r + a2) * (Dual::constant(1.0) - tl * r * r) - tm * r
            };
            let scale = 1e-12 * (1.0 + bound.powi(4) * lead);
            roots.push(solve_bracketed(g, lo - 1e-12, hi + 1e-12, scale, 1e-14)?);
        }
        roots
    };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());

    for w in roots.windows(2) {
        if (w[1] - w[0]).abs() < ROOT_SEPARATION_TOL {
            return Ok(SubextremalReport {
                is_subextremal: false,
                roots,
                r_e: None,
                r_c_horizon: None,
                abs_spin_below_mass,
            });
        }
    }

    let expected = if params.cosmo == 0.0 { 2 } else { 4 };
    let is_subextremal = roots.len() == expected;
    let (r_e, r_c_horizon) = if is_subextremal {
        if params.cosmo == 0.0 {
            (Some(roots[1]), None)
        } else {
            (Some(roots[2]), Some(roots[3]))
        }
    } else {
        (None, None)
    };
    Ok(SubextremalReport {
        is_subextremal,
        roots,
        r_e,
        r_c_horizon,
        abs_spin_below_mass,
    })
}

/// Dual metric G = G_r + G_theta of Eq.-level Boyer-Lindquist form, evaluated
/// at a phase point. Returns `(G, G_r, G_theta)`.
pub fn dual_metric<S: Scalar>(
    params: &BlackHoleParams,
    point: &PhasePoint<S>,
) -> Result<(S, S, S)> {
    let rb = point.r.base_f64();
    if !params.in_exterior(rb) {
        return Err(Error::Domain(format!(
            "r = {rb} outside the exterior region"
        )));
    }
    params.check_theta(point.theta.base_f64())?;

    let a = S::from_f64(params.spin);
    let opa = S::from_f64(params.delta0); // 1 + alpha_hat
    let delta = delta_r(params, point.r);
    let dtheta = delta_theta(params, point.theta)?;
    let (sin_t, cos_t) = (point.theta.sin(), point.theta.cos());
    let rho2 = point.r * point.r + a * a * cos_t * cos_t;

    let psi = (point.r * point.r + a * a) * point.xi_t + a * point.xi_phi;
    let g_r = (delta * point.xi_r * point.xi_r - opa * opa * psi * psi / delta) / rho2;

    let chi = a * sin_t * sin_t * point.xi_t + point.xi_phi;
    let g_theta = (dtheta * point.xi_theta * point.xi_theta
        + opa * opa * chi * chi / (dtheta * sin_t * sin_t))
        / rho2;

    Ok((g_r + g_theta, g_r, g_theta))
}

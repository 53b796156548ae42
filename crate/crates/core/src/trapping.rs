//! Radial potential, trapped set, defining functions and expansion rates.
//!
//! Everything at fixed momentum-plane parameters (xi_t, xi_phi) funnels
//! through [`RadialContext`], which caches the critical radius and the jets
//! of the radial potential there. The context is generic over [`Scalar`], so
//! flows and normal-form paths can differentiate through the whole chain,
//! including the Newton solves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{project_to_characteristic, PhasePoint, ScalarField};
use crate::roots::{scan_brackets, solve_bracketed};
use crate::scalar::{Dual, DualN, Scalar};
use crate::spacetime::{classify_subextremal, delta_r, BlackHoleParams};

/// Tunables of the trapped-set machinery with the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappingConfig {
    /// Taylor-fallback switch distance for f and f-tilde, relative to r_crit.
    pub eps_switch_rel: f64,
    /// Lower bound on xi_t for unit-circle momentum draws.
    pub xi_floor: f64,
    /// Neighborhood bound on |phi^{u/s}| relative to the momentum norm.
    pub nbhd_phi_rel: f64,
    /// Neighborhood bound on |r - r_crit| relative to r_crit.
    pub nbhd_r_rel: f64,
}

impl Default for TrappingConfig {
    fn default() -> Self {
        Self {
            eps_switch_rel: 1e-4,
            xi_floor: 1e-3,
            nbhd_phi_rel: 0.1,
            nbhd_r_rel: 0.2,
        }
    }
}

/// Kerr exterior scans are capped at this multiple of the mass; photon-region
/// critical radii all lie well inside it.
const KERR_SCAN_RADIUS_FACTOR: f64 = 20.0;

/// Exterior r-interval used for scans and bracket inversions.
#[derive(Debug, Clone, Copy)]
pub struct ExteriorDomain {
    pub r_e: f64,
    /// Cosmological horizon, or the Kerr scan cap for Lambda = 0.
    pub r_hi: f64,
    pub has_cosmological_horizon: bool,
}

impl ExteriorDomain {
    pub fn of(params: &BlackHoleParams) -> Result<Self> {
        let rep = classify_subextremal(params)?;
        if !rep.is_subextremal {
            return Err(Error::Domain(
                "parameters are not subextremal; no trapped set".into(),
            ));
        }
        let r_e = rep.r_e.expect("subextremal report carries r_e");
        Ok(match rep.r_c_horizon {
            Some(r_c) => Self {
                r_e,
                r_hi: r_c,
                has_cosmological_horizon: true,
            },
            None => Self {
                r_e,
                r_hi: KERR_SCAN_RADIUS_FACTOR * params.mass,
                has_cosmological_horizon: false,
            },
        })
    }
}

/// Radial potential F = ((r^2 + a^2) xi_t + a xi_phi)^2 / Delta and its
/// critical-point data at fixed (xi_t, xi_phi).
#[derive(Debug, Clone, Copy)]
pub struct RadialContext<S: Scalar> {
    pub params: BlackHoleParams,
    pub domain: ExteriorDomain,
    pub cfg: TrappingConfig,
    pub xi_t: S,
    pub xi_phi: S,
    pub r_crit: S,
    pub f_at_crit: S,
    /// F''(r_crit), F'''(r_crit), F''''(r_crit), for the Taylor fallbacks.
    pub f2_at_crit: S,
    pub f3_at_crit: S,
    pub f4_at_crit: S,
}

fn big_f_raw<S: Scalar>(params: &BlackHoleParams, xi_t: S, xi_phi: S, r: S) -> S {
    let a = S::from_f64(params.spin);
    let psi = (r * r + a * a) * xi_t + a * xi_phi;
    psi * psi / delta_r(params, r)
}

fn delta_r_prime<S: Scalar>(params: &BlackHoleParams, r: S) -> S {
    let a2 = S::from_f64(params.spin * params.spin);
    let third_lambda = S::from_f64(params.cosmo / 3.0);
    let two = S::from_f64(2.0);
    two * r * (S::one() - third_lambda * r * r)
        - (r * r + a2) * (third_lambda * two * r)
        - S::from_f64(2.0 * params.mass)
}

fn big_f_prime_raw<S: Scalar>(params: &BlackHoleParams, xi_t: S, xi_phi: S, r: S) -> S {
    let a = S::from_f64(params.spin);
    let delta = delta_r(params, r);
    let psi = (r * r + a * a) * xi_t + a * xi_phi;
    let four = S::from_f64(4.0);
    psi * (four * r * xi_t * delta - psi * delta_r_prime(params, r)) / (delta * delta)
}

/// (F, F', F'', F''', F'''') at r, by a fourfold dual lift of the evaluator.
fn big_f_jet4<S: Scalar>(params: &BlackHoleParams, xi_t: S, xi_phi: S, r: S) -> (S, S, S, S, S) {
    type J1<S> = Dual<S>;
    type J2<S> = Dual<Dual<S>>;
    type J3<S> = Dual<Dual<Dual<S>>>;
    type J4<S> = Dual<Dual<Dual<Dual<S>>>>;
    let x1: J1<S> = Dual::variable(r, 0);
    let x2: J2<S> = Dual::with_eps(x1, [J1::<S>::one()]);
    let x3: J3<S> = Dual::with_eps(x2, [J2::<S>::one()]);
    let x4: J4<S> = Dual::with_eps(x3, [J3::<S>::one()]);
    let lift = |c: S| J4::<S>::constant(J3::<S>::constant(J2::<S>::constant(J1::<S>::constant(c))));
    let v = big_f_raw(params, lift(xi_t), lift(xi_phi), x4);
    (
        v.re.re.re.re,
        v.re.re.re.eps[0],
        v.re.re.eps[0].eps[0],
        v.re.eps[0].eps[0].eps[0],
        v.eps[0].eps[0].eps[0].eps[0],
    )
}

impl<S: Scalar> RadialContext<S> {
    pub fn new(params: &BlackHoleParams, xi_t: S, xi_phi: S) -> Result<Self> {
        Self::with_config(params, xi_t, xi_phi, TrappingConfig::default())
    }

    pub fn with_config(
        params: &BlackHoleParams,
        xi_t: S,
        xi_phi: S,
        cfg: TrappingConfig,
    ) -> Result<Self> {
        let domain = ExteriorDomain::of(params)?;
        let margin = 1e-7 * params.mass;
        let (lo, hi) = (domain.r_e + margin, domain.r_hi - margin);
        let (xt_b, xp_b) = (xi_t.base_f64(), xi_phi.base_f64());
        let xi_sq = (xt_b * xt_b + xp_b * xp_b).max(1e-30);
        let fp = |r: f64| big_f_prime_raw(params, xt_b, xp_b, r);
        let mut candidates = Vec::new();
        for (blo, bhi) in scan_brackets(fp, lo, hi, 400) {
            if bhi <= blo {
                continue;
            }
            let g = |rd: Dual<S>| {
                big_f_prime_raw(params, Dual::constant(xi_t), Dual::constant(xi_phi), rd)
            };
            // a cell-level zero of F' can be a flat degeneracy; skip it
            let Ok(root) = solve_bracketed(g, blo, bhi, 1e-12 * xi_sq, 1e-13) else {
                continue;
            };
            if candidates
                .iter()
                .all(|c: &S| (c.base_f64() - root.base_f64()).abs() > 1e-8)
            {
                candidates.push(root);
            }
        }
        if candidates.is_empty() {
            return Err(Error::NoInteriorCritical {
                xi_t: xt_b,
                xi_phi: xp_b,
            });
        }
        // Prop-level guarantee is a unique critical point; if the scan ever
        // produces spurious extras, the global minimum of F is the trapped one.
        let r_crit = candidates
            .into_iter()
            .min_by(|p, q| {
                let fp_ = big_f_raw(params, xi_t, xi_phi, *p).base_f64();
                let fq = big_f_raw(params, xi_t, xi_phi, *q).base_f64();
                fp_.partial_cmp(&fq).unwrap()
            })
            .unwrap();
        let (f_at_crit, _, f2_at_crit, f3_at_crit, f4_at_crit) =
            big_f_jet4(params, xi_t, xi_phi, r_crit);
        if f2_at_crit.base_f64() <= 0.0 {
            return Err(Error::NoInteriorCritical {
                xi_t: xt_b,
                xi_phi: xp_b,
            });
        }
        Ok(Self {
            params: *params,
            domain,
            cfg,
            xi_t,
            xi_phi,
            r_crit,
            f_at_crit,
            f2_at_crit,
            f3_at_crit,
            f4_at_crit,
        })
    }

    /// Constant-lift of the context into a dual scalar layer.
    pub fn lift<const N: usize>(&self) -> RadialContext<DualN<S, N>> {
        RadialContext {
            params: self.params,
            domain: self.domain,
            cfg: self.cfg,
            xi_t: DualN::constant(self.xi_t),
            xi_phi: DualN::constant(self.xi_phi),
            r_crit: DualN::constant(self.r_crit),
            f_at_crit: DualN::constant(self.f_at_crit),
            f2_at_crit: DualN::constant(self.f2_at_crit),
            f3_at_crit: DualN::constant(self.f3_at_crit),
            f4_at_crit: DualN::constant(self.f4_at_crit),
        }
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if !self.params.in_exterior(r) || r >= self.domain.r_hi {
            return Err(Error::Domain(format!(
                "r = {r} outside the exterior interval ({}, {})",
                self.domain.r_e, self.domain.r_hi
            )));
        }
        Ok(())
    }

    pub fn big_f(&self, r: S) -> Result<S> {
        self.check_r(r.base_f64())?;
        Ok(big_f_raw(&self.params, self.xi_t, self.xi_phi, r))
    }

    fn eps_switch(&self) -> f64 {
        self.cfg.eps_switch_rel * self.r_crit.base_f64()
    }

    /// f = F' / (r - r_crit), with a cubic Taylor fallback inside the switch
    /// distance so both branches agree to better than 1e-8 relative.
    pub fn f_lower(&self, r: S) -> Result<S> {
        self.check_r(r.base_f64())?;
        let dr = r - self.r_crit;
        if dr.base_f64().abs() > self.eps_switch() {
            Ok(big_f_prime_raw(&self.params, self.xi_t, self.xi_phi, r) / dr)
        } else {
            Ok(self.f2_at_crit
                + self.f3_at_crit * dr / S::from_f64(2.0)
                + self.f4_at_crit * dr * dr / S::from_f64(6.0))
        }
    }

    /// f-tilde = (F - F(r_crit)) / (r - r_crit)^2, Taylor fallback
    /// F''/2 + F''' (r - r_crit)/6 + F'''' (r - r_crit)^2/24.
    pub fn f_tilde(&self, r: S) -> Result<S> {
        self.check_r(r.base_f64())?;
        let dr = r - self.r_crit;
        if dr.base_f64().abs() > self.eps_switch() {
            Ok((big_f_raw(&self.params, self.xi_t, self.xi_phi, r) - self.f_at_crit) / (dr * dr))
        } else {
            Ok(self.f2_at_crit / S::from_f64(2.0)
                + self.f3_at_crit * dr / S::from_f64(6.0)
                + self.f4_at_crit * dr * dr / S::from_f64(24.0))
        }
    }

    /// S(r) = (r - r_crit) sqrt(f-tilde / Delta), the stable factored form.
    pub fn s_fn(&self, r: S) -> Result<S> {
        let ft = self.f_tilde(r)?;
        let delta = delta_r(&self.params, r);
        Ok((r - self.r_crit) * (ft / delta).sqrt())
    }

    /// Invert the monotone S near r_crit: Newton from the linearized guess,
    /// falling back to a bracketed solve when the fast path escapes.
    pub fn s_inv(&self, target: S) -> Result<S> {
        let margin = 1e-3 * self.r_crit.base_f64();
        let (lo, hi) = (self.domain.r_e + margin, self.domain.r_hi - margin);
        let lifted = self.lift::<1>();
        // S'(r_crit) = sqrt(f-tilde(r_crit) / Delta(r_crit))
        let slope =
            (self.f2_at_crit / S::from_f64(2.0) / delta_r(&self.params, self.r_crit)).sqrt();
        let mut r = self.r_crit + target / slope;
        if r.base_f64() > lo && r.base_f64() < hi {
            let mut settled = 0;
            for _ in 0..30 {
                let y = lifted.s_fn(Dual::variable(r, 0))? - Dual::constant(target);
                if y.eps[0].base_f64() == 0.0 {
                    break;
                }
                let step = y.re / y.eps[0];
                r -= step;
                if r.base_f64() <= lo || r.base_f64() >= hi {
                    break;
                }
                if step.base_f64().abs() <= 1e-13 * (1.0 + r.base_f64().abs()) {
                    settled += 1;
                    if settled >= 3 {
                        return Ok(r);
                    }
                }
            }
        }
        // slow path: range check, then bracketed Newton
        let t_b = target.base_f64();
        let s_lo = self.s_fn(S::from_f64(lo))?.base_f64();
        let s_hi = self.s_fn(S::from_f64(hi))?.base_f64();
        if t_b <= s_lo || t_b >= s_hi {
            return Err(Error::OutOfRange {
                target: t_b,
                lo: s_lo,
                hi: s_hi,
            });
        }
        let f = |rd: Dual<S>| {
            lifted
                .s_fn(rd)
                .unwrap_or(Dual::constant(S::from_f64(f64::NAN)))
                - Dual::constant(target)
        };
        let xi_scale = (self.xi_t * self.xi_t + self.xi_phi * self.xi_phi).base_f64();
        solve_bracketed(f, lo, hi, 1e-13 * xi_scale.sqrt().max(1e-12), 1e-12)
    }

    pub fn phi_u(&self, r: S, xi_r: S) -> Result<S> {
        Ok(xi_r - S::from_f64(self.params.delta0) * self.s_fn(r)?)
    }

    pub fn phi_s(&self, r: S, xi_r: S) -> Result<S> {
        Ok(xi_r + S::from_f64(self.params.delta0) * self.s_fn(r)?)
    }

    pub fn phi_hat_u(&self, r: S, xi_r: S) -> Result<S> {
        Ok(self.phi_u(r, xi_r)? / self.xi_t)
    }

    /// Travel time to the stable manifold along the H_{phi-hat^u} flow,
    /// evaluated from the closed inversion formula.
    pub fn travel_time(&self, r: S, xi_r: S) -> Result<S> {
        let opa = S::from_f64(self.params.delta0);
        let target = -self.phi_u(r, xi_r)? / (S::from_f64(2.0) * opa);
        let r0 = self.s_inv(target)?;
        Ok(self.xi_t * (r - r0))
    }

    /// Unnormalized expansion rates (w-tilde^u, w-tilde^s): the factors in
    /// H_p phi^u = -w-tilde^u phi^u and H_p phi^s = +w-tilde^s phi^s, with
    /// F'/S evaluated through the stable form f sqrt(Delta / f-tilde).
    pub fn rates_unnormalized(&self, r: S, xi_r: S) -> Result<(S, S)> {
        let dp = delta_r_prime(&self.params, r);
        let f = self.f_lower(r)?;
        let ft = self.f_tilde(r)?;
        let delta = delta_r(&self.params, r);
        let opa = S::from_f64(self.params.delta0);
        let core = opa * f * (delta / ft).sqrt();
        Ok((dp * xi_r + core, -(dp * xi_r) + core))
    }
}

/// Degree-0 normalization factor (xi_t^2 + xi_phi^2)^{1/2} used by the rates.
pub fn rate_normalization(point: &PhasePoint<f64>) -> f64 {
    (point.xi_t * point.xi_t + point.xi_phi * point.xi_phi).sqrt()
}

/// F_{xi_t, xi_phi}(r).
pub fn big_f(params: &BlackHoleParams, xi_t: f64, xi_phi: f64, r: f64) -> Result<f64> {
    if !params.in_exterior(r) {
        return Err(Error::Domain(format!("r = {r} at or inside the horizons")));
    }
    Ok(big_f_raw(params, xi_t, xi_phi, r))
}

/// Critical radius of the radial potential inside the exterior interval.
pub fn critical_radius(params: &BlackHoleParams, xi_t: f64, xi_phi: f64) -> Result<f64> {
    Ok(RadialContext::new(params, xi_t, xi_phi)?.r_crit)
}

/// Quadratically regularized potential difference; see [`RadialContext::f_tilde`].
pub fn f_tilde(params: &BlackHoleParams, xi_t: f64, xi_phi: f64, r: f64) -> Result<f64> {
    RadialContext::new(params, xi_t, xi_phi)?.f_tilde(r)
}

/// The signed square-root factor S of the defining functions.
pub fn s_function(params: &BlackHoleParams, xi_t: f64, xi_phi: f64, r: f64) -> Result<f64> {
    RadialContext::new(params, xi_t, xi_phi)?.s_fn(r)
}

/// Defining function of the unstable manifold.
pub fn phi_u(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    RadialContext::new(params, point.xi_t, point.xi_phi)?.phi_u(point.r, point.xi_r)
}

/// Defining function of the stable manifold.
pub fn phi_s(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    RadialContext::new(params, point.xi_t, point.xi_phi)?.phi_s(point.r, point.xi_r)
}

/// Normalized variants: phi-hat^u = phi^u / xi_t, phi-hat^s = phi^s.
pub fn phi_hat_u(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    RadialContext::new(params, point.xi_t, point.xi_phi)?.phi_hat_u(point.r, point.xi_r)
}

pub fn phi_hat_s(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<f64> {
    phi_s(params, point)
}

/// Scalar fields for the defining functions.
macro_rules! defining_field {
    ($name:ident, $method:ident) => {
        #[derive(Debug, Clone, Copy)]
        pub struct $name {
            pub params: BlackHoleParams,
        }

        impl ScalarField for $name {
            fn eval<S: Scalar>(&self, point: &PhasePoint<S>) -> Result<S> {
                let ctx = RadialContext::new(&self.params, point.xi_t, point.xi_phi)?;
                ctx.$method(point.r, point.xi_r)
            }
        }
    };
}

defining_field!(PhiU, phi_u);
defining_field!(PhiS, phi_s);
defining_field!(PhiHatU, phi_hat_u);

/// phi-hat^s coincides with phi^s.
pub type PhiHatS = PhiS;

/// Check the configured trapping neighborhood.
pub fn in_trapping_neighborhood(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &TrappingConfig,
) -> Result<()> {
    let ctx = RadialContext::with_config(params, point.xi_t, point.xi_phi, *cfg)?;
    let norm = point.momentum_norm();
    let pu = ctx.phi_u(point.r, point.xi_r)?;
    let ps = ctx.phi_s(point.r, point.xi_r)?;
    if pu.abs() > cfg.nbhd_phi_rel * norm || ps.abs() > cfg.nbhd_phi_rel * norm {
        return Err(Error::NotNearTrapping(format!(
            "|phi^u| = {:.3e}, |phi^s| = {:.3e} exceed {:.3e}",
            pu.abs(),
            ps.abs(),
            cfg.nbhd_phi_rel * norm
        )));
    }
    if (point.r - ctx.r_crit).abs() > cfg.nbhd_r_rel * ctx.r_crit {
        return Err(Error::NotNearTrapping(format!(
            "|r - r_crit| = {:.3e} exceeds {:.3e}",
            (point.r - ctx.r_crit).abs(),
            cfg.nbhd_r_rel * ctx.r_crit
        )));
    }
    Ok(())
}

/// Normalized expansion rates (w^u, w^s) near the trapped set.
pub fn expansion_rate(params: &BlackHoleParams, point: &PhasePoint<f64>) -> Result<(f64, f64)> {
    expansion_rate_with(params, point, &TrappingConfig::default())
}

pub fn expansion_rate_with(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
    cfg: &TrappingConfig,
) -> Result<(f64, f64)> {
    in_trapping_neighborhood(params, point, cfg)?;
    let ctx = RadialContext::with_config(params, point.xi_t, point.xi_phi, *cfg)?;
    let (wu, ws) = ctx.rates_unnormalized(point.r, point.xi_r)?;
    let norm = rate_normalization(point);
    Ok((wu / norm, ws / norm))
}

/// A completed trapped-set sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappedDatum {
    pub xi_t: f64,
    pub xi_phi: f64,
    pub r_crit: f64,
    pub f_at_crit: f64,
    pub point: PhasePointRecord,
}

/// Serializable mirror of a phase point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePointRecord {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub xi_t: f64,
    pub xi_r: f64,
    pub xi_theta: f64,
    pub xi_phi: f64,
}

impl From<PhasePoint<f64>> for PhasePointRecord {
    fn from(p: PhasePoint<f64>) -> Self {
        Self {
            t: p.t,
            r: p.r,
            theta: p.theta,
            phi: p.phi,
            xi_t: p.xi_t,
            xi_r: p.xi_r,
            xi_theta: p.xi_theta,
            xi_phi: p.xi_phi,
        }
    }
}

impl From<PhasePointRecord> for PhasePoint<f64> {
    fn from(p: PhasePointRecord) -> Self {
        PhasePoint::new(
            p.t, p.r, p.theta, p.phi, p.xi_t, p.xi_r, p.xi_theta, p.xi_phi,
        )
    }
}

impl TrappedDatum {
    pub fn phase_point(&self) -> PhasePoint<f64> {
        self.point.into()
    }
}

/// Result of trapped-set sampling, with the rejection bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrappedSample {
    pub data: Vec<TrappedDatum>,
    pub skipped: usize,
    pub drawn: usize,
}

/// Build the trapped-set point at the given momentum-plane direction and
/// polar angle: r = r_crit, xi_r = 0, xi_theta from characteristic completion.
pub fn complete_gamma_point(
    params: &BlackHoleParams,
    xi_t: f64,
    xi_phi: f64,
    theta: f64,
    xi_theta_sign: f64,
) -> Result<TrappedDatum> {
    let ctx = RadialContext::new(params, xi_t, xi_phi)?;
    let raw = PhasePoint::new(
        0.0,
        ctx.r_crit,
        theta,
        0.0,
        xi_t,
        0.0,
        xi_theta_sign,
        xi_phi,
    );
    let point = project_to_characteristic(params, &raw)?;
    Ok(TrappedDatum {
        xi_t,
        xi_phi,
        r_crit: ctx.r_crit,
        f_at_crit: ctx.f_at_crit,
        point: point.into(),
    })
}

/// Draw `n` trapped-set points: momentum direction on the unit circle with
/// xi_t above the floor, theta in the pole band, then characteristic
/// completion. Draw index seeds its own RNG stream, so the accepted set is
/// independent of batching and thread count.
pub fn sample_trapped_set(params: &BlackHoleParams, n: usize, seed: u64) -> Result<TrappedSample> {
    sample_trapped_set_with(params, n, seed, &TrappingConfig::default())
}

pub fn sample_trapped_set_with(
    params: &BlackHoleParams,
    n: usize,
    seed: u64,
    cfg: &TrappingConfig,
) -> Result<TrappedSample> {
    ExteriorDomain::of(params)?;
    let beta_max = cfg.xi_floor.acos();
    let theta_min = params.theta_min;
    let batch = (4 * n).max(64);
    let mut data = Vec::with_capacity(n);
    let mut drawn = 0usize;
    let mut skipped = 0usize;
    while data.len() < n {
        let start = drawn;
        let results: Vec<Option<TrappedDatum>> = (start..start + batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ (i as u64).wrapping_mul(0x9E37_79B9) ^ 0xD1B5_4A32_D192_ED03,
                );
                let beta = rng.gen_range(-beta_max..beta_max);
                let theta = rng.gen_range(theta_min..std::f64::consts::PI - theta_min);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                complete_gamma_point(params, beta.cos(), beta.sin(), theta, sign).ok()
            })
            .collect();
        drawn += batch;
        for r in results {
            match r {
                Some(d) if data.len() < n => data.push(d),
                Some(_) => {}
                None => skipped += 1,
            }
        }
        if drawn >= (100 * n).max(1000) && (data.len() as f64) < 0.01 * drawn as f64 {
            return Err(Error::ExhaustedDraws {
                accepted: data.len(),
                drawn,
            });
        }
    }
    Ok(TrappedSample {
        data,
        skipped,
        drawn,
    })
}

/// Draw points in a neighborhood of the trapped set: trapped samples with
/// xi_r and r perturbed by up to `amplitude`, optionally re-projected onto
/// the characteristic set.
pub fn sample_near_gamma(
    params: &BlackHoleParams,
    n: usize,
    seed: u64,
    amplitude: f64,
    on_sigma: bool,
) -> Result<Vec<PhasePoint<f64>>> {
    let base = sample_trapped_set(params, 2 * n + 8, seed)?;
    let mut out = Vec::with_capacity(n);
    for (i, d) in base.data.iter().enumerate() {
        if out.len() == n {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA076_1D64_78BD_642F ^ (i as u64));
        let mut pt = d.phase_point();
        pt.xi_r += rng.gen_range(-amplitude..amplitude);
        pt.r += rng.gen_range(-amplitude..amplitude);
        if on_sigma {
            match project_to_characteristic(params, &pt) {
                Ok(p) => out.push(p),
                Err(_) => continue,
            }
        } else {
            out.push(pt);
        }
    }
    if out.len() < n {
        return Err(Error::ExhaustedDraws {
            accepted: out.len(),
            drawn: base.data.len(),
        });
    }
    Ok(out)
}

/// Grid resolution for the rate-bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_angle: usize,
    pub n_theta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_angle: 64,
            n_theta: 32,
        }
    }
}

/// Global expansion-rate bounds over the trapped set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateBounds {
    pub nu_min: f64,
    pub nu_max: f64,
    pub argmin: TrappedDatum,
    pub argmax: TrappedDatum,
    pub grid_spec: String,
}

/// Rate w^u = w^s on the trapped set as a function of the momentum angle.
fn gamma_rate<S: Scalar>(params: &BlackHoleParams, beta: S) -> Result<S> {
    let ctx = RadialContext::new(params, beta.cos(), beta.sin())?;
    let (wu, _) = ctx.rates_unnormalized(ctx.r_crit, S::zero())?;
    Ok(wu) // (xi_t, xi_phi) on the unit circle: normalization is 1
}

fn polish_extremum(params: &BlackHoleParams, beta0: f64, width: f64, maximize: bool) -> f64 {
    // Newton on d(rate)/d(beta), derivatives by nested duals
    let mut beta = beta0;
    for _ in 0..30 {
        let b1: Dual<Dual<f64>> = Dual::variable(Dual::variable(beta, 0), 0);
        let Ok(w) = gamma_rate(params, b1) else {
            return beta0;
        };
        let d1 = w.eps[0].re;
        let d2 = w.eps[0].eps[0];
        if d2 == 0.0 {
            break;
        }
        let step = d1 / d2;
        // keep the polish local and on the right kind of extremum
        if !step.is_finite()
            || (beta - step - beta0).abs() > width
            || (maximize && d2 > 0.0)
            || (!maximize && d2 < 0.0)
        {
            break;
        }
        beta -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    beta
}

/// Extremize the expansion rate over a deterministic grid on the trapped set
/// and Newton-polish the winning cells.
pub fn nu_bounds(params: &BlackHoleParams, grid: GridSpec) -> Result<RateBounds> {
    nu_bounds_with(params, grid, &TrappingConfig::default())
}

pub fn nu_bounds_with(
    params: &BlackHoleParams,
    grid: GridSpec,
    cfg: &TrappingConfig,
) -> Result<RateBounds> {
    ExteriorDomain::of(params)?;
    let beta_max = cfg.xi_floor.acos();
    let theta_min = params.theta_min;
    let pi = std::f64::consts::PI;

    // admissible grid cells: (angle, theta, xi_theta sign) with a valid
    // characteristic completion
    let cells: Vec<(f64, TrappedDatum, f64)> = (0..grid.n_angle)
        .into_par_iter()
        .filter_map(|i| {
            let beta = -beta_max + (2.0 * beta_max) * (i as f64 + 0.5) / grid.n_angle as f64;
            let w = gamma_rate(params, beta).ok()?;
            let mut datum = None;
            'theta: for j in 0..grid.n_theta {
                let theta =
                    theta_min + (pi - 2.0 * theta_min) * (j as f64 + 0.5) / grid.n_theta as f64;
                for sign in [1.0, -1.0] {
                    if let Ok(d) = complete_gamma_point(params, beta.cos(), beta.sin(), theta, sign)
                    {
                        datum = Some(d);
                        break 'theta;
                    }
                }
            }
            datum.map(|d| (beta, d, w))
        })
        .collect();

    if cells.is_empty() {
        return Err(Error::ExhaustedDraws {
            accepted: 0,
            drawn: grid.n_angle * grid.n_theta * 2,
        });
    }

    let width = 2.0 * (2.0 * beta_max) / grid.n_angle as f64;
    let best = |maximize: bool| -> Result<(f64, TrappedDatum)> {
        let (beta0, datum, w0) = cells
            .iter()
            .max_by(|p, q| {
                let (a, b) = if maximize { (p.2, q.2) } else { (q.2, p.2) };
                a.partial_cmp(&b).unwrap()
            })
            .unwrap();
        let polished = polish_extremum(params, *beta0, width, maximize);
        let w_polished = gamma_rate(params, polished)?;
        // the polish may only improve on its own grid cell
        let improved = (maximize && w_polished > *w0) || (!maximize && w_polished < *w0);
        let (w, beta) = if improved {
            (w_polished, polished)
        } else {
            (*w0, *beta0)
        };
        let refreshed = complete_gamma_point(
            params,
            beta.cos(),
            beta.sin(),
            datum.point.theta,
            datum.point.xi_theta.signum(),
        )
        .unwrap_or_else(|_| datum.clone());
        Ok((w, refreshed))
    };

    let (nu_max, argmax) = best(true)?;
    let (nu_min, argmin) = best(false)?;
    Ok(RateBounds {
        nu_min,
        nu_max,
        argmin,
        argmax,
        grid_spec: format!(
            "{} momentum angles x {} theta x 2 signs, xi_t floor {}",
            grid.n_angle, grid.n_theta, cfg.xi_floor
        ),
    })
}

//! Principal symbol, Hamilton vector field and Poisson brackets.
//!
//! Bracket convention, fixed crate-wide:
//! `H_f g = {f, g} = sum_j (d_{xi_j} f d_{x_j} g - d_{x_j} f d_{xi_j} g)`,
//! so `{xi_r, r} = 1` in canonical coordinates and `H_phi = -d_{xi_phi}`.

use crate::error::{Error, Result};
use crate::scalar::{DualN, Scalar};
use crate::spacetime::{delta_r, delta_theta, BlackHoleParams};

/// Point of the cotangent bundle in Boyer-Lindquist coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint<S> {
    pub t: S,
    pub r: S,
    pub theta: S,
    pub phi: S,
    pub xi_t: S,
    pub xi_r: S,
    pub xi_theta: S,
    pub xi_phi: S,
}

impl<S: Scalar> PhasePoint<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(t: S, r: S, theta: S, phi: S, xi_t: S, xi_r: S, xi_theta: S, xi_phi: S) -> Self {
        Self {
            t,
            r,
            theta,
            phi,
            xi_t,
            xi_r,
            xi_theta,
            xi_phi,
        }
    }

    /// Constructor that enforces the domain invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn checked(
        params: &BlackHoleParams,
        t: S,
        r: S,
        theta: S,
        phi: S,
        xi_t: S,
        xi_r: S,
        xi_theta: S,
        xi_phi: S,
    ) -> Result<Self> {
        if !params.in_exterior(r.base_f64()) {
            return Err(Error::Domain(format!(
                "r = {} outside the exterior region",
                r.base_f64()
            )));
        }
        params.check_theta(theta.base_f64())?;
        Ok(Self::new(t, r, theta, phi, xi_t, xi_r, xi_theta, xi_phi))
    }

    /// Coordinate order: (t, r, theta, phi, xi_t, xi_r, xi_theta, xi_phi).
    pub fn to_array(&self) -> [S; 8] {
        [
            self.t,
            self.r,
            self.theta,
            self.phi,
            self.xi_t,
            self.xi_r,
            self.xi_theta,
            self.xi_phi,
        ]
    }

    pub fn from_array(z: [S; 8]) -> Self {
        Self::new(z[0], z[1], z[2], z[3], z[4], z[5], z[6], z[7])
    }

    /// Euclidean norm of the fiber variables.
    pub fn momentum_norm(&self) -> S {
        (self.xi_t * self.xi_t
            + self.xi_r * self.xi_r
            + self.xi_theta * self.xi_theta
            + self.xi_phi * self.xi_phi)
            .sqrt()
    }

    /// Fiber dilation xi -> lambda xi.
    pub fn scale_momentum(&self, lambda: f64) -> Self {
        let l = S::from_f64(lambda);
        Self {
            xi_t: self.xi_t * l,
            xi_r: self.xi_r * l,
            xi_theta: self.xi_theta * l,
            xi_phi: self.xi_phi * l,
            ..*self
        }
    }

    /// Lift to dual numbers with every coordinate seeded in its own lane.
    pub fn seed_all(&self) -> PhasePoint<DualN<S, 8>> {
        let z = self.to_array();
        let mut out = [DualN::<S, 8>::constant(S::zero()); 8];
        for (lane, (o, zi)) in out.iter_mut().zip(z.iter()).enumerate() {
            *o = DualN::variable(*zi, lane);
        }
        PhasePoint::from_array(out)
    }

    /// Lift to dual constants (no derivative seeding).
    pub fn lift<const N: usize>(&self) -> PhasePoint<DualN<S, N>> {
        PhasePoint::from_array(self.to_array().map(DualN::constant))
    }
}

/// Value of a Hamilton vector field: position rates `dx` and momentum rates
/// `dxi`, ordered (t, r, theta, phi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTangent<S> {
    pub dx: [S; 4],
    pub dxi: [S; 4],
}

/// Phase-space scalar usable with dual as well as plain scalars, which is
/// what makes exact differentiation of composite fields possible.
pub trait ScalarField {
    fn eval<S: Scalar>(&self, point: &PhasePoint<S>) -> Result<S>;
}

/// Coordinate functions as scalar fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    T,
    R,
    Theta,
    Phi,
    XiT,
    XiR,
    XiTheta,
    XiPhi,
}

impl ScalarField for Coord {
    fn eval<S: Scalar>(&self, point: &PhasePoint<S>) -> Result<S> {
        Ok(match self {
            Coord::T => point.t,
            Coord::R => point.r,
            Coord::Theta => point.theta,
            Coord::Phi => point.phi,
            Coord::XiT => point.xi_t,
            Coord::XiR => point.xi_r,
            Coord::XiTheta => point.xi_theta,
            Coord::XiPhi => point.xi_phi,
        })
    }
}

/// The principal symbol p = (r^2 + a^2 cos^2 theta) G in expanded form.
pub fn p_symbol<S: Scalar>(params: &BlackHoleParams, point: &PhasePoint<S>) -> Result<S> {
    if !params.in_exterior(point.r.base_f64()) {
        return Err(Error::Domain(format!(
            "r = {} outside the exterior region",
            point.r.base_f64()
        )));
    }
    let dtheta = delta_theta(params, point.theta)?;
    let a = S::from_f64(params.spin);
    let opa = S::from_f64(params.delta0);
    let delta = delta_r(params, point.r);
    let sin_t = point.theta.sin();

    let psi = (point.r * point.r + a * a) * point.xi_t + a * point.xi_phi;
    let chi = a * point.xi_t * sin_t * sin_t + point.xi_phi;

    Ok(delta * point.xi_r * point.xi_r
        + dtheta * point.xi_theta * point.xi_theta
        + opa * opa * chi * chi / (dtheta * sin_t * sin_t)
        - opa * opa * psi * psi / delta)
}

/// `p` as a [`ScalarField`].
#[derive(Debug, Clone, Copy)]
pub struct PSymbol {
    pub params: BlackHoleParams,
}

impl ScalarField for PSymbol {
    fn eval<S: Scalar>(&self, point: &PhasePoint<S>) -> Result<S> {
        p_symbol(&self.params, point)
    }
}

/// Value and 8-gradient of a field in one dual evaluation, ordered as
/// [`PhasePoint::to_array`].
pub fn field_gradient<S: Scalar>(
    f: &impl ScalarField,
    point: &PhasePoint<S>,
) -> Result<(S, [S; 8])> {
    let out = f.eval(&point.seed_all())?;
    Ok((out.re, out.eps))
}

/// Central finite-difference 8-gradient, the cross-check oracle for the dual
/// route.
pub fn field_gradient_fd(
    f: &impl ScalarField,
    point: &PhasePoint<f64>,
    step: f64,
) -> Result<[f64; 8]> {
    let z = point.to_array();
    let mut g = [0.0; 8];
    for i in 0..8 {
        let mut zp = z;
        let mut zm = z;
        zp[i] += step;
        zm[i] -= step;
        let fp = f.eval(&PhasePoint::from_array(zp))?;
        let fm = f.eval(&PhasePoint::from_array(zm))?;
        g[i] = (fp - fm) / (2.0 * step);
    }
    Ok(g)
}

/// Hamilton vector field of an arbitrary scalar field under the crate bracket
/// convention: `dx = d_xi f`, `dxi = -d_x f`.
pub fn hamilton_of<S: Scalar>(
    f: &impl ScalarField,
    point: &PhasePoint<S>,
) -> Result<PhaseTangent<S>> {
    let (_, g) = field_gradient(f, point)?;
    Ok(PhaseTangent {
        dx: [g[4], g[5], g[6], g[7]],
        dxi: [-g[0], -g[1], -g[2], -g[3]],
    })
}

/// H_p, by dual-number differentiation of [`p_symbol`].
pub fn hamilton_field<S: Scalar>(
    params: &BlackHoleParams,
    point: &PhasePoint<S>,
) -> Result<PhaseTangent<S>> {
    hamilton_of(&PSymbol { params: *params }, point)
}

/// Poisson bracket {f, g} at a point.
pub fn poisson_bracket(
    f: &impl ScalarField,
    g: &impl ScalarField,
    point: &PhasePoint<f64>,
) -> Result<f64> {
    let (_, gf) = field_gradient(f, point)?;
    let (_, gg) = field_gradient(g, point)?;
    Ok(bracket_of_gradients(&gf, &gg))
}

/// Contract two 8-gradients with the symplectic pairing.
pub fn bracket_of_gradients(gf: &[f64; 8], gg: &[f64; 8]) -> f64 {
    let mut sum = 0.0;
    for j in 0..4 {
        sum += gf[4 + j] * gg[j] - gf[j] * gg[4 + j];
    }
    sum
}

/// Relative homogeneity residual |f(x, s xi) - s^deg f(x, xi)| / max(1, |f|).
pub fn check_homogeneity(
    f: &impl ScalarField,
    point: &PhasePoint<f64>,
    degree: f64,
    scale: f64,
) -> Result<f64> {
    let v = f.eval(point)?;
    let vs = f.eval(&point.scale_momentum(scale))?;
    Ok((vs - scale.powf(degree) * v).abs() / v.abs().max(1.0))
}

/// Replace xi_theta by the characteristic root of matching sign, putting the
/// point on Sigma = {p = 0}.
pub fn project_to_characteristic(
    params: &BlackHoleParams,
    point: &PhasePoint<f64>,
) -> Result<PhasePoint<f64>> {
    if !params.in_exterior(point.r) {
        return Err(Error::Domain(format!(
            "r = {} outside the exterior region",
            point.r
        )));
    }
    let dtheta = delta_theta(params, point.theta)?;
    let a = params.spin;
    let opa = params.delta0;
    let delta = delta_r(params, point.r);
    let sin_t = point.theta.sin();
    let psi = (point.r * point.r + a * a) * point.xi_t + a * point.xi_phi;
    let chi = a * point.xi_t * sin_t * sin_t + point.xi_phi;

    let budget = opa * opa * psi * psi / delta
        - opa * opa * chi * chi / (dtheta * sin_t * sin_t)
        - delta * point.xi_r * point.xi_r;
    if budget < 0.0 {
        return Err(Error::NoRealRoot { budget });
    }
    let root = (budget / dtheta).sqrt();
    let xi_theta = if point.xi_theta < 0.0 { -root } else { root };
    Ok(PhasePoint { xi_theta, ..*point })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn schwarzschild() -> BlackHoleParams {
        BlackHoleParams::new(1.0, 0.0, 0.0).unwrap()
    }

    fn kerr_ds() -> BlackHoleParams {
        BlackHoleParams::new(1.0, 0.7, 0.02).unwrap()
    }

    fn sample_point() -> PhasePoint<f64> {
        PhasePoint::new(0.1, 4.0, 1.1, 0.4, 1.0, 0.3, -0.8, 0.5)
    }

    #[test]
    fn p_symbol_values() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let pt = PhasePoint::new(0.0, 3.0, half_pi, 0.0, 1.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(p_symbol(&schwarzschild(), &pt).unwrap(), -27.0);

        let pt0 = PhasePoint::new(0.0, 3.0, half_pi, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(p_symbol(&schwarzschild(), &pt0).unwrap(), 0.0);

        let ptc = PhasePoint::new(0.0, 3.0, half_pi, 0.0, 1.0, 0.0, 27.0_f64.sqrt(), 0.0);
        assert_abs_diff_eq!(
            p_symbol(&schwarzschild(), &ptc).unwrap(),
            0.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn p_symbol_agrees_with_conformal_dual_metric() {
        // p = (r^2 + a^2 cos^2 theta) G for both expanded and factored routes
        let params = kerr_ds();
        let pt = sample_point();
        let p = p_symbol(&params, &pt).unwrap();
        let (g, _, _) = crate::spacetime::dual_metric(&params, &pt).unwrap();
        let rho2 = pt.r * pt.r + params.spin.powi(2) * pt.theta.cos().powi(2);
        assert_relative_eq!(p, rho2 * g, max_relative = 1e-12);
    }

    #[test]
    fn hamilton_field_structure() {
        let params = kerr_ds();
        let pt = sample_point();
        let h = hamilton_field(&params, &pt).unwrap();
        // rdot = 2 Delta xi_r
        assert_relative_eq!(
            h.dx[1],
            2.0 * delta_r(&params, pt.r) * pt.xi_r,
            max_relative = 1e-12
        );
        // stationarity and axisymmetry
        assert_abs_diff_eq!(h.dxi[0], 0.0);
        assert_abs_diff_eq!(h.dxi[3], 0.0);
    }

    #[test]
    fn hamilton_annihilates_p() {
        let params = kerr_ds();
        for pt in [
            sample_point(),
            PhasePoint::new(0.0, 3.0, 0.9, 1.0, 2.0, -0.4, 1.3, -0.7),
        ] {
            let h = hamilton_field(&params, &pt).unwrap();
            let (_, g) = field_gradient(&PSymbol { params }, &pt).unwrap();
            let mut hp_p = 0.0;
            for j in 0..4 {
                hp_p += h.dx[j] * g[j] + h.dxi[j] * g[4 + j];
            }
            let norm = pt.momentum_norm();
            assert!(hp_p.abs() < 1e-9 * norm.powi(3));
        }
    }

    #[test]
    fn bracket_convention() {
        let params = schwarzschild();
        let pt = sample_point();
        // {xi_r, r} = 1 under the stated convention
        assert_relative_eq!(poisson_bracket(&Coord::XiR, &Coord::R, &pt).unwrap(), 1.0);
        // {p, p} = 0
        let p = PSymbol { params };
        assert_abs_diff_eq!(poisson_bracket(&p, &p, &pt).unwrap(), 0.0);
        // antisymmetry against another field
        let fg = poisson_bracket(&p, &Coord::XiR, &pt).unwrap();
        let gf = poisson_bracket(&Coord::XiR, &p, &pt).unwrap();
        assert_relative_eq!(fg, -gf, max_relative = 1e-14);
    }

    #[test]
    fn bracket_equals_hamilton_contraction() {
        let params = kerr_ds();
        let pt = sample_point();
        let p = PSymbol { params };
        let h = hamilton_of(&p, &pt).unwrap();
        let (_, gg) = field_gradient(&Coord::XiR, &pt).unwrap();
        let mut hf_g = 0.0;
        for j in 0..4 {
            hf_g += h.dx[j] * gg[j] + h.dxi[j] * gg[4 + j];
        }
        let br = poisson_bracket(&p, &Coord::XiR, &pt).unwrap();
        assert_relative_eq!(hf_g, br, max_relative = 1e-10);
    }

    #[test]
    fn homogeneity_of_p() {
        let params = kerr_ds();
        let pt = sample_point();
        let p = PSymbol { params };
        for lam in [2.0, 10.0] {
            assert!(check_homogeneity(&p, &pt, 2.0, lam).unwrap() < 1e-12);
        }
    }

    #[test]
    fn projection_lands_on_sigma() {
        let params = kerr_ds();
        let pt = sample_point();
        let on_sigma = project_to_characteristic(&params, &pt).unwrap();
        let p = p_symbol(&params, &on_sigma).unwrap();
        let norm = on_sigma.momentum_norm();
        assert!(p.abs() < 1e-10 * norm * norm);
        // sign of xi_theta preserved
        assert!(on_sigma.xi_theta < 0.0);

        // zero input xi_theta picks the positive root
        let pt0 = PhasePoint {
            xi_theta: 0.0,
            ..pt
        };
        let proj = project_to_characteristic(&params, &pt0).unwrap();
        assert!(proj.xi_theta > 0.0);

        // no real root when the angular potential exceeds the radial budget
        let starved = PhasePoint {
            xi_t: 1e-3,
            xi_phi: 2.0,
            ..pt
        };
        assert!(matches!(
            project_to_characteristic(&params, &starved),
            Err(Error::NoRealRoot { .. })
        ));
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let params = kerr_ds();
        let p = PSymbol { params };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 1000 {
            let pt = PhasePoint::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(2.2..10.0),
                rng.gen_range(0.3..std::f64::consts::PI - 0.3),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.1..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0),
            );
            if !params.in_exterior(pt.r) {
                continue;
            }
            let (_, g) = field_gradient(&p, &pt).unwrap();
            let scale = pt.momentum_norm().max(1.0);
            let fd = field_gradient_fd(&p, &pt, 1e-6 * scale).unwrap();
            for i in 0..8 {
                let denom = g[i].abs().max(scale * scale);
                assert!(
                    (g[i] - fd[i]).abs() / denom < 1e-5,
                    "lane {i}: dual {} vs fd {}",
                    g[i],
                    fd[i]
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn dual_lift_primal_part_matches_plain_eval() {
        let params = kerr_ds();
        let pt = sample_point();
        let p = PSymbol { params };
        let plain = p.eval(&pt).unwrap();
        let lifted = p.eval(&pt.seed_all()).unwrap();
        assert_eq!(lifted.re, plain);
    }

    proptest! {
        #[test]
        fn p_even_in_momentum(
            r in 3.0f64..8.0,
            th in 0.5f64..2.6,
            xt in 0.2f64..2.0,
            xr in -1.0f64..1.0,
            xth in -1.0f64..1.0,
            xp in -1.0f64..1.0,
        ) {
            let params = kerr_ds();
            let pt = PhasePoint::new(0.0, r, th, 0.0, xt, xr, xth, xp);
            let v = p_symbol(&params, &pt).unwrap();
            let w = p_symbol(&params, &pt.scale_momentum(-1.0)).unwrap();
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}

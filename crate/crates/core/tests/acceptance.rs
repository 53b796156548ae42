//! Acceptance suite: every criterion prints one pass/fail line and the run
//! fails if any criterion does.

use std::time::Instant;

use rayon::prelude::*;

use kerrtrap::flow::{
    integrate_hp, travel_time_closed, travel_time_numeric, IntegratorSpec, Rescale, Termination,
};
use kerrtrap::normal_form::{
    normal_form_image, sp_core, verify_canonical, x3_correction_with, BracketMode, LegOrder,
    NormalFormConfig,
};
use kerrtrap::phase::{poisson_bracket, project_to_characteristic, PhasePoint};
use kerrtrap::symbol::{estimate_orders, verify_symbol_bound, SymbolGrid};
use kerrtrap::trapping::{
    complete_gamma_point, critical_radius, expansion_rate, sample_near_gamma, sample_trapped_set,
    PhiHatU, PhiS, RadialContext,
};
use kerrtrap::BlackHoleParams;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Instantaneous flow-linearization rate -(d/ds) log |phi^u| at `pt`, by a
/// symmetric difference along the momentum-plane-rescaled H_p flow.
fn linearization_rate(params: &BlackHoleParams, pt: &PhasePoint<f64>) -> f64 {
    let h = 1e-3;
    let spec = IntegratorSpec::adaptive(1e-12).unwrap();
    let ctx = RadialContext::new(params, pt.xi_t, pt.xi_phi).unwrap();
    let phi_u_at = |q: &PhasePoint<f64>| ctx.phi_u(q.r, q.xi_r).unwrap();
    let fwd = integrate_hp(params, pt, h, &spec, Rescale::MomentumPlane)
        .unwrap()
        .end()
        .1;
    let bwd = integrate_hp(params, pt, -h, &spec, Rescale::MomentumPlane)
        .unwrap()
        .end()
        .1;
    -(phi_u_at(&fwd).abs().ln() - phi_u_at(&bwd).abs().ln()) / (2.0 * h)
}

#[test]
fn criterion_1_photon_sphere() {
    let mut worst_err = 0.0_f64;
    let mut worst_time = 0.0_f64;
    for lambda in [0.0, 0.02] {
        let params = BlackHoleParams::new(1.0, 0.0, lambda).unwrap();
        for (xi_t, xi_phi) in [(1.0, 0.0), (0.7, 0.6), (0.3, -0.9), (2.0, 5.0)] {
            let t0 = Instant::now();
            let rc = critical_radius(&params, xi_t, xi_phi).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            worst_err = worst_err.max((rc - 3.0).abs());
            worst_time = worst_time.max(dt);
        }
    }
    let pass = worst_err < 1e-10 && worst_time < 1e-3;
    report(
        1,
        "Schwarzschild(-de Sitter) photon sphere",
        pass,
        &format!(
            "max |r_crit - 3| = {worst_err:.2e}, max runtime {:.3} ms",
            worst_time * 1e3
        ),
    );
}

#[test]
fn criterion_2_trapped_set_invariance() {
    let params = BlackHoleParams::new(1.0, 0.7, 0.0).unwrap();
    let sample = sample_trapped_set(&params, 20, 2024).unwrap();
    let spec = IntegratorSpec::adaptive(1e-10).unwrap();
    let t0 = Instant::now();
    let mut max_dr = 0.0_f64;
    let mut max_xr = 0.0_f64;
    let mut completed = 0;
    for d in &sample.data {
        let traj = integrate_hp(&params, &d.phase_point(), 5.0, &spec, Rescale::FullFiber).unwrap();
        if matches!(traj.termination, Termination::Completed) {
            completed += 1;
        }
        for (_, pt) in &traj.samples {
            max_dr = max_dr.max((pt.r - d.r_crit).abs());
            max_xr = max_xr.max(pt.xi_r.abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = completed == 20 && max_dr < 1e-6 && max_xr < 1e-6 && dt < 1.0;
    report(
        2,
        "trapped-set invariance",
        pass,
        &format!(
            "20 samples over s in [0,5]: max |r - r_crit| = {max_dr:.2e}, \
             max |xi_r| = {max_xr:.2e}, runtime {dt:.2} s"
        ),
    );
}

#[test]
fn criterion_3_expansion_rate_oracle() {
    let t0 = Instant::now();
    // Schwarzschild closed form first
    let params0 = BlackHoleParams::new(1.0, 0.0, 0.0).unwrap();
    let gamma0 =
        complete_gamma_point(&params0, 1.0, 0.0, std::f64::consts::FRAC_PI_2, 1.0).unwrap();
    let (w_schw, _) = expansion_rate(&params0, &gamma0.phase_point()).unwrap();
    let schw_err = (w_schw - 6.0 * 3.0_f64.sqrt()).abs();

    let mut worst_rel = 0.0_f64;
    let mut checked = 0;
    'outer: for spin in [0.0, 0.5, 0.9] {
        for lambda in [0.0, 0.02] {
            let params = BlackHoleParams::new(1.0, spin, lambda).unwrap();
            let sample = sample_trapped_set(&params, 9, 7_000 + (spin * 10.0) as u64).unwrap();
            for d in &sample.data {
                if checked >= 50 {
                    break 'outer;
                }
                let mut pt = d.phase_point();
                pt.xi_r += 1e-4; // distance 1e-4 from Gamma
                let Ok(pt) = project_to_characteristic(&params, &pt) else {
                    continue;
                };
                let (wu, _) = expansion_rate(&params, &pt).unwrap();
                let slope = linearization_rate(&params, &pt);
                worst_rel = worst_rel.max((slope - wu).abs() / wu);
                checked += 1;
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = schw_err < 1e-6 && checked >= 50 && worst_rel < 1e-3 && dt < 10.0;
    report(
        3,
        "expansion-rate oracle equivalence",
        pass,
        &format!(
            "Schwarzschild |w_u - 6 sqrt(3)| = {schw_err:.2e}; {checked} points, \
             worst flow-vs-closed rel. diff = {worst_rel:.2e}; runtime {dt:.2} s"
        ),
    );
}

#[test]
fn criterion_4_transversality_and_positivity() {
    let mut violations = 0usize;
    let mut checked = 0usize;
    for (spin, lambda, seed) in [(0.3, 0.0, 41u64), (0.7, 0.0, 42), (0.5, 0.02, 43)] {
        let params = BlackHoleParams::new(1.0, spin, lambda).unwrap();
        let pts = sample_near_gamma(&params, 167, seed, 0.05, true).unwrap();
        let (fu, fs) = (PhiHatU { params }, PhiS { params });
        for pt in &pts {
            checked += 1;
            let br = poisson_bracket(&fu, &fs, pt).unwrap();
            let (wu, ws) = match expansion_rate(&params, pt) {
                Ok(v) => v,
                Err(_) => {
                    violations += 1;
                    continue;
                }
            };
            let ctx = RadialContext::new(&params, pt.xi_t, pt.xi_phi).unwrap();
            let f_val = ctx.big_f(pt.r).unwrap();
            if !(br > 0.0 && wu > 0.0 && ws > 0.0 && f_val > 0.0) {
                violations += 1;
            }
        }
    }
    let pass = checked >= 500 && violations == 0;
    report(
        4,
        "transversality and positivity",
        pass,
        &format!("{checked} characteristic neighborhood points, {violations} violations"),
    );
}

#[test]
fn criterion_5_travel_time_oracle() {
    let t0 = Instant::now();
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (spin, lambda, seed) in [(0.7, 0.0, 51u64), (0.5, 0.02, 52)] {
        let params = BlackHoleParams::new(1.0, spin, lambda).unwrap();
        let pts = sample_near_gamma(&params, 50, seed, 0.03, false).unwrap();
        for pt in &pts {
            let closed = travel_time_closed(&params, pt).unwrap();
            let numeric = travel_time_numeric(&params, pt).unwrap();
            worst = worst.max((closed - numeric).abs());
            checked += 1;
        }
    }

    // unit rate of T^s along the H_{phi-hat^u} flow
    let params = BlackHoleParams::new(1.0, 0.7, 0.0).unwrap();
    let pts = sample_near_gamma(&params, 5, 53, 0.03, false).unwrap();
    let h = 1e-4;
    let spec = IntegratorSpec::adaptive(1e-12).unwrap();
    let mut worst_rate = 0.0_f64;
    for pt in &pts {
        let fwd = kerrtrap::flow::integrate_hphiu(&params, pt, h, &spec)
            .unwrap()
            .end()
            .1;
        let bwd = kerrtrap::flow::integrate_hphiu(&params, pt, -h, &spec)
            .unwrap()
            .end()
            .1;
        let slope = (travel_time_closed(&params, &fwd).unwrap()
            - travel_time_closed(&params, &bwd).unwrap())
            / (2.0 * h);
        worst_rate = worst_rate.max((slope - 1.0).abs());
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = checked == 100 && worst < 1e-7 && worst_rate < 1e-6 && dt < 5.0;
    report(
        5,
        "travel-time oracle equivalence",
        pass,
        &format!(
            "{checked} points, worst closed-vs-numeric = {worst:.2e}; \
             |H T^s - 1| = {worst_rate:.2e}; runtime {dt:.2} s"
        ),
    );
}

#[test]
fn criterion_6_symplectomorphism() {
    let t0 = Instant::now();
    let params = BlackHoleParams::new(1.0, 0.5, 0.0).unwrap();
    let cfg = NormalFormConfig::default();

    // canonical brackets, dual-number mode, 100 near-Gamma points
    let pts = sample_near_gamma(&params, 100, 61, 0.05, false).unwrap();
    let worst_bracket = pts
        .par_iter()
        .map(|pt| {
            verify_canonical(&params, pt, BracketMode::DualNumber)
                .unwrap()
                .max_residual
        })
        .reduce(|| 0.0, f64::max);

    // Gamma^u -> {x1 = 0}, Gamma^s -> {xi1 = 0}
    let mut worst_zero = 0.0_f64;
    for seed in 0..20u64 {
        let d = &sample_trapped_set(&params, 1, 600 + seed).unwrap().data[0];
        let ctx = RadialContext::new(&params, d.xi_t, d.xi_phi).unwrap();
        let r = d.r_crit + 0.02 + 0.002 * seed as f64;
        let s = ctx.s_fn(r).unwrap();
        let mut pt = d.phase_point();
        pt.r = r;
        pt.xi_r = params.delta0 * s; // on Gamma^u
        worst_zero = worst_zero.max(sp_core(&params, &pt).unwrap().x1.abs());
        pt.xi_r = -params.delta0 * s; // on Gamma^s
        worst_zero = worst_zero.max(sp_core(&params, &pt).unwrap().xi[0].abs());
    }

    // X3 path independence within 10x the default integrator tolerance
    let mut worst_path = 0.0_f64;
    for pt in pts.iter().take(10) {
        let a = x3_correction_with(&params, pt, &cfg, LegOrder::Canonical).unwrap();
        let b = x3_correction_with(&params, pt, &cfg, LegOrder::Swapped).unwrap();
        worst_path = worst_path.max((a - b).abs());
    }

    // homogeneity of the full image
    let mut worst_hom = 0.0_f64;
    for pt in pts.iter().take(5) {
        let image = normal_form_image(&params, pt).unwrap();
        for lam in [0.5, 3.0] {
            let scaled = normal_form_image(&params, &pt.scale_momentum(lam)).unwrap();
            for i in 0..4 {
                worst_hom =
                    worst_hom.max((scaled.x[i] - image.x[i]).abs() / image.x[i].abs().max(1.0));
                worst_hom = worst_hom
                    .max((scaled.xi[i] - lam * image.xi[i]).abs() / image.xi[i].abs().max(1.0));
            }
        }
    }

    let dt = t0.elapsed().as_secs_f64();
    let pass = worst_bracket < 1e-5
        && worst_zero < 1e-9
        && worst_path < 10.0 * 1e-10
        && worst_hom < 1e-7
        && dt < 60.0;
    report(
        6,
        "symplectomorphism verification",
        pass,
        &format!(
            "bracket residual {worst_bracket:.2e} over 100 points; manifold-zero \
             {worst_zero:.2e}; X3 path diff {worst_path:.2e}; homogeneity {worst_hom:.2e}; \
             runtime {dt:.1} s"
        ),
    );
}

#[test]
fn criterion_7_symbol_order_recovery() {
    let t0 = Instant::now();
    let grid = SymbolGrid::default();
    let mut worst = 0.0_f64;
    for alpha in [0.25, 0.5, 0.75] {
        for m0 in [-1.0, 0.0, 1.0] {
            for k in [0.0, 1.0, 2.0] {
                let est = estimate_orders(
                    move |x1: f64, rho_hat: f64| {
                        let rho_tilde = x1.hypot(rho_hat.powf(alpha));
                        rho_hat.powf(-m0) * rho_tilde.powf(-k)
                    },
                    alpha,
                    &grid,
                )
                .unwrap();
                worst = worst.max((est.m_est - m0).abs());
                worst = worst.max((est.m_tilde_est - (m0 + alpha * k)).abs());
            }
        }
    }
    // x1 sits in S^{0, -alpha}
    let alpha = 0.5;
    let est = estimate_orders(|x1, _| x1, alpha, &grid).unwrap();
    let x1_err = est.m_est.abs().max((est.m_tilde_est + alpha).abs());
    // negative control: the false claim (0, -2 alpha) must fail
    let bad = verify_symbol_bound(|x1, _| x1, 0.0, -2.0 * alpha, alpha, 2, &grid).unwrap();
    let good = verify_symbol_bound(|x1, _| x1, 0.0, -alpha, alpha, 2, &grid).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst < 0.05 && x1_err < 0.05 && !bad.pass && good.pass && dt < 5.0;
    report(
        7,
        "symbol-order recovery",
        pass,
        &format!(
            "worst monomial error {worst:.3}; x1 error {x1_err:.3}; negative control \
             C = {:.1e} rejected; runtime {dt:.2} s",
            bad.c_min
        ),
    );
}

#[test]
fn criterion_8_integrator_order() {
    let params = BlackHoleParams::new(1.0, 0.7, 0.0).unwrap();
    let raw = PhasePoint::new(0.0, 4.0, 1.2, 0.0, 1.0, 0.15, 0.5, 0.3);
    let init = project_to_characteristic(&params, &raw).unwrap();
    let ends: Vec<[f64; 8]> = [0.002, 0.001, 0.0005]
        .iter()
        .map(|h| {
            let spec = IntegratorSpec::fixed(*h).unwrap();
            integrate_hp(&params, &init, 0.1, &spec, Rescale::Off)
                .unwrap()
                .end()
                .1
                .to_array()
        })
        .collect();
    let diff = |a: &[f64; 8], b: &[f64; 8]| -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = diff(&ends[0], &ends[1]) / diff(&ends[1], &ends[2]);
    let pass = (14.0..=18.0).contains(&ratio);
    report(
        8,
        "integrator order (Richardson)",
        pass,
        &format!("fixed-step error ratio {ratio:.2} (nominal 16)"),
    );
}

//! Blow-up coordinates on the model phase space and empirical estimation of
//! the two-index symbol orders (m, m-tilde).
//!
//! Model coordinates: a scalar boundary defining function x1 and the fiber
//! defining function rho-hat (one-dimensional momentum xi = 1/rho-hat). The
//! front face of the blow-up at order alpha carries rho = rho-hat^alpha and
//! rho-tilde = (x1^2 + rho-hat^{2 alpha})^{1/2}.
//!
//! Orders are read off two families of fits: along rays of fixed
//! sigma = x1 / rho-hat^alpha the symbol scales like rho-hat^{-m-tilde};
//! along arcs of fixed rho-hat the rho-tilde power is (m-tilde - m)/alpha.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blow-up coordinates attached to a model phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCoords {
    pub rho_hat: f64,
    pub alpha: f64,
    /// rho = rho-hat^alpha.
    pub rho: f64,
    /// Front-face defining function (x1^2 + rho^2)^{1/2}.
    pub rho_tilde: f64,
    /// Front-face coordinate x1 / rho.
    pub sigma: f64,
}

impl BlowupCoords {
    pub fn new(x1: f64, rho_hat: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(rho_hat.is_finite() && rho_hat > 0.0) {
            return Err(Error::Config(format!(
                "rho_hat must be positive, got {rho_hat}"
            )));
        }
        let rho = rho_hat.powf(alpha);
        Ok(Self {
            rho_hat,
            alpha,
            rho,
            rho_tilde: x1.hypot(rho),
            sigma: x1 / rho,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "blow-up order alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Sampling layout for the order fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolGrid {
    /// log10 range of rho-hat^{-1} along rays.
    pub decades: (f64, f64),
    pub ray_points: usize,
    /// Front-face coordinates of the rays.
    pub sigmas: Vec<f64>,
    /// Arc sweep upper bound on |x1|.
    pub x1_macro: f64,
    pub arc_points: usize,
    /// Minimum abscissa dynamic range (decades) for each fit family.
    pub min_ray_decades: f64,
    pub min_arc_decades: f64,
    /// Residual threshold for a usable least-squares fit.
    pub max_fit_residual: f64,
}

impl Default for SymbolGrid {
    fn default() -> Self {
        Self {
            decades: (2.0, 8.0),
            ray_points: 25,
            sigmas: vec![0.0, 0.5, -0.5, 2.0, -2.0],
            x1_macro: 0.3,
            arc_points: 25,
            min_ray_decades: 3.0,
            min_arc_decades: 1.0,
            max_fit_residual: 0.25,
        }
    }
}

/// Estimated two-index orders with the fit quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub m_est: f64,
    pub m_tilde_est: f64,
    /// Largest RMS residual across the per-ray and per-arc fits.
    pub fit_residual: f64,
    pub grid_spec: String,
}

/// Least squares slope of y against x; returns (slope, rms residual).
fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 5 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + icept);
            e * e
        })
        .sum();
    Some((slope, (rss / nf).sqrt()))
}

/// Fit (m, m-tilde) of a model symbol `a(x1, rho_hat)`.
pub fn estimate_orders(
    symbol: impl Fn(f64, f64) -> f64,
    alpha: f64,
    grid: &SymbolGrid,
) -> Result<OrderEstimate> {
    check_alpha(alpha)?;
    let (d_lo, d_hi) = grid.decades;
    if d_hi - d_lo < grid.min_ray_decades {
        return Err(Error::DegenerateFit(format!(
            "ray dynamic range {} decades below {}",
            d_hi - d_lo,
            grid.min_ray_decades
        )));
    }

    // rays of fixed sigma: log|a| vs log rho-hat^{-1}, slope = m-tilde
    let mut ray_slopes = Vec::new();
    let mut worst_residual = 0.0_f64;
    for &sigma in &grid.sigmas {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..grid.ray_points {
            let exp10 = d_lo + (d_hi - d_lo) * i as f64 / (grid.ray_points - 1) as f64;
            let rho_hat = 10f64.powf(-exp10);
            let x1 = sigma * rho_hat.powf(alpha);
            let v = symbol(x1, rho_hat).abs();
            if v.is_finite() && v > 0.0 {
                xs.push(exp10 * std::f64::consts::LN_10);
                ys.push(v.ln());
            }
        }
        if let Some((slope, res)) = fit_slope(&xs, &ys) {
            ray_slopes.push(slope);
            worst_residual = worst_residual.max(res);
        }
    }
    if ray_slopes.is_empty() {
        return Err(Error::DegenerateFit(
            "no ray of the grid produced a usable fit".into(),
        ));
    }
    let m_tilde_est = ray_slopes.iter().sum::<f64>() / ray_slopes.len() as f64;

    // arcs of fixed rho-hat: log|a| vs log rho-tilde^{-1},
    // slope = (m-tilde - m)/alpha
    let rho_hat = 10f64.powf(-d_hi);
    let rho = rho_hat.powf(alpha);
    let arc_decades = (grid.x1_macro / rho).log10();
    if arc_decades < grid.min_arc_decades {
        return Err(Error::DegenerateFit(format!(
            "arc dynamic range {arc_decades:.2} decades below {}",
            grid.min_arc_decades
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..grid.arc_points {
        let x1 = rho * (grid.x1_macro / rho).powf(i as f64 / (grid.arc_points - 1) as f64);
        let rho_tilde = x1.hypot(rho);
        let v = symbol(x1, rho_hat).abs();
        if v.is_finite() && v > 0.0 {
            xs.push(-rho_tilde.ln());
            ys.push(v.ln());
        }
    }
    let Some((arc_slope, arc_res)) = fit_slope(&xs, &ys) else {
        return Err(Error::DegenerateFit("arc fit failed".into()));
    };
    worst_residual = worst_residual.max(arc_res);
    if worst_residual > grid.max_fit_residual {
        return Err(Error::DegenerateFit(format!(
            "fit residual {worst_residual:.3e} above {}",
            grid.max_fit_residual
        )));
    }

    Ok(OrderEstimate {
        m_est: m_tilde_est - alpha * arc_slope,
        m_tilde_est,
        fit_residual: worst_residual,
        grid_spec: format!(
            "rays rho-hat^-1 in [1e{d_lo}, 1e{d_hi}] x {} pts, sigma {:?}; \
             arc at rho-hat = 1e-{d_hi}, |x1| in [rho, {}] x {} pts",
            grid.ray_points, grid.sigmas, grid.x1_macro, grid.arc_points
        ),
    })
}

/// Outcome of the symbol-class membership check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Minimal constant C making the claimed bound hold on the grid.
    pub c_min: f64,
    /// Grid location and derivative orders (x1, rho_hat, l, gamma) where the
    /// bound is tightest.
    pub worst: (f64, f64, usize, usize),
    /// Whether c_min stays below the admissibility threshold.
    pub pass: bool,
    pub threshold: f64,
}

/// Admissibility threshold for the bound constant: a genuinely wrong class
/// claim sends C off by orders of magnitude over the six-decade grid.
pub const DEFAULT_C_THRESHOLD: f64 = 100.0;

/// Check |d_x1^l d_xi^g a| <= C rho-hat^{-m+g} rho-tilde^{-(m-tilde-m)/alpha - l}
/// for l <= 2, g <= 1, by finite differences over the grid. Returns the
/// minimal C and where it is attained.
pub fn verify_symbol_bound(
    symbol: impl Fn(f64, f64) -> f64,
    m: f64,
    m_tilde: f64,
    alpha: f64,
    max_order: usize,
    grid: &SymbolGrid,
) -> Result<BoundReport> {
    check_alpha(alpha)?;
    let max_l = max_order.min(2);
    let (d_lo, d_hi) = grid.decades;

    // x1-derivatives up to order 2 at the front-face scale
    let dx1 = |x1: f64, rho_hat: f64, l: usize| -> f64 {
        let rho = rho_hat.powf(alpha);
        let h = 1e-3 * x1.hypot(rho);
        match l {
            0 => symbol(x1, rho_hat),
            1 => (symbol(x1 + h, rho_hat) - symbol(x1 - h, rho_hat)) / (2.0 * h),
            _ => {
                (symbol(x1 + h, rho_hat) - 2.0 * symbol(x1, rho_hat) + symbol(x1 - h, rho_hat))
                    / (h * h)
            }
        }
    };
    // one momentum derivative: d/d xi = -rho-hat^2 d/d rho-hat
    let deriv = |x1: f64, rho_hat: f64, l: usize, g: usize| -> f64 {
        if g == 0 {
            dx1(x1, rho_hat, l)
        } else {
            let h = 1e-3 * rho_hat;
            let d_rho = (dx1(x1, rho_hat + h, l) - dx1(x1, rho_hat - h, l)) / (2.0 * h);
            -rho_hat * rho_hat * d_rho
        }
    };

    let mut c_min = 0.0_f64;
    let mut worst = (0.0, 0.0, 0, 0);
    let mut visit = |x1: f64, rho_hat: f64| {
        let rho = rho_hat.powf(alpha);
        let rho_tilde = x1.hypot(rho);
        for l in 0..=max_l {
            for g in 0..=1usize {
                let lhs = deriv(x1, rho_hat, l, g).abs();
                let rhs =
                    rho_hat.powf(-m + g as f64) * rho_tilde.powf(-(m_tilde - m) / alpha - l as f64);
                if rhs > 0.0 && lhs.is_finite() {
                    let c = lhs / rhs;
                    if c > c_min {
                        c_min = c;
                        worst = (x1, rho_hat, l, g);
                    }
                }
            }
        }
    };
    for &sigma in &grid.sigmas {
        for i in 0..grid.ray_points {
            let exp10 = d_lo + (d_hi - d_lo) * i as f64 / (grid.ray_points - 1) as f64;
            let rho_hat = 10f64.powf(-exp10);
            visit(sigma * rho_hat.powf(alpha), rho_hat);
        }
    }
    let rho_hat = 10f64.powf(-d_hi);
    let rho = rho_hat.powf(alpha);
    for i in 0..grid.arc_points {
        let x1 = rho * (grid.x1_macro / rho).powf(i as f64 / (grid.arc_points - 1) as f64);
        visit(x1, rho_hat);
    }
    if c_min == 0.0 {
        return Err(Error::DegenerateFit(
            "symbol vanished on the whole grid".into(),
        ));
    }
    Ok(BoundReport {
        c_min,
        worst,
        pass: c_min <= DEFAULT_C_THRESHOLD,
        threshold: DEFAULT_C_THRESHOLD,
    })
}

/// Built-in model symbols for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinSymbol {
    /// a = x1, the class S^{0, -alpha} representative.
    X1,
    /// a = rho-hat^{-1}, a classical order-(1,1) symbol.
    RhoHatInv,
    /// a = rho-tilde^{-1}, orders (0, alpha).
    RhoTildeInv,
}

impl BuiltinSymbol {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "x1" => Ok(Self::X1),
            "rho_hat_inv" => Ok(Self::RhoHatInv),
            "rho_tilde_inv" => Ok(Self::RhoTildeInv),
            other => Err(Error::Config(format!(
                "unknown builtin symbol '{other}' (expected x1, rho_hat_inv, rho_tilde_inv)"
            ))),
        }
    }

    pub fn evaluator(self, alpha: f64) -> impl Fn(f64, f64) -> f64 {
        move |x1: f64, rho_hat: f64| match self {
            Self::X1 => x1,
            Self::RhoHatInv => 1.0 / rho_hat,
            Self::RhoTildeInv => 1.0 / x1.hypot(rho_hat.powf(alpha)),
        }
    }

    /// Reference orders (m, m-tilde) of the builtin at blow-up order alpha.
    pub fn reference_orders(self, alpha: f64) -> (f64, f64) {
        match self {
            Self::X1 => (0.0, -alpha),
            Self::RhoHatInv => (1.0, 1.0),
            Self::RhoTildeInv => (0.0, alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn monomial(m0: f64, k: f64, alpha: f64) -> impl Fn(f64, f64) -> f64 {
        move |x1: f64, rho_hat: f64| {
            let rho_tilde = x1.hypot(rho_hat.powf(alpha));
            rho_hat.powf(-m0) * rho_tilde.powf(-k)
        }
    }

    #[test]
    fn blowup_coordinate_invariants() {
        for (x1, rh, al) in [(0.1, 1e-4, 0.5), (-0.02, 1e-6, 0.25), (0.0, 1e-3, 0.75)] {
            let b = BlowupCoords::new(x1, rh, al).unwrap();
            assert!(b.rho_tilde >= x1.abs().max(b.rho) - 1e-18);
            assert!(b.rho_tilde <= x1.abs() + b.rho);
            assert_relative_eq!(b.sigma * b.rho, x1, max_relative = 1e-14);
        }
        assert!(BlowupCoords::new(0.1, 1e-4, 1.0).is_err());
        assert!(BlowupCoords::new(0.1, 1e-4, 0.0).is_err());
    }

    #[test]
    fn monomial_orders_recovered_exactly() {
        let grid = SymbolGrid::default();
        for alpha in [0.25, 0.5, 0.75] {
            for m0 in [-1.0, 0.0, 1.0, 2.0] {
                for k in [0.0, 1.0, 2.0] {
                    let est = estimate_orders(monomial(m0, k, alpha), alpha, &grid).unwrap();
                    assert_abs_diff_eq!(est.m_est, m0, epsilon = 0.02);
                    assert_abs_diff_eq!(est.m_tilde_est, m0 + alpha * k, epsilon = 0.02);
                }
            }
        }
    }

    #[test]
    fn x1_lies_in_the_stated_class() {
        let grid = SymbolGrid::default();
        let alpha = 0.5;
        let est = estimate_orders(|x1, _| x1, alpha, &grid).unwrap();
        assert_abs_diff_eq!(est.m_est, 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(est.m_tilde_est, -alpha, epsilon = 0.05);
    }

    #[test]
    fn rho_tilde_inverse_at_quarter() {
        let grid = SymbolGrid::default();
        let est = estimate_orders(BuiltinSymbol::RhoTildeInv.evaluator(0.25), 0.25, &grid).unwrap();
        assert_abs_diff_eq!(est.m_est, 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(est.m_tilde_est, 0.25, epsilon = 0.05);
    }

    #[test]
    fn estimator_monotone_under_rho_tilde_weighting() {
        let grid = SymbolGrid::default();
        let alpha = 0.5;
        let base = monomial(1.0, 1.0, alpha);
        let weighted = monomial(1.0, 2.0, alpha);
        let e0 = estimate_orders(base, alpha, &grid).unwrap();
        let e1 = estimate_orders(weighted, alpha, &grid).unwrap();
        assert_abs_diff_eq!(e1.m_tilde_est - e0.m_tilde_est, alpha, epsilon = 0.05);
        assert_abs_diff_eq!(e1.m_est, e0.m_est, epsilon = 0.02);
    }

    #[test]
    fn classical_symbols_embed_for_larger_m_tilde() {
        // rho-hat^{-m0} passes the bound check for every claimed
        // m-tilde >= m0
        let grid = SymbolGrid::default();
        for m0 in [0.0, 1.0] {
            for dm in [0.0, 0.3, 1.0] {
                let rep = verify_symbol_bound(
                    move |_, rho_hat: f64| rho_hat.powf(-m0),
                    m0,
                    m0 + dm,
                    0.5,
                    2,
                    &grid,
                )
                .unwrap();
                assert!(
                    rep.pass,
                    "claim ({m0}, {}) failed: C = {}",
                    m0 + dm,
                    rep.c_min
                );
            }
        }
    }

    #[test]
    fn bound_constant_near_one_for_exact_claim() {
        let grid = SymbolGrid::default();
        let rep =
            verify_symbol_bound(|_, rho_hat: f64| 1.0 / rho_hat, 1.0, 1.0, 0.5, 2, &grid).unwrap();
        assert!(rep.pass);
        assert!(rep.c_min <= 1.5, "C = {}", rep.c_min);
    }

    #[test]
    fn x1_bound_holds_and_false_claim_fails() {
        let grid = SymbolGrid::default();
        let alpha = 0.5;
        let ok = verify_symbol_bound(|x1, _| x1, 0.0, -alpha, alpha, 2, &grid).unwrap();
        assert!(ok.pass, "true claim rejected with C = {}", ok.c_min);
        // negative control: claiming (0, -2 alpha) must blow up along the arc
        let bad = verify_symbol_bound(|x1, _| x1, 0.0, -2.0 * alpha, alpha, 2, &grid).unwrap();
        assert!(!bad.pass, "false claim accepted with C = {}", bad.c_min);
        assert!(bad.c_min > 1e3);
    }

    #[test]
    fn degenerate_grids_are_reported() {
        let grid = SymbolGrid {
            decades: (2.0, 4.0),
            ..SymbolGrid::default()
        };
        assert!(matches!(
            estimate_orders(|_, rh| 1.0 / rh, 0.5, &grid),
            Err(Error::DegenerateFit(_))
        ));
        let grid = SymbolGrid::default();
        assert!(matches!(
            estimate_orders(|_, _| 0.0, 0.5, &grid),
            Err(Error::DegenerateFit(_))
        ));
    }
}

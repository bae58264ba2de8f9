//! Ratio measurements for the subelliptic estimate, the exponential
//! conjugation identity, the shifted one-dimensional multiplier bounds,
//! and the weighted Carleman estimate.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::frac_ops::{h_multiplier, lambda_alpha_multiplier};
use crate::grid::{Field, GridSpec};
use crate::params::ProblemParams;
use crate::spectral::{
    apply_p, apply_p_psi, apply_p_shifted, apply_shifted_z_operator, ShiftedMode,
};

/// The Carleman weight exponent psi(x_n) = (x_n - X)^2 / 2.
pub fn psi(params: &ProblemParams, x_n: f64) -> f64 {
    let w = x_n - params.x_shift;
    0.5 * w * w
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioEntry {
    pub param: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// A family of measured lhs/rhs pairs with their supremum ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioSweep {
    pub entries: Vec<RatioEntry>,
    pub sup_ratio: f64,
}

impl RatioSweep {
    pub fn new(entries: Vec<RatioEntry>) -> Self {
        let sup_ratio = entries.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max);
        RatioSweep { entries, sup_ratio }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["param", "lhs", "rhs", "ratio"])?;
        for e in &self.entries {
            w.write_record([
                e.param.clone(),
                format!("{:.17e}", e.lhs),
                format!("{:.17e}", e.rhs),
                format!("{:.17e}", e.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Smooth tensor bump: product over axes of bump((c - center)/width).
pub fn tensor_bump(grid: GridSpec, centers: &[f64], widths: &[f64]) -> Field {
    let centers = centers.to_vec();
    let widths = widths.to_vec();
    Field::from_real_fn(grid, move |c| {
        c.iter()
            .zip(centers.iter().zip(&widths))
            .map(|(&v, (&m, &w))| crate::util::smooth_bump((v - m) / w))
            .product()
    })
}

/// Left side of the subelliptic estimate over the integer index pairs
/// (k, s) with k + s < 2, against the norm of P_psi u.
pub fn subelliptic_ratio(u: &Field, params: &ProblemParams) -> Result<RatioEntry> {
    let alpha = params.alpha;
    let mut lhs = 0.0;
    for &(k, s) in &[(0u32, 0u32), (1, 0), (0, 1)] {
        let term = u.apply_multiplier(|tau, xi, sigma| {
            let h = h_multiplier(sigma).powi(2 - k as i32 - s as i32);
            let lam = if s == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                lambda_alpha_multiplier(alpha, s as f64, tau, xi)
            };
            lam * h * sigma.powi(k as i32)
        });
        lhs += term.l2_norm();
    }
    let rhs = apply_p_psi(params, u)?.l2_norm();
    if rhs <= 1e-14 * u.l2_norm() {
        return Err(LabError::ZeroDenominator(format!(
            "‖P_psi u‖ = {rhs:.3e} below noise floor"
        )));
    }
    Ok(RatioEntry {
        param: "subelliptic".into(),
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

fn guard_exponent(params: &ProblemParams, grid: &GridSpec, beta: f64) -> Result<()> {
    let xn_ax = *grid
        .space_axes()
        .last()
        .ok_or_else(|| LabError::Config("grid has no space axis".into()))?;
    let max_psi = grid.axes[xn_ax]
        .coords()
        .iter()
        .map(|&x| psi(params, x))
        .fold(0.0, f64::max);
    if beta.abs() * max_psi > 700.0 {
        return Err(LabError::OverflowGuard(format!(
            "beta * max psi = {:.3e}",
            beta.abs() * max_psi
        )));
    }
    Ok(())
}

fn weight_pointwise(params: &ProblemParams, field: &Field, exponent_scale: f64) -> Field {
    let xn_ax = *field.grid.space_axes().last().expect("space axis");
    let mut out = field.clone();
    out.multiply_by_fn(|c| Complex64::new((exponent_scale * psi(params, c[xn_ax])).exp(), 0.0));
    out
}

/// Integral of e^{scale * psi} |field|^2, skipping exact zeros so the
/// weight never multiplies an empty sample.
fn weighted_mass(params: &ProblemParams, field: &Field, scale: f64) -> f64 {
    let xn_ax = *field.grid.space_axes().last().expect("space axis");
    let coords = field.grid.axes[xn_ax].coords();
    let vol = field.grid.cell_volume();
    field
        .data
        .indexed_iter()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(idx, v)| (scale * psi(params, coords[idx[xn_ax]])).exp() * v.norm_sqr())
        .sum::<f64>()
        * vol
}

/// Relative discrepancy between the shifted quantization
/// p(x, D + i|beta| grad psi) w and the conjugation e^{|beta| psi} P
/// (e^{-|beta| psi} w); exact in the continuum, so this measures pure
/// discretization error.
pub fn conjugation_residual(params: &ProblemParams, w: &Field, beta: f64) -> Result<f64> {
    guard_exponent(params, &w.grid, beta)?;
    let b = beta.abs();
    let shifted = apply_p_shifted(params, w, b)?;
    let damped = weight_pointwise(params, w, -b);
    let conjugated = weight_pointwise(params, &apply_p(params, &damped)?, b);
    let denom = shifted.l2_norm();
    if denom == 0.0 {
        return Err(LabError::ZeroDenominator(
            "shifted quantization output vanishes".into(),
        ));
    }
    Ok(shifted.sub(&conjugated).l2_norm() / denom)
}

/// Both sides of the Carleman estimate at one beta:
/// lhs = beta^3 int e^{2 beta psi} |v|^2 + beta sum_j int e^{2 beta psi}
/// |D_j v|^2, rhs = int e^{2 beta psi} |P v|^2.
pub fn carleman_ratio(v: &Field, beta: f64, params: &ProblemParams) -> Result<RatioEntry> {
    guard_exponent(params, &v.grid, 2.0 * beta)?;
    let mut lhs = beta.powi(3) * weighted_mass(params, v, 2.0 * beta);
    for j in 0..params.n {
        let dv = v.apply_multiplier(|_, xi, _| Complex64::new(xi[j], 0.0));
        lhs += beta * weighted_mass(params, &dv, 2.0 * beta);
    }
    let pv = apply_p(params, v)?;
    let rhs = weighted_mass(params, &pv, 2.0 * beta);
    let v_weighted = weighted_mass(params, v, 2.0 * beta).sqrt();
    if rhs.sqrt() < 1e-14 * v_weighted || rhs == 0.0 {
        return Err(LabError::ZeroDenominator(format!(
            "weighted ‖Pv‖ = {:.3e} below noise floor",
            rhs.sqrt()
        )));
    }
    Ok(RatioEntry {
        param: format!("{beta}"),
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// The same two sides computed through the substitution f = e^{beta psi} v:
/// lhs = beta^3 ‖f‖^2 + beta sum_j ‖(D_j + i beta (d_j psi)) f‖^2,
/// rhs = ‖p(x, D + i beta grad psi) f‖^2. Agrees with `carleman_ratio`
/// up to spectral discretization error.
pub fn carleman_ratio_via_shift(
    v: &Field,
    beta: f64,
    params: &ProblemParams,
) -> Result<RatioEntry> {
    guard_exponent(params, &v.grid, 2.0 * beta)?;
    let f = weight_pointwise(params, v, beta);
    let mut lhs = beta.powi(3) * f.l2_norm_sq();
    let xn_ax = *v.grid.space_axes().last().expect("space axis");
    for j in 0..params.n {
        let mut df = f.apply_multiplier(|_, xi, _| Complex64::new(xi[j], 0.0));
        if j == params.n - 1 {
            let mut shift = f.clone();
            shift.multiply_by_fn(|c| {
                Complex64::new(0.0, beta * (c[xn_ax] - params.x_shift))
            });
            df.add_assign(&shift);
        }
        lhs += beta * df.l2_norm_sq();
    }
    let rhs = apply_p_shifted(params, &f, beta)?.l2_norm_sq();
    if rhs == 0.0 {
        return Err(LabError::ZeroDenominator("shifted rhs vanishes".into()));
    }
    Ok(RatioEntry {
        param: format!("{beta}"),
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// Upper- and lower-line checks of the shifted multiplier estimates for
/// (j,k) in {(2,0),(1,0),(1,1),(0,1)} over a beta list. The `upper`
/// entries record ‖raw - h(beta)^j beta^k g‖ / (h(beta)^j beta^k ‖g‖),
/// the `lower` entries ‖raw‖ / (h(beta)^j beta^k ‖g‖).
pub fn shifted_bound_check(g: &Field, beta_list: &[f64]) -> Result<RatioSweep> {
    let g_norm = g.l2_norm();
    if g_norm == 0.0 {
        return Err(LabError::ZeroDenominator("zero test field".into()));
    }
    let mut entries = Vec::new();
    for &beta in beta_list {
        for &(j, k) in &[(2u32, 0u32), (1, 0), (1, 1), (0, 1)] {
            let raw = apply_shifted_z_operator(g, beta, j, k, ShiftedMode::Raw)?;
            let target_scale = h_multiplier(beta).powi(j as i32) * beta.powi(k as i32);
            let target = g.scaled(Complex64::new(target_scale, 0.0));
            let err = raw.sub(&target).l2_norm();
            let denom = target_scale * g_norm;
            entries.push(RatioEntry {
                param: format!("beta={beta} j={j} k={k} upper"),
                lhs: err,
                rhs: denom,
                ratio: err / denom,
            });
            let norm = raw.l2_norm();
            entries.push(RatioEntry {
                param: format!("beta={beta} j={j} k={k} lower"),
                lhs: norm,
                rhs: denom,
                ratio: norm / denom,
            });
        }
    }
    Ok(RatioSweep::new(entries))
}

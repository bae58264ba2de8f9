//! Changes of variables and localizations: the cutoffs theta, kappa, chi,
//! the Holmgren-type quadratic shear, and the localization pipeline that
//! turns a causal solution on the y-grid into a compactly supported field
//! on the x-grid.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Side};
use crate::params::ProblemParams;
use crate::util::smooth_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    Theta,
    Kappa,
    Chi,
}

/// A one-variable C-infinity cutoff with plateaus outside [lo, hi].
#[derive(Debug, Clone, Copy)]
pub struct CutoffSpec {
    pub kind: CutoffKind,
    pub lo: f64,
    pub hi: f64,
}

impl CutoffSpec {
    /// theta(t): 1 on t <= T - eps, 0 on t >= T - eps/2.
    pub fn theta(params: &ProblemParams) -> Self {
        CutoffSpec {
            kind: CutoffKind::Theta,
            lo: params.t_horizon - params.eps,
            hi: params.t_horizon - params.eps / 2.0,
        }
    }

    /// kappa(y_n): 0 on y_n <= -2l/3, 1 on y_n >= -l/3.
    pub fn kappa(params: &ProblemParams) -> Self {
        CutoffSpec {
            kind: CutoffKind::Kappa,
            lo: -2.0 * params.l / 3.0,
            hi: -params.l / 3.0,
        }
    }

    /// chi(x_n): 1 on x_n <= X/2, 0 on x_n >= X.
    pub fn chi(params: &ProblemParams) -> Self {
        CutoffSpec {
            kind: CutoffKind::Chi,
            lo: params.x_shift / 2.0,
            hi: params.x_shift,
        }
    }

    fn rising(&self) -> bool {
        self.kind == CutoffKind::Kappa
    }
}

pub fn evaluate_cutoff(spec: &CutoffSpec, coordinate: f64) -> f64 {
    let s = smooth_step((coordinate - spec.lo) / (spec.hi - spec.lo));
    if spec.rising() {
        s
    } else {
        1.0 - s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    Forward,
    Inverse,
}

/// The quadratic shear x' = y', x_n = y_n + |y'|^2 + (X/T)(t - T) (with the
/// reference point y-hat' at the origin), or its exact inverse.
pub fn holmgren_map(
    params: &ProblemParams,
    y_prime: &[f64],
    y_n: f64,
    t: f64,
    direction: MapDirection,
) -> (Vec<f64>, f64, f64) {
    let q: f64 = y_prime.iter().map(|v| v * v).sum();
    let shear = params.x_shift / params.t_horizon * (t - params.t_horizon);
    let out_n = match direction {
        MapDirection::Forward => y_n + q + shear,
        MapDirection::Inverse => y_n - q - shear,
    };
    (y_prime.to_vec(), out_n, t)
}

/// 4-point Lagrange interpolation of equally many node values at positions
/// `j0..j0+4` of a uniform axis; `frac` is the query offset from node j0+1
/// in units of the step.
fn lagrange_cubic(vals: &[Complex64; 4], frac: f64) -> Complex64 {
    let s = frac;
    let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    vals[0] * w0 + vals[1] * w1 + vals[2] * w2 + vals[3] * w3
}

/// The localization pipeline: theta(t) kappa(y_n) u, pushed forward by the
/// Holmgren map onto the x-grid (same axes reinterpreted), multiplied by
/// e^{tau0 t}, with {t <= 0} zeroed exactly.
///
/// Only the last space axis is resampled: the map is a pure shift in y_n
/// for fixed (t, x'), so a one-dimensional cubic interpolation suffices.
pub fn prepare_localized_field(params: &ProblemParams, u: &Field) -> Result<Field> {
    params.validate()?;
    if u.side != Side::Physical {
        return Err(LabError::Config(
            "prepare_localized_field expects a physical-side field".into(),
        ));
    }
    let t_ax = u
        .grid
        .time_axis()
        .ok_or_else(|| LabError::Config("y-grid needs a time axis".into()))?;
    let s_axes = u.grid.space_axes();
    if s_axes.len() != params.n {
        return Err(LabError::Config(format!(
            "grid has {} space axes, params.n = {}",
            s_axes.len(),
            params.n
        )));
    }
    let yn_ax = *s_axes.last().unwrap();

    let scale = u.max_abs();
    let tol = 1e-12 * scale;
    let coords: Vec<Vec<f64>> = u.grid.axes.iter().map(|a| a.coords()).collect();
    for (idx, v) in u.data.indexed_iter() {
        let t = coords[t_ax][idx[t_ax]];
        let y_n = coords[yn_ax][idx[yn_ax]];
        if (t <= 0.0 || t >= params.t_horizon || y_n <= 0.0) && v.norm() > tol {
            return Err(LabError::SupportViolation(format!(
                "input amplitude {:.3e} at t = {t}, y_n = {y_n}",
                v.norm()
            )));
        }
    }

    let theta = CutoffSpec::theta(params);
    let kappa = CutoffSpec::kappa(params);
    let mut cut = u.clone();
    cut.multiply_by_fn(|c| {
        Complex64::new(
            evaluate_cutoff(&theta, c[t_ax]) * evaluate_cutoff(&kappa, c[yn_ax]),
            0.0,
        )
    });

    let yn_axis = u.grid.axes[yn_ax];
    let mut out = Field::zeros(u.grid.clone(), Side::Physical);
    let mut y_prime = vec![0.0; params.n - 1];
    for (idx, v) in out.data.indexed_iter_mut() {
        let t = coords[t_ax][idx[t_ax]];
        if t <= 0.0 {
            continue;
        }
        for (d, &ax) in s_axes[..params.n - 1].iter().enumerate() {
            y_prime[d] = coords[ax][idx[ax]];
        }
        let x_n = coords[yn_ax][idx[yn_ax]];
        let (_, y_n, _) = holmgren_map(params, &y_prime, x_n, t, MapDirection::Inverse);
        let pos = (y_n - yn_axis.origin) / yn_axis.step;
        let j1 = pos.floor() as i64;
        if j1 < 1 || j1 + 2 >= yn_axis.len as i64 {
            // outside (or at the rim of) the stored y_n range: the support
            // preconditions guarantee the value is zero there
            continue;
        }
        let mut vals = [Complex64::default(); 4];
        for (s, val) in vals.iter_mut().enumerate() {
            let mut jdx = idx.clone();
            jdx[yn_ax] = (j1 - 1) as usize + s;
            *val = cut.data[jdx];
        }
        *v = lagrange_cubic(&vals, pos - j1 as f64) * Complex64::new((params.tau0 * t).exp(), 0.0);
    }
    Ok(out)
}

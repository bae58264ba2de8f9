//! FFT-based quantization of the transformed operator and its conjugated
//! extension: multiplier terms with physical-space coefficients, the
//! anisotropic norms, the quasi-homogeneous partition of unity, and the
//! shifted one-dimensional z-operators.
//!
//! Quantization ordering: in every term the coefficient field is applied
//! after the Fourier multiplier.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::frac_ops::{frac_lower_symbol, frac_symbol, h_multiplier};
use crate::grid::{Field, Side};
use crate::params::ProblemParams;
use crate::util::smooth_step;

type MultFn = Box<dyn Fn(f64, &[f64], f64) -> Complex64 + Sync>;
type CoeffFn = Box<dyn Fn(&[f64]) -> Complex64 + Sync>;

/// One monomial of a quantized symbol: (coefficient field) o (multiplier).
pub struct SymbolTerm {
    pub coeff: Option<CoeffFn>,
    pub mult: MultFn,
}

/// Apply a sum of coefficient-after-multiplier terms. The forward FFT is
/// shared; each term pays one inverse transform.
pub fn apply_terms(u: &Field, terms: &[SymbolTerm]) -> Field {
    let hat = u.to_fourier();
    let space_axes = u.grid.space_axes();
    let mut acc = Field::zeros(u.grid.clone(), Side::Physical);
    for term in terms {
        let mut v = hat
            .apply_multiplier(|tau, xi, sigma| (term.mult)(tau, xi, sigma))
            .to_physical();
        if let Some(coeff) = &term.coeff {
            let coords: Vec<Vec<f64>> = u.grid.axes.iter().map(|a| a.coords()).collect();
            let mut x = vec![0.0; space_axes.len()];
            for (idx, val) in v.data.indexed_iter_mut() {
                for (d, &ax) in space_axes.iter().enumerate() {
                    x[d] = coords[ax][idx[ax]];
                }
                *val *= coeff(&x);
            }
        }
        acc.add_assign(&v);
    }
    acc
}

fn check_causal(u: &Field) -> Result<()> {
    let worst = u.max_abs_nonpositive_time();
    let scale = u.max_abs();
    if scale > 0.0 && worst > 1e-12 * scale {
        return Err(LabError::CausalityViolation(format!(
            "field amplitude {worst:.3e} at t <= 0 (max {scale:.3e})"
        )));
    }
    Ok(())
}

/// Terms of the operator P in the (t, x) coordinates: the fractional time
/// multiplier, the transformed Laplacian (including its lower-order
/// commutator part), and the transport term created by the time shear.
fn p_terms(params: &ProblemParams) -> Vec<SymbolTerm> {
    let n = params.n;
    let alpha = params.alpha;
    let tau0 = params.tau0;
    let shear = params.x_shift / params.t_horizon;
    let mut terms: Vec<SymbolTerm> = Vec::new();

    terms.push(SymbolTerm {
        coeff: None,
        mult: Box::new(move |tau, _, _| frac_symbol(alpha, tau0, tau)),
    });
    if n > 1 {
        terms.push(SymbolTerm {
            coeff: None,
            mult: Box::new(move |_, xi, _| {
                Complex64::new(xi[..n - 1].iter().map(|v| v * v).sum(), 0.0)
            }),
        });
        for j in 0..n - 1 {
            terms.push(SymbolTerm {
                coeff: Some(Box::new(move |x| Complex64::new(4.0 * x[j], 0.0))),
                mult: Box::new(move |_, xi, _| Complex64::new(xi[j] * xi[n - 1], 0.0)),
            });
        }
        terms.push(SymbolTerm {
            coeff: Some(Box::new(move |x| {
                Complex64::new(1.0 + 4.0 * x[..n - 1].iter().map(|v| v * v).sum::<f64>(), 0.0)
            })),
            mult: Box::new(move |_, xi, _| Complex64::new(xi[n - 1] * xi[n - 1], 0.0)),
        });
        terms.push(SymbolTerm {
            coeff: None,
            mult: Box::new(move |_, xi, _| {
                Complex64::new(0.0, -2.0 * (n as f64 - 1.0) * xi[n - 1])
            }),
        });
    } else {
        terms.push(SymbolTerm {
            coeff: None,
            mult: Box::new(move |_, xi, _| Complex64::new(xi[0] * xi[0], 0.0)),
        });
    }
    terms.push(SymbolTerm {
        coeff: None,
        mult: Box::new(move |tau, xi, _| {
            frac_lower_symbol(alpha, tau0, tau) * (shear * xi[n - 1])
        }),
    });
    terms
}

/// Apply P(t, x; D_t, D_x) to a causal field on a (t, x) grid.
pub fn apply_p(params: &ProblemParams, u: &Field) -> Result<Field> {
    params.validate()?;
    check_causal(u)?;
    if u.grid.space_axes().len() != params.n {
        return Err(LabError::Config(format!(
            "grid has {} space axes, params.n = {}",
            u.grid.space_axes().len(),
            params.n
        )));
    }
    Ok(apply_terms(u, &p_terms(params)))
}

/// Terms of P_psi on a (t, x, z) grid: every monomial of
/// p(x; tau, xi + i|sigma| grad psi) with grad psi = (0, ..., 0, x_n - X),
/// expanded so x_n appears only in coefficients and xi_n, sigma only in
/// multipliers.
fn p_psi_terms(params: &ProblemParams, beta: Option<f64>) -> Vec<SymbolTerm> {
    let n = params.n;
    let x_shift = params.x_shift;
    let alpha = params.alpha;
    let tau0 = params.tau0;
    let shear = params.x_shift / params.t_horizon;
    // |sigma| either comes from the dual z variable or is frozen at |beta|
    let abs_sigma = move |sigma: f64| beta.map_or(sigma.abs(), f64::abs);

    let mut terms = p_terms(params);
    if n > 1 {
        for j in 0..n - 1 {
            terms.push(SymbolTerm {
                coeff: Some(Box::new(move |x| {
                    Complex64::new(4.0 * x[j] * (x[n - 1] - x_shift), 0.0)
                })),
                mult: Box::new(move |_, xi, sigma| {
                    Complex64::new(0.0, xi[j] * abs_sigma(sigma))
                }),
            });
        }
    }
    let f_coeff = move |x: &[f64]| 1.0 + 4.0 * x[..n - 1].iter().map(|v| v * v).sum::<f64>();
    terms.push(SymbolTerm {
        coeff: Some(Box::new(move |x| {
            Complex64::new(2.0 * f_coeff(x) * (x[n - 1] - x_shift), 0.0)
        })),
        mult: Box::new(move |_, xi, sigma| Complex64::new(0.0, xi[n - 1] * abs_sigma(sigma))),
    });
    terms.push(SymbolTerm {
        coeff: Some(Box::new(move |x| {
            let w = x[n - 1] - x_shift;
            Complex64::new(-f_coeff(x) * w * w, 0.0)
        })),
        mult: Box::new(move |_, _, sigma| {
            let s = abs_sigma(sigma);
            Complex64::new(s * s, 0.0)
        }),
    });
    if n > 1 {
        terms.push(SymbolTerm {
            coeff: Some(Box::new(move |x| {
                Complex64::new(2.0 * (n as f64 - 1.0) * (x[n - 1] - x_shift), 0.0)
            })),
            mult: Box::new(move |_, _, sigma| Complex64::new(abs_sigma(sigma), 0.0)),
        });
    }
    terms.push(SymbolTerm {
        coeff: Some(Box::new(move |x| {
            Complex64::new(shear * (x[n - 1] - x_shift), 0.0)
        })),
        mult: Box::new(move |tau, _, sigma| {
            frac_lower_symbol(alpha, tau0, tau) * Complex64::new(0.0, abs_sigma(sigma))
        }),
    });
    terms
}

/// Apply P_psi to a causal field on a (t, x, z) grid.
pub fn apply_p_psi(params: &ProblemParams, u: &Field) -> Result<Field> {
    params.validate()?;
    check_causal(u)?;
    if u.grid.z_axis().is_none() {
        return Err(LabError::Config("apply_p_psi needs a z axis".into()));
    }
    if u.grid.space_axes().len() != params.n {
        return Err(LabError::Config(format!(
            "grid has {} space axes, params.n = {}",
            u.grid.space_axes().len(),
            params.n
        )));
    }
    Ok(apply_terms(u, &p_psi_terms(params, None)))
}

/// Kohn-Nirenberg quantization of p(x; tau, xi + i|beta| grad psi) on a
/// (t, x) grid: P_psi with the dual z variable frozen at beta.
pub fn apply_p_psi_frozen(params: &ProblemParams, u: &Field, beta: f64) -> Result<Field> {
    params.validate()?;
    check_causal(u)?;
    Ok(apply_terms(u, &p_psi_terms(params, Some(beta))))
}

/// Exact operator-level realization of p(x; D_t, D_x + i beta grad psi):
/// every xi_n is replaced by the operator D_n + i beta (x_n - X) before
/// coefficients are applied. In the continuum this equals
/// e^{beta psi} P e^{-beta psi}.
pub fn apply_p_shifted(params: &ProblemParams, w: &Field, beta: f64) -> Result<Field> {
    params.validate()?;
    check_causal(w)?;
    if w.grid.space_axes().len() != params.n {
        return Err(LabError::Config(format!(
            "grid has {} space axes, params.n = {}",
            w.grid.space_axes().len(),
            params.n
        )));
    }
    let n = params.n;
    let x_shift = params.x_shift;
    let alpha = params.alpha;
    let tau0 = params.tau0;
    let b = beta.abs();

    let last_axis = *w
        .grid
        .space_axes()
        .last()
        .ok_or_else(|| LabError::Config("field has no space axis".into()))?;
    let shift_op = |v: &Field| -> Field {
        let mut d = v.apply_multiplier(|_, xi, _| Complex64::new(xi[n - 1], 0.0));
        let coords = w.grid.axes[last_axis].coords();
        let mut add = v.clone();
        for (idx, val) in add.data.indexed_iter_mut() {
            *val *= Complex64::new(0.0, b * (coords[idx[last_axis]] - x_shift));
        }
        d.add_assign(&add);
        d
    };

    let d1 = shift_op(w);
    let d2 = shift_op(&d1);
    let s_axes = w.grid.space_axes();

    let mut out = w.apply_multiplier(move |tau, _, _| frac_symbol(alpha, tau0, tau));
    if n > 1 {
        out.add_assign(&w.apply_multiplier(move |_, xi, _| {
            Complex64::new(xi[..n - 1].iter().map(|v| v * v).sum(), 0.0)
        }));
        for j in 0..n - 1 {
            let axj = s_axes[j];
            let mut t = d1.apply_multiplier(move |_, xi, _| Complex64::new(xi[j], 0.0));
            t.multiply_by_fn(|c| Complex64::new(4.0 * c[axj], 0.0));
            out.add_assign(&t);
        }
        let mut t = d2.clone();
        t.multiply_by_fn(|c| {
            let f = 1.0 + 4.0 * s_axes[..n - 1].iter().map(|&a| c[a] * c[a]).sum::<f64>();
            Complex64::new(f, 0.0)
        });
        out.add_assign(&t);
        out.add_assign(&d1.scaled(Complex64::new(0.0, -2.0 * (n as f64 - 1.0))));
    } else {
        out.add_assign(&d2);
    }
    let shear = params.x_shift / params.t_horizon;
    out.add_assign(
        &d1.apply_multiplier(move |tau, _, _| frac_lower_symbol(alpha, tau0, tau) * shear),
    );
    Ok(out)
}

/// Squared anisotropic norm: the two-variable weight (1+|xi|^s+|tau|^m)^2,
/// or its three-variable form (1+|tau|^m+|xi|^s+|sigma|^s)^2 when a z axis
/// is present, integrated over the dual grid.
pub fn anisotropic_norm_sq(u: &Field, m: f64, s: f64) -> f64 {
    let hat = u.to_fourier();
    let t_ax = hat.grid.time_axis();
    let s_axes = hat.grid.space_axes();
    let z_ax = hat.grid.z_axis();
    let freqs: Vec<Vec<f64>> = hat.grid.axes.iter().map(|a| a.freqs()).collect();
    let measure = hat.grid.dual_cell_measure();
    let mut total = 0.0;
    for (idx, v) in hat.data.indexed_iter() {
        let tau = t_ax.map_or(0.0, |a| freqs[a][idx[a]]);
        let xi_sq: f64 = s_axes.iter().map(|&a| freqs[a][idx[a]].powi(2)).sum();
        let weight = match z_ax {
            Some(za) => {
                let sigma = freqs[za][idx[za]];
                1.0 + tau.abs().powf(m) + xi_sq.sqrt().powf(s) + sigma.abs().powf(s)
            }
            None => 1.0 + xi_sq.sqrt().powf(s) + tau.abs().powf(m),
        };
        total += weight * weight * v.norm_sqr();
    }
    total * measure
}

/// Specification of the quasi-homogeneous partition of unity in the dual
/// variable r = sigma^2 / (|xi|^2 + sigma^2 + |tau|^alpha).
#[derive(Debug, Clone)]
pub struct PartitionSpec {
    pub count: usize,
    pub overlap: f64,
    pub alpha: f64,
    pub delta1: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            count: 2,
            overlap: 0.25,
            alpha: 0.5,
            delta1: 50.0,
        }
    }
}

/// Smooth partition with sum of squares identically 1; piece 0 is
/// supported in {sigma^2 <= 2 delta1 (|xi|^2 + |tau|^alpha)}, the others
/// away from sigma = 0. All pieces are invariant under the anisotropic
/// scaling (xi, tau, sigma) -> (eta xi, eta^{2/alpha} tau, eta sigma).
#[derive(Debug, Clone)]
pub struct Partition {
    spec: PartitionSpec,
    r_lo: f64,
    r_hi: f64,
    seg: f64,
    width: f64,
}

pub fn build_partition(spec: &PartitionSpec) -> Result<Partition> {
    if spec.count < 2 {
        return Err(LabError::Config("partition needs at least 2 pieces".into()));
    }
    if !(spec.overlap > 0.0 && spec.overlap <= 0.5) {
        return Err(LabError::Config("overlap must lie in (0, 0.5]".into()));
    }
    if !(spec.delta1 > 0.0) {
        return Err(LabError::Config("delta1 must be positive".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(LabError::Config("alpha must lie in (0,1)".into()));
    }
    let r_lo = spec.delta1 / (1.0 + spec.delta1);
    let r_hi = 2.0 * spec.delta1 / (1.0 + 2.0 * spec.delta1);
    let seg = (1.0 - r_lo) / (spec.count - 1) as f64;
    let width = spec.overlap * seg;
    let part = Partition {
        spec: spec.clone(),
        r_lo,
        r_hi,
        seg,
        width,
    };
    // the raw bumps must cover [0, 1] for the sum-of-squares normalization
    for i in 0..=1000 {
        let r = i as f64 / 1000.0;
        if part.raw_sum_sq(r) <= 0.0 {
            return Err(LabError::Config(format!(
                "partition pieces do not cover r = {r}"
            )));
        }
    }
    Ok(part)
}

impl Partition {
    pub fn count(&self) -> usize {
        self.spec.count
    }

    fn r(&self, tau: f64, xi: &[f64], sigma: f64) -> f64 {
        let denom =
            xi.iter().map(|v| v * v).sum::<f64>() + sigma * sigma + tau.abs().powf(self.spec.alpha);
        if denom == 0.0 {
            0.0
        } else {
            sigma * sigma / denom
        }
    }

    fn raw(&self, nu: usize, r: f64) -> f64 {
        let count = self.spec.count;
        if nu == 0 {
            return 1.0 - smooth_step((r - self.r_lo) / (self.r_hi - self.r_lo));
        }
        let rise = if nu == 1 {
            smooth_step((r - self.r_lo) / (self.r_hi - self.r_lo))
        } else {
            let edge = self.r_lo + (nu - 1) as f64 * self.seg;
            smooth_step((r - (edge - self.width)) / (2.0 * self.width))
        };
        let fall = if nu == count - 1 {
            1.0
        } else {
            let edge = self.r_lo + nu as f64 * self.seg;
            1.0 - smooth_step((r - (edge - self.width)) / (2.0 * self.width))
        };
        rise * fall
    }

    fn raw_sum_sq(&self, r: f64) -> f64 {
        (0..self.spec.count).map(|nu| self.raw(nu, r).powi(2)).sum()
    }

    /// Evaluate chi_nu at a dual point.
    pub fn eval(&self, nu: usize, tau: f64, xi: &[f64], sigma: f64) -> f64 {
        let r = self.r(tau, xi, sigma);
        self.raw(nu, r) / self.raw_sum_sq(r).sqrt()
    }
}

/// Mode selector for the shifted one-dimensional z-operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftedMode {
    /// e^{-i beta z} h(D_z)^j D_z^k (e^{i beta z} g)
    Raw,
    /// G_j(beta): multiplier (|sigma + beta| - |beta|)^j
    Gj,
    /// H_{j,k}(beta): multiplier (h(sigma + beta) - h(beta))^j sigma^k
    Hjk,
}

/// Apply one of the modulation-shifted z-multipliers to a field on a
/// one-dimensional z grid.
pub fn apply_shifted_z_operator(
    g: &Field,
    beta: f64,
    j: u32,
    k: u32,
    mode: ShiftedMode,
) -> Result<Field> {
    if g.grid.z_axis().is_none() || g.grid.ndim() != 1 {
        return Err(LabError::Config(
            "shifted z-operator expects a 1-D z-axis field".into(),
        ));
    }
    let h_beta = h_multiplier(beta);
    Ok(g.apply_multiplier(move |_, _, sigma| {
        let v = match mode {
            ShiftedMode::Raw => {
                h_multiplier(sigma + beta).powi(j as i32) * (sigma + beta).powi(k as i32)
            }
            ShiftedMode::Gj => ((sigma + beta).abs() - beta.abs()).powi(j as i32),
            ShiftedMode::Hjk => {
                (h_multiplier(sigma + beta) - h_beta).powi(j as i32) * sigma.powi(k as i32)
            }
        };
        Complex64::new(v, 0.0)
    }))
}

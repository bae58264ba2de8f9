//! Forward solver for the anomalous-diffusion equation (L1 Caputo stepping
//! with backward-Euler spatial coupling) and the unique-continuation decay
//! experiment: localization, the cutoff chi, the commutator-zone integral,
//! and the decay-rate fit. The decay fit is a numerical surrogate for the
//! vanishing conclusion, not a proof; the report states the measured
//! exponent against its target.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleman::psi;
use crate::error::{LabError, Result};
use crate::frac_ops::{gamma, l1_weights};
use crate::geometry::{evaluate_cutoff, prepare_localized_field, CutoffSpec};
use crate::grid::{Field, GridSpec, Side};
use crate::params::ProblemParams;
use crate::spectral::apply_p;
use crate::util::ls_slope;

pub type ScalarFn = Box<dyn Fn(f64, &[f64]) -> f64 + Sync>;

/// The initial-boundary value problem on a (t, y)-grid: zero history for
/// t <= 0, first-order perturbation l1 = b . grad + c, optional forcing
/// and Dirichlet data on the spatial box boundary.
pub struct ForwardProblem {
    pub params: ProblemParams,
    pub grid: GridSpec,
    pub l1_b: Vec<ScalarFn>,
    pub l1_c: Option<ScalarFn>,
    pub forcing: Option<ScalarFn>,
    pub dirichlet: Option<ScalarFn>,
}

struct SpatialLayout {
    shape: Vec<usize>,
    strides: Vec<usize>,
    steps: Vec<f64>,
    coords: Vec<Vec<f64>>,
    boundary: Vec<bool>,
}

impl SpatialLayout {
    fn new(grid: &GridSpec) -> Self {
        let s_axes = grid.space_axes();
        let shape: Vec<usize> = s_axes.iter().map(|&a| grid.axes[a].len).collect();
        let mut strides = vec![1usize; shape.len()];
        for d in (0..shape.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        let steps: Vec<f64> = s_axes.iter().map(|&a| grid.axes[a].step).collect();
        let coords: Vec<Vec<f64>> = s_axes.iter().map(|&a| grid.axes[a].coords()).collect();
        let total: usize = shape.iter().product();
        let mut boundary = vec![false; total];
        for (node, flag) in boundary.iter_mut().enumerate() {
            let mut rem = node;
            for d in 0..shape.len() {
                let i = rem / strides[d];
                rem %= strides[d];
                if i == 0 || i == shape[d] - 1 {
                    *flag = true;
                }
            }
        }
        SpatialLayout {
            shape,
            strides,
            steps,
            coords,
            boundary,
        }
    }

    fn total(&self) -> usize {
        self.shape.iter().product()
    }

    fn point(&self, node: usize, out: &mut [f64]) {
        let mut rem = node;
        for d in 0..self.shape.len() {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = self.coords[d][i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Matrix-free BiCGStab; the operator must keep boundary rows as identity.
fn bicgstab<F: Fn(&[f64], &mut [f64])>(
    apply: F,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<()> {
    let n = b.len();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let b_norm = norm(b).max(1e-300);
    if norm(&r) <= tol * b_norm {
        return Ok(());
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        let rho1 = dot(&r_hat, &r);
        if rho1.abs() < 1e-300 {
            return Err(LabError::SolveFailure("BiCGStab breakdown (rho)".into()));
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            return Err(LabError::SolveFailure("BiCGStab breakdown (r̂·v)".into()));
        }
        alpha = rho1 / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * b_norm {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(());
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            return Err(LabError::SolveFailure("BiCGStab breakdown (t·t)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(LabError::SolveFailure("BiCGStab produced non-finite iterate".into()));
        }
        if norm(&r) <= tol * b_norm {
            return Ok(());
        }
        rho = rho1;
    }
    Err(LabError::SolveFailure(format!(
        "BiCGStab stalled after {max_iter} iterations"
    )))
}

/// Implicit L1/backward-Euler time stepping on the problem's (t, y)-grid.
///
/// Samples with t <= 0 are the zero history; at each later sample the
/// system (dt^{-alpha}/Gamma(2-alpha) b_0 - Laplacian - l1) u_m = rhs is
/// solved matrix-free, with Dirichlet values pinned on the box boundary.
pub fn solve_forward(problem: &ForwardProblem, dt: f64) -> Result<Field> {
    let params = &problem.params;
    params.validate()?;
    let grid = &problem.grid;
    let t_ax = grid
        .time_axis()
        .ok_or_else(|| LabError::Config("forward problem needs a time axis".into()))?;
    if grid.space_axes().len() != params.n {
        return Err(LabError::Config(format!(
            "grid has {} space axes, params.n = {}",
            grid.space_axes().len(),
            params.n
        )));
    }
    let t_axis = grid.axes[t_ax];
    if (t_axis.step - dt).abs() > 1e-12 * dt {
        return Err(LabError::Config(format!(
            "dt = {dt} does not match the time-axis step {}",
            t_axis.step
        )));
    }
    let t_coords = t_axis.coords();
    let k0 = t_coords
        .iter()
        .position(|&t| t.abs() < 1e-9 * dt)
        .ok_or_else(|| LabError::Config("t = 0 must be a grid sample".into()))?;

    let layout = SpatialLayout::new(grid);
    let n_nodes = layout.total();
    let n_steps = t_axis.len - 1 - k0;
    let weights = l1_weights(params.alpha, n_steps.max(1));
    let scale = dt.powf(-params.alpha) / gamma(2.0 - params.alpha);
    let ndim = layout.shape.len();

    let mut history: Vec<Vec<f64>> = vec![vec![0.0; n_nodes]];
    let mut point = vec![0.0; ndim];

    for m in 1..=n_steps {
        let t = m as f64 * dt;
        // per-step coefficient and forcing tables
        let mut c_tab = vec![0.0; n_nodes];
        let mut b_tab: Vec<Vec<f64>> = vec![vec![0.0; n_nodes]; ndim];
        let mut rhs = vec![0.0; n_nodes];
        for node in 0..n_nodes {
            layout.point(node, &mut point);
            if layout.boundary[node] {
                rhs[node] = problem
                    .dirichlet
                    .as_ref()
                    .map_or(0.0, |g| g(t, &point));
                continue;
            }
            if let Some(c) = &problem.l1_c {
                c_tab[node] = c(t, &point);
            }
            for (d, b) in problem.l1_b.iter().enumerate() {
                b_tab[d][node] = b(t, &point);
            }
            let mut mem = 0.0;
            for j in 1..m {
                mem += weights[j] * (history[m - j][node] - history[m - j - 1][node]);
            }
            let f = problem.forcing.as_ref().map_or(0.0, |f| f(t, &point));
            rhs[node] = f + scale * (weights[0] * history[m - 1][node] - mem);
        }

        let apply = |u: &[f64], out: &mut [f64]| {
            for node in 0..n_nodes {
                if layout.boundary[node] {
                    out[node] = u[node];
                    continue;
                }
                let mut val = scale * weights[0] * u[node] - c_tab[node] * u[node];
                for d in 0..ndim {
                    let s = layout.strides[d];
                    let h = layout.steps[d];
                    let lap = (u[node - s] - 2.0 * u[node] + u[node + s]) / (h * h);
                    let grad = (u[node + s] - u[node - s]) / (2.0 * h);
                    val -= lap + b_tab[d][node] * grad;
                }
                out[node] = val;
            }
        };

        let mut u = history[m - 1].clone();
        for (node, v) in u.iter_mut().enumerate() {
            if layout.boundary[node] {
                *v = rhs[node];
            }
        }
        bicgstab(apply, &rhs, &mut u, 1e-12, 20 * n_nodes + 200)?;
        history.push(u);
    }

    let mut out = Field::zeros(grid.clone(), Side::Physical);
    let s_axes = grid.space_axes();
    for (idx, v) in out.data.indexed_iter_mut() {
        let k = idx[t_ax];
        if k <= k0 {
            continue;
        }
        let mut node = 0;
        for (d, &ax) in s_axes.iter().enumerate() {
            node += idx[ax] * layout.strides[d];
        }
        *v = Complex64::new(history[k - k0][node], 0.0);
    }
    Ok(out)
}

/// Embed a solver field into a larger (t, y)-grid (zero outside) and apply
/// the theta time window so the result vanishes for t >= T - eps/2.
pub fn embed_and_window(params: &ProblemParams, sol: &Field, target: GridSpec) -> Result<Field> {
    let theta = CutoffSpec::theta(params);
    let src_coords: Vec<Vec<f64>> = sol.grid.axes.iter().map(|a| a.coords()).collect();
    let tgt_coords: Vec<Vec<f64>> = target.axes.iter().map(|a| a.coords()).collect();
    // per target axis: matching source index, if the coordinate coincides
    let mut maps: Vec<Vec<Option<usize>>> = Vec::with_capacity(target.ndim());
    if target.ndim() != sol.grid.ndim() {
        return Err(LabError::Config("embed: dimension mismatch".into()));
    }
    for (d, tc) in tgt_coords.iter().enumerate() {
        let tolerance = 1e-9 * sol.grid.axes[d].step;
        maps.push(
            tc.iter()
                .map(|&c| {
                    src_coords[d]
                        .iter()
                        .position(|&s| (s - c).abs() <= tolerance)
                })
                .collect(),
        );
    }
    let t_ax = target
        .time_axis()
        .ok_or_else(|| LabError::Config("embed: target needs a time axis".into()))?;
    let mut out = Field::zeros(target, Side::Physical);
    let ndim = out.grid.ndim();
    for (idx, v) in out.data.indexed_iter_mut() {
        let mut src_idx = vec![0usize; ndim];
        let mut hit = true;
        for d in 0..ndim {
            match maps[d][idx[d]] {
                Some(j) => src_idx[d] = j,
                None => {
                    hit = false;
                    break;
                }
            }
        }
        if hit {
            let t = tgt_coords[t_ax][idx[t_ax]];
            *v = sol.data[src_idx.as_slice()]
                * Complex64::new(evaluate_cutoff(&theta, t), 0.0);
        }
    }
    Ok(out)
}

/// Max-norm error at t = 1/2 of the manufactured solution
/// u = t^2 y (1 - y) on the unit box: the spatial part is quadratic, so
/// the centered Laplacian is exact and the error is purely temporal.
pub fn mms_error(alpha: f64, nt: usize, ny: usize) -> Result<f64> {
    let dt = 1.0 / nt as f64;
    let grid = GridSpec::new(vec![
        crate::grid::Axis::new(crate::grid::AxisKind::Time, nt, dt, 0.0),
        crate::grid::Axis::new(
            crate::grid::AxisKind::Space,
            ny,
            1.0 / (ny - 1) as f64,
            0.0,
        ),
    ])?;
    let g = gamma(3.0 - alpha);
    let problem = ForwardProblem {
        params: ProblemParams {
            n: 1,
            alpha,
            ..Default::default()
        },
        grid: grid.clone(),
        l1_b: Vec::new(),
        l1_c: None,
        forcing: Some(Box::new(move |t, y| {
            2.0 * t.powf(2.0 - alpha) / g * y[0] * (1.0 - y[0]) + 2.0 * t * t
        })),
        dirichlet: None,
    };
    let u = solve_forward(&problem, dt)?;
    let t_star_idx = nt / 2;
    let t = grid.axes[0].coord(t_star_idx);
    let coords = grid.axes[1].coords();
    let mut worst = 0.0f64;
    for (j, &y) in coords.iter().enumerate() {
        let exact = t * t * y * (1.0 - y);
        let got = u.data[[t_star_idx, j]].re;
        worst = worst.max((got - exact).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UcpReport {
    pub beta: Vec<f64>,
    /// Implied bound on the interior mass: C(u) beta^{-3} e^{-5 beta X^2/16}.
    pub interior_mass: Vec<f64>,
    /// Measured left side: beta^3 int_{x_n <= X/4} e^{9 beta X^2/16} |u|^2.
    pub measured_left: Vec<f64>,
    /// Right side: C(u) e^{beta X^2/4}.
    pub bound: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Plain zone mass int_{x_n <= X/4} |u|^2 (beta-independent).
    pub zone_mass: f64,
    /// Relative commutator mass outside {X/2 < x_n <= X}.
    pub commutator_leak: f64,
    pub fitted_exponent: Option<f64>,
    /// -5 X^2 / 16, the exponent the decay fit is measured against.
    pub target_exponent: f64,
}

impl UcpReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["beta", "interior_mass", "bound", "ratio"])?;
        for i in 0..self.beta.len() {
            w.write_record([
                format!("{}", self.beta[i]),
                format!("{:.17e}", self.interior_mass[i]),
                format!("{:.17e}", self.bound[i]),
                format!("{:.17e}", self.ratio[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn pass(&self) -> bool {
        match self.fitted_exponent {
            Some(e) => e <= self.target_exponent * 0.8 && self.commutator_leak <= 1e-10,
            // the all-zero field is trivially consistent
            None => true,
        }
    }
}

fn masked_mass<F: Fn(f64) -> bool>(field: &Field, weight: impl Fn(f64) -> f64, zone: F) -> f64 {
    let xn_ax = *field.grid.space_axes().last().expect("space axis");
    let coords = field.grid.axes[xn_ax].coords();
    let vol = field.grid.cell_volume();
    field
        .data
        .indexed_iter()
        .filter(|(idx, v)| v.norm_sqr() > 0.0 && zone(coords[idx[xn_ax]]))
        .map(|(idx, v)| weight(coords[idx[xn_ax]]) * v.norm_sqr())
        .sum::<f64>()
        * vol
}

/// The decay experiment: localize u, form chi u and the commutator
/// [P, chi]u = P(chi u) - chi P(u), measure the commutator-zone constant
/// C(u), assemble both sides of the decay inequality per beta, and fit the
/// decay exponent of the implied interior-mass bound.
pub fn ucp_experiment(
    params: &ProblemParams,
    u: &Field,
    beta_list: &[f64],
) -> Result<UcpReport> {
    if beta_list.is_empty() {
        return Err(LabError::Config("empty beta list".into()));
    }
    let x = params.x_shift;
    let v = prepare_localized_field(params, u)?;

    let chi = CutoffSpec::chi(params);
    let xn_ax = *v.grid.space_axes().last().expect("space axis");
    let mut chi_v = v.clone();
    chi_v.multiply_by_fn(|c| Complex64::new(evaluate_cutoff(&chi, c[xn_ax]), 0.0));

    let mut commutator = apply_p(params, &chi_v)?;
    let mut chi_pv = apply_p(params, &v)?;
    chi_pv.multiply_by_fn(|c| Complex64::new(evaluate_cutoff(&chi, c[xn_ax]), 0.0));
    commutator = commutator.sub(&chi_pv);

    let comm_total = masked_mass(&commutator, |_| 1.0, |_| true);
    let comm_zone = masked_mass(&commutator, |_| 1.0, |xn| xn > x / 2.0 && xn <= x);
    let commutator_leak = if comm_total > 0.0 {
        (comm_total - comm_zone) / comm_total
    } else {
        0.0
    };

    // overflow guard: largest exponent that will be formed below
    let max_psi = v.grid.axes[xn_ax]
        .coords()
        .iter()
        .map(|&c| psi(params, c))
        .fold(0.0, f64::max);
    let beta_max = beta_list.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if 2.0 * beta_max * max_psi > 700.0 || beta_max * 9.0 * x * x / 16.0 > 700.0 {
        return Err(LabError::OverflowGuard(format!(
            "beta {beta_max} with max psi {max_psi:.3e}"
        )));
    }

    let zone_mass = masked_mass(&v, |_| 1.0, |xn| xn <= x / 4.0);

    // C(u): max over beta of the commutator-zone weighted integral,
    // renormalized by e^{beta X^2/4}
    let c_u = beta_list
        .iter()
        .map(|&beta| {
            masked_mass(
                &commutator,
                |xn| (2.0 * beta * psi(params, xn)).exp(),
                |xn| xn > x / 2.0 && xn <= x,
            ) * (-beta * x * x / 4.0).exp()
        })
        .fold(0.0f64, f64::max);

    let mut interior_mass = Vec::new();
    let mut measured_left = Vec::new();
    let mut bound = Vec::new();
    let mut ratio = Vec::new();
    for &beta in beta_list {
        let left = beta.powi(3) * (9.0 * beta * x * x / 16.0).exp() * zone_mass;
        let right = c_u * (beta * x * x / 4.0).exp();
        measured_left.push(left);
        bound.push(right);
        ratio.push(if right > 0.0 { left / right } else { 0.0 });
        interior_mass.push(right * (-9.0 * beta * x * x / 16.0).exp() / beta.powi(3));
    }

    let fitted_exponent = if c_u > 0.0 {
        let logs: Vec<f64> = interior_mass.iter().map(|&m| m.ln()).collect();
        Some(ls_slope(beta_list, &logs))
    } else {
        None
    };

    Ok(UcpReport {
        beta: beta_list.to_vec(),
        interior_mass,
        measured_left,
        bound,
        ratio,
        zone_mass,
        commutator_leak,
        fitted_exponent,
        target_exponent: -5.0 * x * x / 16.0,
    })
}

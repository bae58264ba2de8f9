//! Closed-form evaluation of the total and conjugated principal symbols,
//! their gradients, the Poisson bracket, and Monte-Carlo scans of the
//! pointwise symbol inequalities on the anisotropic unit sphere
//! |xi|^2 + sigma^2 + |tau|^alpha = 1.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::frac_ops::{frac_lower_symbol, frac_symbol};
use crate::params::{PhasePoint, ProblemParams};

/// A complex symbol value with its real/imaginary decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolValue {
    pub value: Complex64,
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for SymbolValue {
    fn from(value: Complex64) -> Self {
        SymbolValue {
            value,
            re: value.re,
            im: value.im,
        }
    }
}

/// Total symbol of the transformed, conjugated operator:
///
/// p = (i(tau+i tau0))^alpha + |xi'|^2 + 4 g xi_n + f xi_n^2
///     - 2(n-1) i xi_n + (X/T) i^alpha (tau+i tau0)^{alpha-1} xi_n.
///
/// The -2(n-1) i xi_n term is the lower-order commutator contribution of
/// the quadratic change of variables; it is kept so that the quantization
/// agrees with the coordinate-transformed Laplacian to lower order.
pub fn total_symbol(params: &ProblemParams, pt: &PhasePoint) -> SymbolValue {
    let xi_n = pt.xi_n();
    let quad = pt.xi_prime_norm_sq() + 4.0 * pt.g() * xi_n + pt.f() * xi_n * xi_n;
    let lower = frac_lower_symbol(params.alpha, params.tau0, pt.tau)
        * (params.x_shift / params.t_horizon * xi_n);
    let commutator = Complex64::new(0.0, -2.0 * (params.n as f64 - 1.0) * xi_n);
    SymbolValue::from(
        frac_symbol(params.alpha, params.tau0, pt.tau) + quad + lower + commutator,
    )
}

/// Principal symbol of the conjugated operator P_psi with the fixed phase
/// psi = (x_n - X)^2 / 2:
///
/// p~_psi = (i(tau+i tau0))^alpha + |xi'|^2 + 4 g xi_n + f xi_n^2
///          - f sigma^2 (x_n-X)^2 + i 4 g (x_n-X)|sigma|
///          + i 2 f xi_n (x_n-X)|sigma|.
///
/// Independent of t and z by construction.
pub fn conjugated_principal_symbol(params: &ProblemParams, pt: &PhasePoint) -> SymbolValue {
    let xi_n = pt.xi_n();
    let g = pt.g();
    let f = pt.f();
    let w = pt.x_n() - params.x_shift;
    let s = pt.sigma.abs();
    let re_part = pt.xi_prime_norm_sq() + 4.0 * g * xi_n + f * xi_n * xi_n - f * s * s * w * w;
    let im_part = 4.0 * g * w * s + 2.0 * f * xi_n * w * s;
    SymbolValue::from(
        frac_symbol(params.alpha, params.tau0, pt.tau) + Complex64::new(re_part, im_part),
    )
}

/// The four gradients of Re/Im p~_psi used by the Poisson bracket,
/// each a vector of length n.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGradients {
    pub dxi_re: Vec<f64>,
    pub dx_im: Vec<f64>,
    pub dx_re: Vec<f64>,
    pub dxi_im: Vec<f64>,
}

pub fn symbol_gradients(params: &ProblemParams, pt: &PhasePoint) -> SymbolGradients {
    let n = pt.dim();
    let xi_n = pt.xi_n();
    let g = pt.g();
    let f = pt.f();
    let w = pt.x_n() - params.x_shift;
    let s = pt.sigma.abs();

    let mut dxi_re = vec![0.0; n];
    let mut dx_im = vec![0.0; n];
    let mut dx_re = vec![0.0; n];
    let mut dxi_im = vec![0.0; n];

    for j in 0..n - 1 {
        let xj = pt.x[j];
        let xij = pt.xi[j];
        dxi_re[j] = 2.0 * xij + 4.0 * xi_n * xj;
        dx_im[j] = 4.0 * w * s * xij + 16.0 * xi_n * w * s * xj;
        dx_re[j] = 4.0 * xi_n * xij + 8.0 * xi_n * xi_n * xj - 8.0 * w * w * s * s * xj;
        dxi_im[j] = 4.0 * w * s * xj;
    }
    dxi_re[n - 1] = 4.0 * g + 2.0 * f * xi_n;
    dx_im[n - 1] = 4.0 * g * s + 2.0 * f * xi_n * s;
    dx_re[n - 1] = -2.0 * f * w * s * s;
    dxi_im[n - 1] = 2.0 * f * w * s;

    SymbolGradients {
        dxi_re,
        dx_im,
        dx_re,
        dxi_im,
    }
}

/// Poisson bracket {Re p~_psi, Im p~_psi}, assembled from the two closed-form
/// sums; every term carries a power of |sigma|.
pub fn poisson_bracket(params: &ProblemParams, pt: &PhasePoint) -> f64 {
    let xi_n = pt.xi_n();
    let g = pt.g();
    let f = pt.f();
    let w = pt.x_n() - params.x_shift;
    let s = pt.sigma.abs();
    let xp_sq = pt.x_prime_norm_sq();
    let xip_sq = pt.xi_prime_norm_sq();

    let sum1 = 8.0 * w * s * xip_sq
        + 48.0 * g * xi_n * w * s
        + 64.0 * xp_sq * xi_n * xi_n * w * s
        + 16.0 * g * g * s
        + 16.0 * f * g * xi_n * s
        + 4.0 * f * f * xi_n * xi_n * s;
    let sum2 = 16.0 * g * xi_n * w * s + 32.0 * xp_sq * xi_n * xi_n * w * s
        - 32.0 * xp_sq * w * w * w * s * s * s
        - 4.0 * f * f * w * w * s * s * s;
    sum1 - sum2
}

/// Contraction sum_j (d_xi_j a * d_x_j b - d_x_j a * d_xi_j b) of two
/// gradient pairs; with the analytic gradients this equals `poisson_bracket`.
pub fn bracket_contraction(da_dxi: &[f64], da_dx: &[f64], db_dxi: &[f64], db_dx: &[f64]) -> f64 {
    da_dxi
        .iter()
        .zip(db_dx)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        - da_dx.iter().zip(db_dxi).map(|(a, b)| a * b).sum::<f64>()
}

/// Which pointwise inequality a scan verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// Re (i(tau+i tau0))^alpha >= eps0 |tau|^alpha.
    FracReal,
    /// (x_n-X)^2 sigma^2 >= c (|tau|^alpha + |xi|^2 + sigma^2) on Re p~_psi = 0.
    Characteristic,
    /// {Re p~_psi, Im p~_psi} >= c (|tau|^alpha + |xi|^2 + sigma^2)^{3/2}.
    Bracket,
    /// |p~_psi| >= c (|xi|^2 + sigma^2 + |tau|^alpha) near sigma = 0.
    Elliptic,
    /// eta S^{-1/2} |p~_psi|^2 + 2{Re, Im} >= c S^{3/2} away from sigma = 0.
    Hypoelliptic,
}

impl BoundKind {
    pub fn all() -> [BoundKind; 5] {
        [
            BoundKind::FracReal,
            BoundKind::Characteristic,
            BoundKind::Bracket,
            BoundKind::Elliptic,
            BoundKind::Hypoelliptic,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::FracReal => "frac_real",
            BoundKind::Characteristic => "characteristic",
            BoundKind::Bracket => "bracket",
            BoundKind::Elliptic => "elliptic",
            BoundKind::Hypoelliptic => "hypoelliptic",
        }
    }
}

/// Sample-set descriptor for a bound scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub samples: usize,
    pub seed: u64,
    /// Positivity threshold for the pass flag.
    pub threshold: f64,
    /// Lower bound ratio sigma^2 / (|xi|^2 + |tau|^alpha) for the
    /// sigma-away region; defaults to 5 / X.
    pub delta1: Option<f64>,
    /// Cap on sigma^2 (unit-sphere share) for the elliptic region.
    pub sigma_cap: f64,
    /// Weight of the |p~_psi|^2 term in the hypoelliptic combination.
    pub eta: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            samples: 10_000,
            seed: 7,
            threshold: 1e-3,
            delta1: None,
            sigma_cap: 0.5,
            eta: 50.0,
        }
    }
}

impl ScanConfig {
    pub fn delta1(&self, params: &ProblemParams) -> f64 {
        self.delta1.unwrap_or(5.0 / params.x_shift)
    }
}

/// Result of a symbol-bound scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: String,
    pub worst_ratio: f64,
    pub argmin: PhasePoint,
    pub samples: usize,
    pub skipped: usize,
    pub threshold: f64,
    pub pass: bool,
}

fn sample_base_point(rng: &mut ChaCha8Rng, params: &ProblemParams) -> (Vec<f64>, Vec<f64>) {
    let n = params.n;
    let x_shift = params.x_shift;
    // x' uniform in the ball |x'|^2 <= X/4, x_n uniform in [-X/4, X/4]
    let radius_sq = x_shift / 4.0;
    let mut x = vec![0.0; n];
    loop {
        let mut sq = 0.0;
        for xj in x.iter_mut().take(n - 1) {
            *xj = rng.gen_range(-1.0..1.0) * radius_sq.sqrt();
            sq += *xj * *xj;
        }
        if sq <= radius_sq {
            break;
        }
    }
    x[n - 1] = rng.gen_range(-0.25..0.25) * x_shift;

    // random direction in xi-space
    let mut dir = vec![0.0; n];
    let mut norm = 0.0;
    while norm < 1e-12 {
        norm = 0.0;
        for d in dir.iter_mut() {
            *d = rng.sample::<f64, _>(rand_distr_standard_normal());
            norm += *d * *d;
        }
        norm = norm.sqrt();
    }
    for d in dir.iter_mut() {
        *d /= norm;
    }
    (x, dir)
}

// Box-Muller; avoids pulling in rand_distr for one distribution.
struct StandardNormalish;
impl rand::distributions::Distribution<f64> for StandardNormalish {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    }
}

fn rand_distr_standard_normal() -> StandardNormalish {
    StandardNormalish
}

/// tau with |tau|^alpha = mass (mass >= 0), random sign.
fn tau_from_mass(rng: &mut ChaCha8Rng, alpha: f64, mass: f64) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    sign * mass.powf(1.0 / alpha)
}

/// Solve Re p~_psi(x, xi, tau, sigma) = 0 for sigma >= 0 by bisection.
fn solve_characteristic_sigma(params: &ProblemParams, pt: &mut PhasePoint) -> Result<()> {
    let f = pt.f();
    let w = pt.x_n() - params.x_shift;
    let coeff = f * w * w;
    if coeff < 1e-14 {
        return Err(LabError::RootFindFailure(
            "degenerate sigma coefficient at x_n = X".into(),
        ));
    }
    let re_at = |sigma: f64| {
        pt_re_with_sigma(params, pt, sigma)
    };
    let mut hi = 1.0;
    let mut tries = 0;
    while re_at(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(LabError::RootFindFailure(
                "no sign change while expanding the sigma bracket".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if re_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    pt.sigma = 0.5 * (lo + hi);
    Ok(())
}

fn pt_re_with_sigma(params: &ProblemParams, pt: &PhasePoint, sigma: f64) -> f64 {
    let mut q = pt.clone();
    q.sigma = sigma;
    conjugated_principal_symbol(params, &q).re
}

fn scan_ratio(kind: BoundKind, params: &ProblemParams, cfg: &ScanConfig, pt: &PhasePoint) -> f64 {
    let s_total = pt.xi_norm_sq() + pt.sigma * pt.sigma + pt.tau.abs().powf(params.alpha);
    match kind {
        BoundKind::FracReal => {
            frac_symbol(params.alpha, params.tau0, pt.tau).re / pt.tau.abs().powf(params.alpha)
        }
        BoundKind::Characteristic => {
            let w = pt.x_n() - params.x_shift;
            w * w * pt.sigma * pt.sigma / s_total
        }
        BoundKind::Bracket => poisson_bracket(params, pt) / s_total.powf(1.5),
        BoundKind::Elliptic => conjugated_principal_symbol(params, pt).value.norm() / s_total,
        BoundKind::Hypoelliptic => {
            let p = conjugated_principal_symbol(params, pt).value.norm_sqr();
            (cfg.eta * p / s_total.sqrt() + 2.0 * poisson_bracket(params, pt)) / s_total.powf(1.5)
        }
    }
}

/// Scan one of the pointwise symbol bounds over its admissible region and
/// report the worst left/right ratio. By anisotropic homogeneity of the
/// principal parts, positivity on the unit sphere certifies the bound
/// globally.
pub fn verify_symbol_bounds(
    kind: BoundKind,
    params: &ProblemParams,
    cfg: &ScanConfig,
) -> Result<BoundReport> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ kind.name().len() as u64);
    let delta1 = cfg.delta1(params);
    let n = params.n;

    let mut points = Vec::with_capacity(cfg.samples);
    let mut skipped = 0usize;

    match kind {
        BoundKind::FracReal => {
            // +/- logspace(-2, 4) in |tau|; x, xi, sigma irrelevant
            let half = (cfg.samples / 2).max(2);
            for i in 0..half {
                let e = -2.0 + 6.0 * i as f64 / (half - 1) as f64;
                let t = 10f64.powf(e);
                for sign in [1.0, -1.0] {
                    points.push(PhasePoint::new(vec![0.0; n], sign * t, vec![0.0; n], 0.0));
                }
            }
        }
        BoundKind::Characteristic => {
            while points.len() < cfg.samples {
                let (x, dir) = sample_base_point(&mut rng, params);
                // split unit mass between |xi|^2 and |tau|^alpha
                let q: f64 = rng.gen_range(0.0..1.0);
                let xi: Vec<f64> = dir.iter().map(|d| d * q.sqrt()).collect();
                let tau = tau_from_mass(&mut rng, params.alpha, 1.0 - q);
                let mut pt = PhasePoint::new(x, tau, xi, 0.0);
                match solve_characteristic_sigma(params, &mut pt) {
                    Ok(()) => points.push(pt),
                    Err(_) => {
                        skipped += 1;
                        if skipped > 100 * cfg.samples {
                            return Err(LabError::EmptySampleSet(
                                "characteristic root finding failed for every sample".into(),
                            ));
                        }
                    }
                }
            }
        }
        BoundKind::Bracket | BoundKind::Hypoelliptic => {
            // sigma-away region: sigma^2 >= delta1 (|xi|^2 + |tau|^alpha),
            // constructed directly on the unit sphere
            let sigma_sq_min = delta1 / (1.0 + delta1);
            for _ in 0..cfg.samples {
                let (x, dir) = sample_base_point(&mut rng, params);
                let sigma_sq = rng.gen_range(sigma_sq_min..1.0);
                let rest = 1.0 - sigma_sq;
                let q: f64 = rng.gen_range(0.0..1.0);
                let xi: Vec<f64> = dir.iter().map(|d| d * (q * rest).sqrt()).collect();
                let tau = tau_from_mass(&mut rng, params.alpha, (1.0 - q) * rest);
                let sigma = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * sigma_sq.sqrt();
                points.push(PhasePoint::new(x, tau, xi, sigma));
            }
        }
        BoundKind::Elliptic => {
            for _ in 0..cfg.samples {
                let (x, dir) = sample_base_point(&mut rng, params);
                let sigma_sq = rng.gen_range(0.0..cfg.sigma_cap);
                let rest = 1.0 - sigma_sq;
                let q: f64 = rng.gen_range(0.0..1.0);
                let xi: Vec<f64> = dir.iter().map(|d| d * (q * rest).sqrt()).collect();
                let tau = tau_from_mass(&mut rng, params.alpha, (1.0 - q) * rest);
                let sigma = sigma_sq.sqrt();
                points.push(PhasePoint::new(x, tau, xi, sigma));
            }
        }
    }

    if points.is_empty() {
        return Err(LabError::EmptySampleSet(format!(
            "no admissible samples for {}",
            kind.name()
        )));
    }

    let ratios = crate::util::parallel_map(&points, |pt| scan_ratio(kind, params, cfg, pt));
    let (mut worst, mut arg) = (f64::INFINITY, 0usize);
    for (i, &r) in ratios.iter().enumerate() {
        if r < worst {
            worst = r;
            arg = i;
        }
    }

    Ok(BoundReport {
        kind: kind.name().to_string(),
        worst_ratio: worst,
        argmin: points[arg].clone(),
        samples: points.len(),
        skipped,
        threshold: cfg.threshold,
        pass: worst >= cfg.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> ProblemParams {
        ProblemParams::default()
    }

    #[test]
    fn total_symbol_hand_value() {
        // alpha=1/2, tau0=-1, X=0.1, T=1, x=0, xi=e_n, tau=0 -> 2 + 0.1i
        // (n=1 so the commutator term vanishes)
        let p = ProblemParams {
            n: 1,
            ..params()
        };
        let pt = PhasePoint::new(vec![0.0], 0.0, vec![1.0], 0.0);
        let v = total_symbol(&p, &pt);
        assert_relative_eq!(v.re, 2.0, max_relative = 1e-12);
        assert_relative_eq!(v.im, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn total_symbol_fractional_only() {
        let p = params();
        let pt = PhasePoint::new(vec![0.3, 0.0], 0.0, vec![0.0, 0.0], 0.0);
        let v = total_symbol(&p, &pt);
        assert_relative_eq!(v.re, (-p.tau0).powf(p.alpha), max_relative = 1e-13);
        assert!(v.im.abs() < 1e-13);
    }

    #[test]
    fn total_symbol_x_prime_enters_only_with_xi_n() {
        let p = params();
        let a = PhasePoint::new(vec![0.0, 0.1], 0.7, vec![0.4, 0.0], 0.0);
        let b = PhasePoint::new(vec![0.12, 0.1], 0.7, vec![0.4, 0.0], 0.0);
        assert_eq!(total_symbol(&p, &a).value, total_symbol(&p, &b).value);
    }

    #[test]
    fn conjugated_symbol_hand_value() {
        // x=0, xi=(0,1), sigma=1, tau=0 -> 1.99 - 0.2i
        let p = params();
        let pt = PhasePoint::new(vec![0.0, 0.0], 0.0, vec![0.0, 1.0], 1.0);
        let v = conjugated_principal_symbol(&p, &pt);
        assert_relative_eq!(v.re, 1.99, max_relative = 1e-12);
        assert_relative_eq!(v.im, -0.2, max_relative = 1e-12);
    }

    #[test]
    fn conjugated_sigma_zero_is_principal_part_of_total() {
        let p = ProblemParams { n: 1, ..params() };
        let pt = PhasePoint::new(vec![0.03], 0.4, vec![0.8], 0.0);
        let principal = conjugated_principal_symbol(&p, &pt).value;
        let lower = frac_lower_symbol(p.alpha, p.tau0, pt.tau)
            * (p.x_shift / p.t_horizon * pt.xi_n());
        let total = total_symbol(&p, &pt).value;
        assert!((total - lower - principal).norm() < 1e-13);
    }

    #[test]
    fn conjugated_sigma_scaling_degrees() {
        // doubling sigma at xi=0, g=0 quadruples the real sigma-term and
        // doubles the imaginary part
        let p = params();
        let base = PhasePoint::new(vec![0.1, 0.02], 0.0, vec![0.0, 0.5], 1.0);
        let mut dbl = base.clone();
        dbl.sigma = 2.0;
        let frac_re = frac_symbol(p.alpha, p.tau0, 0.0).re;
        let quad = base.f() * 0.25;
        let v1 = conjugated_principal_symbol(&p, &base);
        let v2 = conjugated_principal_symbol(&p, &dbl);
        let sigma_re_1 = v1.re - frac_re - quad;
        let sigma_re_2 = v2.re - frac_re - quad;
        assert_relative_eq!(sigma_re_2, 4.0 * sigma_re_1, max_relative = 1e-12);
        assert_relative_eq!(v2.im, 2.0 * v1.im, max_relative = 1e-12);
    }

    #[test]
    fn gradients_vanish_with_sigma() {
        let p = params();
        let pt = PhasePoint::new(vec![0.05, 0.01], 0.3, vec![0.2, 0.7], 0.0);
        let g = symbol_gradients(&p, &pt);
        assert!(g.dx_im.iter().all(|&v| v == 0.0));
        assert!(g.dxi_im.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_at_origin_directions() {
        // x'=0, xi'=0 -> grad_xi Re = (0, ..., 0, 2 xi_n)
        let p = params();
        let pt = PhasePoint::new(vec![0.0, 0.02], 0.1, vec![0.0, 0.9], 0.5);
        let g = symbol_gradients(&p, &pt);
        assert_eq!(g.dxi_re[0], 0.0);
        assert_relative_eq!(g.dxi_re[1], 2.0 * 0.9, max_relative = 1e-14);
    }

    fn fd_gradients(p: &ProblemParams, pt: &PhasePoint, h: f64) -> SymbolGradients {
        let n = pt.dim();
        let mut out = SymbolGradients {
            dxi_re: vec![0.0; n],
            dx_im: vec![0.0; n],
            dx_re: vec![0.0; n],
            dxi_im: vec![0.0; n],
        };
        for j in 0..n {
            let mut a = pt.clone();
            let mut b = pt.clone();
            a.xi[j] += h;
            b.xi[j] -= h;
            let va = conjugated_principal_symbol(p, &a);
            let vb = conjugated_principal_symbol(p, &b);
            out.dxi_re[j] = (va.re - vb.re) / (2.0 * h);
            out.dxi_im[j] = (va.im - vb.im) / (2.0 * h);
            let mut c = pt.clone();
            let mut d = pt.clone();
            c.x[j] += h;
            d.x[j] -= h;
            let vc = conjugated_principal_symbol(p, &c);
            let vd = conjugated_principal_symbol(p, &d);
            out.dx_re[j] = (vc.re - vd.re) / (2.0 * h);
            out.dx_im[j] = (vc.im - vd.im) / (2.0 * h);
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let pt = PhasePoint::new(
                vec![rng.gen_range(-0.15..0.15), rng.gen_range(-0.025..0.025)],
                rng.gen_range(-2.0..2.0),
                vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                rng.gen_range(0.1..3.0),
            );
            let ana = symbol_gradients(&p, &pt);
            let fd = fd_gradients(&p, &pt, 1e-5);
            for j in 0..2 {
                for (a, b) in [
                    (ana.dxi_re[j], fd.dxi_re[j]),
                    (ana.dx_im[j], fd.dx_im[j]),
                    (ana.dx_re[j], fd.dx_re[j]),
                    (ana.dxi_im[j], fd.dxi_im[j]),
                ] {
                    let scale = a.abs().max(1.0);
                    assert!(
                        (a - b).abs() <= 1e-6 * scale,
                        "gradient mismatch {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn bracket_hand_value() {
        // x'=0, xi'=0, xi_n=1, sigma=1, x_n=0 -> 4 + 4 X^2 = 4.04
        let p = params();
        let pt = PhasePoint::new(vec![0.0, 0.0], 0.0, vec![0.0, 1.0], 1.0);
        assert_relative_eq!(poisson_bracket(&p, &pt), 4.04, max_relative = 1e-12);
    }

    #[test]
    fn bracket_vanishes_at_sigma_zero() {
        let p = params();
        let pt = PhasePoint::new(vec![0.1, 0.01], 0.4, vec![0.3, 0.9], 0.0);
        assert_eq!(poisson_bracket(&p, &pt), 0.0);
    }

    #[test]
    fn bracket_equals_gradient_contraction_and_is_antisymmetric() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let pt = PhasePoint::new(
                vec![rng.gen_range(-0.15..0.15), rng.gen_range(-0.025..0.025)],
                rng.gen_range(-2.0..2.0),
                vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                rng.gen_range(-3.0..3.0),
            );
            let g = symbol_gradients(&p, &pt);
            let direct = poisson_bracket(&p, &pt);
            let contracted = bracket_contraction(&g.dxi_re, &g.dx_re, &g.dxi_im, &g.dx_im);
            let swapped = bracket_contraction(&g.dxi_im, &g.dx_im, &g.dxi_re, &g.dx_re);
            let scale = direct.abs().max(1.0);
            assert!((direct - contracted).abs() <= 1e-11 * scale);
            assert!((contracted + swapped).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn anisotropic_homogeneity_of_principal_parts() {
        let p = params();
        let pt = PhasePoint::new(
            vec![0.1, 0.02],
            0.6,
            vec![0.4, -0.8],
            1.3,
        );
        let frac_re = |tau: f64| frac_symbol(p.alpha, p.tau0, tau).re;
        for &eta in &[2.0_f64, 10.0] {
            let scaled = PhasePoint::new(
                pt.x.clone(),
                pt.tau * eta.powf(2.0 / p.alpha),
                pt.xi.iter().map(|v| v * eta).collect(),
                pt.sigma * eta,
            );
            // principal sigma,xi-part of Re p~_psi scales with degree 2
            let re0 = conjugated_principal_symbol(&p, &pt).re - frac_re(pt.tau);
            let re1 = conjugated_principal_symbol(&p, &scaled).re - frac_re(scaled.tau);
            assert_relative_eq!(re1, eta * eta * re0, max_relative = 1e-10);
            // the bracket scales with degree 3
            let b0 = poisson_bracket(&p, &pt);
            let b1 = poisson_bracket(&p, &scaled);
            assert_relative_eq!(b1, eta * eta * eta * b0, max_relative = 1e-10);
            // the fractional weight scales with degree 2
            assert_relative_eq!(
                scaled.tau.abs().powf(p.alpha),
                eta * eta * pt.tau.abs().powf(p.alpha),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn frac_real_scan_tail() {
        let p = params();
        let cfg = ScanConfig {
            samples: 2000,
            ..Default::default()
        };
        let report = verify_symbol_bounds(BoundKind::FracReal, &p, &cfg).unwrap();
        assert!(report.pass);
        let tail = (p.alpha * std::f64::consts::FRAC_PI_2).cos();
        assert!(
            report.worst_ratio >= tail - 0.01 && report.worst_ratio <= tail * 1.05,
            "worst {} vs tail {}",
            report.worst_ratio,
            tail
        );
    }

    #[test]
    fn all_scans_pass_at_defaults() {
        let p = params();
        let cfg = ScanConfig {
            samples: 2000,
            ..Default::default()
        };
        for kind in BoundKind::all() {
            let report = verify_symbol_bounds(kind, &p, &cfg).unwrap();
            assert!(
                report.pass,
                "{} failed: worst_ratio {}",
                report.kind, report.worst_ratio
            );
        }
    }

    #[test]
    fn hypoelliptic_reduces_to_bracket_on_characteristic_points() {
        // with eta = 0 at a characteristic point the combination is 2{Re,Im}
        let p = params();
        let mut pt = PhasePoint::new(vec![0.05, 0.01], 0.3, vec![0.2, 0.4], 0.0);
        solve_characteristic_sigma(&p, &mut pt).unwrap();
        let s = pt.xi_norm_sq() + pt.sigma * pt.sigma + pt.tau.abs().powf(p.alpha);
        let cfg = ScanConfig {
            eta: 0.0,
            ..Default::default()
        };
        let r = scan_ratio(BoundKind::Hypoelliptic, &p, &cfg, &pt);
        let re = conjugated_principal_symbol(&p, &pt).re;
        assert!(re.abs() < 1e-10);
        // |p~_psi|^2 = Im^2 only, and eta = 0 kills it entirely
        assert_relative_eq!(
            r,
            2.0 * poisson_bracket(&p, &pt) / s.powf(1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn report_serializes_with_expected_fields() {
        let p = params();
        let cfg = ScanConfig {
            samples: 100,
            ..Default::default()
        };
        let report = verify_symbol_bounds(BoundKind::Elliptic, &p, &cfg).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["kind", "worst_ratio", "argmin", "samples", "threshold", "pass"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json["argmin"].get("sigma").is_some());
    }
}

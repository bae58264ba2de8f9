//! Uniform tensor grids, complex fields, and the discrete Fourier
//! transform pair used for all multiplier quantizations.
//!
//! Convention: u^(tau, xi) = integral of e^{-i t tau - i x.xi} u dt dx,
//! approximated by scaled FFTs on the grid. Dual frequencies along an axis
//! of length N and spacing d are 2 pi k / (N d) with k in wrap-around
//! order, so the sigma = 0 / tau = 0 grid point is exact.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, Axis as NdAxis, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    Time,
    Space,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub len: usize,
    pub step: f64,
    pub origin: f64,
}

impl Axis {
    pub fn new(kind: AxisKind, len: usize, step: f64, origin: f64) -> Self {
        Axis {
            kind,
            len,
            step,
            origin,
        }
    }

    /// Symmetric axis of given physical half-width: [-half, half).
    pub fn centered(kind: AxisKind, len: usize, half: f64) -> Self {
        let step = 2.0 * half / len as f64;
        Axis::new(kind, len, step, -half)
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.coord(j)).collect()
    }

    /// Dual frequency of index k in FFT (wrap-around) order.
    pub fn freq(&self, k: usize) -> f64 {
        let m = if k <= self.len / 2 {
            k as i64
        } else {
            k as i64 - self.len as i64
        };
        std::f64::consts::TAU * m as f64 / (self.len as f64 * self.step)
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.freq(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(LabError::Config("grid needs at least one axis".into()));
        }
        for ax in &axes {
            if !ax.len.is_power_of_two() {
                return Err(LabError::Config(format!(
                    "axis length {} is not a power of two",
                    ax.len
                )));
            }
            if !(ax.step > 0.0) {
                return Err(LabError::Config("axis step must be positive".into()));
            }
        }
        Ok(GridSpec { axes })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn time_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.kind == AxisKind::Time)
    }

    pub fn space_axes(&self) -> Vec<usize> {
        self.axes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AxisKind::Space)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn z_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.kind == AxisKind::Z)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    /// Dual-cell measure including the (2 pi)^{-d} Plancherel factor.
    pub fn dual_cell_measure(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| 1.0 / (a.len as f64 * a.step))
            .product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Physical,
    Fourier,
}

/// Complex samples on a `GridSpec`, tagged physical- or Fourier-side.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub data: ArrayD<Complex64>,
    pub side: Side,
}

impl Field {
    pub fn zeros(grid: GridSpec, side: Side) -> Self {
        let shape = grid.shape();
        Field {
            grid,
            data: ArrayD::zeros(IxDyn(&shape)),
            side,
        }
    }

    /// Build a physical-side field by sampling `f` at grid coordinates.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let mut field = Field::zeros(grid, Side::Physical);
        let coords: Vec<Vec<f64>> = field.grid.axes.iter().map(|a| a.coords()).collect();
        let mut buf = vec![0.0; field.grid.ndim()];
        for (idx, v) in field.data.indexed_iter_mut() {
            for (d, c) in buf.iter_mut().enumerate() {
                *c = coords[d][idx[d]];
            }
            *v = f(&buf);
        }
        field
    }

    pub fn from_real_fn<F: Fn(&[f64]) -> f64>(grid: GridSpec, f: F) -> Self {
        Field::from_fn(grid, |c| Complex64::new(f(c), 0.0))
    }

    fn transform(&self, forward: bool) -> Field {
        let mut data = self.data.clone();
        let mut planner = FftPlanner::<f64>::new();
        for (ax, axis) in self.grid.axes.iter().enumerate() {
            let n = axis.len;
            let fft = if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            };
            let freqs = axis.freqs();
            // per-axis scale: forward d * e^{-i w o}, inverse e^{+i w o}/(n d)
            let scales: Vec<Complex64> = freqs
                .iter()
                .map(|&w| {
                    if forward {
                        Complex64::from_polar(axis.step, -w * axis.origin)
                    } else {
                        Complex64::from_polar(
                            1.0 / (n as f64 * axis.step),
                            w * axis.origin,
                        )
                    }
                })
                .collect();
            let mut buf = vec![Complex64::default(); n];
            for mut lane in data.lanes_mut(NdAxis(ax)) {
                for (b, v) in buf.iter_mut().zip(lane.iter()) {
                    *b = *v;
                }
                if forward {
                    fft.process(&mut buf);
                    for (b, s) in buf.iter_mut().zip(&scales) {
                        *b *= s;
                    }
                } else {
                    for (b, s) in buf.iter_mut().zip(&scales) {
                        *b *= s;
                    }
                    fft.process(&mut buf);
                }
                for (v, b) in lane.iter_mut().zip(&buf) {
                    *v = *b;
                }
            }
        }
        Field {
            grid: self.grid.clone(),
            data,
            side: if forward { Side::Fourier } else { Side::Physical },
        }
    }

    pub fn to_fourier(&self) -> Field {
        match self.side {
            Side::Fourier => self.clone(),
            Side::Physical => self.transform(true),
        }
    }

    pub fn to_physical(&self) -> Field {
        match self.side {
            Side::Physical => self.clone(),
            Side::Fourier => self.transform(false),
        }
    }

    /// Squared L2 norm with the side-appropriate quadrature measure;
    /// Parseval-consistent between the two sides.
    pub fn l2_norm_sq(&self) -> f64 {
        let measure = match self.side {
            Side::Physical => self.grid.cell_volume(),
            Side::Fourier => self.grid.dual_cell_measure(),
        };
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * measure
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            data: &self.data * c,
            side: self.side,
        }
    }

    pub fn add_assign(&mut self, other: &Field) {
        assert_eq!(self.side, other.side);
        self.data += &other.data;
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.side, other.side);
        Field {
            grid: self.grid.clone(),
            data: &self.data - &other.data,
            side: self.side,
        }
    }

    /// Pointwise multiply (physical side) by a function of the grid
    /// coordinates.
    pub fn multiply_by_fn<F: Fn(&[f64]) -> Complex64>(&mut self, f: F) {
        assert_eq!(self.side, Side::Physical);
        let coords: Vec<Vec<f64>> = self.grid.axes.iter().map(|a| a.coords()).collect();
        let mut buf = vec![0.0; self.grid.ndim()];
        for (idx, v) in self.data.indexed_iter_mut() {
            for (d, c) in buf.iter_mut().enumerate() {
                *c = coords[d][idx[d]];
            }
            *v *= f(&buf);
        }
    }

    /// Apply a Fourier multiplier m(tau, xi, sigma); returns a field on the
    /// same side as the input.
    pub fn apply_multiplier<F: Fn(f64, &[f64], f64) -> Complex64>(&self, m: F) -> Field {
        let mut hat = self.to_fourier();
        let t_ax = hat.grid.time_axis();
        let s_axes = hat.grid.space_axes();
        let z_ax = hat.grid.z_axis();
        let freqs: Vec<Vec<f64>> = hat.grid.axes.iter().map(|a| a.freqs()).collect();
        let mut xi = vec![0.0; s_axes.len()];
        for (idx, v) in hat.data.indexed_iter_mut() {
            let tau = t_ax.map_or(0.0, |a| freqs[a][idx[a]]);
            for (d, &ax) in s_axes.iter().enumerate() {
                xi[d] = freqs[ax][idx[ax]];
            }
            let sigma = z_ax.map_or(0.0, |a| freqs[a][idx[a]]);
            *v *= m(tau, &xi, sigma);
        }
        match self.side {
            Side::Physical => hat.to_physical(),
            Side::Fourier => hat,
        }
    }

    /// Zero every sample whose time coordinate is <= 0.
    pub fn mask_nonpositive_time(&mut self) {
        assert_eq!(self.side, Side::Physical);
        let Some(t_ax) = self.grid.time_axis() else {
            return;
        };
        let coords = self.grid.axes[t_ax].coords();
        for (idx, v) in self.data.indexed_iter_mut() {
            if coords[idx[t_ax]] <= 0.0 {
                *v = Complex64::default();
            }
        }
    }

    /// Largest |u| over samples with time coordinate <= 0.
    pub fn max_abs_nonpositive_time(&self) -> f64 {
        let Some(t_ax) = self.grid.time_axis() else {
            return 0.0;
        };
        let coords = self.grid.axes[t_ax].coords();
        let mut worst = 0.0f64;
        for (idx, v) in self.data.indexed_iter() {
            if coords[idx[t_ax]] <= 0.0 {
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldSidecar {
    side: Side,
    axes: Vec<Axis>,
    samples: usize,
}

const FIELD_MAGIC: &[u8; 4] = b"CLF1";

/// Flat binary container: header (axis sizes, spacings, side flag) followed
/// by little-endian complex64 (f32 re/im) pairs, plus a JSON sidecar.
pub fn write_field(field: &Field, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(FIELD_MAGIC)?;
    out.write_all(&[match field.side {
        Side::Physical => 0u8,
        Side::Fourier => 1u8,
    }])?;
    out.write_all(&[field.grid.ndim() as u8])?;
    for ax in &field.grid.axes {
        let kind = match ax.kind {
            AxisKind::Time => 0u8,
            AxisKind::Space => 1u8,
            AxisKind::Z => 2u8,
        };
        out.write_all(&[kind])?;
        out.write_all(&(ax.len as u64).to_le_bytes())?;
        out.write_all(&ax.step.to_le_bytes())?;
        out.write_all(&ax.origin.to_le_bytes())?;
    }
    for v in field.data.iter() {
        out.write_all(&(v.re as f32).to_le_bytes())?;
        out.write_all(&(v.im as f32).to_le_bytes())?;
    }
    let sidecar = FieldSidecar {
        side: field.side,
        axes: field.grid.axes.clone(),
        samples: field.data.len(),
    };
    let json_path = path.with_extension("json");
    std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(LabError::Config("bad field container magic".into()));
    }
    let mut b = [0u8; 1];
    input.read_exact(&mut b)?;
    let side = match b[0] {
        0 => Side::Physical,
        1 => Side::Fourier,
        _ => return Err(LabError::Config("bad side flag".into())),
    };
    input.read_exact(&mut b)?;
    let ndim = b[0] as usize;
    let mut axes = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        input.read_exact(&mut b)?;
        let kind = match b[0] {
            0 => AxisKind::Time,
            1 => AxisKind::Space,
            2 => AxisKind::Z,
            _ => return Err(LabError::Config("bad axis kind".into())),
        };
        let mut u = [0u8; 8];
        input.read_exact(&mut u)?;
        let len = u64::from_le_bytes(u) as usize;
        input.read_exact(&mut u)?;
        let step = f64::from_le_bytes(u);
        input.read_exact(&mut u)?;
        let origin = f64::from_le_bytes(u);
        axes.push(Axis::new(kind, len, step, origin));
    }
    let grid = GridSpec::new(axes)?;
    let count: usize = grid.shape().iter().product();
    let mut data = Vec::with_capacity(count);
    let mut f = [0u8; 4];
    for _ in 0..count {
        input.read_exact(&mut f)?;
        let re = f32::from_le_bytes(f) as f64;
        input.read_exact(&mut f)?;
        let im = f32::from_le_bytes(f) as f64;
        data.push(Complex64::new(re, im));
    }
    Ok(Field {
        data: ArrayD::from_shape_vec(IxDyn(&grid.shape()), data)
            .map_err(|e| LabError::Config(format!("shape mismatch: {e}")))?,
        grid,
        side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_1d(len: usize) -> GridSpec {
        GridSpec::new(vec![Axis::centered(AxisKind::Time, len, 4.0)]).unwrap()
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridSpec::new(vec![Axis::new(AxisKind::Time, 48, 0.1, 0.0)]).is_err());
    }

    #[test]
    fn fft_round_trip() {
        let grid = GridSpec::new(vec![
            Axis::centered(AxisKind::Time, 32, 3.0),
            Axis::centered(AxisKind::Space, 16, 2.0),
        ])
        .unwrap();
        let u = Field::from_real_fn(grid, |c| (-c[0] * c[0] - 2.0 * c[1] * c[1]).exp());
        let round = u.to_fourier().to_physical();
        let err = round.sub(&u).max_abs() / u.max_abs();
        assert!(err < 1e-12, "round-trip error {err}");
    }

    #[test]
    fn parseval_between_sides() {
        let grid = grid_1d(64);
        let u = Field::from_real_fn(grid, |c| (-c[0] * c[0]).exp());
        assert_relative_eq!(
            u.l2_norm_sq(),
            u.to_fourier().l2_norm_sq(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn identity_multiplier_is_identity() {
        let grid = grid_1d(32);
        let u = Field::from_real_fn(grid, |c| (-c[0] * c[0]).exp());
        let v = u.apply_multiplier(|_, _, _| Complex64::new(1.0, 0.0));
        assert!(v.sub(&u).max_abs() < 1e-12);
    }

    #[test]
    fn derivative_multiplier_matches_analytic() {
        // m = i tau on a smooth window: spectral derivative theorem
        let grid = GridSpec::new(vec![Axis::centered(AxisKind::Time, 256, 8.0)]).unwrap();
        let u = Field::from_real_fn(grid.clone(), |c| (-c[0] * c[0] / 2.0).exp() * c[0].sin());
        let du = u.apply_multiplier(|tau, _, _| Complex64::new(0.0, tau));
        let exact = Field::from_real_fn(grid, |c| {
            (-c[0] * c[0] / 2.0).exp() * (c[0].cos() - c[0] * c[0].sin())
        });
        let err = du.sub(&exact).max_abs() / exact.max_abs();
        assert!(err < 1e-9, "spectral derivative error {err}");
    }

    #[test]
    fn field_container_round_trip() {
        let grid = GridSpec::new(vec![
            Axis::centered(AxisKind::Time, 8, 1.0),
            Axis::centered(AxisKind::Space, 4, 1.0),
        ])
        .unwrap();
        let u = Field::from_fn(grid, |c| Complex64::new(c[0], c[1]));
        let dir = std::env::temp_dir().join("carleman_lab_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.field");
        write_field(&u, &path).unwrap();
        let v = read_field(&path).unwrap();
        assert_eq!(v.grid, u.grid);
        assert_eq!(v.side, u.side);
        // storage is f32, so compare at single precision
        let err = v.sub(&u).max_abs();
        assert!(err < 1e-6 * u.max_abs().max(1.0));
        assert!(path.with_extension("json").exists());
    }
}

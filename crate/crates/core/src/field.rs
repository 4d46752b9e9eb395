//! Cell-centred finite-volume grids on an interval or a ball (radially
//! symmetric), discrete fields and the energy functional
//! `Φ = (1/p)∫(u+α)^p + (1/q)∫|∇v|^{2q}`.
//!
//! Cells are `[x_i, x_{i+1}]` with `x_i = i h`; centres sit at `(i+1/2)h`,
//! so radial grids never touch `r = 0`. Ball cell volumes are exact shell
//! volumes `ωₙ(x_{i+1}ⁿ - x_iⁿ)`, which sum to `|Ω|` up to rounding.
//!
//! Cell gradients are centred differences with reflected ghost cells, so
//! the boundary cells see half the one-sided slope and the normal
//! derivative on `∂Ω` is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{unit_ball_volume, unit_sphere_area, DomainSpec, Geometry};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("grid needs at least {MIN_CELLS} cells, got {0}")]
    TooFewCells(usize),
    #[error("geometry {0} cannot be discretised; use an interval or a ball")]
    UnsupportedGeometry(String),
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("energy samples must have strictly increasing times ({prev} then {next})")]
    NonIncreasingTime { prev: f64, next: f64 },
}

pub type Result<T> = std::result::Result<T, FieldError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    spec: DomainSpec,
    /// 1 for intervals, n for balls
    dim: u32,
    h: f64,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    /// areas of the N+1 faces, boundary faces included
    faces: Vec<f64>,
}

impl Grid {
    pub fn new(spec: DomainSpec, cells: usize) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(FieldError::TooFewCells(cells));
        }
        let (length, dim, radial) = match spec.geometry {
            Geometry::Interval { length } => (length, 1, false),
            Geometry::Ball { radius, dim } => (radius, dim, true),
            Geometry::General { .. } => {
                return Err(FieldError::UnsupportedGeometry("general".into()));
            }
        };
        let h = length / cells as f64;
        let edge = |i: usize| if i == cells { length } else { i as f64 * h };
        let centers = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let (volumes, faces) = if radial {
            let w = unit_ball_volume(dim);
            let s = unit_sphere_area(dim);
            let k = dim as i32;
            let vols = (0..cells).map(|i| w * (edge(i + 1).powi(k) - edge(i).powi(k))).collect();
            let faces = (0..=cells).map(|i| s * edge(i).powi(k - 1)).collect();
            (vols, faces)
        } else {
            (vec![h; cells], vec![1.0; cells + 1])
        };
        Ok(Grid { spec, dim, h, centers, volumes, faces })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Area of face `i` (between cells `i-1` and `i`), `0 ≤ i ≤ N`.
    pub fn face_area(&self, i: usize) -> f64 {
        self.faces[i]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn measure(&self) -> f64 {
        self.spec.measure()
    }

    /// Evaluates `f` at every cell centre.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers.iter().map(|&x| f(x)).collect()
    }

    /// `Σ fᵢ Vᵢ`
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.volumes).map(|(a, v)| a * v).sum()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.cells() {
            return Err(FieldError::LengthMismatch { expected: self.cells(), got: f.len() });
        }
        Ok(())
    }

    /// Signed cell gradients `(f_{i+1} - f_{i-1})/(2h)` with reflected
    /// ghosts `f_{-1} = f_0`, `f_N = f_{N-1}`.
    pub fn cell_gradient(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let inv = 0.5 / self.h;
        (0..n)
            .map(|i| {
                let lo = f[i.saturating_sub(1)];
                let hi = f[(i + 1).min(n - 1)];
                (hi - lo) * inv
            })
            .collect()
    }

    /// Finite-volume Laplacian with zero flux through `∂Ω`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut out = vec![0.0; n];
        for i in 1..n {
            let flux = self.faces[i] * (f[i] - f[i - 1]) / self.h;
            out[i - 1] += flux;
            out[i] -= flux;
        }
        for (o, v) in out.iter_mut().zip(&self.volumes) {
            *o /= v;
        }
        out
    }
}

/// Density `u`, signal `v` and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(u: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(FieldError::LengthMismatch { expected: u.len(), got: v.len() });
        }
        let s = State { u, v, t };
        s.validate()?;
        Ok(s)
    }

    pub fn on_grid(grid: &Grid, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        grid.check_len(&u)?;
        grid.check_len(&v)?;
        Self::new(u, v, 0.0)
    }

    pub fn constant(grid: &Grid, u: f64, v: f64) -> Result<Self> {
        Self::on_grid(grid, vec![u; grid.cells()], vec![v; grid.cells()])
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(x) = self.u.iter().chain(&self.v).find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(FieldError::InvalidState(format!(
                "fields must be finite and >= 0, found {x}"
            )));
        }
        Ok(())
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }
}

/// `∫|∇v|^k` together with the cellwise `|∇v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradNorms {
    pub integral: f64,
    pub cellwise: Vec<f64>,
}

pub fn grad_norms(v: &[f64], grid: &Grid, k: f64) -> GradNorms {
    let cellwise: Vec<f64> = grid.cell_gradient(v).into_iter().map(f64::abs).collect();
    let integral = cellwise.iter().zip(grid.volumes()).map(|(g, w)| g.powf(k) * w).sum();
    GradNorms { integral, cellwise }
}

pub fn mass(u: &[f64], grid: &Grid) -> f64 {
    grid.integrate(u)
}

/// `(1/p)∫(u+α)^p`
pub fn density_energy(u: &[f64], p: f64, alpha: f64, grid: &Grid) -> f64 {
    u.iter().zip(grid.volumes()).map(|(x, w)| (x + alpha).powf(p) * w).sum::<f64>() / p
}

/// `(1/q)∫|∇v|^{2q}`
pub fn signal_energy(v: &[f64], q: f64, grid: &Grid) -> f64 {
    grad_norms(v, grid, 2.0 * q).integral / q
}

/// Φ of the state.
pub fn phi_measure(state: &State, p: f64, q: f64, alpha: f64, grid: &Grid) -> f64 {
    density_energy(&state.u, p, alpha, grid) + signal_energy(&state.v, q, grid)
}

/// One row of an energy time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub phi: f64,
    pub u_max: f64,
    pub mass: f64,
    /// `∫|∇v|^{2q}`
    pub gradv_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    samples: Vec<EnergySample>,
}

impl EnergySeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: EnergySample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(FieldError::NonIncreasingTime { prev: last.t, next: s.t });
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[EnergySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&EnergySample> {
        self.samples.last()
    }
}

/// Builds the energy sample of a state.
pub fn energy_sample(state: &State, p: f64, q: f64, alpha: f64, grid: &Grid) -> EnergySample {
    let gradv_energy = grad_norms(&state.v, grid, 2.0 * q).integral;
    EnergySample {
        t: state.t,
        phi: density_energy(&state.u, p, alpha, grid) + gradv_energy / q,
        u_max: state.u_max(),
        mass: mass(&state.u, grid),
        gradv_energy,
    }
}

/// Field values at one instant, laid out for `x,u,v` export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn of(state: &State, grid: &Grid) -> Self {
        Snapshot { t: state.t, x: grid.centers().to_vec(), u: state.u.clone(), v: state.v.clone() }
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.x.iter().zip(&self.u).zip(&self.v).map(|((x, u), v)| (*x, *u, *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_interval(n: usize) -> Grid {
        Grid::new(DomainSpec::interval(1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn partition_of_unity() {
        for n in [8, 64, 1024] {
            for spec in [
                DomainSpec::interval(2.5).unwrap(),
                DomainSpec::ball(1.0, 1).unwrap(),
                DomainSpec::ball(1.0, 2).unwrap(),
                DomainSpec::ball(0.7, 3).unwrap(),
                DomainSpec::ball_with_measure(1.0, 3).unwrap(),
            ] {
                let g = Grid::new(spec, n).unwrap();
                assert_relative_eq!(g.total_volume(), spec.measure(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn grid_rejects_small_or_general() {
        assert!(Grid::new(DomainSpec::interval(1.0).unwrap(), 7).is_err());
        assert!(Grid::new(DomainSpec::general(1.0, true).unwrap(), 64).is_err());
    }

    #[test]
    fn phi_examples() {
        let g = unit_interval(64);
        let s = State::constant(&g, 1.0, 0.0).unwrap();
        assert_relative_eq!(phi_measure(&s, 2.0, 2.0, 1.0, &g), 2.0, max_relative = 1e-14);

        for n in [64, 256, 1024] {
            let g = unit_interval(n);
            let s = State::on_grid(&g, vec![0.0; n], g.sample(|x| x)).unwrap();
            let phi = phi_measure(&s, 2.0, 2.0, 1.0, &g);
            assert!((phi - 1.0).abs() < 2.0 / n as f64, "n = {n}, phi = {phi}");
        }
    }

    #[test]
    fn phi_refinement() {
        let field = |g: &Grid| {
            State::on_grid(g, g.sample(|x| 1.0 + (PI * x).cos()), g.sample(|x| x * x)).unwrap()
        };
        let diffs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let (a, b) = (unit_interval(n), unit_interval(2 * n));
                (phi_measure(&field(&a), 3.0, 2.0, 1.0, &a) - phi_measure(&field(&b), 3.0, 2.0, 1.0, &b)).abs()
            })
            .collect();
        assert!(diffs[1] < 0.6 * diffs[0] && diffs[2] < 0.6 * diffs[1], "{diffs:?}");
    }

    #[test]
    fn phi_floor_and_monotone() {
        let g = Grid::new(DomainSpec::ball(1.0, 2).unwrap(), 32).unwrap();
        let mut s = State::on_grid(&g, g.sample(|r| (-r * r).exp()), g.sample(|r| r)).unwrap();
        let floor = 0.5f64.powf(3.0) * g.measure() / 3.0;
        let base = phi_measure(&s, 3.0, 2.0, 0.5, &g);
        assert!(base >= floor);
        s.u[5] += 0.1;
        assert!(phi_measure(&s, 3.0, 2.0, 0.5, &g) > base);
    }

    #[test]
    fn mass_examples() {
        let g = unit_interval(16);
        assert_relative_eq!(mass(&[3.0; 16], &g), 3.0, max_relative = 1e-14);
        let disc = Grid::new(DomainSpec::ball(1.0, 2).unwrap(), 1024).unwrap();
        assert!((mass(&vec![1.0; 1024], &disc) - PI).abs() < 1e-6);
        let a = g.sample(|x| x);
        let b = g.sample(|x| x * x);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert_relative_eq!(mass(&ab, &g), mass(&a, &g) + mass(&b, &g), max_relative = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let g = unit_interval(128);
        assert_eq!(grad_norms(&vec![2.0; 128], &g, 2.0).integral, 0.0);
        let lin = grad_norms(&g.sample(|x| x), &g, 2.0).integral;
        assert!((lin - 1.0).abs() < 2.0 / 128.0);

        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let g = unit_interval(n);
                (grad_norms(&g.sample(|x| (PI * x).cos()), &g, 2.0).integral - PI * PI / 2.0).abs()
            })
            .collect();
        assert!(errs[1] / errs[0] < 0.3 && errs[2] / errs[1] < 0.3, "{errs:?}");
    }

    #[test]
    fn laplacian_conserves() {
        let g = Grid::new(DomainSpec::ball(1.0, 3).unwrap(), 40).unwrap();
        let f = g.sample(|r| (3.0 * r).sin() + r * r);
        assert!(g.integrate(&g.laplacian(&f)).abs() < 1e-12);
        // Δ(r²) = 2n in the interior
        let l = g.laplacian(&g.sample(|r| r * r));
        assert_relative_eq!(l[10], 6.0, max_relative = 1e-10);
    }

    #[test]
    fn series_rejects_time_reversal() {
        let mut s = EnergySeries::new();
        let e = EnergySample { t: 1.0, phi: 1.0, u_max: 1.0, mass: 1.0, gradv_energy: 0.0 };
        s.push(e).unwrap();
        assert!(s.push(e).is_err());
    }
}

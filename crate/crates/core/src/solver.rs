//! Explicit finite-volume integration of
//!
//! ```text
//! u_t = ∇·[(u+α)^{m1-1}∇u − χ u (u+α)^{m2-2}∇v],   v_t = Δv − v + u
//! ```
//!
//! with zero flux through `∂Ω`.
//!
//! Face fluxes are `J = −D_f δu/h + w g(u_up)` with `D_f` the arithmetic
//! mean of `(u+α)^{m1-1}` over the two cells, `w = χ δv/h`,
//! `g(u) = u(u+α)^{m2-2}` and `u_up` the upwind cell value. Every flux
//! leaves one cell and enters its neighbour, so `Σ u_t V` vanishes up to
//! rounding.
//!
//! Time stepping is two-stage SSP Runge–Kutta (Heun) under step doubling:
//! a full step and two half steps are compared, the half-step result is
//! kept, and `|y_half − y_full|/3` is the local error estimate. The step is
//! capped by `cfl_safety · min(h²/(2 max D), 1/max outflow rate)`; the
//! second term keeps a forward Euler stage nonnegative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::ModelParams;
use crate::field::{energy_sample, EnergySample, EnergySeries, FieldError, Grid, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("step size {dt} fell below dt_min = {dt_min}")]
    StepUnderflow { dt: f64, dt_min: f64 },
    #[error("step limit of {0} accepted steps reached")]
    StepLimit(u64),
    #[error("blow-up detection needs a final value >= {threshold}, got {last}")]
    BelowThreshold { last: f64, threshold: f64 },
    #[error("blow-up detection needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// u_max growth factor since the last sample that forces a new sample.
pub const GROWTH_SAMPLE_U: f64 = 1.05;
/// Φ growth factor since the last sample that forces a new sample.
pub const GROWTH_SAMPLE_PHI: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub dt_min: f64,
    pub u_blowup_threshold: f64,
    pub t_end: f64,
    pub sample_stride: f64,
    pub seed: u64,
    /// local error target of the step-doubling controller, relative to
    /// `1 + |y|`
    pub step_tol: f64,
    /// set negative values to 0 after each step and count the events
    pub clip_negative: bool,
    /// `p` of the sampled energy Φ
    pub energy_p: f64,
    /// `q` of the sampled energy Φ
    pub energy_q: f64,
    pub max_steps: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl_safety: 0.9,
            dt_min: 1e-14,
            u_blowup_threshold: 1e8,
            t_end: 1.0,
            sample_stride: 0.01,
            seed: 0,
            step_tol: 1e-6,
            clip_negative: true,
            energy_p: 2.0,
            energy_q: 2.0,
            max_steps: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.dt_min > 0.0) {
            return bad(format!("dt_min must be > 0, got {}", self.dt_min));
        }
        if !(self.u_blowup_threshold > 0.0) {
            return bad(format!("u_blowup_threshold must be > 0, got {}", self.u_blowup_threshold));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and > 0, got {}", self.t_end));
        }
        if !(self.sample_stride > 0.0) {
            return bad(format!("sample_stride must be > 0, got {}", self.sample_stride));
        }
        if !(self.step_tol > 0.0) {
            return bad(format!("step_tol must be > 0, got {}", self.step_tol));
        }
        if !(self.energy_p >= 1.0 && self.energy_q >= 1.0) {
            return bad(format!(
                "energy exponents must be >= 1, got p = {}, q = {}",
                self.energy_p, self.energy_q
            ));
        }
        Ok(())
    }
}

/// Shape of one initial field, evaluated at cell centres (`x` is the
/// coordinate on an interval and the radius on a ball).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `base + amplitude · exp(-(x - center)²/width²)`
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
        #[serde(default)]
        base: f64,
    },
    /// `mean + amplitude · cos(k π x / L)`, `L` the interval length or
    /// ball radius
    Cosine { mean: f64, amplitude: f64, k: f64 },
    /// explicit cell values
    Values { values: Vec<f64> },
}

impl Profile {
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        let length = grid.spacing() * grid.cells() as f64;
        let out = match self {
            Profile::Constant { value } => vec![*value; grid.cells()],
            Profile::Gaussian { amplitude, width, center, base } => {
                if !(*width > 0.0) {
                    return Err(SolverError::InvalidConfig(format!(
                        "gaussian width must be > 0, got {width}"
                    )));
                }
                grid.sample(|x| base + amplitude * (-((x - center) / width).powi(2)).exp())
            }
            Profile::Cosine { mean, amplitude, k } => {
                grid.sample(|x| mean + amplitude * (k * std::f64::consts::PI * x / length).cos())
            }
            Profile::Values { values } => {
                if values.len() != grid.cells() {
                    return Err(FieldError::LengthMismatch { expected: grid.cells(), got: values.len() }.into());
                }
                values.clone()
            }
        };
        Ok(out)
    }
}

/// Initial `(u, v)` with optional seeded multiplicative noise on `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u: Profile,
    pub v: Profile,
    /// relative amplitude of `u ↦ u(1 + noise·ξ)`, `ξ ~ U(-1, 1)`
    #[serde(default)]
    pub noise: f64,
}

impl InitialData {
    pub fn constant(u: f64, v: f64) -> Self {
        InitialData { u: Profile::Constant { value: u }, v: Profile::Constant { value: v }, noise: 0.0 }
    }

    pub fn build(&self, grid: &Grid, seed: u64) -> Result<State> {
        let mut u = self.u.evaluate(grid)?;
        let v = self.v.evaluate(grid)?;
        if self.noise != 0.0 {
            if !(self.noise > 0.0 && self.noise < 1.0) {
                return Err(SolverError::InvalidConfig(format!(
                    "noise must lie in [0, 1), got {}",
                    self.noise
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in &mut u {
                *x *= 1.0 + self.noise * rng.gen_range(-1.0..=1.0);
            }
        }
        Ok(State::on_grid(grid, u, v)?)
    }
}

/// `x^e` with cheap paths for the exponents that occur most.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else {
        x.powf(e)
    }
}

fn check_state(state: &State, grid: &Grid) -> Result<()> {
    if state.u.len() != grid.cells() || state.v.len() != grid.cells() {
        return Err(FieldError::LengthMismatch { expected: grid.cells(), got: state.u.len() }.into());
    }
    state.validate().map_err(|e| SolverError::InvalidState(e.to_string()))
}

/// Writes `(u_t, v_t)` into `du`, `dv`. No validation.
fn rhs_into(u: &[f64], v: &[f64], params: &ModelParams, grid: &Grid, du: &mut [f64], dv: &mut [f64]) {
    let n = u.len();
    let h = grid.spacing();
    let (alpha, chi) = (params.alpha, params.chi);
    let (e_diff, e_sens) = (params.m1 - 1.0, params.m2 - 2.0);
    du.fill(0.0);
    dv.fill(0.0);
    let mut d_prev = pow(u[0] + alpha, e_diff);
    for i in 1..n {
        let area = grid.face_area(i);
        let d_here = pow(u[i] + alpha, e_diff);
        let d_face = 0.5 * (d_prev + d_here);
        d_prev = d_here;
        let w = chi * (v[i] - v[i - 1]) / h;
        let up = if w > 0.0 { u[i - 1] } else { u[i] };
        let flux = -d_face * (u[i] - u[i - 1]) / h + w * up * pow(up + alpha, e_sens);
        du[i - 1] -= area * flux;
        du[i] += area * flux;
        let vflux = -(v[i] - v[i - 1]) / h;
        dv[i - 1] -= area * vflux;
        dv[i] += area * vflux;
    }
    for i in 0..n {
        let vol = grid.volumes()[i];
        du[i] /= vol;
        dv[i] = dv[i] / vol - v[i] + u[i];
    }
}

/// Right-hand side `(u_t, v_t)` of the semi-discrete system.
pub fn rhs(state: &State, params: &ModelParams, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    check_state(state, grid)?;
    let n = grid.cells();
    let (mut du, mut dv) = (vec![0.0; n], vec![0.0; n]);
    rhs_into(&state.u, &state.v, params, grid, &mut du, &mut dv);
    Ok((du, dv))
}

/// The two ingredients of the step cap, before `cfl_safety`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCap {
    /// `h² / (2 max D)`, `max D` including the unit diffusivity of `v`
    pub diffusive: f64,
    /// `1 / max` per-cell outflow rate of a forward Euler stage
    pub positivity: f64,
}

impl StepCap {
    pub fn min(&self) -> f64 {
        self.diffusive.min(self.positivity)
    }
}

pub fn step_cap(u: &[f64], v: &[f64], params: &ModelParams, grid: &Grid) -> StepCap {
    let n = u.len();
    let h = grid.spacing();
    let (alpha, chi) = (params.alpha, params.chi);
    let (e_diff, e_sens) = (params.m1 - 1.0, params.m2 - 2.0);
    let d: Vec<f64> = u.iter().map(|x| pow(x.max(0.0) + alpha, e_diff)).collect();
    let max_d = d.iter().copied().fold(1.0, f64::max);
    let mut rate_u = vec![0.0; n];
    let mut rate_v = vec![1.0; n];
    for i in 1..n {
        let area = grid.face_area(i);
        let d_face = 0.5 * (d[i - 1] + d[i]);
        let w = chi * (v[i] - v[i - 1]) / h;
        let (lo, hi) = (i - 1, i);
        rate_u[lo] += area * d_face / h / grid.volumes()[lo];
        rate_u[hi] += area * d_face / h / grid.volumes()[hi];
        // upwind cell loses g(u) |w|, g(u)/u = (u+α)^{m2-2}
        let from = if w > 0.0 { lo } else { hi };
        rate_u[from] += area * w.abs() * pow(u[from].max(0.0) + alpha, e_sens) / grid.volumes()[from];
        rate_v[lo] += area / h / grid.volumes()[lo];
        rate_v[hi] += area / h / grid.volumes()[hi];
    }
    let max_rate = rate_u.iter().chain(&rate_v).copied().fold(0.0, f64::max);
    StepCap { diffusive: h * h / (2.0 * max_d), positivity: 1.0 / max_rate }
}

/// Scratch buffers for the Runge–Kutta stages.
struct Work {
    k1u: Vec<f64>,
    k1v: Vec<f64>,
    k2u: Vec<f64>,
    k2v: Vec<f64>,
    su: Vec<f64>,
    sv: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            k1u: vec![0.0; n],
            k1v: vec![0.0; n],
            k2u: vec![0.0; n],
            k2v: vec![0.0; n],
            su: vec![0.0; n],
            sv: vec![0.0; n],
        }
    }
}

/// One Heun step of size `dt` from `(u, v)` into `(ou, ov)`.
#[allow(clippy::too_many_arguments)]
fn heun(u: &[f64], v: &[f64], dt: f64, params: &ModelParams, grid: &Grid, w: &mut Work, ou: &mut [f64], ov: &mut [f64]) {
    rhs_into(u, v, params, grid, &mut w.k1u, &mut w.k1v);
    for i in 0..u.len() {
        w.su[i] = (u[i] + dt * w.k1u[i]).max(-params.alpha * 0.5);
        w.sv[i] = v[i] + dt * w.k1v[i];
    }
    rhs_into(&w.su, &w.sv, params, grid, &mut w.k2u, &mut w.k2v);
    for i in 0..u.len() {
        ou[i] = u[i] + 0.5 * dt * (w.k1u[i] + w.k2u[i]);
        ov[i] = v[i] + 0.5 * dt * (w.k1v[i] + w.k2v[i]);
    }
}

/// Result of one accepted adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub dt_used: f64,
    /// suggested size of the next step, before capping
    pub dt_next: f64,
    /// `max dt_used / (cfl_safety · h²/(2 max D))`, never above 1
    pub cap_ratio: f64,
    pub clip_events: u64,
    pub rejected: u64,
}

struct Stepper<'a> {
    params: &'a ModelParams,
    grid: &'a Grid,
    cfg: &'a SolverConfig,
    work: Work,
    full_u: Vec<f64>,
    full_v: Vec<f64>,
    mid_u: Vec<f64>,
    mid_v: Vec<f64>,
    half_u: Vec<f64>,
    half_v: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, grid: &'a Grid, cfg: &'a SolverConfig) -> Self {
        let n = grid.cells();
        Stepper {
            params,
            grid,
            cfg,
            work: Work::new(n),
            full_u: vec![0.0; n],
            full_v: vec![0.0; n],
            mid_u: vec![0.0; n],
            mid_v: vec![0.0; n],
            half_u: vec![0.0; n],
            half_v: vec![0.0; n],
        }
    }

    /// Advances `state` in place by at most `dt_try`, never past `t_stop`.
    /// Returns `(dt_used, dt_next, cap_ratio, clips, rejected)`.
    fn advance(&mut self, state: &mut State, dt_try: f64, t_stop: f64) -> Result<(f64, f64, f64, u64, u64)> {
        let cap = step_cap(&state.u, &state.v, self.params, self.grid);
        let safe = self.cfg.cfl_safety * cap.min();
        let mut dt_free = dt_try.min(safe);
        let mut rejected = 0;
        loop {
            let to_stop = t_stop - state.t;
            let hits_stop = dt_free >= to_stop;
            let dt = if hits_stop { to_stop } else { dt_free };
            if dt < self.cfg.dt_min && !hits_stop {
                return Err(SolverError::StepUnderflow { dt, dt_min: self.cfg.dt_min });
            }
            let (p, g) = (self.params, self.grid);
            heun(&state.u, &state.v, dt, p, g, &mut self.work, &mut self.full_u, &mut self.full_v);
            heun(&state.u, &state.v, 0.5 * dt, p, g, &mut self.work, &mut self.mid_u, &mut self.mid_v);
            heun(&self.mid_u, &self.mid_v, 0.5 * dt, p, g, &mut self.work, &mut self.half_u, &mut self.half_v);
            let mut err: f64 = 0.0;
            for i in 0..state.u.len() {
                let eu = (self.half_u[i] - self.full_u[i]).abs() / (1.0 + self.half_u[i].abs());
                let ev = (self.half_v[i] - self.full_v[i]).abs() / (1.0 + self.half_v[i].abs());
                err = err.max(eu).max(ev);
            }
            let err = err / 3.0 / self.cfg.step_tol;
            if err.is_finite() && err <= 1.0 {
                let mut clips = 0;
                for (dst, src) in [(&mut state.u, &self.half_u), (&mut state.v, &self.half_v)] {
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        if *s < 0.0 && self.cfg.clip_negative {
                            *d = 0.0;
                            clips += 1;
                        } else {
                            *d = *s;
                        }
                    }
                }
                state.t = if hits_stop { t_stop } else { state.t + dt };
                let grow = if err == 0.0 { 2.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 2.0) };
                let dt_next = if hits_stop { dt_free.max(dt * grow) } else { dt * grow };
                let ratio = dt / (self.cfg.cfl_safety * cap.diffusive);
                return Ok((dt, dt_next, ratio, clips, rejected));
            }
            rejected += 1;
            let shrink = if err.is_finite() { (0.9 * err.powf(-1.0 / 3.0)).min(0.5) } else { 0.25 };
            dt_free = dt * shrink.max(0.1);
            if dt_free < self.cfg.dt_min {
                return Err(SolverError::StepUnderflow { dt: dt_free, dt_min: self.cfg.dt_min });
            }
        }
    }
}

/// One adaptive step starting from the stability cap as first guess.
pub fn step_adaptive(state: &State, params: &ModelParams, grid: &Grid, cfg: &SolverConfig) -> Result<StepOutcome> {
    check_state(state, grid)?;
    cfg.validate()?;
    let mut st = state.clone();
    let mut stepper = Stepper::new(params, grid, cfg);
    let (dt_used, dt_next, cap_ratio, clip_events, rejected) = stepper.advance(&mut st, f64::INFINITY, f64::INFINITY)?;
    Ok(StepOutcome { state: st, dt_used, dt_next, cap_ratio, clip_events, rejected })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    CompletedHorizon,
    BlowupDetected,
    StepUnderflow,
}

impl VerdictKind {
    pub fn label(&self) -> &'static str {
        match self {
            VerdictKind::CompletedHorizon => "completed-horizon",
            VerdictKind::BlowupDetected => "blowup-detected",
            VerdictKind::StepUnderflow => "step-underflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub kind: VerdictKind,
    /// extrapolated from `1/‖u‖_∞`; present iff blow-up was detected
    pub t_star_estimate: Option<f64>,
    /// same extrapolation applied to `1/Φ`
    pub t_star_phi: Option<f64>,
    /// the tail used for extrapolation was not increasing
    pub low_confidence: bool,
    pub final_time: f64,
    pub final_u_max: f64,
    pub final_phi: f64,
    /// largest `‖∇v‖_∞` seen; audit only, never triggers detection
    pub max_grad_v: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub clip_events: u64,
    pub min_u: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    /// largest `dt / (cfl_safety · h²/(2 max D))` over the run
    pub max_cap_ratio: f64,
}

/// Energy series plus the full state at every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub params: ModelParams,
    pub energy: EnergySeries,
    /// `states[k]` is the state at `energy.samples()[k].t`
    pub states: Vec<State>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn initial_mass(&self) -> f64 {
        self.energy.samples().first().map_or(0.0, |s| s.mass)
    }

    /// `max |∫u(t) − ∫u(0)| / ∫u(0)` over the samples.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.initial_mass();
        self.energy
            .samples()
            .iter()
            .map(|s| (s.mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> Option<&State> {
        self.states.last()
    }
}

struct Recorder<'a> {
    grid: &'a Grid,
    p: f64,
    q: f64,
    alpha: f64,
    energy: EnergySeries,
    states: Vec<State>,
}

impl Recorder<'_> {
    fn record(&mut self, state: &State) -> Result<()> {
        if self.energy.last().is_some_and(|s| s.t >= state.t) {
            return Ok(());
        }
        self.energy.push(energy_sample(state, self.p, self.q, self.alpha, self.grid))?;
        self.states.push(state.clone());
        Ok(())
    }

    fn last(&self) -> &EnergySample {
        self.energy.last().expect("initial sample is recorded first")
    }
}

fn max_abs_gradient(v: &[f64], grid: &Grid) -> f64 {
    grid.cell_gradient(v).into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Integrates until `t_end`, `‖u‖_∞ ≥ u_blowup_threshold`, or step
/// underflow. Samples are taken every `sample_stride` (hit exactly) and
/// additionally whenever `u_max` or Φ has grown by the factors
/// [`GROWTH_SAMPLE_U`] / [`GROWTH_SAMPLE_PHI`] since the last sample.
pub fn simulate(initial: &State, params: &ModelParams, grid: &Grid, cfg: &SolverConfig) -> Result<(Trajectory, BlowupVerdict)> {
    check_state(initial, grid)?;
    cfg.validate()?;
    let mut state = initial.clone();
    let mut rec = Recorder {
        grid,
        p: cfg.energy_p,
        q: cfg.energy_q,
        alpha: params.alpha,
        energy: EnergySeries::new(),
        states: Vec::new(),
    };
    rec.record(&state)?;
    let mut stats = RunStats { min_u: state.u.iter().copied().fold(f64::INFINITY, f64::min), min_dt: f64::INFINITY, ..Default::default() };
    let mut max_grad_v = max_abs_gradient(&state.v, grid);
    let mut stepper = Stepper::new(params, grid, cfg);
    let t0 = state.t;
    let mut stride_index: u64 = 1;
    let mut dt_try = f64::INFINITY;
    let mut kind = VerdictKind::CompletedHorizon;

    while state.t < t0 + cfg.t_end {
        if cfg.max_steps.is_some_and(|m| stats.accepted_steps >= m) {
            return Err(SolverError::StepLimit(stats.accepted_steps));
        }
        let next_sample = (t0 + stride_index as f64 * cfg.sample_stride).min(t0 + cfg.t_end);
        let (dt, dt_next, ratio, clips, rejected) = match stepper.advance(&mut state, dt_try, next_sample) {
            Ok(x) => x,
            Err(SolverError::StepUnderflow { .. }) => {
                kind = VerdictKind::StepUnderflow;
                break;
            }
            Err(e) => return Err(e),
        };
        dt_try = dt_next;
        stats.accepted_steps += 1;
        stats.rejected_steps += rejected;
        stats.clip_events += clips;
        stats.min_dt = stats.min_dt.min(dt);
        stats.max_dt = stats.max_dt.max(dt);
        stats.max_cap_ratio = stats.max_cap_ratio.max(ratio);
        stats.min_u = state.u.iter().copied().fold(stats.min_u, f64::min);
        max_grad_v = max_grad_v.max(max_abs_gradient(&state.v, grid));

        let u_max = state.u_max();
        let on_stride = state.t == next_sample;
        if on_stride {
            stride_index += 1;
        }
        let last = *rec.last();
        let grown = u_max >= GROWTH_SAMPLE_U * last.u_max || {
            let phi = crate::field::phi_measure(&state, cfg.energy_p, cfg.energy_q, params.alpha, grid);
            phi >= GROWTH_SAMPLE_PHI * last.phi
        };
        let blown = u_max >= cfg.u_blowup_threshold;
        if on_stride || grown || blown {
            rec.record(&state)?;
        }
        if blown {
            kind = VerdictKind::BlowupDetected;
            break;
        }
    }
    rec.record(&state)?;

    let last = *rec.last();
    let mut verdict = BlowupVerdict {
        kind,
        t_star_estimate: None,
        t_star_phi: None,
        low_confidence: false,
        final_time: state.t,
        final_u_max: last.u_max,
        final_phi: last.phi,
        max_grad_v,
    };
    if kind == VerdictKind::BlowupDetected {
        let u_series: Vec<(f64, f64)> = rec.energy.samples().iter().map(|s| (s.t, s.u_max)).collect();
        let phi_series: Vec<(f64, f64)> = rec.energy.samples().iter().map(|s| (s.t, s.phi)).collect();
        let eu = detect_blowup(&u_series, cfg.u_blowup_threshold)?;
        let ep = extrapolate_inverse(&phi_series)?;
        verdict.t_star_estimate = Some(eu.t_star);
        verdict.t_star_phi = Some(ep.t_star);
        verdict.low_confidence = !(eu.confident && ep.confident);
    }
    if stats.min_dt == f64::INFINITY {
        stats.min_dt = 0.0;
    }
    let traj = Trajectory { grid: grid.clone(), params: *params, energy: rec.energy, states: rec.states, stats };
    Ok((traj, verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_star: f64,
    pub confident: bool,
    /// samples used in the fit
    pub tail_len: usize,
}

/// Zero crossing of a least-squares line through `(t, 1/m)` over the final
/// decade `m ≥ m_last/10` (at least the last 3 samples), clamped to the
/// last sample time. A tail that is not strictly increasing, or a fit that
/// does not decrease, yields the last time with `confident = false`.
pub fn extrapolate_inverse(series: &[(f64, f64)]) -> Result<BlowupEstimate> {
    if series.len() < 2 {
        return Err(SolverError::TooFewSamples(series.len()));
    }
    let (t_last, m_last) = series[series.len() - 1];
    let mut start = series.len() - 1;
    while start > 0 && series[start - 1].1 >= m_last / 10.0 {
        start -= 1;
    }
    start = start.min(series.len().saturating_sub(3));
    let tail = &series[start..];
    let fallback = BlowupEstimate { t_star: t_last, confident: false, tail_len: tail.len() };
    if tail.windows(2).any(|w| !(w[1].1 > w[0].1) || !(w[1].0 > w[0].0)) || tail.iter().any(|s| !(s.1 > 0.0)) {
        return Ok(fallback);
    }
    let k = tail.len() as f64;
    let t_mean = tail.iter().map(|s| s.0).sum::<f64>() / k;
    let y_mean = tail.iter().map(|s| 1.0 / s.1).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, m) in tail {
        let dt = t - t_mean;
        sxy += dt * (1.0 / m - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) || !slope.is_finite() {
        return Ok(fallback);
    }
    let t_star = (t_mean - y_mean / slope).max(t_last);
    Ok(BlowupEstimate { t_star, confident: true, tail_len: tail.len() })
}

/// Blow-up time from a `(t, ‖u‖_∞)` series whose last value reached the
/// detection threshold.
pub fn detect_blowup(series: &[(f64, f64)], threshold: f64) -> Result<BlowupEstimate> {
    match series.last() {
        None => Err(SolverError::TooFewSamples(0)),
        Some(&(_, last)) if !(last >= threshold) => Err(SolverError::BelowThreshold { last, threshold }),
        Some(_) => extrapolate_inverse(series),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::DomainSpec;

    fn interval_params(chi: f64, m1: f64, m2: f64) -> (ModelParams, Grid) {
        let dom = DomainSpec::interval(1.0).unwrap();
        (ModelParams::new(1, m1, m2, chi, 1.0, dom).unwrap(), Grid::new(dom, 32).unwrap())
    }

    #[test]
    fn rhs_trivial_cases() {
        let (p, g) = interval_params(0.0, 1.5, 2.0);
        let s = State::constant(&g, 2.0, 0.5).unwrap();
        let (du, dv) = rhs(&s, &p, &g).unwrap();
        assert!(du.iter().all(|x| *x == 0.0));
        assert!(dv.iter().all(|x| (*x - 1.5).abs() < 1e-15));
    }

    #[test]
    fn rhs_rejects_negative() {
        let (p, g) = interval_params(1.0, 1.0, 2.0);
        let mut s = State::constant(&g, 1.0, 0.0).unwrap();
        s.u[3] = -1.0;
        assert!(matches!(rhs(&s, &p, &g), Err(SolverError::InvalidState(_))));
    }

    #[test]
    fn rhs_conserves_mass() {
        let dom = DomainSpec::ball(1.0, 2).unwrap();
        let p = ModelParams::new(2, 1.3, 2.5, 2.0, 0.7, dom).unwrap();
        let g = Grid::new(dom, 64).unwrap();
        let s = State::on_grid(&g, g.sample(|r| 5.0 * (-8.0 * r * r).exp()), g.sample(|r| (3.0 * r).cos() + 1.0)).unwrap();
        let (du, _) = rhs(&s, &p, &g).unwrap();
        let scale: f64 = du.iter().zip(g.volumes()).map(|(a, v)| (a * v).abs()).sum();
        assert!(g.integrate(&du).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn synthetic_blowup_series() {
        let s1: Vec<(f64, f64)> = (0..400)
            .map(|k| 1.0 - 10f64.powf(-6.0 * k as f64 / 399.0))
            .map(|t| (t, 1.0 / (1.0 - t)))
            .collect();
        let e = detect_blowup(&s1, 1e6 * 0.999).unwrap();
        assert!((e.t_star - 1.0).abs() < 1e-3 && e.confident);

        let s2: Vec<(f64, f64)> = (0..400)
            .map(|k| 1.0 - 10f64.powf(-3.0 * k as f64 / 399.0))
            .map(|t| (t, (1.0 - t).powi(-2)))
            .collect();
        let e = detect_blowup(&s2, 0.999e6).unwrap();
        assert!((e.t_star - 1.0).abs() < 5e-3, "{}", e.t_star);

        let flat = vec![(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)];
        assert!(matches!(detect_blowup(&flat, 1e8), Err(SolverError::BelowThreshold { .. })));
        let wobble = vec![(0.0, 1e8), (1.0, 5e7), (2.0, 2e8)];
        let e = detect_blowup(&wobble, 1e8).unwrap();
        assert!(!e.confident && e.t_star == 2.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.cfl_safety = 1.5;
        assert!(c.validate().is_err());
        let c = SolverConfig { dt_min: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let (_, g) = interval_params(1.0, 1.0, 2.0);
        let init = InitialData { noise: 0.1, ..InitialData::constant(1.0, 0.0) };
        assert_eq!(init.build(&g, 7).unwrap(), init.build(&g, 7).unwrap());
        assert_ne!(init.build(&g, 7).unwrap(), init.build(&g, 8).unwrap());
    }
}

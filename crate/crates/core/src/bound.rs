//! The lower bound `t* ≥ ∫_{Φ(0)}^∞ dτ / G(τ)` and its closed-form
//! under-estimate.
//!
//! `G(τ) = A τ^{f(η,r)} + B τ^{f(η,1)} + C τ^η + D` is handled as a generic
//! sum of power terms. The integral is split at a crossover `τ_c` beyond
//! which the leading power dominates:
//!
//! * head `[Φ(0), τ_c]`: `τ = e^s`, so the integrand is `1/Σ c_j τ^{e_j-1}`.
//!   This is `exp(-LSE(affine in s))` and hence log-concave, so it is cut
//!   into pieces growing geometrically away from its peak. A zero `Φ(0)`
//!   becomes a left tail truncated with the log-concave tail bound;
//! * tail `[τ_c, ∞)`: `τ = w^{-γ}` with `γ = 1/(k-1)` and `k` the leading
//!   exponent, which maps the tail onto a finite `w`-interval with the
//!   bounded integrand `γ / Σ c_j w^{γ(k-e_j)}`.
//!
//! Both pieces use globally adaptive 21-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BoundConstants, OdeCoefficients};
use crate::exponents::{ExponentConfig, ExponentError};

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_SUBINTERVALS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("tolerance must be > 0, got {0}")]
    InvalidTolerance(f64),
    #[error("phi0 must be finite and >= 0, got {0}")]
    InvalidPhi0(f64),
    #[error("closed form requires 0 < phi0 < 1, got {0}")]
    OutOfDomain(f64),
    #[error("quadrature did not reach tolerance {tol}: error estimate {achieved}")]
    NotConverged { achieved: f64, tol: f64 },
    #[error(transparent)]
    Inadmissible(#[from] ExponentError),
}

pub type Result<T> = std::result::Result<T, BoundError>;

/// One `coef · τ^exp` summand of G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exp: f64,
}

/// `G(τ) = Σ coef_j τ^{exp_j}` with nonnegative coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFunction {
    terms: Vec<PowerTerm>,
}

impl GrowthFunction {
    /// Terms with zero coefficient are dropped.
    pub fn new(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|&(c, _)| c != 0.0)
            .map(|(coef, exp)| PowerTerm { coef, exp })
            .collect();
        GrowthFunction { terms }
    }

    pub fn from_parts(coeffs: &OdeCoefficients, f_r: f64, f_1: f64, eta: f64) -> Self {
        Self::new([(coeffs.a, f_r), (coeffs.b, f_1), (coeffs.c, eta), (coeffs.d, 0.0)])
    }

    pub fn from_constants(bc: &BoundConstants, cfg: &ExponentConfig) -> Self {
        Self::from_parts(&bc.coeffs, cfg.f_r, cfg.f_1, cfg.eta)
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.terms.iter().map(|t| power_term(t.coef, tau, t.exp)).sum()
    }

    /// Largest exponent carried by a positive coefficient.
    pub fn leading_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|t| t.coef > 0.0)
            .map(|t| t.exp)
            .max_by(|a, b| a.total_cmp(b))
    }

    fn leading_coef(&self, k: f64) -> f64 {
        self.terms.iter().filter(|t| t.exp == k).map(|t| t.coef).sum()
    }

    /// `ln τ_c` for the smallest `τ_c ≥ 1` past which the leading term
    /// exceeds every other term individually. Kept in log form because
    /// `τ_c` overflows when exponents nearly coincide.
    fn log_crossover(&self, k: f64) -> f64 {
        let ln_ck = self.leading_coef(k).ln();
        self.terms
            .iter()
            .filter(|t| t.exp < k && t.coef > 0.0)
            .map(|t| (t.coef.ln() - ln_ck) / (k - t.exp))
            .fold(0.0, f64::max)
    }
}

/// `exp(-ln Σ exp(l_i))`, i.e. the reciprocal of a sum given its log terms.
fn recip_sum_exp(logs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = logs.map(|l| (l - m).exp()).sum();
    (-(m + s.ln())).exp()
}

/// `c · τ^e` with the convention `0^0 = 1`.
fn power_term(c: f64, tau: f64, e: f64) -> f64 {
    if e == 0.0 {
        c
    } else {
        c * tau.powf(e)
    }
}

/// `G(φ) = Aφ^{f(η,r)} + Bφ^{f(η,1)} + Cφ^η + D`.
pub fn g_of_phi(phi: f64, bc: &BoundConstants, cfg: &ExponentConfig) -> f64 {
    GrowthFunction::from_constants(bc, cfg).eval(phi)
}

/// `ln Σ exp(a_j + b_j s)` and its derivative in `s`.
fn lse_affine(lines: &[(f64, f64)], s: f64) -> (f64, f64) {
    let m = lines.iter().map(|&(a, b)| a + b * s).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut dz) = (0.0, 0.0);
    for &(a, b) in lines {
        let w = (a + b * s - m).exp();
        z += w;
        dz += w * b;
    }
    (m + z.ln(), dz / z)
}

/// `∫_lo^hi exp(-LSE(a_j + b_j s)) ds` for `lo` finite or `-∞`.
///
/// The integrand is log-concave, so features have width `~ 1/max|b_j|`
/// around a single peak. Breakpoints at `s* ± h(2^j - 1)` keep every piece
/// resolvable by the adaptive rule even on very long intervals.
fn integrate_log_concave(lines: &[(f64, f64)], lo: f64, hi: f64, tol: f64) -> Result<Integral> {
    let zero = Integral { value: 0.0, error: 0.0, evaluations: 0 };
    if !(hi > lo) {
        return Ok(zero);
    }
    let b_min = lines.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    let b_max = lines.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    if lo == f64::NEG_INFINITY && !(b_min < 0.0) {
        return Err(BoundError::Divergent("G(0) = 0 and 1/G is not integrable at 0".into()));
    }
    let dpsi = |s: f64| lse_affine(lines, s).1;
    let f = |s: f64| (-lse_affine(lines, s).0).exp();

    let s_star = if dpsi(hi) <= 0.0 {
        hi
    } else if lo.is_finite() && dpsi(lo) >= 0.0 {
        lo
    } else {
        let mut left = if lo.is_finite() { lo } else { hi.min(0.0) - 1.0 };
        let mut step = 1.0;
        while dpsi(left) >= 0.0 {
            left -= step;
            step *= 2.0;
        }
        let mut right = hi;
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if mid <= left || mid >= right {
                break;
            }
            if dpsi(mid) < 0.0 {
                left = mid;
            } else {
                right = mid;
            }
        }
        0.5 * (left + right)
    };

    let h = 1.0 / b_max.abs().max(b_min.abs()).max(1e-12);
    let mut breaks = vec![s_star];
    let mut j = 1.0;
    loop {
        let x = s_star + h * (2f64.powf(j) - 1.0);
        if x >= hi {
            breaks.push(hi);
            break;
        }
        breaks.push(x);
        j += 1.0;
    }
    let mut left_breaks = Vec::new();
    let mut truncation = 0.0;
    let mut j = 1.0;
    loop {
        let x = s_star - h * (2f64.powf(j) - 1.0);
        if x <= lo {
            left_breaks.push(lo);
            break;
        }
        left_breaks.push(x);
        if lo == f64::NEG_INFINITY {
            // log-concavity: ∫_{-∞}^x f ≤ f(x) / |ψ'(x)|
            let bound = f(x) / dpsi(x).abs();
            if bound <= tol / 4.0 {
                truncation = bound;
                break;
            }
        }
        if j > 1100.0 {
            return Err(BoundError::NotConverged { achieved: f64::INFINITY, tol });
        }
        j += 1.0;
    }
    left_breaks.reverse();
    left_breaks.extend(breaks);
    let breaks = left_breaks;

    let budget = if lo.is_finite() { tol } else { tol * 0.75 };
    let per_piece = budget / (breaks.len() - 1).max(1) as f64;
    let mut out = zero;
    out.error = truncation;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let piece = gauss_kronrod_adaptive(f, w[0], w[1], per_piece)?;
            out.value += piece.value;
            out.error += piece.error;
            out.evaluations += piece.evaluations;
        }
    }
    Ok(out)
}

/// Value and absolute error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Kronrod estimate with the embedded 10-point Gauss error.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = WGK[10] * f(center);
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod on a finite interval: the piece with
/// the largest error estimate is bisected until the total estimate drops
/// below `tol`.
pub fn gauss_kronrod_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    if !(tol > 0.0) {
        return Err(BoundError::InvalidTolerance(tol));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (value, error) = gk21(&f, a, b);
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > tol {
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(BoundError::NotConverged { achieved: total_err, tol });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(BoundError::NotConverged { achieved: total_err, tol });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        if total_err <= tol {
            // running sums drift; confirm against a fresh sum
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    if !total.is_finite() {
        return Err(BoundError::Divergent("integrand is not finite".into()));
    }
    Ok(Integral { value: total, error: total_err, evaluations })
}

/// `∫_{φ0}^∞ dτ / G(τ)` with absolute error estimate `≤ tol`.
pub fn integrate_reciprocal(g: &GrowthFunction, phi0: f64, tol: f64) -> Result<Integral> {
    if !(tol > 0.0) {
        return Err(BoundError::InvalidTolerance(tol));
    }
    if !(phi0 >= 0.0 && phi0.is_finite()) {
        return Err(BoundError::InvalidPhi0(phi0));
    }
    if g.terms().iter().any(|t| !(t.coef >= 0.0 && t.coef.is_finite()) || !t.exp.is_finite()) {
        return Err(BoundError::Divergent("G must have finite nonnegative coefficients".into()));
    }
    let k = match g.leading_exponent() {
        Some(k) if k > 1.0 => k,
        _ => return Err(BoundError::Divergent("no term grows faster than tau^1".into())),
    };
    let log_tau_c = if phi0 > 0.0 {
        g.log_crossover(k).max(phi0.ln())
    } else {
        g.log_crossover(k)
    };

    // s = ln τ; dτ/G = ds / Σ c τ^{e-1}
    let lines: Vec<(f64, f64)> = g.terms().iter().map(|t| (t.coef.ln(), t.exp - 1.0)).collect();
    let lo = if phi0 > 0.0 { phi0.ln() } else { f64::NEG_INFINITY };
    let head = integrate_log_concave(&lines, lo, log_tau_c, tol / 2.0)?;

    let gamma = 1.0 / (k - 1.0);
    // w = τ^{-(k-1)}; an underflowed w_max means the tail is below f64 range
    let w_max = (-(k - 1.0) * log_tau_c).exp();
    let tail = if w_max > 0.0 {
        gauss_kronrod_adaptive(
            |w| {
                let lw = w.ln();
                gamma
                    * recip_sum_exp(
                        g.terms().iter().map(move |t| t.coef.ln() + gamma * (k - t.exp) * lw),
                    )
            },
            0.0,
            w_max,
            tol / 2.0,
        )?
    } else {
        Integral { value: 0.0, error: 0.0, evaluations: 0 }
    };
    Ok(Integral {
        value: head.value + tail.value,
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Quadrature,
    /// closed form with prefactor `1/(f(η,r)-1)`, used when `r ≥ 1`
    CorollaryRAtLeastOne,
    /// closed form with prefactor `1/(f(η,1)-1)`, used when `r < 1`
    CorollaryRBelowOne,
}

impl BoundMethod {
    pub fn label(&self) -> &'static str {
        match self {
            BoundMethod::Quadrature => "quadrature",
            BoundMethod::CorollaryRAtLeastOne => "corollary (r >= 1)",
            BoundMethod::CorollaryRBelowOne => "corollary (r < 1)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub phi0: f64,
    pub t_lower: f64,
    pub method: BoundMethod,
    pub constants: BoundConstants,
    pub exponents: ExponentConfig,
    pub quadrature_error_estimate: f64,
    /// Inputs the bound takes on trust: c₁, c₂ and D_δ with their sources.
    pub conditional_on: Vec<String>,
}

/// Quadrature value of the lower bound. Inadmissible configurations are
/// refused.
pub fn lower_bound_integral(
    phi0: f64,
    bc: &BoundConstants,
    cfg: &ExponentConfig,
    tol: f64,
) -> Result<BoundReport> {
    cfg.require_admissible()?;
    let g = GrowthFunction::from_constants(bc, cfg);
    let integral = integrate_reciprocal(&g, phi0, tol)?;
    Ok(BoundReport {
        phi0,
        t_lower: integral.value,
        method: BoundMethod::Quadrature,
        constants: *bc,
        exponents: cfg.clone(),
        quadrature_error_estimate: integral.error,
        conditional_on: bc.provenance.describe(),
    })
}

/// Closed-form evaluation for `0 < φ0 < 1`. The branch is selected by
/// `r ≥ 1`.
pub fn corollary_value(phi0: f64, coeffs: &OdeCoefficients, cfg: &ExponentConfig) -> Result<(f64, BoundMethod)> {
    if !(phi0 > 0.0 && phi0 < 1.0) {
        return Err(BoundError::OutOfDomain(phi0));
    }
    let (lead, method) = if cfg.r >= 1.0 {
        (cfg.f_r, BoundMethod::CorollaryRAtLeastOne)
    } else {
        (cfg.f_1, BoundMethod::CorollaryRBelowOne)
    };
    let den = coeffs.a * phi0.powf(cfg.f_r - 1.0)
        + coeffs.b * phi0.powf(cfg.f_1 - 1.0)
        + coeffs.c * phi0.powf(cfg.eta - 1.0)
        + coeffs.d;
    Ok((phi0 / ((lead - 1.0) * den), method))
}

pub fn corollary_bound(phi0: f64, bc: &BoundConstants, cfg: &ExponentConfig) -> Result<BoundReport> {
    cfg.require_admissible()?;
    let (t_lower, method) = corollary_value(phi0, &bc.coeffs, cfg)?;
    Ok(BoundReport {
        phi0,
        t_lower,
        method,
        constants: *bc,
        exponents: cfg.clone(),
        quadrature_error_estimate: 0.0,
        conditional_on: bc.provenance.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn eval_examples() {
        assert_eq!(GrowthFunction::new([(1.0, 2.0)]).eval(3.0), 9.0);
        assert_eq!(GrowthFunction::new([(1.0, 2.0), (5.0, 0.0)]).eval(0.0), 5.0);
        let g = GrowthFunction::new([(2560.0, 3.0), (67_108_864.0, 3.0), (288.0, 1.5), (0.0, 0.0)]);
        assert_eq!(g.eval(1.0), 67_111_712.0);
    }

    #[test]
    fn reference_integrals() {
        let one = integrate_reciprocal(&GrowthFunction::new([(1.0, 2.0)]), 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(one.value, 1.0, epsilon = 1e-10);
        let half = integrate_reciprocal(&GrowthFunction::new([(1.0, 3.0)]), 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(half.value, 0.5, epsilon = 1e-10);
        let arctan =
            integrate_reciprocal(&GrowthFunction::new([(1.0, 2.0), (1.0, 0.0)]), 0.0, 1e-10).unwrap();
        assert_abs_diff_eq!(arctan.value, PI / 2.0, epsilon = 1e-10);
        assert!(arctan.error <= 1e-10);
    }

    #[test]
    fn divergent_and_invalid() {
        let lin = GrowthFunction::new([(1.0, 1.0), (1.0, 0.0)]);
        assert!(matches!(integrate_reciprocal(&lin, 1.0, 1e-8), Err(BoundError::Divergent(_))));
        let pure = GrowthFunction::new([(1.0, 2.0)]);
        assert!(matches!(integrate_reciprocal(&pure, 0.0, 1e-8), Err(BoundError::Divergent(_))));
        assert!(matches!(integrate_reciprocal(&pure, 1.0, 0.0), Err(BoundError::InvalidTolerance(_))));
        assert!(matches!(integrate_reciprocal(&pure, -1.0, 1e-8), Err(BoundError::InvalidPhi0(_))));
    }

    #[test]
    fn integrable_singularity_at_zero() {
        // ∫_0^1 τ^{-1/2} dτ + ∫_1^∞ ... with G = τ^{1/2} + τ^2
        let g = GrowthFunction::new([(1.0, 0.5), (1.0, 2.0)]);
        let v = integrate_reciprocal(&g, 0.0, 1e-10).unwrap().value;
        // substitute τ = s², ∫_0^∞ 2 ds/(1 + s³) = 4π/(3√3)
        assert_abs_diff_eq!(v, 4.0 * PI / (3.0 * 3f64.sqrt()), epsilon = 1e-9);
    }

    #[test]
    fn corollary_examples() {
        let cfg = ExponentConfig::derive_raw(3, 1.0, 2.0, 4.0, 4.0, 1.5).unwrap();
        let ones = OdeCoefficients { a: 1.0, b: 1.0, c: 1.0, d: 0.0 };
        let (v, m) = corollary_value(0.5, &ones, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.25 / (0.5 + 0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.207_107, epsilon = 1e-6);
        assert_eq!(m, BoundMethod::CorollaryRAtLeastOne);

        let d_only = OdeCoefficients { a: 0.0, b: 0.0, c: 0.0, d: 1.0 };
        let (v, _) = corollary_value(0.3, &d_only, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.3 / (cfg.f_r - 1.0), epsilon = 1e-15);
        assert!(corollary_value(1.0, &ones, &cfg).is_err());
    }
}

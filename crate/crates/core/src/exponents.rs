//! Model parameters, domain geometry and the exponent algebra behind the
//! blow-up bound.
//!
//! The energy `Φ = (1/p)∫(u+α)^p + (1/q)∫|∇v|^{2q}` is only useful when the
//! pair `(p, q)` satisfies two families of strict inequalities, called (C1)
//! and (C2) below. Everything downstream (Hölder exponents β₁, β₂, the
//! Gagliardo–Nirenberg interpolation exponent `a`, the growth exponents
//! `f(η, r)` and `f(η, 1)`) is derived here.
//!
//! Strict inequalities are compared exactly: a configuration sitting on the
//! boundary of an open condition fails.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// η used for `n ∈ {1, 2}` when the caller does not pick one.
pub const DEFAULT_FREE_ETA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("invalid dimension n = {0}; expected n >= 1")]
    InvalidDimension(i64),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate exponent: p + m1 - 1 = 0 (p = {p}, m1 = {m1})")]
    DegenerateExponent { p: f64, m1: f64 },
    #[error("singular exponent: 1/n - eta/2 + 1/(2s) = 0 (eta = {eta}, s = {s}, n = {n})")]
    SingularExponent { eta: f64, s: f64, n: u32 },
    #[error("Gagliardo-Nirenberg exponent undefined: 1/(2r) + 1/n - 1/2 = {denominator} <= 0")]
    GnInapplicable { denominator: f64 },
    #[error("Hölder exponents undefined: {0}")]
    HolderInapplicable(String),
    #[error("q = {q} too small: need q > 1/(eta - 1) = {bound}")]
    QTooSmall { q: f64, bound: f64 },
    #[error("eta = {eta} invalid: {reason}")]
    InvalidEta { eta: f64, reason: String },
    #[error("configuration (p = {p}, q = {q}) is not admissible: {reasons}")]
    Inadmissible { p: f64, q: f64, reasons: String },
}

pub type Result<T> = std::result::Result<T, ExponentError>;

/// Shape of the spatial domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// `[0, length]`; one space dimension.
    Interval { length: f64 },
    /// Ball of the given radius in `dim` dimensions, simulated radially.
    Ball { radius: f64, dim: u32 },
    /// A bounded domain known only through its measure. Usable for bounds,
    /// not for simulation.
    General { measure: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub geometry: Geometry,
    pub convex: bool,
}

/// Volume ωₙ of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: u32) -> f64 {
    // ω₀ = 1, ω₁ = 2, ωₙ = (2π/n) ωₙ₋₂
    let mut w = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

/// Surface measure σₙ₋₁ = n ωₙ of the unit sphere in ℝⁿ.
pub fn unit_sphere_area(n: u32) -> f64 {
    n as f64 * unit_ball_volume(n)
}

impl DomainSpec {
    pub fn interval(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(ExponentError::InvalidParameter(format!(
                "interval length must be positive, got {length}"
            )));
        }
        Ok(DomainSpec {
            geometry: Geometry::Interval { length },
            convex: true,
        })
    }

    pub fn ball(radius: f64, dim: u32) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ExponentError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if dim == 0 {
            return Err(ExponentError::InvalidDimension(0));
        }
        Ok(DomainSpec {
            geometry: Geometry::Ball { radius, dim },
            convex: true,
        })
    }

    /// Ball in `dim` dimensions whose volume equals `measure`.
    pub fn ball_with_measure(measure: f64, dim: u32) -> Result<Self> {
        if !(measure > 0.0 && measure.is_finite()) {
            return Err(ExponentError::InvalidParameter(format!(
                "domain measure must be positive, got {measure}"
            )));
        }
        if dim == 0 {
            return Err(ExponentError::InvalidDimension(0));
        }
        let radius = (measure / unit_ball_volume(dim)).powf(1.0 / dim as f64);
        Self::ball(radius, dim)
    }

    pub fn general(measure: f64, convex: bool) -> Result<Self> {
        if !(measure > 0.0 && measure.is_finite()) {
            return Err(ExponentError::InvalidParameter(format!(
                "domain measure must be positive, got {measure}"
            )));
        }
        Ok(DomainSpec {
            geometry: Geometry::General { measure },
            convex,
        })
    }

    /// |Ω|
    pub fn measure(&self) -> f64 {
        match self.geometry {
            Geometry::Interval { length } => length,
            Geometry::Ball { radius, dim } => unit_ball_volume(dim) * radius.powi(dim as i32),
            Geometry::General { measure } => measure,
        }
    }

    /// Spatial dimension implied by the geometry, if any.
    pub fn dimension(&self) -> Option<u32> {
        match self.geometry {
            Geometry::Interval { .. } => Some(1),
            Geometry::Ball { dim, .. } => Some(dim),
            Geometry::General { .. } => None,
        }
    }
}

/// Physical parameters of the system plus the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u32,
    pub m1: f64,
    pub m2: f64,
    pub chi: f64,
    pub alpha: f64,
    pub domain: DomainSpec,
}

impl ModelParams {
    /// `chi = 0` is accepted so that pure-diffusion control runs can share
    /// the same machinery; every bound formula stays well defined there.
    pub fn new(n: u32, m1: f64, m2: f64, chi: f64, alpha: f64, domain: DomainSpec) -> Result<Self> {
        if n == 0 {
            return Err(ExponentError::InvalidDimension(0));
        }
        for (name, x) in [("m1", m1), ("m2", m2), ("chi", chi), ("alpha", alpha)] {
            if !x.is_finite() {
                return Err(ExponentError::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if chi < 0.0 {
            return Err(ExponentError::InvalidParameter(format!("chi must be >= 0, got {chi}")));
        }
        if alpha <= 0.0 {
            return Err(ExponentError::InvalidParameter(format!(
                "alpha must be > 0, got {alpha} (degenerate diffusion is not supported)"
            )));
        }
        if let Some(d) = domain.dimension() {
            if d != n {
                return Err(ExponentError::InvalidParameter(format!(
                    "domain dimension {d} does not match n = {n}"
                )));
            }
        }
        Ok(ModelParams { n, m1, m2, chi, alpha, domain })
    }

    pub fn measure(&self) -> f64 {
        self.domain.measure()
    }
}

/// Result of [`eta_default`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaChoice {
    /// `n ≥ 3`: η is pinned to `n/(n-1)`.
    Fixed(f64),
    /// `n ∈ {1, 2}`: any η in (1, 2) works; the caller must choose.
    Free,
}

pub fn eta_default(n: i64) -> Result<EtaChoice> {
    if n <= 0 {
        return Err(ExponentError::InvalidDimension(n));
    }
    if n >= 3 {
        let n = n as f64;
        Ok(EtaChoice::Fixed(n / (n - 1.0)))
    } else {
        Ok(EtaChoice::Free)
    }
}

/// Resolves η for dimension `n`, applying an optional override. For
/// `n ≥ 3` an override must equal `n/(n-1)`.
pub fn resolve_eta(n: u32, requested: Option<f64>) -> Result<f64> {
    match (eta_default(n as i64)?, requested) {
        (EtaChoice::Fixed(eta), None) => Ok(eta),
        (EtaChoice::Fixed(eta), Some(x)) => {
            if x == eta {
                Ok(eta)
            } else {
                Err(ExponentError::InvalidEta {
                    eta: x,
                    reason: format!("for n = {n} eta is fixed to n/(n-1) = {eta}"),
                })
            }
        }
        (EtaChoice::Free, None) => Ok(DEFAULT_FREE_ETA),
        (EtaChoice::Free, Some(x)) => {
            if x > 1.0 && x < 2.0 {
                Ok(x)
            } else {
                Err(ExponentError::InvalidEta { eta: x, reason: "must lie in (1, 2)".into() })
            }
        }
    }
}

/// `r(m1) = p / (p + m1 - 1)`
pub fn exponent_r(p: f64, m1: f64) -> Result<f64> {
    let den = p + m1 - 1.0;
    if den == 0.0 {
        return Err(ExponentError::DegenerateExponent { p, m1 });
    }
    Ok(p / den)
}

/// `f(η, s) = 1 + (η-1) / (n (1/n - η/2 + 1/(2s)))`.
///
/// A negative denominator yields `f < 1`; the value is still returned and
/// it is up to the caller to reject it.
pub fn exponent_f(eta: f64, s: f64, n: u32) -> Result<f64> {
    if !(s > 0.0) {
        return Err(ExponentError::InvalidParameter(format!("f(eta, s) needs s > 0, got {s}")));
    }
    let nf = n as f64;
    let den = nf * (1.0 / nf - eta / 2.0 + 1.0 / (2.0 * s));
    if den == 0.0 {
        return Err(ExponentError::SingularExponent { eta, s, n });
    }
    Ok(1.0 + (eta - 1.0) / den)
}

/// Interpolation exponent `a` of the Gagliardo–Nirenberg step for
/// `w = (u+α)^{(p+m1-1)/2}` measured in `L^{2rη}` against `L^{2r}`.
pub fn gn_exponent_a(r: f64, eta: f64, n: u32) -> Result<f64> {
    if !(r > 0.0) {
        return Err(ExponentError::InvalidParameter(format!("a(r, eta, n) needs r > 0, got {r}")));
    }
    if !(eta > 1.0 && eta < 2.0) {
        return Err(ExponentError::InvalidEta { eta, reason: "must lie in (1, 2)".into() });
    }
    let den = 1.0 / (2.0 * r) + 1.0 / n as f64 - 0.5;
    if den <= 0.0 {
        return Err(ExponentError::GnInapplicable { denominator: den });
    }
    Ok((1.0 / (2.0 * r) - 1.0 / (2.0 * r * eta)) / den)
}

/// Hölder exponents (β₁, β₂) used to absorb the cross terms into
/// `∫(u+α)^{pη}`.
pub fn beta_exponents(p: f64, q: f64, eta: f64, m1: f64, m2: f64) -> Result<(f64, f64)> {
    let k = p + 2.0 * m2 - m1 - 3.0;
    if !(k > 0.0) {
        return Err(ExponentError::HolderInapplicable(format!(
            "p + 2 m2 - m1 - 3 = {k} must be > 0"
        )));
    }
    if !(q * eta - 1.0 > 0.0) {
        return Err(ExponentError::HolderInapplicable(format!(
            "q eta - 1 = {} must be > 0",
            q * eta - 1.0
        )));
    }
    if !(q * eta - q + 1.0 > 0.0) {
        return Err(ExponentError::HolderInapplicable(format!(
            "q eta - q + 1 = {} must be > 0",
            q * eta - q + 1.0
        )));
    }
    let beta1 = p / k * (q * eta - 1.0) / q;
    let beta2 = p / 2.0 * (q * eta - q + 1.0) / q;
    Ok((beta1, beta2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::C1 => write!(f, "C1"),
            Condition::C2 => write!(f, "C2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTerm {
    pub label: String,
    pub value: f64,
}

/// Outcome of a `p > max{...}` condition: every term, which one binds, and
/// the margin `p - max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub p: f64,
    pub terms: Vec<ConditionTerm>,
    pub binding: usize,
    pub margin: f64,
}

impl ConditionVerdict {
    fn from_terms(condition: Condition, p: f64, terms: Vec<ConditionTerm>) -> Self {
        // first maximal term binds
        let mut binding = 0;
        for (i, t) in terms.iter().enumerate() {
            if t.value > terms[binding].value {
                binding = i;
            }
        }
        let margin = p - terms[binding].value;
        ConditionVerdict { condition, p, terms, binding, margin }
    }

    pub fn passes(&self) -> bool {
        self.p > self.binding_term().value
    }

    pub fn binding_term(&self) -> &ConditionTerm {
        &self.terms[self.binding]
    }

    pub fn max_term(&self) -> f64 {
        self.binding_term().value
    }
}

impl fmt::Display for ConditionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (p = {}, binding term {} = {}, margin {})",
            self.condition,
            if self.passes() { "pass" } else { "FAIL" },
            self.p,
            self.binding_term().label,
            self.binding_term().value,
            self.margin
        )
    }
}

/// `p > max{ (n/2)(m2-m1), n(m2-m1-1), n }`
pub fn check_c1(p: f64, n: u32, m1: f64, m2: f64) -> ConditionVerdict {
    let nf = n as f64;
    let terms = vec![
        ConditionTerm { label: "(n/2)(m2-m1)".into(), value: nf / 2.0 * (m2 - m1) },
        ConditionTerm { label: "n(m2-m1-1)".into(), value: nf * (m2 - m1 - 1.0) },
        ConditionTerm { label: "n".into(), value: nf },
    ];
    ConditionVerdict::from_terms(Condition::C1, p, terms)
}

/// `p > max{ q(2m2-m1-3)/(qη-q-1), -2m2+m1+3, 2q/(qη-q+1), η(m1-1)/((η-1)(η-2)) }`
///
/// The dimension is carried for signature symmetry with (C1); it enters
/// only through η.
pub fn check_c2(p: f64, q: f64, _n: u32, m1: f64, m2: f64, eta: f64) -> Result<ConditionVerdict> {
    if !(eta > 1.0 && eta < 2.0) {
        return Err(ExponentError::InvalidEta { eta, reason: "must lie in (1, 2)".into() });
    }
    let bound = 1.0 / (eta - 1.0);
    if !(q > bound) {
        return Err(ExponentError::QTooSmall { q, bound });
    }
    let terms = vec![
        ConditionTerm {
            label: "q(2m2-m1-3)/(q eta-q-1)".into(),
            value: q * (2.0 * m2 - m1 - 3.0) / (q * eta - q - 1.0),
        },
        ConditionTerm { label: "-2m2+m1+3".into(), value: -2.0 * m2 + m1 + 3.0 },
        ConditionTerm { label: "2q/(q eta-q+1)".into(), value: 2.0 * q / (q * eta - q + 1.0) },
        ConditionTerm {
            label: "eta(m1-1)/((eta-1)(eta-2))".into(),
            value: eta * (m1 - 1.0) / ((eta - 1.0) * (eta - 2.0)),
        },
    ];
    Ok(ConditionVerdict::from_terms(Condition::C2, p, terms))
}

/// All exponents derived from `(n, m1, m2, p, q, η)` together with the
/// (C1)/(C2) verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentConfig {
    pub n: u32,
    pub m1: f64,
    pub m2: f64,
    pub p: f64,
    pub q: f64,
    pub eta: f64,
    pub r: f64,
    pub f_r: f64,
    pub f_1: f64,
    pub a: f64,
    /// `None` when the Hölder preconditions fail (which (C2) rules out).
    pub betas: Option<(f64, f64)>,
    pub c1: ConditionVerdict,
    pub c2: ConditionVerdict,
}

impl ExponentConfig {
    /// Derives every exponent. Fails only when a quantity is undefined;
    /// an inadmissible but well-defined configuration is returned with
    /// failing verdicts (see [`ExponentConfig::problems`]).
    pub fn derive(params: &ModelParams, p: f64, q: f64, eta: f64) -> Result<Self> {
        Self::derive_raw(params.n, params.m1, params.m2, p, q, eta)
    }

    pub fn derive_raw(n: u32, m1: f64, m2: f64, p: f64, q: f64, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(ExponentError::InvalidDimension(0));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(ExponentError::InvalidParameter(format!("p must be > 1, got {p}")));
        }
        if !(eta > 1.0 && eta < 2.0) {
            return Err(ExponentError::InvalidEta { eta, reason: "must lie in (1, 2)".into() });
        }
        let c2 = check_c2(p, q, n, m1, m2, eta)?;
        let c1 = check_c1(p, n, m1, m2);
        let r = exponent_r(p, m1)?;
        if !(r > 0.0) {
            return Err(ExponentError::InvalidParameter(format!(
                "r = p/(p+m1-1) = {r} must be positive"
            )));
        }
        let f_r = exponent_f(eta, r, n)?;
        let f_1 = exponent_f(eta, 1.0, n)?;
        let a = gn_exponent_a(r, eta, n)?;
        let betas = beta_exponents(p, q, eta, m1, m2).ok();
        Ok(ExponentConfig { n, m1, m2, p, q, eta, r, f_r, f_1, a, betas, c1, c2 })
    }

    pub fn a_r_eta(&self) -> f64 {
        self.a * self.r * self.eta
    }

    /// Human-readable list of failed requirements; empty iff admissible.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.c1.passes() {
            out.push(self.c1.to_string());
        }
        if !self.c2.passes() {
            out.push(self.c2.to_string());
        }
        let are = self.a_r_eta();
        if !(self.a > 0.0 && self.a < 1.0) {
            out.push(format!("a = {} not in (0, 1)", self.a));
        }
        if !(are < 1.0) {
            out.push(format!("a r eta = {are} must be < 1"));
        }
        if !(self.f_r > 1.0) {
            out.push(format!("f(eta, r) = {} must be > 1", self.f_r));
        }
        if !(self.f_1 > 1.0) {
            out.push(format!("f(eta, 1) = {} must be > 1", self.f_1));
        }
        match self.betas {
            Some((b1, b2)) => {
                if !(b1 > 1.0) {
                    out.push(format!("beta1 = {b1} must be > 1"));
                }
                if !(b2 > 1.0) {
                    out.push(format!("beta2 = {b2} must be > 1"));
                }
            }
            None => out.push("Hölder exponents undefined".into()),
        }
        out
    }

    pub fn is_admissible(&self) -> bool {
        self.problems().is_empty()
    }

    pub fn require_admissible(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExponentError::Inadmissible { p: self.p, q: self.q, reasons: problems.join("; ") })
        }
    }

    /// (β₁, β₂); only call on admissible configurations.
    pub fn beta(&self) -> Result<(f64, f64)> {
        self.betas.ok_or_else(|| {
            ExponentError::HolderInapplicable(format!("p = {}, q = {}", self.p, self.q))
        })
    }
}

/// Inclusive scan range for [`search_admissible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScanRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        ScanRange { lo, hi }
    }

    fn points(&self, step: f64) -> Vec<f64> {
        if !(self.hi >= self.lo) || !(step > 0.0) {
            return Vec::new();
        }
        let count = ((self.hi - self.lo) / step + 1e-9).floor() as usize;
        // snap to 12 decimals so that 3.1 + 9*0.1 lands on 4.0
        (0..=count)
            .map(|i| ((self.lo + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    }
}

/// Scans a uniform `(p, q)` grid and returns every admissible
/// configuration, sorted by `f(η, r)` ascending (ties by `p`, then `q`).
pub fn search_admissible(
    params: &ModelParams,
    eta: f64,
    p_range: ScanRange,
    q_range: ScanRange,
    step: f64,
) -> Result<Vec<ExponentConfig>> {
    if !(step > 0.0) {
        return Err(ExponentError::InvalidParameter(format!("grid step must be > 0, got {step}")));
    }
    if p_range.hi < p_range.lo || q_range.hi < q_range.lo {
        return Err(ExponentError::InvalidParameter("empty scan range".into()));
    }
    let mut found = Vec::new();
    for &p in &p_range.points(step) {
        for &q in &q_range.points(step) {
            // undefined corners of the grid are simply skipped
            if let Ok(cfg) = ExponentConfig::derive(params, p, q, eta) {
                if cfg.is_admissible() {
                    found.push(cfg);
                }
            }
        }
    }
    found.sort_by(|x, y| {
        x.f_r
            .total_cmp(&y.f_r)
            .then(x.p.total_cmp(&y.p))
            .then(x.q.total_cmp(&y.q))
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball3() -> ModelParams {
        let dom = DomainSpec::ball_with_measure(1.0, 3).unwrap();
        ModelParams::new(3, 1.0, 2.0, 1.0, 1.0, dom).unwrap()
    }

    #[test]
    fn eta_per_dimension() {
        assert_eq!(eta_default(3).unwrap(), EtaChoice::Fixed(1.5));
        match eta_default(4).unwrap() {
            EtaChoice::Fixed(e) => assert_relative_eq!(e, 4.0 / 3.0, max_relative = 1e-15),
            _ => panic!("n = 4 fixes eta"),
        }
        assert_eq!(eta_default(2).unwrap(), EtaChoice::Free);
        assert_eq!(eta_default(0), Err(ExponentError::InvalidDimension(0)));
        assert_eq!(resolve_eta(2, None).unwrap(), 1.5);
        assert_eq!(resolve_eta(1, Some(1.2)).unwrap(), 1.2);
        assert!(resolve_eta(1, Some(2.0)).is_err());
        assert!(resolve_eta(3, Some(1.4)).is_err());
    }

    #[test]
    fn r_values() {
        assert_eq!(exponent_r(4.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(exponent_r(4.0, 2.0).unwrap(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(exponent_r(7.0, 0.0).unwrap(), 7.0 / 6.0, max_relative = 1e-15);
        assert!(matches!(exponent_r(0.5, 0.5), Err(ExponentError::DegenerateExponent { .. })));
    }

    #[test]
    fn f_values() {
        assert_relative_eq!(exponent_f(1.5, 1.0, 3).unwrap(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(exponent_f(1.5, 0.8, 3).unwrap(), 1.8, max_relative = 1e-12);
        // 1/3 - 3/4 + 1/(2s) = 0 at s = 6/5
        assert!(matches!(exponent_f(1.5, 1.2, 3), Err(ExponentError::SingularExponent { .. })));
        // negative denominator: returned but below one
        assert!(exponent_f(1.5, 2.0, 3).unwrap() < 1.0);
    }

    #[test]
    fn a_values() {
        assert_relative_eq!(gn_exponent_a(1.0, 1.5, 3).unwrap(), 0.5, max_relative = 1e-14);
        let a = gn_exponent_a(7.0 / 6.0, 1.5, 3).unwrap();
        assert_relative_eq!(a, 6.0 / 11.0, max_relative = 1e-14);
        assert_relative_eq!(a * 7.0 / 6.0 * 1.5, 21.0 / 22.0, max_relative = 1e-14);
        // 1/(2r) + 1/3 - 1/2 <= 0 for r >= 3
        assert!(matches!(gn_exponent_a(3.0, 1.5, 3), Err(ExponentError::GnInapplicable { .. })));
    }

    #[test]
    fn beta_values() {
        let (b1, b2) = beta_exponents(4.0, 4.0, 1.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(b1, 1.25, max_relative = 1e-15);
        assert_relative_eq!(b2, 1.5, max_relative = 1e-15);
        let (b1, _) = beta_exponents(4.0, 4.0, 1.5, 2.0, 2.0).unwrap();
        assert_relative_eq!(b1, 5.0 / 3.0, max_relative = 1e-15);
        assert!(beta_exponents(1.5, 4.0, 1.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn c1_verdicts() {
        let v = check_c1(4.0, 3, 1.0, 2.0);
        assert!(v.passes());
        assert_eq!(v.margin, 1.0);
        assert_eq!(v.binding_term().label, "n");

        let v = check_c1(3.0, 3, 1.0, 2.0);
        assert!(!v.passes());
        assert_eq!(v.binding_term().label, "n");

        assert!(!check_c1(1.0, 1, 1.0, 1.0).passes());
    }

    #[test]
    fn c2_verdicts() {
        let v = check_c2(4.0, 4.0, 3, 1.0, 2.0, 1.5).unwrap();
        assert!(v.passes());
        assert_relative_eq!(v.max_term(), 8.0 / 3.0, max_relative = 1e-15);
        assert_eq!(v.binding_term().label, "2q/(q eta-q+1)");

        let v = check_c2(2.0, 4.0, 3, 1.0, 2.0, 1.5).unwrap();
        assert!(!v.passes());
        assert_eq!(v.binding_term().label, "2q/(q eta-q+1)");

        let v = check_c2(7.0, 4.0, 3, 0.0, 2.0, 1.5).unwrap();
        assert!(v.passes());
        assert_relative_eq!(v.terms[3].value, 6.0, max_relative = 1e-15);

        assert!(matches!(
            check_c2(4.0, 2.0, 3, 1.0, 2.0, 1.5),
            Err(ExponentError::QTooSmall { .. })
        ));
    }

    #[test]
    fn worked_config_is_admissible() {
        let cfg = ExponentConfig::derive(&ball3(), 4.0, 4.0, 1.5).unwrap();
        assert!(cfg.is_admissible(), "{:?}", cfg.problems());
        assert_eq!(cfg.r, 1.0);
        assert_relative_eq!(cfg.f_r, 3.0, max_relative = 1e-12);
        assert_relative_eq!(cfg.f_1, 3.0, max_relative = 1e-12);
        assert_relative_eq!(cfg.a_r_eta(), 0.75, max_relative = 1e-12);

        let bad = ExponentConfig::derive(&ball3(), 3.0, 4.0, 1.5).unwrap();
        assert!(!bad.is_admissible());
        assert!(bad.require_admissible().is_err());
    }

    #[test]
    fn search_finds_worked_pair() {
        let found = search_admissible(
            &ball3(),
            1.5,
            ScanRange::new(3.1, 6.0),
            ScanRange::new(2.1, 6.0),
            0.1,
        )
        .unwrap();
        assert!(found.iter().any(|c| c.p == 4.0 && c.q == 4.0));
        assert!(found.windows(2).all(|w| w[0].f_r <= w[1].f_r));
        for c in &found {
            let (b1, b2) = c.beta().unwrap();
            assert!(b1 > 1.0 && b2 > 1.0);
        }
        let none = search_admissible(
            &ball3(),
            1.5,
            ScanRange::new(1.0, 2.0),
            ScanRange::new(2.1, 6.0),
            0.1,
        )
        .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn measures() {
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        let d = DomainSpec::ball_with_measure(1.0, 3).unwrap();
        assert_relative_eq!(d.measure(), 1.0, max_relative = 1e-14);
        assert!(d.convex);
        assert!(ModelParams::new(2, 1.0, 2.0, 1.0, 1.0, d).is_err());
        assert!(ModelParams::new(3, 1.0, 2.0, 1.0, 0.0, d).is_err());
    }
}

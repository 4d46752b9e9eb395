//! Coefficient chain from the Gagliardo–Nirenberg constants to the
//! coefficients `A, B, C, D` of
//!
//! ```text
//! Φ'(t) ≤ A Φ^{f(η,r)} + B Φ^{f(η,1)} + C Φ^η + D.
//! ```
//!
//! Intermediate values (C₁..C₆, E₁, E₂, δ, ε and its three caps) are kept in
//! [`BoundConstants`] so that reports can print a full audit trail.
//!
//! Two places in the derivation admit two readings. Both are computed and
//! carried for audit, while the pipeline uses one of them:
//!
//! * `C₂` is used with prefactor `2^{2rη}`; the variant with `2^{2rη-1}` is
//!   recorded as [`CFactors::c2_alt`].
//! * the second ε cap is `(2(q-1)/q² - δ)/(E₂C₄)`; the variant
//!   `(2(p-1)/q² - δ)/(E₂C₂)` is recorded as [`EpsilonChoice::alt_cap2`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{DomainSpec, ExponentConfig, ExponentError, ModelParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstantsError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error("inadmissible configuration: a r eta = {0} must be < 1")]
    InadmissibleConfig(f64),
    #[error("Gagliardo-Nirenberg constants must be positive (c1 = {c1}, c2 = {c2})")]
    InvalidGn { c1: f64, c2: f64 },
    #[error("q = {0} must be > 1")]
    InvalidQ(f64),
    #[error("delta = {delta} must lie in (0, {upper})")]
    InvalidDelta { delta: f64, upper: f64 },
    #[error("no admissible epsilon: cap {which} = {value} <= 0")]
    InfeasibleEpsilon { which: &'static str, value: f64 },
    #[error("epsilon = {epsilon} exceeds the admissible maximum {max}")]
    EpsilonTooLarge { epsilon: f64, max: f64 },
    #[error("non-convex domain requires an explicit D_delta >= 0")]
    MissingDDelta,
    #[error("D_delta = {0} must be a finite value >= 0")]
    InvalidDDelta(f64),
    #[error("D_delta is zero on convex domains; got {0}")]
    UnexpectedDDelta(f64),
    #[error("{which} = {value} lies outside the f64 range")]
    OutOfRange { which: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, ConstantsError>;

/// Where c₁, c₂ came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GnProvenance {
    UserSupplied,
    /// Empirical lower bounds from the trial-field search, multiplied by
    /// `safety_factor`.
    Estimated { budget: usize, safety_factor: f64 },
}

/// Gagliardo–Nirenberg constants: `c1` for the density estimate, `c2` for
/// the `|∇v|^q` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnConstants {
    pub c1: f64,
    pub c2: f64,
    pub provenance: GnProvenance,
}

impl GnConstants {
    pub fn new(c1: f64, c2: f64, provenance: GnProvenance) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(ConstantsError::InvalidGn { c1, c2 });
        }
        Ok(GnConstants { c1, c2, provenance })
    }

    pub fn supplied(c1: f64, c2: f64) -> Result<Self> {
        Self::new(c1, c2, GnProvenance::UserSupplied)
    }
}

/// C₁..C₆ of the interpolation step. `c[0]` is C₁, `c[5]` is C₆.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CFactors {
    pub c: [f64; 6],
    /// C₂ with the smaller prefactor `2^{2rη-1}`; audit only.
    pub c2_alt: f64,
}

impl CFactors {
    pub fn get(&self, index: usize) -> f64 {
        self.c[index - 1]
    }
}

pub fn assemble_c_factors(cfg: &ExponentConfig, gn: &GnConstants) -> Result<CFactors> {
    let are = cfg.a_r_eta();
    if !(are < 1.0) {
        return Err(ConstantsError::InadmissibleConfig(are));
    }
    if !(gn.c1 > 0.0 && gn.c2 > 0.0) {
        return Err(ConstantsError::InvalidGn { c1: gn.c1, c2: gn.c2 });
    }
    let eta = cfg.eta;
    let two_r_eta = 2.0 * cfg.r * eta;
    let c1_pow = gn.c1.powf(two_r_eta);
    let c2_pow = gn.c2.powf(2.0 * eta);
    let half = 2f64.powf(two_r_eta - 1.0);
    let v_pref = 2f64.powf(2.0 * eta - 1.0);
    let c = [
        half * are * c1_pow,
        2f64.powf(two_r_eta) * (1.0 - are) * c1_pow,
        half * c1_pow,
        v_pref * (eta / 2.0) * c2_pow,
        v_pref * ((2.0 - eta) / 2.0) * c2_pow,
        v_pref * c2_pow,
    ];
    Ok(CFactors { c, c2_alt: half * (1.0 - are) * c1_pow })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EFactors {
    pub e1: f64,
    pub e2: f64,
}

/// `1/x'` for the Hölder conjugate `x' = x/(x-1)`.
fn inv_conjugate(x: f64) -> f64 {
    1.0 - 1.0 / x
}

pub fn assemble_e_factors(cfg: &ExponentConfig, params: &ModelParams) -> Result<EFactors> {
    let (beta1, beta2) = cfg.beta()?;
    let (p, q, eta) = (cfg.p, cfg.q, cfg.eta);
    let measure = params.measure();
    let chem = params.chi * params.chi * (p - 1.0) / 2.0;
    let sig = (4.0 * (q - 1.0) + params.n as f64) / 2.0;
    let q_conj = q / (q - 1.0);
    let e1 = chem * inv_conjugate(q * eta) * measure.powf(inv_conjugate(beta1))
        + sig * inv_conjugate(q_conj * eta) * measure.powf(inv_conjugate(beta2));
    let e2 = chem / (q * eta) + sig / (q_conj * eta);
    Ok(EFactors { e1, e2 })
}

/// Upper end of the δ interval, `2(q-1)/q²`.
pub fn delta_upper(q: f64) -> f64 {
    2.0 * (q - 1.0) / (q * q)
}

/// Midpoint of `(0, 2(q-1)/q²)`.
pub fn choose_delta(q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(ConstantsError::InvalidQ(q));
    }
    Ok((q - 1.0) / (q * q))
}

pub fn validate_delta(q: f64, delta: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(ConstantsError::InvalidQ(q));
    }
    let upper = delta_upper(q);
    if !(delta > 0.0 && delta < upper) {
        return Err(ConstantsError::InvalidDelta { delta, upper });
    }
    Ok(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonCap {
    /// keeps the `∇(u+α)^{(p+m1-1)/2}` dissipation nonnegative
    DensityDissipation,
    /// keeps the `∇|∇v|^q` dissipation nonnegative
    SignalDissipation,
    /// keeps `R ≥ 1` so that `R^{1/β} ≤ R`
    RFloor,
}

impl EpsilonCap {
    pub fn label(&self) -> &'static str {
        match self {
            EpsilonCap::DensityDissipation => "cap1 (density dissipation)",
            EpsilonCap::SignalDissipation => "cap2 (signal dissipation)",
            EpsilonCap::RFloor => "cap3 (R >= 1)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonChoice {
    pub epsilon: f64,
    pub caps: [f64; 3],
    pub binding: EpsilonCap,
    /// `(2(p-1)/q² - δ)/(E₂C₂)`; audit only, may be negative.
    pub alt_cap2: f64,
}

/// Picks the largest ε allowed by all three caps.
pub fn choose_epsilon(
    cfg: &ExponentConfig,
    params: &ModelParams,
    cf: &CFactors,
    ef: &EFactors,
    delta: f64,
) -> Result<EpsilonChoice> {
    let (p, q, m1) = (cfg.p, cfg.q, cfg.m1);
    let are = cfg.a_r_eta();
    if !(are < 1.0) {
        return Err(ConstantsError::InadmissibleConfig(are));
    }
    let u_diss = (p - 1.0) / 2.0 * (2.0 / (p + m1 - 1.0)).powi(2);
    let cap1 = u_diss / (ef.e1 * cf.get(1));
    let cap2 = (delta_upper(q) - delta) / (ef.e2 * cf.get(4));
    // log form: the power blows up as `a r η → 1`; saturate so the cap stays finite
    let ln_floor = cfg.f_r * (p * params.alpha.ln() + params.measure().ln());
    let ln_cap3 = (cf.get(2).ln() + ln_floor) * are / (1.0 - are);
    let cap3 = ln_cap3.exp().min(f64::MAX);
    if cap3 == 0.0 && ln_cap3.is_finite() {
        return Err(ConstantsError::OutOfRange { which: "cap3", value: ln_cap3.exp() });
    }
    for (which, value) in [("cap1", cap1), ("cap2", cap2), ("cap3", cap3)] {
        if !(value > 0.0) {
            return Err(ConstantsError::InfeasibleEpsilon { which, value });
        }
    }
    let (epsilon, binding) = [
        (cap1, EpsilonCap::DensityDissipation),
        (cap2, EpsilonCap::SignalDissipation),
        (cap3, EpsilonCap::RFloor),
    ]
    .into_iter()
    .fold((f64::INFINITY, EpsilonCap::DensityDissipation), |acc, x| {
        if x.0 < acc.0 {
            x
        } else {
            acc
        }
    });
    let alt_cap2 = ((2.0 * (p - 1.0) / (q * q) - delta) / (ef.e2 * cf.get(2))).min(f64::MAX);
    Ok(EpsilonChoice { epsilon, caps: [cap1, cap2, cap3], binding, alt_cap2 })
}

/// `A, B, C, D` of the ODE inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn assemble_abcd(
    cfg: &ExponentConfig,
    cf: &CFactors,
    ef: &EFactors,
    epsilon: f64,
    d_delta: f64,
) -> Result<OdeCoefficients> {
    let are = cfg.a_r_eta();
    let eta = cfg.eta;
    let a = cfg.p.powf(cfg.f_r) * ef.e1 * cf.get(2) * epsilon.powf(-(1.0 - are) / are);
    let b = cfg.q.powf(cfg.f_1) * ef.e2 * cf.get(5) * epsilon.powf(-eta / (2.0 - eta));
    let c = cfg.p.powf(eta) * ef.e1 * cf.get(3) + cfg.q.powf(eta) * ef.e2 * cf.get(6);
    for (which, value) in [("A", a), ("B", b), ("C", c)] {
        if !value.is_finite() {
            return Err(ConstantsError::OutOfRange { which, value });
        }
    }
    Ok(OdeCoefficients { a, b, c, d: d_delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DDeltaSource {
    /// boundary term vanishes, D_δ = 0
    ConvexDomain,
    UserSupplied,
}

/// Applies the convexity rule: convex domains get `D_δ = 0`, anything else
/// must come with an explicit nonnegative value.
pub fn resolve_d_delta(domain: &DomainSpec, supplied: Option<f64>) -> Result<(f64, DDeltaSource)> {
    if domain.convex {
        match supplied {
            None => Ok((0.0, DDeltaSource::ConvexDomain)),
            Some(0.0) => Ok((0.0, DDeltaSource::ConvexDomain)),
            Some(x) => Err(ConstantsError::UnexpectedDDelta(x)),
        }
    } else {
        match supplied {
            None => Err(ConstantsError::MissingDDelta),
            Some(x) if x >= 0.0 && x.is_finite() => Ok((x, DDeltaSource::UserSupplied)),
            Some(x) => Err(ConstantsError::InvalidDDelta(x)),
        }
    }
}

/// Provenance of the quantities the bound depends on but cannot compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsProvenance {
    pub gn: GnConstants,
    pub d_delta: DDeltaSource,
}

impl ConstantsProvenance {
    pub fn describe(&self) -> Vec<String> {
        let gn = match self.gn.provenance {
            GnProvenance::UserSupplied => "user-supplied".to_string(),
            GnProvenance::Estimated { budget, safety_factor } => {
                format!("estimated lower bound, budget {budget}, safety x{safety_factor}")
            }
        };
        let d = match self.d_delta {
            DDeltaSource::ConvexDomain => "zero (convex domain)",
            DDeltaSource::UserSupplied => "user-supplied",
        };
        vec![
            format!("c1 = {} ({gn})", self.gn.c1),
            format!("c2 = {} ({gn})", self.gn.c2),
            format!("D_delta: {d}"),
        ]
    }
}

/// Every constant of the chain, from δ to `A, B, C, D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub delta: f64,
    pub d_delta: f64,
    pub epsilon: EpsilonChoice,
    pub cfactors: CFactors,
    pub efactors: EFactors,
    pub coeffs: OdeCoefficients,
    pub provenance: ConstantsProvenance,
}

impl BoundConstants {
    /// Runs the full chain on an admissible configuration. `delta = None`
    /// selects the midpoint policy.
    pub fn assemble(
        cfg: &ExponentConfig,
        params: &ModelParams,
        gn: &GnConstants,
        delta: Option<f64>,
        d_delta: Option<f64>,
    ) -> Result<Self> {
        cfg.require_admissible()?;
        let delta = match delta {
            Some(d) => validate_delta(cfg.q, d)?,
            None => choose_delta(cfg.q)?,
        };
        let (d_delta, d_source) = resolve_d_delta(&params.domain, d_delta)?;
        let cfactors = assemble_c_factors(cfg, gn)?;
        let efactors = assemble_e_factors(cfg, params)?;
        let epsilon = choose_epsilon(cfg, params, &cfactors, &efactors, delta)?;
        let coeffs = assemble_abcd(cfg, &cfactors, &efactors, epsilon.epsilon, d_delta)?;
        Ok(BoundConstants {
            delta,
            d_delta,
            epsilon,
            cfactors,
            efactors,
            coeffs,
            provenance: ConstantsProvenance { gn: *gn, d_delta: d_source },
        })
    }

    /// Same constants with a smaller ε. Used to probe how the bound reacts
    /// to ε; the result is still a valid (weaker) chain.
    pub fn with_epsilon(&self, cfg: &ExponentConfig, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= self.epsilon.epsilon) {
            return Err(ConstantsError::EpsilonTooLarge { epsilon, max: self.epsilon.epsilon });
        }
        let mut out = *self;
        out.epsilon.epsilon = epsilon;
        out.coeffs = assemble_abcd(cfg, &self.cfactors, &self.efactors, epsilon, self.d_delta)?;
        Ok(out)
    }
}

//! Constants of the decimation argument and numerical checks of its
//! inequalities on exactly enumerable models.
//!
//! ```
//! use lclt_lab::model::*;
//! use lclt_lab::verifier::*;
//!
//! let model = GibbsModel::new(
//!     LatticeBox::new(1, 2, 1).unwrap(),
//!     SpinInterval::ising(),
//!     Coupling::NearestNeighbor { strength: 0.0 },
//!     BoundaryCondition::Zero,
//!     None,
//! ).unwrap();
//! let k = constants(&model, CVariant::Stated);
//! assert_eq!(k.kappa, 0.5);
//! assert!((k.delta - 1.0 / 24.0).abs() < 1e-15);
//! assert!(k.condifina_ok);
//! ```

mod audit;
mod integrals;
mod lemma;
mod suite;

pub use audit::{derivative_check, g_term_audit, DerivativeCheck, GTermOptions};
pub use integrals::{
    check_integrals, gaussian_tail_integral, integral_decomposition, lclt_trend, trend_verdict, IntegralDecomposition,
    TrendPoint, TrendSource, TrendVerdict, INTEGRAL_TOLERANCE,
};
pub use lemma::{
    check_lemma_a, check_lemma_b, check_single_spin_cf, lemma_a_grid, lemma_b_grid, prop1_grid, LemmaOptions,
    PROP1_TOLERANCE,
};
pub use suite::{
    identity_check, identity_suite, random_small_spins, random_system, IdentitySuite, RandomSystem,
    IDENTITY_ROUNDING_FACTOR, IDENTITY_TOLERANCE,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{kappa, GibbsModel};

/// Which exponent `c` of the single-spin bound is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CVariant {
    /// `c = κ sin²(δ/2)`.
    Stated,
    /// `c = κ² sin²(δ/2)`.
    #[default]
    Proved,
}

impl fmt::Display for CVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CVariant::Stated => "stated",
            CVariant::Proved => "proved",
        })
    }
}

impl FromStr for CVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stated" => Ok(CVariant::Stated),
            "proved" => Ok(CVariant::Proved),
            _ => Err(Error::Spec(format!(
                "c variant must be `stated` or `proved`, got `{s}`"
            ))),
        }
    }
}

/// Every constant of the argument for one model and decimation step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsBundle {
    /// `J`, the interaction norm at step 1.
    pub coupling_norm: f64,
    pub r0: i64,
    pub j_r0: f64,
    pub sigma: f64,
    pub card: usize,
    pub kappa: f64,
    /// `δ = κ/(12σ)`.
    pub delta: f64,
    /// `C = σ²κ/4`.
    #[serde(rename = "C")]
    pub big_c: f64,
    pub c_stated: f64,
    pub c_proved: f64,
    pub c_variant: CVariant,
    /// `c` of the chosen variant.
    pub c: f64,
    /// `ν(r0) = 2e² e^{J_{r0}σ²/2} σ² J_{r0}^{1/2}`.
    pub nu_r0: f64,
    /// `ε = min{eδσ, ν(r0)}`.
    pub eps: f64,
    /// `ln 2`.
    pub a_part_a: f64,
    /// `c/4`.
    pub a_part_b: f64,
    /// `e^{J_{r0}/2} J_{r0}^{1/2}`.
    pub condifina_lhs: f64,
    /// `κ^{3/2}/(96√2 σ³ e²)`.
    pub branch_a_rhs: f64,
    /// `e^{−5c/4}(e^{c/4} − 1)/((1+δσ) e σ²)`.
    pub branch_b_rhs: f64,
    pub branch_a_ok: bool,
    pub branch_b_ok: bool,
    pub condifina_ok: bool,
}

impl ConstantsBundle {
    /// Constants from the norms and the spin space alone.
    pub fn from_norms(coupling_norm: f64, j_r0: f64, sigma: i64, card: usize, r0: i64, variant: CVariant) -> Self {
        let k = kappa(coupling_norm, sigma, card);
        let s = sigma as f64;
        let delta = k / (12.0 * s);
        let sin2 = (delta / 2.0).sin().powi(2);
        let c_stated = k * sin2;
        let c_proved = k * k * sin2;
        let c = match variant {
            CVariant::Stated => c_stated,
            CVariant::Proved => c_proved,
        };
        let e = std::f64::consts::E;
        let nu_r0 = 2.0 * e * e * (j_r0 * s * s / 2.0).exp() * s * s * j_r0.sqrt();
        let condifina_lhs = (j_r0 / 2.0).exp() * j_r0.sqrt();
        let branch_a_rhs = k.powf(1.5) / (96.0 * 2f64.sqrt() * s.powi(3) * e * e);
        let branch_b_rhs = (-1.25 * c).exp() * (c / 4.0).exp_m1() / ((1.0 + delta * s) * e * s * s);
        let branch_a_ok = condifina_lhs <= branch_a_rhs;
        let branch_b_ok = condifina_lhs <= branch_b_rhs;
        ConstantsBundle {
            coupling_norm,
            r0,
            j_r0,
            sigma: s,
            card,
            kappa: k,
            delta,
            big_c: s * s * k / 4.0,
            c_stated,
            c_proved,
            c_variant: variant,
            c,
            nu_r0,
            eps: (e * delta * s).min(nu_r0),
            a_part_a: std::f64::consts::LN_2,
            a_part_b: c / 4.0,
            condifina_lhs,
            branch_a_rhs,
            branch_b_rhs,
            branch_a_ok,
            branch_b_ok,
            condifina_ok: branch_a_ok && branch_b_ok,
        }
    }

    /// Error naming the failing branch, if any.
    pub fn require_condifina(&self) -> Result<()> {
        let mut failing = Vec::new();
        if !self.branch_a_ok {
            failing.push(format!(
                "part (a) branch: {:.6e} > {:.6e}",
                self.condifina_lhs, self.branch_a_rhs
            ));
        }
        if !self.branch_b_ok {
            failing.push(format!(
                "part (b) branch with {} c: {:.6e} > {:.6e}",
                self.c_variant, self.condifina_lhs, self.branch_b_rhs
            ));
        }
        if failing.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "decimation step r0={} is too small: {}",
                self.r0,
                failing.join("; ")
            )))
        }
    }
}

/// Constants of `model` at its own decimation step.
pub fn constants(model: &GibbsModel, variant: CVariant) -> ConstantsBundle {
    constants_at(model, model.lattice().r0(), variant)
}

/// Constants of `model` at decimation step `r0`.
pub fn constants_at(model: &GibbsModel, r0: i64, variant: CVariant) -> ConstantsBundle {
    ConstantsBundle::from_norms(
        model.interaction_norm(1),
        model.interaction_norm(r0),
        model.spins().sigma(),
        model.spins().card(),
        r0,
        variant,
    )
}

/// Smallest `r0 ≤ r0_max` at which the condition on `J_{r0}` holds.
pub fn min_r0(model: &GibbsModel, r0_max: i64, variant: CVariant) -> Result<Option<i64>> {
    if r0_max < 1 {
        return Err(Error::Domain(format!("r0_max must be ≥ 1, got {r0_max}")));
    }
    Ok((1..=r0_max).find(|&r0| constants_at(model, r0, variant).condifina_ok))
}

/// One numerical check: `lhs ≤ rhs` up to the recorded tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub parameters: BTreeMap<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub pass: bool,
    /// Wall time; kept out of the serialized report so reruns are
    /// byte-identical.
    #[serde(skip_serializing)]
    pub runtime_ms: u64,
}

impl VerificationReport {
    /// Report with `pass ⇔ rhs − lhs ≥ −tolerance`; the tolerance is stored
    /// in the parameters.
    pub fn new(
        check_name: impl Into<String>,
        parameters: impl IntoIterator<Item = (&'static str, Value)>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> Self {
        let mut parameters: BTreeMap<String, Value> = parameters.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        parameters.insert("tolerance".into(), Value::from(tolerance));
        let margin = rhs - lhs;
        VerificationReport {
            check_name: check_name.into(),
            parameters,
            lhs,
            rhs,
            margin,
            pass: margin >= -tolerance,
            runtime_ms: 0,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.parameters.get("tolerance").and_then(Value::as_f64).unwrap_or(0.0)
    }

    /// Whether a failure of this check should fail the run. Checks of the
    /// stated `c` are recorded without being enforced.
    pub fn enforced(&self) -> bool {
        self.parameters.get("enforced").and_then(Value::as_bool).unwrap_or(true)
    }

    pub(crate) fn with_runtime(mut self, start: std::time::Instant) -> Self {
        self.runtime_ms = start.elapsed().as_millis() as u64;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn nn(strength: f64, spins: SpinInterval, r0: i64) -> GibbsModel {
        GibbsModel::new(
            LatticeBox::new(1, 4, r0).unwrap(),
            spins,
            Coupling::NearestNeighbor { strength },
            BoundaryCondition::Zero,
            None,
        )
        .unwrap()
    }

    #[test]
    fn constants_zero_coupling() {
        let k = constants(&nn(0.0, SpinInterval::ising(), 1), CVariant::Stated);
        assert_eq!(k.kappa, 0.5);
        assert!((k.delta - 0.041_666_666_666_666_664).abs() < 1e-17);
        assert_eq!(k.big_c, 0.125);
        // 0.5 sin²(1/48)
        assert!(
            (k.c_stated - 2.169_824_940_204_565_7e-4).abs() < 1e-18,
            "{}",
            k.c_stated
        );
        assert!(
            (k.c_proved - 1.084_912_470_102_282_9e-4).abs() < 1e-18,
            "{}",
            k.c_proved
        );
        assert_eq!(k.nu_r0, 0.0);
        assert_eq!(k.eps, 0.0);
        assert!(k.condifina_ok);
        assert!(k.c_proved <= k.c_stated);
        assert!(k.delta < std::f64::consts::PI);
    }

    #[test]
    fn constants_beyond_range_and_unit_kappa() {
        let k = constants(&nn(0.2, SpinInterval::new(-1, 1).unwrap(), 2), CVariant::Proved);
        assert_eq!(k.j_r0, 0.0);
        assert_eq!(k.nu_r0, 0.0);
        assert!(k.condifina_ok);
        assert!((k.coupling_norm - 0.4).abs() < 1e-15);
        let unit = ConstantsBundle::from_norms(0.0, 0.0, 1, 1, 1, CVariant::Stated);
        assert_eq!(unit.kappa, 1.0);
        assert_eq!(unit.c_stated, unit.c_proved);
    }

    #[test]
    fn condifina_names_failing_branch() {
        let k = constants(&nn(0.1, SpinInterval::ising(), 1), CVariant::Proved);
        assert!(!k.condifina_ok && !k.branch_a_ok);
        match k.require_condifina() {
            Err(Error::Precondition(m)) => assert!(m.contains("part (a)"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_r0_examples() {
        assert_eq!(
            min_r0(&nn(0.1, SpinInterval::ising(), 1), 3, CVariant::Proved).unwrap(),
            Some(2)
        );
        assert_eq!(
            min_r0(&nn(0.0, SpinInterval::ising(), 1), 3, CVariant::Proved).unwrap(),
            Some(1)
        );
        assert!(min_r0(&nn(0.0, SpinInterval::ising(), 1), 0, CVariant::Proved).is_err());
    }

    #[test]
    fn power_law_min_r0_is_out_of_reach() {
        let m = GibbsModel::new(
            LatticeBox::new(1, 2, 1).unwrap(),
            SpinInterval::ising(),
            Coupling::PowerLaw {
                strength: 0.1,
                exponent: 3.0,
            },
            BoundaryCondition::Zero,
            None,
        )
        .unwrap();
        assert_eq!(min_r0(&m, 50, CVariant::Proved).unwrap(), None);
        // J_{r0} = 0.2 ζ(3) / r0³ up to the truncation tail
        let k = constants_at(&m, 50, CVariant::Proved);
        assert!((k.j_r0 - 0.2 * 1.202_056_903_159_594 / 125_000.0).abs() < 1e-12);
        assert!(k.condifina_lhs > k.branch_a_rhs);
    }

    #[test]
    fn report_pass_rule() {
        let r = VerificationReport::new("x", [("t", Value::from(0.5))], 1.0, 1.0 - 1e-13, 1e-12);
        assert!(r.pass && r.enforced());
        assert_eq!(r.tolerance(), 1e-12);
        let r = VerificationReport::new("x", [], 1.0, 0.9, 1e-12);
        assert!(!r.pass);
        let line = serde_json::to_string(&r).unwrap();
        assert!(!line.contains("runtime_ms"));
    }
}

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{constants, CVariant, ConstantsBundle, VerificationReport};
use crate::error::{Error, Result};
use crate::exact::{single_spin_char_fn, ExactEngine, PmfTable, DEFAULT_BUDGET};
use crate::model::{GibbsModel, Omega, Region};
use crate::polymer::{polymer_partition, ActivityParams, PartitionMode};

/// Slack on the single-spin bound.
pub const PROP1_TOLERANCE: f64 = 1e-12;

/// Number of field values spread over `[−Jσ, Jσ]` in the single-spin check.
const FIELD_GRID: usize = 33;

/// Options shared by the characteristic-function checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaOptions {
    /// Random exterior configurations besides the constant ones.
    pub omega_samples: usize,
    pub seed: u64,
    /// Slack on `lhs ≤ rhs`.
    pub tolerance: f64,
    /// Enumeration budget.
    pub budget: u128,
    /// Expert mode: replace the model's own `δ`.
    pub delta_override: Option<f64>,
    /// Refuse to run when the condition on `J_{r0}` fails.
    pub require_condition: bool,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            omega_samples: 8,
            seed: 0,
            tolerance: 1e-12,
            budget: DEFAULT_BUDGET,
            delta_override: None,
            require_condition: true,
        }
    }
}

impl LemmaOptions {
    fn delta(&self, k: &ConstantsBundle) -> Result<f64> {
        match self.delta_override {
            None => Ok(k.delta),
            Some(d) if d > 0.0 && d < PI => Ok(d),
            Some(d) => Err(Error::Domain(format!("δ must lie in (0, π), got {d}"))),
        }
    }
}

/// `δ k / points` for `k = 1..=points`.
pub fn lemma_a_grid(delta: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| delta * k as f64 / points as f64).collect()
}

/// `δ + (π − δ) k / points` for `k = 1..=points`.
pub fn lemma_b_grid(delta: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| delta + (PI - delta) * k as f64 / points as f64)
        .collect()
}

/// `points ≥ 2` values from `δ` to `2π − δ` inclusive, endpoints exact.
pub fn prop1_grid(delta: f64, points: usize) -> Vec<f64> {
    let hi = 2.0 * PI - delta;
    let last = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                delta + (hi - delta) * k as f64 / last
            }
        })
        .collect()
}

fn require_span_one(model: &GibbsModel, what: &str) -> Result<()> {
    if model.spins().is_consecutive() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} needs consecutive-integer spins: with step {} the spin law is periodic in t with period 2π/{}",
            model.spins().step(),
            model.spins().step()
        )))
    }
}

/// `max |E^ω_x e^{its}| ≤ e^{−c}` over every decimated site, every sampled
/// exterior configuration, a grid of fields covering `[−Jσ, Jσ]` and every
/// `t` of the grid.
pub fn check_single_spin_cf(
    model: &GibbsModel,
    t_grid: &[f64],
    variant: CVariant,
    opts: &LemmaOptions,
) -> Result<VerificationReport> {
    let start = Instant::now();
    require_span_one(model, "the single-spin bound")?;
    let k = constants(model, variant);
    let delta = opts.delta(&k)?;
    if t_grid.is_empty() {
        return Err(Error::Domain("empty t grid".into()));
    }
    let slack = 1e-12 * delta;
    if let Some(t) = t_grid
        .iter()
        .find(|&&t| !(t >= delta - slack && t <= 2.0 * PI - delta + slack))
    {
        return Err(Error::Domain(format!(
            "t = {t} is outside [δ, 2π − δ] with δ = {delta}"
        )));
    }
    let spins = model.spins();
    let sites = model.region_sites(Region::Decimated);
    let omegas = ExactEngine::sampled_omegas(model, opts.omega_samples, opts.seed);
    let mut fields = Vec::new();
    for omega in &omegas {
        for x in &sites {
            fields.push(model.field_coefficient(x, Region::Decimated, omega)?);
        }
    }
    let b_max = k.coupling_norm * k.sigma;
    for i in 0..FIELD_GRID {
        fields.push(-b_max + 2.0 * b_max * i as f64 / (FIELD_GRID - 1) as f64);
    }
    let (worst, worst_t, worst_b) = fields
        .par_iter()
        .map(|&b| {
            t_grid
                .iter()
                .map(|&t| (single_spin_char_fn(spins, b, t).norm(), t, b))
                .fold((f64::NEG_INFINITY, 0.0, 0.0), |a, x| if x.0 > a.0 { x } else { a })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0, 0.0), |a, x| if x.0 > a.0 { x } else { a });
    let params = [
        ("c_variant", json!(variant.to_string())),
        ("c", json!(k.c)),
        ("delta", json!(delta)),
        ("t_points", json!(t_grid.len())),
        ("field_count", json!(fields.len())),
        ("omega_count", json!(omegas.len())),
        ("worst_t", json!(worst_t)),
        ("worst_field", json!(worst_b)),
        ("enforced", json!(variant == CVariant::Proved)),
    ];
    Ok(VerificationReport::new(
        "prop1",
        params,
        worst,
        (-k.c).exp(),
        opts.tolerance.max(PROP1_TOLERANCE),
    )
    .with_runtime(start))
}

/// Exact laws of the decimated sum for every exterior configuration, the
/// worst one at each `t`, and the full-box law when it fits the budget.
struct DecimatedScan {
    laws: Vec<(Omega, PmfTable)>,
    exhaustive: bool,
    full: Option<PmfTable>,
    /// `(sup_ω |Ẽ^ω e^{itS̃}|, index of the maximizer)` per `t`.
    worst: Vec<(f64, usize)>,
}

fn scan(model: &GibbsModel, ts: &[f64], opts: &LemmaOptions) -> Result<DecimatedScan> {
    let engine = ExactEngine::new(opts.budget);
    let (laws, exhaustive) = engine.decimated_distributions(model, opts.omega_samples, opts.seed)?;
    let full = match model
        .local_system(Region::Full, &Omega::boundary())
        .and_then(|sys| engine.pmf(&sys))
    {
        Ok(p) => Some(p),
        Err(Error::Capacity { .. }) => None,
        Err(e) => return Err(e),
    };
    let worst = ts
        .par_iter()
        .map(|&t| {
            laws.iter()
                .enumerate()
                .map(|(i, (_, pmf))| (pmf.char_fn(t).norm(), i))
                .fold((f64::NEG_INFINITY, 0), |a, x| if x.0 > a.0 { x } else { a })
        })
        .collect();
    Ok(DecimatedScan {
        laws,
        exhaustive,
        full,
        worst,
    })
}

fn common_params(scan: &DecimatedScan, t: f64, idx: usize, n: usize) -> Vec<(&'static str, Value)> {
    let (sup, arg) = scan.worst[idx];
    let mut p = vec![
        ("t", json!(t)),
        ("n_decimated", json!(n)),
        ("omega_count", json!(scan.laws.len())),
        ("exhaustive_gap", json!(scan.exhaustive)),
        ("argmax", json!(scan.laws[arg].0.label)),
    ];
    if let Some(full) = &scan.full {
        let full_abs = full.char_fn(t).norm();
        p.push(("full_abs", json!(full_abs)));
        p.push(("full_abs_le_sup", json!(full_abs <= sup * (1.0 + 1e-12) + 1e-15)));
    }
    p
}

/// `sup_ω |Ẽ^ω e^{itS̃}| ≤ e^{−C|Λ̃|t²/2}` on a uniform grid of `t_points`
/// in `(0, δ]`, one report per `t`.
pub fn check_lemma_a(model: &GibbsModel, t_points: usize, opts: &LemmaOptions) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let k = constants(model, CVariant::Proved);
    if opts.require_condition {
        k.require_condifina()?;
    }
    if t_points == 0 {
        return Err(Error::Domain("t_points must be ≥ 1".into()));
    }
    let delta = opts.delta(&k)?;
    let ts = lemma_a_grid(delta, t_points);
    let scan = scan(model, &ts, opts)?;
    let n = model.region_sites(Region::Decimated).len();
    Ok(ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let rhs = (-k.big_c * n as f64 * t * t / 2.0).exp();
            let mut p = common_params(&scan, t, i, n);
            p.push(("delta", json!(delta)));
            p.push(("C", json!(k.big_c)));
            if let Some(full) = &scan.full {
                p.push(("trick_holds", json!(full.char_fn(t).norm() <= rhs + opts.tolerance)));
            }
            VerificationReport::new("lemma_a", p, scan.worst[i].0, rhs, opts.tolerance).with_runtime(start)
        })
        .collect())
}

/// `sup_ω |Ẽ^ω e^{itS̃}| ≤ e^{−(c/2)|Λ̃|}` on a uniform grid of `t_points`
/// in `(δ, π]`, one report per `t`.
///
/// Each report also carries the intermediate bound
/// `e^{−c|Λ̃|} |Ξᶜ(t)| / Ξ(0)` at the worst exterior configuration, with
/// whether it dominated there.
pub fn check_lemma_b(
    model: &GibbsModel,
    t_points: usize,
    variant: CVariant,
    opts: &LemmaOptions,
) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    require_span_one(model, "the bound for t in (δ, π]")?;
    let k = constants(model, variant);
    if opts.require_condition {
        k.require_condifina()?;
    }
    if t_points == 0 {
        return Err(Error::Domain("t_points must be ≥ 1".into()));
    }
    let delta = opts.delta(&k)?;
    let ts = lemma_b_grid(delta, t_points);
    let scan = scan(model, &ts, opts)?;
    let n = model.region_sites(Region::Decimated).len();
    let rhs = (-k.c * n as f64 / 2.0).exp();
    ts.par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let (sup, arg) = scan.worst[i];
            let mut p = common_params(&scan, t, i, n);
            p.push(("delta", json!(delta)));
            p.push(("c", json!(k.c)));
            p.push(("c_variant", json!(variant.to_string())));
            p.push(("enforced", json!(variant == CVariant::Proved)));
            let sys = model.local_system(Region::Decimated, &scan.laws[arg].0)?;
            if sys.len() <= crate::polymer::MAX_GAS_SITES {
                let xi_c = polymer_partition(&sys, &ActivityParams::dressed(t, k.c), PartitionMode::Direct)?;
                let xi_0 = polymer_partition(&sys, &ActivityParams::full(0.0), PartitionMode::Direct)?;
                let route = (-k.c * n as f64).exp() * xi_c.norm() / xi_0.re;
                p.push(("dressed_route_bound", json!(route)));
                p.push(("dressed_route_holds", json!(sup <= route * (1.0 + 1e-12))));
            }
            Ok(VerificationReport::new("lemma_b", p, sup, rhs, opts.tolerance).with_runtime(start))
        })
        .collect()
}

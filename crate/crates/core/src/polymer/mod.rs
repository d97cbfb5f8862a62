//! Polymer representation of the decimated partition function: activities,
//! weights, the polymer-gas identity, the cluster series and its bounds.
//!
//! Everything here acts on a [`LocalSystem`], usually the decimated box of a
//! model under a fixed exterior configuration:
//!
//! ```
//! use lclt_lab::model::*;
//! use lclt_lab::polymer::*;
//!
//! let model = GibbsModel::new(
//!     LatticeBox::new(1, 3, 1).unwrap(),
//!     SpinInterval::ising(),
//!     Coupling::NearestNeighbor { strength: 0.1 },
//!     BoundaryCondition::Zero,
//!     None,
//! ).unwrap();
//! let sys = model.local_system(Region::Decimated, &Omega::boundary()).unwrap();
//! let pair = Polymer::new([2, 3]).unwrap();
//! let xi = activity(&sys, &ActivityParams::full(0.0), &pair).unwrap();
//! assert!((xi.re - (0.1f64.cosh() - 1.0)).abs() < 1e-15);
//! ```

mod bounds;
mod partition;
mod series;

pub use bounds::{
    convergence_check, norm_bound_bo2, tree_graph_bound_check, weight, weight_norm, weight_w0, BoForm,
    ConvergenceVerdict, TreeGraphBound, WeightKind,
};
pub use partition::{char_fn_ratio, polymer_partition, PartitionMode, PolymerGas, MAX_GAS_SITES};
pub use series::{cluster_series, exact_log_partition, truncated_log_partition, ClusterSeriesResult, SeriesOptions};

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::combinatorics::{connected_graph_sum, connected_graph_sum_by_definition, connected_graphs};
use crate::error::{Error, Result};
use crate::exact::DEFAULT_BUDGET;
use crate::model::{LocalSystem, Site};
use crate::numeric::{ComplexSum, NeumaierSum};

/// Largest polymer for which activities are computed.
pub const MAX_POLYMER_SIZE: usize = 8;

/// Nonempty set of site indices of a [`LocalSystem`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polymer(Vec<usize>);

impl Polymer {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Domain("polymers are nonempty".into()));
        }
        Ok(Polymer(set.into_iter().collect()))
    }

    /// Polymer made of the given sites of `sys`.
    pub fn from_sites(sys: &LocalSystem, sites: &[Site]) -> Result<Self> {
        let idx = sites
            .iter()
            .map(|s| {
                sys.sites()
                    .iter()
                    .position(|x| x == s)
                    .ok_or_else(|| Error::Domain(format!("site {s} is not in the region")))
            })
            .collect::<Result<Vec<_>>>()?;
        if idx.len() != sites.len() || BTreeSet::from_iter(idx.iter()).len() != idx.len() {
            return Err(Error::Domain("repeated site in polymer".into()));
        }
        Polymer::new(idx)
    }

    pub(crate) fn from_mask(mask: u64) -> Self {
        Polymer((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub fn as_set(&self) -> BTreeSet<usize> {
        self.0.iter().copied().collect()
    }

    fn check_in(&self, sys: &LocalSystem) -> Result<()> {
        match self.0.last() {
            Some(&i) if i >= sys.len() => Err(Error::Domain(format!(
                "polymer index {i} outside a region of {} sites",
                sys.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Which polymer gas is meant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expansion {
    /// Mayer trick on both the pair factors and `e^{its}`: single-site
    /// polymers carry `E_x e^{its} − 1`.
    Full,
    /// Mayer trick on the pair factors only, activities dressed by
    /// `e^{c|R|}`; only polymers with at least two sites.
    Dressed { c: f64 },
}

/// Parameters of an activity evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityParams {
    pub t: f64,
    pub expansion: Expansion,
    /// The `δ` entering the weights `w_0`.
    pub delta: f64,
}

impl ActivityParams {
    pub fn full(t: f64) -> Self {
        ActivityParams {
            t,
            expansion: Expansion::Full,
            delta: 0.0,
        }
    }

    pub fn dressed(t: f64, c: f64) -> Self {
        ActivityParams {
            t,
            expansion: Expansion::Dressed { c },
            delta: 0.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn validate(&self) -> Result<()> {
        if let Expansion::Dressed { c } = self.expansion {
            if !(c >= 0.0) {
                return Err(Error::Domain(format!("dressing exponent must be ≥ 0, got {c}")));
            }
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Domain(format!("δ must be ≥ 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Activity of one polymer as a function of `t`:
/// `ξ_t(R) = dressing · Σ_m A(m) e^{itm} + offset`, where `m` runs over the
/// values of `Σ_{x∈R} s_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityTable {
    pub size: usize,
    /// Value of the spin sum at index 0.
    pub base: i64,
    pub step: i64,
    /// `A(m) = Σ_{s_R : Σ s = m} Π p_x(s_x) · C_R(s)` (for one site, `p_x`).
    pub amplitudes: Vec<f64>,
    /// `e^{c|R|}`, 1 for the full expansion.
    pub dressing: f64,
    /// −1 for single sites in the full expansion, else 0.
    pub offset: f64,
    /// `Σ_{s_R} Π p_x(s_x) |C_R(s)|` (1 for one site).
    pub abs_mass: f64,
}

impl ActivityTable {
    /// `d^order/dt^order ξ_t(R)` for `order ∈ {0, 1, 2}`.
    pub fn derivative(&self, t: f64, order: u32) -> Complex64 {
        let mut s = ComplexSum::new();
        let i_pow = Complex64::i().powu(order);
        for (j, &a) in self.amplitudes.iter().enumerate() {
            if a != 0.0 {
                let m = (self.base + self.step * j as i64) as f64;
                s.add(i_pow * Complex64::from_polar(a * m.powi(order as i32), t * m));
            }
        }
        let v = s.value() * self.dressing;
        if order == 0 {
            v + self.offset
        } else {
            v
        }
    }

    pub fn value(&self, t: f64) -> Complex64 {
        self.derivative(t, 0)
    }

    /// `max_t |ξ_t(R)|` is at most this (triangle inequality).
    pub fn abs_bound(&self) -> f64 {
        self.dressing * self.amplitudes.iter().map(|a| a.abs()).sum::<f64>() + self.offset.abs()
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.amplitudes.iter().all(|&a| a == 0.0)
    }
}

/// Whether the nonzero couplings connect the sites of `R`.
pub(crate) fn coupling_connected(sys: &LocalSystem, r: &[usize]) -> bool {
    let k = r.len();
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..k {
            if !seen[b] && sys.coupling(r[a], r[b]) != 0.0 {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub(crate) fn check_size(r: &Polymer, sys: &LocalSystem) -> Result<()> {
    r.check_in(sys)?;
    if r.len() > MAX_POLYMER_SIZE {
        return Err(Error::capacity(
            format!("connected graphs on a polymer of {} sites", r.len()),
            1u128 << (r.len() * (r.len() - 1) / 2),
            1u128 << (MAX_POLYMER_SIZE * (MAX_POLYMER_SIZE - 1) / 2),
        ));
    }
    let states = (sys.spins().card() as u128).pow(r.len() as u32);
    if states > DEFAULT_BUDGET {
        return Err(Error::capacity(
            "spin configurations on a polymer",
            states,
            DEFAULT_BUDGET,
        ));
    }
    Ok(())
}

/// Visit every spin configuration on `R` with its product probability
/// `Π p_x(s_x)`, the lattice index of `Σ s_x` and the Mayer weights
/// `f_ab = e^{J s_a s_b} − 1` (row-major `|R| × |R|`).
fn for_each_config(sys: &LocalSystem, r: &[usize], mut f: impl FnMut(&[i64], f64, usize, &[f64])) {
    let k = r.len();
    let vals = sys.spins().values();
    let probs: Vec<Vec<f64>> = r.iter().map(|&i| sys.single_site_probs(i)).collect();
    let mut digits = vec![0usize; k];
    let mut config = vec![0i64; k];
    let mut mayer = vec![0.0; k * k];
    loop {
        let mut p = 1.0;
        for a in 0..k {
            config[a] = vals[digits[a]];
            p *= probs[a][digits[a]];
        }
        for a in 0..k {
            for b in (a + 1)..k {
                let v = (sys.coupling(r[a], r[b]) * (config[a] * config[b]) as f64).exp_m1();
                mayer[a * k + b] = v;
                mayer[b * k + a] = v;
            }
        }
        f(&config, p, digits.iter().sum(), &mayer);
        let mut a = k;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            digits[a] += 1;
            if digits[a] < vals.len() {
                break;
            }
            digits[a] = 0;
        }
    }
}

/// Activity table of `R` under the given expansion.
pub fn activity_table(sys: &LocalSystem, expansion: Expansion, r: &Polymer) -> Result<ActivityTable> {
    check_size(r, sys)?;
    let spins = sys.spins();
    let k = r.len();
    let dressing = match expansion {
        Expansion::Full => 1.0,
        Expansion::Dressed { c } => {
            if k == 1 {
                return Err(Error::Domain(
                    "the dressed expansion has no single-site polymers".into(),
                ));
            }
            (c * k as f64).exp()
        }
    };
    let bins = k * (spins.card() - 1) + 1;
    let base = k as i64 * spins.lo();
    if k == 1 {
        return Ok(ActivityTable {
            size: 1,
            base,
            step: spins.step(),
            amplitudes: sys.single_site_probs(r.0[0]),
            dressing,
            offset: -1.0,
            abs_mass: 1.0,
        });
    }
    let mut amps = vec![NeumaierSum::new(); bins];
    let mut abs_mass = NeumaierSum::new();
    if coupling_connected(sys, &r.0) {
        for_each_config(sys, &r.0, |_, p, j, mayer| {
            let c = connected_graph_sum(k, mayer);
            amps[j].add(p * c);
            abs_mass.add(p * c.abs());
        });
    }
    Ok(ActivityTable {
        size: k,
        base,
        step: spins.step(),
        amplitudes: amps.iter().map(NeumaierSum::value).collect(),
        dressing,
        offset: 0.0,
        abs_mass: abs_mass.value(),
    })
}

/// `ξ_t(R)` (or `ξ^c_t(R)` for the dressed expansion).
pub fn activity(sys: &LocalSystem, params: &ActivityParams, r: &Polymer) -> Result<Complex64> {
    params.validate()?;
    Ok(activity_table(sys, params.expansion, r)?.value(params.t))
}

/// `ξ_t(R)` from its defining triple sum over spin configurations, connected
/// graphs on `R` and subsets `S ⊆ R` (including `S = ∅`). Reference
/// implementation for tests; exponential in `|R|` several times over.
pub fn activity_by_definition(sys: &LocalSystem, params: &ActivityParams, r: &Polymer) -> Result<Complex64> {
    params.validate()?;
    check_size(r, sys)?;
    let k = r.len();
    let t = params.t;
    if k == 1 {
        if let Expansion::Dressed { .. } = params.expansion {
            return Err(Error::Domain(
                "the dressed expansion has no single-site polymers".into(),
            ));
        }
        let mut s = ComplexSum::new();
        for (v, p) in sys.spins().values().into_iter().zip(sys.single_site_probs(r.0[0])) {
            s.add((Complex64::from_polar(1.0, t * v as f64) - 1.0) * p);
        }
        return Ok(s.value());
    }
    let graphs: Vec<_> = connected_graphs(k)?.collect();
    let mut total = ComplexSum::new();
    let mut err = None;
    for_each_config(sys, &r.0, |config, p, _, mayer| {
        let mut gsum = NeumaierSum::new();
        for g in &graphs {
            gsum.add(g.edges().iter().map(|&(a, b)| mayer[a * k + b]).product());
        }
        let single: Vec<Complex64> = config
            .iter()
            .map(|&s| Complex64::from_polar(1.0, t * s as f64) - 1.0)
            .collect();
        let inner: Complex64 = match params.expansion {
            Expansion::Full => (0u32..1 << k)
                .map(|set| {
                    (0..k)
                        .filter(|a| set >> a & 1 == 1)
                        .map(|a| single[a])
                        .product::<Complex64>()
                })
                .sum(),
            Expansion::Dressed { c } => {
                (c * k as f64).exp()
                    * config
                        .iter()
                        .map(|&s| Complex64::from_polar(1.0, t * s as f64))
                        .product::<Complex64>()
            }
        };
        total.add(inner * gsum.value() * p);
        if err.is_none() && gsum.value().is_nan() {
            err = Some(Error::Domain("non-finite Mayer weight".into()));
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total.value()),
    }
}

/// Connected-graph sum `C_R(s) = Σ_{g∈G_R} Π_{xy∈g} (e^{J s_x s_y} − 1)` at
/// one configuration (by definition when `definitional`, else by the subset
/// recursion).
pub fn connected_mayer_sum(sys: &LocalSystem, r: &Polymer, config: &[i64], definitional: bool) -> Result<f64> {
    check_size(r, sys)?;
    let k = r.len();
    if config.len() != k || config.iter().any(|&s| !sys.spins().contains(s)) {
        return Err(Error::Domain("configuration does not match the polymer".into()));
    }
    let mut f = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let v = (sys.coupling(r.0[a], r.0[b]) * (config[a] * config[b]) as f64).exp_m1();
            f[a * k + b] = v;
            f[b * k + a] = v;
        }
    }
    if definitional {
        connected_graph_sum_by_definition(k, &f)
    } else {
        Ok(connected_graph_sum(k, &f))
    }
}

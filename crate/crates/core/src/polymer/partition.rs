use num_complex::Complex64;

use super::{activity_table, coupling_connected, ActivityParams, ActivityTable, Expansion, Polymer, MAX_POLYMER_SIZE};
use crate::error::{Error, Result};
use crate::exact::{ExactEngine, DEFAULT_BUDGET};
use crate::model::LocalSystem;
use crate::numeric::ComplexSum;

/// Largest region for the polymer-gas evaluation (all subsets are visited).
pub const MAX_GAS_SITES: usize = 16;

/// How [`polymer_partition`] evaluates `Ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// Sum over spin configurations of the region.
    Direct,
    /// `1 + Σ` over families of disjoint polymers of the product of their
    /// activities.
    PolymerSum,
}

/// Every polymer of a region with a nonzero activity, tabulated in `t`.
#[derive(Debug, Clone)]
pub struct PolymerGas {
    sys: LocalSystem,
    expansion: Expansion,
    /// `(mask, table)` sorted by mask.
    polymers: Vec<(u64, ActivityTable)>,
}

impl PolymerGas {
    /// Tabulate all polymers of `sys` (at most [`MAX_GAS_SITES`] sites).
    /// Subsets not connected by nonzero couplings have zero activity and are
    /// dropped.
    pub fn new(sys: &LocalSystem, expansion: Expansion) -> Result<Self> {
        let n = sys.len();
        if n > MAX_GAS_SITES {
            return Err(Error::capacity(
                format!("polymer subsets of a {n}-site region"),
                1u128 << n,
                1u128 << MAX_GAS_SITES,
            ));
        }
        let card = sys.spins().card() as u128;
        // work estimate: |I|^k configurations times 3^k per configuration
        let work = (1 + 3 * card).checked_pow(n as u32).unwrap_or(u128::MAX);
        let limit = DEFAULT_BUDGET << 4;
        if work > limit {
            return Err(Error::capacity("polymer activity tabulation", work, limit));
        }
        let mut polymers = Vec::new();
        for mask in 1u64..(1 << n) {
            let size = mask.count_ones() as usize;
            if size == 1 && expansion != Expansion::Full {
                continue;
            }
            let r = Polymer::from_mask(mask);
            if size > 1 && (size > MAX_POLYMER_SIZE || !coupling_connected(sys, r.indices())) {
                if size > MAX_POLYMER_SIZE && coupling_connected(sys, r.indices()) {
                    return Err(Error::capacity(
                        "connected polymer larger than the graph enumeration cap",
                        size as u128,
                        MAX_POLYMER_SIZE as u128,
                    ));
                }
                continue;
            }
            let table = activity_table(sys, expansion, &r)?;
            if !table.is_zero() {
                polymers.push((mask, table));
            }
        }
        Ok(PolymerGas {
            sys: sys.clone(),
            expansion,
            polymers,
        })
    }

    pub fn system(&self) -> &LocalSystem {
        &self.sys
    }

    pub fn expansion(&self) -> Expansion {
        self.expansion
    }

    pub fn len(&self) -> usize {
        self.polymers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polymers.is_empty()
    }

    /// Polymers with their activity tables.
    pub fn polymers(&self) -> impl Iterator<Item = (Polymer, &ActivityTable)> {
        self.polymers.iter().map(|(m, t)| (Polymer::from_mask(*m), t))
    }

    pub(crate) fn masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.polymers.iter().map(|(m, _)| *m)
    }

    /// Activities of all polymers at `t`, aligned with [`polymers`](Self::polymers).
    pub fn activities(&self, t: f64) -> Vec<Complex64> {
        self.polymers.iter().map(|(_, tab)| tab.value(t)).collect()
    }

    /// `1 + Σ_{disjoint families} Π ξ` via `Z(V) = Z(V∖v) + Σ_{v∈R⊆V} ξ(R) Z(V∖R)`
    /// with `v` the lowest site of `V`.
    pub fn partition(&self, t: f64) -> Complex64 {
        let xi = self.activities(t);
        self.partition_with(&xi)
    }

    pub(crate) fn partition_with(&self, xi: &[Complex64]) -> Complex64 {
        let n = self.sys.len();
        let full = (1usize << n) - 1;
        // polymers grouped by lowest site
        let mut by_low: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        for ((m, _), &x) in self.polymers.iter().zip(xi) {
            by_low[m.trailing_zeros() as usize].push((*m as usize, x));
        }
        let mut z = vec![Complex64::new(0.0, 0.0); full + 1];
        z[0] = Complex64::new(1.0, 0.0);
        for v in 1..=full {
            let low = v.trailing_zeros() as usize;
            let mut s = ComplexSum::new();
            s.add(z[v & (v - 1)]);
            for &(r, x) in &by_low[low] {
                if r & v == r {
                    s.add(x * z[v ^ r]);
                }
            }
            z[v] = s.value();
        }
        z[full]
    }
}

/// `Ξ(t) = Σ_s Π_{xy} e^{J s_x s_y} Π_x e^{its_x} p_x(s_x)` by direct
/// enumeration; for the dressed expansion, `Ξᶜ(t) = Σ_g e^{c|S_g|} Σ_{s_{S_g}}
/// Π_{x∈S_g} e^{its_x} p_x(s_x) Π_{xy∈g} (e^{J s_x s_y} − 1)` summed over all
/// graphs `g` (isolated vertices allowed).
fn direct(sys: &LocalSystem, expansion: Expansion, t: f64) -> Result<Complex64> {
    match expansion {
        Expansion::Full => {
            let dist = ExactEngine::default().distribution(sys)?;
            let log_norm: f64 = (0..sys.len()).map(|i| single_log_z(sys, i)).sum();
            let base = sys.len() as i64 * sys.spins().lo();
            let step = sys.spins().step();
            let mut s = ComplexSum::new();
            for (j, &w) in dist.weights.iter().enumerate() {
                s.add(Complex64::from_polar(w, t * (base + step * j as i64) as f64));
            }
            Ok(s.value() * (dist.log_scale - log_norm).exp())
        }
        Expansion::Dressed { c } => direct_dressed(sys, c, t),
    }
}

fn single_log_z(sys: &LocalSystem, i: usize) -> f64 {
    let b = sys.field(i);
    let vals = sys.spins().values();
    let top = vals.iter().map(|&s| b * s as f64).fold(f64::NEG_INFINITY, f64::max);
    top + vals.iter().map(|&s| (b * s as f64 - top).exp()).sum::<f64>().ln()
}

// Per configuration, the graph sum grouped by the covered set `S_g = V'`
// telescopes: Σ_{V'} e^{c|V'|} e^{itS_{V'}} Σ_{U⊆V'} (−1)^{|V'∖U|} F(U)
//   = Σ_U F(U) e^{c|U|} e^{itS_U} Π_{x∉U} (1 − e^{c} e^{its_x}),
// with F(U) = Π_{xy⊂U} e^{J s_x s_y}; the outer sum runs with weights Π p_x.
pub(crate) fn direct_dressed(sys: &LocalSystem, c: f64, t: f64) -> Result<Complex64> {
    let n = sys.len();
    let card = sys.spins().card() as u128;
    let work = card.checked_pow(n as u32).unwrap_or(u128::MAX).saturating_mul(1 << n);
    if n > 20 || work > DEFAULT_BUDGET << 2 {
        return Err(Error::capacity("dressed direct evaluation", work, DEFAULT_BUDGET << 2));
    }
    let vals = sys.spins().values();
    let probs: Vec<Vec<f64>> = (0..n).map(|i| sys.single_site_probs(i)).collect();
    let ec = c.exp();
    let mut digits = vec![0usize; n];
    let mut total = ComplexSum::new();
    let full = (1usize << n) - 1;
    let mut log_f = vec![0.0; full + 1];
    let mut phase = vec![Complex64::new(1.0, 0.0); full + 1];
    let mut rest = vec![Complex64::new(1.0, 0.0); full + 1];
    loop {
        let s: Vec<i64> = digits.iter().map(|&d| vals[d]).collect();
        let p: f64 = (0..n).map(|i| probs[i][digits[i]]).product();
        let one: Vec<Complex64> = s.iter().map(|&v| Complex64::from_polar(1.0, t * v as f64)).collect();
        let miss: Vec<Complex64> = one.iter().map(|&e| Complex64::new(1.0, 0.0) - e * ec).collect();
        // rest[U] = Π_{x∉U} (1 − e^c e^{its_x}), built from the full set down
        rest[full] = Complex64::new(1.0, 0.0);
        for u in (0..full).rev() {
            let x = (!u & full).trailing_zeros() as usize;
            rest[u] = rest[u | 1 << x] * miss[x];
        }
        let mut acc = ComplexSum::new();
        acc.add(rest[0]);
        for u in 1..=full {
            let v = u.trailing_zeros() as usize;
            let prev = u & (u - 1);
            let mut e = log_f[prev];
            let mut r = prev;
            while r != 0 {
                let w = r.trailing_zeros() as usize;
                r &= r - 1;
                e += sys.coupling(v, w) * (s[v] * s[w]) as f64;
            }
            log_f[u] = e;
            phase[u] = phase[prev] * one[v] * ec;
            acc.add(phase[u] * e.exp() * rest[u]);
        }
        total.add(acc.value() * p);
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(total.value());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < vals.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// `Ξ(t)` (full expansion) or `Ξᶜ(t)` (dressed) of the region, by either
/// side of the polymer-gas identity.
pub fn polymer_partition(sys: &LocalSystem, params: &ActivityParams, mode: PartitionMode) -> Result<Complex64> {
    params.validate()?;
    match mode {
        PartitionMode::Direct => direct(sys, params.expansion, params.t),
        PartitionMode::PolymerSum => Ok(PolymerGas::new(sys, params.expansion)?.partition(params.t)),
    }
}

/// `Ξ(t)/Ξ(0)` from the polymer gas: the characteristic function of the
/// region's spin sum.
pub fn char_fn_ratio(sys: &LocalSystem, t: f64) -> Result<Complex64> {
    let gas = PolymerGas::new(sys, Expansion::Full)?;
    Ok(gas.partition(t) / gas.partition(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinInterval;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn two_free_spins() {
        let sys = LocalSystem::free(SpinInterval::ising(), vec![0.0; 2]);
        let t = 0.8;
        let p = ActivityParams::full(t);
        let d = polymer_partition(&sys, &p, PartitionMode::Direct).unwrap();
        let g = polymer_partition(&sys, &p, PartitionMode::PolymerSum).unwrap();
        let expected = t.cos().powi(2);
        assert!((d.re - expected).abs() < 1e-15 && d.im.abs() < 1e-15);
        assert!((g.re - expected).abs() < 1e-15 && g.im.abs() < 1e-15);
    }

    #[test]
    fn three_site_chain_identity() {
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 3, &[(0, 1, 0.1), (1, 2, 0.1)], vec![0.0; 3]).unwrap();
        let p = ActivityParams::full(0.3);
        let d = polymer_partition(&sys, &p, PartitionMode::Direct).unwrap();
        let g = polymer_partition(&sys, &p, PartitionMode::PolymerSum).unwrap();
        assert!((d - g).norm() < 1e-12);
    }

    #[test]
    fn dressed_identity() {
        let sys = LocalSystem::from_pairs(
            SpinInterval::new(0, 2).unwrap(),
            4,
            &[(0, 1, 0.2), (1, 2, -0.1), (2, 3, 0.15), (0, 3, 0.05)],
            vec![0.1, 0.0, -0.2, 0.3],
        )
        .unwrap();
        for (t, c) in [(0.0, 0.0), (0.9, 0.0), (1.3, 0.05), (2.5, 0.4)] {
            let p = ActivityParams::dressed(t, c);
            let d = polymer_partition(&sys, &p, PartitionMode::Direct).unwrap();
            let g = polymer_partition(&sys, &p, PartitionMode::PolymerSum).unwrap();
            assert!(rel(d, g) < 1e-12, "t={t} c={c}: {d} vs {g}");
        }
        // at c = 0, t = 0 the dressed gas has the same partition function
        let full = polymer_partition(&sys, &ActivityParams::full(0.0), PartitionMode::Direct).unwrap();
        let dressed = polymer_partition(&sys, &ActivityParams::dressed(0.0, 0.0), PartitionMode::Direct).unwrap();
        assert!(rel(dressed, full) < 1e-12);
    }

    #[test]
    fn ratio_is_char_fn() {
        let sys = LocalSystem::from_pairs(
            SpinInterval::ising(),
            4,
            &[(0, 1, 0.1), (1, 2, 0.1), (2, 3, 0.1)],
            vec![0.05, 0.0, 0.0, -0.1],
        )
        .unwrap();
        let t = 0.2;
        let a = char_fn_ratio(&sys, t).unwrap();
        let b = ExactEngine::default().char_fn(&sys, t).unwrap();
        assert!((a - b).norm() < 1e-10);
        assert!((char_fn_ratio(&sys, 0.0).unwrap() - 1.0).norm() < 1e-15);
    }
}

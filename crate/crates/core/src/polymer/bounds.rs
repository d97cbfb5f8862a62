use serde::Serialize;

use super::{activity_table, check_size, coupling_connected, Expansion, Polymer, MAX_POLYMER_SIZE};
use crate::combinatorics::{connected_graph_sum, spanning_trees};
use crate::error::{Error, Result};
use crate::model::LocalSystem;
use crate::numeric::NeumaierSum;

/// Cap on polymer subsets times spin configurations visited by
/// [`weight_norm`].
pub const WEIGHT_NORM_BUDGET: u128 = 1 << 30;

/// Which weight of a polymer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WeightKind {
    /// `w_0(R)`.
    W0,
    /// `w_1(R) = w_0(R) e^{|R|}`.
    W1,
    /// `w_c(R) = w_0(R) e^{c|R|}`.
    Wc(f64),
}

impl WeightKind {
    fn dressing(self, size: usize) -> f64 {
        match self {
            WeightKind::W0 => 1.0,
            WeightKind::W1 => (size as f64).exp(),
            WeightKind::Wc(c) => (c * size as f64).exp(),
        }
    }
}

/// `w_0(R)`: `δσ` for one site, else
/// `(1+δσ)^{|R|} Σ_{s_R} Π p_x(s_x) |Σ_{g∈G_R} Π (e^{J s s} − 1)|`.
pub fn weight_w0(sys: &LocalSystem, r: &Polymer, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("δ must be ≥ 0, got {delta}")));
    }
    check_size(r, sys)?;
    let ds = delta * sys.spins().sigma() as f64;
    if r.len() == 1 {
        return Ok(ds);
    }
    if !coupling_connected(sys, r.indices()) {
        return Ok(0.0);
    }
    let table = activity_table(sys, Expansion::Full, r)?;
    Ok((1.0 + ds).powi(r.len() as i32) * table.abs_mass)
}

/// `w_0`, `w_1` or `w_c` of `R`.
pub fn weight(sys: &LocalSystem, r: &Polymer, delta: f64, kind: WeightKind) -> Result<f64> {
    if let WeightKind::Wc(c) = kind {
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("dressing exponent must be ≥ 0, got {c}")));
        }
    }
    Ok(weight_w0(sys, r, delta)? * kind.dressing(r.len()))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

/// `sup_x Σ_{R∋x, |R|=k} w(R)` over the sites of the region, exact.
pub fn weight_norm(sys: &LocalSystem, k: usize, kind: WeightKind, delta: f64) -> Result<f64> {
    let n = sys.len();
    if k == 0 {
        return Err(Error::Domain("polymer size must be ≥ 1".into()));
    }
    if k > n {
        return Ok(0.0);
    }
    if k > MAX_POLYMER_SIZE {
        return Err(Error::capacity("polymer size", k as u128, MAX_POLYMER_SIZE as u128));
    }
    let work = binomial(n, k).saturating_mul((sys.spins().card() as u128 * 3).pow(k as u32));
    if work > WEIGHT_NORM_BUDGET {
        return Err(Error::capacity(
            format!("{}-subsets of a {n}-site region with their spin sums", k),
            work,
            WEIGHT_NORM_BUDGET,
        ));
    }
    let mut per_site = vec![NeumaierSum::new(); n];
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let r = Polymer::new(idx.iter().copied())?;
        let w = weight(sys, &r, delta, kind)?;
        if w != 0.0 {
            for &i in &idx {
                per_site[i].add(w);
            }
        }
        // next k-combination in lexicographic order
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(per_site.iter().map(NeumaierSum::value).fold(0.0, f64::max));
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Outcome of [`convergence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// No tail was supplied: `lhs` covers only the listed sizes.
    pub truncated: bool,
}

/// Relative slack allowed when comparing `lhs ≤ rhs`.
pub const CONVERGENCE_RTOL: f64 = 1e-12;

/// `Σ_k w^{(k)} e^{ak} ≤ e^a − 1`.
///
/// `norms` lists `(k, w^{(k)})`. When `tail = Some(ε)`, every size above
/// the largest listed one is dominated by `ε^k` and contributes
/// `Σ_{k>K} (εe^a)^k` (infinite when `εe^a ≥ 1`).
pub fn convergence_check(norms: &[(usize, f64)], a: f64, tail: Option<f64>) -> Result<ConvergenceVerdict> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be > 0, got {a}")));
    }
    let mut lhs = NeumaierSum::new();
    for &(k, w) in norms {
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("weight norm for k={k} must be ≥ 0")));
        }
        lhs.add(w * (a * k as f64).exp());
    }
    let k_max = norms.iter().map(|&(k, _)| k).max().unwrap_or(0);
    if let Some(eps) = tail {
        let ratio = eps * a.exp();
        if ratio >= 1.0 {
            let rhs = a.exp_m1();
            return Ok(ConvergenceVerdict {
                satisfied: false,
                lhs: f64::INFINITY,
                rhs,
                truncated: false,
            });
        } else if ratio > 0.0 {
            lhs.add(ratio.powi(k_max as i32 + 1) / (1.0 - ratio));
        }
    }
    let lhs = lhs.value();
    let rhs = a.exp_m1();
    Ok(ConvergenceVerdict {
        satisfied: lhs <= rhs * (1.0 + CONVERGENCE_RTOL),
        lhs,
        rhs,
        truncated: tail.is_none(),
    })
}

/// Tree-graph bound at the worst spin configuration of a polymer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeGraphBound {
    /// `max_s |Σ_{g∈G_R} Π (e^{J s s} − 1)|`.
    pub lhs: f64,
    /// `max_s e^{|R| J_{r0} σ²/2} Σ_{τ∈T_R} Π (1 − e^{−|J s s|})`.
    pub rhs_trees: f64,
    /// `e^{|R| J_{r0} σ²/2} σ^{2|R|−2} Σ_{τ∈T_R} Π |J|`.
    pub rhs_j: f64,
    pub configs: usize,
    /// Configurations where `lhs ≤ rhs_trees ≤ rhs_J` failed.
    pub violations: usize,
    /// `Σ_{xy⊂R} J s s ≥ −|R| J_{r0} σ²/2` held at every configuration.
    pub stable: bool,
}

/// Largest polymer for [`tree_graph_bound_check`].
pub const MAX_TREE_CHECK_SIZE: usize = 6;

/// Check `|Σ_g Π f| ≤ e^{|R|J_{r0}σ²/2} Σ_τ Π(1 − e^{−|Jss|}) ≤
/// e^{|R|J_{r0}σ²/2} σ^{2|R|−2} Σ_τ Π|J|` at every spin configuration of `R`.
pub fn tree_graph_bound_check(sys: &LocalSystem, r: &Polymer, r0_norm: f64) -> Result<TreeGraphBound> {
    check_size(r, sys)?;
    let k = r.len();
    if k > MAX_TREE_CHECK_SIZE {
        return Err(Error::capacity(
            "tree-graph check polymer size",
            k as u128,
            MAX_TREE_CHECK_SIZE as u128,
        ));
    }
    if !(r0_norm >= 0.0) {
        return Err(Error::Domain("J_{r0} must be ≥ 0".into()));
    }
    let sigma = sys.spins().sigma() as f64;
    let trees = spanning_trees(k)?;
    let tree_edges: Vec<Vec<(usize, usize)>> = trees.iter().map(|t| t.edges()).collect();
    let j = |a: usize, b: usize| sys.coupling(r.indices()[a], r.indices()[b]);
    let stab = (k as f64 * r0_norm * sigma * sigma / 2.0).exp();
    let rhs_j = stab
        * sigma.powi(2 * k as i32 - 2)
        * tree_edges
            .iter()
            .map(|e| e.iter().map(|&(a, b)| j(a, b).abs()).product::<f64>())
            .sum::<f64>();
    let vals = sys.spins().values();
    let mut digits = vec![0usize; k];
    let mut out = TreeGraphBound {
        lhs: 0.0,
        rhs_trees: 0.0,
        rhs_j,
        configs: 0,
        violations: 0,
        stable: true,
    };
    loop {
        let s: Vec<f64> = digits.iter().map(|&d| vals[d] as f64).collect();
        let mut f = vec![0.0; k * k];
        let mut energy = 0.0;
        let mut abs_energy = 0.0;
        for a in 0..k {
            for b in (a + 1)..k {
                let e = j(a, b) * s[a] * s[b];
                energy += e;
                abs_energy += e.abs();
                f[a * k + b] = e.exp_m1();
                f[b * k + a] = e.exp_m1();
            }
        }
        if energy < -(k as f64) * r0_norm * sigma * sigma / 2.0 * (1.0 + 1e-12) - 1e-300 {
            out.stable = false;
        }
        let lhs = connected_graph_sum(k, &f).abs();
        let rhs_trees = stab
            * tree_edges
                .iter()
                .map(|e| {
                    e.iter()
                        .map(|&(a, b)| -(-(j(a, b) * s[a] * s[b]).abs()).exp_m1())
                        .product::<f64>()
                })
                .sum::<f64>();
        // the subset recursion cancels terms as large as Π(1+|f|) ≤ e^{Σ|Jss|}
        let rounding = 64.0 * f64::EPSILON * abs_energy.exp();
        let slack = |x: f64| x * (1.0 + 1e-12) + rounding;
        if lhs > slack(rhs_trees) || rhs_trees > slack(rhs_j) {
            out.violations += 1;
        }
        out.lhs = out.lhs.max(lhs);
        out.rhs_trees = out.rhs_trees.max(rhs_trees);
        out.configs += 1;
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
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

/// Form of the bound on `w^{(k)}` for polymers of size `k ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoForm {
    /// `e^{dk}(1+δσ)^k e^{kJσ²/2} σ^{2k−2} J^{k−1} k^{k−2}/(k−1)!`.
    Tight,
    /// `[(1+δσ) e^{1+d} e^{Jσ²/2} σ² J^{1/2}]^k` (needs `J ≤ 1` to dominate
    /// the tight form).
    Explicit,
    /// As `Explicit` with `1+δσ` replaced by 2.
    Majorized,
}

/// Bound on `sup_x Σ_{R∋x,|R|=k} w_0(R) e^{d|R|}` from the tree-graph
/// inequality and Cayley's formula; `dressing = d` is 1 for `w_1` and `c`
/// for `w_c`.
pub fn norm_bound_bo2(k: usize, delta: f64, sigma: f64, j_r0: f64, dressing: f64, form: BoForm) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain("the tree-graph norm bound needs k ≥ 2".into()));
    }
    if !(delta >= 0.0 && sigma >= 1.0 && j_r0 >= 0.0 && dressing >= 0.0) {
        return Err(Error::Domain("bound parameters out of range".into()));
    }
    let kf = k as f64;
    let ds = 1.0 + delta * sigma;
    let stab = (j_r0 * sigma * sigma / 2.0).exp();
    Ok(match form {
        BoForm::Tight => {
            let log_fact: f64 = (1..k).map(|i| (i as f64).ln()).sum();
            let log_cayley = (kf - 2.0) * kf.ln() - log_fact;
            (dressing * kf).exp()
                * (ds * stab).powi(k as i32)
                * sigma.powi(2 * k as i32 - 2)
                * j_r0.powi(k as i32 - 1)
                * log_cayley.exp()
        }
        BoForm::Explicit => (ds * (1.0 + dressing).exp() * stab * sigma * sigma * j_r0.sqrt()).powi(k as i32),
        BoForm::Majorized => (2.0 * (1.0 + dressing).exp() * stab * sigma * sigma * j_r0.sqrt()).powi(k as i32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinInterval;

    fn chain(n: usize, j: f64) -> LocalSystem {
        let pairs: Vec<_> = (0..n - 1).map(|i| (i, i + 1, j)).collect();
        LocalSystem::from_pairs(SpinInterval::ising(), n, &pairs, vec![0.0; n]).unwrap()
    }

    #[test]
    fn w0_examples() {
        let sys = chain(3, 0.1);
        assert!((weight_w0(&sys, &Polymer::new([1]).unwrap(), 0.04).unwrap() - 0.04).abs() < 1e-16);
        let w = weight_w0(&sys, &Polymer::new([0, 1]).unwrap(), 0.04).unwrap();
        // |C_R(s)| sits inside the configuration sum
        let expected = 1.04f64.powi(2) * (0.1f64.exp_m1().abs() + (-0.1f64).exp_m1().abs()) / 2.0;
        assert!((w - expected).abs() < 1e-15, "{w} {expected}");
        assert!((w - 0.108_340_356_821_463).abs() < 1e-12);
        assert_eq!(weight_w0(&sys, &Polymer::new([0, 2]).unwrap(), 0.04).unwrap(), 0.0);
    }

    #[test]
    fn norm_examples() {
        let sys = chain(5, 0.1);
        let d = 0.04;
        let n1 = weight_norm(&sys, 1, WeightKind::W1, d).unwrap();
        assert!((n1 - d * 1f64.exp()).abs() < 1e-15);
        let n2 = weight_norm(&sys, 2, WeightKind::W0, d).unwrap();
        let pair = weight_w0(&sys, &Polymer::new([1, 2]).unwrap(), d).unwrap();
        assert!((n2 - 2.0 * pair).abs() < 1e-15);
        let free = LocalSystem::free(SpinInterval::ising(), vec![0.0; 4]);
        assert_eq!(weight_norm(&free, 2, WeightKind::W1, d).unwrap(), 0.0);
    }

    #[test]
    fn convergence_examples() {
        let v = convergence_check(&[(1, 0.0), (2, 0.0)], 0.5, Some(0.0)).unwrap();
        assert!(v.satisfied && v.lhs == 0.0 && v.rhs > 0.0);
        let eps: f64 = 0.25;
        let norms: Vec<_> = (1..=8).map(|k| (k, eps.powi(k as i32))).collect();
        let v = convergence_check(&norms, 2f64.ln(), Some(eps)).unwrap();
        assert!(v.satisfied, "{v:?}");
        assert!((v.lhs - 1.0).abs() < 1e-14 && (v.rhs - 1.0).abs() < 1e-15);
        let v = convergence_check(&[(1, 0.6)], 2f64.ln(), Some(0.6)).unwrap();
        assert!(!v.satisfied && v.lhs.is_infinite());
        assert!(convergence_check(&[], 2f64.ln(), None).unwrap().truncated);
    }

    #[test]
    fn tree_graph_examples() {
        let free = LocalSystem::free(SpinInterval::ising(), vec![0.0; 3]);
        let b = tree_graph_bound_check(&free, &Polymer::new([0, 1]).unwrap(), 0.0).unwrap();
        assert_eq!((b.lhs, b.rhs_trees, b.rhs_j), (0.0, 0.0, 0.0));
        let sys = chain(2, 0.1);
        let b = tree_graph_bound_check(&sys, &Polymer::new([0, 1]).unwrap(), 0.2).unwrap();
        assert!((b.lhs - (0.1f64.exp() - 1.0)).abs() < 1e-15);
        assert!((b.rhs_trees - 0.2f64.exp() * (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((b.rhs_j - 0.2f64.exp() * 0.1).abs() < 1e-15);
        assert_eq!(b.violations, 0);
        assert!(b.stable);
    }

    #[test]
    fn bo2_forms() {
        assert_eq!(norm_bound_bo2(3, 0.01, 1.0, 0.0, 1.0, BoForm::Majorized).unwrap(), 0.0);
        let j: f64 = 0.01;
        let m = norm_bound_bo2(2, 0.01, 1.0, j, 1.0, BoForm::Majorized).unwrap();
        let expected = (2.0 * 1f64.exp().powi(2) * j.sqrt() * (j / 2.0).exp()).powi(2);
        assert!((m - expected).abs() < 1e-14 * expected);
        for k in 2..8 {
            let t = norm_bound_bo2(k, 0.01, 2.0, j, 1.0, BoForm::Tight).unwrap();
            let e = norm_bound_bo2(k, 0.01, 2.0, j, 1.0, BoForm::Explicit).unwrap();
            let m = norm_bound_bo2(k, 0.01, 2.0, j, 1.0, BoForm::Majorized).unwrap();
            assert!(t <= e && e <= m);
        }
        assert!(norm_bound_bo2(1, 0.01, 1.0, j, 1.0, BoForm::Tight).is_err());
    }
}

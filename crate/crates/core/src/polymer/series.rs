use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::partition::{direct_dressed, PolymerGas};
use super::{ActivityParams, Expansion};
use crate::combinatorics::connected_graph_sum;
use crate::error::{Error, Result};
use crate::exact::{ExactEngine, DEFAULT_BUDGET};
use crate::model::LocalSystem;
use crate::numeric::ComplexSum;

/// Largest cluster order of the truncated series.
pub const MAX_ORDER: usize = 6;

/// Options of [`truncated_log_partition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Truncation order `K` (number of polymers per cluster).
    pub order: usize,
    /// Replace every factor by its absolute value (the positive-term series).
    pub absolute: bool,
    /// Cap on the number of polymer multisets visited.
    pub budget: u128,
}

impl SeriesOptions {
    pub fn new(order: usize) -> Self {
        SeriesOptions {
            order,
            absolute: false,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn absolute(mut self) -> Self {
        self.absolute = true;
        self
    }
}

/// Partial sums of the cluster expansion of `ln Ξ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSeriesResult {
    pub t: f64,
    pub truncation_order: usize,
    pub absolute: bool,
    /// Contribution of clusters with exactly `k` polymers, `k = 1..=K`.
    pub order_terms: Vec<Complex64>,
    /// Cumulative sums of `order_terms`.
    pub partial_sums: Vec<Complex64>,
    /// Certified bound on `Σ_{k>K}` of the positive-term series at this `t`
    /// (infinite when the convergence criterion cannot be met).
    pub dominating_tail: f64,
}

fn multiset_count(p: usize, k: usize) -> u128 {
    // C(p + k − 1, k)
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.saturating_mul(p as u128 + i) / (i + 1);
    }
    c
}

/// Cumulative partial sums of
/// `Σ_{k≤K} (1/k!) Σ_{(R_1..R_k)} φᵀ(R_1..R_k) Π ξ(R_i)`.
///
/// Ordered tuples are grouped into multisets `R_1 ≤ .. ≤ R_k`, each standing
/// for `k!/Π mult!` tuples, so the weight is `φᵀ Π ξ / Π mult!`. Multisets
/// whose intersection graph is disconnected are skipped (`φᵀ = 0`).
pub fn truncated_log_partition(
    sys: &LocalSystem,
    params: &ActivityParams,
    opts: SeriesOptions,
) -> Result<ClusterSeriesResult> {
    params.validate()?;
    let gas = PolymerGas::new(sys, params.expansion)?;
    cluster_series(&gas, params.t, opts)
}

/// [`truncated_log_partition`] on a tabulated gas.
pub fn cluster_series(gas: &PolymerGas, t: f64, opts: SeriesOptions) -> Result<ClusterSeriesResult> {
    let k_max = opts.order;
    if k_max == 0 || k_max > MAX_ORDER {
        return Err(Error::Domain(format!(
            "series order must be in 1..={MAX_ORDER}, got {k_max}"
        )));
    }
    let p = gas.len();
    let visits: u128 = (1..=k_max).map(|k| multiset_count(p, k)).sum();
    if visits > opts.budget {
        return Err(Error::capacity("cluster multisets", visits, opts.budget));
    }
    let masks: Vec<u64> = gas.masks().collect();
    let mut xi = gas.activities(t);
    if opts.absolute {
        for x in xi.iter_mut() {
            *x = Complex64::new(x.norm(), 0.0);
        }
    }
    let per_root: Vec<Vec<ComplexSum>> = (0..p)
        .into_par_iter()
        .map(|root| {
            let mut acc = vec![ComplexSum::new(); k_max];
            let mut stack = vec![root];
            grow(&masks, &xi, opts.absolute, k_max, &mut stack, &mut acc);
            acc
        })
        .collect();
    let mut totals = vec![ComplexSum::new(); k_max];
    for root in &per_root {
        for (t, r) in totals.iter_mut().zip(root) {
            t.merge(r);
        }
    }
    let order_terms: Vec<Complex64> = totals.iter().map(ComplexSum::value).collect();
    let partial_sums = order_terms
        .iter()
        .scan(Complex64::new(0.0, 0.0), |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let abs: Vec<f64> = xi.iter().map(|x| x.norm()).collect();
    Ok(ClusterSeriesResult {
        t,
        truncation_order: k_max,
        absolute: opts.absolute,
        order_terms,
        partial_sums,
        dominating_tail: certified_tail(gas.system().len(), &masks, &abs, k_max),
    })
}

fn grow(masks: &[u64], xi: &[Complex64], absolute: bool, k_max: usize, stack: &mut Vec<usize>, acc: &mut [ComplexSum]) {
    let k = stack.len();
    if let Some(coef) = cluster_coefficient(masks, stack) {
        let coef = if absolute { coef.abs() } else { coef };
        if coef != 0.0 {
            let prod: Complex64 = stack.iter().map(|&i| xi[i]).product();
            acc[k - 1].add(prod * coef);
        }
    }
    if k == k_max {
        return;
    }
    let last = *stack.last().expect("nonempty");
    for next in last..masks.len() {
        stack.push(next);
        grow(masks, xi, absolute, k_max, stack, acc);
        stack.pop();
    }
}

/// `φᵀ / Π mult!` for a non-decreasing index list, `None` when the
/// intersection graph is disconnected.
fn cluster_coefficient(masks: &[u64], idx: &[usize]) -> Option<f64> {
    let k = idx.len();
    // connectivity of the intersection graph
    let mut seen = 1u32;
    let mut frontier = 1u32;
    while frontier != 0 {
        let mut next = 0u32;
        let mut f = frontier;
        while f != 0 {
            let a = f.trailing_zeros() as usize;
            f &= f - 1;
            for b in 0..k {
                if masks[idx[a]] & masks[idx[b]] != 0 {
                    next |= 1 << b;
                }
            }
        }
        frontier = next & !seen;
        seen |= next;
    }
    if seen.count_ones() as usize != k {
        return None;
    }
    let mut f = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            if masks[idx[a]] & masks[idx[b]] != 0 {
                f[a * k + b] = -1.0;
                f[b * k + a] = -1.0;
            }
        }
    }
    let phi = connected_graph_sum(k, &f);
    let mut mult = 1.0;
    let mut run = 1;
    for w in idx.windows(2) {
        if w[0] == w[1] {
            run += 1;
            mult *= run as f64;
        } else {
            run = 1;
        }
    }
    Some(phi / mult)
}

/// Bound on the orders above `K` of the positive-term series.
///
/// For a scale `λ` and `a > 0` with
/// `Σ_k sup_x Σ_{R∋x,|R|=k} λ|ξ(R)| e^{ak} ≤ e^a − 1`, the positive series
/// at activities `λ|ξ|` is at most `B = Σ_R λ|ξ(R)| e^{a|R|}`; its order-`k`
/// part scales as `λ^k`, so orders above `K` sum to at most
/// `B λ^{−K}/(λ − 1)`. The bound is minimized over a grid of `a`.
pub(crate) fn certified_tail(n_sites: usize, masks: &[u64], abs: &[f64], k_max: usize) -> f64 {
    if abs.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let max_size = masks.iter().map(|m| m.count_ones() as usize).max().unwrap_or(1);
    // per size k, per site x: Σ_{R∋x,|R|=k} |ξ(R)|
    let mut per_site = vec![vec![0.0; n_sites]; max_size + 1];
    for (m, &x) in masks.iter().zip(abs) {
        let k = m.count_ones() as usize;
        let mut r = *m;
        while r != 0 {
            let i = r.trailing_zeros() as usize;
            r &= r - 1;
            per_site[k][i] += x;
        }
    }
    let norms: Vec<f64> = per_site
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .collect();
    let mut best = f64::INFINITY;
    for step in 0..=400 {
        let a = 1e-4 * (1e5f64).powf(step as f64 / 400.0);
        let load: f64 = norms.iter().enumerate().map(|(k, w)| w * (a * k as f64).exp()).sum();
        let lambda = a.exp_m1() / load;
        if !(lambda > 1.0) {
            continue;
        }
        let mass: f64 = masks
            .iter()
            .zip(abs)
            .map(|(m, x)| x * (a * m.count_ones() as f64).exp())
            .sum();
        let bound = mass * lambda.powi(1 - k_max as i32) / (lambda - 1.0);
        best = best.min(bound);
    }
    best
}

/// `ln Ξ(t)` (or `ln Ξᶜ(t)`) on the branch continuous in `t` from `t = 0`,
/// tracked with adaptive steps from a direct evaluation.
pub fn exact_log_partition(sys: &LocalSystem, params: &ActivityParams) -> Result<Complex64> {
    params.validate()?;
    let eval: Box<dyn Fn(f64) -> Result<Complex64>> = match params.expansion {
        Expansion::Full => {
            let dist = ExactEngine::default().distribution(sys)?;
            let log_norm: f64 = (0..sys.len())
                .map(|i| {
                    let b = sys.field(i);
                    let vals = sys.spins().values();
                    let top = vals.iter().map(|&s| b * s as f64).fold(f64::NEG_INFINITY, f64::max);
                    top + vals.iter().map(|&s| (b * s as f64 - top).exp()).sum::<f64>().ln()
                })
                .sum();
            let base = sys.len() as i64 * sys.spins().lo();
            let step = sys.spins().step();
            let scale = (dist.log_scale - log_norm).exp();
            Box::new(move |t| {
                let mut s = ComplexSum::new();
                for (j, &w) in dist.weights.iter().enumerate() {
                    s.add(Complex64::from_polar(w, t * (base + step * j as i64) as f64));
                }
                Ok(s.value() * scale)
            })
        }
        Expansion::Dressed { c } => {
            let sys = sys.clone();
            Box::new(move |t| direct_dressed(&sys, c, t))
        }
    };
    track_log(eval, params.t)
}

fn track_log(eval: impl Fn(f64) -> Result<Complex64>, target: f64) -> Result<Complex64> {
    let mut z = eval(0.0)?;
    if z.norm() == 0.0 {
        return Err(Error::Degenerate("Ξ vanishes at t = 0".into()));
    }
    let mut log = z.ln();
    let mut t = 0.0;
    let mut h = target / 64.0;
    while t != target {
        let next = if (target - t).abs() <= h.abs() { target } else { t + h };
        let w = eval(next)?;
        if w.norm() == 0.0 {
            return Err(Error::Degenerate(format!("Ξ vanishes at t = {next}")));
        }
        let turn = (w / z).arg();
        if turn.abs() > std::f64::consts::FRAC_PI_8 {
            h /= 2.0;
            if h.abs() < 1e-12 * target.abs().max(1.0) {
                return Err(Error::Degenerate("cannot track the branch of ln Ξ".into()));
            }
            continue;
        }
        log += Complex64::new(w.norm().ln() - z.norm().ln(), turn);
        z = w;
        t = next;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinInterval;

    #[test]
    fn free_spins_reproduce_log() {
        let sys = LocalSystem::free(SpinInterval::new(0, 1).unwrap(), vec![0.3, -0.2]);
        let t = 0.5;
        let r = truncated_log_partition(&sys, &ActivityParams::full(t), SeriesOptions::new(6)).unwrap();
        let exact = exact_log_partition(&sys, &ActivityParams::full(t)).unwrap();
        let xi_max = (0..2)
            .map(|i| {
                let p = sys.single_site_probs(i);
                (Complex64::new(p[0], 0.0) + Complex64::from_polar(p[1], t) - 1.0).norm()
            })
            .fold(0.0, f64::max);
        let err = (r.partial_sums[5] - exact).norm();
        assert!(err <= 2.0 * xi_max.powi(7) / (1.0 - xi_max), "{err}");
        assert!(err <= r.dominating_tail);
    }

    #[test]
    fn first_order_at_zero_is_sum_of_pair_activities() {
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 3, &[(0, 1, 0.1), (1, 2, 0.1)], vec![0.0; 3]).unwrap();
        let r = truncated_log_partition(&sys, &ActivityParams::full(0.0), SeriesOptions::new(1)).unwrap();
        let gas = PolymerGas::new(&sys, Expansion::Full).unwrap();
        let sum: Complex64 = gas
            .polymers()
            .filter(|(p, _)| p.len() >= 2)
            .map(|(_, t)| t.value(0.0))
            .sum();
        assert!((r.partial_sums[0] - sum).norm() < 1e-15);
    }

    #[test]
    fn chain_series_within_tail() {
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 3, &[(0, 1, 0.1), (1, 2, 0.1)], vec![0.0; 3]).unwrap();
        let params = ActivityParams::full(0.2);
        let exact = exact_log_partition(&sys, &params).unwrap();
        let r = truncated_log_partition(&sys, &params, SeriesOptions::new(4)).unwrap();
        let err = (r.partial_sums[3] - exact).norm();
        assert!(r.dominating_tail.is_finite());
        assert!(err <= r.dominating_tail, "{err} vs {}", r.dominating_tail);
        let mut prev = f64::INFINITY;
        for s in &r.partial_sums {
            let e = (s - exact).norm();
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn branch_tracking_passes_winding() {
        // Ξ(t) = cos^2 t for two free ±1 spins stays real; |ln| grows
        let sys = LocalSystem::free(SpinInterval::new(0, 1).unwrap(), vec![0.0; 3]);
        let t = 2.5;
        let l = exact_log_partition(&sys, &ActivityParams::full(t)).unwrap();
        // Ξ = ((1 + e^{it})/2)^3, continuous log = 3 (ln cos(t/2) + i t/2)
        let expected = Complex64::new(3.0 * (t / 2.0).cos().ln(), 1.5 * t);
        assert!((l - expected).norm() < 1e-12, "{l}");
    }
}

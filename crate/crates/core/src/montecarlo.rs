//! Single-site Metropolis sampling of the Gibbs measure on a region, with
//! batch-jackknife error bars.
//!
//! ```
//! use lclt_lab::model::*;
//! use lclt_lab::montecarlo::*;
//!
//! let model = GibbsModel::new(
//!     LatticeBox::new(1, 3, 1).unwrap(),
//!     SpinInterval::ising(),
//!     Coupling::NearestNeighbor { strength: 0.0 },
//!     BoundaryCondition::Zero,
//!     None,
//! ).unwrap();
//! let spec = ChainSpec { seed: 1, burn_in: 10, samples: 3000, thinning: 1, chains: 2 };
//! let est = sample_statistics(&model, &spec).unwrap();
//! assert!(est.mean.value.abs() < 4.0 * est.mean.std_error);
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GibbsModel, LocalSystem, Omega, Region};
use crate::numeric::std_normal_pdf;

/// Batches per chain for the error bars.
pub const BATCHES_PER_CHAIN: usize = 30;

/// Length and layout of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub seed: u64,
    /// Sweeps discarded at the start of every chain.
    pub burn_in: usize,
    /// Samples kept per chain.
    pub samples: usize,
    /// Sweeps between kept samples.
    pub thinning: usize,
    pub chains: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            seed: 0,
            burn_in: 1000,
            samples: 20_000,
            thinning: 1,
            chains: 4,
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::Domain(format!(
                "need at least 100 samples per chain, got {}",
                self.samples
            )));
        }
        if self.chains < 2 {
            return Err(Error::Domain(format!("need at least 2 chains, got {}", self.chains)));
        }
        if self.thinning == 0 {
            return Err(Error::Domain("thinning must be ≥ 1".into()));
        }
        if self.samples < BATCHES_PER_CHAIN {
            return Err(Error::Domain("fewer samples than batches".into()));
        }
        Ok(())
    }

    fn total(&self) -> usize {
        self.samples * self.chains
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Sample count corrected for autocorrelation, at most
    /// `chains · samples`.
    pub n_effective: f64,
}

impl Estimate {
    /// `|value − exact| ≤ k · std_error`.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.value - exact).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatisticsEstimate {
    pub mean: Estimate,
    pub variance: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfGapEstimate {
    /// Local CLT gap, per lattice span of the spin sum.
    pub gap: Estimate,
    /// Lattice point attaining the plug-in gap.
    pub argmax: i64,
    pub mean: Estimate,
    pub variance: Estimate,
    /// Empirical law of `S` with multinomial standard errors.
    pub pmf: Vec<(i64, Estimate)>,
}

/// Nonzero couplings of each site.
struct Neighbors(Vec<Vec<(usize, f64)>>);

impl Neighbors {
    fn new(sys: &LocalSystem) -> Self {
        Neighbors(
            (0..sys.len())
                .map(|i| {
                    sys.coupling_row(i)
                        .iter()
                        .enumerate()
                        .filter(|&(j, &c)| j != i && c != 0.0)
                        .map(|(j, &c)| (j, c))
                        .collect()
                })
                .collect(),
        )
    }
}

/// One Metropolis chain; every `thinning` sweeps after burn-in, `record` is
/// called with the configuration.
///
/// Each chain draws from its own ChaCha stream keyed by `(seed, chain)`, and
/// the draws are consumed in sweep and site order, so a chain's output does
/// not depend on how chains are scheduled.
fn run_chain(sys: &LocalSystem, nb: &Neighbors, spec: &ChainSpec, chain: usize, mut record: impl FnMut(&[i64])) {
    let vals = sys.spins().values();
    let card = vals.len();
    let lazy = card == 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(chain as u64);
    let mut idx: Vec<usize> = (0..sys.len()).map(|_| rng.gen_range(0..card)).collect();
    let mut s: Vec<i64> = idx.iter().map(|&k| vals[k]).collect();
    let sweeps = spec.burn_in + spec.samples * spec.thinning;
    for sweep in 0..sweeps {
        for i in 0..s.len() {
            // two-valued spins at zero local field would flip deterministically
            // (a periodic, reducible kernel); hold half the time instead
            if lazy && rng.gen::<bool>() {
                continue;
            }
            // uniform on I \ {current}
            let mut k = rng.gen_range(0..card - 1);
            if k >= idx[i] {
                k += 1;
            }
            let u: f64 = rng.gen();
            let local = sys.field(i) + nb.0[i].iter().map(|&(j, c)| c * s[j] as f64).sum::<f64>();
            let delta = (vals[k] - s[i]) as f64 * local;
            if delta >= 0.0 || u < delta.exp() {
                idx[i] = k;
                s[i] = vals[k];
            }
        }
        if sweep >= spec.burn_in && (sweep - spec.burn_in + 1).is_multiple_of(spec.thinning) {
            record(&s);
        }
    }
}

/// Every kept configuration, per chain.
pub fn sample_configurations(sys: &LocalSystem, spec: &ChainSpec) -> Result<Vec<Vec<Vec<i64>>>> {
    spec.validate()?;
    let nb = Neighbors::new(sys);
    Ok((0..spec.chains)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::with_capacity(spec.samples);
            run_chain(sys, &nb, spec, c, |s| out.push(s.to_vec()));
            out
        })
        .collect())
}

/// Spin-sum samples per chain.
pub fn sample_sums(sys: &LocalSystem, spec: &ChainSpec) -> Result<Vec<Vec<i64>>> {
    spec.validate()?;
    if sys.is_empty() {
        return Err(Error::Domain("empty region".into()));
    }
    let nb = Neighbors::new(sys);
    Ok((0..spec.chains)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::with_capacity(spec.samples);
            run_chain(sys, &nb, spec, c, |s| out.push(s.iter().sum()));
            out
        })
        .collect())
}

/// Consecutive batches of every chain, in chain order.
fn batches(sums: &[Vec<i64>]) -> Vec<&[i64]> {
    let mut out = Vec::new();
    for chain in sums {
        let len = chain.len() / BATCHES_PER_CHAIN;
        for b in 0..BATCHES_PER_CHAIN {
            let end = if b + 1 == BATCHES_PER_CHAIN {
                chain.len()
            } else {
                (b + 1) * len
            };
            out.push(&chain[b * len..end]);
        }
    }
    out
}

/// Delete-one-batch jackknife of a statistic of the pooled sample.
///
/// `stat` maps per-batch sufficient statistics, summed over the batches
/// kept, to the estimate.
fn jackknife<A, F>(
    parts: &[A],
    zero: A,
    add: impl Fn(&mut A, &A, f64),
    stat: F,
    n_total: usize,
    sample_var: f64,
) -> Estimate
where
    A: Clone,
    F: Fn(&A) -> f64,
{
    let mut total = zero.clone();
    for p in parts {
        add(&mut total, p, 1.0);
    }
    let value = stat(&total);
    let b = parts.len() as f64;
    let leave: Vec<f64> = parts
        .iter()
        .map(|p| {
            let mut t = total.clone();
            add(&mut t, p, -1.0);
            stat(&t)
        })
        .collect();
    let mean = leave.iter().sum::<f64>() / b;
    let var = (b - 1.0) / b * leave.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let std_error = var.sqrt();
    let n_effective = if std_error > 0.0 && sample_var > 0.0 {
        (sample_var / var).min(n_total as f64)
    } else {
        n_total as f64
    };
    Estimate {
        value,
        std_error,
        n_effective,
    }
}

/// Power sums `(n, Σ S, Σ S²)` of one batch, centered at `shift` to limit
/// cancellation.
fn moments(batch: &[i64], shift: f64) -> [f64; 3] {
    let mut m = [0.0; 3];
    for &s in batch {
        let x = s as f64 - shift;
        m[0] += 1.0;
        m[1] += x;
        m[2] += x * x;
    }
    m
}

fn add3(acc: &mut [f64; 3], p: &[f64; 3], sign: f64) {
    for k in 0..3 {
        acc[k] += sign * p[k];
    }
}

fn statistics_from_sums(sums: &[Vec<i64>]) -> StatisticsEstimate {
    let all: Vec<f64> = sums.iter().flatten().map(|&s| s as f64).collect();
    let n = all.len();
    let shift = all.iter().sum::<f64>() / n as f64;
    let parts: Vec<[f64; 3]> = batches(sums).iter().map(|b| moments(b, shift)).collect();
    let mean_of = |m: &[f64; 3]| shift + m[1] / m[0];
    let var_of = |m: &[f64; 3]| {
        let mu = m[1] / m[0];
        (m[2] / m[0] - mu * mu) * m[0] / (m[0] - 1.0)
    };
    let mut total = [0.0; 3];
    for p in &parts {
        add3(&mut total, p, 1.0);
    }
    let v = var_of(&total);
    // fourth central moment for the effective size of the variance estimate
    let m4 = all.iter().map(|x| (x - shift).powi(4)).sum::<f64>() / n as f64;
    let mean = jackknife(&parts, [0.0; 3], add3, mean_of, n, v);
    let variance = jackknife(&parts, [0.0; 3], add3, var_of, n, (m4 - v * v).max(0.0));
    StatisticsEstimate { mean, variance }
}

/// Mean and variance of `S` on the full box under the model boundary.
pub fn sample_statistics(model: &GibbsModel, spec: &ChainSpec) -> Result<StatisticsEstimate> {
    let sys = model.local_system(Region::Full, &Omega::boundary())?;
    sample_statistics_of(&sys, spec)
}

pub fn sample_statistics_of(sys: &LocalSystem, spec: &ChainSpec) -> Result<StatisticsEstimate> {
    Ok(statistics_from_sums(&sample_sums(sys, spec)?))
}

/// Plug-in local CLT gap of the sampled law of `S` on the full box.
pub fn sample_pmf_gap(model: &GibbsModel, spec: &ChainSpec) -> Result<PmfGapEstimate> {
    let sys = model.local_system(Region::Full, &Omega::boundary())?;
    sample_pmf_gap_of(&sys, spec)
}

pub fn sample_pmf_gap_of(sys: &LocalSystem, spec: &ChainSpec) -> Result<PmfGapEstimate> {
    if sys.len() < 2 {
        return Err(Error::Precondition(
            "a single-site region has no local CLT to speak of (variance too small)".into(),
        ));
    }
    let sums = sample_sums(sys, spec)?;
    let spins = sys.spins();
    let base = sys.len() as i64 * spins.lo();
    let step = spins.step();
    let bins = sys.len() * (spins.card() - 1) + 1;
    let stats = statistics_from_sums(&sums);
    if !(stats.variance.value > 0.0) {
        return Err(Error::Degenerate("sampled spin sum has zero variance".into()));
    }
    // per batch: histogram, followed by n, ΣS, ΣS² (shifted)
    let shift = stats.mean.value;
    let parts: Vec<Vec<f64>> = batches(&sums)
        .iter()
        .map(|b| {
            let mut h = vec![0.0; bins + 3];
            for &s in *b {
                h[((s - base) / step) as usize] += 1.0;
            }
            let m = moments(b, shift);
            h[bins..].copy_from_slice(&m);
            h
        })
        .collect();
    let add = |acc: &mut Vec<f64>, p: &Vec<f64>, sign: f64| {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += sign * x;
        }
    };
    let scale = 1.0 / step as f64;
    let gap_with_arg = |h: &Vec<f64>| {
        let n = h[bins];
        let mu = h[bins + 1] / n;
        let var = (h[bins + 2] / n - mu * mu) * n / (n - 1.0);
        let sd = var.sqrt();
        let mean = shift + mu;
        let mut best = (f64::NEG_INFINITY, 0i64);
        for (j, &c) in h[..bins].iter().enumerate() {
            let p = base + step * j as i64;
            let g = (sd * scale * c / n - std_normal_pdf((p as f64 - mean) / sd)).abs();
            if g > best.0 {
                best = (g, p);
            }
        }
        best
    };
    let n_total = spec.total();
    let mut total = vec![0.0; bins + 3];
    for p in &parts {
        add(&mut total, p, 1.0);
    }
    let (_, argmax) = gap_with_arg(&total);
    let gap = jackknife(&parts, vec![0.0; bins + 3], add, |h| gap_with_arg(h).0, n_total, 0.0);
    let n_eff_ratio = stats.mean.n_effective / n_total as f64;
    let pmf = (0..bins)
        .filter(|&j| total[j] > 0.0)
        .map(|j| {
            let q = total[j] / n_total as f64;
            let n_eff = n_total as f64 * n_eff_ratio;
            (
                base + step * j as i64,
                Estimate {
                    value: q,
                    std_error: (q * (1.0 - q) / n_eff).sqrt(),
                    n_effective: n_eff,
                },
            )
        })
        .collect();
    Ok(PmfGapEstimate {
        gap,
        argmax,
        mean: stats.mean,
        variance: stats.variance,
        pmf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactEngine;
    use crate::model::SpinInterval;

    fn spec(seed: u64, samples: usize) -> ChainSpec {
        ChainSpec {
            seed,
            burn_in: 200,
            samples,
            thinning: 1,
            chains: 4,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec {
            samples: 99,
            ..spec(0, 100)
        }
        .validate()
        .is_err());
        assert!(ChainSpec {
            chains: 1,
            ..spec(0, 100)
        }
        .validate()
        .is_err());
        assert!(spec(0, 100).validate().is_ok());
    }

    #[test]
    fn free_fair_spins() {
        let sys = LocalSystem::free(SpinInterval::ising(), vec![0.0; 8]);
        let est = sample_statistics_of(&sys, &spec(3, 20_000)).unwrap();
        assert!(est.mean.agrees_with(0.0, 3.0), "{est:?}");
        assert!(est.variance.agrees_with(8.0, 3.0), "{est:?}");
        assert!(est.mean.n_effective <= 80_000.0);
    }

    #[test]
    fn lattice_three_by_three_matches_exact() {
        let mut pairs = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let i = 3 * r + c;
                if c < 2 {
                    pairs.push((i, i + 1, 0.1));
                }
                if r < 2 {
                    pairs.push((i, i + 3, 0.1));
                }
            }
        }
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 9, &pairs, vec![0.0; 9]).unwrap();
        let exact = ExactEngine::default().statistics(&sys).unwrap();
        let est = sample_statistics_of(&sys, &spec(11, 20_000)).unwrap();
        assert!(est.mean.agrees_with(exact.mean_s, 3.0), "{est:?} {exact:?}");
        assert!(est.variance.agrees_with(exact.variance_s, 3.0), "{est:?} {exact:?}");
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let sys = LocalSystem::from_pairs(
            SpinInterval::new(-1, 1).unwrap(),
            4,
            &[(0, 1, 0.2), (2, 3, -0.1)],
            vec![0.1, 0.0, 0.0, -0.2],
        )
        .unwrap();
        let a = sample_pmf_gap_of(&sys, &spec(5, 500)).unwrap();
        let b = sample_pmf_gap_of(&sys, &spec(5, 500)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn single_site_gap_is_refused() {
        let sys = LocalSystem::free(SpinInterval::ising(), vec![0.0]);
        assert!(matches!(
            sample_pmf_gap_of(&sys, &spec(0, 200)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn free_spins_gap_matches_binomial() {
        let sys = LocalSystem::free(SpinInterval::ising(), vec![0.0; 9]);
        let exact = ExactEngine::default().pmf(&sys).unwrap().lclt_gap_per_span().unwrap();
        let est = sample_pmf_gap_of(&sys, &spec(7, 50_000)).unwrap();
        assert!(est.gap.agrees_with(exact, 3.0), "{est:?} {exact}");
    }

    #[test]
    fn two_site_chain_is_stationary() {
        // the empirical sweep kernel keeps the exact Gibbs law stationary
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 2, &[(0, 1, 0.3)], vec![0.2, -0.1]).unwrap();
        let probs = ExactEngine::default().gibbs_probabilities(&sys).unwrap();
        let configs = sample_configurations(&sys, &spec(9, 40_000)).unwrap();
        let index = |c: &[i64]| ((c[0] + 1) / 2 * 2 + (c[1] + 1) / 2) as usize;
        let mut pi = [0.0; 4];
        for (cfg, p) in &probs {
            pi[index(cfg)] = *p;
        }
        let mut counts = [[0.0f64; 4]; 4];
        for chain in &configs {
            for w in chain.windows(2) {
                counts[index(&w[0])][index(&w[1])] += 1.0;
            }
        }
        for b in 0..4 {
            let mut residual = -pi[b];
            let mut var = 0.0;
            for a in 0..4 {
                let row: f64 = counts[a].iter().sum();
                let q = counts[a][b] / row;
                residual += pi[a] * q;
                var += pi[a] * pi[a] * q * (1.0 - q) / row;
            }
            assert!(
                residual.abs() <= 3.0 * var.sqrt(),
                "state {b}: residual {residual}, se {}",
                var.sqrt()
            );
        }
    }
}

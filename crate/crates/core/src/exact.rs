//! Exhaustive enumeration of configurations of a finite region: partition
//! functions, the exact law of the spin sum, characteristic functions and
//! the local CLT gap.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GibbsModel, LocalSystem, Omega, Region, SpinInterval};
use crate::numeric::{std_normal_pdf, ComplexSum, NeumaierSum};

/// Default cap on the number of enumerated configurations.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

/// Gap configurations are scanned exhaustively up to this many.
pub const EXHAUSTIVE_GAP_LIMIT: u128 = 4096;

// configurations per sequential chunk
const INNER_STATES: u128 = 1 << 12;

/// Exact mean and variance of `S = Σ s_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Statistics {
    pub mean_s: f64,
    pub variance_s: f64,
    pub variance_density: f64,
    pub site_count: usize,
}

/// Exact law of `S` on its lattice `N·lo + step·j`, `j = 0..=N·(|I|-1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfTable {
    pub site_count: usize,
    pub step: i64,
    /// `(p, P(S = p))` in increasing `p`.
    pub probabilities: Vec<(i64, f64)>,
}

impl PmfTable {
    /// Build from explicit points; used to inject synthetic laws.
    pub fn from_points(site_count: usize, step: i64, probabilities: Vec<(i64, f64)>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Domain("empty pmf".into()));
        }
        if probabilities.iter().any(|&(_, q)| !(q >= 0.0)) {
            return Err(Error::Domain("negative or NaN probability".into()));
        }
        Ok(PmfTable {
            site_count,
            step,
            probabilities,
        })
    }

    pub fn support(&self) -> (i64, i64) {
        (
            self.probabilities[0].0,
            self.probabilities[self.probabilities.len() - 1].0,
        )
    }

    pub fn get(&self, p: i64) -> f64 {
        self.probabilities
            .binary_search_by_key(&p, |&(q, _)| q)
            .map(|i| self.probabilities[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities
            .iter()
            .map(|&(_, q)| q)
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn statistics(&self) -> Statistics {
        let mean: NeumaierSum = self.probabilities.iter().map(|&(p, q)| p as f64 * q).collect();
        let mean = mean.value();
        let var: NeumaierSum = self
            .probabilities
            .iter()
            .map(|&(p, q)| (p as f64 - mean).powi(2) * q)
            .collect();
        let variance = var.value().max(0.0);
        Statistics {
            mean_s: mean,
            variance_s: variance,
            variance_density: variance / self.site_count as f64,
            site_count: self.site_count,
        }
    }

    /// `Σ_p P(p) e^{itp}`.
    pub fn char_fn(&self, t: f64) -> Complex64 {
        let mut s = ComplexSum::new();
        for &(p, q) in &self.probabilities {
            s.add(Complex64::from_polar(q, t * p as f64));
        }
        s.value()
    }

    /// `sup_p |√D P(p) − φ((p − E S)/√D)|` over the lattice points of the
    /// table.
    pub fn lclt_gap(&self) -> Result<f64> {
        self.gap_with_scale(1.0)
    }

    /// As [`lclt_gap`](Self::lclt_gap) with `P(p)` divided by the lattice
    /// step: the local CLT normalization for a law of span `step`. Equal to
    /// the plain gap for consecutive-integer spins.
    pub fn lclt_gap_per_span(&self) -> Result<f64> {
        self.gap_with_scale(1.0 / self.step as f64)
    }

    fn gap_with_scale(&self, scale: f64) -> Result<f64> {
        let st = self.statistics();
        if !(st.variance_s > 0.0) {
            return Err(Error::Degenerate("spin sum has zero variance".into()));
        }
        let sd = st.variance_s.sqrt();
        Ok(self
            .probabilities
            .iter()
            .map(|&(p, q)| (sd * scale * q - std_normal_pdf((p as f64 - st.mean_s) / sd)).abs())
            .fold(0.0, f64::max))
    }

    /// Probabilities scaled by `√D`, alongside the Gaussian density at
    /// `z(p)`: the two curves compared by the local CLT.
    pub fn scaled_against_gaussian(&self) -> Result<Vec<(i64, f64, f64)>> {
        let st = self.statistics();
        if !(st.variance_s > 0.0) {
            return Err(Error::Degenerate("spin sum has zero variance".into()));
        }
        let sd = st.variance_s.sqrt();
        Ok(self
            .probabilities
            .iter()
            .map(|&(p, q)| (p, sd * q, std_normal_pdf((p as f64 - st.mean_s) / sd)))
            .collect())
    }
}

/// Unnormalized law of `S`: `Z · P(S = lattice point j) = e^{log_scale} · weights[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumDistribution {
    pub site_count: usize,
    pub spins: SpinInterval,
    pub log_scale: f64,
    pub weights: Vec<f64>,
}

impl SumDistribution {
    pub fn log_partition_function(&self) -> f64 {
        self.log_scale + self.weight_total().ln()
    }

    fn weight_total(&self) -> f64 {
        self.weights.iter().copied().collect::<NeumaierSum>().value()
    }

    pub fn pmf(&self) -> PmfTable {
        let total = self.weight_total();
        let base = self.site_count as i64 * self.spins.lo();
        let step = self.spins.step();
        PmfTable {
            site_count: self.site_count,
            step,
            probabilities: self
                .weights
                .iter()
                .enumerate()
                .map(|(j, w)| (base + step * j as i64, w / total))
                .collect(),
        }
    }
}

/// Result of the sup over exterior configurations of the decimated
/// characteristic function at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecimatedSup {
    pub t: f64,
    /// Largest `|Ẽ^ω e^{itS̃}|` found.
    pub sup: f64,
    pub argmax: String,
    /// `|E^ω_n e^{itS_n}|` under the model's own boundary condition.
    pub full_abs: f64,
    /// Whether every gap configuration (with the model boundary outside)
    /// was included, which makes `full_abs ≤ sup` a theorem rather than a
    /// sample.
    pub exhaustive_gap: bool,
    pub omega_count: usize,
}

/// Enumeration engine with a configuration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactEngine {
    budget: u128,
}

impl Default for ExactEngine {
    fn default() -> Self {
        ExactEngine { budget: DEFAULT_BUDGET }
    }
}

fn state_count(card: usize, n: usize) -> Option<u128> {
    (card as u128).checked_pow(n as u32)
}

impl ExactEngine {
    pub fn new(budget: u128) -> Self {
        ExactEngine { budget }
    }

    pub fn budget(&self) -> u128 {
        self.budget
    }

    fn check(&self, sys: &LocalSystem) -> Result<u128> {
        let what = format!(
            "exact enumeration of {}^{} configurations",
            sys.spins().card(),
            sys.len()
        );
        match state_count(sys.spins().card(), sys.len()) {
            Some(s) if s <= self.budget => Ok(s),
            Some(s) => Err(Error::capacity(what, s, self.budget)),
            None => Err(Error::capacity(what, u128::MAX, self.budget)),
        }
    }

    /// Exact unnormalized law of `S`.
    pub fn distribution(&self, sys: &LocalSystem) -> Result<SumDistribution> {
        self.check(sys)?;
        let bins = sys.len() * (sys.spins().card() - 1) + 1;
        let e_ref = reference_energy(sys);
        let hist = enumerate(
            sys,
            e_ref,
            || vec![NeumaierSum::new(); bins],
            |acc, j, w| acc[j].add(w),
            |acc, other| {
                for (a, b) in acc.iter_mut().zip(other.iter()) {
                    a.merge(b)
                }
            },
        );
        Ok(SumDistribution {
            site_count: sys.len(),
            spins: *sys.spins(),
            log_scale: e_ref,
            weights: hist.iter().map(NeumaierSum::value).collect(),
        })
    }

    /// `Z = Σ_s e^{-H(s)}`.
    pub fn partition_function(&self, sys: &LocalSystem) -> Result<f64> {
        Ok(self.log_partition_function(sys)?.exp())
    }

    pub fn log_partition_function(&self, sys: &LocalSystem) -> Result<f64> {
        Ok(self.distribution(sys)?.log_partition_function())
    }

    pub fn statistics(&self, sys: &LocalSystem) -> Result<Statistics> {
        Ok(self.pmf(sys)?.statistics())
    }

    pub fn pmf(&self, sys: &LocalSystem) -> Result<PmfTable> {
        Ok(self.distribution(sys)?.pmf())
    }

    /// `E[e^{itS}]`, accumulated configuration by configuration (independent
    /// of the histogram path used by [`PmfTable::char_fn`]).
    pub fn char_fn(&self, sys: &LocalSystem, t: f64) -> Result<Complex64> {
        Ok(self.char_fn_many(sys, &[t])?[0])
    }

    pub fn char_fn_many(&self, sys: &LocalSystem, ts: &[f64]) -> Result<Vec<Complex64>> {
        self.check(sys)?;
        let base = sys.len() as i64 * sys.spins().lo();
        let step = sys.spins().step();
        let bins = sys.len() * (sys.spins().card() - 1) + 1;
        let phases: Vec<Vec<Complex64>> = ts
            .iter()
            .map(|&t| {
                (0..bins)
                    .map(|j| Complex64::from_polar(1.0, t * (base + step * j as i64) as f64))
                    .collect()
            })
            .collect();
        let e_ref = reference_energy(sys);
        let (z, sums) = enumerate(
            sys,
            e_ref,
            || (NeumaierSum::new(), vec![ComplexSum::new(); ts.len()]),
            |acc, j, w| {
                acc.0.add(w);
                for (s, ph) in acc.1.iter_mut().zip(phases.iter()) {
                    s.add(ph[j] * w);
                }
            },
            |acc, other| {
                acc.0.merge(&other.0);
                for (a, b) in acc.1.iter_mut().zip(other.1.iter()) {
                    a.merge(b)
                }
            },
        );
        let z = z.value();
        Ok(sums.iter().map(|s| s.value() / z).collect())
    }

    /// Every configuration with its Gibbs probability, in mixed-radix order
    /// (first site slowest).
    pub fn gibbs_probabilities(&self, sys: &LocalSystem) -> Result<Vec<(Vec<i64>, f64)>> {
        let states = self.check(sys)?;
        let log_z = self.log_partition_function(sys)?;
        let vals = sys.spins().values();
        let n = sys.len();
        let mut out = Vec::with_capacity(states as usize);
        let mut digits = vec![0usize; n];
        loop {
            let config: Vec<i64> = digits.iter().map(|&k| vals[k]).collect();
            let p = (sys.log_weight(&config) - log_z).exp();
            out.push((config, p));
            let mut i = n;
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

    /// `sup_p |√D P(S=p) − φ(z(p))|`.
    pub fn lclt_gap(&self, sys: &LocalSystem) -> Result<f64> {
        self.pmf(sys)?.lclt_gap()
    }

    /// Constant `lo` and `hi` on the whole exterior followed by `samples`
    /// random exterior configurations drawn from `seed`.
    pub fn sampled_omegas(model: &GibbsModel, samples: usize, seed: u64) -> Vec<Omega> {
        let spins = model.spins();
        let gap_len = model.gap_sites().len();
        let mut set = vec![Omega::constant(spins.lo()), Omega::constant(spins.hi())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            set.push(Omega::random(spins, gap_len, &mut rng));
        }
        set
    }

    /// Exterior configurations used for sups over ω on the decimated box:
    /// constant `lo` and `hi` everywhere, `samples` random ones, and every
    /// gap configuration with the model boundary outside when there are at
    /// most [`EXHAUSTIVE_GAP_LIMIT`] of them.
    pub fn omega_set(model: &GibbsModel, samples: usize, seed: u64) -> (Vec<Omega>, bool) {
        let spins = model.spins();
        let gap_len = model.gap_sites().len();
        let mut set = Self::sampled_omegas(model, samples, seed);
        let exhaustive = matches!(state_count(spins.card(), gap_len), Some(c) if c <= EXHAUSTIVE_GAP_LIMIT);
        if exhaustive {
            let vals = spins.values();
            let mut digits = vec![0usize; gap_len];
            'outer: loop {
                set.push(Omega::with_gap(digits.iter().map(|&k| vals[k]).collect()));
                for d in digits.iter_mut().rev() {
                    *d += 1;
                    if *d < vals.len() {
                        continue 'outer;
                    }
                    *d = 0;
                }
                break;
            }
        }
        (set, exhaustive)
    }

    /// Exact laws of `S̃` on the decimated box for every ω of
    /// [`omega_set`](Self::omega_set).
    pub fn decimated_distributions(
        &self,
        model: &GibbsModel,
        samples: usize,
        seed: u64,
    ) -> Result<(Vec<(Omega, PmfTable)>, bool)> {
        let (set, exhaustive) = Self::omega_set(model, samples, seed);
        let laws = set
            .into_iter()
            .map(|omega| {
                let sys = model.local_system(Region::Decimated, &omega)?;
                Ok((omega, self.pmf(&sys)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((laws, exhaustive))
    }

    /// `sup_ω |Ẽ^ω e^{itS̃}|` over [`omega_set`](Self::omega_set), reported
    /// with `|E^ω_n e^{itS_n}|` for the model boundary.
    pub fn decimated_char_fn_sup(
        &self,
        model: &GibbsModel,
        t: f64,
        omega_samples: usize,
        seed: u64,
    ) -> Result<DecimatedSup> {
        Ok(self
            .decimated_char_fn_sup_many(model, &[t], omega_samples, seed)?
            .remove(0))
    }

    pub fn decimated_char_fn_sup_many(
        &self,
        model: &GibbsModel,
        ts: &[f64],
        omega_samples: usize,
        seed: u64,
    ) -> Result<Vec<DecimatedSup>> {
        let full = model.local_system(Region::Full, &Omega::boundary())?;
        let full_pmf = self.pmf(&full)?;
        let (laws, exhaustive) = self.decimated_distributions(model, omega_samples, seed)?;
        Ok(ts
            .iter()
            .map(|&t| {
                let (mut sup, mut arg) = (f64::NEG_INFINITY, String::new());
                for (omega, pmf) in &laws {
                    let v = pmf.char_fn(t).norm();
                    if v > sup {
                        sup = v;
                        arg = omega.label.clone();
                    }
                }
                DecimatedSup {
                    t,
                    sup,
                    argmax: arg,
                    full_abs: full_pmf.char_fn(t).norm(),
                    exhaustive_gap: exhaustive,
                    omega_count: laws.len(),
                }
            })
            .collect())
    }
}

/// Upper bound on the log-weight, so every shifted weight is at most 1.
fn reference_energy(sys: &LocalSystem) -> f64 {
    let sigma = sys.spins().sigma() as f64;
    let n = sys.len();
    let mut e = NeumaierSum::new();
    for i in 0..n {
        e.add(sys.field(i).abs() * sigma);
        for j in (i + 1)..n {
            e.add(sys.coupling(i, j).abs() * sigma * sigma);
        }
    }
    e.value()
}

/// Visit every configuration, calling `visit(acc, j, w)` with the lattice
/// index `j` of `S` and the weight `w = e^{-H - e_ref}`.
///
/// The leading sites index independent chunks processed in parallel; inside
/// a chunk the trailing sites follow a reflected mixed-radix Gray code so
/// each step changes one spin and costs `O(n)`. Chunk results are merged in
/// chunk order, so the output does not depend on the thread count.
fn enumerate<A, I, V, M>(sys: &LocalSystem, e_ref: f64, init: I, visit: V, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, usize, f64) + Sync,
    M: Fn(&mut A, &A),
{
    let n = sys.len();
    let card = sys.spins().card();
    let mut inner = 0;
    while inner < n && (card as u128).pow(inner as u32 + 1) <= INNER_STATES {
        inner += 1;
    }
    let inner = inner.max(1);
    let outer = n - inner;
    let chunks = card.pow(outer as u32);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            run_chunk(sys, e_ref, c, outer, &mut acc, &visit);
            acc
        })
        .collect();
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one chunk");
    for p in it {
        merge(&mut acc, &p);
    }
    acc
}

fn run_chunk<A, V>(sys: &LocalSystem, e_ref: f64, chunk: usize, outer: usize, acc: &mut A, visit: &V)
where
    V: Fn(&mut A, usize, f64),
{
    let n = sys.len();
    let spins = sys.spins();
    let card = spins.card();
    let step = spins.step() as f64;
    let lo = spins.lo();
    let mut digits = vec![0usize; n];
    let mut rest = chunk;
    for i in (0..outer).rev() {
        digits[i] = rest % card;
        rest /= card;
    }
    let config: Vec<i64> = digits.iter().map(|&k| lo + spins.step() * k as i64).collect();
    let mut energy = sys.log_weight(&config) - e_ref;
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            let row = sys.coupling_row(i);
            sys.field(i) + row.iter().zip(config.iter()).map(|(j, &s)| j * s as f64).sum::<f64>()
        })
        .collect();
    let mut j: usize = digits.iter().sum();

    // reflected Gray code over sites outer..n (loopless, with focus pointers)
    let m = n - outer;
    let mut focus: Vec<usize> = (0..=m).collect();
    let mut dir = vec![1i64; m];
    loop {
        visit(acc, j, energy.exp());
        let k = focus[0];
        focus[0] = 0;
        if k == m {
            break;
        }
        let site = outer + k;
        let new = digits[site] as i64 + dir[k];
        digits[site] = new as usize;
        let delta = dir[k] as f64 * step;
        energy += delta * local[site];
        for (l, c) in local.iter_mut().zip(sys.coupling_row(site)) {
            *l += c * delta;
        }
        j = (j as i64 + dir[k]) as usize;
        if new == 0 || new as usize == card - 1 {
            dir[k] = -dir[k];
            focus[k] = focus[k + 1];
            focus[k + 1] = k + 1;
        }
    }
}

/// Characteristic function of one spin with linear field `b`:
/// `Σ_s p(s) e^{its}`.
pub fn single_spin_char_fn(spins: &SpinInterval, field: f64, t: f64) -> Complex64 {
    let probs = crate::model::single_spin_probs_for(spins, field);
    let mut s = ComplexSum::new();
    for (v, p) in spins.values().into_iter().zip(probs) {
        s.add(Complex64::from_polar(p, t * v as f64));
    }
    s.value()
}

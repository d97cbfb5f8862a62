use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// A lattice site of `Z^d`, stored as its integer coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dimension: usize) -> Self {
        Site(vec![0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Chebyshev (L∞) distance.
    pub fn linf_distance(&self, other: &Site) -> i64 {
        linf(&self.0, &other.0)
    }

    /// True when every coordinate is a multiple of `step`.
    pub fn on_sublattice(&self, step: i64) -> bool {
        self.0.iter().all(|c| c.rem_euclid(step) == 0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn linf(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

pub(crate) fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn euclid(a: &[i64], b: &[i64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Spin space: the integers `lo, lo+step, ..., hi`.
///
/// `step = 1` is an integer interval (the case the local CLT machinery is
/// built for). `step = 2` with `lo = -1, hi = 1` gives Ising `±1` spins, whose
/// sums live on a lattice of span 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinInterval {
    lo: i64,
    hi: i64,
    step: i64,
}

impl fmt::Display for SpinInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values().iter().map(i64::to_string).collect();
        write!(f, "{{{}}}", vals.join(","))
    }
}

impl SpinInterval {
    /// The integer interval `[lo, hi]`.
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        Self::with_step(lo, hi, 1)
    }

    pub fn with_step(lo: i64, hi: i64, step: i64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Spec(format!("spin interval needs lo < hi, got [{lo}, {hi}]")));
        }
        if step < 1 || (hi - lo) % step != 0 {
            return Err(Error::Spec(format!(
                "step {step} does not divide the spin range [{lo}, {hi}]"
            )));
        }
        Ok(SpinInterval { lo, hi, step })
    }

    /// Ising spins `{-1, +1}`.
    pub fn ising() -> Self {
        SpinInterval { lo: -1, hi: 1, step: 2 }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    /// `max |s|` over the spin values.
    pub fn sigma(&self) -> i64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Number of spin values.
    pub fn card(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1) as usize
    }

    /// Consecutive integers (span 1).
    pub fn is_consecutive(&self) -> bool {
        self.step == 1
    }

    pub fn contains(&self, s: i64) -> bool {
        s >= self.lo && s <= self.hi && (s - self.lo) % self.step == 0
    }

    pub fn values(&self) -> Vec<i64> {
        (0..self.card() as i64).map(|k| self.lo + k * self.step).collect()
    }

    pub fn index_of(&self, s: i64) -> Option<usize> {
        self.contains(s).then(|| ((s - self.lo) / self.step) as usize)
    }
}

/// The cube `Λ_n = {-n..n}^d` together with the decimation step `r0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    dimension: usize,
    radius: i64,
    r0: i64,
}

impl LatticeBox {
    pub fn new(dimension: usize, radius: i64, r0: i64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        if radius < 0 {
            return Err(Error::Spec("radius must be nonnegative".into()));
        }
        if r0 < 1 {
            return Err(Error::Spec("decimation step r0 must be positive".into()));
        }
        Ok(LatticeBox { dimension, radius, r0 })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn r0(&self) -> i64 {
        self.r0
    }

    /// Same box with a different decimation step.
    pub fn with_r0(&self, r0: i64) -> Result<Self> {
        Self::new(self.dimension, self.radius, r0)
    }

    pub fn site_count(&self) -> usize {
        ((2 * self.radius + 1) as usize).pow(self.dimension as u32)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dimension && x.iter().all(|c| c.abs() <= self.radius)
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        cube_points(self.dimension, -self.radius, self.radius, 1)
    }

    /// `Λ̃_n = Λ_n ∩ Z^d(r0)`, lexicographic order.
    pub fn decimated_sites(&self) -> Vec<Site> {
        let top = self.radius - self.radius.rem_euclid(self.r0);
        cube_points(self.dimension, -top, top, self.r0)
    }

    /// `Λ_n \ Λ̃_n`, lexicographic order.
    pub fn gap_sites(&self) -> Vec<Site> {
        self.sites().into_iter().filter(|s| !s.on_sublattice(self.r0)).collect()
    }
}

fn cube_points(dimension: usize, lo: i64, hi: i64, step: i64) -> Vec<Site> {
    let per_axis: Vec<i64> = (lo..=hi).step_by(step as usize).collect();
    let mut out = Vec::with_capacity(per_axis.len().pow(dimension as u32));
    let mut idx = vec![0usize; dimension];
    loop {
        out.push(Site(idx.iter().map(|&i| per_axis[i]).collect()));
        let mut axis = dimension;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis.len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Visit every integer offset `k` with `‖k‖∞ ≤ radius`, `k ≠ 0`, whose
/// coordinates are multiples of `step`.
pub(crate) fn for_each_offset(dimension: usize, radius: i64, step: i64, mut f: impl FnMut(&[i64])) {
    let top = radius - radius.rem_euclid(step);
    let mut k = vec![-top; dimension];
    loop {
        if k.iter().any(|&c| c != 0) {
            f(&k);
        }
        let mut axis = dimension;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            k[axis] += step;
            if k[axis] <= top {
                break;
            }
            k[axis] = -top;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_interval_derived_fields() {
        let i = SpinInterval::new(-2, 1).unwrap();
        assert_eq!(i.sigma(), 2);
        assert_eq!(i.card(), 4);
        assert_eq!(i.values(), vec![-2, -1, 0, 1]);
        let ising = SpinInterval::ising();
        assert_eq!(ising.card(), 2);
        assert_eq!(ising.values(), vec![-1, 1]);
        assert!(!ising.contains(0));
        assert!(SpinInterval::new(1, 1).is_err());
        assert!(SpinInterval::with_step(0, 3, 2).is_err());
    }

    #[test]
    fn box_sizes_and_decimation() {
        let b = LatticeBox::new(2, 2, 1).unwrap();
        assert_eq!(b.sites().len(), 25);
        assert_eq!(b.decimated_sites(), b.sites());
        assert!(b.gap_sites().is_empty());

        let b = LatticeBox::new(1, 4, 3).unwrap();
        let dec: Vec<i64> = b.decimated_sites().iter().map(|s| s.0[0]).collect();
        assert_eq!(dec, vec![-3, 0, 3]);
        assert_eq!(b.gap_sites().len(), 6);

        let b = LatticeBox::new(3, 1, 2).unwrap();
        assert_eq!(b.site_count(), 27);
        assert_eq!(b.decimated_sites(), vec![Site::origin(3)]);
    }

    #[test]
    fn offsets_exclude_origin() {
        let mut n = 0;
        for_each_offset(2, 2, 1, |k| {
            assert!(k.iter().any(|&c| c != 0));
            n += 1;
        });
        assert_eq!(n, 24);
        let mut m = 0;
        for_each_offset(1, 5, 2, |_| m += 1);
        assert_eq!(m, 4); // ±2, ±4
    }
}

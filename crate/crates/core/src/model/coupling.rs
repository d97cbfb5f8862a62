use std::collections::{BTreeMap, HashMap};

use super::lattice::{euclid, for_each_offset, l1, linf, Site};
use crate::error::{Error, Result};

/// Symmetric pair coupling `J(x, y)` with `J(x, x) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `J = strength` for sites at Manhattan distance 1.
    NearestNeighbor { strength: f64 },
    /// `J = strength / |x - y|^exponent` (Euclidean distance), `exponent > d`.
    PowerLaw { strength: f64, exponent: f64 },
    /// Finitely many explicitly listed pairs.
    Explicit(ExplicitCoupling),
}

/// Finite list of coupled pairs, stored both as a pair map and as adjacency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplicitCoupling {
    pairs: BTreeMap<(Site, Site), f64>,
    adjacency: HashMap<Site, Vec<(Site, f64)>>,
}

impl ExplicitCoupling {
    pub fn new(pairs: impl IntoIterator<Item = (Site, Site, f64)>) -> Result<Self> {
        let mut out = ExplicitCoupling::default();
        let mut dim = None;
        for (x, y, j) in pairs {
            if x == y {
                return Err(Error::Spec(format!("self-coupling at {x}")));
            }
            if x.dimension() != y.dimension() || *dim.get_or_insert(x.dimension()) != x.dimension() {
                return Err(Error::Spec("coupled sites disagree in dimension".into()));
            }
            if !j.is_finite() {
                return Err(Error::Spec(format!("non-finite coupling {x}-{y}")));
            }
            let key = if x < y { (x, y) } else { (y, x) };
            if out.pairs.contains_key(&key) {
                return Err(Error::Spec(format!("pair {}-{} listed twice", key.0, key.1)));
            }
            out.adjacency.entry(key.0.clone()).or_default().push((key.1.clone(), j));
            out.adjacency.entry(key.1.clone()).or_default().push((key.0.clone(), j));
            out.pairs.insert(key, j);
        }
        Ok(out)
    }

    pub fn get(&self, x: &Site, y: &Site) -> f64 {
        let key = if x < y {
            (x.clone(), y.clone())
        } else {
            (y.clone(), x.clone())
        };
        self.pairs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Site, &Site, f64)> {
        self.pairs.iter().map(|((x, y), j)| (x, y, *j))
    }

    pub fn partners(&self, x: &Site) -> &[(Site, f64)] {
        self.adjacency.get(x).map(Vec::as_slice).unwrap_or(&[])
    }

    fn range(&self) -> i64 {
        self.pairs.keys().map(|(x, y)| x.linf_distance(y)).max().unwrap_or(0)
    }
}

impl Coupling {
    /// `J(x, y)` for coordinate slices.
    pub fn value(&self, x: &[i64], y: &[i64]) -> f64 {
        if x == y {
            return 0.0;
        }
        match self {
            Coupling::NearestNeighbor { strength } => {
                if l1(x, y) == 1 {
                    *strength
                } else {
                    0.0
                }
            }
            Coupling::PowerLaw { strength, exponent } => strength / euclid(x, y).powf(*exponent),
            Coupling::Explicit(e) => e.get(&Site::new(x), &Site::new(y)),
        }
    }

    pub fn between(&self, x: &Site, y: &Site) -> f64 {
        self.value(x.coords(), y.coords())
    }

    /// Largest L∞ distance at which the coupling is nonzero; `None` for
    /// infinite range.
    pub fn range(&self) -> Option<i64> {
        match self {
            Coupling::NearestNeighbor { .. } => Some(1),
            Coupling::PowerLaw { .. } => None,
            Coupling::Explicit(e) => Some(e.range()),
        }
    }

    /// Visit every `y ≠ x` with `‖y - x‖∞ ≤ radius` and nonzero `J(x, y)`.
    pub fn for_each_partner(&self, x: &[i64], radius: i64, mut f: impl FnMut(&[i64], f64)) {
        match self {
            Coupling::NearestNeighbor { strength } => {
                if radius < 1 || *strength == 0.0 {
                    return;
                }
                let mut y = x.to_vec();
                for axis in 0..x.len() {
                    for delta in [-1, 1] {
                        y[axis] = x[axis] + delta;
                        f(&y, *strength);
                    }
                    y[axis] = x[axis];
                }
            }
            Coupling::PowerLaw { .. } => {
                let mut y = vec![0; x.len()];
                for_each_offset(x.len(), radius, 1, |k| {
                    for (i, c) in k.iter().enumerate() {
                        y[i] = x[i] + c;
                    }
                    f(&y, self.value(x, &y));
                });
            }
            Coupling::Explicit(e) => {
                for (y, j) in e.partners(&Site::new(x)) {
                    if linf(x, y.coords()) <= radius {
                        f(y.coords(), *j);
                    }
                }
            }
        }
    }

    pub(crate) fn validate(&self, dimension: usize) -> Result<()> {
        match self {
            Coupling::NearestNeighbor { strength } => {
                if !strength.is_finite() {
                    return Err(Error::Spec("non-finite coupling strength".into()));
                }
            }
            Coupling::PowerLaw { strength, exponent } => {
                if !strength.is_finite() || !exponent.is_finite() {
                    return Err(Error::Spec("non-finite power-law parameters".into()));
                }
                if *exponent <= dimension as f64 {
                    return Err(Error::Spec(format!(
                        "power-law exponent {exponent} must exceed the dimension {dimension} for summability"
                    )));
                }
            }
            Coupling::Explicit(e) => {
                if let Some((x, _, _)) = e.pairs().find(|(x, _, _)| x.dimension() != dimension) {
                    return Err(Error::Spec(format!(
                        "coupled site {x} does not have dimension {dimension}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Bound on `σ · Σ_{‖y-x‖∞ > radius} |J(x, y)|` for a power-law coupling.
///
/// Uses `#{k : ‖k‖∞ = m} ≤ 2d (3m)^{d-1}`, `‖k‖₂ ≥ ‖k‖∞` and an integral
/// comparison for the decreasing summand.
pub fn power_law_tail_bound(strength: f64, exponent: f64, dimension: usize, radius: i64, sigma: i64) -> f64 {
    let d = dimension as f64;
    let shell = 2.0 * d * 3f64.powi(dimension as i32 - 1);
    strength.abs() * shell * (radius as f64).powf(d - exponent) / (exponent - d) * sigma as f64
}

/// Smallest radius whose power-law tail bound is below `tol`.
pub fn power_law_radius(strength: f64, exponent: f64, dimension: usize, sigma: i64, tol: f64) -> i64 {
    if strength == 0.0 {
        return 1;
    }
    let d = dimension as f64;
    let k = power_law_tail_bound(strength, exponent, dimension, 1, sigma);
    let mut r = (k / tol).powf(1.0 / (exponent - d)).ceil().max(1.0) as i64;
    // guard against rounding in the closed form
    while power_law_tail_bound(strength, exponent, dimension, r, sigma) > tol {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbor_values() {
        let c = Coupling::NearestNeighbor { strength: 0.1 };
        assert_eq!(c.value(&[0, 0], &[0, 1]), 0.1);
        assert_eq!(c.value(&[0, 0], &[1, 1]), 0.0);
        assert_eq!(c.value(&[3], &[3]), 0.0);
        let mut seen = 0;
        c.for_each_partner(&[0, 0, 0], 1, |_, _| seen += 1);
        assert_eq!(seen, 6);
    }

    #[test]
    fn explicit_is_symmetric_and_rejects_duplicates() {
        let e = ExplicitCoupling::new([
            (Site::new([0]), Site::new([2]), -0.3),
            (Site::new([1]), Site::new([0]), 0.2),
        ])
        .unwrap();
        let c = Coupling::Explicit(e);
        assert_eq!(c.value(&[2], &[0]), -0.3);
        assert_eq!(c.value(&[0], &[1]), 0.2);
        assert_eq!(c.range(), Some(2));
        assert!(ExplicitCoupling::new([
            (Site::new([0]), Site::new([1]), 0.1),
            (Site::new([1]), Site::new([0]), 0.1),
        ])
        .is_err());
    }

    #[test]
    fn power_law_radius_meets_tolerance() {
        let r = power_law_radius(0.1, 3.0, 1, 1, 1e-12);
        assert!(power_law_tail_bound(0.1, 3.0, 1, r, 1) <= 1e-12);
        assert!(power_law_tail_bound(0.1, 3.0, 1, r - 1, 1) > 1e-12);
    }

    #[test]
    fn power_law_needs_summable_exponent() {
        let c = Coupling::PowerLaw {
            strength: 1.0,
            exponent: 2.0,
        };
        assert!(c.validate(2).is_err());
        assert!(c.validate(1).is_ok());
    }
}

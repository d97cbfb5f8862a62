use rand::Rng;
use std::collections::HashMap;

use super::lattice::{Site, SpinInterval};
use crate::error::{Error, Result};

/// Boundary condition ω on the complement of the box.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// All exterior spins 0; when 0 is not a spin value this is read as a
    /// vanishing boundary field (free boundary).
    Zero,
    Constant(i64),
    /// Listed exterior sites; unlisted sites contribute no field.
    Explicit(HashMap<Site, i64>),
}

impl BoundaryCondition {
    pub(crate) fn validate(&self, spins: &SpinInterval) -> Result<()> {
        let bad = |v: i64| Error::Spec(format!("boundary spin {v} is not a spin value"));
        match self {
            BoundaryCondition::Zero => Ok(()),
            BoundaryCondition::Constant(v) => spins.contains(*v).then_some(()).ok_or(bad(*v)),
            BoundaryCondition::Explicit(map) => match map.values().find(|v| !spins.contains(**v)) {
                Some(v) => Err(bad(*v)),
                None => Ok(()),
            },
        }
    }
}

/// Spins on `Λ_n \ Λ̃_n` (the sites removed by decimation).
#[derive(Debug, Clone, PartialEq)]
pub enum GapSpins {
    /// Not specified: only valid for the full-box region.
    Unset,
    Constant(i64),
    /// One value per gap site, in the order of `LatticeBox::gap_sites`.
    Values(Vec<i64>),
}

/// Spins outside the box `Λ_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterSpins {
    /// The model's own boundary condition.
    Model,
    Constant(i64),
    /// Pseudo-random spins derived by hashing `(seed, site)`; unbounded and
    /// reproducible, realized only where the coupling window reaches.
    Hashed {
        seed: u64,
    },
}

/// An exterior configuration: everything outside the region being
/// enumerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Omega {
    pub gap: GapSpins,
    pub outer: OuterSpins,
    pub label: String,
}

impl Omega {
    /// The model's boundary condition outside the box, nothing else.
    pub fn boundary() -> Self {
        Omega {
            gap: GapSpins::Unset,
            outer: OuterSpins::Model,
            label: "model".into(),
        }
    }

    /// Constant spin `v` on the whole exterior (gap and outside).
    pub fn constant(v: i64) -> Self {
        Omega {
            gap: GapSpins::Constant(v),
            outer: OuterSpins::Constant(v),
            label: format!("constant({v})"),
        }
    }

    /// Given gap spins, model boundary outside the box.
    pub fn with_gap(values: Vec<i64>) -> Self {
        let label = format!(
            "gap[{}]",
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        );
        Omega {
            gap: GapSpins::Values(values),
            outer: OuterSpins::Model,
            label,
        }
    }

    /// Uniformly random gap spins and hashed random spins outside the box.
    pub fn random<R: Rng + ?Sized>(spins: &SpinInterval, gap_len: usize, rng: &mut R) -> Self {
        let vals = spins.values();
        let gap = (0..gap_len).map(|_| vals[rng.gen_range(0..vals.len())]).collect();
        let seed: u64 = rng.gen();
        Omega {
            gap: GapSpins::Values(gap),
            outer: OuterSpins::Hashed { seed },
            label: format!("random({seed:016x})"),
        }
    }

    pub(crate) fn gap_spin(&self, idx: usize) -> Option<i64> {
        match &self.gap {
            GapSpins::Unset => None,
            GapSpins::Constant(v) => Some(*v),
            GapSpins::Values(v) => v.get(idx).copied(),
        }
    }

    pub(crate) fn validate(&self, spins: &SpinInterval, gap_len: usize) -> Result<()> {
        let bad = |v: i64| Error::Domain(format!("exterior spin {v} is not a spin value"));
        match &self.gap {
            GapSpins::Unset => {}
            GapSpins::Constant(v) => {
                if !spins.contains(*v) {
                    return Err(bad(*v));
                }
            }
            GapSpins::Values(v) => {
                if v.len() != gap_len {
                    return Err(Error::Domain(format!(
                        "{} gap spins given for {gap_len} gap sites",
                        v.len()
                    )));
                }
                if let Some(x) = v.iter().find(|x| !spins.contains(**x)) {
                    return Err(bad(*x));
                }
            }
        }
        if let OuterSpins::Constant(v) = self.outer {
            if !spins.contains(v) {
                return Err(bad(v));
            }
        }
        Ok(())
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic spin at `y` for a hashed exterior.
pub(crate) fn hashed_spin(seed: u64, y: &[i64], spins: &SpinInterval) -> i64 {
    let mut h = mix64(seed);
    for &c in y {
        h = mix64(h ^ c as u64);
    }
    let k = (h % spins.card() as u64) as i64;
    spins.lo() + k * spins.step()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_spins_are_valid_and_reproducible() {
        let spins = SpinInterval::new(-1, 1).unwrap();
        let mut counts = [0usize; 3];
        for x in -500..500 {
            let s = hashed_spin(7, &[x, 3], &spins);
            assert_eq!(s, hashed_spin(7, &[x, 3], &spins));
            counts[(s + 1) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 250));
    }

    #[test]
    fn omega_validation() {
        let spins = SpinInterval::ising();
        assert!(Omega::constant(0).validate(&spins, 2).is_err());
        assert!(Omega::with_gap(vec![1, -1]).validate(&spins, 2).is_ok());
        assert!(Omega::with_gap(vec![1]).validate(&spins, 2).is_err());
        assert!(BoundaryCondition::Constant(2).validate(&spins).is_err());
    }
}

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::VerificationReport;
use crate::error::Result;
use crate::model::{BoundaryCondition, Coupling, GibbsModel, LatticeBox, LocalSystem, Omega, Region, SpinInterval};
use crate::polymer::{polymer_partition, ActivityParams, PartitionMode};

/// Relative tolerance of the polymer-gas identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Rounding floor per unit of conditioning: near a zero of `Ξ(t)` both
/// sides cancel down from `Ξ(0)`, and neither can be more accurate than
/// `ε Ξ(0)/|Ξ(t)|`.
pub const IDENTITY_ROUNDING_FACTOR: f64 = 8.0 * f64::EPSILON;

/// Parameters of the randomized identity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentitySuite {
    pub models: usize,
    /// Values of `t` per model, uniform on `[0, π]`.
    pub t_points: usize,
    pub seed: u64,
}

impl Default for IdentitySuite {
    fn default() -> Self {
        IdentitySuite {
            models: 10,
            t_points: 20,
            seed: 0,
        }
    }
}

/// A small random system with its description.
#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub label: String,
    pub system: LocalSystem,
}

/// Random spin intervals with two or three values.
pub fn random_small_spins<R: Rng + ?Sized>(rng: &mut R) -> SpinInterval {
    match rng.gen_range(0..4) {
        0 => SpinInterval::ising(),
        1 => SpinInterval::new(0, 1).expect("valid"),
        2 => SpinInterval::new(-1, 1).expect("valid"),
        _ => SpinInterval::new(0, 2).expect("valid"),
    }
}

/// Random system with at most five sites: a 1D decimated box (nearest
/// neighbor or power law) under a random exterior, or the nearest-neighbor
/// five-site cross at the center of a 3×3 box with the
/// corners frozen at random values.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomSystem> {
    let spins = random_small_spins(rng);
    let strength = rng.gen_range(-0.3..=0.3);
    if rng.gen_bool(0.5) {
        let power_law = rng.gen_bool(0.5);
        let coupling = if power_law {
            Coupling::PowerLaw {
                strength: strength / 2.0,
                exponent: 4.0,
            }
        } else {
            Coupling::NearestNeighbor { strength }
        };
        let kind = if power_law { "power-law" } else { "nn" };
        let (radius, r0) = [(2, 1), (1, 1), (4, 2), (2, 2), (6, 3)][rng.gen_range(0..5)];
        let model = GibbsModel::new(
            LatticeBox::new(1, radius, r0)?,
            spins,
            coupling,
            BoundaryCondition::Zero,
            None,
        )?;
        let omega = Omega::random(&spins, model.gap_sites().len(), rng);
        Ok(RandomSystem {
            label: format!(
                "d=1 {kind} J={strength:.4} I={spins} R={radius} r0={r0} {}",
                omega.label
            ),
            system: model.local_system(Region::Decimated, &omega)?,
        })
    } else {
        let model = GibbsModel::new(
            LatticeBox::new(2, 1, 1)?,
            spins,
            Coupling::NearestNeighbor { strength },
            BoundaryCondition::Zero,
            None,
        )?;
        let omega = Omega::random(&spins, 0, rng);
        let full = model.local_system(Region::Full, &omega)?;
        let vals = spins.values();
        let frozen: Vec<i64> = (0..full.len()).map(|_| vals[rng.gen_range(0..vals.len())]).collect();
        // lexicographic 3×3 order: the cross is 1, 3, 4, 5, 7
        Ok(RandomSystem {
            label: format!("d=2 nn J={strength:.4} I={spins} cross {}", omega.label),
            system: full.condition(&[1, 3, 4, 5, 7], &frozen)?,
        })
    }
}

/// `|Ξ_direct(t) − Ξ_polymer(t)| / |Ξ_direct(t)|` as a report.
///
/// `rhs` is [`IDENTITY_TOLERANCE`], raised to the rounding floor
/// `IDENTITY_ROUNDING_FACTOR · Ξ(0)/|Ξ(t)|` where that is larger; the
/// parameter `strict` records whether the plain tolerance was met.
pub fn identity_check(sys: &LocalSystem, t: f64, label: &str) -> Result<VerificationReport> {
    let params = ActivityParams::full(t);
    let direct = polymer_partition(sys, &params, PartitionMode::Direct)?;
    let gas = polymer_partition(sys, &params, PartitionMode::PolymerSum)?;
    let at_zero = polymer_partition(sys, &ActivityParams::full(0.0), PartitionMode::Direct)?;
    let rel = (direct - gas).norm() / direct.norm();
    let condition = at_zero.norm() / direct.norm();
    Ok(VerificationReport::new(
        "identity",
        [
            ("model", json!(label)),
            ("t", json!(t)),
            ("sites", json!(sys.len())),
            ("xi_direct_abs", json!(direct.norm())),
            ("condition", json!(condition)),
            ("strict", json!(rel <= IDENTITY_TOLERANCE)),
        ],
        rel,
        IDENTITY_TOLERANCE.max(IDENTITY_ROUNDING_FACTOR * condition),
        0.0,
    ))
}

/// The identity on `models` random systems, each at `t = 0` and at
/// `t_points − 1` uniform draws from `[0, π]`.
pub fn identity_suite(suite: &IdentitySuite) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let systems = (0..suite.models)
        .map(|_| {
            let s = random_system(&mut rng)?;
            let ts: Vec<f64> = (0..suite.t_points)
                .map(|k| if k == 0 { 0.0 } else { rng.gen_range(0.0..=PI) })
                .collect();
            Ok((s, ts))
        })
        .collect::<Result<Vec<_>>>()?;
    let nested = systems
        .par_iter()
        .map(|(s, ts)| {
            ts.iter()
                .map(|&t| identity_check(&s.system, t, &s.label))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().map(|r| r.with_runtime(start)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_systems_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let s = random_system(&mut rng).unwrap();
            assert!((1..=5).contains(&s.system.len()), "{}", s.label);
        }
    }

    #[test]
    fn default_suite_passes() {
        let reports = identity_suite(&IdentitySuite::default()).unwrap();
        assert_eq!(reports.len(), 200);
        assert!(reports.iter().all(|r| r.pass), "{:?}", reports.iter().find(|r| !r.pass));
    }
}

use std::collections::{BTreeMap, HashMap};

use super::boundary::{hashed_spin, BoundaryCondition, Omega, OuterSpins};
use super::coupling::{power_law_radius, power_law_tail_bound, Coupling};
use super::lattice::{for_each_offset, LatticeBox, Site, SpinInterval};
use super::system::{single_spin_probs_for, LocalSystem};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Tolerance on the neglected coupling tail `σ Σ_{far} |J|`.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Largest exterior window (in sites) a power-law model may require.
pub const MAX_WINDOW_SITES: f64 = 5e7;

/// Which part of the box is being enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `Λ_n`, exterior `Λ_n^c`.
    Full,
    /// `Λ̃_n`, exterior `(Λ_n \ Λ̃_n) ∪ Λ_n^c`.
    Decimated,
}

/// Assignment of spins to the sites of a finite region.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpinConfig {
    pub values: BTreeMap<Site, i64>,
}

impl SpinConfig {
    pub fn new(values: impl IntoIterator<Item = (Site, i64)>) -> Self {
        SpinConfig {
            values: values.into_iter().collect(),
        }
    }
}

/// `κ(J, σ) = e^{-2Jσ²} / |I|`, the lower bound on single-spin probabilities.
pub fn kappa(coupling_norm: f64, sigma: i64, card: usize) -> f64 {
    let s = sigma as f64;
    (-2.0 * coupling_norm * s * s).exp() / card as f64
}

/// Box, spin space, coupling and boundary condition.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    lattice: LatticeBox,
    spins: SpinInterval,
    coupling: Coupling,
    boundary: BoundaryCondition,
    truncation_radius: i64,
    // Σ_{0<‖k‖∞≤R} J(0,k), translation-invariant kinds only
    partner_total: f64,
    gap: Vec<Site>,
    gap_index: HashMap<Site, usize>,
}

impl GibbsModel {
    /// Validate and assemble a model. `truncation_radius = None` picks the
    /// smallest window meeting [`TAIL_TOLERANCE`] (exact range for
    /// finite-range couplings).
    pub fn new(
        lattice: LatticeBox,
        spins: SpinInterval,
        coupling: Coupling,
        boundary: BoundaryCondition,
        truncation_radius: Option<i64>,
    ) -> Result<Self> {
        let d = lattice.dimension();
        coupling.validate(d)?;
        boundary.validate(&spins)?;
        if let BoundaryCondition::Explicit(map) = &boundary {
            if let Some(x) = map.keys().find(|x| x.dimension() != d || lattice.contains(x.coords())) {
                return Err(Error::Spec(format!(
                    "boundary site {x} must be an exterior site of dimension {d}"
                )));
            }
        }
        let radius = match (&coupling, truncation_radius) {
            (Coupling::PowerLaw { strength, exponent }, given) => {
                let r = match given {
                    Some(r) => {
                        let tail = power_law_tail_bound(*strength, *exponent, d, r, spins.sigma());
                        if tail > TAIL_TOLERANCE {
                            return Err(Error::Spec(format!(
                                "truncation radius {r} leaves a coupling tail bound of {tail:.3e} > {TAIL_TOLERANCE:e}"
                            )));
                        }
                        r
                    }
                    None => power_law_radius(*strength, *exponent, d, spins.sigma(), TAIL_TOLERANCE),
                };
                let window = ((2 * r + 1) as f64).powi(d as i32);
                if window > MAX_WINDOW_SITES {
                    return Err(Error::Spec(format!(
                        "power-law tail needs truncation radius {r} ({window:.2e} sites per window); raise the exponent"
                    )));
                }
                r
            }
            (c, given) => {
                let range = c.range().unwrap_or(1).max(1);
                given.unwrap_or(range).max(range)
            }
        };
        let partner_total = match &coupling {
            Coupling::PowerLaw { .. } => {
                let origin = vec![0; d];
                let mut s = NeumaierSum::new();
                for_each_offset(d, radius, 1, |k| s.add(coupling.value(&origin, k)));
                s.value()
            }
            _ => 0.0,
        };
        let gap = lattice.gap_sites();
        let gap_index = gap.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(GibbsModel {
            lattice,
            spins,
            coupling,
            boundary,
            truncation_radius: radius,
            partner_total,
            gap,
            gap_index,
        })
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn spins(&self) -> &SpinInterval {
        &self.spins
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn boundary(&self) -> &BoundaryCondition {
        &self.boundary
    }

    pub fn truncation_radius(&self) -> i64 {
        self.truncation_radius
    }

    /// Same model with another decimation step.
    pub fn with_r0(&self, r0: i64) -> Result<Self> {
        GibbsModel::new(
            self.lattice.with_r0(r0)?,
            self.spins,
            self.coupling.clone(),
            self.boundary.clone(),
            Some(self.truncation_radius),
        )
    }

    /// Same model on a box of another radius.
    pub fn with_radius(&self, radius: i64) -> Result<Self> {
        GibbsModel::new(
            LatticeBox::new(self.lattice.dimension(), radius, self.lattice.r0())?,
            self.spins,
            self.coupling.clone(),
            self.boundary.clone(),
            Some(self.truncation_radius),
        )
    }

    pub fn region_sites(&self, region: Region) -> Vec<Site> {
        match region {
            Region::Full => self.lattice.sites(),
            Region::Decimated => self.lattice.decimated_sites(),
        }
    }

    /// `Λ_n \ Λ̃_n` in the order used by [`GapSpins::Values`](super::GapSpins).
    pub fn gap_sites(&self) -> &[Site] {
        &self.gap
    }

    fn in_region(&self, x: &[i64], region: Region) -> bool {
        self.lattice.contains(x)
            && match region {
                Region::Full => true,
                Region::Decimated => x.iter().all(|c| c.rem_euclid(self.lattice.r0()) == 0),
            }
    }

    /// `Σ_{y ∉ Λ, ‖y-x‖∞ ≤ R} J(x, y)`.
    fn outer_coupling_sum(&self, x: &[i64]) -> f64 {
        let mut s = NeumaierSum::new();
        match &self.coupling {
            Coupling::PowerLaw { .. } => {
                s.add(self.partner_total);
                for y in self.lattice.sites() {
                    if y.coords() != x {
                        s.add(-self.coupling.value(x, y.coords()));
                    }
                }
            }
            c => c.for_each_partner(x, self.truncation_radius, |y, j| {
                if !self.lattice.contains(y) {
                    s.add(j)
                }
            }),
        }
        s.value()
    }

    /// Field coefficient `b_x` with `h_x(s) = b_x · s`, i.e.
    /// `b_x = Σ_{y ∈ region^c} J(x, y) ω_y`.
    pub fn field_coefficient(&self, x: &Site, region: Region, omega: &Omega) -> Result<f64> {
        let xc = x.coords();
        if !self.in_region(xc, region) {
            return Err(Error::Domain(format!("site {x} is not in the {region:?} region")));
        }
        omega.validate(&self.spins, self.gap.len())?;
        let mut b = NeumaierSum::new();
        if region == Region::Decimated {
            let mut missing = false;
            let mut add_gap = |y: &[i64], j: f64| {
                if let Some(&idx) = self.gap_index.get(&Site::new(y)) {
                    match omega.gap_spin(idx) {
                        Some(v) => b.add(j * v as f64),
                        None => missing = true,
                    }
                }
            };
            match &self.coupling {
                Coupling::PowerLaw { .. } => {
                    for y in &self.gap {
                        add_gap(y.coords(), self.coupling.value(xc, y.coords()));
                    }
                }
                c => c.for_each_partner(xc, self.truncation_radius, |y, j| add_gap(y, j)),
            }
            if missing {
                return Err(Error::Domain("decimated region needs spins on the gap sites".into()));
            }
        }
        match omega.outer {
            OuterSpins::Constant(v) => b.add(v as f64 * self.outer_coupling_sum(xc)),
            OuterSpins::Model => match &self.boundary {
                BoundaryCondition::Zero => {}
                BoundaryCondition::Constant(v) => b.add(*v as f64 * self.outer_coupling_sum(xc)),
                BoundaryCondition::Explicit(map) => {
                    for (y, v) in map {
                        if y.linf_distance(x) <= self.truncation_radius {
                            b.add(self.coupling.value(xc, y.coords()) * *v as f64);
                        }
                    }
                }
            },
            OuterSpins::Hashed { seed } => {
                self.coupling.for_each_partner(xc, self.truncation_radius, |y, j| {
                    if !self.lattice.contains(y) {
                        b.add(j * hashed_spin(seed, y, &self.spins) as f64);
                    }
                });
            }
        }
        Ok(b.value())
    }

    /// `h^ω_x(s) = Σ_{y ∈ region^c} J(x, y) s ω_y`.
    pub fn boundary_field(&self, x: &Site, s: i64, region: Region, omega: &Omega) -> Result<f64> {
        if !self.spins.contains(s) {
            return Err(Error::Domain(format!("{s} is not a spin value")));
        }
        Ok(self.field_coefficient(x, region, omega)? * s as f64)
    }

    /// Returns `-H`: `Σ_{{x,y}⊂region} J s_x s_y + Σ_x h_x(s_x)` (unordered
    /// pairs, each counted once).
    pub fn hamiltonian(&self, config: &SpinConfig, region: Region, omega: &Omega) -> Result<f64> {
        let sites = self.region_sites(region);
        if config.values.len() != sites.len() || sites.iter().any(|s| !config.values.contains_key(s)) {
            return Err(Error::Domain("configuration does not cover exactly the region".into()));
        }
        let sys = self.local_system(region, omega)?;
        let vals: Vec<i64> = sites.iter().map(|s| config.values[s]).collect();
        if let Some(v) = vals.iter().find(|v| !self.spins.contains(**v)) {
            return Err(Error::Domain(format!("{v} is not a spin value")));
        }
        Ok(sys.log_weight(&vals))
    }

    /// `sup_x Σ_{y ∈ Z^d(step), y≠x} |J(x, y)|` over sites `x` of the box on
    /// the sublattice of the given step.
    pub fn interaction_norm(&self, step: i64) -> f64 {
        assert!(step >= 1, "step must be positive");
        let d = self.lattice.dimension();
        match &self.coupling {
            Coupling::NearestNeighbor { strength } => {
                if step == 1 {
                    2.0 * d as f64 * strength.abs()
                } else {
                    0.0
                }
            }
            Coupling::PowerLaw { .. } => {
                let origin = vec![0; d];
                let mut s = NeumaierSum::new();
                for_each_offset(d, self.truncation_radius, step, |k| {
                    s.add(self.coupling.value(&origin, k).abs())
                });
                s.value()
            }
            Coupling::Explicit(e) => self
                .lattice
                .sites()
                .iter()
                .filter(|x| x.on_sublattice(step))
                .map(|x| {
                    e.partners(x)
                        .iter()
                        .filter(|(y, _)| y.on_sublattice(step))
                        .map(|(_, j)| j.abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max),
        }
    }

    /// `J` at step 1 and `J_{r0}` at the box's decimation step.
    pub fn norms(&self) -> (f64, f64) {
        (self.interaction_norm(1), self.interaction_norm(self.lattice.r0()))
    }

    /// `p^ω_x(s) = e^{h_x(s)} / Σ_{s'} e^{h_x(s')}`.
    pub fn single_spin_distribution(&self, x: &Site, region: Region, omega: &Omega) -> Result<Vec<(i64, f64)>> {
        let b = self.field_coefficient(x, region, omega)?;
        Ok(self
            .spins
            .values()
            .into_iter()
            .zip(single_spin_probs_for(&self.spins, b))
            .collect())
    }

    /// Region sites with their couplings and exterior fields, ready for
    /// enumeration.
    pub fn local_system(&self, region: Region, omega: &Omega) -> Result<LocalSystem> {
        let sites = self.region_sites(region);
        let n = sites.len();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.coupling.between(&sites[i], &sites[j]);
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
        }
        let fields = sites
            .iter()
            .map(|x| self.field_coefficient(x, region, omega))
            .collect::<Result<Vec<_>>>()?;
        LocalSystem::new(sites, self.spins, c, fields)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(radius: i64, j: f64, boundary: BoundaryCondition) -> GibbsModel {
        GibbsModel::new(
            LatticeBox::new(1, radius, 1).unwrap(),
            SpinInterval::ising(),
            Coupling::NearestNeighbor { strength: j },
            boundary,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_boundary_field_vanishes() {
        let m = chain(2, 0.3, BoundaryCondition::Zero);
        for x in m.region_sites(Region::Full) {
            assert_eq!(m.boundary_field(&x, 1, Region::Full, &Omega::boundary()).unwrap(), 0.0);
        }
    }

    #[test]
    fn edge_site_sees_one_exterior_neighbor() {
        let m = chain(2, 0.1, BoundaryCondition::Constant(1));
        let h = m
            .boundary_field(&Site::new([-2]), 1, Region::Full, &Omega::boundary())
            .unwrap();
        assert!((h - 0.1).abs() < 1e-15);
        let interior = m
            .boundary_field(&Site::new([0]), 1, Region::Full, &Omega::boundary())
            .unwrap();
        assert_eq!(interior, 0.0);
    }

    #[test]
    fn outside_region_is_domain_error() {
        let m = chain(2, 0.1, BoundaryCondition::Zero);
        assert!(matches!(
            m.boundary_field(&Site::new([5]), 1, Region::Full, &Omega::boundary()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decimated_region_reads_gap_spins() {
        let m = chain(2, 0.1, BoundaryCondition::Zero).with_r0(2).unwrap();
        // gap sites are -1 and 1; site 0 couples to both
        let omega = Omega::with_gap(vec![1, -1]);
        let b = m.field_coefficient(&Site::new([0]), Region::Decimated, &omega).unwrap();
        assert!(b.abs() < 1e-15);
        let omega = Omega::with_gap(vec![1, 1]);
        let b = m.field_coefficient(&Site::new([0]), Region::Decimated, &omega).unwrap();
        assert!((b - 0.2).abs() < 1e-15);
        assert!(m
            .field_coefficient(&Site::new([0]), Region::Decimated, &Omega::boundary())
            .is_err());
    }

    #[test]
    fn nearest_neighbor_norms() {
        let m = chain(3, 0.1, BoundaryCondition::Zero);
        assert!((m.interaction_norm(1) - 0.2).abs() < 1e-15);
        assert_eq!(m.interaction_norm(2), 0.0);
    }

    #[test]
    fn power_law_norm_is_zeta_three() {
        let m = GibbsModel::new(
            LatticeBox::new(1, 3, 1).unwrap(),
            SpinInterval::ising(),
            Coupling::PowerLaw {
                strength: 0.1,
                exponent: 3.0,
            },
            BoundaryCondition::Zero,
            None,
        )
        .unwrap();
        // 0.2 ζ(3)
        assert!((m.interaction_norm(1) - 0.240_411_380_631_918_8).abs() < 1e-11);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(0.0, 1, 2), 0.5);
        assert!((kappa(1.0, 1, 2) - (-2.0f64).exp() / 2.0).abs() < 1e-16);
        assert!((kappa(0.5, 2, 5) - 0.003_663_127_777_746_836).abs() < 1e-15);
    }
}

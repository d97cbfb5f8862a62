use super::lattice::{Site, SpinInterval};
use crate::error::{Error, Result};

/// A finite spin system ready for enumeration: sites, a dense symmetric
/// coupling matrix and a linear single-site field `h_i(s) = field_i · s`.
///
/// The log-weight of a configuration is
/// `Σ_{i<j} J_ij s_i s_j + Σ_i field_i s_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSystem {
    sites: Vec<Site>,
    spins: SpinInterval,
    couplings: Vec<f64>,
    fields: Vec<f64>,
}

impl LocalSystem {
    /// Build from a row-major `n × n` coupling matrix (must be symmetric with
    /// zero diagonal).
    pub fn new(sites: Vec<Site>, spins: SpinInterval, couplings: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(Error::Domain("empty region".into()));
        }
        if couplings.len() != n * n || fields.len() != n {
            return Err(Error::Domain("coupling/field sizes do not match the site count".into()));
        }
        for i in 0..n {
            if couplings[i * n + i] != 0.0 {
                return Err(Error::Domain(format!("nonzero self-coupling at index {i}")));
            }
            for j in 0..i {
                if couplings[i * n + j] != couplings[j * n + i] {
                    return Err(Error::Domain(format!("asymmetric coupling ({i},{j})")));
                }
            }
        }
        Ok(LocalSystem {
            sites,
            spins,
            couplings,
            fields,
        })
    }

    /// Abstract system on sites `0..n` of a 1D line, from a pair list.
    pub fn from_pairs(spins: SpinInterval, n: usize, pairs: &[(usize, usize, f64)], fields: Vec<f64>) -> Result<Self> {
        let mut c = vec![0.0; n * n];
        for &(i, j, v) in pairs {
            if i >= n || j >= n || i == j {
                return Err(Error::Domain(format!("bad pair ({i},{j})")));
            }
            c[i * n + j] += v;
            c[j * n + i] += v;
        }
        let sites = (0..n as i64).map(|i| Site::new([i])).collect();
        Self::new(sites, spins, c, fields)
    }

    /// Independent spins with the given fields.
    pub fn free(spins: SpinInterval, fields: Vec<f64>) -> Self {
        let n = fields.len();
        Self::from_pairs(spins, n, &[], fields).expect("free system is well formed")
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn spins(&self) -> &SpinInterval {
        &self.spins
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.sites.len() + j]
    }

    pub fn coupling_row(&self, i: usize) -> &[f64] {
        let n = self.sites.len();
        &self.couplings[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn field(&self, i: usize) -> f64 {
        self.fields[i]
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// `max_i Σ_j |J_ij|` inside the system.
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.len())
            .map(|i| self.coupling_row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn has_couplings(&self) -> bool {
        self.couplings.iter().any(|&v| v != 0.0)
    }

    /// The sites in `keep`, with every other site frozen at `frozen[i]`
    /// (entries at kept indices are ignored) and folded into the fields.
    pub fn condition(&self, keep: &[usize], frozen: &[i64]) -> Result<Self> {
        let n = self.len();
        if frozen.len() != n {
            return Err(Error::Domain("one frozen value per site is required".into()));
        }
        let mut kept = vec![false; n];
        for &i in keep {
            if i >= n || kept[i] {
                return Err(Error::Domain(format!("bad or repeated index {i}")));
            }
            kept[i] = true;
        }
        if let Some(i) = (0..n).find(|&i| !kept[i] && !self.spins.contains(frozen[i])) {
            return Err(Error::Domain(format!("frozen value {} is not a spin value", frozen[i])));
        }
        let m = keep.len();
        let mut c = vec![0.0; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                c[a * m + b] = self.coupling(i, j);
            }
        }
        let fields = keep
            .iter()
            .map(|&i| {
                self.fields[i]
                    + (0..n)
                        .filter(|&j| !kept[j])
                        .map(|j| self.coupling(i, j) * frozen[j] as f64)
                        .sum::<f64>()
            })
            .collect();
        let sites = keep.iter().map(|&i| self.sites[i].clone()).collect();
        Self::new(sites, self.spins, c, fields)
    }

    /// Single-site distribution `p_i(s) ∝ e^{field_i s}`, aligned with
    /// `spins().values()`.
    pub fn single_site_probs(&self, i: usize) -> Vec<f64> {
        single_spin_probs_for(&self.spins, self.fields[i])
    }

    /// Log-weight `Σ_{i<j} J_ij s_i s_j + Σ_i field_i s_i`.
    pub fn log_weight(&self, config: &[i64]) -> f64 {
        let n = self.len();
        let mut e = 0.0;
        for i in 0..n {
            let si = config[i] as f64;
            e += self.fields[i] * si;
            let row = &self.couplings[i * n..(i + 1) * n];
            for (c, &sj) in row[i + 1..].iter().zip(&config[i + 1..]) {
                e += c * si * sj as f64;
            }
        }
        e
    }
}

pub(crate) fn single_spin_probs_for(spins: &SpinInterval, field: f64) -> Vec<f64> {
    let vals = spins.values();
    // shift by the largest exponent for stability
    let top = vals.iter().map(|&s| field * s as f64).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|&s| (field * s as f64 - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_log_weight() {
        let sys = LocalSystem::from_pairs(SpinInterval::ising(), 2, &[(0, 1, 0.1)], vec![0.0, 0.0]).unwrap();
        assert!((sys.log_weight(&[1, 1]) - 0.1).abs() < 1e-15);
        assert!((sys.log_weight(&[1, -1]) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric() {
        let sites = vec![Site::new([0]), Site::new([1])];
        assert!(LocalSystem::new(sites, SpinInterval::ising(), vec![0.0, 1.0, 0.5, 0.0], vec![0.0; 2]).is_err());
    }

    #[test]
    fn single_site_probs_two_state() {
        let p = single_spin_probs_for(&SpinInterval::ising(), 0.1);
        let expect = 0.1f64.exp() / (0.1f64.exp() + (-0.1f64).exp());
        assert!((p[1] - expect).abs() < 1e-15);
        assert!((p[1] - 0.549834).abs() < 1e-6);
    }

    #[test]
    fn conditioning_folds_frozen_spins_into_fields() {
        let sys = LocalSystem::from_pairs(
            SpinInterval::ising(),
            3,
            &[(0, 1, 0.1), (1, 2, 0.3)],
            vec![0.0, 0.2, 0.0],
        )
        .unwrap();
        let sub = sys.condition(&[1, 2], &[-1, 0, 0]).unwrap();
        assert_eq!(sub.len(), 2);
        assert!((sub.field(0) - 0.1).abs() < 1e-15);
        assert_eq!(sub.coupling(0, 1), 0.3);
        assert!(sys.condition(&[1, 1], &[1, 1, 1]).is_err());
        assert!(sys.condition(&[1, 2], &[0, 1, 1]).is_err());
    }
}

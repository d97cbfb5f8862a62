use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::boundary::BoundaryCondition;
use super::coupling::{Coupling, ExplicitCoupling};
use super::gibbs::GibbsModel;
use super::lattice::{LatticeBox, Site, SpinInterval};
use crate::error::{Error, Result};

/// JSON form of a model.
///
/// ```json
/// {"dimension": 1, "radius": 3,
///  "spin": {"lo": -1, "hi": 1, "step": 2},
///  "coupling": {"kind": "nearest_neighbor", "strength": 0.1},
///  "boundary": {"kind": "constant", "value": 1},
///  "r0": 2}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dimension: usize,
    pub radius: i64,
    pub spin: SpinSpec,
    pub coupling: CouplingSpec,
    pub boundary: BoundarySpec,
    #[serde(default = "one")]
    pub r0: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<i64>,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    pub lo: i64,
    pub hi: i64,
    /// Spacing between spin values; `{"lo": -1, "hi": 1, "step": 2}` is Ising.
    #[serde(default = "one")]
    pub step: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    NearestNeighbor,
    PowerLaw,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSpec>>,
}

/// `(site, site, J)` of an explicit coupling.
pub type PairSpec = (Vec<i64>, Vec<i64>, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Zero,
    Constant,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<Vec<(Vec<i64>, i64)>>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("malformed model: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model spec serializes")
    }

    pub fn build(&self) -> Result<GibbsModel> {
        let lattice = LatticeBox::new(self.dimension, self.radius, self.r0)?;
        let spins = SpinInterval::with_step(self.spin.lo, self.spin.hi, self.spin.step)?;
        let c = &self.coupling;
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Spec(format!("{:?} coupling needs \"{field}\"", c.kind)))
        };
        let coupling = match c.kind {
            CouplingKind::NearestNeighbor => Coupling::NearestNeighbor {
                strength: need("strength", c.strength)?,
            },
            CouplingKind::PowerLaw => Coupling::PowerLaw {
                strength: need("strength", c.strength)?,
                exponent: need("exponent", c.exponent)?,
            },
            CouplingKind::Explicit => {
                let pairs = c
                    .pairs
                    .as_ref()
                    .ok_or_else(|| Error::Spec("explicit coupling needs \"pairs\"".into()))?;
                Coupling::Explicit(ExplicitCoupling::new(
                    pairs
                        .iter()
                        .map(|(x, y, j)| (Site::new(x.clone()), Site::new(y.clone()), *j)),
                )?)
            }
        };
        let b = &self.boundary;
        let boundary = match b.kind {
            BoundaryKind::Zero => BoundaryCondition::Zero,
            BoundaryKind::Constant => BoundaryCondition::Constant(
                b.value
                    .ok_or_else(|| Error::Spec("constant boundary needs \"value\"".into()))?,
            ),
            BoundaryKind::Explicit => {
                let list = b
                    .assignments
                    .as_ref()
                    .ok_or_else(|| Error::Spec("explicit boundary needs \"assignments\"".into()))?;
                let mut map = HashMap::new();
                for (x, v) in list {
                    if map.insert(Site::new(x.clone()), *v).is_some() {
                        return Err(Error::Spec(format!("boundary site {x:?} listed twice")));
                    }
                }
                BoundaryCondition::Explicit(map)
            }
        };
        GibbsModel::new(lattice, spins, coupling, boundary, self.truncation_radius)
    }
}

/// Parse and validate a model in one step.
pub fn model_from_json(text: &str) -> Result<GibbsModel> {
    ModelSpec::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nearest_neighbor_chain() {
        let m = model_from_json(
            r#"{"dimension":1,"radius":3,"spin":{"lo":-1,"hi":1,"step":2},
                "coupling":{"kind":"nearest_neighbor","strength":0.1},
                "boundary":{"kind":"constant","value":1},"r0":2}"#,
        )
        .unwrap();
        assert_eq!(m.lattice().site_count(), 7);
        assert_eq!(m.spins().card(), 2);
        assert_eq!(m.lattice().decimated_sites().len(), 3);
    }

    #[test]
    fn explicit_kinds_round_trip() {
        let text = r#"{"dimension":1,"radius":1,"spin":{"lo":0,"hi":1},
            "coupling":{"kind":"explicit","pairs":[[[-1],[1],0.2],[[0],[2],0.05]]},
            "boundary":{"kind":"explicit","assignments":[[[2],1]]}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        let again = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, again);
        let m = spec.build().unwrap();
        assert_eq!(m.lattice().r0(), 1);
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            "{",
            r#"{"dimension":1,"radius":1,"spin":{"lo":1,"hi":1},"coupling":{"kind":"nearest_neighbor","strength":0.1},"boundary":{"kind":"zero"}}"#,
            r#"{"dimension":1,"radius":1,"spin":{"lo":0,"hi":1},"coupling":{"kind":"power_law","strength":0.1},"boundary":{"kind":"zero"}}"#,
            r#"{"dimension":1,"radius":1,"spin":{"lo":0,"hi":1},"coupling":{"kind":"nearest_neighbor","strength":0.1},"boundary":{"kind":"constant","value":3}}"#,
            r#"{"dimension":1,"radius":1,"spin":{"lo":0,"hi":1},"coupling":{"kind":"nearest_neighbor","strength":0.1},"boundary":{"kind":"zero"},"extra":1}"#,
        ] {
            assert!(matches!(model_from_json(bad), Err(Error::Spec(_))), "{bad}");
        }
    }
}

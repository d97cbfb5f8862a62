//! Lattice geometry, spin space, couplings, boundary conditions and the
//! Gibbs specification on a finite box.

mod boundary;
mod coupling;
mod gibbs;
mod lattice;
mod spec;
mod system;

pub use boundary::{BoundaryCondition, GapSpins, Omega, OuterSpins};
pub use coupling::{power_law_radius, power_law_tail_bound, Coupling, ExplicitCoupling};
pub use gibbs::{kappa, GibbsModel, Region, SpinConfig, MAX_WINDOW_SITES, TAIL_TOLERANCE};
pub use lattice::{LatticeBox, Site, SpinInterval};
pub use spec::{
    model_from_json, BoundaryKind, BoundarySpec, CouplingKind, CouplingSpec, ModelSpec, PairSpec, SpinSpec,
};
pub use system::LocalSystem;

pub(crate) use system::single_spin_probs_for;

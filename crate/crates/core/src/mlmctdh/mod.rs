//! Multilayer MCTDH: a tree of time-dependent single-particle functions
//! (SPFs) propagated with the variational equations of motion.
//!
//! Each node holds a tensor of shape `(m, d_1, …, d_C)`: `m` SPFs expressed
//! in the product basis of its children's SPFs (or, for leaves, of the
//! `2^g` spin configurations of the `g` sites it groups). The root holds the
//! single wavefunction (`m = 1`).

mod measure;
mod operator;
mod propagate;
mod state;
mod sweep;
mod tensor;
mod topology;

pub use measure::{
    all_natural_populations, block_entropy, collective_x, entanglement_entropy, expectation, hole_densities,
    natural_populations, one_point, pair_expectation, NaturalSpectrum,
};
pub use operator::SumOfProducts;
pub use propagate::{propagate, PropagationOptions, PropagationStats, Propagator};
pub use state::{build_initial_state, TreeState};
pub use topology::{parse_tree, plaquette_order, TreeNode, TreeTopology, MAX_LEAF_SPINS};

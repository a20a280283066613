//! Instance generators.

pub mod builtin;
pub mod random;
pub mod sat;

pub use builtin::{badly_spaced, builtin, BUILTINS};
pub use random::{random_mdp, DiscountScheme, RandomMdpConfig};
pub use sat::{parse_dimacs, sat_reduction, zero_sum_variant, CnfFormula, Reduction};

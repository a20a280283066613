//! Welfare-optimal strategies for MDPs shared by several principals with
//! different discount factors.
//!
//! ```
//! use mdpwf::gen::builtin::investment;
//! use mdpwf::numeric::{rational, Rational};
//! use mdpwf::welfare::{optimize, WelfareConfig};
//!
//! let model = investment().numeric::<Rational>();
//! let out = optimize(&model, &WelfareConfig::exact()).unwrap();
//! assert_eq!(out.kappa.kappa, 2);
//! assert_eq!(out.report(0).social_welfare, rational(127, 9));
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gen;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod solve;
pub mod strategy;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{AsymMdp, AsymMdpBuilder, NumericMdp};
pub use numeric::{NumericMode, Rational, Scalar};

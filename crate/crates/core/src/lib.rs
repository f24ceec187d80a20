//! Weighted kappa for two- and multi-rater contingency tables, Markov bases
//! of basic moves, exact fiber enumeration, and a simulated annealing search
//! for the table of maximum agreement with given one-way margins.
//!
//! Raters, levels and table coordinates are zero-based throughout. Counts
//! are stored densely with the first rater's coordinate varying slowest.

// Index loops mirror the summation formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod agreement;
pub mod anneal;
pub mod cli;
pub mod error;
pub mod fiber;
pub mod markov;
pub mod simstudy;
pub mod table;
pub mod weights;

pub use agreement::{cohen_kappa, weighted_kappa, Evaluator, KappaValue};
pub use anneal::{anneal_max_kappa, AnnealConfig, AnnealResult, Annealer};
pub use error::{Error, Result};
pub use fiber::{FiberOptions, FiberSummary};
pub use markov::{BasicMove, MarkovBasis, SignedMove};
pub use simstudy::{Scenario, ScenarioStats};
pub use table::{Margins, Table};
pub use weights::{DisagreementScheme, SchemeKind};

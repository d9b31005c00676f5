//! Verification toolkit for programs that perform statistical hypothesis
//! tests: syntax, test statistics, trace semantics, epistemic model checking,
//! precondition calculus, and a proof checker for belief judgments.

pub mod examples;
pub mod kripke;
pub mod proof;
pub mod scenario;
pub mod semantics;
pub mod stats;
pub mod syntax;
pub mod util;
pub mod wp;

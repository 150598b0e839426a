//! Analytic moment functionals: `J_p`, `M_p`, the linear moment bound,
//! `A_{β,p}` and `β*`, the intermittency witness search, the Anderson
//! chaos series and the closed-form Lyapunov exponents.

mod chaos;
mod growth;
mod jp;
mod report;

pub use chaos::*;
pub use growth::*;
pub use jp::*;
pub use report::*;

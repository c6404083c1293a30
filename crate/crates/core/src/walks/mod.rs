//! Random-walk representations of second and fourth moments.

mod beta;
mod chain;
mod fourth;
mod psi;
mod quad;

pub use psi::{apply_semigroup, second_moment_exact, OrthantBox, PsiMatrix, SecondMomentExact, BOUNDARY_TOLERANCE};
pub use beta::{beta_product_closed_form, beta_walk_product, BetaWalkEstimate, BetaWeights};
pub use quad::{classify_type, fourth_moment_series, g_transitions, h_weight, G4Transition, InitialMoments, PointType, TypedPoint4};
pub use fourth::{
    covariance_walk, fourth_moment_poissonized, product_bound_estimate, CovarianceEstimate, HorizonPoint, ProductBound, EPS0,
    ESCAPE_THRESHOLD,
};
pub use chain::{
    chain_matrix, chain_tail, chain_tail_bound, coupling_chain_brute_force, coupling_chain_expectation, ladder_dominance,
    ChainExpectation, DominanceReport,
};

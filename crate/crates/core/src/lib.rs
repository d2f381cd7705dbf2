//! Engine for search agents that grade their own retrievals.
//!
//! The pipeline: a policy emits tagged actions (think / search / judge /
//! answer), the episode engine executes searches against a BM25 index and
//! folds observations back into the prompt, observations judged useless are
//! masked out of every later prompt, and the reward layer pays the agent for
//! judging accurately as well as for answering correctly. On top of that sit
//! group-relative and temporal-difference advantage estimation, an exact-match
//! evaluation suite with a judge-impact taxonomy, and a benchmark forge that
//! rewrites real questions into fictional ones backed by injected documents.
//!
//! Numeric kernels are generic over [`Real`]; the rest of the engine uses the
//! concrete [`Scalar`] alias.

pub mod advantage;
pub mod corpus;
pub mod episode;
pub mod eval;
pub mod forge;
pub mod grammar;
pub(crate) mod http;
pub mod index;
pub mod policy;
pub mod reward;
pub mod synthetic;
pub(crate) mod text;

/// Floating-point scalar the numeric kernels are generic over.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug + Send + Sync
{
}

impl<T> Real for T where
    T: num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug + Send + Sync
{
}

/// Concrete scalar used by the engine's own data structures.
pub type Scalar = f64;

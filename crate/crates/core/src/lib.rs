//! Topic trajectories of long texts modelled as Dirichlet random walks with
//! log-normally distributed focus, and their flow under coarse-graining.

pub mod corpus;
pub mod flow;
pub mod inference;
pub mod levy;
pub mod rng;
pub mod simplex;
pub mod special;
pub mod stats;
pub mod topics;
pub mod trees;

pub use corpus::{CommentTree, TokenStream};
pub use flow::{FlowCurve, FlowError, GaussianRegion};
pub use inference::{FitResult, GridSpec};
pub use levy::Trajectory;
pub use rng::SimRng;
pub use simplex::{AlphaVector, LevyParams, SimplexPoint};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Simplex(#[from] simplex::SimplexError),
    #[error(transparent)]
    Levy(#[from] levy::LevyError),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Topics(#[from] topics::TopicsError),
    #[error(transparent)]
    Trees(#[from] trees::TreeError),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
}

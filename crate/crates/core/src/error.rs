use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh parse error: {0}")]
    Parse(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("cell {cell} is open: {detail}")]
    OpenCell { cell: usize, detail: String },

    #[error("face {face} is not planar (deviation {deviation:.3e} relative to h_f)")]
    NonPlanarFace { face: usize, deviation: f64 },

    #[error("face {face} is not convex")]
    NonConvexFace { face: usize },

    #[error("cell {cell} is not star-shaped with respect to its barycenter")]
    NotStarShaped { cell: usize },

    #[error("operand has {got} components, operator expects {expected}")]
    Arity { expected: usize, got: usize },

    #[error("singular system in {context}")]
    Singular { context: String },

    #[error("unisolvence failure on face {face}: projector system has rank {rank}, expected {expected}")]
    Unisolvence {
        face: usize,
        rank: usize,
        expected: usize,
    },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, VemError>;

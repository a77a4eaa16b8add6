//! Virtual element discretization of linear magnetostatics on polyhedral meshes.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod cell_vem;
pub mod face_vem;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod problems;
pub mod quadrature;
pub mod solve_post;

pub use error::{Result, VemError};

#![allow(dead_code)]

pub mod fe2d;
pub mod fe3d;
pub mod oracle;

use std::path::PathBuf;

use nalgebra::DVector;
use polyvem::mesh::{gen_cube_mesh, gen_graded_cube_mesh, load_mesh, Mesh};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mesh_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../meshes").join(name)
}

pub fn shipped(name: &str) -> Mesh {
    load_mesh(&mesh_path(name)).expect("shipped mesh")
}

/// Names of the shipped Voronoi meshes.
pub const VORONOI: [&str; 3] = ["voronoi8.json", "voronoi27.json", "voronoi64.json"];

/// Tensor-product cube with uneven spacings along every axis.
pub fn graded_cube() -> Mesh {
    gen_graded_cube_mesh(3, [vec![1.0, 2.0, 4.0], vec![3.0, 1.0, 2.0], vec![1.0, 1.5, 3.0]]).expect("graded cube")
}

/// Every mesh used by the mesh-wide checks: generated cubes, the graded cube
/// and the shipped Voronoi files.
pub fn all_meshes() -> Vec<(String, Mesh)> {
    let mut v: Vec<(String, Mesh)> = [1, 2, 3].iter().map(|&n| (format!("cube{n}"), gen_cube_mesh(n))).collect();
    v.push(("graded3".into(), graded_cube()));
    v.extend(VORONOI.iter().map(|n| (n.to_string(), shipped(n))));
    v
}

/// `y = A x` for a triplet list.
pub fn apply(t: &[(usize, usize, f64)], x: &DVector<f64>, rows: usize) -> DVector<f64> {
    let mut y = DVector::zeros(rows);
    for &(i, j, v) in t {
        y[i] += v * x[j];
    }
    y
}

use super::Mesh;
use crate::error::{Result, VemError};

/// Uniform `n × n × n` hexahedral partition of the unit cube.
pub fn gen_cube_mesh(n: usize) -> Mesh {
    let r = vec![1.0; n];
    gen_graded_cube_mesh(n, [r.clone(), r.clone(), r]).expect("uniform cube mesh is valid")
}

/// Tensor-product box partition of the unit cube with relative spacings
/// `ratios[axis][i]` (length `n`, positive) along each axis.
pub fn gen_graded_cube_mesh(n: usize, ratios: [Vec<f64>; 3]) -> Result<Mesh> {
    if n == 0 {
        return Err(VemError::InvalidArgument("cube mesh needs n >= 1".into()));
    }
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(3);
    for r in &ratios {
        if r.len() != n || r.iter().any(|&x| !(x > 0.0)) {
            return Err(VemError::InvalidArgument(format!("spacing ratios must be {n} positive numbers per axis")));
        }
        let tot: f64 = r.iter().sum();
        let mut c = vec![0.0];
        let mut s = 0.0;
        for x in r {
            s += x;
            c.push(s / tot);
        }
        c[n] = 1.0;
        coords.push(c);
    }
    let np = n + 1;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([coords[0][i], coords[1][j], coords[2][k]]);
            }
        }
    }
    let mut faces = Vec::new();
    // x-normal faces indexed (i, j, k) with i in 0..=n
    let xf = |i: usize, j: usize, k: usize| i + np * (j + n * k);
    for k in 0..n {
        for j in 0..n {
            for i in 0..np {
                faces.push(vec![vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)]);
            }
        }
    }
    let ny0 = faces.len();
    let yf = |i: usize, j: usize, k: usize| ny0 + i + n * (j + np * k);
    for k in 0..n {
        for j in 0..np {
            for i in 0..n {
                faces.push(vec![vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)]);
            }
        }
    }
    let nz0 = faces.len();
    let zf = |i: usize, j: usize, k: usize| nz0 + i + n * (j + n * k);
    for k in 0..np {
        for j in 0..n {
            for i in 0..n {
                faces.push(vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)]);
            }
        }
    }
    let mut cells = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                cells.push(vec![
                    (xf(i, j, k), -1.0),
                    (xf(i + 1, j, k), 1.0),
                    (yf(i, j, k), -1.0),
                    (yf(i, j + 1, k), 1.0),
                    (zf(i, j, k), -1.0),
                    (zf(i, j, k + 1), 1.0),
                ]);
            }
        }
    }
    Mesh::from_raw(vertices, faces, cells)
}

/// Single right prism over a convex polygon (counter-clockwise, in the `z = 0` plane).
pub fn gen_prism(polygon: &[[f64; 2]], height: f64) -> Result<Mesh> {
    let m = polygon.len();
    let mut vertices = Vec::with_capacity(2 * m);
    for z in [0.0, height] {
        for p in polygon {
            vertices.push([p[0], p[1], z]);
        }
    }
    let mut faces = vec![(0..m).collect::<Vec<_>>(), (m..2 * m).collect()];
    let mut cells = vec![(0, -1.0), (1, 1.0)];
    for i in 0..m {
        let j = (i + 1) % m;
        faces.push(vec![i, j, m + j, m + i]);
        cells.push((faces.len() - 1, 1.0));
    }
    Mesh::from_raw(vertices, faces, vec![cells])
}

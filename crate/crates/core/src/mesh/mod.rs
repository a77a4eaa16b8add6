//! Immutable polyhedral mesh with canonical orientation.
//!
//! Edges point from the lower to the higher global vertex index. Faces carry
//! the normal given by the right-hand rule on their stored vertex loop, and
//! every cell records, per face, `+1` when that normal points outward.

pub mod generate;
pub mod geom;
pub mod io;
pub mod quality;

use std::collections::HashMap;

use crate::error::{Result, VemError};
use geom::*;

pub use generate::{gen_cube_mesh, gen_graded_cube_mesh, gen_prism};
pub use io::{load_mesh, mesh_to_string, parse_mesh, write_mesh};
pub use quality::{check_quality, QualityReport};

/// Planarity tolerance relative to the face diameter.
pub const PLANARITY_TOL: f64 = 1e-9;
/// Angle below which two consecutive boundary edges count as one line.
pub const COLLINEAR_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoints, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    pub tangent: Point,
    pub length: f64,
    pub midpoint: Point,
    pub boundary: bool,
}

#[derive(Clone, Debug)]
pub struct Face {
    /// Vertex loop, counter-clockwise seen from the normal side.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub edges: Vec<usize>,
    /// `+1` when the loop runs along the canonical edge tangent.
    pub edge_signs: Vec<f64>,
    pub normal: Point,
    /// In-plane orthonormal frame with `frame[0] × frame[1] = normal`.
    pub frame: [Point; 2],
    pub barycenter: Point,
    pub area: f64,
    pub diameter: f64,
    /// Number of distinct straight lines covering the boundary.
    pub eta: usize,
    pub cells: Vec<usize>,
    pub boundary: bool,
}

impl Face {
    /// Local 2D coordinates of a point in the face frame, relative to the barycenter.
    pub fn to_local(&self, x: &Point) -> [f64; 2] {
        let d = sub(x, &self.barycenter);
        [dot(&d, &self.frame[0]), dot(&d, &self.frame[1])]
    }

    pub fn to_global(&self, p: &[f64; 2]) -> Point {
        add(&self.barycenter, &add(&scale(&self.frame[0], p[0]), &scale(&self.frame[1], p[1])))
    }

    /// Components of a 3D vector in the face frame.
    pub fn tangential(&self, v: &Point) -> [f64; 2] {
        [dot(v, &self.frame[0]), dot(v, &self.frame[1])]
    }

    pub fn lift_vector(&self, v: &[f64; 2]) -> Point {
        add(&scale(&self.frame[0], v[0]), &scale(&self.frame[1], v[1]))
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub faces: Vec<usize>,
    /// `+1` when the face normal points out of the cell.
    pub face_signs: Vec<f64>,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    pub barycenter: Point,
    pub volume: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
    /// Average cell diameter.
    pub mesh_size: f64,
    pub boundary_vertex: Vec<bool>,
}

impl Mesh {
    /// Builds and validates a mesh from raw connectivity.
    ///
    /// `cells[c]` lists `(face index, sign)` pairs, `sign = +1` when the stored
    /// face normal is outward for that cell.
    pub fn from_raw(vertices: Vec<Point>, faces: Vec<Vec<usize>>, cells: Vec<Vec<(usize, f64)>>) -> Result<Mesh> {
        let nv = vertices.len();
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut out_faces = Vec::with_capacity(faces.len());

        for (fi, lp) in faces.iter().enumerate() {
            if lp.len() < 3 {
                return Err(VemError::InvalidMesh(format!("face {fi} has fewer than 3 vertices")));
            }
            if let Some(&bad) = lp.iter().find(|&&v| v >= nv) {
                return Err(VemError::InvalidMesh(format!("face {fi} references vertex {bad} out of range")));
            }
            let mut fe = Vec::with_capacity(lp.len());
            let mut fs = Vec::with_capacity(lp.len());
            for i in 0..lp.len() {
                let (a, b) = (lp[i], lp[(i + 1) % lp.len()]);
                if a == b {
                    return Err(VemError::InvalidMesh(format!("face {fi} repeats vertex {a}")));
                }
                let key = (a.min(b), a.max(b));
                let id = *edge_map.entry(key).or_insert_with(|| {
                    let (p, q) = (&vertices[key.0], &vertices[key.1]);
                    let d = sub(q, p);
                    let len = norm(&d);
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        tangent: scale(&d, 1.0 / len),
                        length: len,
                        midpoint: scale(&add(p, q), 0.5),
                        boundary: false,
                    });
                    edges.len() - 1
                });
                fe.push(id);
                fs.push(if a < b { 1.0 } else { -1.0 });
            }
            out_faces.push(build_face(fi, &vertices, lp.clone(), fe, fs)?);
        }
        for (i, e) in edges.iter().enumerate() {
            if !(e.length > 0.0) {
                return Err(VemError::InvalidMesh(format!("edge {i} has zero length")));
            }
        }

        let mut out_cells = Vec::with_capacity(cells.len());
        for (ci, cf) in cells.iter().enumerate() {
            if cf.is_empty() {
                return Err(VemError::OpenCell { cell: ci, detail: "no faces".into() });
            }
            for &(f, s) in cf {
                if f >= out_faces.len() {
                    return Err(VemError::InvalidMesh(format!("cell {ci} references face {f} out of range")));
                }
                out_faces[f].cells.push(ci);
                let _ = s;
            }
            out_cells.push(build_cell(ci, &vertices, &out_faces, cf)?);
        }

        for (fi, f) in out_faces.iter_mut().enumerate() {
            match f.cells.len() {
                0 => return Err(VemError::InvalidMesh(format!("face {fi} belongs to no cell"))),
                1 => f.boundary = true,
                2 => {
                    let s: Vec<f64> = f
                        .cells
                        .iter()
                        .map(|&c| {
                            let cell = &out_cells[c];
                            let k = cell.faces.iter().position(|&g| g == fi).unwrap();
                            cell.face_signs[k]
                        })
                        .collect();
                    if s[0] * s[1] > 0.0 {
                        return Err(VemError::InvalidMesh(format!(
                            "face {fi} has the same orientation sign in cells {} and {}",
                            f.cells[0], f.cells[1]
                        )));
                    }
                }
                _ => return Err(VemError::InvalidMesh(format!("face {fi} is shared by more than two cells"))),
            }
        }

        let mut boundary_vertex = vec![false; nv];
        for f in out_faces.iter().filter(|f| f.boundary) {
            for &e in &f.edges {
                edges[e].boundary = true;
            }
            for &v in &f.vertices {
                boundary_vertex[v] = true;
            }
        }
        let mesh_size = out_cells.iter().map(|c| c.diameter).sum::<f64>() / out_cells.len().max(1) as f64;
        Ok(Mesh { vertices, edges, faces: out_faces, cells: out_cells, mesh_size, boundary_vertex })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Position of `face` in the face list of `cell`.
    pub fn local_face(&self, cell: usize, face: usize) -> Option<usize> {
        self.cells[cell].faces.iter().position(|&f| f == face)
    }

    /// Sum over the cell faces of the oriented area vectors (zero for a closed cell).
    pub fn closure_defect(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let mut s = [0.0; 3];
        for (&f, &sg) in c.faces.iter().zip(&c.face_signs) {
            let face = &self.faces[f];
            s = add(&s, &scale(&face.normal, sg * face.area));
        }
        norm(&s)
    }

    pub fn face_points(&self, face: usize) -> Vec<Point> {
        self.faces[face].vertices.iter().map(|&v| self.vertices[v]).collect()
    }
}

/// Number of distinct lines covering a closed polygonal loop.
pub fn face_eta(points: &[Point]) -> usize {
    let m = points.len();
    let dirs: Vec<Point> = (0..m).map(|i| normalized(&sub(&points[(i + 1) % m], &points[i]))).collect();
    let mut joints = 0;
    for i in 0..m {
        let (a, b) = (&dirs[(i + m - 1) % m], &dirs[i]);
        let ang = norm(&cross(a, b)).atan2(dot(a, b));
        if ang.abs() < COLLINEAR_TOL {
            joints += 1;
        }
    }
    m - joints
}

fn build_face(fi: usize, vertices: &[Point], lp: Vec<usize>, edges: Vec<usize>, edge_signs: Vec<f64>) -> Result<Face> {
    let pts: Vec<Point> = lp.iter().map(|&v| vertices[v]).collect();
    let m = pts.len();
    // Newell normal
    let mut nn = [0.0; 3];
    for i in 0..m {
        let (p, q) = (&pts[i], &pts[(i + 1) % m]);
        nn[0] += (p[1] - q[1]) * (p[2] + q[2]);
        nn[1] += (p[2] - q[2]) * (p[0] + q[0]);
        nn[2] += (p[0] - q[0]) * (p[1] + q[1]);
    }
    let nlen = norm(&nn);
    if !(nlen > 0.0) {
        return Err(VemError::InvalidMesh(format!("face {fi} is degenerate")));
    }
    let normal = scale(&nn, 1.0 / nlen);
    let diam = diameter(&pts);
    let avg = centroid(&pts);
    let dev = pts.iter().map(|p| dot(&sub(p, &avg), &normal).abs()).fold(0.0, f64::max) / diam;
    if dev > PLANARITY_TOL {
        return Err(VemError::NonPlanarFace { face: fi, deviation: dev });
    }
    for i in 0..m {
        let a = sub(&pts[(i + 1) % m], &pts[i]);
        let b = sub(&pts[(i + 2) % m], &pts[(i + 1) % m]);
        let turn = dot(&cross(&a, &b), &normal) / (norm(&a) * norm(&b));
        if turn < -COLLINEAR_TOL {
            return Err(VemError::NonConvexFace { face: fi });
        }
    }
    let mut area = 0.0;
    let mut bc = [0.0; 3];
    for i in 0..m {
        let (p, q) = (&pts[i], &pts[(i + 1) % m]);
        let a = 0.5 * dot(&cross(&sub(p, &avg), &sub(q, &avg)), &normal);
        area += a;
        bc = add(&bc, &scale(&add(&add(&avg, p), q), a / 3.0));
    }
    if !(area > 0.0) {
        return Err(VemError::InvalidMesh(format!("face {fi} has non-positive area")));
    }
    let barycenter = scale(&bc, 1.0 / area);
    let e1 = normalized(&sub(&pts[1], &pts[0]));
    let e1 = normalized(&sub(&e1, &scale(&normal, dot(&e1, &normal))));
    let e2 = cross(&normal, &e1);
    // rotate onto the principal axes of the vertex cloud, which keeps the
    // scaled monomials of thin faces well conditioned
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let d = sub(p, &avg);
        let (x, y) = (dot(&d, &e1), dot(&d, &e2));
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    // isotropic clouds (squares, regular polygons) have no principal axis;
    // atan2 of rounding noise would make the frame depend on the coordinates
    let aniso = (2.0 * sxy).hypot(sxx - syy);
    let th = if aniso > 1e-10 * (sxx + syy) { 0.5 * (2.0 * sxy).atan2(sxx - syy) } else { 0.0 };
    let e1 = add(&scale(&e1, th.cos()), &scale(&e2, th.sin()));
    let e2 = cross(&normal, &e1);
    Ok(Face {
        vertices: lp,
        edges,
        edge_signs,
        normal,
        frame: [e1, e2],
        barycenter,
        area,
        diameter: diam,
        eta: face_eta(&pts),
        cells: Vec::new(),
        boundary: false,
    })
}

fn build_cell(ci: usize, vertices: &[Point], faces: &[Face], cf: &[(usize, f64)]) -> Result<Cell> {
    // every edge must be used by exactly two faces, traversed in opposite directions
    let mut use_count: HashMap<usize, (usize, f64)> = HashMap::new();
    let mut verts: Vec<usize> = Vec::new();
    for &(f, s) in cf {
        let face = &faces[f];
        for (k, &e) in face.edges.iter().enumerate() {
            let d = face.edge_signs[k] * s;
            let ent = use_count.entry(e).or_insert((0, 0.0));
            ent.0 += 1;
            ent.1 += d;
        }
        verts.extend(face.vertices.iter().cloned());
    }
    let mut cell_edges: Vec<usize> = use_count.keys().cloned().collect();
    cell_edges.sort_unstable();
    for &e in &cell_edges {
        let (n, d) = use_count[&e];
        if n != 2 {
            return Err(VemError::OpenCell { cell: ci, detail: format!("edge {e} is shared by {n} of its faces") });
        }
        if d.abs() > 0.5 {
            return Err(VemError::InvalidMesh(format!("cell {ci}: inconsistent face orientation signs around edge {e}")));
        }
    }
    verts.sort_unstable();
    verts.dedup();
    let euler = verts.len() as i64 - cell_edges.len() as i64 + cf.len() as i64;
    if euler != 2 {
        return Err(VemError::OpenCell { cell: ci, detail: format!("Euler characteristic {euler} != 2") });
    }
    let pts: Vec<Point> = verts.iter().map(|&v| vertices[v]).collect();
    let r = centroid(&pts);
    let mut vol = 0.0;
    let mut bc = [0.0; 3];
    for &(f, s) in cf {
        let face = &faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let (p, q) = (&vertices[face.vertices[i]], &vertices[face.vertices[(i + 1) % m]]);
            let v = s * det3(&sub(&face.barycenter, &r), &sub(p, &r), &sub(q, &r)) / 6.0;
            vol += v;
            let c = scale(&add(&add(&r, &face.barycenter), &add(p, q)), 0.25);
            bc = add(&bc, &scale(&c, v));
        }
    }
    if !(vol > 0.0) {
        return Err(VemError::InvalidMesh(format!("cell {ci} has non-positive volume (check face signs)")));
    }
    Ok(Cell {
        faces: cf.iter().map(|x| x.0).collect(),
        face_signs: cf.iter().map(|x| x.1).collect(),
        edges: cell_edges,
        vertices: verts,
        barycenter: scale(&bc, 1.0 / vol),
        volume: vol,
        diameter: diameter(&pts),
    })
}

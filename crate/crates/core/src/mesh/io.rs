//! `vemjson` mesh files.
//!
//! ```json
//! { "vertices": [[x, y, z], ...],
//!   "faces": [[v0, v1, v2, ...], ...],
//!   "cells": [[f1, -f2, ...], ...] }
//! ```
//!
//! Vertex indices in face loops are 0-based. Cell entries are 1-based face
//! indices, negated when the face normal points into the cell.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::error::{Result, VemError};

#[derive(Serialize, Deserialize)]
struct RawMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
    cells: Vec<Vec<i64>>,
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let raw: RawMesh = serde_json::from_str(text).map_err(|e| VemError::Parse(e.to_string()))?;
    let mut cells = Vec::with_capacity(raw.cells.len());
    for (ci, c) in raw.cells.iter().enumerate() {
        let mut cf = Vec::with_capacity(c.len());
        for &s in c {
            if s == 0 {
                return Err(VemError::Parse(format!("cell {ci}: face index 0 (indices are 1-based)")));
            }
            cf.push(((s.unsigned_abs() - 1) as usize, s.signum() as f64));
        }
        cells.push(cf);
    }
    Mesh::from_raw(raw.vertices, raw.faces, cells)
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| VemError::Io { path: path.display().to_string(), source: e })?;
    parse_mesh(&text)
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let raw = RawMesh {
        vertices: mesh.vertices.clone(),
        faces: mesh.faces.iter().map(|f| f.vertices.clone()).collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| {
                c.faces
                    .iter()
                    .zip(&c.face_signs)
                    .map(|(&f, &s)| if s > 0.0 { f as i64 + 1 } else { -(f as i64 + 1) })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("mesh serializes")
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))
        .map_err(|e| VemError::Io { path: path.display().to_string(), source: e })
}

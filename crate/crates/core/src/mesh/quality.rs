use std::fmt::Write as _;

use super::geom::*;
use super::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Cell,
    Face,
    Edge,
}

impl Entity {
    fn name(self) -> &'static str {
        match self {
            Entity::Cell => "cell",
            Entity::Face => "face",
            Entity::Edge => "edge",
        }
    }
}

#[derive(Clone, Debug)]
pub struct QualityEntry {
    pub entity: Entity,
    pub id: usize,
    /// Shape ratio relative to the owning cell diameter (minimum over owners).
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct QualityReport {
    pub gamma: f64,
    pub entries: Vec<QualityEntry>,
}

impl QualityReport {
    pub fn violations(&self) -> impl Iterator<Item = &QualityEntry> {
        self.entries.iter().filter(move |e| e.ratio < self.gamma)
    }

    pub fn min_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("entity,id,ratio,violates\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{:.12e},{}", e.entity.name(), e.id, e.ratio, e.ratio < self.gamma);
        }
        s
    }
}

/// Regularity estimates: for each cell, the distance from its barycenter to the
/// nearest face plane; for each face, the distance from its barycenter to the
/// nearest edge line; for each edge, its length. All are divided by the
/// diameter of the (smallest) adjacent cell. For convex entities these are
/// lower bounds of the inscribed-ball radius.
pub fn check_quality(mesh: &Mesh, gamma: f64) -> QualityReport {
    let mut face_h = vec![f64::INFINITY; mesh.num_faces()];
    let mut edge_h = vec![f64::INFINITY; mesh.num_edges()];
    let mut entries = Vec::new();
    for (ci, c) in mesh.cells.iter().enumerate() {
        let mut r = f64::INFINITY;
        for &f in &c.faces {
            let face = &mesh.faces[f];
            r = r.min(dot(&sub(&c.barycenter, &face.barycenter), &face.normal).abs());
            face_h[f] = face_h[f].min(c.diameter);
            for &e in &face.edges {
                edge_h[e] = edge_h[e].min(c.diameter);
            }
        }
        entries.push(QualityEntry { entity: Entity::Cell, id: ci, ratio: r / c.diameter });
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        let mut r = f64::INFINITY;
        for &e in &f.edges {
            let ed = &mesh.edges[e];
            let d = sub(&f.barycenter, &mesh.vertices[ed.vertices[0]]);
            r = r.min(norm(&cross(&d, &ed.tangent)));
        }
        entries.push(QualityEntry { entity: Entity::Face, id: fi, ratio: r / face_h[fi] });
    }
    for (ei, e) in mesh.edges.iter().enumerate() {
        entries.push(QualityEntry { entity: Entity::Edge, id: ei, ratio: e.length / edge_h[ei] });
    }
    QualityReport { gamma, entries }
}

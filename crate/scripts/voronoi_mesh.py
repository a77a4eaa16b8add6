#!/usr/bin/env python3
"""Clipped (centroidal) Voronoi partitions of the unit cube in vemjson format.

    python3 scripts/voronoi_mesh.py --cells 27 --seed 1 --lloyd 30 -o meshes/voronoi27.json
"""

import argparse
import json

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

CUBE = [
    ([-1, 0, 0], 0.0), ([1, 0, 0], -1.0),
    ([0, -1, 0], 0.0), ([0, 1, 0], -1.0),
    ([0, 0, -1], 0.0), ([0, 0, 1], -1.0),
]


def cell_polytope(i, seeds):
    """Vertices and planar faces (vertex index loops, outward) of Voronoi cell i."""
    p = seeds[i]
    rows = [list(a) + [b] for a, b in CUBE]
    for j, q in enumerate(seeds):
        if j != i:
            # (q - p) . x <= (|q|^2 - |p|^2) / 2
            rows.append(list(q - p) + [-(q @ q - p @ p) / 2])
    hs = HalfspaceIntersection(np.array(rows), p)
    pts = unique_points(hs.intersections, 1e-10)
    hull = ConvexHull(pts)
    faces = {}
    for simplex, eq in zip(hull.simplices, hull.equations):
        key = tuple(np.round(eq, 8))
        faces.setdefault(key, (eq, set()))[1].update(simplex)
    loops = []
    for eq, vs in faces.values():
        vs = list(vs)
        n = eq[:3]
        c = pts[vs].mean(axis=0)
        u = pts[vs[0]] - c
        u /= np.linalg.norm(u)
        w = np.cross(n, u)
        ang = [np.arctan2((pts[v] - c) @ w, (pts[v] - c) @ u) for v in vs]
        loops.append([vs[k] for k in np.argsort(ang)])
    return pts, loops, hull.volume, centroid(pts, loops)


def unique_points(x, tol):
    tree = cKDTree(x)
    keep, seen = [], np.zeros(len(x), bool)
    for i in range(len(x)):
        if not seen[i]:
            seen[tree.query_ball_point(x[i], tol)] = True
            keep.append(i)
    return x[keep]


def centroid(pts, loops):
    c0 = pts.mean(axis=0)
    vol, acc = 0.0, np.zeros(3)
    for loop in loops:
        fc = pts[loop].mean(axis=0)
        for a, b in zip(loop, loop[1:] + loop[:1]):
            v = np.dot(np.cross(pts[a] - c0, pts[b] - c0), fc - c0) / 6
            vol += v
            acc += v * (c0 + pts[a] + pts[b] + fc) / 4
    return acc / vol


def build(seeds):
    verts, faces, cells = [], {}, []
    face_list = []
    tree_pts = []

    def vid(x):
        for k, y in enumerate(tree_pts):
            if np.linalg.norm(x - y) < 1e-9:
                return k
        tree_pts.append(x)
        return len(tree_pts) - 1

    for i in range(len(seeds)):
        pts, loops, _, _ = cell_polytope(i, seeds)
        cell = []
        for loop in loops:
            g = [vid(pts[v]) for v in loop]
            key = tuple(sorted(g))
            if key in faces:
                cell.append(-(faces[key] + 1))
            else:
                faces[key] = len(face_list)
                face_list.append(g)
                cell.append(faces[key] + 1)
        cells.append(cell)
    verts = [[float(c) for c in x] for x in tree_pts]
    return {"vertices": verts, "faces": face_list, "cells": cells}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=27)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--lloyd", type=int, default=30)
    ap.add_argument("-o", "--output", required=True)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    seeds = rng.uniform(0.05, 0.95, size=(a.cells, 3))
    for _ in range(a.lloyd):
        seeds = np.array([cell_polytope(i, seeds)[3] for i in range(len(seeds))])
    mesh = build(seeds)
    with open(a.output, "w") as f:
        json.dump(mesh, f)
    print(f"{len(mesh['vertices'])} vertices, {len(mesh['faces'])} faces, {len(mesh['cells'])} cells")


if __name__ == "__main__":
    main()

//! Brute-force oracles shared by the integration suites. Everything here is
//! deliberately independent of the library's rendering and flow paths: point
//! containment comes from Cramer's rule instead of edge functions, depth from
//! a plain weighted sum instead of the base-plus-offsets blend, and winners
//! from an all-triangles scan per pixel instead of a z-buffer.

#![allow(dead_code)]

use meshflow_core::model3d::Mesh;
use nalgebra::Vector3;

/// Pixels this close to a triangle boundary (in barycentric units), or with
/// this small a depth gap between two covering triangles, are fill-rule ties
/// the oracle refuses to adjudicate.
pub const EDGE_TOL: f64 = 1e-9;

/// Barycentric coordinates of `(px, py)` in the xy projection of a triangle,
/// via Cramer's rule on the 2x2 system. `None` for degenerate triangles.
pub fn cramer_bary(
    v0: &Vector3<f64>,
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
    px: f64,
    py: f64,
) -> Option<[f64; 3]> {
    let d1 = (v1.x - v0.x, v1.y - v0.y);
    let d2 = (v2.x - v0.x, v2.y - v0.y);
    let det = d1.0 * d2.1 - d1.1 * d2.0;
    if det == 0.0 {
        return None;
    }
    let q = (px - v0.x, py - v0.y);
    let l1 = (q.0 * d2.1 - q.1 * d2.0) / det;
    let l2 = (d1.0 * q.1 - d1.1 * q.0) / det;
    Some([1.0 - l1 - l2, l1, l2])
}

fn tri_vertices<'a>(mesh: &'a Mesh, tri: &[u32; 3]) -> [&'a Vector3<f64>; 3] {
    [
        &mesh.vertices[tri[0] as usize],
        &mesh.vertices[tri[1] as usize],
        &mesh.vertices[tri[2] as usize],
    ]
}

/// Plain-sum depth of barycentric coordinates, the oracle-side expression.
pub fn plain_depth(l: [f64; 3], z0: f64, z1: f64, z2: f64) -> f64 {
    l[0] * z0 + l[1] * z1 + l[2] * z2
}

/// All-pairs reference rasterization: per pixel, every triangle is tested
/// for containment and the front-most (max depth, then lowest id) wins.
pub struct OracleRaster {
    pub width: usize,
    pub height: usize,
    pub tri: Vec<Option<u32>>,
    pub depth: Vec<f64>,
    pub bary: Vec<[f64; 3]>,
    /// Fill-rule tie: the pixel center grazes a triangle boundary or two
    /// covering triangles are depth-tied.
    pub tie: Vec<bool>,
}

pub fn rasterize_oracle(mesh: &Mesh, width: usize, height: usize) -> OracleRaster {
    let n = width * height;
    let mut out = OracleRaster {
        width,
        height,
        tri: vec![None; n],
        depth: vec![f64::NEG_INFINITY; n],
        bary: vec![[0.0; 3]; n],
        tie: vec![false; n],
    };
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64, y as f64);
            let idx = y * width + x;
            let mut best: Option<(f64, u32, [f64; 3])> = None;
            let mut second_depth = f64::NEG_INFINITY;
            for (id, tri) in mesh.triangles.iter().enumerate() {
                let [v0, v1, v2] = tri_vertices(mesh, tri);
                let Some(l) = cramer_bary(v0, v1, v2, px, py) else {
                    continue;
                };
                let min_l = l[0].min(l[1]).min(l[2]);
                if (-EDGE_TOL..=EDGE_TOL).contains(&min_l) {
                    // Boundary graze: containment is rounding-dependent.
                    out.tie[idx] = true;
                }
                if min_l < 0.0 {
                    continue;
                }
                let z = plain_depth(l, v0.z, v1.z, v2.z);
                match best {
                    None => best = Some((z, id as u32, l)),
                    Some((bz, bid, _)) => {
                        if z > bz || (z == bz && (id as u32) < bid) {
                            second_depth = bz;
                            best = Some((z, id as u32, l));
                        } else {
                            second_depth = second_depth.max(z);
                        }
                    }
                }
            }
            if let Some((z, id, l)) = best {
                out.tri[idx] = Some(id);
                out.depth[idx] = z;
                out.bary[idx] = l;
                if (z - second_depth).abs() <= EDGE_TOL {
                    out.tie[idx] = true;
                }
            }
        }
    }
    out
}

/// Front-most containing triangle of a continuous image point, or `None`
/// when no triangle contains it: the all-triangles analogue of a z-buffer
/// lookup at non-integer coordinates.
pub fn oracle_front_point(mesh: &Mesh, x: f64, y: f64) -> Option<(u32, [f64; 3], f64)> {
    let mut best: Option<(u32, [f64; 3], f64)> = None;
    for (id, tri) in mesh.triangles.iter().enumerate() {
        let [v0, v1, v2] = tri_vertices(mesh, tri);
        let Some(l) = cramer_bary(v0, v1, v2, x, y) else {
            continue;
        };
        if l[0] < 0.0 || l[1] < 0.0 || l[2] < 0.0 {
            continue;
        }
        let z = plain_depth(l, v0.z, v1.z, v2.z);
        if best.is_none_or(|(_, _, bz)| z > bz) {
            best = Some((id as u32, l, z));
        }
    }
    best
}

/// Visibility of a warped 3D point against every triangle of the target
/// frame's mesh.
pub struct OcclusionVerdict {
    pub visible: bool,
    /// Depth margin `q.z - front_depth`; `None` when the point leaves the
    /// image or no triangle contains it.
    pub margin: Option<f64>,
}

pub fn occlusion_oracle(
    mesh: &Mesh,
    width: usize,
    height: usize,
    q: Vector3<f64>,
    eps: f64,
) -> OcclusionVerdict {
    if q.x < 0.0 || q.y < 0.0 || q.x > (width - 1) as f64 || q.y > (height - 1) as f64 {
        return OcclusionVerdict {
            visible: false,
            margin: None,
        };
    }
    match oracle_front_point(mesh, q.x, q.y) {
        None => OcclusionVerdict {
            visible: false,
            margin: None,
        },
        Some((_, _, front)) => OcclusionVerdict {
            visible: q.z >= front - eps,
            margin: Some(q.z - front),
        },
    }
}

/// Exact evaluation of the mesh-derived flow field `mesh_a -> mesh_b` at a
/// continuous image point of frame a: front-most containing triangle, then a
/// plain barycentric sum of the per-vertex displacements.
pub fn oracle_flow_at(mesh_a: &Mesh, mesh_b: &Mesh, x: f64, y: f64) -> Option<Vector3<f64>> {
    let (tri_id, l, _) = oracle_front_point(mesh_a, x, y)?;
    let tri = &mesh_a.triangles[tri_id as usize];
    let mut flow = Vector3::zeros();
    for (k, &vi) in tri.iter().enumerate() {
        let d = mesh_a.vertices[vi as usize] - mesh_b.vertices[vi as usize];
        flow += l[k] * d;
    }
    Some(flow)
}

//! Dense mesh-derived optical flow between two frames in vertex
//! correspondence, with two-sided visibility masking.
//!
//! For a pixel covered at frame t the flow is the barycentric blend of the
//! per-vertex displacements of the recorded front-most triangle. A pixel's
//! flow is valid only when the interpolated point is unoccluded in frame t
//! (a depth-consistency guard against the frame-t z-buffer) and its warped
//! position is unoccluded in frame t-1 (a depth test against the frame-t-1
//! z-buffer sampled at continuous coordinates).
//!
//! The flow triangle is the rasterizer's front-most `tri_index`, not an
//! arbitrary containing triangle, so the rendered color, the depth buffer,
//! and the flow stay mutually consistent.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::model3d::Mesh;
use crate::raster::{bary_mix, edge, RasterBuffers};
use crate::{Error, Result};

/// Per-pixel flow vectors (dx px, dy px, dz depth units) plus a validity
/// mask. Invalid pixels always carry the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vectors: vec![Vector3::zeros(); width * height],
            valid: vec![false; width * height],
        }
    }

    /// Builds a field from raw parts, zeroing vectors on invalid pixels to
    /// restore the invariant.
    pub fn from_parts(
        width: usize,
        height: usize,
        mut vectors: Vec<Vector3<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if vectors.len() != width * height || valid.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "flow field payload {}x{} does not match {}x{}",
                vectors.len(),
                valid.len(),
                width,
                height
            )));
        }
        for (v, &ok) in vectors.iter_mut().zip(&valid) {
            if !ok {
                *v = Vector3::zeros();
            }
        }
        Ok(Self {
            width,
            height,
            vectors,
            valid,
        })
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn vector_at(&self, x: usize, y: usize) -> Vector3<f64> {
        self.vectors[self.idx(x, y)]
    }

    #[inline]
    pub fn valid_at(&self, x: usize, y: usize) -> bool {
        self.valid[self.idx(x, y)]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Two image-space frames of the same mesh plus their raster buffers.
///
/// Construction checks the correspondence invariants: equal vertex counts
/// and identical triangle lists, and buffers matching in size.
#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a> {
    pub mesh_t: &'a Mesh,
    pub mesh_tm1: &'a Mesh,
    pub buffers_t: &'a RasterBuffers,
    pub buffers_tm1: &'a RasterBuffers,
}

impl<'a> FramePair<'a> {
    pub fn new(
        mesh_t: &'a Mesh,
        mesh_tm1: &'a Mesh,
        buffers_t: &'a RasterBuffers,
        buffers_tm1: &'a RasterBuffers,
    ) -> Result<Self> {
        if !mesh_t.same_topology(mesh_tm1) {
            return Err(Error::CorrespondenceMismatch(format!(
                "meshes differ in topology ({} vs {} vertices, {} vs {} triangles)",
                mesh_t.vertices.len(),
                mesh_tm1.vertices.len(),
                mesh_t.triangles.len(),
                mesh_tm1.triangles.len()
            )));
        }
        if buffers_t.width != buffers_tm1.width || buffers_t.height != buffers_tm1.height {
            return Err(Error::DimensionMismatch(format!(
                "raster buffers differ in size: {}x{} vs {}x{}",
                buffers_t.width, buffers_t.height, buffers_tm1.width, buffers_tm1.height
            )));
        }
        Ok(Self {
            mesh_t,
            mesh_tm1,
            buffers_t,
            buffers_tm1,
        })
    }
}

/// Barycentric blend of per-vertex displacements at a covered frame-t pixel:
/// `sum_k lambda_k (V_k^t - V_k^{t-1})`.
pub fn vertex_flow(pair: &FramePair, x: usize, y: usize) -> Result<Vector3<f64>> {
    let idx = pair.buffers_t.idx(x, y);
    let tri = pair.buffers_t.tri_index[idx].ok_or(Error::NotCovered { x, y })?;
    let l = pair.buffers_t.bary[idx];
    let ids = pair.mesh_t.triangles[tri as usize];
    let d: Vec<Vector3<f64>> = ids
        .iter()
        .map(|&i| pair.mesh_t.vertices[i as usize] - pair.mesh_tm1.vertices[i as usize])
        .collect();
    Ok(Vector3::new(
        bary_mix(l, d[0].x, d[1].x, d[2].x),
        bary_mix(l, d[0].y, d[1].y, d[2].y),
        bary_mix(l, d[0].z, d[1].z, d[2].z),
    ))
}

/// Depth of the surface point seen at a covered pixel, interpolated from the
/// recorded triangle's vertex depths.
pub fn query_depth(mesh: &Mesh, buffers: &RasterBuffers, x: usize, y: usize) -> Result<f64> {
    let idx = buffers.idx(x, y);
    let tri = buffers.tri_index[idx].ok_or(Error::NotCovered { x, y })?;
    let l = buffers.bary[idx];
    let ids = mesh.triangles[tri as usize];
    Ok(bary_mix(
        l,
        mesh.vertices[ids[0] as usize].z,
        mesh.vertices[ids[1] as usize].z,
        mesh.vertices[ids[2] as usize].z,
    ))
}

/// Same-frame visibility: the interpolated depth must be at least as close
/// as the stored z-buffer surface, within `eps`. Uncovered pixels are 0.
pub fn visibility_t(mesh: &Mesh, buffers: &RasterBuffers, x: usize, y: usize, eps: f64) -> bool {
    match query_depth(mesh, buffers, x, y) {
        Ok(qz) => qz >= buffers.depth[buffers.idx(x, y)] - eps,
        Err(_) => false,
    }
}

/// Depth of the plane of `tri` at image point `(x, y)`, from unclamped
/// edge-function barycentrics; extrapolates beyond the triangle.
fn plane_depth(mesh: &Mesh, buffers: &RasterBuffers, pixel: (usize, usize), x: f64, y: f64) -> f64 {
    let idx = buffers.idx(pixel.0, pixel.1);
    let tri = buffers.tri_index[idx].expect("caller checked coverage");
    let ids = mesh.triangles[tri as usize];
    let [a, b, c] = ids.map(|i| mesh.vertices[i as usize]);
    let area2 = edge(a.x, a.y, b.x, b.y, c.x, c.y);
    if area2 == 0.0 {
        return buffers.depth[idx];
    }
    let l = [
        edge(b.x, b.y, c.x, c.y, x, y) / area2,
        edge(c.x, c.y, a.x, a.y, x, y) / area2,
        edge(a.x, a.y, b.x, b.y, x, y) / area2,
    ];
    bary_mix(l, a.z, b.z, c.z)
}

/// Reference depth of the recorded front surface at continuous coordinates.
///
/// The depth buffer is only defined where triangles cover it, so the rule
/// is: all four footprint neighbors covered -> bilinear interpolation of
/// their depths; some covered -> the minimum over the covered neighbors'
/// recorded surface planes evaluated at the sample point; none covered or
/// the footprint leaves the image -> `None`.
///
/// The plane form matters at silhouettes: depth climbs steeply away from a
/// rim, so substituting a displaced neighbor's own depth (or extrapolating
/// only one facet of a curved surface) spuriously occludes grazing points.
/// Taking the most favorable covered reconstruction occludes a point only
/// when every facet recorded around the sample puts the surface in front.
pub fn reference_depth(mesh: &Mesh, buffers: &RasterBuffers, x: f64, y: f64) -> Option<f64> {
    let (w, h) = (buffers.width, buffers.height);
    if !x.is_finite() || !y.is_finite() {
        return None;
    }
    if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    let fx = x - x.floor();
    let fy = y - y.floor();
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
    let y1 = if fy == 0.0 { y0 } else { y0 + 1 };

    let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)];
    let all_covered = corners.iter().all(|&(cx, cy)| buffers.covered(cx, cy));
    if all_covered {
        let d = |cx: usize, cy: usize| buffers.depth[buffers.idx(cx, cy)];
        let top = (1.0 - fx) * d(x0, y0) + fx * d(x1, y0);
        let bottom = (1.0 - fx) * d(x0, y1) + fx * d(x1, y1);
        return Some((1.0 - fy) * top + fy * bottom);
    }
    let mut reference: Option<f64> = None;
    for &(cx, cy) in &corners {
        if !buffers.covered(cx, cy) {
            continue;
        }
        let z = plane_depth(mesh, buffers, (cx, cy), x, y);
        reference = Some(match reference {
            None => z,
            Some(best) => best.min(z),
        });
    }
    reference
}

/// Previous-frame visibility of the warped point `q = Q^t - W`: its depth
/// must be at least as close as the frame-t-1 surface reference at
/// `(q.x, q.y)`, within `eps`. Points leaving the image or landing on
/// uncovered depth are invisible.
pub fn visibility_tm1(
    mesh_tm1: &Mesh,
    buffers_tm1: &RasterBuffers,
    q: Vector3<f64>,
    eps: f64,
) -> bool {
    match reference_depth(mesh_tm1, buffers_tm1, q.x, q.y) {
        Some(z) => q.z >= z - eps,
        None => false,
    }
}

/// Default depth tolerance: `1e-4` of the combined covered depth range of
/// the two frames, with a tiny floor so flat scenes keep a nonzero guard.
pub fn default_eps(buffers_t: &RasterBuffers, buffers_tm1: &RasterBuffers) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in [buffers_t, buffers_tm1] {
        if let Some((l, h)) = b.depth_range() {
            lo = lo.min(l);
            hi = hi.max(h);
        }
    }
    if lo.is_finite() && hi > lo {
        1e-4 * (hi - lo)
    } else {
        1e-12
    }
}

/// Computes the full flow field for a frame pair: vectors from
/// [`vertex_flow`], validity from both visibility tests. Invalid pixels are
/// zeroed.
pub fn dense_flow(pair: &FramePair, eps: f64) -> Result<FlowField> {
    let (w, h) = (pair.buffers_t.width, pair.buffers_t.height);
    let mut field = FlowField::zeros(w, h);

    field
        .vectors
        .par_chunks_mut(w)
        .zip(field.valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (vec_row, valid_row))| {
            for x in 0..w {
                let idx = pair.buffers_t.idx(x, y);
                let Some(tri) = pair.buffers_t.tri_index[idx] else {
                    continue;
                };
                let l = pair.buffers_t.bary[idx];
                let ids = pair.mesh_t.triangles[tri as usize];
                let d: Vec<Vector3<f64>> = ids
                    .iter()
                    .map(|&i| pair.mesh_t.vertices[i as usize] - pair.mesh_tm1.vertices[i as usize])
                    .collect();
                let flow = Vector3::new(
                    bary_mix(l, d[0].x, d[1].x, d[2].x),
                    bary_mix(l, d[0].y, d[1].y, d[2].y),
                    bary_mix(l, d[0].z, d[1].z, d[2].z),
                );
                let qz = bary_mix(
                    l,
                    pair.mesh_t.vertices[ids[0] as usize].z,
                    pair.mesh_t.vertices[ids[1] as usize].z,
                    pair.mesh_t.vertices[ids[2] as usize].z,
                );
                let visible_t = qz >= pair.buffers_t.depth[idx] - eps;
                if !visible_t {
                    continue;
                }
                let q_tm1 = Vector3::new(x as f64 - flow.x, y as f64 - flow.y, qz - flow.z);
                if !visibility_tm1(pair.mesh_tm1, pair.buffers_tm1, q_tm1, eps) {
                    continue;
                }
                vec_row[x] = flow;
                valid_row[x] = true;
            }
        });

    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model3d::Mesh;
    use crate::raster::{rasterize, Texture};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn mesh_from(vertices: &[(f64, f64, f64)], triangles: Vec<[u32; 3]>) -> Mesh {
        Mesh::new(
            vertices
                .iter()
                .map(|&(x, y, z)| Vector3::new(x, y, z))
                .collect(),
            triangles,
        )
        .unwrap()
    }

    fn translated(mesh: &Mesh, d: Vector3<f64>) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|v| v + d).collect(),
            triangles: mesh.triangles.clone(),
        }
    }

    fn buffers_for(mesh: &Mesh, size: usize) -> RasterBuffers {
        let tex = Texture::uniform(mesh.vertices.len(), [0.5, 0.5, 0.5]).unwrap();
        rasterize(mesh, &tex, size, size).unwrap()
    }

    #[test]
    fn constant_displacement_gives_constant_flow() {
        let mesh_t = mesh_from(
            &[(2.0, 2.0, 1.0), (7.0, 2.0, 1.0), (2.0, 7.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let mesh_tm1 = translated(&mesh_t, Vector3::new(-1.0, 0.0, 0.0));
        let bt = buffers_for(&mesh_t, 10);
        let btm1 = buffers_for(&mesh_tm1, 10);
        let pair = FramePair::new(&mesh_t, &mesh_tm1, &bt, &btm1).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                if bt.covered(x, y) {
                    let w = vertex_flow(&pair, x, y).unwrap();
                    assert_eq!(w, Vector3::new(1.0, 0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn barycentric_average_of_displacements() {
        // Pixel (1,1) of this triangle has barycentrics (1/3, 1/3, 1/3);
        // displacements (3,0,0), (0,0,0), (0,0,0) average to (1,0,0).
        let mesh_t = mesh_from(
            &[(0.0, 0.0, 1.0), (3.0, 0.0, 1.0), (0.0, 3.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let mut mesh_tm1 = mesh_t.clone();
        mesh_tm1.vertices[0] -= Vector3::new(3.0, 0.0, 0.0);
        let bt = buffers_for(&mesh_t, 4);
        let btm1 = buffers_for(&mesh_tm1, 4);
        let pair = FramePair::new(&mesh_t, &mesh_tm1, &bt, &btm1).unwrap();
        let w = vertex_flow(&pair, 1, 1).unwrap();
        assert_relative_eq!(w.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(w.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(w.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vertex_flow_uncovered_pixel_errors() {
        let mesh = mesh_from(
            &[(0.0, 0.0, 1.0), (2.0, 0.0, 1.0), (0.0, 2.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&mesh, 8);
        let pair = FramePair::new(&mesh, &mesh, &b, &b).unwrap();
        assert!(matches!(
            vertex_flow(&pair, 7, 7),
            Err(Error::NotCovered { x: 7, y: 7 })
        ));
    }

    #[test]
    fn query_depth_constant_and_weighted() {
        let flat = mesh_from(
            &[(0.0, 0.0, 1.0), (3.0, 0.0, 1.0), (0.0, 3.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&flat, 4);
        assert_relative_eq!(query_depth(&flat, &b, 1, 1).unwrap(), 1.0, epsilon = 1e-12);

        // Pixel (1,1) of this triangle has barycentrics (1/2, 1/4, 1/4);
        // depths (0, 4, 8) blend to 3.
        let sloped = mesh_from(
            &[(0.0, 0.0, 0.0), (4.0, 0.0, 4.0), (0.0, 4.0, 8.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&sloped, 5);
        let l = b.bary[b.idx(1, 1)];
        assert_relative_eq!(l[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(l[1], 0.25, epsilon = 1e-12);
        assert_relative_eq!(l[2], 0.25, epsilon = 1e-12);
        assert_relative_eq!(query_depth(&sloped, &b, 1, 1).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn query_depth_agrees_with_depth_buffer() {
        let sphere = crate::synth::icosphere(1);
        let pose = crate::model3d::CameraPose::new(
            20.0,
            nalgebra::Matrix3::identity(),
            nalgebra::Vector2::new(32.0, 32.0),
        )
        .unwrap();
        let mesh = crate::model3d::project(&sphere, &pose);
        let b = buffers_for(&mesh, 64);
        for y in 0..64 {
            for x in 0..64 {
                if b.covered(x, y) {
                    let qz = query_depth(&mesh, &b, x, y).unwrap();
                    assert_relative_eq!(qz, b.depth[b.idx(x, y)], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn visibility_t_front_most_is_visible() {
        let mesh = mesh_from(
            &[(0.0, 0.0, 1.0), (3.0, 0.0, 1.0), (0.0, 3.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&mesh, 4);
        assert!(visibility_t(&mesh, &b, 1, 1, 1e-4));
        // Uncovered pixel reports 0.
        assert!(!visibility_t(&mesh, &b, 3, 3, 1e-4));
    }

    #[test]
    fn visibility_t_occluded_point_is_invisible() {
        // Hand-built buffers: the recorded triangle sits at depth 1 while
        // the depth buffer says the front surface is at depth 2.
        let mesh = mesh_from(
            &[(0.0, 0.0, 1.0), (3.0, 0.0, 1.0), (0.0, 3.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let mut b = buffers_for(&mesh, 4);
        let idx = b.idx(1, 1);
        b.depth[idx] = 2.0;
        assert!(!visibility_t(&mesh, &b, 1, 1, 1e-4));
        // A huge tolerance accepts everything covered.
        assert!(visibility_t(&mesh, &b, 1, 1, f64::INFINITY));
    }

    #[test]
    fn reference_depth_rules() {
        let mesh = mesh_from(
            &[(0.0, 0.0, 2.0), (3.0, 0.0, 2.0), (0.0, 3.0, 2.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&mesh, 4);
        // Interior sample with a fully covered footprint.
        assert_relative_eq!(reference_depth(&mesh, &b, 0.5, 0.5).unwrap(), 2.0);
        // Outside the image.
        assert!(reference_depth(&mesh, &b, -0.5, 1.0).is_none());
        assert!(reference_depth(&mesh, &b, 1.0, 3.5).is_none());
        // Mixed footprint next to the hypotenuse: the nearest covered
        // neighbor's surface plane, which is flat here.
        assert_relative_eq!(reference_depth(&mesh, &b, 1.6, 1.6).unwrap(), 2.0);
        // Footprint entirely over uncovered pixels.
        assert!(reference_depth(&mesh, &b, 3.0, 3.0).is_none());
    }

    #[test]
    fn reference_depth_extrapolates_the_rim_plane() {
        // Plane z = x + 2y over the triangle; a mixed-footprint sample past
        // the hypotenuse must evaluate the plane at the sample point, not
        // return the neighbor's own depth.
        let mesh = mesh_from(
            &[(0.0, 0.0, 0.0), (4.0, 0.0, 4.0), (0.0, 4.0, 8.0)],
            vec![[0, 1, 2]],
        );
        let b = buffers_for(&mesh, 5);
        let z = reference_depth(&mesh, &b, 2.6, 1.6).unwrap();
        assert_relative_eq!(z, 2.6 + 2.0 * 1.6, epsilon = 1e-12);
    }

    #[test]
    fn static_scene_is_fully_valid_with_zero_flow() {
        let sphere = crate::synth::icosphere(1);
        let pose = crate::model3d::CameraPose::new(
            19.0,
            nalgebra::Matrix3::identity(),
            nalgebra::Vector2::new(32.0, 32.0),
        )
        .unwrap();
        let mesh = crate::model3d::project(&sphere, &pose);
        let b = buffers_for(&mesh, 64);
        let pair = FramePair::new(&mesh, &mesh, &b, &b).unwrap();
        let field = dense_flow(&pair, default_eps(&b, &b)).unwrap();
        assert_eq!(field.valid_count(), b.covered_count());
        for (v, ok) in field.vectors.iter().zip(&field.valid) {
            if *ok {
                assert_eq!(*v, Vector3::zeros());
            }
        }
    }

    #[test]
    fn rigid_translation_flow_is_exact_and_validity_intersects() {
        let mesh_t = mesh_from(
            &[(3.0, 2.0, 1.0), (8.0, 2.0, 1.0), (3.0, 7.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let mesh_tm1 = translated(&mesh_t, Vector3::new(-1.0, 0.0, 0.0));
        let bt = buffers_for(&mesh_t, 10);
        let btm1 = buffers_for(&mesh_tm1, 10);
        let pair = FramePair::new(&mesh_t, &mesh_tm1, &bt, &btm1).unwrap();
        let field = dense_flow(&pair, default_eps(&bt, &btm1)).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                if field.valid_at(x, y) {
                    assert_eq!(field.vector_at(x, y), Vector3::new(1.0, 0.0, 0.0));
                    // The source location must be covered at t-1.
                    assert!(btm1.covered(x - 1, y));
                }
                // Validity is a subset of frame-t coverage.
                if !bt.covered(x, y) {
                    assert!(!field.valid_at(x, y));
                }
            }
        }
        assert!(field.valid_count() > 0);
    }

    #[test]
    fn flow_scales_linearly_with_displacement() {
        let sphere = crate::synth::icosphere(1);
        let pose = crate::model3d::CameraPose::new(
            15.0,
            nalgebra::Matrix3::identity(),
            nalgebra::Vector2::new(24.0, 24.0),
        )
        .unwrap();
        let mesh_t = crate::model3d::project(&sphere, &pose);
        // Small per-vertex displacement field, scaled by s.
        let displace = |s: f64| -> Mesh {
            Mesh {
                vertices: mesh_t
                    .vertices
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let wob = Vector3::new(
                            ((i * 7 % 13) as f64 - 6.0) * 0.01,
                            ((i * 5 % 11) as f64 - 5.0) * 0.01,
                            ((i * 3 % 7) as f64 - 3.0) * 0.01,
                        );
                        v - s * wob
                    })
                    .collect(),
                triangles: mesh_t.triangles.clone(),
            }
        };
        let bt = buffers_for(&mesh_t, 48);
        let m1 = displace(1.0);
        let m2 = displace(2.0);
        let b1 = buffers_for(&m1, 48);
        let b2 = buffers_for(&m2, 48);
        let f1 = dense_flow(&FramePair::new(&mesh_t, &m1, &bt, &b1).unwrap(), 1e-3).unwrap();
        let f2 = dense_flow(&FramePair::new(&mesh_t, &m2, &bt, &b2).unwrap(), 1e-3).unwrap();
        let mut checked = 0;
        for i in 0..f1.vectors.len() {
            if f1.valid[i] && f2.valid[i] {
                for axis in 0..3 {
                    assert_relative_eq!(2.0 * f1.vectors[i][axis], f2.vectors[i][axis], epsilon = 1e-10);
                }
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn frame_pair_rejects_topology_mismatch() {
        let a = mesh_from(
            &[(0.0, 0.0, 1.0), (2.0, 0.0, 1.0), (0.0, 2.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let b = mesh_from(
            &[(0.0, 0.0, 1.0), (2.0, 0.0, 1.0), (0.0, 2.0, 1.0), (2.0, 2.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let ba = buffers_for(&a, 4);
        let bb = buffers_for(&b, 4);
        assert!(matches!(
            FramePair::new(&a, &b, &ba, &bb),
            Err(Error::CorrespondenceMismatch(_))
        ));
    }

    #[test]
    fn flow_field_from_parts_zeroes_invalid() {
        let vectors = vec![Vector3::new(1.0, 2.0, 3.0); 4];
        let valid = vec![true, false, true, false];
        let f = FlowField::from_parts(2, 2, vectors, valid).unwrap();
        assert_eq!(f.vector_at(1, 0), Vector3::zeros());
        assert_eq!(f.vector_at(0, 0), Vector3::new(1.0, 2.0, 3.0));
    }
}

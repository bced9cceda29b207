//! Seeded synthetic scenes: icospheres with per-vertex textures moving along
//! simple pose tracks. The CLI's `synth` subcommand and the verification
//! suites both build their fixtures here.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model3d::{project, CameraPose, Mesh};
use crate::raster::{rasterize, RasterBuffers, Texture};
use crate::{Error, Result};

/// Unit icosphere: an icosahedron subdivided `subdivisions` times, every
/// vertex normalized onto the unit sphere. Subdivision 1 has 80 triangles,
/// 2 has 320.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();

    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let mid = |a: u32, b: u32, vertices: &mut Vec<Vector3<f64>>, cache: &mut HashMap<(u32, u32), u32>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) / 2.0).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                })
            };
            let [a, b, c] = *tri;
            let ab = mid(a, b, &mut vertices, &mut midpoints);
            let bc = mid(b, c, &mut vertices, &mut midpoints);
            let ca = mid(c, a, &mut vertices, &mut midpoints);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }

    Mesh {
        vertices,
        triangles,
    }
}

/// Per-vertex texture: a smooth gradient over model coordinates plus a small
/// seeded jitter, clamped to `[0, 1]`.
pub fn gradient_texture(mesh: &Mesh, seed: u64) -> Texture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = mesh
        .vertices
        .iter()
        .map(|v| {
            let mut c = [
                0.5 + 0.4 * v.x,
                0.5 + 0.4 * v.y,
                0.5 + 0.4 * v.z,
            ];
            for slot in &mut c {
                *slot = (*slot + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0);
            }
            c
        })
        .collect();
    Texture::new(colors).expect("gradient colors are clamped to [0,1]")
}

/// Random triangle soup in image space: `num_triangles` independent
/// triangles with vertices spread a little beyond the image borders and
/// depths in `[0.5, 8)`.
pub fn random_mesh<R: Rng>(rng: &mut R, num_triangles: usize, width: usize, height: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(3 * num_triangles);
    let mut triangles = Vec::with_capacity(num_triangles);
    for i in 0..num_triangles {
        for _ in 0..3 {
            vertices.push(Vector3::new(
                rng.random_range(-4.0..(width as f64 + 4.0)),
                rng.random_range(-4.0..(height as f64 + 4.0)),
                rng.random_range(0.5..8.0),
            ));
        }
        let base = (3 * i) as u32;
        triangles.push([base, base + 1, base + 2]);
    }
    Mesh {
        vertices,
        triangles,
    }
}

/// Motion pattern of a synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Identical pose every frame.
    Static,
    /// Image-plane translation of `dx` pixels per frame.
    Translate,
    /// Rotation about the model y axis, `degrees_per_frame` per frame.
    Rotate,
}

/// Parameters for [`build_scene`]. `dx` applies to translate scenes,
/// `degrees_per_frame` to rotate scenes, `scale_fraction` (sphere radius as
/// a fraction of the short image side) to static and rotate scenes;
/// translate scenes use a smaller fixed radius so the whole track fits.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub frames: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub subdivisions: u32,
    pub dx: f64,
    pub degrees_per_frame: f64,
    pub scale_fraction: f64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, frames: usize, seed: u64) -> Self {
        Self {
            kind,
            frames,
            seed,
            width: 64,
            height: 64,
            subdivisions: 2,
            dx: 1.0,
            degrees_per_frame: 10.0,
            scale_fraction: 0.42,
        }
    }
}

/// A synthetic sequence: one model-space mesh, one texture, one camera pose
/// per frame.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    pub texture: Texture,
    pub poses: Vec<CameraPose>,
    pub width: usize,
    pub height: usize,
}

impl Scene {
    /// The image-space mesh of frame `k`.
    pub fn projected_mesh(&self, k: usize) -> Mesh {
        project(&self.mesh, &self.poses[k])
    }

    /// Rasterizes frame `k`.
    pub fn render(&self, k: usize) -> Result<RasterBuffers> {
        rasterize(
            &self.projected_mesh(k),
            &self.texture,
            self.width,
            self.height,
        )
    }

    pub fn frames(&self) -> usize {
        self.poses.len()
    }
}

fn rotation_y(degrees: f64) -> Matrix3<f64> {
    let r = degrees.to_radians();
    let (s, c) = (r.sin(), r.cos());
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Builds a seeded icosphere sequence.
///
/// Translate scenes keep the whole track in the upper half of the image
/// width; at the default 64x64 size every projected x stays inside one f64
/// binade, which keeps each frame's per-vertex displacement bit-identical
/// across the mesh.
pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    if spec.frames == 0 {
        return Err(Error::InvalidArgument("scene needs at least one frame".into()));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidArgument(format!(
            "scene size {}x{} must be positive",
            spec.width, spec.height
        )));
    }
    let mesh = icosphere(spec.subdivisions);
    let texture = gradient_texture(&mesh, spec.seed);
    let min_side = spec.width.min(spec.height) as f64;
    let center = Vector2::new(spec.width as f64 / 2.0, spec.height as f64 / 2.0);

    let poses: Vec<CameraPose> = (0..spec.frames)
        .map(|k| match spec.kind {
            SceneKind::Static => {
                CameraPose::new(spec.scale_fraction * min_side, Matrix3::identity(), center)
            }
            SceneKind::Translate => {
                let f = 0.15 * min_side;
                let start = Vector2::new(spec.width as f64 / 2.0 + f + 1.0, center.y);
                CameraPose::new(
                    f,
                    Matrix3::identity(),
                    Vector2::new(start.x + k as f64 * spec.dx, start.y),
                )
            }
            SceneKind::Rotate => CameraPose::new(
                spec.scale_fraction * min_side,
                rotation_y(spec.degrees_per_frame * k as f64),
                center,
            ),
        })
        .collect::<Result<_>>()?;

    Ok(Scene {
        mesh,
        texture,
        poses,
        width: spec.width,
        height: spec.height,
    })
}

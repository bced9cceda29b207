//! Linear morphable model, coefficient recombination, and weak-perspective
//! projection into image space.
//!
//! A face is `mean_shape + id_basis * alpha_id + exp_basis * alpha_exp`;
//! identity and expression coefficients can come from different sources,
//! which is what makes recombination-based editing possible. Projection is
//! weak-perspective: rotate, uniformly scale, translate in the image plane,
//! and keep the scaled depth as a scalar channel.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::{Error, Result};

/// Per-vertex 3D displacement basis with `num_components` columns.
///
/// Stored flat in vertex-major order: `data[(3 * v + axis) * K + k]` is the
/// `axis` component of column `k`'s displacement at vertex `v`. This matches
/// the on-disk layout of the model format.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeBasis {
    num_vertices: usize,
    num_components: usize,
    data: Vec<f64>,
}

impl ShapeBasis {
    pub fn from_flat(num_vertices: usize, num_components: usize, data: Vec<f64>) -> Result<Self> {
        if num_components == 0 {
            return Err(Error::InvalidArgument(
                "shape basis needs at least one component".into(),
            ));
        }
        if data.len() != 3 * num_vertices * num_components {
            return Err(Error::DimensionMismatch(format!(
                "basis payload has {} values, expected 3*{}*{}",
                data.len(),
                num_vertices,
                num_components
            )));
        }
        Ok(Self {
            num_vertices,
            num_components,
            data,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Displacement contributed by column `component` at `vertex`.
    pub fn displacement(&self, vertex: usize, component: usize) -> Vector3<f64> {
        let k = self.num_components;
        Vector3::new(
            self.data[(3 * vertex) * k + component],
            self.data[(3 * vertex + 1) * k + component],
            self.data[(3 * vertex + 2) * k + component],
        )
    }

    /// Adds `sum_k coeffs[k] * column_k` to `out`, vertex by vertex.
    fn accumulate(&self, coeffs: &[f64], out: &mut [Vector3<f64>]) {
        let k = self.num_components;
        for (v, vertex) in out.iter_mut().enumerate() {
            for (c, &coeff) in coeffs.iter().enumerate() {
                vertex.x += self.data[(3 * v) * k + c] * coeff;
                vertex.y += self.data[(3 * v + 1) * k + c] * coeff;
                vertex.z += self.data[(3 * v + 2) * k + c] * coeff;
            }
        }
    }
}

/// Mean shape plus identity/expression displacement bases.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphableModel {
    pub mean_shape: Vec<Vector3<f64>>,
    pub id_basis: ShapeBasis,
    pub exp_basis: ShapeBasis,
    pub triangles: Vec<[u32; 3]>,
}

impl MorphableModel {
    pub fn new(
        mean_shape: Vec<Vector3<f64>>,
        id_basis: ShapeBasis,
        exp_basis: ShapeBasis,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = mean_shape.len();
        if id_basis.num_vertices() != n || exp_basis.num_vertices() != n {
            return Err(Error::DimensionMismatch(format!(
                "bases cover {}/{} vertices, mean shape has {}",
                id_basis.num_vertices(),
                exp_basis.num_vertices(),
                n
            )));
        }
        check_triangle_indices(&triangles, n)?;
        Ok(Self {
            mean_shape,
            id_basis,
            exp_basis,
            triangles,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.mean_shape.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }
}

/// Identity and expression coefficient vectors for one face.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub alpha_id: Vec<f64>,
    pub alpha_exp: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(k_id: usize, k_exp: usize) -> Self {
        Self {
            alpha_id: vec![0.0; k_id],
            alpha_exp: vec![0.0; k_exp],
        }
    }

    fn check_against(&self, model: &MorphableModel) -> Result<()> {
        if self.alpha_id.len() != model.id_basis.num_components() {
            return Err(Error::DimensionMismatch(format!(
                "alpha_id has {} entries, model expects {}",
                self.alpha_id.len(),
                model.id_basis.num_components()
            )));
        }
        if self.alpha_exp.len() != model.exp_basis.num_components() {
            return Err(Error::DimensionMismatch(format!(
                "alpha_exp has {} entries, model expects {}",
                self.alpha_exp.len(),
                model.exp_basis.num_components()
            )));
        }
        Ok(())
    }
}

/// Weak-perspective camera: uniform scale, rotation, image-plane translation.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector2<f64>,
}

/// Orthonormality tolerance for [`CameraPose`] rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

impl CameraPose {
    /// Validates that `rotation` is orthonormal with determinant +1 (within
    /// [`ROTATION_TOLERANCE`]) and that `scale` is positive.
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector2<f64>) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "camera scale must be positive and finite, got {scale}"
            )));
        }
        let gram = rotation.transpose() * rotation;
        let mut max_dev: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(r, c)] - expect).abs());
            }
        }
        if max_dev > ROTATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthonormal (max deviation {max_dev:.3e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "rotation determinant is {}, expected +1",
                rotation.determinant()
            )));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector2::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vector2<f64> {
        self.translation
    }
}

/// Triangle mesh. Vertices are model units before [`project`], image-space
/// afterwards (x = column, y = row, z = depth, larger z closer to camera).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        check_triangle_indices(&triangles, vertices.len())?;
        Ok(Self {
            vertices,
            triangles,
        })
    }

    /// True when `other` has the same vertex count and identical triangle
    /// list, i.e. the two meshes are in vertex correspondence.
    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.triangles == other.triangles
    }
}

fn check_triangle_indices(triangles: &[[u32; 3]], num_vertices: usize) -> Result<()> {
    for (t, tri) in triangles.iter().enumerate() {
        for &idx in tri {
            if idx as usize >= num_vertices {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references vertex {idx}, mesh has {num_vertices}"
                )));
            }
        }
    }
    Ok(())
}

/// Reconstructs the mesh `mean_shape + id_basis*alpha_id + exp_basis*alpha_exp`.
pub fn reconstruct(model: &MorphableModel, coefficients: &Coefficients) -> Result<Mesh> {
    coefficients.check_against(model)?;
    let mut vertices = model.mean_shape.clone();
    model
        .id_basis
        .accumulate(&coefficients.alpha_id, &mut vertices);
    model
        .exp_basis
        .accumulate(&coefficients.alpha_exp, &mut vertices);
    Ok(Mesh {
        vertices,
        triangles: model.triangles.clone(),
    })
}

/// Reconstructs with the identity coefficients of `id_from` and the
/// expression coefficients of `exp_from`.
pub fn recombine(
    model: &MorphableModel,
    id_from: &Coefficients,
    exp_from: &Coefficients,
) -> Result<Mesh> {
    let merged = Coefficients {
        alpha_id: id_from.alpha_id.clone(),
        alpha_exp: exp_from.alpha_exp.clone(),
    };
    reconstruct(model, &merged)
}

/// Weak-perspective projection of every vertex:
/// `(f*(R*v).x + t.x, f*(R*v).y + t.y, f*(R*v).z)`.
///
/// Output x is the column coordinate, y the row coordinate (origin top-left,
/// pixel centers at integer coordinates), and z the retained depth where a
/// larger value is closer to the camera. Topology is unchanged.
pub fn project(mesh: &Mesh, pose: &CameraPose) -> Mesh {
    let f = pose.scale;
    let t = pose.translation;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            let r = pose.rotation * v;
            Vector3::new(f * r.x + t.x, f * r.y + t.y, f * r.z)
        })
        .collect();
    Mesh {
        vertices,
        triangles: mesh.triangles.clone(),
    }
}

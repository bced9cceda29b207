//! Readers and writers for every on-disk format the pipeline touches.
//!
//! Binary formats are little-endian with 4-byte magics:
//!
//! - `FLW3`: u32 width, height, then row-major per pixel f32 dx, dy, dz and
//!   a u8 validity byte (0 or 1).
//! - `FMAP`: u32 height, width, channels, then the f32 payload channel-minor
//!   row-major.
//! - `MM3D`: u32 N, M, K_id, K_exp, then f32 mean shape (3N), f32 identity
//!   basis (3N*K_id, vertex-major), f32 expression basis (3N*K_exp), u32
//!   triangle indices (3M).
//! - `COEF`: u32 K_id, K_exp, then the f32 coefficient payload.
//!
//! Images use PPM P6 (8-bit RGB, round-half-up quantization) and PFM
//! (32-bit float, scale -1.0 meaning little-endian, scanlines stored
//! bottom-to-top as is conventional for PFM). Meshes use an OBJ subset
//! (`v x y z` and `f i j k` with 1-based indices; blank lines and `#`
//! comments are skipped, any other directive is an error). Camera poses,
//! textures, and dataset catalogs are line-oriented text.
//!
//! Header dimensions are capped at 65536 per side; larger values are
//! reported as a dimension overflow rather than attempted.

use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix3, Vector2, Vector3};

use crate::flow::FlowField;
use crate::model3d::{CameraPose, Coefficients, Mesh, MorphableModel, ShapeBasis};
use crate::neuralmath::FeatureMap;
use crate::raster::{Image, Texture};
use crate::sampler::{DatasetCatalog, VideoClip};
use crate::{Error, Result};

const MAX_SIDE: u32 = 1 << 16;

fn check_side(value: u32, what: &str) -> Result<usize> {
    if value > MAX_SIDE {
        return Err(Error::DimensionOverflow(format!(
            "{what} = {value} exceeds the {MAX_SIDE} limit"
        )));
    }
    Ok(value as usize)
}

fn truncated(what: &str, err: std::io::Error) -> Error {
    if err.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::TruncatedPayload(what.to_string())
    } else {
        Error::Io(err)
    }
}

fn read_magic<R: Read>(r: &mut R, expected: &'static str) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| truncated("magic bytes", e))?;
    if buf != expected.as_bytes() {
        return Err(Error::BadMagic {
            expected,
            found: String::from_utf8_lossy(&buf).into_owned(),
        });
    }
    Ok(())
}

fn read_u32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<u32>> {
    let mut out = vec![0u32; n];
    r.read_u32_into::<LittleEndian>(&mut out)
        .map_err(|e| truncated(what, e))?;
    Ok(out)
}

fn read_f32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut out = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut out)
        .map_err(|e| truncated(what, e))?;
    Ok(out)
}

/// Next whitespace-delimited token, skipping `#` comments. Consumes the one
/// whitespace byte that terminates the token.
fn next_token<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let mut token = Vec::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        match r.read_exact(&mut byte) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof && !token.is_empty() => break,
            Err(e) => return Err(truncated(what, e)),
        }
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        if b == b'#' && token.is_empty() {
            in_comment = true;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b);
    }
    Ok(String::from_utf8_lossy(&token).into_owned())
}

fn parse_token<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what}: {token:?}")))
}

// --- PPM ---

/// Writes an RGB image as binary PPM (P6), quantizing with round-half-up.
pub fn write_ppm<W: Write>(w: &mut W, image: &Image) -> Result<()> {
    if image.channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "PPM needs 3 channels, image has {}",
            image.channels()
        )));
    }
    write!(w, "P6\n{} {}\n255\n", image.width(), image.height())?;
    let mut payload = Vec::with_capacity(image.width() * image.height() * 3);
    for v in image.data() {
        payload.push((v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8);
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_ppm<R: Read>(r: &mut R) -> Result<Image> {
    let magic = next_token(r, "PPM header")?;
    if magic != "P6" {
        return Err(Error::BadMagic {
            expected: "P6",
            found: magic,
        });
    }
    let width = check_side(parse_token(&next_token(r, "PPM width")?, "PPM width")?, "width")?;
    let height = check_side(
        parse_token(&next_token(r, "PPM height")?, "PPM height")?,
        "height",
    )?;
    let maxval: u32 = parse_token(&next_token(r, "PPM maxval")?, "PPM maxval")?;
    if maxval != 255 {
        return Err(Error::Parse(format!("unsupported PPM maxval {maxval}")));
    }
    let mut payload = vec![0u8; width * height * 3];
    r.read_exact(&mut payload)
        .map_err(|e| truncated("PPM pixel payload", e))?;
    Image::from_data(
        width,
        height,
        3,
        payload.iter().map(|&b| b as f64 / 255.0).collect(),
    )
}

// --- PFM ---

/// Writes a 1- or 3-channel float image as PFM, little-endian (scale -1.0),
/// scanlines bottom-to-top.
pub fn write_pfm<W: Write>(w: &mut W, image: &Image) -> Result<()> {
    let magic = match image.channels() {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::DimensionMismatch(format!(
                "PFM supports 1 or 3 channels, image has {c}"
            )))
        }
    };
    write!(w, "{}\n{} {}\n-1.0\n", magic, image.width(), image.height())?;
    for y in (0..image.height()).rev() {
        for x in 0..image.width() {
            for c in 0..image.channels() {
                w.write_f32::<LittleEndian>(image.get(x, y, c) as f32)?;
            }
        }
    }
    Ok(())
}

pub fn read_pfm<R: Read>(r: &mut R) -> Result<Image> {
    let magic = next_token(r, "PFM header")?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => {
            return Err(Error::BadMagic {
                expected: "Pf",
                found: magic,
            })
        }
    };
    let width = check_side(parse_token(&next_token(r, "PFM width")?, "PFM width")?, "width")?;
    let height = check_side(
        parse_token(&next_token(r, "PFM height")?, "PFM height")?,
        "height",
    )?;
    let scale: f64 = parse_token(&next_token(r, "PFM scale")?, "PFM scale")?;
    let little_endian = scale < 0.0;
    let count = width * height * channels;
    let mut raw = vec![0u8; count * 4];
    r.read_exact(&mut raw)
        .map_err(|e| truncated("PFM pixel payload", e))?;
    let mut data = vec![0.0f64; count];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        // Rows are stored bottom-up.
        let flat = i / channels;
        let c = i % channels;
        let x = flat % width;
        let y_src = flat / width;
        let y = height - 1 - y_src;
        data[(y * width + x) * channels + c] = v as f64;
    }
    Image::from_data(width, height, channels, data)
}

// --- FLW3 ---

pub fn write_flow<W: Write>(w: &mut W, flow: &FlowField) -> Result<()> {
    w.write_all(b"FLW3")?;
    w.write_u32::<LittleEndian>(flow.width as u32)?;
    w.write_u32::<LittleEndian>(flow.height as u32)?;
    for (v, &ok) in flow.vectors.iter().zip(&flow.valid) {
        w.write_f32::<LittleEndian>(v.x as f32)?;
        w.write_f32::<LittleEndian>(v.y as f32)?;
        w.write_f32::<LittleEndian>(v.z as f32)?;
        w.write_u8(ok as u8)?;
    }
    Ok(())
}

pub fn read_flow<R: Read>(r: &mut R) -> Result<FlowField> {
    read_magic(r, "FLW3")?;
    let dims = read_u32s(r, 2, "flow header")?;
    let width = check_side(dims[0], "width")?;
    let height = check_side(dims[1], "height")?;
    let mut vectors = Vec::with_capacity(width * height);
    let mut valid = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let mut xyz = [0f32; 3];
        r.read_f32_into::<LittleEndian>(&mut xyz)
            .map_err(|e| truncated("flow payload", e))?;
        let flag = r.read_u8().map_err(|e| truncated("flow payload", e))?;
        if flag > 1 {
            return Err(Error::Parse(format!(
                "flow validity byte must be 0 or 1, found {flag}"
            )));
        }
        vectors.push(Vector3::new(xyz[0] as f64, xyz[1] as f64, xyz[2] as f64));
        valid.push(flag == 1);
    }
    FlowField::from_parts(width, height, vectors, valid)
}

// --- FMAP ---

pub fn write_feature_map<W: Write>(w: &mut W, map: &FeatureMap) -> Result<()> {
    w.write_all(b"FMAP")?;
    w.write_u32::<LittleEndian>(map.height as u32)?;
    w.write_u32::<LittleEndian>(map.width as u32)?;
    w.write_u32::<LittleEndian>(map.channels as u32)?;
    for &v in map.data() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_feature_map<R: Read>(r: &mut R) -> Result<FeatureMap> {
    read_magic(r, "FMAP")?;
    let dims = read_u32s(r, 3, "feature map header")?;
    let height = check_side(dims[0], "height")?;
    let width = check_side(dims[1], "width")?;
    let channels = check_side(dims[2], "channels")?;
    let payload = read_f32s(r, height * width * channels, "feature map payload")?;
    FeatureMap::from_data(
        height,
        width,
        channels,
        payload.iter().map(|&v| v as f64).collect(),
    )
}

// --- MM3D ---

pub fn write_model<W: Write>(w: &mut W, model: &MorphableModel) -> Result<()> {
    w.write_all(b"MM3D")?;
    w.write_u32::<LittleEndian>(model.num_vertices() as u32)?;
    w.write_u32::<LittleEndian>(model.num_triangles() as u32)?;
    w.write_u32::<LittleEndian>(model.id_basis.num_components() as u32)?;
    w.write_u32::<LittleEndian>(model.exp_basis.num_components() as u32)?;
    for v in &model.mean_shape {
        for axis in 0..3 {
            w.write_f32::<LittleEndian>(v[axis] as f32)?;
        }
    }
    for &v in model.id_basis.data() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for &v in model.exp_basis.data() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for tri in &model.triangles {
        for &i in tri {
            w.write_u32::<LittleEndian>(i)?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<MorphableModel> {
    read_magic(r, "MM3D")?;
    let dims = read_u32s(r, 4, "model header")?;
    let n = check_side(dims[0], "vertex count")?;
    let m = check_side(dims[1], "triangle count")?;
    let k_id = check_side(dims[2], "identity components")?;
    let k_exp = check_side(dims[3], "expression components")?;
    let mean = read_f32s(r, 3 * n, "mean shape payload")?;
    let id = read_f32s(r, 3 * n * k_id, "identity basis payload")?;
    let exp = read_f32s(r, 3 * n * k_exp, "expression basis payload")?;
    let tris = read_u32s(r, 3 * m, "triangle payload")?;
    let mean_shape = mean
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    let triangles = tris.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    MorphableModel::new(
        mean_shape,
        ShapeBasis::from_flat(n, k_id, id.iter().map(|&v| v as f64).collect())?,
        ShapeBasis::from_flat(n, k_exp, exp.iter().map(|&v| v as f64).collect())?,
        triangles,
    )
}

// --- COEF ---

pub fn write_coefficients<W: Write>(w: &mut W, coefficients: &Coefficients) -> Result<()> {
    w.write_all(b"COEF")?;
    w.write_u32::<LittleEndian>(coefficients.alpha_id.len() as u32)?;
    w.write_u32::<LittleEndian>(coefficients.alpha_exp.len() as u32)?;
    for &v in coefficients.alpha_id.iter().chain(&coefficients.alpha_exp) {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_coefficients<R: Read>(r: &mut R) -> Result<Coefficients> {
    read_magic(r, "COEF")?;
    let dims = read_u32s(r, 2, "coefficient header")?;
    let k_id = check_side(dims[0], "identity components")?;
    let k_exp = check_side(dims[1], "expression components")?;
    let payload = read_f32s(r, k_id + k_exp, "coefficient payload")?;
    Ok(Coefficients {
        alpha_id: payload[..k_id].iter().map(|&v| v as f64).collect(),
        alpha_exp: payload[k_id..].iter().map(|&v| v as f64).collect(),
    })
}

// --- OBJ subset ---

pub fn write_obj<W: Write>(w: &mut W, mesh: &Mesh) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn read_obj<R: BufRead>(r: &mut R) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "v" => {
                if fields.len() != 4 {
                    return Err(Error::Parse(format!(
                        "line {}: vertex needs exactly 3 coordinates",
                        lineno + 1
                    )));
                }
                vertices.push(Vector3::new(
                    parse_token::<f64>(fields[1], "vertex coordinate")?,
                    parse_token::<f64>(fields[2], "vertex coordinate")?,
                    parse_token::<f64>(fields[3], "vertex coordinate")?,
                ));
            }
            "f" => {
                if fields.len() != 4 {
                    return Err(Error::Parse(format!(
                        "line {}: face needs exactly 3 indices",
                        lineno + 1
                    )));
                }
                let mut tri = [0u32; 3];
                for (slot, field) in tri.iter_mut().zip(&fields[1..]) {
                    let idx: u32 = parse_token(field, "face index")?;
                    if idx == 0 {
                        return Err(Error::Parse(format!(
                            "line {}: face indices are 1-based",
                            lineno + 1
                        )));
                    }
                    *slot = idx - 1;
                }
                triangles.push(tri);
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {}: unsupported directive {other:?}",
                    lineno + 1
                )));
            }
        }
    }
    Mesh::new(vertices, triangles).map_err(|e| Error::Parse(e.to_string()))
}

// --- camera pose ---

pub fn write_pose<W: Write>(w: &mut W, pose: &CameraPose) -> Result<()> {
    writeln!(w, "scale {}", pose.scale())?;
    let r = pose.rotation();
    write!(w, "rotation")?;
    for row in 0..3 {
        for col in 0..3 {
            write!(w, " {}", r[(row, col)])?;
        }
    }
    writeln!(w)?;
    writeln!(w, "translation {} {}", pose.translation().x, pose.translation().y)?;
    Ok(())
}

pub fn read_pose<R: BufRead>(r: &mut R) -> Result<CameraPose> {
    let mut scale: Option<f64> = None;
    let mut rotation: Option<Matrix3<f64>> = None;
    let mut translation: Option<Vector2<f64>> = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields[0], fields.len()) {
            ("scale", 2) => scale = Some(parse_token(fields[1], "scale")?),
            ("rotation", 10) => {
                let mut vals = [0.0; 9];
                for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
                    *slot = parse_token(field, "rotation entry")?;
                }
                rotation = Some(Matrix3::from_row_slice(&vals));
            }
            ("translation", 3) => {
                translation = Some(Vector2::new(
                    parse_token(fields[1], "translation x")?,
                    parse_token(fields[2], "translation y")?,
                ));
            }
            (directive, _) => {
                return Err(Error::Parse(format!(
                    "line {}: bad pose directive {directive:?} or field count",
                    lineno + 1
                )));
            }
        }
    }
    match (scale, rotation, translation) {
        (Some(s), Some(r), Some(t)) => {
            CameraPose::new(s, r, t).map_err(|e| Error::Parse(e.to_string()))
        }
        _ => Err(Error::Parse(
            "pose file needs scale, rotation, and translation lines".into(),
        )),
    }
}

// --- per-vertex texture ---

pub fn write_texture<W: Write>(w: &mut W, texture: &Texture) -> Result<()> {
    writeln!(w, "TEX {}", texture.len())?;
    for c in texture.colors() {
        writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
    }
    Ok(())
}

pub fn read_texture<R: BufRead>(r: &mut R) -> Result<Texture> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::TruncatedPayload("texture header".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != "TEX" {
        return Err(Error::BadMagic {
            expected: "TEX",
            found: header.clone(),
        });
    }
    let n: usize = parse_token(fields[1], "texture count")?;
    let mut colors = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse("texture color needs 3 components".into()));
        }
        colors.push([
            parse_token::<f64>(fields[0], "texture component")?,
            parse_token::<f64>(fields[1], "texture component")?,
            parse_token::<f64>(fields[2], "texture component")?,
        ]);
    }
    if colors.len() != n {
        return Err(Error::TruncatedPayload(format!(
            "texture lists {} colors, header promised {n}",
            colors.len()
        )));
    }
    Texture::new(colors).map_err(|e| Error::Parse(e.to_string()))
}

// --- dataset catalog ---

pub fn write_catalog<W: Write>(w: &mut W, catalog: &DatasetCatalog) -> Result<()> {
    for clip in &catalog.video_clips {
        writeln!(w, "clip {} {} {}", clip.clip_id, clip.identity_id, clip.frame_count)?;
    }
    for image in &catalog.image_ids {
        writeln!(w, "image {image}")?;
    }
    Ok(())
}

pub fn read_catalog<R: BufRead>(r: &mut R) -> Result<DatasetCatalog> {
    let mut clips = Vec::new();
    let mut images = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields[0], fields.len()) {
            ("clip", 4) => clips.push(VideoClip {
                clip_id: fields[1].to_string(),
                identity_id: fields[2].to_string(),
                frame_count: parse_token(fields[3], "clip frame count")?,
            }),
            ("image", 2) => images.push(fields[1].to_string()),
            (directive, _) => {
                return Err(Error::Parse(format!(
                    "line {}: bad catalog directive {directive:?} or field count",
                    lineno + 1
                )));
            }
        }
    }
    DatasetCatalog::new(clips, images).map_err(|e| Error::Parse(e.to_string()))
}

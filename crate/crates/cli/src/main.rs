//! Batch pipeline driver: rendering, mesh-derived flow, temporal metrics,
//! masked normalization, sample drawing, and synthetic scene generation as
//! subcommands over the on-disk formats.
//!
//! Exit codes: 0 success, 2 usage/argument errors, 3 file parse errors,
//! 4 semantic mismatches (e.g. flow between meshes of different topology).
//! Output files are written atomically (temp file + rename). The
//! `MESHFLOW_THREADS` environment variable caps internal parallelism
//! (0 or unset = automatic).

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use meshflow_core::flow::{default_eps, dense_flow, FlowField, FramePair};
use meshflow_core::imgio;
use meshflow_core::model3d::{project, recombine, Mesh};
use meshflow_core::neuralmath::{bsn, downsample_mask, BsnParams, SoftMask};
use meshflow_core::raster::{appearance_hint, facial_mask, rasterize, HintMode, Image, Texture};
use meshflow_core::sampler::{draw, validate};
use meshflow_core::synth::{build_scene, SceneKind, SceneSpec};
use meshflow_core::temporal::{format_report, pairwise_losses};
use meshflow_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "meshflow", version, about = "Face-video geometry and temporal-metric pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a mesh (or a recombined morphable model) to color, depth,
    /// mask, and appearance-hint images.
    Render(RenderArgs),
    /// Compute the dense flow field between two frames of one mesh.
    Flow(FlowArgs),
    /// Per-pair temporal losses and the sequence temporal error.
    Tmploss(TmplossArgs),
    /// Masked bidirectional normalization on feature-map files.
    Bsn(BsnArgs),
    /// Draw training tuples from a dataset catalog.
    Sample(SampleArgs),
    /// Generate a synthetic icosphere sequence (meshes, poses, frames).
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug)]
struct Size {
    width: usize,
    height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let width = w.parse().map_err(|_| format!("bad width {w:?}"))?;
        let height = h.parse().map_err(|_| format!("bad height {h:?}"))?;
        if width == 0 || height == 0 {
            return Err("size must be positive".into());
        }
        Ok(Size { width, height })
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("source").required(true).args(["mesh", "model"])
))]
struct RenderArgs {
    /// Image-space or model-space mesh (OBJ subset).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Morphable model (MM3D); needs both coefficient files.
    #[arg(long, requires = "coef_id", requires = "coef_exp")]
    model: Option<PathBuf>,
    /// Coefficients supplying the identity part (COEF).
    #[arg(long)]
    coef_id: Option<PathBuf>,
    /// Coefficients supplying the expression part (COEF).
    #[arg(long)]
    coef_exp: Option<PathBuf>,
    /// Camera pose file.
    #[arg(long)]
    pose: PathBuf,
    /// Per-vertex texture file.
    #[arg(long)]
    texture: PathBuf,
    /// Output size, e.g. 64x64.
    #[arg(long)]
    size: Size,
    /// Rendered color image (PPM).
    #[arg(long)]
    out_color: Option<PathBuf>,
    /// Depth buffer (PFM, single channel).
    #[arg(long)]
    out_depth: Option<PathBuf>,
    /// Facial mask (PFM, single channel).
    #[arg(long)]
    out_mask: Option<PathBuf>,
    /// Appearance hint (PPM); needs --hint-source.
    #[arg(long, requires = "hint_source")]
    out_hint: Option<PathBuf>,
    /// Source image the hint is cut from (PPM).
    #[arg(long)]
    hint_source: Option<PathBuf>,
    /// Which role the hint source plays.
    #[arg(long, value_enum, default_value_t = HintModeArg::Swap)]
    hint_mode: HintModeArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HintModeArg {
    Swap,
    Reenact,
}

impl From<HintModeArg> for HintMode {
    fn from(v: HintModeArg) -> Self {
        match v {
            HintModeArg::Swap => HintMode::Swap,
            HintModeArg::Reenact => HintMode::Reenact,
        }
    }
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    mesh_t: PathBuf,
    #[arg(long)]
    mesh_tm1: PathBuf,
    #[arg(long)]
    pose_t: PathBuf,
    #[arg(long)]
    pose_tm1: PathBuf,
    #[arg(long)]
    size: Size,
    /// Depth tolerance; default is 1e-4 of the covered depth range.
    #[arg(long)]
    eps: Option<f64>,
    /// Output flow field (FLW3).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TmplossArgs {
    /// Frame images in order (PPM), at least two.
    #[arg(long, num_args = 2.., required = true)]
    frames: Vec<PathBuf>,
    /// Flow fields (FLW3), one per consecutive frame pair.
    #[arg(long, num_args = 1.., required = true)]
    flows: Vec<PathBuf>,
    /// Also write the report to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BsnArgs {
    /// Content feature map (FMAP).
    #[arg(long)]
    x: PathBuf,
    /// Embedding feature map (FMAP), same shape as --x.
    #[arg(long)]
    q: PathBuf,
    /// Facial soft mask (PFM single channel); larger masks are
    /// area-downsampled to the feature size.
    #[arg(long)]
    mask: PathBuf,
    /// Blend parameter for the facial transfer term, all channels.
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Blend parameter for the background transfer term, all channels.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Output feature map (FMAP).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Dataset catalog (line-oriented text).
    #[arg(long)]
    catalog: PathBuf,
    /// Probability of drawing from the image branch.
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of tuples to draw.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SceneKindArg,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = Size { width: 64, height: 64 })]
    size: Size,
    /// Icosphere subdivision level.
    #[arg(long, default_value_t = 2)]
    subdiv: u32,
    /// Pixels of x translation per frame (translate scenes).
    #[arg(long, default_value_t = 1.0)]
    dx: f64,
    /// Degrees of rotation per frame (rotate scenes).
    #[arg(long, default_value_t = 10.0)]
    degrees: f64,
    /// Sphere radius as a fraction of the short image side (static and
    /// rotate scenes).
    #[arg(long, default_value_t = 0.42)]
    scale: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SceneKindArg {
    Static,
    Translate,
    Rotate,
}

impl From<SceneKindArg> for SceneKind {
    fn from(v: SceneKindArg) -> Self {
        match v {
            SceneKindArg::Static => SceneKind::Static,
            SceneKindArg::Translate => SceneKind::Translate,
            SceneKindArg::Rotate => SceneKind::Rotate,
        }
    }
}

/// CLI failure with its exit code: usage 2, parse 3, semantic 4.
enum CliError {
    Usage(String),
    Parse(String),
    Semantic(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Semantic(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Semantic(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::CorrespondenceMismatch(_) => CliError::Semantic(e.to_string()),
            CoreError::BadMagic { .. }
            | CoreError::TruncatedPayload(_)
            | CoreError::DimensionOverflow(_)
            | CoreError::Parse(_)
            | CoreError::Io(_) => CliError::Parse(e.to_string()),
            CoreError::DimensionMismatch(_)
            | CoreError::InvalidArgument(_)
            | CoreError::NotCovered { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meshflow: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("MESHFLOW_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Render(args) => cmd_render(args),
        Command::Flow(args) => cmd_flow(args),
        Command::Tmploss(args) => cmd_tmploss(args),
        Command::Bsn(args) => cmd_bsn(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Writes through a temp file in the target directory, then renames.
fn write_atomic(
    path: &Path,
    write_fn: impl FnOnce(&mut BufWriter<&mut File>) -> meshflow_core::Result<()>,
) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut writer = BufWriter::new(tmp.as_file_mut());
        write_fn(&mut writer)?;
        writer.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::Parse(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    Ok(imgio::read_obj(&mut open(path)?)?)
}

fn read_pose_file(path: &Path) -> Result<meshflow_core::model3d::CameraPose, CliError> {
    Ok(imgio::read_pose(&mut open(path)?)?)
}

fn read_ppm_file(path: &Path) -> Result<Image, CliError> {
    Ok(imgio::read_ppm(&mut open(path)?)?)
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let mesh = if let Some(path) = &args.mesh {
        read_mesh(path)?
    } else {
        let model_path = args.model.as_ref().expect("clap group guarantees a source");
        let model = imgio::read_model(&mut open(model_path)?)?;
        let coef_id = imgio::read_coefficients(&mut open(
            args.coef_id.as_ref().expect("clap requires coef_id"),
        )?)?;
        let coef_exp = imgio::read_coefficients(&mut open(
            args.coef_exp.as_ref().expect("clap requires coef_exp"),
        )?)?;
        recombine(&model, &coef_id, &coef_exp)?
    };
    let pose = read_pose_file(&args.pose)?;
    let texture = imgio::read_texture(&mut open(&args.texture)?)?;
    let projected = project(&mesh, &pose);
    let buffers = rasterize(&projected, &texture, args.size.width, args.size.height)?;

    if let Some(path) = &args.out_color {
        let color = buffers.color_image();
        write_atomic(path, |w| imgio::write_ppm(w, &color))?;
    }
    if let Some(path) = &args.out_depth {
        let depth = buffers.depth_image();
        write_atomic(path, |w| imgio::write_pfm(w, &depth))?;
    }
    let mask = facial_mask(&buffers);
    if let Some(path) = &args.out_mask {
        write_atomic(path, |w| imgio::write_pfm(w, &mask))?;
    }
    if let Some(path) = &args.out_hint {
        let source = read_ppm_file(args.hint_source.as_ref().expect("clap requires hint_source"))?;
        let hint = appearance_hint(&source, &mask, args.hint_mode.into())?;
        write_atomic(path, |w| imgio::write_ppm(w, &hint))?;
    }
    Ok(())
}

fn cmd_flow(args: FlowArgs) -> Result<(), CliError> {
    let mesh_t = project(&read_mesh(&args.mesh_t)?, &read_pose_file(&args.pose_t)?);
    let mesh_tm1 = project(&read_mesh(&args.mesh_tm1)?, &read_pose_file(&args.pose_tm1)?);
    let white_t = Texture::uniform(mesh_t.vertices.len(), [1.0, 1.0, 1.0])?;
    let white_tm1 = Texture::uniform(mesh_tm1.vertices.len(), [1.0, 1.0, 1.0])?;
    let buffers_t = rasterize(&mesh_t, &white_t, args.size.width, args.size.height)?;
    let buffers_tm1 = rasterize(&mesh_tm1, &white_tm1, args.size.width, args.size.height)?;
    let pair = FramePair::new(&mesh_t, &mesh_tm1, &buffers_t, &buffers_tm1)?;
    let eps = args.eps.unwrap_or_else(|| default_eps(&buffers_t, &buffers_tm1));
    let field = dense_flow(&pair, eps)?;
    write_atomic(&args.out, |w| imgio::write_flow(w, &field))?;
    println!("valid={}", field.valid_count());
    Ok(())
}

fn cmd_tmploss(args: TmplossArgs) -> Result<(), CliError> {
    if args.flows.len() != args.frames.len() - 1 {
        return Err(CliError::Usage(format!(
            "{} frames need {} flow fields, got {}",
            args.frames.len(),
            args.frames.len() - 1,
            args.flows.len()
        )));
    }
    let frames: Vec<Image> = args
        .frames
        .iter()
        .map(|p| read_ppm_file(p))
        .collect::<Result<_, _>>()?;
    let flows: Vec<FlowField> = args
        .flows
        .iter()
        .map(|p| Ok(imgio::read_flow(&mut open(p)?)?))
        .collect::<Result<_, CliError>>()?;
    let pairs = pairwise_losses(&frames, &flows)?;
    let report = format_report(&pairs);
    print!("{report}");
    if let Some(path) = &args.report {
        write_atomic(path, |w| {
            w.write_all(report.as_bytes())?;
            Ok(())
        })?;
    }
    Ok(())
}

fn cmd_bsn(args: BsnArgs) -> Result<(), CliError> {
    let x = imgio::read_feature_map(&mut open(&args.x)?)?;
    let q = imgio::read_feature_map(&mut open(&args.q)?)?;
    let mask_img = imgio::read_pfm(&mut open(&args.mask)?)?;
    let mask = if mask_img.height() == x.height && mask_img.width() == x.width {
        SoftMask::from_data(mask_img.height(), mask_img.width(), mask_img.data().to_vec())
            .map_err(|e| CliError::Parse(e.to_string()))?
    } else {
        downsample_mask(&mask_img, x.height, x.width)?
    };
    let params = BsnParams::uniform(x.channels, args.alpha, args.beta)?;
    let out = bsn(&x, &q, &mask, &params, args.eps)?;
    write_atomic(&args.out, |w| imgio::write_feature_map(w, &out))?;
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let catalog = imgio::read_catalog(&mut open(&args.catalog)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut out = std::io::stdout().lock();
    for _ in 0..args.count {
        let tuple = draw(&catalog, args.sigma, &mut rng)?;
        debug_assert!(validate(&tuple, &catalog).is_empty());
        writeln!(out, "{tuple}")?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SceneSpec {
        kind: args.kind.into(),
        frames: args.frames,
        seed: args.seed,
        width: args.size.width,
        height: args.size.height,
        subdivisions: args.subdiv,
        dx: args.dx,
        degrees_per_frame: args.degrees,
        scale_fraction: args.scale,
    };
    let scene = build_scene(&spec)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_atomic(&args.out_dir.join("mesh.obj"), |w| {
        imgio::write_obj(w, &scene.mesh)
    })?;
    write_atomic(&args.out_dir.join("texture.tex"), |w| {
        imgio::write_texture(w, &scene.texture)
    })?;
    for k in 0..scene.frames() {
        write_atomic(&args.out_dir.join(format!("pose_{k:03}.pose")), |w| {
            imgio::write_pose(w, &scene.poses[k])
        })?;
        let color = scene.render(k)?.color_image();
        write_atomic(&args.out_dir.join(format!("frame_{k:03}.ppm")), |w| {
            imgio::write_ppm(w, &color)
        })?;
    }
    println!(
        "wrote {} frames to {}",
        scene.frames(),
        args.out_dir.display()
    );
    Ok(())
}

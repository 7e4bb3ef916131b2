//! Command-line front end for the conversion and rendering pipeline.
//!
//! Exit codes: 0 on success, 1 for validation errors (invalid data or flag
//! values), 2 for IO and format errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use amrvol::bench::{default_cameras, BenchOptions};
use amrvol::render::{read_pfm, read_ppm};
use amrvol::{
    build_all, convert_dataset, image_diff, load_amr, render_image, save_amr, synth_amr,
    verify_alignment, write_image, BuildConfig, Camera, Error, FieldKind, FloatDataset,
    FloatLevelPair, FloatVolume, ImageFormat, LevelVolumePair, MaskMode, RenderSettings,
    ShaderConfig, SynthSpec, TransferFunction, Vec3,
};

#[derive(Parser)]
#[command(
    name = "amrvol",
    about = "Convert nested multiresolution data into per-level sparse volumes and render them seam-free",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as an AMRI bundle.
    Synth(SynthArgs),
    /// Convert an AMRI bundle into per-level SVOL volume pairs.
    Convert(ConvertArgs),
    /// Render SVOL level files with the emission-absorption raymarcher.
    Render(RenderArgs),
    /// Compare the uniform-grid and multiresolution representations.
    Bench(BenchArgs),
    /// Compare two images and gate on a tolerance.
    Diff(DiffArgs),
    /// Print dataset validation results or volume statistics.
    Info(InfoArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum FieldKindArg {
    Constant,
    LinearX,
    Gaussian,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum MaskSampleArg {
    Index,
    Interp,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum FormatArg {
    Ppm,
    Pfm,
}

#[derive(Args)]
struct SynthArgs {
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Use the canonical hand-checkable three-level layout instead of
    /// threshold-driven refinement.
    #[arg(long)]
    preset_three_level: bool,
    /// Level-0 cells per axis (cubic domain).
    #[arg(long, default_value_t = 8)]
    dims: u32,
    #[arg(long, default_value_t = 2)]
    refine_by: u32,
    #[arg(long, default_value_t = 2)]
    max_level: usize,
    #[arg(long, value_enum, default_value_t = FieldKindArg::Gaussian)]
    field_kind: FieldKindArg,
    /// Constant field value (with --field-kind constant).
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    /// Gaussian center "x,y,z" (with --field-kind gaussian).
    #[arg(long, value_parser = parse_triple, default_value = "0.5,0.5,0.5")]
    center: [f64; 3],
    /// Gaussian width (with --field-kind gaussian).
    #[arg(long, default_value_t = 0.15)]
    width: f64,
    /// Comma-separated refinement thresholds, one per refined level.
    #[arg(long, value_parser = parse_list, default_value = "0.2,0.55")]
    thresholds: FloatList,
    /// Cells of padding around flagged regions.
    #[arg(long, default_value_t = 1)]
    pad: u32,
    #[arg(long, default_value = "density")]
    field_name: String,
    /// Mark all axes periodic.
    #[arg(long)]
    periodic: bool,
}

#[derive(Args)]
struct ConvertArgs {
    /// Input AMRI bundle directory.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for level{L}.svol files.
    #[arg(long)]
    out: PathBuf,
    /// Field to convert (defaults to the bundle's field).
    #[arg(long)]
    field: Option<String>,
    /// Voxel-size multiplier (powers of two recommended).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    min_level: usize,
    #[arg(long)]
    max_level: Option<usize>,
    /// Write all-ones masks instead of child masks.
    #[arg(long)]
    no_mask: bool,
    /// Skip ghost-zone padding.
    #[arg(long)]
    no_ghost: bool,
    /// Skip the world-space alignment shifts.
    #[arg(long)]
    no_shift: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// SVOL level files, each holding a data grid and a mask grid.
    #[arg(value_name = "LEVELS", required_unless_present = "input")]
    levels: Vec<PathBuf>,
    /// Directory containing level*.svol (alternative to listing files).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Camera position "x,y,z" (default: outside view framing the data).
    #[arg(long, value_parser = parse_triple)]
    cam_pos: Option<[f64; 3]>,
    /// Camera target "x,y,z" (default: data center).
    #[arg(long, value_parser = parse_triple)]
    cam_lookat: Option<[f64; 3]>,
    /// Camera up vector "x,y,z".
    #[arg(long, value_parser = parse_triple, default_value = "0,1,0")]
    cam_up: [f64; 3],
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 40.0)]
    cam_fov: f64,
    /// Image size "WxH".
    #[arg(long, value_parser = parse_size, default_value = "512x512")]
    size: (u32, u32),
    /// March step in world units (default: extent/512).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    /// Transfer function ramp file (`value opacity r g b` lines).
    #[arg(long)]
    tf: Option<PathBuf>,
    /// Data range mapped by the transfer function, "vmin,vmax"
    /// (default: the loaded data's active value range).
    #[arg(long, value_parser = parse_pair)]
    tf_domain: Option<[f64; 2]>,
    /// How the shader samples mask volumes.
    #[arg(long, value_enum, default_value_t = MaskSampleArg::Index)]
    mask_sample: MaskSampleArg,
    /// Extinction per world unit at opacity 1.
    #[arg(long, default_value_t = 3.0)]
    extinction: f64,
    #[arg(long, default_value_t = 1.0)]
    emission: f64,
    /// Background color "r,g,b".
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0")]
    background: [f64; 3],
    /// Output image path.
    #[arg(long, default_value = "render.ppm")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Ppm)]
    format: FormatArg,
    /// Renderer worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Input AMRI bundle directory.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for volumes, images, bench.json, bench.csv.
    #[arg(long)]
    out: PathBuf,
    /// Dense covering-grid level (default: the dataset's finest).
    #[arg(long)]
    uniform_level: Option<usize>,
    /// Timing repeats to average.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, value_parser = parse_size, default_value = "256x256")]
    size: (u32, u32),
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Ceiling on the dense side's payload bytes before it is declared
    /// infeasible.
    #[arg(long, default_value_t = 1 << 30)]
    max_uniform_bytes: u64,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,
    /// Maximum tolerated per-channel absolute difference.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
}

#[derive(Args)]
struct InfoArgs {
    /// AMRI bundle directory or SVOL file.
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Convert(args) => run_convert(args),
        Command::Render(args) => run_render(args),
        Command::Bench(args) => run_bench(args),
        Command::Diff(args) => run_diff(args),
        Command::Info(args) => run_info(args),
    };
    match result {
        Ok(()) => ExitCode::from(0),
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("{p:?} is not a number")))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated numbers, got {}",
            parts.len()
        ));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("{p:?} is not a number")))
        .collect::<Result<_, _>>()?;
    if parts.len() != 2 {
        return Err(format!(
            "expected two comma-separated numbers, got {}",
            parts.len()
        ));
    }
    Ok([parts[0], parts[1]])
}

/// Comma-separated float list; a plain Vec would make clap treat the flag
/// as multi-occurrence.
#[derive(Clone, Debug)]
struct FloatList(Vec<f64>);

fn parse_list(s: &str) -> Result<FloatList, String> {
    if s.trim().is_empty() {
        return Ok(FloatList(Vec::new()));
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("{p:?} is not a number"))
        })
        .collect::<Result<_, _>>()
        .map(FloatList)
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| "expected WxH".to_string())?;
    Ok((
        w.trim().parse().map_err(|_| format!("{w:?} is not a size"))?,
        h.trim().parse().map_err(|_| format!("{h:?} is not a size"))?,
    ))
}

fn field_kind(args: &SynthArgs) -> FieldKind {
    match args.field_kind {
        FieldKindArg::Constant => FieldKind::Constant(args.value),
        FieldKindArg::LinearX => FieldKind::LinearX,
        FieldKindArg::Gaussian => FieldKind::Gaussian {
            center: args.center,
            width: args.width,
        },
    }
}

fn run_synth(args: SynthArgs) -> amrvol::Result<()> {
    let field = field_kind(&args);
    let ds: FloatDataset = if args.preset_three_level {
        println!(
            "config: synth preset=three-level field={field:?} out={}",
            args.out.display()
        );
        amrvol::amr::sample::three_level(&field)
    } else {
        let spec = SynthSpec {
            domain_dimensions: [args.dims; 3],
            refine_by: args.refine_by,
            max_level: args.max_level,
            field,
            thresholds: args.thresholds.0.clone(),
            pad: args.pad,
            field_name: args.field_name.clone(),
            periodic: [args.periodic; 3],
        };
        println!(
            "config: synth dims={} refine_by={} max_level={} field={:?} thresholds={:?} pad={} out={}",
            args.dims,
            args.refine_by,
            args.max_level,
            spec.field,
            spec.thresholds,
            args.pad,
            args.out.display()
        );
        synth_amr(&spec)?
    };
    save_amr(&ds, &args.out)?;
    let total_cells: usize = ds.levels.iter().flatten().map(|g| g.cell_count()).sum();
    println!(
        "wrote bundle {} ({} levels, {} cells)",
        args.out.display(),
        ds.levels.len(),
        total_cells
    );
    Ok(())
}

fn run_convert(args: ConvertArgs) -> amrvol::Result<()> {
    let cfg = BuildConfig {
        field: args.field.clone(),
        min_level: args.min_level,
        max_level: args.max_level,
        scale: args.scale,
        with_mask: !args.no_mask,
        with_ghost: !args.no_ghost,
        with_shift: !args.no_shift,
    };
    println!(
        "config: convert input={} out={} scale={} levels={}..{} mask={} ghost={} shift={}",
        args.input.display(),
        args.out.display(),
        cfg.scale,
        cfg.min_level,
        cfg.max_level.map_or("max".to_string(), |l| l.to_string()),
        cfg.with_mask,
        cfg.with_ghost,
        cfg.with_shift
    );
    let ds: FloatDataset = load_amr(&args.input)?;
    let paths = convert_dataset(&ds, &cfg, &args.out)?;
    if cfg.with_shift {
        let pairs = build_all(&ds, &cfg)?;
        let report = verify_alignment(&pairs)?;
        println!(
            "alignment: max deviation {:.3e} over {} samples",
            report.max_deviation, report.samples_checked
        );
    }
    for path in &paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Loads level files into render pairs, returning the pairs and the data
/// volumes' active value range.
fn load_levels(paths: &[PathBuf]) -> amrvol::Result<(Vec<FloatLevelPair>, [f64; 2])> {
    if paths.is_empty() {
        return Err(Error::Validation("no level files to render".into()));
    }
    let mut raw = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let grids: Vec<FloatVolume> = amrvol::read_svol(path)?;
        let level = level_from_name(path).unwrap_or(i);
        raw.push((level, path.clone(), grids));
    }
    let v0 = raw
        .iter()
        .flat_map(|(_, _, grids)| grids.first())
        .map(|g| g.voxel_size())
        .fold(0.0f64, f64::max);

    let mut pairs = Vec::new();
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (level, path, mut grids) in raw {
        let pair = match grids.len() {
            2 => {
                let mask = grids.pop().unwrap();
                let data = grids.pop().unwrap();
                LevelVolumePair::from_volumes(level, data, mask, v0)
            }
            1 => LevelVolumePair::dense(grids.pop().unwrap()),
            n => {
                return Err(Error::Validation(format!(
                    "{}: expected 1 or 2 grids per level file, found {n}",
                    path.display()
                )))
            }
        };
        if let Some((lo, hi)) = pair.data.active_value_range() {
            vmin = vmin.min(lo);
            vmax = vmax.max(hi);
        }
        pairs.push(pair);
    }
    if !vmin.is_finite() {
        vmin = 0.0;
        vmax = 1.0;
    } else if vmax <= vmin {
        // constant data still needs a usable transfer domain
        vmax = vmin + 1.0;
    }
    Ok((pairs, [vmin, vmax]))
}

fn level_from_name(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn scan_level_dir(dir: &Path) -> amrvol::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "svol")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with("level"))
        })
        .collect();
    paths.sort_by_key(|p| level_from_name(p));
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "no level*.svol files in {}",
            dir.display()
        )));
    }
    Ok(paths)
}

fn run_render(args: RenderArgs) -> amrvol::Result<()> {
    if args.dt.is_some_and(|dt| !(dt > 0.0) || !dt.is_finite()) {
        return Err(Error::Validation(format!(
            "--dt must be positive and finite, got {}",
            args.dt.unwrap()
        )));
    }
    let paths = if let Some(dir) = &args.input {
        scan_level_dir(dir)?
    } else {
        args.levels.clone()
    };
    let (pairs, data_range) = load_levels(&paths)?;

    let bounds = pairs
        .iter()
        .filter_map(|p| p.world_bounds())
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| Error::Validation("level volumes hold no active voxels".into()))?;
    let extent = bounds.extent();
    let max_extent = extent.x.max(extent.y).max(extent.z);
    let center = (bounds.min + bounds.max) * 0.5;

    let look_at = args.cam_lookat.map(Vec3::from).unwrap_or(center);
    let position = args
        .cam_pos
        .map(Vec3::from)
        .unwrap_or_else(|| center - Vec3::new(0.0, 0.0, 1.75 * max_extent));
    let cam = Camera {
        position,
        look_at,
        up: Vec3::from(args.cam_up),
        vfov: args.cam_fov,
        width: args.size.0,
        height: args.size.1,
    };
    let settings = RenderSettings {
        dt: args.dt.unwrap_or(max_extent / 512.0),
        max_steps: args.max_steps,
        background: args.background.map(|c| c as f32),
        threads: args.threads,
    };

    let domain = args.tf_domain.unwrap_or(data_range);
    let transfer = match &args.tf {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            TransferFunction::parse_ramp(&text, domain)?
        }
        None => TransferFunction::grayscale(domain[0], domain[1])?,
    };
    let shader = ShaderConfig {
        transfer,
        extinction_scale: args.extinction,
        emission_scale: args.emission,
        mask_mode: match args.mask_sample {
            MaskSampleArg::Index => MaskMode::Index,
            MaskSampleArg::Interp => MaskMode::Interpolated,
            MaskSampleArg::Off => MaskMode::Off,
        },
    };

    println!(
        "config: render levels={} size={}x{} dt={:.6} mask_sample={:?} tf_domain=[{:.4},{:.4}] \
         extinction={} emission={} threads={} cam_pos=({:.3},{:.3},{:.3}) out={}",
        paths.len(),
        cam.width,
        cam.height,
        settings.dt,
        shader.mask_mode,
        domain[0],
        domain[1],
        shader.extinction_scale,
        shader.emission_scale,
        settings.threads,
        cam.position.x,
        cam.position.y,
        cam.position.z,
        args.out.display()
    );

    let img = render_image(&pairs, &shader, &cam, &settings)?;
    let format = match args.format {
        FormatArg::Ppm => ImageFormat::Ppm,
        FormatArg::Pfm => ImageFormat::Pfm,
    };
    write_image(&img, &args.out, format)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_bench(args: BenchArgs) -> amrvol::Result<()> {
    println!(
        "config: bench input={} out={} uniform_level={} repeats={} size={}x{} threads={}",
        args.input.display(),
        args.out.display(),
        args.uniform_level.map_or("max".to_string(), |l| l.to_string()),
        args.repeats,
        args.size.0,
        args.size.1,
        args.threads
    );
    let ds: FloatDataset = load_amr(&args.input)?;
    let opts = BenchOptions {
        build: BuildConfig {
            scale: args.scale,
            ..BuildConfig::default()
        },
        uniform_level: args.uniform_level,
        repeats: args.repeats,
        max_uniform_bytes: args.max_uniform_bytes,
        image_format: ImageFormat::Ppm,
    };
    let (outside, inside) = default_cameras(&ds, args.scale, args.size.0, args.size.1)?;

    // grayscale over the dataset's full value range
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for grid in ds.levels.iter().flatten() {
        for v in &grid.cells {
            vmin = vmin.min(*v as f64);
            vmax = vmax.max(*v as f64);
        }
    }
    if vmax <= vmin {
        vmax = vmin + 1.0;
    }
    let shader = ShaderConfig {
        extinction_scale: 3.0,
        ..ShaderConfig::new(TransferFunction::grayscale(vmin, vmax)?)
    };
    let settings = RenderSettings {
        dt: args.dt.unwrap_or(args.scale / 512.0),
        threads: args.threads,
        ..RenderSettings::default()
    };

    let report =
        amrvol::run_benchmark(&ds, &opts, &outside, &inside, &shader, &settings, &args.out)?;
    println!(
        "multiresolution: {} data voxels, {} bytes, load {:.2} ms, render {:.2}/{:.2} ms",
        report.multiresolution.active_data_voxels,
        report.multiresolution.serialized_bytes,
        report.multiresolution.load_ms,
        report.multiresolution.render_outside_ms,
        report.multiresolution.render_inside_ms,
    );
    match (&report.uniform, &report.uniform_infeasible) {
        (Some(u), _) => {
            println!(
                "uniform: {} voxels, {} bytes, load {:.2} ms, render {:.2}/{:.2} ms",
                u.active_data_voxels,
                u.serialized_bytes,
                u.load_ms,
                u.render_outside_ms,
                u.render_inside_ms,
            );
            if let Some(r) = &report.ratios {
                println!(
                    "reduction: voxels {:.2}x, bytes {:.2}x",
                    r.voxel_reduction, r.byte_reduction
                );
            }
        }
        (None, Some(reason)) => println!("uniform: infeasible ({reason})"),
        (None, None) => {}
    }
    println!("wrote {}/bench.json and bench.csv", args.out.display());
    Ok(())
}

fn read_image_any(path: &Path) -> amrvol::Result<amrvol::Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => read_pfm(path),
        Some("ppm") => read_ppm(path),
        other => Err(Error::Validation(format!(
            "unsupported image extension {other:?} for {} (use .ppm or .pfm)",
            path.display()
        ))),
    }
}

fn run_diff(args: DiffArgs) -> amrvol::Result<()> {
    println!(
        "config: diff a={} b={} tolerance={}",
        args.a.display(),
        args.b.display(),
        args.tolerance
    );
    let a = read_image_any(&args.a)?;
    let b = read_image_any(&args.b)?;
    let stats = image_diff(&a, &b)?;
    println!(
        "max abs {:.6e}, mean abs {:.6e}",
        stats.max_abs, stats.mean_abs
    );
    if stats.max_abs > args.tolerance {
        return Err(Error::Validation(format!(
            "max abs {:.6e} exceeds --tolerance {:.6e}",
            stats.max_abs, args.tolerance
        )));
    }
    println!("within tolerance");
    Ok(())
}

fn run_info(args: InfoArgs) -> amrvol::Result<()> {
    println!("config: info path={}", args.path.display());
    if args.path.is_dir() {
        let ds: FloatDataset = load_amr(&args.path)?;
        println!(
            "bundle: field {:?}, refine_by {}, domain {:?}, periodic {:?}",
            ds.field_name, ds.refine_by, ds.domain_dimensions, ds.periodic
        );
        for (level, grids) in ds.levels.iter().enumerate() {
            let cells: usize = grids.iter().map(|g| g.cell_count()).sum();
            println!("  level {level}: {} grids, {} cells", grids.len(), cells);
        }
        println!("validation: ok");
    } else {
        let grids: Vec<FloatVolume> = amrvol::read_svol(&args.path)?;
        for vol in &grids {
            let stats = amrvol::active_stats(std::slice::from_ref(vol));
            println!(
                "grid {:?}: voxel size {:.6}, translation ({:.5}, {:.5}, {:.5}), \
                 {} active voxels, {} leaves",
                vol.name,
                vol.voxel_size(),
                vol.translation()[0],
                vol.translation()[1],
                vol.translation()[2],
                stats.active_voxels,
                stats.leaves,
            );
        }
        let total = amrvol::active_stats(&grids);
        println!(
            "total: {} active voxels, {} leaves, {} serialized bytes",
            total.active_voxels, total.leaves, total.serialized_bytes
        );
    }
    Ok(())
}

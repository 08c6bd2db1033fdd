//! The `udfgrid` command line. Exit codes: 0 success, 1 usage, 2 data or
//! contract error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::dfield::{build_pyramid, compute_grid};
use crate::error::{Error, Result};
use crate::eval::{chamfer, default_sigmas, prepare_normals, roundtrip, RoundtripReport};
use crate::extract::extract;
use crate::geom::{Point3, PointCloud};
use crate::grid::{DFKind, DFParams, GridSpec};
use crate::io::{self, report};
use crate::normals::{estimate_normals, orient_normals};
use crate::scenegen::{apply_dropout, sample_scene, simulate_scans, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Grid padding used by `--auto-bounds`, in voxels.
pub const AUTO_BOUNDS_PAD: u32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "udfgrid",
    version,
    about = "Sparse truncated distance fields from point clouds"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true, env = "UDFGRID_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate PCA normals, oriented toward sensor origins when present.
    Normals {
        /// Input PLY.
        input: PathBuf,
        /// Output PLY with normals.
        output: PathBuf,
        /// Neighbors per PCA fit, including the point itself.
        #[arg(long, default_value_t = DFParams::DEFAULT_NORMAL_K)]
        k: usize,
        /// Write ASCII PLY instead of binary.
        #[arg(long)]
        ascii: bool,
    },
    /// Compute a truncated distance field grid.
    Compute {
        /// Input PLY.
        input: PathBuf,
        /// Output UDFG grid.
        output: PathBuf,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Extract a point cloud from a grid.
    Extract {
        /// Input UDFG grid.
        input: PathBuf,
        /// Output PLY.
        output: PathBuf,
        /// Write ASCII PLY instead of binary.
        #[arg(long)]
        ascii: bool,
    },
    /// Symmetric Chamfer distance between two clouds.
    Chamfer {
        /// First PLY.
        a: PathBuf,
        /// Second PLY.
        b: PathBuf,
    },
    /// Point cloud -> field -> point cloud, reported as a Chamfer table.
    Roundtrip {
        /// Input PLY.
        input: PathBuf,
        /// Comma-separated kinds (default: all eight).
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        kind: Vec<DFKind>,
        /// Meters.
        #[arg(long, default_value_t = 0.05)]
        voxel_size: f64,
        /// Meters (default: two voxels). Ignored with --sigma-sweep.
        #[arg(long)]
        sigma: Option<f64>,
        /// Sweep sigma over one to four voxels.
        #[arg(long)]
        sigma_sweep: bool,
        /// Flip the grids before extraction.
        #[arg(long)]
        flip: bool,
        /// Neighbors for normal estimation when the input has none.
        #[arg(long, default_value_t = DFParams::DEFAULT_NORMAL_K)]
        normal_k: usize,
        /// Also write one JSON object per run to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample a synthetic scene described by a TOML file.
    Synth {
        /// Scene TOML.
        scene: PathBuf,
        /// Output PLY.
        output: PathBuf,
        /// Seed for sampling, noise and dropout.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gaussian noise sigma in meters; overrides the scene's scan setting.
        #[arg(long)]
        noise: Option<f64>,
        /// Fraction of scans to drop; overrides the scene's scan setting.
        #[arg(long)]
        dropout: Option<f64>,
        /// Write ASCII PLY instead of binary.
        #[arg(long)]
        ascii: bool,
    },
    /// Compute a resolution pyramid, writing `<prefix>_l<level>.udfg`.
    Pyramid {
        /// Input PLY.
        input: PathBuf,
        /// Output path prefix.
        prefix: PathBuf,
        /// Number of levels, each at half the resolution of the previous one.
        #[arg(long, default_value_t = 4)]
        levels: u32,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    /// Hoppe, IMLS, SED, SWED, UHoppe, UIMLS, UED or UWED (case-insensitive).
    #[arg(long, value_parser = parse_kind)]
    pub kind: DFKind,
    /// Meters.
    #[arg(long)]
    pub voxel_size: f64,
    /// Meters (default: two voxels).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Store the flipped field.
    #[arg(long)]
    pub flip: bool,
    /// Neighbors for normal estimation when the input has none.
    #[arg(long, default_value_t = DFParams::DEFAULT_NORMAL_K)]
    pub normal_k: usize,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("extent").required(true).args(["dims", "auto_bounds"])))]
pub struct BoundsArgs {
    /// Grid origin `x,y,z` in meters.
    #[arg(long, requires = "dims", allow_hyphen_values = true, value_parser = parse_triple::<f64>)]
    pub origin: Option<[f64; 3]>,
    /// Node counts `nx,ny,nz`.
    #[arg(long, requires = "origin", value_parser = parse_triple::<u32>)]
    pub dims: Option<[u32; 3]>,
    /// Fit the grid to the cloud's bounding box plus three voxels.
    #[arg(long)]
    pub auto_bounds: bool,
}

fn parse_triple<T: std::str::FromStr + Copy>(s: &str) -> std::result::Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, c] => {
            let p = |t: &str| t.parse::<T>().map_err(|_| format!("'{t}' is not a valid number"));
            Ok([p(a)?, p(b)?, p(c)?])
        }
        _ => Err(format!("expected three comma-separated values, got '{s}'")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<DFKind, String> {
    s.parse::<DFKind>().map_err(|e| e.to_string())
}

impl FieldArgs {
    fn params(&self) -> Result<DFParams> {
        let sigma = self.sigma.unwrap_or(2.0 * self.voxel_size);
        Ok(DFParams {
            normal_k: self.normal_k,
            ..DFParams::new(sigma)?
        })
    }
}

impl BoundsArgs {
    fn spec(&self, cloud: &PointCloud, voxel_size: f64) -> Result<GridSpec> {
        match (&self.origin, &self.dims) {
            (Some(o), Some(d)) if !self.auto_bounds => GridSpec::new(Point3::from_array(*o), voxel_size, *d),
            _ => GridSpec::around(cloud, voxel_size, AUTO_BOUNDS_PAD),
        }
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_cloud(cloud: &PointCloud, path: &Path, ascii: bool) -> Result<()> {
    io::write_ply(cloud, path, !ascii)
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Normals {
            input,
            output,
            k,
            ascii,
        } => {
            let cloud = io::read_ply(input)?;
            let mut with = estimate_normals(&cloud, *k)?;
            if with.sensor_origins().is_some() {
                with = orient_normals(&with)?;
            } else {
                eprintln!("warning: no sensor origins, normals are unoriented");
            }
            let invalid = with.normals().map_or(0, |ns| ns.iter().filter(|n| n.is_none()).count());
            write_cloud(&with, output, *ascii)?;
            println!("{} points, {} degenerate normals", with.len(), invalid);
        }
        Command::Compute {
            input,
            output,
            field,
            bounds,
        } => {
            let cloud = io::read_ply(input)?;
            let spec = bounds.spec(&cloud, field.voxel_size)?;
            let params = field.params()?;
            let prepared = prepare_normals(&cloud, field.kind, params.normal_k)?;
            let mut grid = compute_grid(&prepared, &spec, field.kind, &params)?;
            if field.flip {
                grid = grid.flip();
            }
            if grid.is_empty() {
                eprintln!("warning: no voxel lies within the truncation band; grid is empty");
            }
            io::write_grid(&grid, output)?;
            println!(
                "{} occupied voxels of {} ({} dims {:?})",
                grid.len(),
                spec.node_count(),
                grid.kind(),
                spec.dims
            );
        }
        Command::Extract { input, output, ascii } => {
            let grid = io::read_grid(input)?;
            let cloud = extract(&grid)?;
            write_cloud(&cloud, output, *ascii)?;
            println!("{} points", cloud.len());
        }
        Command::Chamfer { a, b } => {
            let cd = chamfer(&io::read_ply(a)?, &io::read_ply(b)?)?;
            println!("CD = {cd:.9} m = {:.6} cm", cd * 100.0);
        }
        Command::Roundtrip {
            input,
            kind,
            voxel_size,
            sigma,
            sigma_sweep,
            flip,
            normal_k,
            json,
        } => {
            let cloud = io::read_ply(input)?;
            let spec = GridSpec::around(&cloud, *voxel_size, AUTO_BOUNDS_PAD)?;
            let kinds: Vec<DFKind> = if kind.is_empty() {
                DFKind::ALL.to_vec()
            } else {
                kind.clone()
            };
            let sigmas = if *sigma_sweep {
                default_sigmas(*voxel_size)
            } else {
                vec![sigma.unwrap_or(2.0 * voxel_size)]
            };
            let needs = kinds.iter().any(|k| k.needs_normals());
            let prepared = if needs {
                prepare_normals(&cloud, DFKind::Hoppe, *normal_k)?
            } else {
                std::borrow::Cow::Borrowed(&cloud)
            };
            let mut reports: Vec<RoundtripReport> = Vec::new();
            for &k in &kinds {
                for &s in &sigmas {
                    let params = DFParams {
                        normal_k: *normal_k,
                        ..DFParams::new(s)?
                    };
                    reports.push(roundtrip(&prepared, &spec, k, *flip, &params)?);
                }
            }
            let label = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "input".into());
            let text = if *sigma_sweep {
                report::format_sigma_table(&label, &reports)
            } else {
                report::format_kind_table(&label, &reports)
            };
            print!("{text}");
            if let Some(path) = json {
                let f = std::fs::File::create(path)?;
                report::write_jsonl(&reports, std::io::BufWriter::new(f))?;
            }
        }
        Command::Synth {
            scene,
            output,
            seed,
            noise,
            dropout,
            ascii,
        } => {
            let mut spec = SceneSpec::load(scene)?;
            let mut cloud = sample_scene(&spec, *seed)?;
            if noise.is_some() || dropout.is_some() {
                let scan = spec
                    .scan
                    .as_mut()
                    .ok_or_else(|| Error::Config("--noise and --dropout need a [scan] section with sensors".into()))?;
                if let Some(n) = noise {
                    scan.noise_sigma = *n;
                }
                if let Some(d) = dropout {
                    scan.dropout_fraction = *d;
                }
            }
            if let Some(scan) = &spec.scan {
                cloud = simulate_scans(&cloud, scan, *seed)?;
                if scan.dropout_fraction > 0.0 {
                    cloud = apply_dropout(&cloud, scan.dropout_fraction, *seed)?;
                }
            }
            write_cloud(&cloud, output, *ascii)?;
            println!("{} points", cloud.len());
        }
        Command::Pyramid {
            input,
            prefix,
            levels,
            field,
            bounds,
        } => {
            let cloud = io::read_ply(input)?;
            let spec = bounds.spec(&cloud, field.voxel_size)?;
            let params = field.params()?;
            let prepared = prepare_normals(&cloud, field.kind, params.normal_k)?;
            let grids = build_pyramid(&prepared, &spec, field.kind, &params, *levels)?;
            for (l, g) in grids.into_iter().enumerate() {
                let g = if field.flip { g.flip() } else { g };
                let path = pyramid_path(prefix, l as u32);
                io::write_grid(&g, &path)?;
                println!(
                    "level {l}: dims {:?}, {} occupied voxels -> {}",
                    g.spec().dims,
                    g.len(),
                    path.display()
                );
            }
        }
    }
    Ok(())
}

/// `<prefix>_l<level>.udfg`
pub fn pyramid_path(prefix: &Path, level: u32) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("_l{level}.udfg"));
    PathBuf::from(s)
}

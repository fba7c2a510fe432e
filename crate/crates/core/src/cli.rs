//! Command-line driver: phantom generation, rendering, segmentation,
//! composition, benchmarking and the HTTP service.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench::run_bench;
use crate::config::{load_camera, parse_crop, read_json, write_json, PeelFile, SeedFile};
use crate::enhance::{RateMode, TransferFunctionSpec, DEFAULT_MAP_SIZE};
use crate::error::{Error, Result};
use crate::exploration::{build_peel_buffer, SeedSets};
use crate::fvr::{render_fvr, FvrOptions, TransitionalTF1D};
use crate::geom::Rgb;
use crate::isoseg::segment;
use crate::raycast::{Camera, CropBounds};
use crate::render::{render_isosurface, Frame, RenderOptions, SurfaceAppearance};
use crate::scene::load_scene;
use crate::synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
use crate::volume::{load_pair, ScalarVolume};

#[derive(Debug, Parser)]
#[command(name = "isoscope", version, about = "Color-enhanced isosurface renderer and exploration toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceMode {
    Shallow,
    Deep,
    Mono,
}

/// `n` or `nx,ny,nz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims(pub [usize; 3]);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad dimension {p:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [n] => Ok(Dims([n; 3])),
            [x, y, z] => Ok(Dims([x, y, z])),
            _ => Err(format!("expected N or NX,NY,NZ, got {s:?}")),
        }
    }
}

fn parse_rgb(s: &str) -> std::result::Result<Rgb, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad color component {p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected R,G,B, got {s:?}"))
}

fn parse_crop_arg(s: &str) -> std::result::Result<CropBounds, String> {
    parse_crop(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic phantom as a .raw/.json volume pair.
    Synth {
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(long)]
        dims: Dims,
        /// Kind-specific parameters, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Color-enhanced or monotone isosurface rendering.
    Render {
        #[arg(long)]
        volume: PathBuf,
        /// Overrides the transfer function's isovalue.
        #[arg(long)]
        iso: Option<f64>,
        #[arg(long)]
        tf: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "shallow")]
        mode: SurfaceMode,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        peel: Option<PathBuf>,
        #[arg(long, value_parser = parse_crop_arg)]
        crop: Option<CropBounds>,
        /// Surface color in mono mode.
        #[arg(long, value_parser = parse_rgb)]
        color: Option<Rgb>,
        #[arg(long)]
        no_shading: bool,
        #[arg(long, default_value_t = DEFAULT_MAP_SIZE)]
        map_size: usize,
        #[arg(long)]
        out: PathBuf,
        /// Raw little-endian i32 voxel-id buffer.
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Reference full volume rendering.
    Fvr {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        tf: PathBuf,
        #[arg(long)]
        sample_dist: Option<f64>,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, value_parser = parse_crop_arg)]
        crop: Option<CropBounds>,
        #[arg(long)]
        shading: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Min-cut segmentation of the isosurface between two seed sets.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        iso: f64,
        #[arg(long)]
        fg_seeds: PathBuf,
        #[arg(long)]
        bg_seeds: PathBuf,
        #[arg(long, value_parser = parse_crop_arg)]
        crop: Option<CropBounds>,
        /// Needed when seeds are given as pixels.
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-structure rendering of a scene file.
    Compose {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Median frame times of the monotone, enhanced and full volume renderers.
    Bench {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        iso: Option<f64>,
        #[arg(long)]
        tf: Option<PathBuf>,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP and WebSocket session service.
    #[cfg(feature = "service")]
    Serve {
        #[arg(long, env = "ISOSCOPE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: String,
        #[arg(long, env = "ISOSCOPE_MAX_SESSIONS", default_value_t = 16)]
        max_sessions: usize,
        #[arg(long, env = "ISOSCOPE_MAP_SIZE", default_value_t = DEFAULT_MAP_SIZE)]
        map_size: usize,
    },
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if e.use_stderr() && !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(&args));
            }
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Usage of the named subcommand, else of the whole tool.
fn usage_for(args: &[OsString]) -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    let sub = args.get(1).and_then(|a| a.to_str()).map(str::to_owned);
    match sub.and_then(|name| cmd.find_subcommand_mut(&name).cloned()) {
        Some(mut sc) => {
            let name = sc.get_name().to_owned();
            sc.set_bin_name(format!("isoscope {name}"));
            sc.render_usage()
        }
        None => cmd.render_usage(),
    }
}

/// Default reference sample distance for a volume: one smallest cell extent.
fn default_std(vol: &ScalarVolume) -> f64 {
    let s = vol.spacing();
    s.x.min(s.y).min(s.z)
}

fn load_tf(path: Option<&Path>, iso: Option<f64>, vol: &ScalarVolume) -> Result<TransferFunctionSpec> {
    let mut tf = match path {
        Some(p) => {
            let tf: TransferFunctionSpec = read_json(p, "transfer function")?;
            tf.local_tf()?;
            tf
        }
        None => TransferFunctionSpec::example(iso.unwrap_or(0.5), default_std(vol)),
    };
    if let Some(iso) = iso {
        tf.isovalue = iso;
    }
    Ok(tf)
}

fn save_frame(frame: &Frame, out: &Path, ids: Option<&Path>) -> Result<()> {
    frame.image.save_png(out)?;
    if let Some(p) = ids {
        frame.ids.save(p)?;
    }
    Ok(())
}

fn crop_or_full(crop: Option<CropBounds>, vol: &ScalarVolume) -> Result<CropBounds> {
    let c = crop.unwrap_or_else(|| CropBounds::for_volume(vol));
    c.validate(vol.cell_dims())?;
    Ok(c)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { kind, dims, params, out } => {
            let spec = SyntheticSpec { kind, dims: dims.0, params };
            generate_synthetic(&spec)?.save_pair(&out)
        }
        Command::Render { volume, iso, tf, mode, camera, peel, crop, color, no_shading, map_size, out, ids } => {
            let vol = load_pair(&volume)?;
            let cam = load_camera(&camera)?;
            let crop = crop_or_full(crop, &vol)?;
            let appearance = match mode {
                SurfaceMode::Mono => {
                    let iso = match (iso, tf.as_deref()) {
                        (Some(v), _) => v,
                        (None, Some(p)) => load_tf(Some(p), None, &vol)?.isovalue,
                        (None, None) => 0.5,
                    };
                    SurfaceAppearance::mono(iso, color.unwrap_or([0.9, 0.9, 0.9]))
                }
                SurfaceMode::Shallow | SurfaceMode::Deep => {
                    let mut spec = load_tf(tf.as_deref(), iso, &vol)?;
                    spec.mode = if mode == SurfaceMode::Deep { RateMode::Deep } else { RateMode::Shallow };
                    SurfaceAppearance::from_spec(&spec, &vol, map_size)?
                }
            };
            let mut options = RenderOptions::default();
            if no_shading {
                options.shading = None;
            }
            if let Some(p) = peel {
                let file: PeelFile = read_json(&p, "peel windows")?;
                options.peel = Some(build_peel_buffer(&file.rects, cam.image_dims));
            }
            let frame = render_isosurface(&vol, &cam, &crop, &appearance, &options);
            save_frame(&frame, &out, ids.as_deref())
        }
        Command::Fvr { volume, tf, sample_dist, camera, crop, shading, out } => {
            let vol = load_pair(&volume)?;
            let cam = load_camera(&camera)?;
            let crop = crop_or_full(crop, &vol)?;
            let spec = load_tf(Some(&tf), None, &vol)?;
            let d = sample_dist.unwrap_or(spec.std_sample_distance);
            if !(d > 0.0) {
                return Err(Error::Config(format!("sample distance must be positive, got {d}")));
            }
            let ttf = TransitionalTF1D::from_spec(&spec)?;
            let opts = FvrOptions { shading: shading.then(Default::default), ..Default::default() };
            render_fvr(&vol, &cam, &ttf, d, &crop, &opts).save_png(&out)
        }
        Command::Segment { volume, iso, fg_seeds, bg_seeds, crop, camera, out } => {
            let vol = load_pair(&volume)?;
            let crop = crop_or_full(crop, &vol)?;
            let fg: SeedFile = read_json(&fg_seeds, "seeds")?;
            let bg: SeedFile = read_json(&bg_seeds, "seeds")?;
            let reference = if fg.needs_render() || bg.needs_render() {
                let cam: Camera = load_camera(
                    camera.as_ref().ok_or_else(|| Error::Config("pixel seeds need --camera".into()))?,
                )?;
                let opts = RenderOptions { shading: None, ..Default::default() };
                Some(render_isosurface(&vol, &cam, &crop, &SurfaceAppearance::mono(iso, [1.0; 3]), &opts))
            } else {
                None
            };
            let ids = reference.as_ref().map(|f| &f.ids);
            let seeds = SeedSets::from_lists(fg.resolve(ids)?, bg.resolve(ids)?);
            let (_, cut) = segment(&vol, iso, &seeds, &crop)?;
            cut.save(&out)?;
            println!(
                "{}",
                json!({"node_count": cut.node_count, "cut_weight": cut.cut_weight, "solve_ms": cut.solve_ms()})
            );
            Ok(())
        }
        Command::Compose { scene, camera, out, ids } => {
            let cam = camera.map(load_camera).transpose()?;
            let scene = load_scene(&scene, cam)?;
            let frame = scene.render(&RenderOptions::default());
            save_frame(&frame, &out, ids.as_deref())
        }
        Command::Bench { volume, iso, tf, camera, frames, out } => {
            let vol = load_pair(&volume)?;
            let cam = load_camera(&camera)?;
            let spec = load_tf(tf.as_deref(), iso, &vol)?;
            let report = run_bench(&vol, &cam, &spec, frames)?;
            if let Some(p) = out {
                write_json(p, &report, "bench report")?;
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        #[cfg(feature = "service")]
        Command::Serve { listen, max_sessions, map_size } => {
            let config = crate::service::ServiceConfig { max_sessions, map_size };
            crate::service::serve_blocking(&listen, config)
        }
    }
}

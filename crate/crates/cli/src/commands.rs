use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use trackcount::ftstats::{self, AgeParams, TrackDensity};
use trackcount::overlay::{render_overlay, save_overlay};
use trackcount::pipeline::{count_image, CountReport};
use trackcount::raster::{load_gray, GrayImage};
use trackcount::report::{self, CountRow};
use trackcount::synth::{self, SynthSpec};

use crate::config::{self, PipelineArgs, PipelineConfig};
use crate::{AgeArgs, BatchArgs, CountArgs, GqrArgs, KsArgs, SynthArgs};

/// Bad invocation, as opposed to a failure while working.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "tif", "tiff"];

/// Writes `content` to `dir/name`, or to stdout without a directory.
fn emit(dir: Option<&Path>, name: &str, content: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            let path = d.join(name);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn write_overlay(img: &GrayImage, report: &CountReport, source: &Path, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{}_overlay.png", stem(source)));
    save_overlay(&render_overlay(img, report)?, &path)?;
    Ok(path)
}

fn count_file(path: &Path, cfg: &PipelineConfig, overlay: bool) -> Result<CountReport> {
    let img = load_gray(path)?;
    let report = count_image(&img, &cfg.count)?.with_image(file_name(path));
    if overlay {
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let written = write_overlay(&img, &report, path, &dir)?;
        eprintln!("wrote {}", written.display());
    }
    Ok(report)
}

pub fn count(config_file: Option<&Path>, args: CountArgs) -> Result<()> {
    let cfg = config::resolve(config_file, &args.pipeline)?;
    let report = count_file(&args.image, &cfg, args.overlay)?;
    let stem = stem(&args.image);
    if args.json {
        emit(cfg.out.as_deref(), &format!("{stem}.json"), &to_json(&report))
    } else {
        let csv = report::counts_csv_string(&[CountRow::from(&report)]);
        emit(cfg.out.as_deref(), &format!("{stem}.csv"), &csv)
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| UsageError(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let supported = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if supported && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by_key(|p| file_name(p));
    if paths.is_empty() {
        return Err(UsageError(format!("no PNG or TIFF images in {}", dir.display())).into());
    }
    Ok(paths)
}

pub fn batch(config_file: Option<&Path>, args: BatchArgs) -> Result<()> {
    let cfg = config::resolve(config_file, &args.pipeline)?;
    let paths = list_images(&args.dir)?;
    let results: Vec<Result<CountReport>> = paths
        .par_iter()
        .map(|p| count_file(p, &cfg, args.overlay))
        .collect();

    let mut rows = Vec::with_capacity(paths.len());
    let mut failed = 0;
    for (path, result) in paths.iter().zip(results) {
        match result {
            Ok(r) => rows.push(CountRow::from(&r)),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    emit(cfg.out.as_deref(), "counts.csv", &report::counts_csv_string(&rows))?;

    let n: u64 = rows.iter().map(|r| r.n_tracks).sum();
    if !rows.is_empty() {
        let d = TrackDensity::from_total(n, rows.len(), cfg.area.unwrap_or(1.0))?;
        eprintln!(
            "N = {n} over {} images, {:.1} ± {:.1} tracks per image",
            rows.len(),
            d.per_image_mean,
            d.per_image_sigma
        );
        if cfg.area.is_some() {
            eprintln!("rho = {:.4e} ± {:.1e} tracks/cm^2", d.rho, d.sigma);
        }
    }
    if failed > 0 {
        return Err(anyhow!("{failed} of {} images failed", paths.len()));
    }
    Ok(())
}

fn read_counts(path: &Path) -> Result<Vec<CountRow>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    report::read_counts_csv(file).with_context(|| format!("in {}", path.display()))
}

#[derive(Debug, Serialize)]
struct GqrOutput {
    gqr: f64,
    sigma: f64,
    ed: TrackDensity,
    is: TrackDensity,
}

pub fn gqr(config_file: Option<&Path>, args: GqrArgs) -> Result<()> {
    let flags = PipelineArgs {
        area: args.area,
        out: args.out.clone(),
        ..PipelineArgs::default()
    };
    let cfg = config::resolve(config_file, &flags)?;
    let area = cfg.require_area().map_err(|e| UsageError(e.to_string()))?;
    let ed = ftstats::track_density(&report::track_counts(&read_counts(&args.ed)?), area)?;
    let is = ftstats::track_density(&report::track_counts(&read_counts(&args.internal)?), area)?;
    let g = ftstats::compute_gqr(&ed, &is)?;
    eprintln!("GQR = {:.2} ± {:.2}", g.gqr, g.sigma);
    let out = GqrOutput {
        gqr: g.gqr,
        sigma: g.sigma,
        ed,
        is,
    };
    emit(cfg.out.as_deref(), "gqr.json", &to_json(&out))
}

pub fn kstest(args: KsArgs) -> Result<()> {
    let counts = report::track_counts(&read_counts(&args.counts)?);
    let r = ftstats::poisson_ks(&counts)?;
    eprintln!("D = {:.4}, p = {:.4} (n = {}, rate = {:.2})", r.d, r.p_value, r.n, r.rate);
    emit(args.out.as_deref(), "kstest.json", &to_json(&r))
}

pub fn age(args: AgeArgs) -> Result<()> {
    let params = AgeParams {
        lambda_total: args.lambda,
        lambda_f: args.lambda_f,
        c238: args.c238,
        r_u: args.r_u,
        gqr: args.gqr,
        rho_s: args.rho_s,
        rho_i: args.rho_i,
    };
    let r = ftstats::ft_age(&params)?;
    eprintln!("t = {:.2} Ma", r.ma);
    emit(args.out.as_deref(), "age.json", &to_json(&r))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        width: args.width,
        height: args.height,
        n_tracks: args.n_tracks,
        overlap_probability: args.overlap,
        forced_crossings: args.crossings,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let s = synth::generate(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let png = args.out.join(format!("synth_{}.png", args.seed));
    s.image.save(&png)?;
    eprintln!("wrote {}", png.display());
    emit(Some(&args.out), &format!("synth_{}.json", args.seed), &to_json(&s.truth))
}

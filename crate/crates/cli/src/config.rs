//! Pipeline settings merged from a key=value config file and flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;
use trackcount::binarize::{Method, Polarity};
use trackcount::pipeline::CountConfig;

/// Consulted when `--config` is not given.
pub const CONFIG_ENV: &str = "TRACKCOUNT_CONFIG";

/// Parses `7x7` style window sizes.
pub fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (k, l) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected <rows>x<cols>, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad window size `{v}`: {e}"));
    let (k, l) = (parse(k)?, parse(l)?);
    if k == 0 || l == 0 || k % 2 == 0 || l % 2 == 0 {
        return Err(format!("window sides must be odd and positive, got {k}x{l}"));
    }
    Ok((k, l))
}

/// Flags shared by the counting subcommands. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Binarization method
    #[arg(long, value_parser = ["otsu", "yen", "li", "isodata"])]
    pub method: Option<String>,
    /// Manual threshold; overrides --method
    #[arg(long)]
    pub threshold: Option<u8>,
    /// Which side of the threshold is track material
    #[arg(long, value_parser = ["dark", "bright"])]
    pub polarity: Option<String>,
    /// Median filter window
    #[arg(long, value_name = "KxL", value_parser = parse_window)]
    pub window: Option<(usize, usize)>,
    /// Smallest region kept after thresholding, pixels
    #[arg(long, value_name = "PX")]
    pub min_size: Option<usize>,
    /// Area of one image, cm^2
    #[arg(long, value_name = "CM2")]
    pub area: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    method: Option<String>,
    threshold: Option<u8>,
    polarity: Option<String>,
    window: Option<String>,
    min_size: Option<usize>,
    area: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub count: CountConfig,
    pub area: Option<f64>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn require_area(&self) -> Result<f64> {
        match self.area {
            Some(a) => Ok(a),
            None => bail!("an image area is required (--area <cm2> or `area` in the config file)"),
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Explicit path, else the environment variable, else no file.
pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn resolve(file: Option<&Path>, flags: &PipelineArgs) -> Result<PipelineConfig> {
    let f = match file {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let mut count = CountConfig::default();

    if let Some(m) = flags.method.as_deref().or(f.method.as_deref()) {
        count.method = m.parse::<Method>()?;
        if count.method == Method::Manual {
            bail!("use --threshold for a manual threshold");
        }
    }
    count.manual_threshold = flags.threshold.or(f.threshold);
    if let Some(p) = flags.polarity.as_deref().or(f.polarity.as_deref()) {
        count.polarity = p.parse::<Polarity>()?;
    }
    if let Some(w) = flags.window {
        count.window = w;
    } else if let Some(w) = &f.window {
        count.window = parse_window(w).map_err(anyhow::Error::msg)?;
    }
    if let Some(m) = flags.min_size.or(f.min_size) {
        count.min_size = m;
    }
    let area = flags.area.or(f.area);
    if let Some(a) = area {
        if !(a.is_finite() && a > 0.0) {
            bail!("area must be positive, got {a}");
        }
    }
    Ok(PipelineConfig {
        count,
        area,
        out: flags.out.clone().or(f.out),
    })
}

//! Command-line arguments, run configurations and `key = value` config files.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "rcl", version, about = "Real compressed layer solvers for 2D exterior Helmholtz scattering")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: RunConfig,
}

/// Everything that determines a run. Echoed into every output file.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum RunConfig {
    /// Disk scatterer: spectral errors for a sweep over k and degrees (CSV)
    Circular(CircularArgs),
    /// Disk scatterer: errors for several layer thicknesses (CSV)
    Thickness(ThicknessArgs),
    /// Disk scatterer: physical field recovered beyond the interface (JSON)
    Farfield(FarfieldArgs),
    /// Square scatterer: finite element convergence study (CSV, optional field JSON)
    Rect(RectArgs),
    /// L-shaped scatterer: field export (JSON)
    Lshape(LshapeArgs),
}

impl RunConfig {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            RunConfig::Circular(a) => a.common.out.as_ref(),
            RunConfig::Thickness(a) => a.common.out.as_ref(),
            RunConfig::Farfield(a) => a.out.as_ref(),
            RunConfig::Rect(a) => a.out.as_ref(),
            RunConfig::Lshape(a) => a.out.as_ref(),
        }
    }
}

/// Comma-separated list; the empty string is the empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

/// Byte count with an optional K, M or G suffix (powers of 1024).
pub fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1usize << 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 1 << 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    let v: f64 = digits.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(format!("`{s}`: must be positive"));
    }
    Ok((v * scale as f64) as usize)
}

/// Flags shared by the disk experiments.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiskArgs {
    /// Scatterer radius
    #[arg(long = "R", default_value_t = 0.5)]
    pub r_inner: f64,
    /// Radius where compression starts
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Fixed number of modes M, overriding the cutoff rule
    #[arg(long = "modes")]
    pub modes: Option<usize>,
}

/// Output flags shared by the disk experiments.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Angles of the error slices (comma-separated)
    #[arg(long, default_value = "0,0.7853981633974483", allow_hyphen_values = true)]
    pub theta: List<f64>,
    /// Uniform sample points per interval
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    /// Output file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CircularArgs {
    /// Wavenumbers (comma-separated)
    #[arg(long, default_value = "50")]
    pub k: List<f64>,
    /// Degrees on the inner interval (comma-separated)
    #[arg(long = "N1", default_value = "50,80,100")]
    pub n1: List<usize>,
    /// Degrees in the layer, paired with N1; equal to N1 when omitted
    #[arg(long = "N2", default_value = "")]
    pub n2: List<usize>,
    /// Outer radius of the layer
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    /// Layer tolerance; the layer damps outgoing waves by eps^2
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    /// Fourier mode cutoff tolerance
    #[arg(long, default_value_t = 1e-12)]
    pub eps1: f64,
    #[command(flatten)]
    pub disk: DiskArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ThicknessArgs {
    /// Wavenumbers (comma-separated)
    #[arg(long, default_value = "50,200")]
    pub k: List<f64>,
    /// Layer thicknesses b - a (comma-separated)
    #[arg(long, default_value = "1,0.1,0.001")]
    pub d: List<f64>,
    #[arg(long = "N1", default_value_t = 200)]
    pub n1: usize,
    #[arg(long = "N2", default_value_t = 200)]
    pub n2: usize,
    /// Layer tolerance; the layer damps outgoing waves by eps^2
    #[arg(long, default_value_t = 1e-13)]
    pub eps: f64,
    /// Fourier mode cutoff tolerance
    #[arg(long, default_value_t = 1e-13)]
    pub eps1: f64,
    #[command(flatten)]
    pub disk: DiskArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FarfieldArgs {
    #[arg(long, default_value_t = 50.0)]
    pub k: f64,
    #[arg(long = "N1", default_value_t = 150)]
    pub n1: usize,
    #[arg(long = "N2", default_value_t = 150)]
    pub n2: usize,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    /// Start of the recovery range; defaults to a
    #[arg(long = "rho-min")]
    pub rho_min: Option<f64>,
    #[arg(long = "rho-max", default_value_t = 3.0)]
    pub rho_max: f64,
    /// Layer tolerance; the layer damps outgoing waves by eps^2
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    /// Fourier mode cutoff tolerance
    #[arg(long, default_value_t = 1e-12)]
    pub eps1: f64,
    #[command(flatten)]
    pub disk: DiskArgs,
    /// Direction of the recovered curve
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    /// Points on the recovered curve
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Rectangle, layer and solver flags shared by the finite element experiments.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoxArgs {
    #[arg(long = "L1", default_value_t = 1.0)]
    pub l1: f64,
    #[arg(long = "L2", default_value_t = 1.0)]
    pub l2: f64,
    #[arg(long = "d1", default_value_t = 0.3)]
    pub d1: f64,
    #[arg(long = "d2", default_value_t = 0.3)]
    pub d2: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
    /// Radial cells in each layer patch; defaults to the mesh size
    #[arg(long = "layer-cells")]
    pub layer_cells: Option<usize>,
    /// Largest factorization to attempt, in bytes (K, M, G suffixes allowed)
    #[arg(long = "memory-limit", default_value = "3G", value_parser = parse_bytes)]
    pub memory_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RectArgs {
    #[arg(long, default_value_t = 10.0)]
    pub k: f64,
    /// Polynomial degree
    #[arg(long = "N", default_value_t = 1)]
    pub degree: usize,
    /// Cells across the inner rectangle per direction (comma-separated)
    #[arg(long, default_value = "32,64,128,256")]
    pub mesh: List<usize>,
    /// Side of the square scatterer
    #[arg(long, default_value_t = 0.8)]
    pub width: f64,
    #[command(flatten)]
    pub geometry: BoxArgs,
    /// Also write the field of the first mesh as JSON here
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LshapeArgs {
    #[arg(long, default_value_t = 10.0)]
    pub k: f64,
    #[arg(long = "N", default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 64)]
    pub mesh: usize,
    /// Side of the bounding square of the obstacle
    #[arg(long, default_value_t = 0.8)]
    pub width: f64,
    /// Side of the square removed from its upper-right corner
    #[arg(long, default_value_t = 0.4)]
    pub notch: f64,
    /// Point source inside the obstacle generating the boundary data
    #[arg(long, default_value = "-0.2,-0.2", allow_hyphen_values = true)]
    pub source: List<f64>,
    #[command(flatten)]
    pub geometry: BoxArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads `key = value` lines into `--key=value` arguments. `#` starts a comment.
pub fn config_file_args(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key `{}`", i + 1, key));
        }
        out.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(out)
}

/// Splices the entries of `--config FILE` in front of the command-line flags so that
/// flags given on the command line win.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut file = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            file = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            file = Some(path.into());
        } else {
            rest.push(a);
        }
    }
    let Some(file) = file else { return Ok(rest) };
    let text = std::fs::read_to_string(&file).map_err(|e| format!("config file {}: {e}", file.to_string_lossy()))?;
    let extra = config_file_args(&text).map_err(|e| format!("config file {}: {e}", file.to_string_lossy()))?;
    if rest.len() < 2 {
        return Err("--config needs a subcommand".into());
    }
    let mut merged: Vec<OsString> = rest[..2].to_vec();
    merged.extend(extra);
    merged.extend(rest.into_iter().skip(2));
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_and_allow_empty() {
        assert_eq!("1, 2,3".parse::<List<usize>>().unwrap().0, vec![1, 2, 3]);
        assert!("".parse::<List<f64>>().unwrap().0.is_empty());
        assert!("1,x".parse::<List<f64>>().is_err());
    }

    #[test]
    fn byte_suffixes() {
        assert_eq!(parse_bytes("3G").unwrap(), 3 << 30);
        assert_eq!(parse_bytes("512M").unwrap(), 512 << 20);
        assert_eq!(parse_bytes("100").unwrap(), 100);
        assert!(parse_bytes("-1").is_err());
    }

    #[test]
    fn config_lines() {
        let args = config_file_args("# sweep\nk = 10, 20\n\nN1=30 # inline\n").unwrap();
        assert_eq!(args, vec![OsString::from("--k=10, 20"), OsString::from("--N1=30")]);
        assert!(config_file_args("just words").is_err());
    }

    #[test]
    fn run_config_round_trips_through_json() {
        for argv in [
            vec!["rcl", "circular", "--k", "10,20", "--N1", "30", "--modes", "12"],
            vec!["rcl", "thickness", "--d", "0.5"],
            vec!["rcl", "farfield", "--rho-min", "1.5"],
            vec!["rcl", "rect", "--mesh", "", "--layer-cells", "8"],
            vec!["rcl", "lshape", "--source", "-0.1,-0.3", "--memory-limit", "1G"],
        ] {
            let cfg = Cli::try_parse_from(argv).unwrap().command;
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn later_flags_win() {
        let cfg = Cli::try_parse_from(["rcl", "rect", "--k=5", "--k=7"]).unwrap().command;
        assert!(matches!(cfg, RunConfig::Rect(RectArgs { k, .. }) if k == 7.0));
    }
}

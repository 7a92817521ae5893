//! Run configuration: a TOML file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use nhsw::adaptivity::DEFAULT_THRESHOLD;
use nhsw::{Criterion, CriterionKind, ScenarioKind, ScenarioOverrides, StepMode};

/// Overrides the output directory when neither the file nor a flag sets it.
pub const OUTPUT_ENV: &str = "NHSW_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Hydrostatic,
    Global,
    Adaptive,
}

impl FromStr for ModeName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hydrostatic" => Ok(ModeName::Hydrostatic),
            "global" => Ok(ModeName::Global),
            "adaptive" | "local" => Ok(ModeName::Adaptive),
            _ => bail!("unknown mode '{s}' (expected hydrostatic, global or adaptive)"),
        }
    }
}

impl fmt::Display for ModeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeName::Hydrostatic => "hydrostatic",
            ModeName::Global => "global",
            ModeName::Adaptive => "adaptive",
        })
    }
}

/// External measurements for one gauge (`t, eta`) or one snapshot (`x, eta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<f64>,
    pub path: PathBuf,
}

impl FromStr for ReferenceSpec {
    type Err = anyhow::Error;

    /// `gauge:0.61=path.csv` or `snapshot:1.806=path.csv`.
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (key, path) = s.split_once('=').context("reference must look like gauge:<x>=<file> or snapshot:<t>=<file>")?;
        let (kind, at) = key.split_once(':').context("reference key must be gauge:<x> or snapshot:<t>")?;
        let at: f64 = at.parse().with_context(|| format!("bad reference position '{at}'"))?;
        let path = PathBuf::from(path);
        match kind {
            "gauge" => Ok(ReferenceSpec {
                gauge: Some(at),
                snapshot: None,
                path,
            }),
            "snapshot" => Ok(ReferenceSpec {
                gauge: None,
                snapshot: Some(at),
                path,
            }),
            _ => bail!("reference kind must be 'gauge' or 'snapshot', got '{kind}'"),
        }
    }
}

/// Contents of a configuration file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<ScenarioKind>,
    pub mode: Option<ModeName>,
    pub criterion: Option<CriterionKind>,
    pub threshold: Option<f64>,
    pub enlarge: Option<bool>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paired: Option<bool>,
    pub masks: Option<bool>,
    pub repeats: Option<usize>,
    pub references: Vec<ReferenceSpec>,
    pub params: ScenarioOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().with_context(|| format!("bad number '{v}'")))
        .collect()
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file; flags take precedence over its keys.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// solitary, hammack_up, hammack_down or whittaker.
    #[arg(long)]
    pub scenario: Option<String>,
    /// hydrostatic, global or adaptive.
    #[arg(long)]
    pub mode: Option<String>,
    /// eta_over_d, eta_x, u, u_x, w or w_x.
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Flag one extra element on each side of flagged elements.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub enlarge: Option<bool>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub n_elements: Option<usize>,
    #[arg(long)]
    pub poly_order: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated gauge positions.
    #[arg(long)]
    pub gauges: Option<String>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    pub snapshot_times: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub froude: Option<f64>,
    #[arg(long)]
    pub slide_start: Option<f64>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Echoed in outputs; the numerics are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also run the global mode and report the loop-time ratio.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paired: Option<bool>,
    /// Write the per-step corrector ranges.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub masks: Option<bool>,
    /// Repeat each timed run and keep the fastest loop.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// gauge:<x>=<csv> or snapshot:<t>=<csv>; may be repeated.
    #[arg(long = "reference")]
    pub references: Vec<String>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub mode: ModeName,
    pub criterion: Option<CriterionKind>,
    pub threshold: f64,
    pub enlarge: bool,
    pub params: ScenarioOverrides,
    pub output: PathBuf,
    pub seed: u64,
    pub paired: bool,
    pub masks: bool,
    pub repeats: usize,
    pub references: Vec<ReferenceSpec>,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::merge(file, args, std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
    }

    pub fn merge(file: FileConfig, args: &RunArgs, env_output: Option<PathBuf>) -> anyhow::Result<Self> {
        let scenario = match &args.scenario {
            Some(s) => s.parse()?,
            None => file.scenario.unwrap_or(ScenarioKind::Solitary),
        };
        let mode = match &args.mode {
            Some(m) => m.parse()?,
            None => file.mode.unwrap_or(ModeName::Global),
        };
        let criterion = match &args.criterion {
            Some(c) => Some(c.parse()?),
            None => file.criterion,
        };
        let mut params = file.params;
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = args.$field {
                    params.$field = Some(v);
                }
            )*};
        }
        take!(dt, dx, n_elements, poly_order, t_end, amplitude, froude, slide_start);
        if let Some(g) = &args.gauges {
            params.gauges = Some(parse_list(g)?);
        }
        if let Some(t) = &args.snapshot_times {
            params.snapshot_times = Some(parse_list(t)?);
        }
        let mut references = file.references;
        for r in &args.references {
            references.push(r.parse()?);
        }
        let cfg = RunConfig {
            scenario,
            mode,
            criterion,
            threshold: args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD),
            enlarge: args.enlarge.or(file.enlarge).unwrap_or(false),
            params,
            output: args.output.clone().or(file.output).or(env_output).unwrap_or_else(|| PathBuf::from("nhsw-out")),
            seed: args.seed.or(file.seed).unwrap_or(0),
            paired: args.paired.or(file.paired).unwrap_or(false),
            masks: args.masks.or(file.masks).unwrap_or(mode == ModeName::Adaptive),
            repeats: args.repeats.or(file.repeats).unwrap_or(1),
            references,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.mode == ModeName::Adaptive && self.criterion.is_none() {
            bail!("mode = adaptive needs a criterion");
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            bail!("threshold must be positive, got {}", self.threshold);
        }
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        for r in &self.references {
            if r.gauge.is_some() == r.snapshot.is_some() {
                bail!("reference {} must name exactly one of gauge or snapshot", r.path.display());
            }
        }
        Ok(())
    }

    pub fn step_mode(&self) -> anyhow::Result<StepMode> {
        Ok(match self.mode {
            ModeName::Hydrostatic => StepMode::Hydrostatic,
            ModeName::Global => StepMode::Global,
            ModeName::Adaptive => {
                let kind = self.criterion.context("mode = adaptive needs a criterion")?;
                StepMode::Adaptive(Criterion::new(kind, self.threshold, self.enlarge)?)
            }
        })
    }

    /// One-line echo embedded in every output file.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

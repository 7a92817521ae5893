use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use log::info;
use serde::{Deserialize, Serialize};

use nhsw::metrics::{GaugeMetrics, SeriesMetrics, SeriesPair, SnapshotMetrics, TimingKey};
use nhsw::run::{simulate_best_of, solitary_error, RunFailure, RunOutput, Snapshot};
use nhsw::{BottomKind, Criterion, CriterionKind, Grid, RunOptions, RunReport, Scenario, StepMode};

use crate::config::{ReferenceSpec, RunConfig};
use crate::io;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error: error.into(),
        }
    }

    fn numerical(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            error: error.into(),
        }
    }

    /// I/O after a successful build of the run is neither a config nor a
    /// numerical problem, but scripts treat it like bad settings.
    fn io(error: anyhow::Error) -> Self {
        Self::config(error)
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// The document written to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub status: String,
    pub failure: Option<String>,
    pub report: RunReport,
}

struct LoadedReference {
    spec: ReferenceSpec,
    abscissa: Vec<f64>,
    eta: Vec<f64>,
}

/// Snapshots are taken at the nearest step, so a reference time only has to
/// fall within half a step of the requested one.
fn same_snapshot(scenario: &Scenario, requested: f64, reference: f64) -> bool {
    (requested - reference).abs() <= 0.5 * scenario.dt
}

fn load_references(cfg: &RunConfig, scenario: &Scenario) -> anyhow::Result<Vec<LoadedReference>> {
    let mut out = Vec::new();
    for spec in &cfg.references {
        if let Some(x) = spec.gauge {
            if !scenario.gauges.iter().any(|g| (g - x).abs() < 1e-9) {
                bail!("reference {} names gauge {x}, which is not among the run's gauges", spec.path.display());
            }
        }
        if let Some(t) = spec.snapshot {
            if !scenario.snapshot_times.iter().any(|&s| same_snapshot(scenario, s, t)) {
                bail!("reference {} names snapshot {t}, which is not among the run's snapshot times", spec.path.display());
            }
        }
        let (abscissa, eta) = io::read_pairs(&spec.path)?;
        out.push(LoadedReference {
            spec: spec.clone(),
            abscissa,
            eta,
        });
    }
    Ok(out)
}

/// Reference snapshots of the slide benchmark are given relative to the
/// initial slide centre.
fn snapshot_offset(scenario: &Scenario) -> f64 {
    match scenario.bathymetry.kind {
        BottomKind::WhittakerSlide { start, .. } => start,
        _ => 0.0,
    }
}

/// Surface profile with coincident interface nodes averaged.
fn continuous_profile(grid: &Grid, s: &Snapshot) -> (Vec<f64>, Vec<f64>) {
    let eta = s.eta();
    let mut xs: Vec<f64> = Vec::new();
    let mut vs: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (&x, &v) in grid.nodes().iter().zip(&eta) {
        match xs.last() {
            Some(&last) if (x - last).abs() <= 1e-12 * x.abs().max(1.0) => {
                *vs.last_mut().unwrap() += v;
                *counts.last_mut().unwrap() += 1.0;
            }
            _ => {
                xs.push(x);
                vs.push(v);
                counts.push(1.0);
            }
        }
    }
    for (v, c) in vs.iter_mut().zip(&counts) {
        *v /= c;
    }
    (xs, vs)
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Gauge and snapshot metrics against references, or against the paired
/// global run where no reference is given.
fn comparisons(
    scenario: &Scenario,
    grid: &Grid,
    out: &RunOutput,
    global: Option<&RunOutput>,
    refs: &[LoadedReference],
) -> anyhow::Result<(Vec<GaugeMetrics>, Vec<SnapshotMetrics>)> {
    let mut gauges = Vec::new();
    for (k, &x) in out.gauges.positions.iter().enumerate() {
        let mut matched = false;
        for r in refs.iter().filter(|r| r.spec.gauge.is_some_and(|g| (g - x).abs() < 1e-9)) {
            let pair = SeriesPair::aligned(&r.abscissa, &r.eta, &out.gauges.times, &out.gauges.eta[k])
                .with_context(|| format!("aligning gauge {x} with {}", r.spec.path.display()))?;
            gauges.push(GaugeMetrics {
                position: x,
                against: label(&r.spec.path),
                metrics: SeriesMetrics::of(&pair),
            });
            matched = true;
        }
        if let (false, Some(g)) = (matched, global) {
            let pair = SeriesPair::new(g.gauges.eta[k].clone(), out.gauges.eta[k].clone())?;
            gauges.push(GaugeMetrics {
                position: x,
                against: "global".into(),
                metrics: SeriesMetrics::of(&pair),
            });
        }
    }
    let mut snapshots = Vec::new();
    let offset = snapshot_offset(scenario);
    for (k, s) in out.snapshots.iter().enumerate() {
        let mut matched = false;
        for r in refs
            .iter()
            .filter(|r| r.spec.snapshot.is_some_and(|t| same_snapshot(scenario, s.requested_time, t)))
        {
            let (xs, vs) = continuous_profile(grid, s);
            let shifted: Vec<f64> = r.abscissa.iter().map(|x| x + offset).collect();
            let pair = SeriesPair::aligned(&shifted, &r.eta, &xs, &vs)
                .with_context(|| format!("aligning snapshot {} with {}", s.requested_time, r.spec.path.display()))?;
            snapshots.push(SnapshotMetrics {
                time: s.requested_time,
                against: label(&r.spec.path),
                metrics: SeriesMetrics::of(&pair),
            });
            matched = true;
        }
        if let (false, Some(g)) = (matched, global) {
            let pair = SeriesPair::new(g.snapshots[k].eta(), s.eta())?;
            snapshots.push(SnapshotMetrics {
                time: s.requested_time,
                against: "global".into(),
                metrics: SeriesMetrics::of(&pair),
            });
        }
    }
    Ok((gauges, snapshots))
}

fn timing_key(scenario: &Scenario, steps: usize) -> TimingKey {
    TimingKey {
        scenario: scenario.kind,
        grid: scenario.grid,
        dt: scenario.dt,
        steps,
        threads: 1,
    }
}

fn build_report(cfg: &RunConfig, scenario: &Scenario, grid: &Grid, mode: &StepMode, out: &RunOutput) -> RunReport {
    RunReport {
        config: cfg.echo(),
        timing_key: timing_key(scenario, scenario.n_steps()),
        mode: mode.name().into(),
        criterion: mode.criterion().copied(),
        loop_seconds: out.loop_time.as_secs_f64(),
        mean_flagged_fraction: out.mean_flagged_fraction,
        analytic: solitary_error(scenario, grid, out),
        gauges: Vec::new(),
        snapshots: Vec::new(),
        time_ratio: None,
        notes: scenario.notes.clone(),
    }
}

fn write_outputs(dir: &Path, echo: &str, grid: &Grid, out: &RunOutput, failure: Option<&str>) -> anyhow::Result<()> {
    io::write_gauges(&dir.join(io::GAUGES_FILE), echo, &out.gauges, failure)?;
    io::write_snapshot(&dir.join(io::SNAPSHOT_FILE), echo, grid, &out.last, failure)?;
    for (k, s) in out.snapshots.iter().enumerate() {
        io::write_snapshot(&dir.join(format!("snapshot_{k}.csv")), echo, grid, s, None)?;
    }
    if !out.masks.is_empty() {
        io::write_masks(&dir.join(io::MASKS_FILE), echo, &out.masks)?;
    }
    Ok(())
}

struct Prepared {
    scenario: Scenario,
    grid: Grid,
    refs: Vec<LoadedReference>,
}

fn prepare(cfg: &RunConfig) -> CmdResult<Prepared> {
    let scenario = Scenario::build(cfg.scenario, &cfg.params).map_err(Failure::config)?;
    let grid = Grid::new(scenario.grid).map_err(Failure::config)?;
    let refs = load_references(cfg, &scenario).map_err(Failure::config)?;
    std::fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating output directory {}", cfg.output.display()))
        .map_err(Failure::config)?;
    Ok(Prepared { scenario, grid, refs })
}

fn execute(cfg: &RunConfig, p: &Prepared, mode: StepMode, record_masks: bool) -> Result<RunOutput, Box<RunFailure>> {
    let options = RunOptions {
        record_masks,
        ..RunOptions::new(mode)
    };
    info!("{} run of {} ({} steps)", mode.name(), p.scenario.kind, p.scenario.n_steps());
    simulate_best_of(&p.scenario, &options, cfg.repeats).map_err(Box::new)
}

/// Flushes what a failed run produced and turns the failure into an exit.
fn report_failure(cfg: &RunConfig, p: &Prepared, mode: &StepMode, f: &RunFailure) -> Failure {
    let msg = f.to_string();
    let echo = cfg.echo();
    let _ = write_outputs(&cfg.output, &echo, &p.grid, &f.partial, Some(&msg));
    let mut report = build_report(cfg, &p.scenario, &p.grid, mode, &f.partial);
    report.analytic = None;
    let doc = ReportDocument {
        status: "failed".into(),
        failure: Some(msg.clone()),
        report,
    };
    let _ = io::write_json(&cfg.output.join(io::REPORT_FILE), &doc);
    let error = anyhow!(msg);
    if f.error.is_numerical() {
        Failure::numerical(error)
    } else {
        Failure::config(error)
    }
}

pub fn run(cfg: &RunConfig) -> CmdResult<RunReport> {
    let p = prepare(cfg)?;
    let mode = cfg.step_mode().map_err(Failure::config)?;
    let global = if cfg.paired && mode != StepMode::Global {
        match execute(cfg, &p, StepMode::Global, false) {
            Ok(g) => Some(g),
            Err(f) => return Err(report_failure(cfg, &p, &StepMode::Global, &f)),
        }
    } else {
        None
    };
    let record = cfg.masks && matches!(mode, StepMode::Adaptive(_));
    let out = execute(cfg, &p, mode, record).map_err(|f| report_failure(cfg, &p, &mode, &f))?;

    let echo = cfg.echo();
    write_outputs(&cfg.output, &echo, &p.grid, &out, None).map_err(Failure::io)?;
    let mut report = build_report(cfg, &p.scenario, &p.grid, &mode, &out);
    let (gauges, snapshots) = comparisons(&p.scenario, &p.grid, &out, global.as_ref(), &p.refs).map_err(Failure::config)?;
    report.gauges = gauges;
    report.snapshots = snapshots;
    if let Some(g) = &global {
        let mut greport = build_report(cfg, &p.scenario, &p.grid, &StepMode::Global, g);
        let (gg, gs) = comparisons(&p.scenario, &p.grid, g, None, &p.refs).map_err(Failure::config)?;
        greport.gauges = gg;
        greport.snapshots = gs;
        report.time_ratio = Some(nhsw::metrics::time_ratio(&report, &greport).map_err(Failure::config)?);
        let doc = ReportDocument {
            status: "ok".into(),
            failure: None,
            report: greport,
        };
        io::write_json(&cfg.output.join(io::GLOBAL_REPORT_FILE), &doc).map_err(Failure::io)?;
    }
    let doc = ReportDocument {
        status: "ok".into(),
        failure: None,
        report: report.clone(),
    };
    io::write_json(&cfg.output.join(io::REPORT_FILE), &doc).map_err(Failure::io)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMetrics {
    pub name: String,
    pub metrics: SeriesMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: PathBuf,
    pub b: PathBuf,
    /// `b` interpolated onto the sampling times of `a`.
    pub gauges: Vec<NamedMetrics>,
    /// Final water thickness `h` at matching nodes.
    pub snapshot_h: Option<SeriesMetrics>,
    /// Loop time of `a` over loop time of `b`.
    pub time_ratio: Option<f64>,
    pub notes: Vec<String>,
}

fn read_report(dir: &Path) -> Option<ReportDocument> {
    let text = std::fs::read_to_string(dir.join(io::REPORT_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn compare(a: &Path, b: &Path) -> CmdResult<Comparison> {
    let mut notes = Vec::new();
    let ga = io::read_table(&a.join(io::GAUGES_FILE)).map_err(Failure::config)?;
    let gb = io::read_table(&b.join(io::GAUGES_FILE)).map_err(Failure::config)?;
    let (ta, tb) = match (ga.column("t"), gb.column("t")) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Failure::config(anyhow!("gauge files need a 't' column"))),
    };
    let mut gauges = Vec::new();
    for name in ga.header.iter().filter(|h| h.starts_with("eta@")) {
        let Some(vb) = gb.column(name) else { continue };
        let va = ga.column(name).unwrap();
        let pair = SeriesPair::aligned(ta, va, tb, vb)
            .with_context(|| format!("gauge {name}"))
            .map_err(Failure::config)?;
        gauges.push(NamedMetrics {
            name: name.clone(),
            metrics: SeriesMetrics::of(&pair),
        });
    }

    let snapshot_h = match (
        io::read_table(&a.join(io::SNAPSHOT_FILE)),
        io::read_table(&b.join(io::SNAPSHOT_FILE)),
    ) {
        (Ok(sa), Ok(sb)) => match (sa.column("x"), sb.column("x"), sa.column("h"), sb.column("h")) {
            (Some(xa), Some(xb), Some(ha), Some(hb)) if xa == xb => {
                SeriesPair::new(ha.to_vec(), hb.to_vec()).ok().map(|p| SeriesMetrics::of(&p))
            }
            _ => {
                notes.push("snapshots are on different grids; not compared".into());
                None
            }
        },
        _ => None,
    };

    if gauges.is_empty() && snapshot_h.is_none() {
        return Err(Failure::config(anyhow!(
            "{} and {} share no gauge and no snapshot grid",
            a.display(),
            b.display()
        )));
    }

    let time_ratio = match (read_report(a), read_report(b)) {
        (Some(ra), Some(rb)) => match nhsw::metrics::time_ratio(&ra.report, &rb.report) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("no time ratio: {e}"));
                None
            }
        },
        _ => {
            notes.push("no time ratio: report.json missing".into());
            None
        }
    };
    Ok(Comparison {
        a: a.to_path_buf(),
        b: b.to_path_buf(),
        gauges,
        snapshot_h,
        time_ratio,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub criterion: CriterionKind,
    pub enlarge: bool,
    pub time_ratio: f64,
    pub mean_flagged_fraction: f64,
    pub analytic: Option<SeriesMetrics>,
    pub gauges: Vec<GaugeMetrics>,
    pub snapshots: Vec<SnapshotMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: String,
    pub global: Option<RunReport>,
    pub rows: Vec<SweepRow>,
}

pub fn sweep(cfg: &RunConfig, criteria: &[CriterionKind], enlarge: &[bool]) -> CmdResult<SweepTable> {
    let p = prepare(cfg)?;
    let mut table = SweepTable {
        config: cfg.echo(),
        global: None,
        rows: Vec::new(),
    };
    if criteria.is_empty() || enlarge.is_empty() {
        write_sweep(&cfg.output, &table).map_err(Failure::io)?;
        return Ok(table);
    }
    let global = execute(cfg, &p, StepMode::Global, false).map_err(|f| report_failure(cfg, &p, &StepMode::Global, &f))?;
    let mut greport = build_report(cfg, &p.scenario, &p.grid, &StepMode::Global, &global);
    let (gg, gs) = comparisons(&p.scenario, &p.grid, &global, None, &p.refs).map_err(Failure::config)?;
    greport.gauges = gg;
    greport.snapshots = gs;
    for &e in enlarge {
        for &kind in criteria {
            let mode = StepMode::Adaptive(Criterion::new(kind, cfg.threshold, e).map_err(Failure::config)?);
            let out = execute(cfg, &p, mode, false).map_err(|f| report_failure(cfg, &p, &mode, &f))?;
            let (gauges, snapshots) = comparisons(&p.scenario, &p.grid, &out, Some(&global), &p.refs).map_err(Failure::config)?;
            table.rows.push(SweepRow {
                criterion: kind,
                enlarge: e,
                time_ratio: out.loop_time.as_secs_f64() / global.loop_time.as_secs_f64(),
                mean_flagged_fraction: out.mean_flagged_fraction,
                analytic: solitary_error(&p.scenario, &p.grid, &out),
                gauges,
                snapshots,
            });
        }
    }
    table.global = Some(greport);
    write_sweep(&cfg.output, &table).map_err(Failure::io)?;
    Ok(table)
}

fn fmt_metrics(m: Option<&SeriesMetrics>) -> [String; 2] {
    match m {
        Some(m) => [
            m.rmse.to_string(),
            m.pearson.value().map_or_else(|| "degenerate".to_string(), |r| r.to_string()),
        ],
        None => [String::new(), String::new()],
    }
}

fn write_sweep(dir: &Path, table: &SweepTable) -> anyhow::Result<()> {
    io::write_json(&dir.join("sweep.json"), table)?;
    let path = dir.join("sweep.csv");
    let mut text = format!("# config: {}\n", table.config);
    let mut w = csv::Writer::from_writer(Vec::new());
    let first = table.rows.first();
    let mut header: Vec<String> = ["criterion", "enlarge", "time_ratio", "flagged", "rmse", "r"].map(String::from).to_vec();
    if let Some(row) = first {
        for g in &row.gauges {
            header.push(format!("rmse@{}", g.position));
            header.push(format!("r@{}", g.position));
        }
        for s in &row.snapshots {
            header.push(format!("rmse@t={}", s.time));
            header.push(format!("r@t={}", s.time));
        }
    }
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![
            row.criterion.to_string(),
            row.enlarge.to_string(),
            row.time_ratio.to_string(),
            row.mean_flagged_fraction.to_string(),
        ];
        rec.extend(fmt_metrics(row.analytic.as_ref()));
        for g in &row.gauges {
            rec.extend(fmt_metrics(Some(&g.metrics)));
        }
        for s in &row.snapshots {
            rec.extend(fmt_metrics(Some(&s.metrics)));
        }
        w.write_record(&rec)?;
    }
    text.push_str(&String::from_utf8(w.into_inner()?)?);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

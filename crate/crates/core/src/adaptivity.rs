//! Selection of the elements where the corrector runs, and the single time
//! step in hydrostatic, global or adaptive mode.
//!
//! Every criterion compares one nodal quantity of the predictor against the
//! same threshold `k`, whatever its units. An element is flagged when the
//! maximum over its nodes exceeds `k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bathymetry::{Bathymetry, BottomSamples};
use crate::corrector::{self, ElementRange, LdgFluxes};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, NodalField};
use crate::hydrostatic::{heun_step, Boundaries, PredictorBottom};
use crate::state::FlowState;
use crate::Physics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    EtaOverD,
    EtaX,
    U,
    Ux,
    W,
    Wx,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 6] = [
        CriterionKind::EtaOverD,
        CriterionKind::EtaX,
        CriterionKind::U,
        CriterionKind::Ux,
        CriterionKind::W,
        CriterionKind::Wx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::EtaOverD => "eta_over_d",
            CriterionKind::EtaX => "eta_x",
            CriterionKind::U => "u",
            CriterionKind::Ux => "u_x",
            CriterionKind::W => "w",
            CriterionKind::Wx => "w_x",
        }
    }

    /// The vertical-velocity criteria see nothing on a first step that
    /// starts from `hw ≡ 0`.
    pub fn needs_vertical_momentum(self) -> bool {
        matches!(self, CriterionKind::W | CriterionKind::Wx)
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '/'], "_");
        match key.as_str() {
            "eta_over_d" | "etaoverd" | "eta_d" => Ok(CriterionKind::EtaOverD),
            "eta_x" | "etax" => Ok(CriterionKind::EtaX),
            "u" => Ok(CriterionKind::U),
            "u_x" | "ux" => Ok(CriterionKind::Ux),
            "w" => Ok(CriterionKind::W),
            "w_x" | "wx" => Ok(CriterionKind::Wx),
            _ => Err(invalid(format!("unknown criterion '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub kind: CriterionKind,
    pub threshold: f64,
    pub enlarge: bool,
}

pub const DEFAULT_THRESHOLD: f64 = 0.001;

impl Criterion {
    pub fn new(kind: CriterionKind, threshold: f64, enlarge: bool) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(invalid(format!("criterion threshold must be positive, got {threshold}")));
        }
        Ok(Criterion {
            kind,
            threshold,
            enlarge,
        })
    }
}

/// Per-element flags and the maximal runs of flagged elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonHydroMask {
    flags: Vec<bool>,
    ranges: Vec<ElementRange>,
}

impl NonHydroMask {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let mut ranges = Vec::new();
        let mut start = None;
        for (e, &f) in flags.iter().enumerate() {
            match (f, start) {
                (true, None) => start = Some(e),
                (false, Some(s)) => {
                    ranges.push(ElementRange { start: s, end: e - 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            ranges.push(ElementRange {
                start: s,
                end: flags.len() - 1,
            });
        }
        NonHydroMask { flags, ranges }
    }

    pub fn empty(n_elements: usize) -> Self {
        Self::from_flags(vec![false; n_elements])
    }

    pub fn full(n_elements: usize) -> Self {
        Self::from_flags(vec![true; n_elements])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn ranges(&self) -> &[ElementRange] {
        &self.ranges
    }

    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.flags.is_empty() {
            0.0
        } else {
            self.n_flagged() as f64 / self.flags.len() as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Flags one extra element on either side of every flagged element.
    pub fn enlarged(&self) -> Self {
        let n = self.flags.len();
        let mut out = self.flags.clone();
        for (e, &f) in self.flags.iter().enumerate() {
            if f {
                if e > 0 {
                    out[e - 1] = true;
                }
                if e + 1 < n {
                    out[e + 1] = true;
                }
            }
        }
        Self::from_flags(out)
    }
}

/// Nodal values of the criterion quantity (before taking magnitudes).
pub fn criterion_quantity(grid: &Grid, predictor: &FlowState, bottom: &BottomSamples, kind: CriterionKind) -> Vec<f64> {
    let h = predictor.h.values();
    let ratio = |m: &[f64]| -> Vec<f64> { m.iter().zip(h).map(|(m, h)| m / h).collect() };
    let derivative = |v: Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        grid.derivative_into(&v, &mut out);
        out
    };
    let eta = || -> Vec<f64> { h.iter().zip(&bottom.d).map(|(h, d)| h - d).collect() };
    match kind {
        CriterionKind::EtaOverD => eta().iter().zip(&bottom.d).map(|(e, d)| e / d).collect(),
        CriterionKind::EtaX => derivative(eta()),
        CriterionKind::U => ratio(predictor.hu.values()),
        CriterionKind::Ux => derivative(ratio(predictor.hu.values())),
        CriterionKind::W => ratio(predictor.hw.values()),
        CriterionKind::Wx => derivative(ratio(predictor.hw.values())),
    }
}

pub fn evaluate_criterion(grid: &Grid, predictor: &FlowState, bottom: &BottomSamples, criterion: &Criterion) -> NonHydroMask {
    let q = criterion_quantity(grid, predictor, bottom, criterion.kind);
    let flags = q
        .chunks(grid.np())
        .map(|el| el.iter().fold(0.0f64, |m, v| m.max(v.abs())) > criterion.threshold)
        .collect();
    let mask = NonHydroMask::from_flags(flags);
    if criterion.enlarge {
        mask.enlarged()
    } else {
        mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepMode {
    Hydrostatic,
    Global,
    Adaptive(Criterion),
}

impl StepMode {
    pub fn name(&self) -> &'static str {
        match self {
            StepMode::Hydrostatic => "hydrostatic",
            StepMode::Global => "global",
            StepMode::Adaptive(_) => "adaptive",
        }
    }

    pub fn criterion(&self) -> Option<&Criterion> {
        match self {
            StepMode::Adaptive(c) => Some(c),
            _ => None,
        }
    }
}

/// Fixed ingredients of a time step.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub grid: &'a Grid,
    pub bathymetry: &'a Bathymetry,
    pub boundaries: Boundaries,
    pub physics: Physics,
    pub fluxes: LdgFluxes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FlowState,
    /// Non-hydrostatic pressure, zero where the corrector did not run.
    pub pressure: NodalField,
    pub mask: NonHydroMask,
}

/// Bottom samples at both ends of a step.
#[derive(Debug, Clone)]
pub struct StepBottom {
    pub now: BottomSamples,
    pub next: BottomSamples,
}

impl StepBottom {
    pub fn sample(grid: &Grid, bathymetry: &Bathymetry, t: f64, dt: f64) -> Self {
        let now = bathymetry.sample_grid(grid, t);
        let next = if bathymetry.is_static() {
            BottomSamples { time: t + dt, ..now.clone() }
        } else {
            bathymetry.sample_grid(grid, t + dt)
        };
        StepBottom { now, next }
    }
}

/// Predictor followed by the corrector on the ranges chosen by `mode`.
/// `force_global` turns an adaptive step into a global one.
pub fn adaptive_step_with(
    ctx: &StepContext<'_>,
    state: &FlowState,
    dt: f64,
    bottom: &StepBottom,
    mode: &StepMode,
    force_global: bool,
) -> Result<StepOutcome> {
    let grid = ctx.grid;
    let g = ctx.physics.gravity;
    let pb_now = PredictorBottom::new(grid, &bottom.now);
    let pb_next = PredictorBottom::new(grid, &bottom.next);
    let predictor = heun_step(grid, state, dt, &pb_now, &pb_next, &ctx.boundaries, g)?;
    let n = grid.n_elements();
    let mask = match (mode, force_global) {
        (StepMode::Hydrostatic, _) => NonHydroMask::empty(n),
        (StepMode::Global, _) | (StepMode::Adaptive(_), true) => NonHydroMask::full(n),
        (StepMode::Adaptive(c), false) => evaluate_criterion(grid, &predictor, &bottom.next, c),
    };
    let mut out = predictor.clone();
    let mut pressure = NodalField::zeros(*grid.spec());
    for &range in mask.ranges() {
        let coeffs = corrector::assemble_coefficients(grid, &predictor, &bottom.next, &ctx.boundaries, dt, &ctx.physics, range)?;
        let sol = corrector::ldg_solve(grid, &coeffs, range, &ctx.fluxes)?;
        corrector::apply_correction(grid, &mut out, &coeffs, &sol);
        let np = grid.np();
        pressure.values_mut()[range.start * np..(range.end + 1) * np].copy_from_slice(&sol.p);
    }
    Ok(StepOutcome {
        state: out,
        pressure,
        mask,
    })
}

/// One step from scratch. `first_step` applies the rule that the W and Wx
/// criteria start globally when the run begins with `hw ≡ 0`.
pub fn adaptive_step(
    ctx: &StepContext<'_>,
    state: &FlowState,
    dt: f64,
    mode: &StepMode,
    first_step: bool,
) -> Result<StepOutcome> {
    let bottom = StepBottom::sample(ctx.grid, ctx.bathymetry, state.time, dt);
    let force = first_step && starts_globally(mode, state);
    adaptive_step_with(ctx, state, dt, &bottom, mode, force)
}

pub fn starts_globally(mode: &StepMode, initial: &FlowState) -> bool {
    matches!(mode, StepMode::Adaptive(c) if c.kind.needs_vertical_momentum()) && initial.vertical_momentum_is_zero()
}

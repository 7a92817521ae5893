//! Benchmark set-ups: a solitary wave over a flat bottom, Hammack's
//! impulsively moved plate, and Whittaker's submerged slide.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bathymetry::{Bathymetry, SlideMotion};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridSpec, NodalField};
use crate::hydrostatic::{Boundaries, BoundaryKind};
use crate::state::FlowState;
use crate::Physics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Solitary,
    HammackUp,
    HammackDown,
    Whittaker,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Solitary => "solitary",
            ScenarioKind::HammackUp => "hammack_up",
            ScenarioKind::HammackDown => "hammack_down",
            ScenarioKind::Whittaker => "whittaker",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "solitary" => Ok(ScenarioKind::Solitary),
            "hammack_up" | "hammack" => Ok(ScenarioKind::HammackUp),
            "hammack_down" => Ok(ScenarioKind::HammackDown),
            "whittaker" => Ok(ScenarioKind::Whittaker),
            _ => Err(invalid(format!("unknown scenario '{s}'"))),
        }
    }
}

/// Travelling solitary wave of amplitude `a` on depth `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitaryWave {
    pub amplitude: f64,
    pub depth: f64,
    pub x0: f64,
    pub gravity: f64,
}

impl SolitaryWave {
    pub fn celerity(&self) -> f64 {
        (self.gravity * (self.depth + self.amplitude)).sqrt()
    }

    pub fn wavenumber(&self) -> f64 {
        let (a, d) = (self.amplitude, self.depth);
        (3.0 * a / (4.0 * d * d * (d + a))).sqrt()
    }

    /// Surface elevation and depth-averaged velocity.
    pub fn exact(&self, x: f64, t: f64) -> (f64, f64) {
        solitary_exact(x, t, self.amplitude, self.depth, self.x0, self.gravity)
    }

    /// `∂u/∂x` of the exact profile.
    pub fn velocity_slope(&self, x: f64, t: f64) -> f64 {
        let (a, d) = (self.amplitude, self.depth);
        let c = self.celerity();
        let k = self.wavenumber();
        let arg = k * (x - c * t - self.x0);
        let sech2 = 1.0 / arg.cosh().powi(2);
        let eta = a * sech2;
        let eta_x = -2.0 * a * k * sech2 * arg.tanh();
        c * d * eta_x / (d + eta).powi(2)
    }
}

pub fn solitary_exact(x: f64, t: f64, a: f64, d: f64, x0: f64, g: f64) -> (f64, f64) {
    let c = (g * (d + a)).sqrt();
    let k = (3.0 * a / (4.0 * d * d * (d + a))).sqrt();
    let eta = a / (k * (x - c * t - x0)).cosh().powi(2);
    (eta, c * eta / (d + eta))
}

/// One row of the slide-kinematics table, keyed by Froude number.
pub fn whittaker_motion(froude: f64) -> Result<SlideMotion> {
    let rows = [
        (0.125, 0.163, 0.109, 2.109, 2.218),
        (0.25, 0.327, 0.218, 2.218, 2.436),
        (0.375, 0.491, 0.327, 2.327, 2.654),
    ];
    let row = rows
        .iter()
        .find(|r| (r.0 - froude).abs() < 1e-9)
        .ok_or_else(|| invalid(format!("no slide motion for Froude number {froude}; use 0.125, 0.25 or 0.375")))?;
    SlideMotion::new(1.5, row.1, row.2, row.3, row.4)
}

/// Values that replace a scenario's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub n_elements: Option<usize>,
    pub dx: Option<f64>,
    pub poly_order: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub gauges: Option<Vec<f64>>,
    pub snapshot_times: Option<Vec<f64>>,
    /// Solitary wave amplitude.
    pub amplitude: Option<f64>,
    /// Whittaker slide row.
    pub froude: Option<f64>,
    /// Whittaker initial slide centre.
    pub slide_start: Option<f64>,
}

/// Everything needed to run one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub gauges: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub bathymetry: Bathymetry,
    pub boundaries: Boundaries,
    pub physics: Physics,
    pub solitary: Option<SolitaryWave>,
    pub froude: Option<f64>,
    /// Choices not fixed by the benchmark definitions, echoed in reports.
    pub notes: Vec<String>,
}

pub const HAMMACK_DEPTH: f64 = 0.05;
pub const HAMMACK_STROKE: f64 = 0.005;
pub const HAMMACK_HALF_WIDTH: f64 = 0.61;
pub const HAMMACK_GAUGES: [f64; 4] = [0.61, 1.61, 9.61, 20.61];
pub const WHITTAKER_DEPTH: f64 = 0.175;
pub const WHITTAKER_HEIGHT: f64 = 0.026;
pub const WHITTAKER_LENGTH: f64 = 0.5;

/// `t_c` of the plate motion for an uplift (`up`) or a downdraft.
pub fn hammack_time_constant(up: bool, gravity: f64) -> f64 {
    let factor = if up { 0.148 } else { 0.093 };
    factor * HAMMACK_HALF_WIDTH / (gravity * HAMMACK_DEPTH).sqrt()
}

/// Comparison time `8 / √(g / Ls)` of the slide benchmark.
pub fn whittaker_snapshot_time(gravity: f64) -> f64 {
    8.0 / (gravity / WHITTAKER_LENGTH).sqrt()
}

fn grid_spec(x_left: f64, length: f64, default_n: usize, o: &ScenarioOverrides) -> Result<GridSpec> {
    let p = o.poly_order.unwrap_or(1);
    let n = match (o.n_elements, o.dx) {
        (Some(n), _) => n,
        (None, Some(dx)) => {
            if !(dx > 0.0) {
                return Err(invalid(format!("dx must be positive, got {dx}")));
            }
            let n = (length / dx).round();
            if n < 1.0 || (n * dx - length).abs() > 1e-9 * length {
                return Err(invalid(format!("dx = {dx} does not divide the domain length {length}")));
            }
            n as usize
        }
        (None, None) => default_n,
    };
    GridSpec::new(x_left, x_left + length, n, p)
}

impl Scenario {
    pub fn build(kind: ScenarioKind, overrides: &ScenarioOverrides) -> Result<Self> {
        match kind {
            ScenarioKind::Solitary => Self::solitary(overrides),
            ScenarioKind::HammackUp => Self::hammack(true, overrides),
            ScenarioKind::HammackDown => Self::hammack(false, overrides),
            ScenarioKind::Whittaker => Self::whittaker(overrides),
        }
    }

    pub fn solitary(o: &ScenarioOverrides) -> Result<Self> {
        let physics = Physics::default();
        let length = 800.0;
        let wave = SolitaryWave {
            amplitude: o.amplitude.unwrap_or(2.0),
            depth: 10.0,
            x0: length / 4.0,
            gravity: physics.gravity,
        };
        if !(wave.amplitude > 0.0) {
            return Err(invalid("solitary amplitude must be positive"));
        }
        Self {
            kind: ScenarioKind::Solitary,
            grid: grid_spec(0.0, length, 200, o)?,
            dt: o.dt.unwrap_or(0.1),
            t_end: o.t_end.unwrap_or(30.0),
            gauges: o.gauges.clone().unwrap_or_else(|| vec![400.0, 500.0]),
            snapshot_times: o.snapshot_times.clone().unwrap_or_default(),
            bathymetry: Bathymetry::flat(wave.depth)?,
            boundaries: Boundaries::walls(),
            physics,
            solitary: Some(wave),
            froude: None,
            notes: vec!["walls at both ends; the wave stays clear of them until t_end".into()],
        }
        .validated()
    }

    pub fn hammack(up: bool, o: &ScenarioOverrides) -> Result<Self> {
        let physics = Physics::default();
        let t_c = hammack_time_constant(up, physics.gravity);
        let stroke = if up { HAMMACK_STROKE } else { -HAMMACK_STROKE };
        // The left wall sits at x = 0.01 so with dx = 0.025 the plate edge
        // and all gauges fall on element interfaces.
        let x_left = 0.01;
        Self {
            kind: if up { ScenarioKind::HammackUp } else { ScenarioKind::HammackDown },
            grid: grid_spec(x_left, 25.0, 1000, o)?,
            dt: o.dt.unwrap_or(0.01),
            t_end: o.t_end.unwrap_or(40.0),
            gauges: o.gauges.clone().unwrap_or_else(|| HAMMACK_GAUGES.to_vec()),
            snapshot_times: o.snapshot_times.clone().unwrap_or_default(),
            bathymetry: Bathymetry::hammack(HAMMACK_DEPTH, stroke, HAMMACK_HALF_WIDTH, t_c)?,
            boundaries: Boundaries::new(BoundaryKind::Wall, BoundaryKind::Absorbing),
            physics,
            solitary: None,
            froude: None,
            notes: vec![
                "domain [0.01, 25.01] m, wall at the left end mirrors the plate".into(),
                "absorbing right end, t_end = 40 s".into(),
            ],
        }
        .validated()
    }

    pub fn whittaker(o: &ScenarioOverrides) -> Result<Self> {
        let physics = Physics::default();
        let froude = o.froude.unwrap_or(0.25);
        let motion = whittaker_motion(froude)?;
        let start = o.slide_start.unwrap_or(5.0);
        let t_star = whittaker_snapshot_time(physics.gravity);
        Self {
            kind: ScenarioKind::Whittaker,
            grid: grid_spec(0.0, 15.0, 200, o)?,
            dt: o.dt.unwrap_or(0.005),
            t_end: o.t_end.unwrap_or(t_star),
            gauges: o.gauges.clone().unwrap_or_default(),
            snapshot_times: o.snapshot_times.clone().unwrap_or_else(|| vec![t_star]),
            bathymetry: Bathymetry::whittaker(WHITTAKER_DEPTH, WHITTAKER_HEIGHT, WHITTAKER_LENGTH, start, motion)?,
            boundaries: Boundaries::absorbing(),
            physics,
            solitary: None,
            froude: Some(froude),
            notes: vec![
                format!("domain [0, 15] m, slide centre starts at x = {start} m"),
                "absorbing ends; snapshots at the step nearest to each requested time".into(),
            ],
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        self.grid.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid(format!("end time must be positive, got {}", self.t_end)));
        }
        for &x in &self.gauges {
            if !(self.grid.x_left <= x && x <= self.grid.x_right) {
                return Err(invalid(format!(
                    "gauge x = {x} outside the domain [{}, {}]",
                    self.grid.x_left, self.grid.x_right
                )));
            }
        }
        for &t in &self.snapshot_times {
            if !(0.0 <= t && t <= self.t_end + 0.5 * self.dt) {
                return Err(invalid(format!("snapshot time {t} outside [0, {}]", self.t_end)));
            }
        }
        Ok(self)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Still water, except for the solitary wave.
    pub fn initial_state(&self, grid: &Grid) -> Result<FlowState> {
        let spec = *grid.spec();
        if let Some(wave) = self.solitary {
            let d = wave.depth;
            let h = grid.project(|x| d + wave.exact(x, 0.0).0)?;
            let hu = grid.project(|x| {
                let (eta, u) = wave.exact(x, 0.0);
                (d + eta) * u
            })?;
            // Flat, static bottom: the divergence constraint reduces to
            // w = −h u_x / 2.
            let hw = grid.project(|x| {
                let h = d + wave.exact(x, 0.0).0;
                -0.5 * h * h * wave.velocity_slope(x, 0.0)
            })?;
            return FlowState::new(h, hu, hw, 0.0);
        }
        let d = self.bathymetry.sample_grid(grid, 0.0).d;
        FlowState::new(
            NodalField::from_values(spec, d)?,
            NodalField::zeros(spec),
            NodalField::zeros(spec),
            0.0,
        )
    }
}

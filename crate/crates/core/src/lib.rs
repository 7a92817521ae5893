//! One-dimensional non-hydrostatic shallow water solver.
//!
//! A hydrostatic RKDG predictor advances `(h, hu, hw)`; a corrector then
//! solves a first-order elliptic system for the depth-averaged
//! non-hydrostatic pressure with the local discontinuous Galerkin method and
//! updates both momenta. The corrector can run on the whole domain or only
//! on sub-domains flagged by a predictor-based criterion.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptivity;
pub mod banded;
pub mod bathymetry;
pub mod corrector;
pub mod error;
pub mod grid;
pub mod hydrostatic;
pub mod metrics;
pub mod run;
pub mod scenarios;
pub mod state;

pub use adaptivity::{Criterion, CriterionKind, NonHydroMask, StepContext, StepMode, StepOutcome};
pub use bathymetry::{Bathymetry, BottomKind, BottomSamples, DepthSample, SlideMotion, SlideState};
pub use corrector::{ElementRange, EllipticCoefficients, LdgFluxes, PressureSolution};
pub use error::{Error, Result};
pub use grid::{GhostRule, Grid, GridSpec, NodalField, Side, Trace};
pub use hydrostatic::{Boundaries, BoundaryCondition, BoundaryKind, Conserved};
pub use metrics::{Correlation, RunReport, SeriesMetrics, SeriesPair, TimingKey};
pub use run::{RunFailure, RunOptions, RunOutput, Snapshot};
pub use scenarios::{Scenario, ScenarioKind, ScenarioOverrides, SolitaryWave};
pub use state::FlowState;

use serde::{Deserialize, Serialize};

/// Gravitational acceleration and water density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub gravity: f64,
    pub density: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            gravity: 9.81,
            density: 1000.0,
        }
    }
}

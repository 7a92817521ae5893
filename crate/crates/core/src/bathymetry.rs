//! Time-dependent still-water depth `d(x, t)` and its derivatives.
//!
//! Depth is measured positive downward from the still-water level, so the
//! bottom sits at `z = −d` and the water thickness is `h = η + d`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;

/// Depth and the derivative channels needed by the pressure closure.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DepthSample {
    pub d: f64,
    pub d_x: f64,
    pub d_t: f64,
    pub d_tt: f64,
    pub d_xt: f64,
    pub d_xx: f64,
}

impl DepthSample {
    fn at_rest(d: f64) -> Self {
        DepthSample {
            d,
            ..Default::default()
        }
    }
}

/// Slide kinematics: displacement, velocity, acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlideState {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Accelerate / cruise / decelerate / rest motion of a sliding block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlideMotion {
    pub a0: f64,
    pub u_t: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl SlideMotion {
    pub fn new(a0: f64, u_t: f64, t1: f64, t2: f64, t3: f64) -> Result<Self> {
        if !(0.0 < t1 && t1 < t2 && t2 < t3) {
            return Err(invalid(format!(
                "slide times must satisfy 0 < t1 < t2 < t3, got {t1}, {t2}, {t3}"
            )));
        }
        if !(a0 > 0.0 && u_t > 0.0) {
            return Err(invalid("slide acceleration and terminal speed must be positive"));
        }
        Ok(SlideMotion { a0, u_t, t1, t2, t3 })
    }

    pub fn state(&self, t: f64) -> SlideState {
        let SlideMotion { a0, u_t, t1, t2, t3 } = *self;
        let t = t.max(0.0);
        let s1 = 0.5 * a0 * t1 * t1;
        if t <= t1 {
            SlideState {
                position: 0.5 * a0 * t * t,
                velocity: a0 * t,
                acceleration: a0,
            }
        } else if t <= t2 {
            SlideState {
                position: s1 + u_t * (t - t1),
                velocity: u_t,
                acceleration: 0.0,
            }
        } else if t <= t3 {
            SlideState {
                position: s1 + u_t * (t - t1) - 0.5 * a0 * (t - t2).powi(2),
                velocity: u_t - a0 * (t - t2),
                acceleration: -a0,
            }
        } else {
            SlideState {
                position: s1 + u_t * (t3 - t1) - 0.5 * a0 * (t3 - t2).powi(2),
                velocity: 0.0,
                acceleration: 0.0,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BottomKind {
    Flat,
    /// Plate of half-width `b` around `x = 0` moving vertically by `zeta0`
    /// (positive is uplift) with rate `alpha = 1.11 / t_c`.
    HammackPlate {
        zeta0: f64,
        b: f64,
        t_c: f64,
        alpha: f64,
    },
    /// Quartic bump of height `height` and length `length` whose centre sits
    /// at `start + S(t)`.
    WhittakerSlide {
        height: f64,
        length: f64,
        start: f64,
        motion: SlideMotion,
    },
}

/// Bottom geometry with still-water depth `h0` far from any moving part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bathymetry {
    pub still_depth: f64,
    pub kind: BottomKind,
}

// Points closer than this (relative) to a geometric discontinuity take the
// value from the side of `toward`.
const EDGE_TOL: f64 = 1e-12;

impl Bathymetry {
    pub fn flat(h0: f64) -> Result<Self> {
        positive("still depth", h0)?;
        Ok(Bathymetry {
            still_depth: h0,
            kind: BottomKind::Flat,
        })
    }

    pub fn hammack(h0: f64, zeta0: f64, b: f64, t_c: f64) -> Result<Self> {
        positive("still depth", h0)?;
        positive("plate half-width", b)?;
        positive("characteristic time", t_c)?;
        if !(zeta0.abs() < h0) {
            return Err(invalid(format!("|zeta0| = {} must be below h0 = {h0}", zeta0.abs())));
        }
        Ok(Bathymetry {
            still_depth: h0,
            kind: BottomKind::HammackPlate {
                zeta0,
                b,
                t_c,
                alpha: 1.11 / t_c,
            },
        })
    }

    pub fn whittaker(h0: f64, height: f64, length: f64, start: f64, motion: SlideMotion) -> Result<Self> {
        positive("slide height", height)?;
        positive("slide length", length)?;
        if !(h0 > height) {
            return Err(invalid(format!("still depth {h0} must exceed slide height {height}")));
        }
        Ok(Bathymetry {
            still_depth: h0,
            kind: BottomKind::WhittakerSlide {
                height,
                length,
                start,
                motion,
            },
        })
    }

    /// True when the bottom never moves, so samples can be reused.
    pub fn is_static(&self) -> bool {
        matches!(self.kind, BottomKind::Flat)
    }

    pub fn sample(&self, x: f64, t: f64) -> DepthSample {
        self.sample_toward(x, t, x)
    }

    /// Like [`sample`](Self::sample), but a point lying on a discontinuity
    /// of the bottom takes the one-sided value from the side containing
    /// `toward`.
    pub fn sample_toward(&self, x: f64, t: f64, toward: f64) -> DepthSample {
        let h0 = self.still_depth;
        match self.kind {
            BottomKind::Flat => DepthSample::at_rest(h0),
            BottomKind::HammackPlate { zeta0, b, alpha, .. } => {
                let b2 = b * b;
                let gap = b2 - x * x;
                let inside = if gap.abs() <= EDGE_TOL * b2 {
                    toward * toward < b2
                } else {
                    gap > 0.0
                };
                if !inside || t <= 0.0 {
                    return DepthSample::at_rest(h0);
                }
                let decay = (-alpha * t).exp();
                DepthSample {
                    d: h0 - zeta0 * (1.0 - decay),
                    d_x: 0.0,
                    d_t: -zeta0 * alpha * decay,
                    d_tt: zeta0 * alpha * alpha * decay,
                    d_xt: 0.0,
                    d_xx: 0.0,
                }
            }
            BottomKind::WhittakerSlide {
                height,
                length,
                start,
                motion,
            } => {
                let slide = motion.state(t);
                let center = start + slide.position;
                let half = 0.5 * length;
                let offset = x - center;
                let edge = offset.abs() - half;
                let inside = if edge.abs() <= EDGE_TOL * half {
                    (toward - center).abs() < half
                } else {
                    edge < 0.0
                };
                if !inside {
                    return DepthSample::at_rest(h0);
                }
                let xi = 2.0 * offset / length;
                let xi2 = xi * xi;
                let d = h0 - height * (1.0 - xi2 * xi2);
                let d_x = 8.0 * height * xi2 * xi / length;
                let d_xx = 48.0 * height * xi2 / (length * length);
                let v = slide.velocity;
                DepthSample {
                    d,
                    d_x,
                    d_t: -d_x * v,
                    d_tt: d_xx * v * v - d_x * slide.acceleration,
                    d_xt: -d_xx * v,
                    d_xx,
                }
            }
        }
    }

    /// Samples at every grid node, evaluating element-end nodes one-sidedly
    /// from their own element.
    pub fn sample_grid(&self, grid: &Grid, t: f64) -> BottomSamples {
        let np = grid.np();
        let n = grid.nodes().len();
        let mut out = BottomSamples::with_len(n, t);
        for (i, &x) in grid.nodes().iter().enumerate() {
            let s = self.sample_toward(x, t, grid.element_center(i / np));
            out.d[i] = s.d;
            out.d_x[i] = s.d_x;
            out.d_t[i] = s.d_t;
            out.d_tt[i] = s.d_tt;
            out.d_xt[i] = s.d_xt;
            out.d_xx[i] = s.d_xx;
        }
        out
    }
}

/// Structure-of-arrays bottom samples on the grid nodes at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct BottomSamples {
    pub time: f64,
    pub d: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_t: Vec<f64>,
    pub d_tt: Vec<f64>,
    pub d_xt: Vec<f64>,
    pub d_xx: Vec<f64>,
}

impl BottomSamples {
    fn with_len(n: usize, time: f64) -> Self {
        BottomSamples {
            time,
            d: vec![0.0; n],
            d_x: vec![0.0; n],
            d_t: vec![0.0; n],
            d_tt: vec![0.0; n],
            d_xt: vec![0.0; n],
            d_xx: vec![0.0; n],
        }
    }

    pub fn node(&self, i: usize) -> DepthSample {
        DepthSample {
            d: self.d[i],
            d_x: self.d_x[i],
            d_t: self.d_t[i],
            d_tt: self.d_tt[i],
            d_xt: self.d_xt[i],
            d_xx: self.d_xx[i],
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

//! Hydrostatic predictor: RKDG discretisation of the shallow water system
//! with vertical momentum carried as a passive tracer, Rusanov interface
//! fluxes and Heun time stepping.
//!
//! The momentum flux is split as `hu²/h + g(h² − d²)/2` with source
//! `g(h − d) d_x`, which is algebraically the same system as
//! `hu²/h + g h²/2` with source `g h d_x` but balances a lake at rest node
//! by node. Interfaces use hydrostatic reconstruction, so a bottom that
//! jumps across an element boundary exerts its pressure force there.

use serde::{Deserialize, Serialize};

use crate::bathymetry::BottomSamples;
use crate::error::Result;
use crate::grid::{GhostRule, Grid, NodalField, Side};
use crate::state::{check_depth, FlowState};

/// Components `(h, hu, hw)`.
pub type Conserved = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Reflecting wall: ghost mirrors `h` and `hw`, negates `hu`.
    Wall,
    /// Zero-gradient outflow: ghost copies the inner trace.
    Absorbing,
}

impl BoundaryKind {
    pub fn momentum_rule(self) -> GhostRule {
        match self {
            BoundaryKind::Wall => GhostRule::Negate,
            BoundaryKind::Absorbing => GhostRule::Copy,
        }
    }

    pub fn ghost(self, q: Conserved) -> Conserved {
        [q[0], self.momentum_rule().apply(q[1]), q[2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub side: Side,
    pub kind: BoundaryKind,
}

/// Boundary conditions at both domain ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundaries {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
}

impl Boundaries {
    pub fn new(left: BoundaryKind, right: BoundaryKind) -> Self {
        Boundaries { left, right }
    }

    pub fn walls() -> Self {
        Self::new(BoundaryKind::Wall, BoundaryKind::Wall)
    }

    pub fn absorbing() -> Self {
        Self::new(BoundaryKind::Absorbing, BoundaryKind::Absorbing)
    }

    pub fn at(&self, side: Side) -> BoundaryCondition {
        let kind = match side {
            Side::Left => self.left,
            Side::Right => self.right,
        };
        BoundaryCondition { side, kind }
    }
}

/// `F(q) = (hu, hu²/h + g h²/2, hu·hw/h)`. Requires `h > 0`.
pub fn physical_flux(q: Conserved, g: f64) -> Conserved {
    let [h, hu, hw] = q;
    debug_assert!(h > 0.0);
    let u = hu / h;
    [hu, hu * u + 0.5 * g * h * h, u * hw]
}

fn wave_speed(q: Conserved, g: f64) -> f64 {
    if q[0] > 0.0 {
        (q[1] / q[0]).abs() + (g * q[0]).sqrt()
    } else {
        0.0
    }
}

/// Rusanov (local Lax-Friedrichs) flux between a left and a right state.
pub fn rusanov_flux(ql: Conserved, qr: Conserved, g: f64) -> Conserved {
    let fl = physical_flux(ql, g);
    let fr = physical_flux(qr, g);
    let lambda = wave_speed(ql, g).max(wave_speed(qr, g));
    [0, 1, 2].map(|k| 0.5 * (fl[k] + fr[k]) - 0.5 * lambda * (qr[k] - ql[k]))
}

/// Bottom depth as seen by the predictor: nodal values plus the
/// element-local derivative of their interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorBottom {
    pub time: f64,
    pub d: Vec<f64>,
    pub d_x: Vec<f64>,
}

impl PredictorBottom {
    pub fn new(grid: &Grid, samples: &BottomSamples) -> Self {
        let mut d_x = vec![0.0; samples.d.len()];
        grid.derivative_into(&samples.d, &mut d_x);
        PredictorBottom {
            time: samples.time,
            d: samples.d.clone(),
            d_x,
        }
    }
}

/// Time derivative of each conserved component at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub h: Vec<f64>,
    pub hu: Vec<f64>,
    pub hw: Vec<f64>,
}

/// Fluxes seen by the element left and right of one interface; they differ
/// only in the momentum component when the bottom jumps.
#[derive(Clone, Copy, Default)]
struct InterfaceFlux {
    to_left: Conserved,
    to_right: Conserved,
}

fn interface_flux(ql: Conserved, dl: f64, qr: Conserved, dr: f64, g: f64) -> InterfaceFlux {
    let d_star = dl.min(dr);
    let hl = (ql[0] - dl + d_star).max(0.0);
    let hr = (qr[0] - dr + d_star).max(0.0);
    let scale = |q: Conserved, h: f64| [h, q[1] / q[0] * h, q[2] / q[0] * h];
    let ql_star = scale(ql, hl);
    let qr_star = scale(qr, hr);
    let f = if hl > 0.0 && hr > 0.0 {
        rusanov_flux(ql_star, qr_star, g)
    } else {
        // Degenerate reconstruction; only reachable for dry states.
        let lambda = wave_speed(ql_star, g).max(wave_speed(qr_star, g));
        [0, 1, 2].map(|k| -0.5 * lambda * (qr_star[k] - ql_star[k]))
    };
    // Momentum flux minus the g d²/2 part carried by the split form.
    let left_hu = (f[1] - 0.5 * g * hl * hl) + 0.5 * g * (ql[0] - dl) * (ql[0] + dl);
    let right_hu = (f[1] - 0.5 * g * hr * hr) + 0.5 * g * (qr[0] - dr) * (qr[0] + dr);
    InterfaceFlux {
        to_left: [f[0], left_hu, f[2]],
        to_right: [f[0], right_hu, f[2]],
    }
}

/// Semi-discrete right-hand side `H(Q)` of the hydrostatic system.
pub fn rhs_operator(
    grid: &Grid,
    state: &FlowState,
    bottom: &PredictorBottom,
    bcs: &Boundaries,
    g: f64,
) -> Result<Tendency> {
    let np = grid.np();
    let n = grid.n_elements();
    let h = state.h.values();
    let hu = state.hu.values();
    let hw = state.hw.values();
    check_depth(h, np, state.time)?;
    let d = &bottom.d;

    let node = |i: usize| -> Conserved { [h[i], hu[i], hw[i]] };
    let mut fluxes = vec![InterfaceFlux::default(); n + 1];
    for (k, slot) in fluxes.iter_mut().enumerate() {
        let (ql, dl, qr, dr) = if k == 0 {
            let qi = node(0);
            (bcs.left.ghost(qi), d[0], qi, d[0])
        } else if k == n {
            let i = n * np - 1;
            let qi = node(i);
            (qi, d[i], bcs.right.ghost(qi), d[i])
        } else {
            let il = k * np - 1;
            let ir = k * np;
            (node(il), d[il], node(ir), d[ir])
        };
        *slot = interface_flux(ql, dl, qr, dr, g);
    }

    let weak = grid.weak_volume();
    let lift_l = grid.lift_first();
    let lift_r = grid.lift_last();
    let mut out = Tendency {
        h: vec![0.0; h.len()],
        hu: vec![0.0; h.len()],
        hw: vec![0.0; h.len()],
    };
    let mut flux_local: Vec<Conserved> = vec![[0.0; 3]; np];
    for e in 0..n {
        let base = e * np;
        for (j, f) in flux_local.iter_mut().enumerate() {
            let i = base + j;
            let u = hu[i] / h[i];
            *f = [
                hu[i],
                hu[i] * u + 0.5 * g * (h[i] - d[i]) * (h[i] + d[i]),
                u * hw[i],
            ];
        }
        let fl = fluxes[e].to_right;
        let fr = fluxes[e + 1].to_left;
        for i in 0..np {
            let row = &weak[i * np..(i + 1) * np];
            let mut acc = [0.0; 3];
            for (w, f) in row.iter().zip(flux_local.iter()) {
                acc[0] += w * f[0];
                acc[1] += w * f[1];
                acc[2] += w * f[2];
            }
            let gi = base + i;
            out.h[gi] = acc[0] + lift_l[i] * fl[0] - lift_r[i] * fr[0];
            out.hu[gi] = acc[1] + lift_l[i] * fl[1] - lift_r[i] * fr[1]
                + g * (h[gi] - d[gi]) * bottom.d_x[gi];
            out.hw[gi] = acc[2] + lift_l[i] * fl[2] - lift_r[i] * fr[2];
        }
    }
    Ok(out)
}

/// Largest `λ Δt / Δx` over the nodes.
pub fn cfl_number(state: &FlowState, dt: f64, g: f64) -> f64 {
    let dx = state.spec().dx();
    state
        .h
        .values()
        .iter()
        .zip(state.hu.values())
        .map(|(&h, &hu)| wave_speed([h, hu, 0.0], g))
        .fold(0.0, f64::max)
        * dt
        / dx
}

fn axpy(base: &[f64], dt: f64, rate: &[f64]) -> Vec<f64> {
    base.iter().zip(rate).map(|(b, r)| b + dt * r).collect()
}

/// One Heun (two-stage, second-order) step of the hydrostatic system. The
/// first stage sees the bottom at `tⁿ`, the second at `tⁿ + Δt`.
pub fn heun_step(
    grid: &Grid,
    state: &FlowState,
    dt: f64,
    bottom_now: &PredictorBottom,
    bottom_next: &PredictorBottom,
    bcs: &Boundaries,
    g: f64,
) -> Result<FlowState> {
    let cfl = cfl_number(state, dt, g);
    if cfl > 1.0 {
        log::warn!("CFL number {cfl:.3} exceeds 1 at t = {}", state.time);
    }
    let spec = *grid.spec();
    let k1 = rhs_operator(grid, state, bottom_now, bcs, g)?;
    let stage = FlowState {
        h: NodalField::from_raw(spec, axpy(state.h.values(), dt, &k1.h)),
        hu: NodalField::from_raw(spec, axpy(state.hu.values(), dt, &k1.hu)),
        hw: NodalField::from_raw(spec, axpy(state.hw.values(), dt, &k1.hw)),
        time: state.time + dt,
    };
    let k2 = rhs_operator(grid, &stage, bottom_next, bcs, g)?;
    let combine = |base: &[f64], a: &[f64], b: &[f64]| -> Vec<f64> {
        base.iter()
            .zip(a.iter().zip(b))
            .map(|(q, (ka, kb))| q + 0.5 * dt * (ka + kb))
            .collect()
    };
    let next = FlowState {
        h: NodalField::from_raw(spec, combine(state.h.values(), &k1.h, &k2.h)),
        hu: NodalField::from_raw(spec, combine(state.hu.values(), &k1.hu, &k2.hu)),
        hw: NodalField::from_raw(spec, combine(state.hw.values(), &k1.hw, &k2.hw)),
        time: state.time + dt,
    };
    next.check_positive()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathymetry::Bathymetry;
    use crate::error::Error;
    use crate::grid::GridSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const G: f64 = 9.81;

    fn setup(n: usize, l: f64) -> Grid {
        Grid::new(GridSpec::new(0.0, l, n, 1).unwrap()).unwrap()
    }

    fn bottom(grid: &Grid, bath: &Bathymetry, t: f64) -> PredictorBottom {
        PredictorBottom::new(grid, &bath.sample_grid(grid, t))
    }

    #[test]
    fn physical_flux_values() {
        let f = physical_flux([10.0, 0.0, 0.0], G);
        assert_eq!(f[0], 0.0);
        assert_abs_diff_eq!(f[1], 490.5, epsilon = 1e-12);
        assert_eq!(f[2], 0.0);
        let f = physical_flux([1.0, 1.0, 0.0], G);
        assert_abs_diff_eq!(f[1], 1.0 + 4.905, epsilon = 1e-14);
        let f = physical_flux([3.0, 0.0, 0.0], G);
        assert_abs_diff_eq!(f[1], 0.5 * G * 9.0, epsilon = 1e-14);
    }

    #[test]
    fn rusanov_is_consistent_and_dissipative() {
        let q = [2.0, 0.7, -0.1];
        let f = rusanov_flux(q, q, G);
        let exact = physical_flux(q, G);
        for k in 0..3 {
            assert_abs_diff_eq!(f[k], exact[k], epsilon = 1e-13);
        }
        let ql = [10.0, 0.0, 0.0];
        let qr = [10.1, 0.0, 0.0];
        let f = rusanov_flux(ql, qr, G);
        let lambda = (G * 10.1_f64).sqrt();
        let central = 0.5 * (physical_flux(ql, G)[0] + physical_flux(qr, G)[0]);
        assert_abs_diff_eq!(f[0], central - 0.5 * lambda * 0.1, epsilon = 1e-12);

        // Symmetric dam-break: central mass flux cancels, dissipation remains.
        let ql = [2.0, 1.0, 0.0];
        let qr = [1.0, -0.5, 0.0];
        let f = rusanov_flux(ql, qr, G);
        let lam = (0.5f64 + (G * 2.0).sqrt()).max(0.5 + (G * 1.0).sqrt());
        assert_abs_diff_eq!(f[0], 0.5 * (1.0 - 0.5) - 0.5 * lam * (1.0 - 2.0), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rusanov_consistency_random(h in 0.01f64..50.0, hu in -20.0f64..20.0, hw in -5.0f64..5.0) {
            let q = [h, hu, hw];
            let f = rusanov_flux(q, q, G);
            let e = physical_flux(q, G);
            for k in 0..3 {
                prop_assert!((f[k] - e[k]).abs() <= 1e-12 * (1.0 + e[k].abs()));
            }
        }
    }

    #[test]
    fn ghost_rules() {
        let q = [1.0, 2.0, 3.0];
        assert_eq!(BoundaryKind::Wall.ghost(q), [1.0, -2.0, 3.0]);
        assert_eq!(BoundaryKind::Absorbing.ghost(q), q);
    }

    fn still_water(grid: &Grid, bath: &Bathymetry) -> FlowState {
        let spec = *grid.spec();
        let s = bath.sample_grid(grid, 0.0);
        FlowState::new(
            NodalField::from_values(spec, s.d.clone()).unwrap(),
            NodalField::zeros(spec),
            NodalField::zeros(spec),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn lake_at_rest_has_zero_tendency() {
        let grid = setup(50, 100.0);
        let bath = Bathymetry::flat(10.0).unwrap();
        let st = still_water(&grid, &bath);
        let t = rhs_operator(&grid, &st, &bottom(&grid, &bath, 0.0), &Boundaries::walls(), G).unwrap();
        for v in t.h.iter().chain(&t.hu).chain(&t.hw) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn rest_over_step_is_balanced() {
        // Element boundary at the plate edge; bottom frozen at a late time.
        let grid = Grid::new(GridSpec::with_spacing(0.01, 0.025, 80, 1).unwrap()).unwrap();
        let bath = Bathymetry::hammack(0.05, 0.005, 0.61, 0.1289).unwrap();
        let b = bottom(&grid, &bath, 50.0);
        let spec = *grid.spec();
        let st = FlowState::new(
            NodalField::from_values(spec, b.d.clone()).unwrap(),
            NodalField::zeros(spec),
            NodalField::zeros(spec),
            0.0,
        )
        .unwrap();
        let t = rhs_operator(&grid, &st, &b, &Boundaries::walls(), G).unwrap();
        let worst = t.h.iter().chain(&t.hu).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-13, "{worst}");
    }

    #[test]
    fn vertical_momentum_without_w_has_no_tendency() {
        let grid = setup(40, 40.0);
        let bath = Bathymetry::flat(2.0).unwrap();
        let spec = *grid.spec();
        let st = FlowState::new(
            grid.project(|x| 2.0 + 0.1 * (x / 5.0).sin()).unwrap(),
            grid.project(|x| 0.3 * (x / 7.0).cos()).unwrap(),
            NodalField::zeros(spec),
            0.0,
        )
        .unwrap();
        let t = rhs_operator(&grid, &st, &bottom(&grid, &bath, 0.0), &Boundaries::absorbing(), G).unwrap();
        assert!(t.hw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn positivity_failure_reports_element() {
        let grid = setup(10, 10.0);
        let spec = *grid.spec();
        let mut h = NodalField::constant(spec, 1.0);
        h.values_mut()[13] = -0.1;
        let st = FlowState {
            h,
            hu: NodalField::zeros(spec),
            hw: NodalField::zeros(spec),
            time: 2.5,
        };
        let bath = Bathymetry::flat(1.0).unwrap();
        let err = rhs_operator(&grid, &st, &bottom(&grid, &bath, 0.0), &Boundaries::walls(), G).unwrap_err();
        assert_eq!(
            err,
            Error::Positivity {
                element: 6,
                time: 2.5,
                value: -0.1
            }
        );
    }

    #[test]
    fn mass_tendency_matches_flux_divergence_for_solitary_profile() {
        // Oracle: −∂x(hu) of the interpolated analytic profile.
        let (a, d) = (2.0, 10.0);
        let c = (G * (d + a)).sqrt();
        let k = (3.0 * a / (4.0 * d * d * (d + a))).sqrt();
        let x0 = 200.0;
        let eta = |x: f64| a / (k * (x - x0)).cosh().powi(2);
        let hu = |x: f64| c * eta(x);
        let grid = setup(800, 800.0);
        let bath = Bathymetry::flat(d).unwrap();
        let spec = *grid.spec();
        let st = FlowState::new(
            grid.project(|x| d + eta(x)).unwrap(),
            grid.project(hu).unwrap(),
            NodalField::zeros(spec),
            0.0,
        )
        .unwrap();
        let t = rhs_operator(&grid, &st, &bottom(&grid, &bath, 0.0), &Boundaries::walls(), G).unwrap();
        for probe in [180.0, 195.0, 210.0, 230.0] {
            let i = grid.nearest_node(probe);
            // Continuous linear data: the weak operator returns the element
            // slope of the flux at both nodes.
            let e = i / grid.np();
            let (xl, xr) = (grid.nodes()[e * grid.np()], grid.nodes()[e * grid.np() + 1]);
            let exact = -(hu(xr) - hu(xl)) / (xr - xl);
            assert!((t.h[i] - exact).abs() < 1e-9, "x={probe}: {} vs {exact}", t.h[i]);
        }
    }

    #[test]
    fn heun_keeps_lake_at_rest() {
        let grid = setup(50, 100.0);
        let bath = Bathymetry::flat(10.0).unwrap();
        let b = bottom(&grid, &bath, 0.0);
        let mut st = still_water(&grid, &bath);
        for _ in 0..100 {
            st = heun_step(&grid, &st, 0.1, &b, &b, &Boundaries::walls(), G).unwrap();
        }
        let eta = st.h.values().iter().map(|h| (h - 10.0).abs()).fold(0.0, f64::max);
        assert!(eta <= 1e-12 && st.hu.max_abs() <= 1e-12);
        assert_abs_diff_eq!(st.time, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn heun_transports_tracer_with_the_flow() {
        // Uniform current with a small hw bump: hw/h advects at speed u.
        let grid = setup(400, 100.0);
        let bath = Bathymetry::flat(1.0).unwrap();
        let b = bottom(&grid, &bath, 0.0);
        let u0 = 0.5;
        let w = |x: f64| 0.01 * (-((x - 30.0) / 4.0).powi(2)).exp();
        let mut st = FlowState::new(
            NodalField::constant(*grid.spec(), 1.0),
            NodalField::constant(*grid.spec(), u0),
            grid.project(w).unwrap(),
            0.0,
        )
        .unwrap();
        let dt = 0.02;
        for _ in 0..500 {
            st = heun_step(&grid, &st, dt, &b, &b, &Boundaries::absorbing(), G).unwrap();
        }
        let shift = u0 * st.time;
        let err = grid
            .nodes()
            .iter()
            .zip(st.hw.values())
            .map(|(&x, &v)| (v - w(x - shift)).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-4, "max tracer error {err}");
    }

    #[test]
    fn mass_is_conserved_with_walls() {
        let grid = setup(100, 100.0);
        let bath = Bathymetry::flat(1.0).unwrap();
        let b = bottom(&grid, &bath, 0.0);
        let mut st = FlowState::new(
            grid.project(|x| 1.0 + 0.2 * (-((x - 40.0) / 5.0).powi(2)).exp()).unwrap(),
            NodalField::zeros(*grid.spec()),
            NodalField::zeros(*grid.spec()),
            0.0,
        )
        .unwrap();
        let m0 = grid.integrate(&st.h);
        for _ in 0..400 {
            st = heun_step(&grid, &st, 0.05, &b, &b, &Boundaries::walls(), G).unwrap();
        }
        let drift = (grid.integrate(&st.h) - m0).abs() / m0;
        assert!(drift < 1e-13, "drift {drift}");
    }
}

//! Uniform one-dimensional DG grid with a nodal Lagrange basis.
//!
//! Every element carries `poly_order + 1` Gauss-Lobatto nodes, so the first
//! and last node of an element sit on its endpoints and interface traces are
//! plain nodal reads. Nodal values are stored element-major in one flat
//! vector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Shape of the computational mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub n_elements: usize,
    pub poly_order: usize,
}

impl GridSpec {
    pub fn new(x_left: f64, x_right: f64, n_elements: usize, poly_order: usize) -> Result<Self> {
        let spec = GridSpec {
            x_left,
            x_right,
            n_elements,
            poly_order,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid of `n_elements` elements of width `dx` starting at `x_left`.
    pub fn with_spacing(x_left: f64, dx: f64, n_elements: usize, poly_order: usize) -> Result<Self> {
        Self::new(x_left, x_left + dx * n_elements as f64, n_elements, poly_order)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_left.is_finite() && self.x_right.is_finite()) || self.x_right <= self.x_left {
            return Err(invalid(format!(
                "grid bounds must satisfy x_left < x_right, got [{}, {}]",
                self.x_left, self.x_right
            )));
        }
        if self.n_elements < 2 {
            return Err(invalid(format!("need at least 2 elements, got {}", self.n_elements)));
        }
        if self.poly_order < 1 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_elements as f64
    }

    pub fn nodes_per_element(&self) -> usize {
        self.poly_order + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements * self.nodes_per_element()
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Index of the element containing `x` (right-closed at the domain end).
    pub fn element_of(&self, x: f64) -> Option<usize> {
        if x < self.x_left || x > self.x_right {
            return None;
        }
        let e = ((x - self.x_left) / self.dx()).floor() as usize;
        Some(e.min(self.n_elements - 1))
    }
}

/// Which end of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// How a ghost trace is built from the inner trace at the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GhostRule {
    /// Ghost equals the inner value (zero gradient / mirror of scalars).
    Copy,
    /// Ghost is the negated inner value (reflected normal momentum).
    Negate,
    /// Ghost takes a fixed value.
    Value(f64),
}

impl GhostRule {
    pub fn apply(self, inner: f64) -> f64 {
        match self {
            GhostRule::Copy => inner,
            GhostRule::Negate => -inner,
            GhostRule::Value(v) => v,
        }
    }
}

/// The two one-sided values of a field at an element end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub inner: f64,
    pub outer: f64,
    pub side: Side,
}

impl Trace {
    /// Value from the left element of the interface (`q⁻`).
    pub fn minus(&self) -> f64 {
        match self.side {
            Side::Right => self.inner,
            Side::Left => self.outer,
        }
    }

    /// Value from the right element of the interface (`q⁺`).
    pub fn plus(&self) -> f64 {
        match self.side {
            Side::Right => self.outer,
            Side::Left => self.inner,
        }
    }

    pub fn average(&self) -> f64 {
        0.5 * (self.minus() + self.plus())
    }

    /// `q⁻ − q⁺`.
    pub fn jump(&self) -> f64 {
        self.minus() - self.plus()
    }
}

/// Per-element nodal coefficients of a scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(spec: GridSpec) -> Self {
        NodalField {
            spec,
            values: vec![0.0; spec.n_nodes()],
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        NodalField {
            spec,
            values: vec![value; spec.n_nodes()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_nodes() {
            return Err(invalid(format!(
                "field needs {} nodal values, got {}",
                spec.n_nodes(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let np = spec.nodes_per_element();
            let x = spec.x_left + (i / np) as f64 * spec.dx();
            return Err(Error::NonFinite { x, value: values[i] });
        }
        Ok(NodalField { spec, values })
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.n_nodes());
        NodalField { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn element(&self, e: usize) -> &[f64] {
        let np = self.spec.nodes_per_element();
        &self.values[e * np..(e + 1) * np]
    }

    pub fn node(&self, e: usize, k: usize) -> f64 {
        self.values[e * self.spec.nodes_per_element() + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Grid geometry plus the reference-element operators scaled to the
/// physical element width.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    ref_nodes: Vec<f64>,
    x: Vec<f64>,
    /// `diff[i * np + j] = dφ_j/dx (x_i)`.
    diff: Vec<f64>,
    mass: Vec<f64>,
    mass_inv: Vec<f64>,
    /// `stiff[i * np + j] = ∫ φ_i φ_j' dx`.
    stiff: Vec<f64>,
    /// `M⁻¹ Kᵀ`, the weak-form volume operator.
    weak_volume: Vec<f64>,
    lift_first: Vec<f64>,
    lift_last: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.poly_order;
        let np = p + 1;
        let (ref_nodes, _) = gauss_lobatto(p);
        let (qx, qw) = gauss_legendre(p + 2);
        let jac = 0.5 * spec.dx();

        let mut mass_ref = DMatrix::<f64>::zeros(np, np);
        let mut stiff = vec![0.0; np * np];
        for (&xq, &wq) in qx.iter().zip(&qw) {
            let basis: Vec<(f64, f64)> = (0..np).map(|j| lagrange(&ref_nodes, j, xq)).collect();
            for i in 0..np {
                for j in 0..np {
                    mass_ref[(i, j)] += wq * basis[i].0 * basis[j].0;
                    stiff[i * np + j] += wq * basis[i].0 * basis[j].1;
                }
            }
        }
        let mass_ref_inv = mass_ref
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("reference mass matrix is singular"))?;

        let mut diff = vec![0.0; np * np];
        for i in 0..np {
            for j in 0..np {
                diff[i * np + j] = lagrange(&ref_nodes, j, ref_nodes[i]).1 / jac;
            }
        }
        let mass: Vec<f64> = (0..np * np).map(|k| jac * mass_ref[(k / np, k % np)]).collect();
        let mass_inv: Vec<f64> = (0..np * np)
            .map(|k| mass_ref_inv[(k / np, k % np)] / jac)
            .collect();
        let mut weak_volume = vec![0.0; np * np];
        for i in 0..np {
            for j in 0..np {
                weak_volume[i * np + j] = (0..np).map(|m| mass_inv[i * np + m] * stiff[j * np + m]).sum();
            }
        }
        let lift_first = (0..np).map(|i| mass_inv[i * np]).collect();
        let lift_last = (0..np).map(|i| mass_inv[i * np + p]).collect();

        let dx = spec.dx();
        let x = (0..spec.n_elements)
            .flat_map(|e| {
                let xl = spec.x_left + e as f64 * dx;
                ref_nodes.iter().map(move |r| xl + (r + 1.0) * 0.5 * dx).collect::<Vec<_>>()
            })
            .collect();

        Ok(Grid {
            spec,
            ref_nodes,
            x,
            diff,
            mass,
            mass_inv,
            stiff,
            weak_volume,
            lift_first,
            lift_last,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn np(&self) -> usize {
        self.spec.nodes_per_element()
    }

    pub fn n_elements(&self) -> usize {
        self.spec.n_elements
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx()
    }

    /// Physical coordinates of all nodes, element-major.
    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn node_x(&self, e: usize, k: usize) -> f64 {
        self.x[e * self.np() + k]
    }

    pub fn element_center(&self, e: usize) -> f64 {
        self.spec.x_left + (e as f64 + 0.5) * self.dx()
    }

    pub fn reference_nodes(&self) -> &[f64] {
        &self.ref_nodes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_inv(&self) -> &[f64] {
        &self.mass_inv
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiff
    }

    pub fn differentiation(&self) -> &[f64] {
        &self.diff
    }

    pub(crate) fn weak_volume(&self) -> &[f64] {
        &self.weak_volume
    }

    pub(crate) fn lift_first(&self) -> &[f64] {
        &self.lift_first
    }

    pub(crate) fn lift_last(&self) -> &[f64] {
        &self.lift_last
    }

    /// Nodal interpolation of `f`.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> Result<NodalField> {
        let mut values = Vec::with_capacity(self.x.len());
        for &x in &self.x {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            values.push(v);
        }
        Ok(NodalField::from_raw(self.spec, values))
    }

    /// Nodal interpolation where `f` also receives the element index, for
    /// functions that are discontinuous at element interfaces.
    pub fn project_per_element<F: Fn(usize, f64) -> f64>(&self, f: F) -> Result<NodalField> {
        let np = self.np();
        let mut values = Vec::with_capacity(self.x.len());
        for (i, &x) in self.x.iter().enumerate() {
            let v = f(i / np, x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            values.push(v);
        }
        Ok(NodalField::from_raw(self.spec, values))
    }

    /// Element-local derivative of the nodal polynomial; no coupling between
    /// elements.
    pub fn derivative(&self, field: &NodalField) -> NodalField {
        let mut out = vec![0.0; field.values.len()];
        self.derivative_into(&field.values, &mut out);
        NodalField::from_raw(self.spec, out)
    }

    pub fn derivative_into(&self, values: &[f64], out: &mut [f64]) {
        let np = self.np();
        for (ve, oe) in values.chunks_exact(np).zip(out.chunks_exact_mut(np)) {
            for i in 0..np {
                let row = &self.diff[i * np..(i + 1) * np];
                oe[i] = row.iter().zip(ve).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// Inner and outer trace of `field` at one end of element `e`. At the
    /// domain boundary the outer value comes from `ghost`.
    pub fn interface_trace(&self, field: &NodalField, e: usize, side: Side, ghost: GhostRule) -> Trace {
        let np = self.np();
        let n = self.n_elements();
        let v = &field.values;
        let (inner, outer) = match side {
            Side::Left => {
                let inner = v[e * np];
                let outer = if e == 0 { ghost.apply(inner) } else { v[e * np - 1] };
                (inner, outer)
            }
            Side::Right => {
                let inner = v[e * np + np - 1];
                let outer = if e + 1 == n {
                    ghost.apply(inner)
                } else {
                    v[(e + 1) * np]
                };
                (inner, outer)
            }
        };
        Trace { inner, outer, side }
    }

    /// `∫ field dx` over the whole domain using the exact mass matrix.
    pub fn integrate(&self, field: &NodalField) -> f64 {
        let np = self.np();
        field
            .values
            .chunks_exact(np)
            .map(|ve| {
                (0..np)
                    .map(|i| (0..np).map(|j| self.mass[i * np + j] * ve[j]).sum::<f64>())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Evaluate the piecewise polynomial at an arbitrary point.
    pub fn evaluate(&self, field: &NodalField, x: f64) -> Option<f64> {
        let e = self.spec.element_of(x)?;
        let xl = self.spec.x_left + e as f64 * self.dx();
        let r = 2.0 * (x - xl) / self.dx() - 1.0;
        let ve = field.element(e);
        Some(
            (0..self.np())
                .map(|j| ve[j] * lagrange(&self.ref_nodes, j, r).0)
                .sum(),
        )
    }

    /// Flat node index of the node nearest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &xi) in self.x.iter().enumerate() {
            if (xi - x).abs() < (self.x[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// Gauss-Lobatto nodes and weights on [-1, 1], ascending.
pub fn gauss_lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1);
    let n = p;
    let mut x: Vec<f64> = (0..=n)
        .map(|i| -(std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let mut pn = vec![0.0; n + 1];
    for _ in 0..100 {
        let mut delta: f64 = 0.0;
        for (xi, pni) in x.iter_mut().zip(pn.iter_mut()) {
            let (pn_val, pn1_val) = legendre_pair(n, *xi);
            *pni = pn_val;
            let step = (*xi * pn_val - pn1_val) / ((n + 1) as f64 * pn_val);
            *xi -= step;
            delta = delta.max(step.abs());
        }
        if delta < 1e-15 {
            break;
        }
    }
    x[0] = -1.0;
    x[n] = 1.0;
    let w = x
        .iter()
        .map(|&xi| {
            let pn_val = legendre_pair(n, xi).0;
            2.0 / ((n * (n + 1)) as f64 * pn_val * pn_val)
        })
        .collect();
    (x, w)
}

/// Gauss-Legendre nodes and weights on [-1, 1] with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut xi = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (pn_val, pn1_val) = legendre_pair(n, xi);
            dp = n as f64 * (xi * pn_val - pn1_val) / (xi * xi - 1.0);
            let step = pn_val / dp;
            xi -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = xi;
        w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
    (x, w)
}

/// `(P_n(x), P_{n-1}(x))`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let next = ((2 * k - 1) as f64 * x * cur - (k - 1) as f64 * prev) / k as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Value and derivative of the `j`-th Lagrange polynomial on `nodes` at `r`.
fn lagrange(nodes: &[f64], j: usize, r: f64) -> (f64, f64) {
    let mut value = 1.0;
    let mut deriv = 0.0;
    for (m, &xm) in nodes.iter().enumerate() {
        if m == j {
            continue;
        }
        let denom = nodes[j] - xm;
        deriv = deriv * (r - xm) / denom + value / denom;
        value *= (r - xm) / denom;
    }
    (value, deriv)
}

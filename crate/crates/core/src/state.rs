use crate::error::{Error, Result};
use crate::grid::{GridSpec, NodalField};

/// Conserved variables `(h, hu, hw)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub h: NodalField,
    pub hu: NodalField,
    pub hw: NodalField,
    pub time: f64,
}

impl FlowState {
    pub fn new(h: NodalField, hu: NodalField, hw: NodalField, time: f64) -> Result<Self> {
        if h.spec() != hu.spec() || h.spec() != hw.spec() {
            return Err(Error::InvalidParameter(
                "h, hu and hw must live on the same grid".into(),
            ));
        }
        let state = FlowState { h, hu, hw, time };
        state.check_positive()?;
        Ok(state)
    }

    pub fn spec(&self) -> &GridSpec {
        self.h.spec()
    }

    /// Fails on the first node with `h ≤ 0`.
    pub fn check_positive(&self) -> Result<()> {
        check_depth(self.h.values(), self.spec().nodes_per_element(), self.time)
    }

    /// True when every node of `hw` is exactly zero.
    pub fn vertical_momentum_is_zero(&self) -> bool {
        self.hw.values().iter().all(|&v| v == 0.0)
    }
}

pub(crate) fn check_depth(h: &[f64], np: usize, time: f64) -> Result<()> {
    match h.iter().position(|&v| !(v > 0.0)) {
        None => Ok(()),
        Some(i) => Err(Error::Positivity {
            element: i / np,
            time,
            value: h[i],
        }),
    }
}

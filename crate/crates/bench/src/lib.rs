//! Fixtures shared by the solver benchmarks.

use nhsw::scenarios::Scenario;
use nhsw::{FlowState, Grid, ScenarioKind, ScenarioOverrides};

/// Solitary wave on `n` elements, with its grid and initial state.
pub fn solitary_fixture(n: usize) -> (Scenario, Grid, FlowState) {
    let overrides = ScenarioOverrides {
        n_elements: Some(n),
        ..Default::default()
    };
    let scenario = Scenario::build(ScenarioKind::Solitary, &overrides).expect("valid solitary settings");
    let grid = Grid::new(scenario.grid).expect("valid grid");
    let state = scenario.initial_state(&grid).expect("positive depth");
    (scenario, grid, state)
}

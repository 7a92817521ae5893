//! Error norms, correlation and timing comparisons between runs.

use serde::{Deserialize, Serialize};

use crate::adaptivity::Criterion;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scenarios::ScenarioKind;

/// Aligned reference and candidate samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPair {
    reference: Vec<f64>,
    candidate: Vec<f64>,
}

impl SeriesPair {
    pub fn new(reference: Vec<f64>, candidate: Vec<f64>) -> Result<Self> {
        if reference.len() != candidate.len() {
            return Err(Error::LengthMismatch {
                reference: reference.len(),
                candidate: candidate.len(),
            });
        }
        if reference.len() < 2 {
            return Err(Error::Degenerate(format!("need at least 2 samples, got {}", reference.len())));
        }
        if let Some(v) = reference.iter().chain(&candidate).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {v}")));
        }
        Ok(SeriesPair { reference, candidate })
    }

    /// Interpolates the candidate linearly onto the reference abscissae.
    /// Reference points outside the candidate's span are dropped.
    pub fn aligned(ref_t: &[f64], ref_v: &[f64], cand_t: &[f64], cand_v: &[f64]) -> Result<Self> {
        if ref_t.len() != ref_v.len() || cand_t.len() != cand_v.len() {
            return Err(Error::InvalidParameter("abscissa and value lengths differ".into()));
        }
        if cand_t.len() < 2 || cand_t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("candidate abscissae must be strictly increasing".into()));
        }
        let (lo, hi) = (cand_t[0], cand_t[cand_t.len() - 1]);
        let mut reference = Vec::new();
        let mut candidate = Vec::new();
        for (&t, &r) in ref_t.iter().zip(ref_v) {
            if t < lo || t > hi {
                continue;
            }
            let j = cand_t.partition_point(|&c| c <= t).clamp(1, cand_t.len() - 1);
            let (t0, t1) = (cand_t[j - 1], cand_t[j]);
            let w = (t - t0) / (t1 - t0);
            reference.push(r);
            candidate.push((1.0 - w) * cand_v[j - 1] + w * cand_v[j]);
        }
        Self::new(reference, candidate)
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }
}

pub fn rmse(pair: &SeriesPair) -> f64 {
    let n = pair.len() as f64;
    (pair
        .reference
        .iter()
        .zip(&pair.candidate)
        .map(|(r, c)| (c - r).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Product-moment correlation; zero variance in either series is an error.
pub fn pearson(pair: &SeriesPair) -> Result<f64> {
    let n = pair.len() as f64;
    let mr = pair.reference.iter().sum::<f64>() / n;
    let mc = pair.candidate.iter().sum::<f64>() / n;
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for (r, c) in pair.reference.iter().zip(&pair.candidate) {
        let (dr, dc) = (r - mr, c - mc);
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    if srr == 0.0 || scc == 0.0 {
        return Err(Error::Degenerate("zero variance, correlation undefined".into()));
    }
    Ok((src / (srr * scc).sqrt()).clamp(-1.0, 1.0))
}

/// A correlation value, or the marker for an undefined one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Value(f64),
    Degenerate(DegenerateMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegenerateMarker {
    Degenerate,
}

impl Correlation {
    pub fn of(pair: &SeriesPair) -> Self {
        match pearson(pair) {
            Ok(r) => Correlation::Value(r),
            Err(_) => Correlation::Degenerate(DegenerateMarker::Degenerate),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Correlation::Value(r) => Some(*r),
            Correlation::Degenerate(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub rmse: f64,
    pub pearson: Correlation,
}

impl SeriesMetrics {
    pub fn of(pair: &SeriesPair) -> Self {
        SeriesMetrics {
            rmse: rmse(pair),
            pearson: Correlation::of(pair),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeMetrics {
    pub position: f64,
    /// What the gauge was compared with, e.g. "global" or a file name.
    pub against: String,
    pub metrics: SeriesMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub time: f64,
    pub against: String,
    pub metrics: SeriesMetrics,
}

/// The settings that must agree for two loop times to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingKey {
    pub scenario: ScenarioKind,
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: String,
    pub timing_key: TimingKey,
    pub mode: String,
    pub criterion: Option<Criterion>,
    /// Time-stepping loop only.
    pub loop_seconds: f64,
    pub mean_flagged_fraction: f64,
    pub analytic: Option<SeriesMetrics>,
    pub gauges: Vec<GaugeMetrics>,
    pub snapshots: Vec<SnapshotMetrics>,
    pub time_ratio: Option<f64>,
    pub notes: Vec<String>,
}

/// Loop-time ratio `local / global` of two runs with matching settings.
pub fn time_ratio(local: &RunReport, global: &RunReport) -> Result<f64> {
    if local.timing_key != global.timing_key {
        return Err(Error::Mismatch(format!(
            "timing keys differ: {:?} vs {:?}",
            local.timing_key, global.timing_key
        )));
    }
    if !(global.loop_seconds > 0.0) {
        return Err(Error::Degenerate("reference run has no measured loop time".into()));
    }
    Ok(local.loop_seconds / global.loop_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair(a: &[f64], b: &[f64]) -> SeriesPair {
        SeriesPair::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&pair(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])), 0.0);
        assert_abs_diff_eq!(rmse(&pair(&[1.0, 2.0, 3.0], &[1.01, 2.01, 3.01])), 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(rmse(&pair(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0])), (4.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_abs_diff_eq!(pearson(&pair(&a, &a)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&pair(&a, &[-1.0, -2.0, -3.0])).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&pair(&a, &[1.0, 2.0, 4.0])).unwrap(), 0.981_980_5, epsilon = 1e-7);
        let flat = pair(&a, &[2.0, 2.0, 2.0]);
        assert!(matches!(pearson(&flat), Err(Error::Degenerate(_))));
        assert_eq!(Correlation::of(&flat).value(), None);
    }

    #[test]
    fn pair_validation() {
        assert!(matches!(
            SeriesPair::new(vec![1.0, 2.0], vec![1.0]),
            Err(Error::LengthMismatch { reference: 2, candidate: 1 })
        ));
        assert!(SeriesPair::new(vec![1.0], vec![1.0]).is_err());
        assert!(SeriesPair::new(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn alignment_interpolates_and_drops() {
        let p = SeriesPair::aligned(&[-1.0, 0.5, 1.5, 3.0], &[9.0, 1.0, 2.0, 9.0], &[0.0, 1.0, 2.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.reference(), &[1.0, 2.0]);
        assert_eq!(p.candidate(), &[1.0, 3.0]);
        assert!(SeriesPair::aligned(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn degenerate_serializes_as_marker() {
        let c = Correlation::Degenerate(DegenerateMarker::Degenerate);
        // Exercised through the derived impls; the cli checks the JSON text.
        assert_eq!(c.value(), None);
        assert_eq!(Correlation::Value(0.5).value(), Some(0.5));
    }

    fn report(seconds: f64, dt: f64) -> RunReport {
        RunReport {
            config: String::new(),
            timing_key: TimingKey {
                scenario: ScenarioKind::Solitary,
                grid: GridSpec::new(0.0, 800.0, 200, 1).unwrap(),
                dt,
                steps: 300,
                threads: 1,
            },
            mode: "global".into(),
            criterion: None,
            loop_seconds: seconds,
            mean_flagged_fraction: 1.0,
            analytic: None,
            gauges: vec![],
            snapshots: vec![],
            time_ratio: None,
            notes: vec![],
        }
    }

    #[test]
    fn time_ratio_requires_matching_runs() {
        let g = report(2.0, 0.1);
        assert_eq!(time_ratio(&g, &g).unwrap(), 1.0);
        assert_eq!(time_ratio(&report(0.5, 0.1), &g).unwrap(), 0.25);
        assert!(matches!(time_ratio(&report(0.5, 0.05), &g), Err(Error::Mismatch(_))));
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_nonnegative(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let ab = rmse(&SeriesPair::new(a.clone(), b.clone()).unwrap());
            let ba = rmse(&SeriesPair::new(b.clone(), a.clone()).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn pearson_affine_invariant(
            v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let base = SeriesPair::new(a.clone(), b.clone()).unwrap();
            if let Ok(r) = pearson(&base) {
                let moved: Vec<f64> = b.iter().map(|x| scale * x + shift).collect();
                let r2 = pearson(&SeriesPair::new(a, moved).unwrap()).unwrap();
                prop_assert!((r - r2).abs() <= 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}

//! RIS element states, the reflection-coefficient model, and frame
//! configurations.
//!
//! During one frame of length delta every group sweeps its available
//! states; the design variable is the dwell-time fraction spent in each
//! state. Durations are stored normalized (fractions of delta summing to
//! one per group), which makes each frame measurement an exact convex
//! combination of per-state channel gains. Delta is kept as metadata only.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::AnglePair;

/// Tolerance on per-group duration sums.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// One reflection state of an RIS element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisState {
    /// Amplitude ratio between reflected and incident signal, in (0, 1].
    pub amplitude: f64,
    /// Phase shift in radians, in [0, 2*pi).
    pub phase: f64,
}

/// The available state set of an RIS element, plus the angular falloff
/// exponent of the element pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    pub states: Vec<RisState>,
    /// Reflection pattern exponent q: the coefficient is scaled by
    /// cos^q(theta_R_polar). q = 0 means angle-independent reflection,
    /// which matches the normal-direction CST characterization.
    pub pattern_exponent: f64,
}

impl Default for StateTable {
    /// The four measured element states: phase shifts pi/4, 3pi/4, 5pi/4,
    /// 7pi/4 with amplitude ratios 0.97, 0.97, 0.92, 0.88.
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            states: vec![
                RisState { amplitude: 0.97, phase: PI / 4.0 },
                RisState { amplitude: 0.97, phase: 3.0 * PI / 4.0 },
                RisState { amplitude: 0.92, phase: 5.0 * PI / 4.0 },
                RisState { amplitude: 0.88, phase: 7.0 * PI / 4.0 },
            ],
            pattern_exponent: 0.0,
        }
    }
}

impl StateTable {
    pub fn new(states: Vec<RisState>, pattern_exponent: f64) -> Result<Self> {
        let table = Self { states, pattern_exponent };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::TAU;
        if self.states.len() < 2 {
            return Err(Error::InvalidParameter(
                "state table needs at least two states".into(),
            ));
        }
        if self.pattern_exponent < 0.0 {
            return Err(Error::InvalidParameter("pattern exponent must be >= 0".into()));
        }
        for (i, s) in self.states.iter().enumerate() {
            if !(s.amplitude > 0.0 && s.amplitude <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "state {i} amplitude {} outside (0, 1]",
                    s.amplitude
                )));
            }
            if !(0.0..TAU).contains(&s.phase) {
                return Err(Error::InvalidParameter(format!(
                    "state {i} phase {} outside [0, 2pi)",
                    s.phase
                )));
            }
        }
        Ok(())
    }

    /// Number of available states N_a.
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Complex reflection coefficient of an element in state `state_index`
    /// for the given incidence/reflection directions:
    /// `amplitude * exp(j*phase) * cos^q(theta_R_polar)`.
    pub fn reflection_coefficient(
        &self,
        _theta_i: AnglePair,
        theta_r: AnglePair,
        state_index: usize,
    ) -> Result<Complex64> {
        let state = self.states.get(state_index).ok_or(Error::IndexOutOfRange {
            what: "RIS state",
            index: state_index,
            size: self.states.len(),
        })?;
        let pattern = if self.pattern_exponent == 0.0 {
            1.0
        } else {
            theta_r
                .polar_deg
                .to_radians()
                .cos()
                .max(0.0)
                .powf(self.pattern_exponent)
        };
        Ok(Complex64::from_polar(state.amplitude * pattern, state.phase))
    }

    pub fn canonical_string(&self) -> String {
        let mut s = format!("states v1 q={:e}", self.pattern_exponent);
        for st in &self.states {
            s.push_str(&format!(" ({:e},{:e})", st.amplitude, st.phase));
        }
        s
    }
}

/// Per-group dwell-time fractions over the N_a states within one frame,
/// flattened group-major: entry `l * n_a + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfiguration {
    groups: usize,
    states: usize,
    durations: Vec<f64>,
}

impl FrameConfiguration {
    pub fn from_flat(groups: usize, states: usize, durations: Vec<f64>) -> Result<Self> {
        if durations.len() != groups * states {
            return Err(Error::ShapeMismatch(format!(
                "frame configuration needs {} durations, got {}",
                groups * states,
                durations.len()
            )));
        }
        Ok(Self { groups, states, durations })
    }

    /// Every group dwells equally long in every state.
    pub fn uniform(groups: usize, states: usize) -> Self {
        Self {
            groups,
            states,
            durations: vec![1.0 / states as f64; groups * states],
        }
    }

    /// Every group spends the whole frame in `state_index`.
    pub fn fixed_state(groups: usize, states: usize, state_index: usize) -> Result<Self> {
        if state_index >= states {
            return Err(Error::IndexOutOfRange {
                what: "RIS state",
                index: state_index,
                size: states,
            });
        }
        let mut durations = vec![0.0; groups * states];
        for l in 0..groups {
            durations[l * states + state_index] = 1.0;
        }
        Ok(Self { groups, states, durations })
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.durations
    }

    pub fn duration(&self, group: usize, state: usize) -> f64 {
        self.durations[group * self.states + state]
    }

    pub(crate) fn group_row(&self, group: usize) -> &[f64] {
        &self.durations[group * self.states..(group + 1) * self.states]
    }
}

/// The K frame configurations of one recognition period.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationMatrix {
    frames: Vec<FrameConfiguration>,
    /// Frame length delta in seconds; metadata only, durations are
    /// normalized fractions of it.
    pub frame_length: f64,
}

impl ConfigurationMatrix {
    pub fn new(frames: Vec<FrameConfiguration>, frame_length: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidParameter("configuration matrix needs K >= 1".into()));
        }
        let (l, na) = (frames[0].group_count(), frames[0].state_count());
        if frames.iter().any(|f| f.group_count() != l || f.state_count() != na) {
            return Err(Error::ShapeMismatch("frames disagree on L or N_a".into()));
        }
        if frame_length <= 0.0 {
            return Err(Error::InvalidParameter("frame length must be positive".into()));
        }
        Ok(Self { frames, frame_length })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn group_count(&self) -> usize {
        self.frames[0].group_count()
    }

    pub fn state_count(&self) -> usize {
        self.frames[0].state_count()
    }

    pub fn frame(&self, k: usize) -> &FrameConfiguration {
        &self.frames[k]
    }

    pub fn frames(&self) -> &[FrameConfiguration] {
        &self.frames
    }

    pub fn set_frame(&mut self, k: usize, frame: FrameConfiguration) -> Result<()> {
        if frame.group_count() != self.group_count() || frame.state_count() != self.state_count()
        {
            return Err(Error::ShapeMismatch("replacement frame has wrong shape".into()));
        }
        self.frames[k] = frame;
        Ok(())
    }

    /// Dense K x (L*N_a) view of the duration matrix.
    pub fn to_array(&self) -> Array2<f64> {
        let k = self.frame_count();
        let cols = self.group_count() * self.state_count();
        Array2::from_shape_fn((k, cols), |(i, j)| self.frames[i].as_flat()[j])
    }
}

/// A single simplex-constraint violation in a configuration matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigurationViolation {
    NegativeDuration { frame: usize, group: usize, state: usize, value: f64 },
    GroupSumMismatch { frame: usize, group: usize, sum: f64 },
}

/// Outcome of [`validate_configuration`].
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<ConfigurationViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every (frame, group) row against the simplex constraints:
/// non-negative entries summing to one within [`SIMPLEX_SUM_TOL`].
pub fn validate_configuration(matrix: &ConfigurationMatrix) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (k, frame) in matrix.frames().iter().enumerate() {
        for l in 0..frame.group_count() {
            let row = frame.group_row(l);
            for (i, &v) in row.iter().enumerate() {
                if v < 0.0 {
                    report.violations.push(ConfigurationViolation::NegativeDuration {
                        frame: k,
                        group: l,
                        state: i,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                report.violations.push(ConfigurationViolation::GroupSumMismatch {
                    frame: k,
                    group: l,
                    sum,
                });
            }
        }
    }
    report
}

/// Draws every (frame, group) duration row uniformly on the probability
/// simplex (flat Dirichlet via normalized exponentials). Deterministic
/// given the seed.
pub fn random_configuration(
    frames: usize,
    groups: usize,
    states: usize,
    seed: u64,
) -> Result<ConfigurationMatrix> {
    if frames == 0 || groups == 0 || states == 0 {
        return Err(Error::InvalidParameter("K, L, N_a must all be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut durations = Vec::with_capacity(groups * states);
        for _ in 0..groups {
            durations.extend(simplex_sample(states, &mut rng));
        }
        out.push(FrameConfiguration::from_flat(groups, states, durations)?);
    }
    ConfigurationMatrix::new(out, 1.0)
}

/// Every frame and group pinned to one state; the non-configurable
/// benchmark when `state_index` is the first state.
pub fn fixed_state_configuration(
    frames: usize,
    groups: usize,
    states: usize,
    state_index: usize,
) -> Result<ConfigurationMatrix> {
    let frame = FrameConfiguration::fixed_state(groups, states, state_index)?;
    ConfigurationMatrix::new(vec![frame; frames.max(1)], 1.0)
}

fn simplex_sample(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    // i.i.d. Exp(1) draws normalized to unit sum are flat-Dirichlet.
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn normal() -> AnglePair {
        AnglePair { polar_deg: 0.0, azimuth_deg: 0.0 }
    }

    #[test]
    fn default_state_table_matches_measured_states() {
        let table = StateTable::default();
        assert_eq!(table.state_count(), 4);
        let phases: Vec<f64> = table.states.iter().map(|s| s.phase).collect();
        let amps: Vec<f64> = table.states.iter().map(|s| s.amplitude).collect();
        assert_eq!(phases, vec![PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0]);
        assert_eq!(amps, vec![0.97, 0.97, 0.92, 0.88]);
        table.validate().unwrap();
    }

    #[test]
    fn reflection_coefficient_examples() {
        let table = StateTable::default();
        let r1 = table.reflection_coefficient(normal(), normal(), 0).unwrap();
        let expect = Complex64::from_polar(0.97, PI / 4.0);
        assert_relative_eq!(r1.re, expect.re, epsilon = 1e-15);
        assert_relative_eq!(r1.im, expect.im, epsilon = 1e-15);

        let r4 = table.reflection_coefficient(normal(), normal(), 3).unwrap();
        let expect = Complex64::from_polar(0.88, 7.0 * PI / 4.0);
        assert_relative_eq!(r4.re, expect.re, epsilon = 1e-15);
        assert_relative_eq!(r4.im, expect.im, epsilon = 1e-15);

        assert!(table.reflection_coefficient(normal(), normal(), 4).is_err());
    }

    #[test]
    fn grazing_reflection_vanishes_with_cosine_pattern() {
        let mut table = StateTable::default();
        table.pattern_exponent = 1.0;
        let grazing = AnglePair { polar_deg: 90.0, azimuth_deg: 0.0 };
        for i in 0..table.state_count() {
            let r = table.reflection_coefficient(normal(), grazing, i).unwrap();
            assert!(r.norm() < 1e-15);
        }
    }

    #[test]
    fn validation_reports_every_violation() {
        let good = ConfigurationMatrix::new(
            vec![FrameConfiguration::uniform(2, 4); 3],
            1.0,
        )
        .unwrap();
        assert!(validate_configuration(&good).is_ok());

        let mut bad_durations = FrameConfiguration::uniform(2, 4).as_flat().to_vec();
        bad_durations[1] = -0.1; // negative and breaks the group-0 sum
        let bad = ConfigurationMatrix::new(
            vec![FrameConfiguration::from_flat(2, 4, bad_durations).unwrap()],
            1.0,
        )
        .unwrap();
        let report = validate_configuration(&bad);
        assert_eq!(report.violations.len(), 2);
        assert!(matches!(
            report.violations[0],
            ConfigurationViolation::NegativeDuration { frame: 0, group: 0, state: 1, .. }
        ));

        let short = FrameConfiguration::from_flat(1, 4, vec![0.2, 0.3, 0.2, 0.2]).unwrap();
        let report =
            validate_configuration(&ConfigurationMatrix::new(vec![short], 1.0).unwrap());
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            ConfigurationViolation::GroupSumMismatch { sum, .. } => {
                assert_relative_eq!(*sum, 0.9, epsilon = 1e-12)
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn random_configurations_are_feasible_and_deterministic() {
        let a = random_configuration(5, 3, 4, 7).unwrap();
        let b = random_configuration(5, 3, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!(validate_configuration(&a).is_ok());
        let c = random_configuration(5, 3, 4, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flat_dirichlet_coordinate_mean() {
        // Monte-Carlo oracle for the flat-Dirichlet mean 1/N_a.
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut sums = [0.0f64; 4];
        for _ in 0..draws {
            let s = simplex_sample(4, &mut rng);
            for (acc, v) in sums.iter_mut().zip(&s) {
                *acc += v;
            }
        }
        for acc in sums {
            let mean = acc / draws as f64;
            assert!((mean - 0.25).abs() < 0.005, "mean {mean}");
        }
    }

    #[test]
    fn fixed_state_rows_are_one_hot() {
        let t = fixed_state_configuration(4, 3, 4, 0).unwrap();
        assert!(validate_configuration(&t).is_ok());
        for frame in t.frames() {
            for l in 0..frame.group_count() {
                assert_eq!(frame.duration(l, 0), 1.0);
                for i in 1..frame.state_count() {
                    assert_eq!(frame.duration(l, i), 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn coefficient_modulus_never_exceeds_amplitude(
            polar in 0.0..180.0f64,
            azimuth in -180.0..180.0f64,
            q in 0.0..4.0f64,
            state in 0usize..4,
        ) {
            let mut table = StateTable::default();
            table.pattern_exponent = q;
            let theta = AnglePair { polar_deg: polar, azimuth_deg: azimuth };
            let r = table.reflection_coefficient(normal(), theta, state).unwrap();
            prop_assert!(r.norm() <= table.states[state].amplitude + 1e-12);
        }

        #[test]
        fn random_rows_lie_on_simplex(seed in 0u64..500, k in 1usize..4, l in 1usize..4, na in 1usize..6) {
            let t = random_configuration(k, l, na, seed).unwrap();
            prop_assert!(validate_configuration(&t).is_ok());
        }
    }
}

//! Reflection-dominated channel model: the sensing dictionary mapping
//! block reflection coefficients to per-(group, state) received
//! contributions, the direct LoS gain, and noisy measurement synthesis.
//!
//! Each dictionary entry sums, over the elements of one group, the
//! two-segment path gain
//! `lambda * r * sqrt(g_T g_R) * exp(-j*2*pi*(d_n + d_nm)/lambda) / (4*pi*d_n*d_nm)`
//! so the matrix form `t_k^T A eta` reproduces the per-element channel
//! sum exactly.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{distance, norm, sub, SceneGeometry};
use crate::par;
use crate::ris::{ConfigurationMatrix, StateTable};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier, power, antenna-gain, and noise parameters of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    /// Carrier frequency f_c in Hz.
    pub carrier_frequency: f64,
    /// Transmit power P_t in watts (linear).
    pub transmit_power: f64,
    /// Tx/Rx gains on the direct LoS path.
    pub tx_gain_los: f64,
    pub rx_gain_los: f64,
    /// Tx gain toward RIS elements inside the horn main lobe.
    pub tx_gain: f64,
    /// Rx gain toward space blocks (omnidirectional antenna).
    pub rx_gain: f64,
    /// Half beamwidth of the Tx horn in degrees; elements farther off the
    /// Tx-to-RIS-center boresight see zero gain.
    pub tx_half_beamwidth_deg: f64,
    /// Variance of the per-frame multipath gain h_rl (complex, total).
    pub multipath_variance: f64,
    /// Variance of the per-frame receiver noise (complex, total).
    pub noise_variance: f64,
    /// Whether the constant Tx-to-Rx LoS offset enters the measurement.
    pub include_los: bool,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            carrier_frequency: 3.198e9,
            transmit_power: 1.0,
            tx_gain_los: 1.0,
            rx_gain_los: 1.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
            tx_half_beamwidth_deg: 30.0,
            multipath_variance: 0.0,
            noise_variance: 0.0,
            include_los: true,
        }
    }
}

impl RadioParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_frequency <= 0.0 {
            return Err(Error::InvalidParameter("carrier frequency must be positive".into()));
        }
        if self.transmit_power <= 0.0 {
            return Err(Error::InvalidParameter("transmit power must be positive".into()));
        }
        if self.multipath_variance < 0.0 || self.noise_variance < 0.0 {
            return Err(Error::InvalidParameter("noise variances must be >= 0".into()));
        }
        if [self.tx_gain_los, self.rx_gain_los, self.tx_gain, self.rx_gain]
            .iter()
            .any(|&g| g < 0.0)
        {
            return Err(Error::InvalidParameter("antenna gains must be >= 0".into()));
        }
        Ok(())
    }

    /// Splits a target reflected-term SNR into the two noise variances:
    /// `P_t^2 * eps_rl + eps_n = reflected_power / 10^(snr_db/10)`,
    /// half the noise power on each term.
    pub fn set_noise_for_snr(&mut self, reflected_power: f64, snr_db: f64) {
        let total = reflected_power / 10f64.powf(snr_db / 10.0);
        self.multipath_variance = 0.5 * total / (self.transmit_power * self.transmit_power);
        self.noise_variance = 0.5 * total;
    }

    pub fn canonical_string(&self) -> String {
        format!(
            "radio v1 fc={:e} pt={:e} glos=({:e},{:e}) g=({:e},{:e}) bw={:e} los={}",
            self.carrier_frequency,
            self.transmit_power,
            self.tx_gain_los,
            self.rx_gain_los,
            self.tx_gain,
            self.rx_gain,
            self.tx_half_beamwidth_deg,
            self.include_los,
        )
    }
}

/// Direct Tx-to-Rx LoS channel gain
/// `(lambda / 4 pi) * sqrt(g_T g_R) * exp(-j 2 pi d / lambda) / d`.
pub fn direct_los_gain(params: &RadioParams, d_los: f64) -> Result<Complex64> {
    if d_los <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "LoS distance must be positive, got {d_los}"
        )));
    }
    let lambda = params.wavelength();
    let magnitude =
        lambda / (4.0 * std::f64::consts::PI) * (params.tx_gain_los * params.rx_gain_los).sqrt()
            / d_los;
    let phase = -2.0 * std::f64::consts::PI * d_los / lambda;
    Ok(Complex64::from_polar(magnitude, phase))
}

/// The (L*N_a) x M sensing dictionary A. Row `l * N_a + i` holds the
/// contribution of group `l` dwelling in state `i`; column `m` is the
/// response of the m-th space block.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingDictionary {
    matrix: Array2<Complex64>,
    groups: usize,
    states: usize,
}

impl SensingDictionary {
    pub fn from_matrix(matrix: Array2<Complex64>, groups: usize, states: usize) -> Result<Self> {
        if matrix.nrows() != groups * states {
            return Err(Error::ShapeMismatch(format!(
                "dictionary has {} rows but L*N_a = {}",
                matrix.nrows(),
                groups * states
            )));
        }
        Ok(Self { matrix, groups, states })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn block_count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row_index(&self, group: usize, state: usize) -> usize {
        group * self.states + state
    }
}

/// Builds the sensing dictionary for a scene, state table, and radio
/// parameters. Cells are independent, so columns are computed in
/// parallel when the `parallel` feature is on; outputs are bit-identical
/// either way.
pub fn build_dictionary(
    scene: &SceneGeometry,
    table: &StateTable,
    params: &RadioParams,
) -> Result<SensingDictionary> {
    build_dictionary_inner(scene, table, params, false)
}

/// Sequential twin of [`build_dictionary`], kept for benchmarking the
/// data-parallel speedup.
#[doc(hidden)]
pub fn build_dictionary_sequential(
    scene: &SceneGeometry,
    table: &StateTable,
    params: &RadioParams,
) -> Result<SensingDictionary> {
    build_dictionary_inner(scene, table, params, true)
}

fn build_dictionary_inner(
    scene: &SceneGeometry,
    table: &StateTable,
    params: &RadioParams,
    force_sequential: bool,
) -> Result<SensingDictionary> {
    scene.validate()?;
    table.validate()?;
    params.validate()?;
    let lambda = params.wavelength();
    let l_count = scene.group_count();
    let n_a = table.state_count();
    let m_count = scene.block_count();

    // Per-element constants: position, Tx distance, horn gain.
    let boresight = sub([0.0, 0.0, 0.0], scene.tx_position);
    let boresight_len = norm(boresight);
    let half_beam = params.tx_half_beamwidth_deg.to_radians();
    let mut elements = Vec::with_capacity(scene.element_count());
    for n in 0..scene.element_count() {
        let pos = scene.element_position(n)?;
        let d_n = distance(scene.tx_position, pos);
        let toward = sub(pos, scene.tx_position);
        let cos_off = (toward[0] * boresight[0] + toward[1] * boresight[1]
            + toward[2] * boresight[2])
            / (norm(toward) * boresight_len);
        let off = cos_off.clamp(-1.0, 1.0).acos();
        let g_t = if off <= half_beam { params.tx_gain } else { 0.0 };
        elements.push((pos, d_n, g_t));
    }
    let groups: Vec<Vec<usize>> =
        (0..l_count).map(|l| scene.elements_in_group(l)).collect::<Result<_>>()?;
    let state_factors: Vec<Complex64> = (0..n_a)
        .map(|i| Complex64::from_polar(table.states[i].amplitude, table.states[i].phase))
        .collect();
    let q = table.pattern_exponent;
    let two_pi = 2.0 * std::f64::consts::PI;
    let four_pi = 4.0 * std::f64::consts::PI;

    let column = |m: usize| -> Vec<Complex64> {
        let block = scene.block_center(m).expect("block index in range");
        let d_block_rx = distance(block, scene.rx_position);
        let mut col = vec![Complex64::default(); l_count * n_a];
        for (l, members) in groups.iter().enumerate() {
            // The state phasor factors out of the element sum; the
            // element pattern cos^q depends only on the reflection angle.
            let mut base = Complex64::default();
            for &n in members {
                let (pos, d_n, g_t) = elements[n];
                if g_t == 0.0 {
                    continue;
                }
                let d_nm = distance(pos, block) + d_block_rx;
                let pattern = if q == 0.0 {
                    1.0
                } else {
                    let dir = sub(block, pos);
                    (dir[0] / norm(dir)).clamp(-1.0, 1.0).max(0.0).powf(q)
                };
                let magnitude = lambda * pattern * (g_t * params.rx_gain).sqrt()
                    / (four_pi * d_n * d_nm);
                let phase = -two_pi * (d_n + d_nm) / lambda;
                base += Complex64::from_polar(magnitude, phase);
            }
            for (i, factor) in state_factors.iter().enumerate() {
                col[l * n_a + i] = base * factor;
            }
        }
        col
    };

    let columns: Vec<Vec<Complex64>> = if force_sequential {
        par::map_indexed_seq(m_count, column)
    } else {
        par::map_indexed(m_count, 1, column)
    };
    let matrix = Array2::from_shape_fn((l_count * n_a, m_count), |(r, c)| columns[c][r]);
    SensingDictionary::from_matrix(matrix, l_count, n_a)
}

/// The M complex block reflection coefficients of one scene realization;
/// sparse, nonzero exactly on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceReflectionVector {
    values: Vec<Complex64>,
    support: Vec<usize>,
}

impl SpaceReflectionVector {
    pub fn zero(blocks: usize) -> Self {
        Self { values: vec![Complex64::default(); blocks], support: Vec::new() }
    }

    pub fn from_values(values: Vec<Complex64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { values, support }
    }

    pub fn from_sparse(blocks: usize, entries: &[(usize, Complex64)]) -> Result<Self> {
        let mut values = vec![Complex64::default(); blocks];
        for &(idx, v) in entries {
            if idx >= blocks {
                return Err(Error::IndexOutOfRange {
                    what: "space block",
                    index: idx,
                    size: blocks,
                });
            }
            values[idx] = v;
        }
        Ok(Self::from_values(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

/// Whether measurement synthesis draws the random noise terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    On,
    Off,
}

/// The K per-frame mean received values of one recognition period.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<Complex64>,
    pub seed: u64,
    pub noisy: bool,
}

/// Synthesizes the per-frame mean measurements
/// `y_k = h_d P_t + P_t (t_k^T A eta) + h_rl P_t + sigma`,
/// the noise terms drawn per frame as circular complex Gaussians from a
/// generator seeded with `seed` (multipath first, receiver noise second).
pub fn synthesize_measurement(
    config: &ConfigurationMatrix,
    dictionary: &SensingDictionary,
    eta: &SpaceReflectionVector,
    params: &RadioParams,
    d_los: f64,
    noise: NoiseMode,
    seed: u64,
) -> Result<MeasurementVector> {
    params.validate()?;
    let rows = dictionary.matrix().nrows();
    let config_cols = config.group_count() * config.state_count();
    if config_cols != rows {
        return Err(Error::ShapeMismatch(format!(
            "configuration has {config_cols} columns but the dictionary has {rows} rows"
        )));
    }
    if eta.len() != dictionary.block_count() {
        return Err(Error::ShapeMismatch(format!(
            "reflection vector has {} blocks but the dictionary has {}",
            eta.len(),
            dictionary.block_count()
        )));
    }

    // A * eta once, then one real-complex dot per frame.
    let mut a_eta = vec![Complex64::default(); rows];
    for &m in eta.support() {
        let v = eta.values()[m];
        for (r, out) in a_eta.iter_mut().enumerate() {
            *out += dictionary.matrix()[(r, m)] * v;
        }
    }

    let offset = if params.include_los {
        direct_los_gain(params, d_los)? * params.transmit_power
    } else {
        Complex64::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(config.frame_count());
    for frame in config.frames() {
        let mut reflected = Complex64::default();
        for (t, a) in frame.as_flat().iter().zip(&a_eta) {
            reflected += a * *t;
        }
        let mut y = offset + reflected * params.transmit_power;
        if noise == NoiseMode::On {
            let multipath = complex_gaussian(&mut rng, params.multipath_variance);
            let thermal = complex_gaussian(&mut rng, params.noise_variance);
            y += multipath * params.transmit_power + thermal;
        }
        values.push(y);
    }
    Ok(MeasurementVector { values, seed, noisy: noise == NoiseMode::On })
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    if variance <= 0.0 {
        return Complex64::default();
    }
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("valid std dev");
    Complex64::new(normal.sample(rng), normal.sample(rng))
}

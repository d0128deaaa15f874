//! Synthetic posture scenes: occupancy masks, sparse space-reflection
//! vectors with configurable reflectivity distributions, and labeled
//! measurement datasets.
//!
//! Every random quantity derives from the master seed through a
//! splitmix-based substream per (class, sample, purpose), so dataset
//! generation is reproducible and embarrassingly parallel across
//! samples.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    direct_los_gain, synthesize_measurement, NoiseMode, RadioParams, SensingDictionary,
    SpaceReflectionVector,
};
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::par;
use crate::recognizer::{LabeledDataset, SplitTag};
use crate::ris::ConfigurationMatrix;

/// One recognizable posture: which blocks it occupies and how its
/// surfaces reflect.
#[derive(Debug, Clone, PartialEq)]
pub struct PostureSpec {
    pub name: String,
    /// Block indices the posture occupies; entries outside are exactly 0.
    pub occupancy: Vec<usize>,
    /// Uniform range of reflection magnitudes on active blocks.
    pub magnitude_range: (f64, f64),
    /// Uniform range of reflection phases in radians.
    pub phase_range: (f64, f64),
    /// Probability that an occupied block reflects toward the Rx in a
    /// given realization; at least one block is always active.
    pub activation_probability: f64,
}

impl PostureSpec {
    pub fn new(name: impl Into<String>, occupancy: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            occupancy,
            magnitude_range: (0.1, 0.5),
            phase_range: (0.0, std::f64::consts::TAU),
            activation_probability: 0.7,
        }
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        if self.occupancy.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "posture '{}' occupies no blocks",
                self.name
            )));
        }
        if let Some(&bad) = self.occupancy.iter().find(|&&m| m >= blocks) {
            return Err(Error::IndexOutOfRange { what: "space block", index: bad, size: blocks });
        }
        if !(0.0..=1.0).contains(&self.activation_probability) {
            return Err(Error::InvalidParameter("activation probability outside [0,1]".into()));
        }
        if self.magnitude_range.0 > self.magnitude_range.1 || self.magnitude_range.0 < 0.0 {
            return Err(Error::InvalidParameter("bad magnitude range".into()));
        }
        if self.phase_range.0 > self.phase_range.1 {
            return Err(Error::InvalidParameter("bad phase range".into()));
        }
        Ok(())
    }
}

/// The four standard postures on the 2x5x8 block grid: a full-height
/// column for standing, truncated columns plus protruding blocks for
/// sitting and bending, and a ground row for lying.
pub fn default_postures(scene: &SceneGeometry) -> Result<Vec<PostureSpec>> {
    let [mx, my, mz] = scene.block_counts;
    if mx < 2 || my < 3 || mz < 8 {
        return Err(Error::InvalidGeometry(format!(
            "default postures need a grid of at least 2x3x8 blocks, got {mx}x{my}x{mz}"
        )));
    }
    let idx = |x: usize, y: usize, z: usize| scene.block_index(x, y, z);
    let mid = my / 2;
    let mut standing = Vec::new();
    for z in 0..8 {
        standing.push(idx(0, mid, z)?);
    }
    let mut sitting = Vec::new();
    for z in 0..5 {
        sitting.push(idx(0, mid, z)?);
    }
    sitting.push(idx(1, mid, 2)?);
    let mut bending = Vec::new();
    for z in 0..4 {
        bending.push(idx(0, mid, z)?);
    }
    bending.push(idx(1, mid, 3)?);
    bending.push(idx(1, mid, 4)?);
    let mut lying = Vec::new();
    for y in 0..5.min(my) {
        lying.push(idx(0, y, 0)?);
    }
    Ok(vec![
        PostureSpec::new("standing", standing),
        PostureSpec::new("sitting", sitting),
        PostureSpec::new("bending", bending),
        PostureSpec::new("lying", lying),
    ])
}

/// Draws one sparse space-reflection vector for a posture: each occupied
/// block activates with the configured probability (one forced active if
/// none fire) and active blocks get a uniform magnitude and phase.
pub fn posture_reflection_vector(
    spec: &PostureSpec,
    blocks: usize,
    seed: u64,
) -> Result<SpaceReflectionVector> {
    spec.validate(blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<usize> = spec
        .occupancy
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < spec.activation_probability)
        .collect();
    if active.is_empty() {
        let pick = (rng.random::<u64>() % spec.occupancy.len() as u64) as usize;
        active.push(spec.occupancy[pick]);
    }
    let (lo, hi) = spec.magnitude_range;
    let (plo, phi) = spec.phase_range;
    let entries: Vec<(usize, Complex64)> = active
        .iter()
        .map(|&m| {
            let magnitude = lo + rng.random::<f64>() * (hi - lo);
            let phase = plo + rng.random::<f64>() * (phi - plo);
            (m, Complex64::from_polar(magnitude.max(f64::MIN_POSITIVE), phase))
        })
        .collect();
    SpaceReflectionVector::from_sparse(blocks, &entries)
}

/// Sampling protocol of one dataset: per-class sizes, the split, and the
/// noise setting.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub samples_per_class: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: NoiseMode,
    /// When set, the channel noise variances are calibrated so the
    /// reflected term sees this SNR (averaged over the clean dataset).
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0 {
            return Err(Error::InvalidParameter("samples per class must be >= 1".into()));
        }
        if self.train_per_class + self.test_per_class != self.samples_per_class {
            return Err(Error::InvalidParameter(format!(
                "split {} + {} does not sum to {} samples per class",
                self.train_per_class, self.test_per_class, self.samples_per_class
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for (class, sample, purpose) under a master seed.
/// Also used by callers that need several independent streams from one
/// experiment seed.
pub fn derive_seed(master: u64, class: usize, sample: usize, purpose: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ splitmix64(class as u64));
    h = splitmix64(h ^ splitmix64(sample as u64));
    splitmix64(h ^ splitmix64(purpose))
}

/// Generates one labeled train/test pair: per class and sample a fresh
/// reflection vector and a measurement through the channel. When
/// `spec.snr_db` is set, the noise variances are first calibrated on the
/// clean reflected signals. Deterministic given the master seed.
pub fn generate_dataset(
    config: &ConfigurationMatrix,
    dictionary: &SensingDictionary,
    postures: &[PostureSpec],
    spec: &DatasetSpec,
    params: &RadioParams,
    d_los: f64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    if postures.len() < 2 {
        return Err(Error::InvalidParameter("need at least two postures".into()));
    }
    let blocks = dictionary.block_count();
    for posture in postures {
        posture.validate(blocks)?;
    }

    // Reflection vectors first: they fix the clean reflected power that
    // the SNR calibration needs.
    let per_class = spec.samples_per_class;
    let total = postures.len() * per_class;
    let etas: Vec<SpaceReflectionVector> = par::map_indexed(total, 8, |j| {
        let class = j / per_class;
        let sample = j % per_class;
        posture_reflection_vector(
            &postures[class],
            blocks,
            derive_seed(spec.seed, class, sample, 0),
        )
        .expect("validated posture")
    });

    let mut effective = params.clone();
    if let Some(snr_db) = spec.snr_db {
        let offset = if params.include_los {
            direct_los_gain(params, d_los)? * params.transmit_power
        } else {
            Complex64::default()
        };
        let mut power = 0.0;
        let mut count = 0usize;
        for eta in &etas {
            let clean =
                synthesize_measurement(config, dictionary, eta, params, d_los, NoiseMode::Off, 0)?;
            for v in &clean.values {
                power += (v - offset).norm_sqr();
                count += 1;
            }
        }
        effective.set_noise_for_snr(power / count.max(1) as f64, snr_db);
    }

    let measurements: Vec<Vec<Complex64>> = par::map_indexed(total, 8, |j| {
        let class = j / per_class;
        let sample = j % per_class;
        synthesize_measurement(
            config,
            dictionary,
            &etas[j],
            &effective,
            d_los,
            spec.noise,
            derive_seed(spec.seed, class, sample, 1),
        )
        .expect("shapes validated")
        .values
    });

    let mut train = Vec::with_capacity(postures.len() * spec.train_per_class);
    let mut test = Vec::with_capacity(postures.len() * spec.test_per_class);
    for class in 0..postures.len() {
        for sample in 0..per_class {
            let y = measurements[class * per_class + sample].clone();
            if sample < spec.train_per_class {
                train.push((y, class + 1));
            } else {
                test.push((y, class + 1));
            }
        }
    }
    Ok((
        LabeledDataset::new(train, postures.len(), SplitTag::Train)?,
        LabeledDataset::new(test, postures.len(), SplitTag::Test)?,
    ))
}

//! Experiment configuration: one TOML file with nested sections, parsed
//! strictly (unknown keys are errors — silent typos corrupt experiments).
//! Most fields default to the standard simulation layout, so a minimal
//! config is just a seed plus whatever differs from it.

use serde::Deserialize;
use std::path::Path;

use ris_sensing::channel::{NoiseMode, RadioParams};
use ris_sensing::fcao::FcaoParams;
use ris_sensing::geometry::SceneGeometry;
use ris_sensing::recognizer::{Activation, CostModel, InitScheme, TrainOptions};
use ris_sensing::ris::{RisState, StateTable};
use ris_sensing::scenes::{default_postures, DatasetSpec, PostureSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub states: StatesSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub fcao: FcaoSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub cost: CostSection,
}

fn default_out_dir() -> String {
    "runs/out".into()
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CliError::config(format!("{}: {e}", path.as_ref().display())))?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(CliError::config)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(CliError::config)?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-field consistency beyond what serde can see.
    pub fn validate(&self) -> Result<()> {
        self.scene_geometry()?;
        self.state_table()?;
        self.radio_params()?;
        self.fcao_params().validate().map_err(CliError::config)?;
        let spec = self.dataset_spec();
        spec.validate().map_err(CliError::config)?;
        if self.protocol.frames == 0 {
            return Err(CliError::Config("protocol.frames must be >= 1".into()));
        }
        if self.protocol.frame_length <= 0.0 {
            return Err(CliError::Config("protocol.frame_length must be positive".into()));
        }
        let scene = self.scene_geometry()?;
        let postures = self.postures(&scene)?;
        if postures.len() < 2 {
            return Err(CliError::Config("need at least two postures".into()));
        }
        for p in &postures {
            p.validate(scene.block_count()).map_err(CliError::config)?;
        }
        self.cost_model(postures.len())?;
        self.train_options()?;
        Ok(())
    }

    pub fn scene_geometry(&self) -> Result<SceneGeometry> {
        let s = &self.scene;
        let tx = s.tx_position.unwrap_or_else(|| {
            let az = 60.0f64.to_radians();
            [1.2 * az.cos(), 1.2 * az.sin(), 0.0]
        });
        let rx = s.rx_position.unwrap_or_else(|| {
            let bottom = -(s.ris_rows as f64) * s.element_pitch / 2.0;
            [0.0, 0.0, bottom - 0.05]
        });
        SceneGeometry::new(
            s.ris_rows,
            s.ris_cols,
            s.element_pitch,
            s.group_rows,
            s.group_cols,
            tx,
            rx,
            s.soi_origin,
            s.block_side,
            s.block_counts,
        )
        .map_err(CliError::config)
    }

    pub fn state_table(&self) -> Result<StateTable> {
        let s = &self.states;
        let table = match (&s.amplitudes, &s.phases) {
            (None, None) => {
                let mut t = StateTable::default();
                t.pattern_exponent = s.pattern_exponent;
                t
            }
            (Some(amps), Some(phases)) => {
                if amps.len() != phases.len() {
                    return Err(CliError::Config(
                        "states.amplitudes and states.phases differ in length".into(),
                    ));
                }
                let states = amps
                    .iter()
                    .zip(phases)
                    .map(|(&amplitude, &phase)| RisState { amplitude, phase })
                    .collect();
                StateTable::new(states, s.pattern_exponent).map_err(CliError::config)?
            }
            _ => {
                return Err(CliError::Config(
                    "states.amplitudes and states.phases must be given together".into(),
                ))
            }
        };
        table.validate().map_err(CliError::config)?;
        Ok(table)
    }

    pub fn radio_params(&self) -> Result<RadioParams> {
        let r = &self.radio;
        let params = RadioParams {
            carrier_frequency: r.carrier_frequency,
            transmit_power: r.transmit_power,
            tx_gain_los: r.tx_gain_los,
            rx_gain_los: r.rx_gain_los,
            tx_gain: r.tx_gain,
            rx_gain: r.rx_gain,
            tx_half_beamwidth_deg: r.tx_half_beamwidth_deg,
            multipath_variance: r.multipath_variance,
            noise_variance: r.noise_variance,
            include_los: r.include_los,
        };
        params.validate().map_err(CliError::config)?;
        Ok(params)
    }

    pub fn fcao_params(&self) -> FcaoParams {
        let f = &self.fcao;
        FcaoParams {
            max_outer_iterations: f.max_outer_iterations,
            lagrangian_rounds: f.lagrangian_rounds,
            alternating_rounds: f.alternating_rounds,
            prox_steps: f.prox_steps,
            prox_initial_step: f.prox_initial_step,
            pattern_budget: f.pattern_budget,
            pattern_initial_step: f.pattern_initial_step,
            pattern_min_step: f.pattern_min_step,
            rho_initial: f.rho_initial,
            rho_growth: f.rho_growth,
            rho_max: f.rho_max,
            mu_tolerance: f.mu_tolerance,
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let d = &self.dataset;
        DatasetSpec {
            samples_per_class: d.samples_per_class,
            train_per_class: d.train_per_class,
            test_per_class: d.test_per_class,
            noise: if d.noise { NoiseMode::On } else { NoiseMode::Off },
            snr_db: d.snr_db,
            seed: self.seed,
        }
    }

    pub fn postures(&self, scene: &SceneGeometry) -> Result<Vec<PostureSpec>> {
        let d = &self.dataset;
        let mut postures = match &d.postures {
            None => default_postures(scene).map_err(CliError::config)?,
            Some(defs) => {
                let mut out = Vec::new();
                for def in defs {
                    let mut occupancy = Vec::new();
                    for b in &def.blocks {
                        occupancy.push(
                            scene.block_index(b[0], b[1], b[2]).map_err(CliError::config)?,
                        );
                    }
                    out.push(PostureSpec::new(def.name.clone(), occupancy));
                }
                out
            }
        };
        for p in &mut postures {
            p.activation_probability = d.activation_probability;
            p.magnitude_range = (d.magnitude_range[0], d.magnitude_range[1]);
            p.phase_range = (d.phase_range[0], d.phase_range[1]);
        }
        Ok(postures)
    }

    pub fn cost_model(&self, classes: usize) -> Result<CostModel> {
        let c = &self.cost;
        let mut model = match &c.matrix {
            None => CostModel::zero_one(classes),
            Some(rows) => {
                if rows.len() != classes || rows.iter().any(|r| r.len() != classes) {
                    return Err(CliError::Config(format!(
                        "cost.matrix must be {classes}x{classes}"
                    )));
                }
                let mut model = CostModel::zero_one(classes);
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        model.costs[(i, j)] = v;
                    }
                }
                model
            }
        };
        if let Some(priors) = &c.priors {
            if priors.len() != classes {
                return Err(CliError::Config(format!("cost.priors must have {classes} entries")));
            }
            model.priors = priors.clone();
        }
        model.validate().map_err(CliError::config)?;
        Ok(model)
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let n = &self.network;
        let t = &self.training;
        let activation = Activation::from_tag(&n.activation).map_err(CliError::config)?;
        let init = match n.init.as_str() {
            "uniform01" => InitScheme::Uniform01,
            "scaled" => InitScheme::ScaledUniform,
            other => {
                return Err(CliError::Config(format!(
                    "network.init must be 'uniform01' or 'scaled', got '{other}'"
                )))
            }
        };
        if !(t.learning_rate > 0.0 && t.learning_rate < 1.0) {
            return Err(CliError::Config("training.learning_rate must lie in (0, 1)".into()));
        }
        Ok(TrainOptions {
            hidden: n.hidden.clone(),
            activation,
            init,
            standardize: n.standardize,
            max_epochs: t.max_epochs,
            patience: t.patience,
            shuffle: t.shuffle,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.training.learning_rate
    }

    pub fn frames(&self) -> usize {
        self.protocol.frames
    }

    pub fn frame_length(&self) -> f64 {
        self.protocol.frame_length
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub ris_rows: usize,
    pub ris_cols: usize,
    pub element_pitch: f64,
    pub group_rows: usize,
    pub group_cols: usize,
    pub tx_position: Option<[f64; 3]>,
    pub rx_position: Option<[f64; 3]>,
    pub soi_origin: [f64; 3],
    pub block_side: f64,
    pub block_counts: [usize; 3],
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            ris_rows: 48,
            ris_cols: 48,
            element_pitch: 0.015,
            group_rows: 4,
            group_cols: 4,
            tx_position: None,
            rx_position: None,
            soi_origin: [1.0, -0.5, -0.8],
            block_side: 0.2,
            block_counts: [2, 5, 8],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub carrier_frequency: f64,
    pub transmit_power: f64,
    pub tx_gain_los: f64,
    pub rx_gain_los: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub tx_half_beamwidth_deg: f64,
    pub multipath_variance: f64,
    pub noise_variance: f64,
    pub include_los: bool,
}

impl Default for RadioSection {
    fn default() -> Self {
        let p = RadioParams::default();
        Self {
            carrier_frequency: p.carrier_frequency,
            transmit_power: p.transmit_power,
            tx_gain_los: p.tx_gain_los,
            rx_gain_los: p.rx_gain_los,
            tx_gain: p.tx_gain,
            rx_gain: p.rx_gain,
            tx_half_beamwidth_deg: p.tx_half_beamwidth_deg,
            multipath_variance: p.multipath_variance,
            noise_variance: p.noise_variance,
            include_los: p.include_los,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StatesSection {
    pub pattern_exponent: f64,
    pub amplitudes: Option<Vec<f64>>,
    pub phases: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub frames: usize,
    pub frame_length: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { frames: 10, frame_length: 1e-3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcaoSection {
    pub max_outer_iterations: usize,
    pub lagrangian_rounds: usize,
    pub alternating_rounds: usize,
    pub prox_steps: usize,
    pub prox_initial_step: f64,
    pub pattern_budget: usize,
    pub pattern_initial_step: f64,
    pub pattern_min_step: f64,
    pub rho_initial: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub mu_tolerance: f64,
}

impl Default for FcaoSection {
    fn default() -> Self {
        let p = FcaoParams::default();
        Self {
            max_outer_iterations: p.max_outer_iterations,
            lagrangian_rounds: p.lagrangian_rounds,
            alternating_rounds: p.alternating_rounds,
            prox_steps: p.prox_steps,
            prox_initial_step: p.prox_initial_step,
            pattern_budget: p.pattern_budget,
            pattern_initial_step: p.pattern_initial_step,
            pattern_min_step: p.pattern_min_step,
            rho_initial: p.rho_initial,
            rho_growth: p.rho_growth,
            rho_max: p.rho_max,
            mu_tolerance: p.mu_tolerance,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub samples_per_class: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: bool,
    pub snr_db: Option<f64>,
    pub activation_probability: f64,
    pub magnitude_range: [f64; 2],
    pub phase_range: [f64; 2],
    pub postures: Option<Vec<PostureDef>>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            samples_per_class: 150,
            train_per_class: 120,
            test_per_class: 30,
            noise: true,
            snr_db: Some(20.0),
            activation_probability: 0.7,
            magnitude_range: [0.1, 0.5],
            phase_range: [0.0, std::f64::consts::TAU],
            postures: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostureDef {
    pub name: String,
    /// Per-axis block indices (x, y, z).
    pub blocks: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
    pub activation: String,
    pub init: String,
    pub standardize: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: "relu".into(),
            init: "scaled".into(),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub shuffle: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self { learning_rate: 0.05, max_epochs: 200, patience: 1, shuffle: true }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub matrix: Option<Vec<Vec<f64>>>,
    pub priors: Option<Vec<f64>>,
}

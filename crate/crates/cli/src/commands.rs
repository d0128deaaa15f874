//! The experiment pipeline behind each CLI subcommand. Commands are
//! plain functions over a parsed config so tests can drive them without
//! spawning processes; `main` only maps arguments and exit codes.

use std::path::{Path, PathBuf};

use ris_sensing::artifact::{
    configuration_hash, dictionary_hash, read_configuration, read_dataset, sha256_hex,
    write_compare_report, write_coherence_report, write_configuration, write_dataset,
    write_dictionary, write_eval_report, write_model, write_mu_history, CompareRow,
    DatasetProvenance,
};
use ris_sensing::channel::{build_dictionary, RadioParams, SensingDictionary};
use ris_sensing::coherence::{average_mutual_coherence, column_coherences, measurement_matrix};
use ris_sensing::fcao::fcao_optimize;
use ris_sensing::geometry::SceneGeometry;
use ris_sensing::recognizer::{evaluate, train, LabeledDataset};
use ris_sensing::ris::{
    fixed_state_configuration, random_configuration, validate_configuration, ConfigurationMatrix,
};
use ris_sensing::scenes::{derive_seed, generate_dataset};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

// Substream purposes under the experiment seed.
const PURPOSE_INITIAL_T: u64 = 10;
const PURPOSE_RANDOM_T: u64 = 11;
const PURPOSE_TRAINING: u64 = 20;

/// Scene, dictionary, and hashes shared by every command.
pub struct PipelineInputs {
    pub scene: SceneGeometry,
    pub params: RadioParams,
    pub dictionary: SensingDictionary,
    pub scene_hash: String,
    pub dictionary_hash: String,
}

pub fn build_inputs(config: &ExperimentConfig) -> Result<PipelineInputs> {
    let scene = config.scene_geometry()?;
    let table = config.state_table()?;
    let params = config.radio_params()?;
    let dictionary =
        build_dictionary(&scene, &table, &params).map_err(CliError::numeric)?;
    let scene_hash = sha256_hex(scene.canonical_string().as_bytes());
    let a_hash = dictionary_hash(&dictionary, params.carrier_frequency, &scene_hash);
    Ok(PipelineInputs { scene, params, dictionary, scene_hash, dictionary_hash: a_hash })
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(CliError::artifact)
}

pub struct OptimizeSummary {
    pub initial_mu: f64,
    pub final_mu: f64,
    pub iterations: usize,
    pub t_path: PathBuf,
    pub history_path: PathBuf,
    pub dictionary_path: PathBuf,
}

/// Builds the dictionary, optimizes the configuration matrix from a
/// seeded random start, and writes the matrix, the coherence history,
/// and the dictionary artifact.
pub fn cmd_optimize_config(config: &ExperimentConfig, out: &Path) -> Result<OptimizeSummary> {
    ensure_dir(out)?;
    let inputs = build_inputs(config)?;
    let table = config.state_table()?;
    let initial = random_configuration(
        config.frames(),
        inputs.scene.group_count(),
        table.state_count(),
        derive_seed(config.seed, 0, 0, PURPOSE_INITIAL_T),
    )
    .map_err(CliError::numeric)?;
    let initial = with_frame_length(initial, config.frame_length())?;
    let outcome = fcao_optimize(&initial, &inputs.dictionary, &config.fcao_params())
        .map_err(CliError::numeric)?;

    let t_path = out.join("t_optimized.txt");
    let history_path = out.join("mu_history.csv");
    let dictionary_path = out.join("sensing_dictionary.txt");
    write_configuration(&t_path, &outcome.matrix, Some(&inputs.dictionary_hash))
        .map_err(CliError::artifact)?;
    write_mu_history(&history_path, outcome.initial_mu, &outcome.history)
        .map_err(CliError::artifact)?;
    write_dictionary(
        &dictionary_path,
        &inputs.dictionary,
        inputs.params.carrier_frequency,
        &inputs.scene_hash,
    )
    .map_err(CliError::artifact)?;
    Ok(OptimizeSummary {
        initial_mu: outcome.initial_mu,
        final_mu: outcome.mu,
        iterations: outcome.history.len(),
        t_path,
        history_path,
        dictionary_path,
    })
}

fn with_frame_length(
    matrix: ConfigurationMatrix,
    frame_length: f64,
) -> Result<ConfigurationMatrix> {
    ConfigurationMatrix::new(matrix.frames().to_vec(), frame_length).map_err(CliError::numeric)
}

/// Loads a stored configuration matrix and checks it against the
/// config-derived dictionary and protocol shape.
fn load_matrix_checked(
    config: &ExperimentConfig,
    inputs: &PipelineInputs,
    t_path: &Path,
) -> Result<ConfigurationMatrix> {
    let stored = read_configuration(t_path).map_err(CliError::artifact)?;
    if let Some(stored_hash) = &stored.dictionary_hash {
        if *stored_hash != inputs.dictionary_hash {
            return Err(CliError::Artifact(format!(
                "{} was optimized against dictionary {stored_hash}, but this config builds {}",
                t_path.display(),
                inputs.dictionary_hash
            )));
        }
    }
    let matrix = stored.matrix;
    let table = config.state_table()?;
    if matrix.frame_count() != config.frames()
        || matrix.group_count() != inputs.scene.group_count()
        || matrix.state_count() != table.state_count()
    {
        return Err(CliError::Artifact(format!(
            "{} has shape K={} L={} N_a={}, config expects K={} L={} N_a={}",
            t_path.display(),
            matrix.frame_count(),
            matrix.group_count(),
            matrix.state_count(),
            config.frames(),
            inputs.scene.group_count(),
            table.state_count()
        )));
    }
    let report = validate_configuration(&matrix);
    if !report.is_ok() {
        return Err(CliError::Artifact(format!(
            "{} violates the simplex constraints in {} places",
            t_path.display(),
            report.violations.len()
        )));
    }
    Ok(matrix)
}

pub struct GenDatasetSummary {
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_path: PathBuf,
    pub test_path: PathBuf,
}

/// Generates the labeled train/test datasets for a stored configuration
/// matrix; headers carry the matrix and dictionary hashes.
pub fn cmd_gen_dataset(
    config: &ExperimentConfig,
    t_path: &Path,
    out: &Path,
) -> Result<GenDatasetSummary> {
    ensure_dir(out)?;
    let inputs = build_inputs(config)?;
    let matrix = load_matrix_checked(config, &inputs, t_path)?;
    let postures = config.postures(&inputs.scene)?;
    let spec = config.dataset_spec();
    let (train_set, test_set) = generate_dataset(
        &matrix,
        &inputs.dictionary,
        &postures,
        &spec,
        &inputs.params,
        inputs.scene.los_distance(),
    )
    .map_err(CliError::numeric)?;

    let provenance = DatasetProvenance {
        t_hash: configuration_hash(&matrix),
        a_hash: inputs.dictionary_hash.clone(),
        seed: spec.seed,
    };
    let train_path = out.join("train.csv");
    let test_path = out.join("test.csv");
    write_dataset(&train_path, &train_set, &provenance).map_err(CliError::artifact)?;
    write_dataset(&test_path, &test_set, &provenance).map_err(CliError::artifact)?;
    Ok(GenDatasetSummary {
        train_rows: train_set.len(),
        test_rows: test_set.len(),
        train_path,
        test_path,
    })
}

pub struct TrainEvalSummary {
    pub accuracy: f64,
    pub psi_hat: f64,
    pub epochs: usize,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
}

/// Trains the decision network on a stored train split and evaluates it
/// on the matching test split.
pub fn cmd_train_eval(
    config: &ExperimentConfig,
    train_path: &Path,
    test_path: &Path,
    out: &Path,
) -> Result<TrainEvalSummary> {
    ensure_dir(out)?;
    let (train_set, train_prov) = read_dataset(train_path).map_err(CliError::artifact)?;
    let (test_set, test_prov) = read_dataset(test_path).map_err(CliError::artifact)?;
    if train_prov != test_prov {
        return Err(CliError::Artifact(format!(
            "train and test sets disagree on provenance: {train_prov:?} vs {test_prov:?}"
        )));
    }
    let summary = train_eval_in_memory(config, &train_set, &test_set, Some(out))?;
    Ok(summary)
}

fn train_eval_in_memory(
    config: &ExperimentConfig,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    out: Option<&Path>,
) -> Result<TrainEvalSummary> {
    let cost = config.cost_model(train_set.class_count)?;
    let options = config.train_options()?;
    let model = train(
        train_set,
        &cost,
        config.learning_rate(),
        derive_seed(config.seed, 0, 0, PURPOSE_TRAINING),
        &options,
    )
    .map_err(CliError::numeric)?;
    let report = evaluate(&model.network, test_set, &cost).map_err(CliError::numeric)?;

    let (model_path, report_path) = match out {
        Some(dir) => {
            let model_path = dir.join("model.txt");
            let report_path = dir.join("eval_report.csv");
            write_model(&model_path, &model.network).map_err(CliError::artifact)?;
            write_eval_report(&report_path, &report).map_err(CliError::artifact)?;
            (model_path, report_path)
        }
        None => (PathBuf::new(), PathBuf::new()),
    };
    Ok(TrainEvalSummary {
        accuracy: report.accuracy,
        psi_hat: report.empirical_cost,
        epochs: model.accepted_epochs,
        model_path,
        report_path,
    })
}

/// Runs the full pipeline for the optimized, random, and non-configurable
/// (all groups pinned to the first state) configuration matrices with a
/// shared dataset seed, and writes the three-row comparison table.
pub fn cmd_compare(config: &ExperimentConfig, out: &Path) -> Result<Vec<CompareRow>> {
    ensure_dir(out)?;
    let inputs = build_inputs(config)?;
    let table = config.state_table()?;
    let frames = config.frames();
    let groups = inputs.scene.group_count();
    let states = table.state_count();

    let initial = random_configuration(
        frames,
        groups,
        states,
        derive_seed(config.seed, 0, 0, PURPOSE_INITIAL_T),
    )
    .map_err(CliError::numeric)?;
    let optimized = fcao_optimize(&initial, &inputs.dictionary, &config.fcao_params())
        .map_err(CliError::numeric)?
        .matrix;
    write_configuration(
        &out.join("t_optimized.txt"),
        &optimized,
        Some(&inputs.dictionary_hash),
    )
    .map_err(CliError::artifact)?;

    let random = random_configuration(
        frames,
        groups,
        states,
        derive_seed(config.seed, 0, 0, PURPOSE_RANDOM_T),
    )
    .map_err(CliError::numeric)?;
    let fixed = fixed_state_configuration(frames, groups, states, 0).map_err(CliError::numeric)?;

    let mut rows = Vec::new();
    for (name, matrix) in [
        ("optimized", optimized),
        ("random", random),
        ("fixed_state", fixed),
    ] {
        let gamma =
            measurement_matrix(&matrix, &inputs.dictionary).map_err(CliError::numeric)?;
        let mu = average_mutual_coherence(&gamma).map_err(CliError::numeric)?;
        let postures = config.postures(&inputs.scene)?;
        let spec = config.dataset_spec();
        let (train_set, test_set) = generate_dataset(
            &matrix,
            &inputs.dictionary,
            &postures,
            &spec,
            &inputs.params,
            inputs.scene.los_distance(),
        )
        .map_err(CliError::numeric)?;
        let summary = train_eval_in_memory(config, &train_set, &test_set, None)?;
        rows.push(CompareRow {
            case: name.to_string(),
            mu,
            accuracy: summary.accuracy,
            psi_hat: summary.psi_hat,
        });
    }
    write_compare_report(&out.join("compare.csv"), &rows).map_err(CliError::artifact)?;
    Ok(rows)
}

/// Writes the per-pair |u| table and summary mu for a stored matrix, or
/// for a seeded random matrix when none is given.
pub fn cmd_coherence_report(
    config: &ExperimentConfig,
    t_path: Option<&Path>,
    out: &Path,
) -> Result<f64> {
    ensure_dir(out)?;
    let inputs = build_inputs(config)?;
    let table = config.state_table()?;
    let matrix = match t_path {
        Some(path) => load_matrix_checked(config, &inputs, path)?,
        None => random_configuration(
            config.frames(),
            inputs.scene.group_count(),
            table.state_count(),
            derive_seed(config.seed, 0, 0, PURPOSE_RANDOM_T),
        )
        .map_err(CliError::numeric)?,
    };
    let gamma = measurement_matrix(&matrix, &inputs.dictionary).map_err(CliError::numeric)?;
    let coherences = column_coherences(&gamma).map_err(CliError::numeric)?;
    let mu = ris_sensing::coherence::mu_from_coherences(&coherences);
    write_coherence_report(&out.join("coherence_report.csv"), &coherences, mu)
        .map_err(CliError::artifact)?;
    Ok(mu)
}

//! Scratch calibration harness (not part of the deliverable).

use std::time::Instant;

use ris_sensing::channel::{build_dictionary, NoiseMode, RadioParams};
use ris_sensing::coherence::{average_mutual_coherence, measurement_matrix};
use ris_sensing::fcao::{fcao_optimize, FcaoParams};
use ris_sensing::geometry::SceneGeometry;
use ris_sensing::recognizer::{evaluate, train, CostModel, InitScheme, TrainOptions};
use ris_sensing::ris::{
    fixed_state_configuration, random_configuration, ConfigurationMatrix, StateTable,
};
use ris_sensing::scenes::{default_postures, generate_dataset, DatasetSpec};

fn main() {
    let scene = SceneGeometry::default_scene();
    let params = RadioParams::default();
    let dictionary = build_dictionary(&scene, &StateTable::default(), &params).unwrap();
    let d_los = scene.los_distance();

    let t0 = Instant::now();
    let light = FcaoParams {
        lagrangian_rounds: 3,
        alternating_rounds: 4,
        prox_steps: 10,
        pattern_budget: 100,
        max_outer_iterations: 150,
        ..FcaoParams::default()
    };
    let optimized = fcao_optimize(
        &random_configuration(10, 16, 4, 42).unwrap(),
        &dictionary,
        &light,
    )
    .unwrap();
    println!("optimized in {:?}: mu {:.4}", t0.elapsed(), optimized.mu);

    let fixed = fixed_state_configuration(10, 16, 4, 0).unwrap();
    let cost = CostModel::zero_one(4);
    let options = TrainOptions {
        init: InitScheme::ScaledUniform,
        shuffle: true,
        ..TrainOptions::default()
    };

    let mu_of = |t: &ConfigurationMatrix| {
        average_mutual_coherence(&measurement_matrix(t, &dictionary).unwrap()).unwrap()
    };

    for (phase_width, activation) in
        [(std::f64::consts::TAU, 0.7), (1.5707963, 0.7), (0.7853982, 1.0)]
    {
        for snr in [10.0f64, 0.0, -5.0, -10.0] {
            let mut acc = [0.0f64; 3];
            let seeds = 2u64;
            for seed in 0..seeds {
                let spec = DatasetSpec {
                    samples_per_class: 150,
                    train_per_class: 120,
                    test_per_class: 30,
                    noise: NoiseMode::On,
                    snr_db: Some(snr),
                    seed: 9000 + seed,
                };
                let mut postures = default_postures(&scene).unwrap();
                for p in &mut postures {
                    p.phase_range = (0.0, phase_width);
                    p.activation_probability = activation;
                }
                let random_t = random_configuration(10, 16, 4, 7000 + seed).unwrap();
                for (i, t) in
                    [&optimized.matrix, &random_t, &fixed].into_iter().enumerate()
                {
                    let (train_set, test_set) =
                        generate_dataset(t, &dictionary, &postures, &spec, &params, d_los)
                            .unwrap();
                    let model = train(&train_set, &cost, 0.05, 100 + seed, &options).unwrap();
                    let report = evaluate(&model.network, &test_set, &cost).unwrap();
                    acc[i] += report.accuracy / seeds as f64;
                }
            }
            println!(
                "width={phase_width:.2} act={activation} snr={snr:>5}: opt {:.3} | rand {:.3} | fixed {:.3}",
                acc[0], acc[1], acc[2]
            );
        }
    }
    let _ = mu_of(&fixed);
    println!("total {:?}", t0.elapsed());
}

mod common;

use proptest::prelude::*;

use drivesim::evo::{evolve_generation, mutate, tournament_select, Evolution, EvolutionConfig};
use drivesim::formats::RunConfig;
use drivesim::neuro::SolutionVector;
use drivesim::pipeline::environment;
use drivesim::rng::rng_from_seed;
use drivesim::scenarios::preset;

#[test]
fn tournament_frequencies_match_enumeration() {
    let draws = 100_000;
    for k in 2..=6usize {
        for t in 2..=3usize.min(k) {
            // Ranks shuffled so index order and fitness order differ.
            let fitness: Vec<f64> = (0..k).map(|i| ((i * 7 + 3) % k) as f64).collect();
            let exact = common::tournament_probabilities(&fitness, t);
            let pop = common::population_with_fitness(&fitness);
            let mut rng = rng_from_seed((k * 10 + t) as u64);
            let mut counts = vec![0usize; k];
            for _ in 0..draws {
                counts[tournament_select(&pop, t, &mut rng).unwrap()] += 1;
            }
            for i in 0..k {
                let freq = counts[i] as f64 / draws as f64;
                assert!((freq - exact[i]).abs() <= 0.02, "K={k} t={t} i={i}: {freq} vs {}", exact[i]);
                if exact[i] >= 0.1 {
                    assert!((freq / exact[i] - 1.0).abs() <= 0.02, "K={k} t={t} i={i}: {freq} vs {}", exact[i]);
                }
            }
        }
    }
}

#[test]
fn mutation_noise_has_configured_std() {
    let genome = SolutionVector::zeros(10_000);
    let mut rng = rng_from_seed(77);
    let m = mutate(&genome, 0.1, 1.0, &mut rng);
    let n = m.len() as f64;
    let mean = m.0.iter().sum::<f64>() / n;
    let std = (m.0.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((0.097..=0.103).contains(&std), "std {std}");
}

fn small_config(seed: u64) -> (RunConfig, EvolutionConfig) {
    let cfg = RunConfig::default().with_seed(seed);
    let evo = EvolutionConfig {
        pop_size: 16,
        generations: 8,
        max_episode_ticks: 300,
        ..cfg.evo.clone()
    };
    (cfg, evo)
}

#[test]
fn elite_fitness_never_drops() {
    for seed in [1, 2] {
        let (cfg, evo_cfg) = small_config(seed);
        let env = environment(&cfg, &preset("curved_road").unwrap()).unwrap();
        let mut evo = Evolution::new(&env, evo_cfg).unwrap();
        evo.run(&env).unwrap();
        for w in evo.history.windows(2) {
            assert!(w[1].best_scalar >= w[0].best_scalar, "seed {seed}: {:?}", w);
        }
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let (cfg, evo_cfg) = small_config(5);
    let env = environment(&cfg, &preset("straight_highway").unwrap()).unwrap();
    let run = || {
        let mut e = Evolution::new(&env, evo_cfg.clone()).unwrap();
        e.run(&env).unwrap();
        (drivesim::evo::history_csv(&e.history), e.population)
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn population_and_genome_sizes_are_constant(seed in any::<u64>(), pop in 3usize..10) {
        let (cfg, mut evo_cfg) = small_config(seed);
        evo_cfg.pop_size = pop;
        evo_cfg.tournament_size = 2;
        evo_cfg.elite_count = 1;
        evo_cfg.max_episode_ticks = 60;
        let env = environment(&cfg, &preset("straight_highway").unwrap()).unwrap();
        let evo = Evolution::new(&env, evo_cfg.clone()).unwrap();
        let genes = evo.population.individuals[0].genome.len();
        let mut population = evo.population.clone();
        let mut rng = rng_from_seed(seed);
        for _ in 0..3 {
            population = evolve_generation(&population, &evo.topology, &env, &evo_cfg, &mut rng).unwrap();
            prop_assert_eq!(population.len(), pop);
            prop_assert!(population.individuals.iter().all(|i| i.genome.len() == genes && i.genome.is_finite()));
        }
    }
}

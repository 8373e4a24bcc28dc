mod common;

use proptest::prelude::*;

use sensorplace::evolve::Chromosome;
use sensorplace::fitness::{default_weights, evaluate_fitness};
use sensorplace::grid::{sample_occlusion_masks, Cell, OcclusionMask, Scenario};
use sensorplace::model::Problem;
use sensorplace::refine::{find_improving_move, local_search};
use sensorplace::symmetry::{augment_with_symmetry, SymmetryGroup};
use sensorplace::visibility::{coverage_counts, line_of_sight, Gene};

use common::{oracle_counts, oracle_fitness, oracle_los, random_genes, random_scenario};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn scenario_text_round_trips(seed in any::<u64>(), w in 1usize..12, h in 1usize..12, opaque in any::<bool>()) {
        let s = random_scenario(seed, w.max(2), h, opaque);
        let back = Scenario::parse(&s.to_text()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn coverage_matches_oracle(seed in any::<u64>(), gseed in any::<u64>()) {
        let s = random_scenario(seed, 12, 10, true);
        let genes = random_genes(&s, gseed, 6);
        for m in sample_occlusion_masks(&s, seed, 3) {
            prop_assert_eq!(coverage_counts(&genes, &s, &m).counts, oracle_counts(&genes, &s, &m));
        }
    }

    #[test]
    fn opacity_only_ever_hides(seed in any::<u64>(), a in 0usize..120, b in 0usize..120) {
        let s = random_scenario(seed, 12, 10, true);
        let (from, to) = (Cell::new(a % 12, a / 12), Cell::new(b % 12, b / 12));
        let clear = OcclusionMask::clear();
        let all = OcclusionMask { opaque_now: s.opacity().keys().copied().collect(), seed: 0 };
        for m in sample_occlusion_masks(&s, seed, 2) {
            let mid = line_of_sight(&s, &m, from, to);
            prop_assert_eq!(mid, oracle_los(&s, &m, from, to));
            // more opaque cells never reveal anything
            prop_assert!(!mid || line_of_sight(&s, &clear, from, to));
            prop_assert!(mid || !line_of_sight(&s, &all, from, to));
        }
    }

    #[test]
    fn fitness_matches_oracle(seed in any::<u64>(), gseed in any::<u64>()) {
        let s = random_scenario(seed, 10, 8, true);
        let genes = random_genes(&s, gseed, 5);
        let w = default_weights(s.n_road()).unwrap();
        let masks = sample_occlusion_masks(&s, seed, 3);
        let expect = oracle_fitness(&genes, &s, &w, &masks);
        let direct = evaluate_fitness(&genes, &s, &w, &masks);
        let p = Problem::new(s.clone(), masks, w).unwrap();
        let fast = p.fitness(&genes);
        let tol = 1e-9 * expect.abs().max(1.0);
        prop_assert!((direct - expect).abs() <= tol, "{direct} vs {expect}");
        prop_assert!((fast - expect).abs() <= tol, "{fast} vs {expect}");
    }

    #[test]
    fn local_search_is_monotone_and_stops_at_an_optimum(seed in any::<u64>(), gseed in any::<u64>()) {
        let s = random_scenario(seed, 9, 7, false);
        let w = default_weights(s.n_road()).unwrap();
        let p = Problem::new(s.clone(), vec![OcclusionMask::clear()], w).unwrap();
        let start = Chromosome::new(random_genes(&s, gseed, 4));
        let out = local_search(&start, &p);
        prop_assert!(out.fitness.unwrap() >= p.fitness(&start.genes));
        prop_assert!(p.is_valid(&out.genes));
        prop_assert!(find_improving_move(&out, &p).is_none());
    }

    #[test]
    fn augmentation_keeps_inputs_and_is_bounded(gseed in any::<u64>(), n in 1usize..5) {
        // a plus-shaped crossing, symmetric under quarter turns about (5.5, 5.5)
        let mut rows = vec![String::new(); 11];
        for (y, row) in rows.iter_mut().enumerate() {
            for x in 0..11 {
                row.push(if x == 5 || y == 5 { 'S' } else { '.' });
            }
        }
        let s = Scenario::parse(&format!("grid_len=1\nsensor_range=5\nsensor_fov_deg=60\n{}\n", rows.join("\n"))).unwrap();
        let w = default_weights(s.n_road()).unwrap();
        let p = Problem::new(s.clone(), vec![OcclusionMask::clear()], w).unwrap();
        let genes: Vec<Gene> = random_genes(&s, gseed, n)
            .into_iter()
            .map(|g| Gene::new(g.x, g.y, p.snap(g.cell(), g.phi).unwrap()))
            .collect();
        let group = SymmetryGroup::rotation_c4(5.5, 5.5).unwrap();
        let aug = augment_with_symmetry(&Chromosome::new(genes.clone()), &group, &p);
        for g in &genes {
            prop_assert!(aug.genes.contains(g));
        }
        prop_assert!(aug.genes.len() <= 4 * genes.len());
        // every gene's quarter-turn image lands on an occupied cell
        let cells: std::collections::HashSet<Cell> = aug.genes.iter().map(|g| g.cell()).collect();
        for g in &aug.genes {
            let image = Cell::new(10 - g.y, g.x);
            prop_assert!(cells.contains(&image));
        }
    }
}

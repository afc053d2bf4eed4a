//! Greedy participant selection against an exhaustive-search oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fedpot_core::contract::{select_participants, Candidate};

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Candidate>, f64, f64) {
    let n = rng.gen_range(1..=10);
    let candidates = (0..n)
        .map(|id| Candidate {
            id,
            phi: rng.gen_range(0.01..1.0),
            reward: rng.gen_range(0.1..5.0),
            t_total: rng.gen_range(0.1..2.0),
        })
        .collect::<Vec<_>>();
    let budget = rng.gen_range(0.5..10.0);
    let deadline = rng.gen_range(0.5..2.5);
    (candidates, budget, deadline)
}

/// Best Σφ over all subsets respecting budget and deadline.
fn brute_force(candidates: &[Candidate], budget: f64, deadline: f64) -> f64 {
    let n = candidates.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let mut phi = 0.0;
        let mut cost = 0.0;
        let mut ok = true;
        for (i, c) in candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if c.t_total > deadline {
                    ok = false;
                    break;
                }
                phi += c.phi;
                cost += c.reward;
            }
        }
        if ok && cost <= budget {
            best = best.max(phi);
        }
    }
    best
}

#[test]
fn greedy_is_near_optimal_on_200_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1ec7);
    let mut near_optimal = 0usize;
    let total = 200usize;
    for case in 0..total {
        let (candidates, budget, deadline) = random_instance(&mut rng);
        let result = select_participants(&candidates, budget, deadline).unwrap();

        // feasibility is non-negotiable
        assert!(
            result.total_reward <= budget + 1e-12,
            "case {case}: budget violated"
        );
        for &id in &result.selected {
            assert!(
                candidates[id].t_total <= deadline,
                "case {case}: deadline violated"
            );
        }
        let check_phi: f64 = result.selected.iter().map(|&id| candidates[id].phi).sum();
        assert!((check_phi - result.objective).abs() < 1e-9);

        let optimum = brute_force(&candidates, budget, deadline);
        if optimum == 0.0 {
            assert_eq!(result.objective, 0.0, "case {case}: nonzero vs empty optimum");
            near_optimal += 1;
            continue;
        }
        let ratio = result.objective / optimum;
        assert!(
            ratio >= 0.80,
            "case {case}: greedy {} vs optimum {optimum} (ratio {ratio:.3})",
            result.objective
        );
        if ratio >= 0.95 {
            near_optimal += 1;
        }
    }
    assert!(
        near_optimal * 100 >= total * 95,
        "only {near_optimal}/{total} instances within 95% of optimum"
    );
}

#[test]
fn indicator_matches_selected_ids() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let (candidates, budget, deadline) = random_instance(&mut rng);
        let result = select_participants(&candidates, budget, deadline).unwrap();
        assert_eq!(result.indicator.len(), candidates.len());
        for (i, &flag) in result.indicator.iter().enumerate() {
            assert_eq!(flag == 1, result.selected.contains(&i));
        }
        let mut sorted = result.selected.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, result.selected, "selected ids must be ascending");
    }
}

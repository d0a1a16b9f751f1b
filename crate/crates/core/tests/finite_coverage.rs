//! Soundness chain of the finite-size machinery: for a fixed verified
//! certificate and repeated small-N simulations from a known ground truth,
//! the finite-size bound must dominate the asymptotic dual bound evaluated
//! at the true probabilities except with frequency consistent with the
//! configured failure budget a1, and the success lower bound must stay below
//! the true p(succ) likewise.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdiqkd::moment::{build_problem, solve_guessing, HierarchyLevel};
use sdiqkd::protocol::{GramConstraint, ProtocolSpec};
use sdiqkd::sdp::SolverOptions;
use sdiqkd::security::{finite_size_pg_bound, finite_size_psucc_bound};
use sdiqkd::stats::StatTable;

#[test]
fn finite_size_bounds_cover_the_truth() {
    let spec = ProtocolSpec::new(2, 0.6, 0.5).unwrap();
    // Strictly positive ground-truth table so every cell is a live binomial.
    let p_true = [0.012, 0.185, 0.171, 0.015];
    let truth = StatTable::from_probs(spec.input_weights(), p_true.to_vec()).unwrap();
    let gram = GramConstraint::ideal(&spec);
    let problem = build_problem(&spec, &gram, &truth, &HierarchyLevel::S1AB).unwrap();
    let pg = solve_guessing(&problem, &SolverOptions::default()).unwrap();
    assert!(pg.verified);

    // The bound the certificate assigns to the true distribution.
    let bound_at_truth = pg.bound_at(|x, y| p_true[x * 2 + y]);
    let w = spec.input_weights();
    let p_succ_true: f64 = (0..4)
        .map(|i| w.sift_weight(i / 2, i % 2) * p_true[i])
        .sum();

    // Large failure budgets so violations are actually observable.
    let (a1, a2) = (0.05, 0.05);
    let n_rounds = 2_000u64;
    let reps = 1_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut pg_failures = 0usize;
    let mut psucc_failures = 0usize;
    for _ in 0..reps {
        let mut zero = vec![0u64; 4];
        let mut one = vec![0u64; 4];
        for _ in 0..n_rounds {
            let x = usize::from(rng.random::<f64>() < 0.5);
            let y = usize::from(rng.random::<f64>() < 0.5);
            let cell = x * 2 + y;
            if rng.random::<f64>() < p_true[cell] {
                zero[cell] += 1;
            } else {
                one[cell] += 1;
            }
        }
        let counts = StatTable::from_counts(spec.input_weights(), zero, one).unwrap();
        if finite_size_pg_bound(&pg, &counts, a1).unwrap() < bound_at_truth {
            pg_failures += 1;
        }
        if finite_size_psucc_bound(&counts, a2).unwrap() > p_succ_true {
            psucc_failures += 1;
        }
    }

    // Union-bounded Clopper-Pearson is conservative; failures must stay
    // within the budget up to binomial fluctuation of the experiment itself.
    let budget = |a: f64| a * reps as f64 + 4.0 * (a * (1.0 - a) * reps as f64).sqrt();
    assert!(
        (pg_failures as f64) <= budget(a1),
        "guessing-bound coverage failures {pg_failures}/{reps} exceed {:.1}",
        budget(a1)
    );
    assert!(
        (psucc_failures as f64) <= budget(a2),
        "success-bound coverage failures {psucc_failures}/{reps} exceed {:.1}",
        budget(a2)
    );
    println!(
        "coverage: pg failures {pg_failures}/{reps}, psucc failures {psucc_failures}/{reps} within budget {:.0}",
        budget(a1)
    );
}

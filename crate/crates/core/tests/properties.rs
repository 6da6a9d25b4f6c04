//! Randomised invariants of the solvers and the iteration.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use heatsrc_core::adjoint::{AdjointSolver, TerminalResidual};
use heatsrc_core::field::{l2_space_norm, Grids, ProductState, SpaceSource};
use heatsrc_core::forward::{stability_gap, ForwardSolver, ProblemSetup};
use heatsrc_core::landweber::{make_observation, run, LandweberConfig, NoiseMode};
use heatsrc_core::objective::{lipschitz_constant, Objective, TikhonovConfig};
use heatsrc_core::verification::random_smooth;

fn setup() -> ProblemSetup {
    ProblemSetup::new(Grids::new(1.0, 32, 1.0, 64).unwrap())
}

fn sources(setup: &ProblemSetup, seed: u64) -> (SpaceSource, SpaceSource) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = setup.space();
    (
        SpaceSource::new(grid, random_smooth(grid, &mut rng)).unwrap(),
        SpaceSource::new(grid, random_smooth(grid, &mut rng)).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn response_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let setup = setup();
        let (f, g) = sources(&setup, seed);
        let solver = ForwardSolver::new(&setup).unwrap();
        let combined = solver.final_state(&f.combine(a, &g, b).unwrap()).unwrap();
        let mut expected = solver.final_state(&f).unwrap().scaled(a);
        expected.add_scaled(b, &solver.final_state(&g).unwrap()).unwrap();
        let scale = expected.norm(setup.space()).unwrap().max(1.0);
        let defect = combined.difference(&expected).unwrap().norm(setup.space()).unwrap();
        prop_assert!(defect <= 1e-12 * scale);
    }

    #[test]
    fn energy_estimate_holds(seed in any::<u64>()) {
        let setup = setup();
        let (f1, f2) = sources(&setup, seed);
        let gap = stability_gap(&setup, &f1, &f2).unwrap();
        prop_assert!(gap.holds_with_slack(0.05), "{gap:?}");
    }

    #[test]
    fn gradient_is_lipschitz(seed in any::<u64>()) {
        let setup = setup();
        let (f, df) = sources(&setup, seed);
        let data = ProductState::zeros(setup.space());
        let objective = Objective::new(&setup, &data, TikhonovConfig::new(0.0).unwrap()).unwrap();
        let g0 = objective.gradient(&f).unwrap().values;
        let g1 = objective.gradient(&f.combine(1.0, &df, 1.0).unwrap()).unwrap().values;
        let lhs = l2_space_norm(&g1.combine(1.0, &g0, -1.0).unwrap(), setup.space()).unwrap();
        let bound = setup.time().final_time().sqrt()
            * lipschitz_constant(&setup)
            * setup.source_norm_sq(&df, None).unwrap().sqrt();
        prop_assert!(lhs <= 1.05 * bound);
    }

    /// Without potentials the adjoint equation is dissipative backwards in time.
    #[test]
    fn adjoint_norm_never_grows(seed in any::<u64>()) {
        let setup = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terminal = ProductState::from_nodes(random_smooth(setup.space(), &mut rng));
        let phi = AdjointSolver::new(&setup).unwrap().solve(&TerminalResidual::from_state(terminal)).unwrap();
        let norms = phi.norms(setup.space()).unwrap();
        let top = norms.iter().copied().fold(0.0, f64::max);
        let terminal_norm = phi.terminal().norm(setup.space()).unwrap();
        prop_assert!(top <= terminal_norm * (1.0 + 1e-12));
    }

    #[test]
    fn iteration_descends_and_is_reproducible(seed in 0u64..1000, p in 0.0..0.05f64) {
        let setup = setup();
        let truth = SpaceSource::sample(setup.space(), |x| x * (1.0 - x));
        let obs = make_observation(&setup, &truth, p, seed, NoiseMode::ZeroMean).unwrap();
        let mut cfg = LandweberConfig::new(1e-6);
        cfg.max_iter = 15;
        let first = run(&setup, &obs, &cfg, Some(&truth)).unwrap();
        prop_assert_eq!(first.first_ascent(), None);
        let again = run(&setup, &make_observation(&setup, &truth, p, seed, NoiseMode::ZeroMean).unwrap(), &cfg, Some(&truth)).unwrap();
        prop_assert_eq!(first, again);
    }
}

/// More noise should not give a better reconstruction. Individual draws can
/// invert the order, so a majority of seeds is required.
#[test]
fn more_noise_gives_worse_reconstructions() {
    let setup = ProblemSetup::new(Grids::new(1.0, 64, 1.0, 128).unwrap());
    let truth = SpaceSource::sample(setup.space(), |x| x * (1.0 - x));
    let cfg = LandweberConfig::new(1e-6);
    let ordered = (1..=5)
        .filter(|&seed| {
            let errors: Vec<f64> = [0.01, 0.05]
                .iter()
                .map(|&p| {
                    let obs = make_observation(&setup, &truth, p, seed, NoiseMode::Scalar).unwrap();
                    run(&setup, &obs, &cfg, Some(&truth))
                        .unwrap()
                        .last()
                        .source_error
                        .unwrap()
                })
                .collect();
            errors[1] >= errors[0]
        })
        .count();
    assert!(ordered >= 4, "only {ordered} of 5 seeds ordered");
}

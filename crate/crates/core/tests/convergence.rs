use psit_core::calculus::{euler_exp, quad_covar, stoch_exp};
use psit_core::grid::{gen_brownian, make_grid, refine_bridge, PathEnsemble, RngSpec};
use psit_core::psit::{restrict, ProcessOnB, Psit};

fn on_full(e: &PathEnsemble) -> ProcessOnB {
    restrict(e, &Psit::full(e.grid(), e.n_paths())).unwrap()
}

#[test]
fn euler_gap_decreases_under_refinement() {
    let rng = RngSpec::new(17);
    let coarse = gen_brownian(make_grid(1.0, 100).unwrap(), 100, rng).unwrap();
    let fine = refine_bridge(&coarse, 4, rng, 0).unwrap();
    let gap = |e: &PathEnsemble| {
        let z = on_full(e).scale(0.2);
        let closed = stoch_exp(&z, 1.0).unwrap();
        let euler = euler_exp(&z, 1.0).unwrap();
        (0..z.n_paths()).map(|p| ((euler.terminal(p) - closed.terminal(p)) / closed.terminal(p)).abs()).sum::<f64>()
    };
    let (g0, g1) = (gap(&coarse), gap(&fine));
    assert!(g1 < g0, "{g1} vs {g0}");
}

#[test]
fn brownian_bracket_is_close_to_time() {
    let w = on_full(&gen_brownian(make_grid(1.0, 1000).unwrap(), 200, RngSpec::new(4)).unwrap());
    let q = quad_covar(&w, &w).unwrap().total;
    let mean = (0..200).map(|p| q.terminal(p)).sum::<f64>() / 200.0;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn refinement_keeps_coarse_nodes() {
    let rng = RngSpec::new(2);
    let coarse = gen_brownian(make_grid(1.0, 20).unwrap(), 3, rng).unwrap();
    let fine = refine_bridge(&coarse, 4, rng, 0).unwrap();
    for p in 0..3 {
        for k in 0..=20 {
            assert_eq!(fine.path(p).values()[4 * k], coarse.path(p).values()[k]);
        }
    }
}

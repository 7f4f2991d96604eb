use proptest::prelude::*;
use rand::Rng;

use psit_core::calculus::{
    ibp_residual, integrand_until, ito_residual, ito_residual_multi, jumps, left_limits, ls_integral,
    martingale_integral, quad_covar, stoch_integral, stoch_integral_segmented, summation, C2Map, FnC2,
    IntegralResult,
};
use psit_core::grid::{make_grid, PathEnsemble, SamplePath};
use psit_core::psit::{
    canonical_fs, glue, restrict, stop, stop_strict, CoupledSequence, FundamentalSequence, ProcessOnB, Psit,
    StoppingTime,
};
use psit_core::verify::fixtures;

const TOL: f64 = 1e-10;

#[derive(Debug)]
struct Case {
    psit: Psit,
    x: ProcessOnB,
    y: ProcessOnB,
    h: ProcessOnB,
    k: ProcessOnB,
    tau: StoppingTime,
    a: f64,
    b: f64,
}

fn case(seed: u64, steps: usize, n_paths: usize) -> Case {
    let grid = make_grid(1.0, steps).unwrap();
    let mut rng = fixtures::rng(seed, 0);
    let psit = fixtures::psit(&mut rng, grid, n_paths, 2.min(steps));
    let x = fixtures::process(&mut rng, &psit, 0.15);
    let y = fixtures::process(&mut rng, &psit, 0.15);
    let h = fixtures::process(&mut rng, &psit, 0.0);
    let k = fixtures::process(&mut rng, &psit, 0.0);
    let tau = StoppingTime::new((0..n_paths).map(|p| rng.random_range(1..=psit.last_index(p).max(1))).collect());
    let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    Case { psit, x, y, h, k, tau, a, b }
}

fn rel(a: &ProcessOnB, b: &ProcessOnB) -> f64 {
    a.max_abs_diff_on_b(b) / 1f64.max(a.max_abs_on_b()).max(b.max_abs_on_b())
}

type Integral = fn(&ProcessOnB, &ProcessOnB) -> psit_core::Result<IntegralResult>;
const INTEGRALS: [Integral; 3] = [ls_integral, martingale_integral, stoch_integral];

fn arb_case() -> impl Strategy<Value = Case> {
    (any::<u64>(), 2usize..48, 1usize..4).prop_map(|(s, k, n)| case(s, k, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_by_parts_is_exact(c in arb_case()) {
        let r = ibp_residual(&c.x, &c.y).unwrap();
        prop_assert!(r.max_abs_on_b() <= TOL * 1f64.max(c.x.max_abs_on_b() * c.y.max_abs_on_b()));
    }

    #[test]
    fn ito_is_exact_for_quadratics(c in arb_case()) {
        let sq = FnC2 { f: |x: f64| x * x, d1: |x: f64| 2.0 * x, d2: |_| 2.0 };
        let r = ito_residual(&sq, &c.x).unwrap();
        prop_assert!(r.max_abs_on_b() <= TOL * 1f64.max(c.x.max_abs_on_b().powi(2)));
        let lin = FnC2 { f: |x: f64| 3.0 * x - 1.0, d1: |_| 3.0, d2: |_| 0.0 };
        prop_assert!(ito_residual(&lin, &c.x).unwrap().max_abs_on_b() <= TOL * 1f64.max(c.x.max_abs_on_b()));
    }

    #[test]
    fn multivariate_ito_is_exact_for_products_and_sums(c in arb_case()) {
        let scale = 1f64.max(c.x.max_abs_on_b() * c.y.max_abs_on_b());
        let r = ito_residual_multi(&Product, &[c.x.clone(), c.y.clone()]).unwrap();
        prop_assert!(r.max_abs_on_b() <= TOL * scale);
        let r = ito_residual_multi(&Sum, &[c.x.clone(), c.y.clone()]).unwrap();
        prop_assert!(r.max_abs_on_b() <= TOL * 1f64.max(c.x.max_abs_on_b() + c.y.max_abs_on_b()));
    }

    #[test]
    fn integrals_are_neutral_linear_and_associative(c in arb_case()) {
        let one = c.h.map(|_| 1.0);
        for integral in INTEGRALS {
            prop_assert!(rel(&integral(&one, &c.x).unwrap().process, &c.x) <= TOL);
            let hx = integral(&c.h, &c.x).unwrap().process;
            let kx = integral(&c.k, &c.x).unwrap().process;
            let lhs = integral(&c.h.scale(c.a).add(&c.k.scale(c.b)).unwrap(), &c.x).unwrap().process;
            prop_assert!(rel(&lhs, &hx.scale(c.a).add(&kx.scale(c.b)).unwrap()) <= TOL);
            let hy = integral(&c.h, &c.y).unwrap().process;
            let lhs = integral(&c.h, &c.x.scale(c.a).add(&c.y.scale(c.b)).unwrap()).unwrap().process;
            prop_assert!(rel(&lhs, &hx.scale(c.a).add(&hy.scale(c.b)).unwrap()) <= TOL);
            let lhs = integral(&c.k, &hx).unwrap().process;
            let rhs = integral(&c.k.mul(&c.h).unwrap(), &c.x).unwrap().process;
            prop_assert!(rel(&lhs, &rhs) <= TOL);
        }
    }

    #[test]
    fn jump_of_integral(c in arb_case()) {
        let got = jumps(&stoch_integral(&c.h, &c.x).unwrap().process);
        let dx = jumps(&c.x);
        for p in 0..c.psit.n_paths() {
            for k in 1..=c.psit.last_index(p) {
                let want = c.h.value(p, k - 1) * dx.value(p, k);
                prop_assert!((got.value(p, k) - want).abs() <= TOL * 1f64.max(c.h.max_abs_on_b() * c.x.max_abs_on_b()));
            }
        }
    }

    #[test]
    fn stopping_commutes_with_integration(c in arb_case()) {
        let g = integrand_until(&c.h, &c.tau).unwrap();
        let rhs = stoch_integral(&g, &c.x).unwrap().process;
        let lhs = restrict(&stop(&stoch_integral(&c.h, &c.x).unwrap().process, &c.tau).unwrap(), &c.psit).unwrap();
        prop_assert!(rel(&lhs, &rhs) <= TOL);
    }

    #[test]
    fn quadratic_covariation_is_additive_bilinear_and_symmetric(c in arb_case()) {
        let q = quad_covar(&c.x, &c.y).unwrap();
        let scale = 1f64.max(q.total.max_abs_on_b());
        for p in 0..c.psit.n_paths() {
            for k in 0..=c.psit.last_index(p) {
                // initial part is X_0 Y_0 at every index
                let parts = q.initial.value(p, 0) + q.continuous.value(p, k) + q.jump.value(p, k);
                prop_assert!((q.total.value(p, k) - parts).abs() <= TOL * scale);
            }
        }
        let sym = quad_covar(&c.y, &c.x).unwrap();
        prop_assert!(rel(&q.total, &sym.total) <= TOL);
        let z = c.h.with_marks((0..c.psit.n_paths()).map(|p| c.x.section_marks(p).to_vec()).collect()).unwrap();
        let lhs = quad_covar(&c.x.scale(c.a).add(&z.scale(c.b)).unwrap(), &c.y).unwrap().total;
        let rhs = q.total.scale(c.a).add(&quad_covar(&z, &c.y).unwrap().total.scale(c.b)).unwrap();
        prop_assert!(rel(&lhs, &rhs) <= TOL);
    }

    #[test]
    fn localization(c in arb_case()) {
        let tau = &c.tau;
        let stopped = |x: &ProcessOnB| restrict(&stop(x, tau).unwrap(), &c.psit).unwrap();
        let q = quad_covar(&c.x, &c.y).unwrap().total;
        let qs = quad_covar(&stopped(&c.x), &stopped(&c.y)).unwrap().total;
        prop_assert!(rel(&stopped(&q), &qs) <= TOL);
        let ll = left_limits(&stopped(&c.x));
        let sl = stopped(&left_limits(&c.x));
        for p in 0..c.psit.n_paths() {
            let t = tau.index(p);
            prop_assert_eq!(&ll.section(p)[..=t], &sl.section(p)[..=t]);
        }
        let thin = summation(&c.x.zip_with(&c.psit_indicator(tau), |v, i| v * i).unwrap());
        prop_assert!(rel(&thin, &stopped(&summation(&c.x))) <= TOL);
    }

    #[test]
    fn restriction_and_stopping_compose(c in arb_case(), extra in 0usize..5) {
        let k = c.psit.grid().steps();
        let smaller_debut: Vec<usize> = (0..c.psit.n_paths())
            .map(|p| c.psit.last_index(p).saturating_sub(extra).max(1))
            .collect();
        let smaller = Psit::new(c.psit.grid(), smaller_debut, vec![true; c.psit.n_paths()]).unwrap();
        prop_assume!(smaller.is_subset_of(&c.psit));
        let twice = restrict(c.x.ensemble(), &c.psit).unwrap().restrict_to(&smaller).unwrap();
        prop_assert!(twice.eq_on_b(&restrict(c.x.ensemble(), &smaller).unwrap()));
        let s = StoppingTime::new((0..c.psit.n_paths()).map(|p| c.tau.index(p).saturating_sub(extra)).collect());
        let full = restrict(c.x.ensemble(), &Psit::full(c.psit.grid(), c.psit.n_paths())).unwrap();
        let st = restrict(&stop(&full, &c.tau).unwrap(), &Psit::full(c.psit.grid(), c.psit.n_paths())).unwrap();
        let a = stop(&st, &s).unwrap();
        let b = stop(&full, &c.tau.meet(&s).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        let strict = stop_strict(&full, &c.tau).unwrap();
        for p in 0..c.psit.n_paths() {
            prop_assert!(!strict.path(p).is_jump(c.tau.index(p).min(k)));
        }
    }

    #[test]
    fn segments_reassemble_and_glue_is_fs_independent(c in arb_case()) {
        let r = stoch_integral_segmented(&c.h, &c.x).unwrap();
        prop_assert!(r.reassemble().unwrap().unwrap().eq_on_b(&r.process));
        let canonical = CoupledSequence::from_process(&c.x, &canonical_fs(&c.psit)).unwrap();
        prop_assert!(glue(&canonical, &c.psit).unwrap().eq_on_b(&c.x));
        // a coarser sequence of the same set glues to the same process
        let fs = canonical_fs(&c.psit);
        let sparse: Vec<StoppingTime> = fs.terms().iter().skip(1).step_by(2).cloned().collect();
        prop_assume!(!sparse.is_empty());
        let mut terms = sparse;
        terms.push(fs.terms().last().unwrap().clone());
        let other = FundamentalSequence::new(c.psit.grid(), terms, fs.sup().clone()).unwrap();
        let cs = CoupledSequence::from_process(&c.x, &other).unwrap();
        prop_assert!(glue(&cs, &c.psit).unwrap().eq_on_b(&c.x));
    }
}

trait Indicator {
    fn psit_indicator(&self, tau: &StoppingTime) -> ProcessOnB;
}

impl Indicator for Case {
    /// `I_{[0,τ]}` on `B`.
    fn psit_indicator(&self, tau: &StoppingTime) -> ProcessOnB {
        let grid = self.psit.grid();
        let values = (0..self.psit.n_paths())
            .map(|p| (0..grid.len()).map(|k| if k <= tau.index(p) { 1.0 } else { 0.0 }).collect())
            .collect();
        restrict(&PathEnsemble::from_values(grid, values).unwrap(), &self.psit).unwrap()
    }
}

struct Product;

impl C2Map for Product {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, z: &[f64]) -> f64 {
        z[0] * z[1]
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[1];
        out[1] = z[0];
    }
    fn hessian(&self, _: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[0.0, 1.0, 1.0, 0.0]);
    }
}

struct Sum;

impl C2Map for Sum {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, z: &[f64]) -> f64 {
        z[0] + z[1]
    }
    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.fill(1.0);
    }
    fn hessian(&self, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

#[test]
fn jumps_are_additive_on_shared_marks() {
    let g = make_grid(1.0, 5).unwrap();
    let psit = Psit::full(g, 1);
    let mk = |v: Vec<f64>| restrict(&PathEnsemble::new(g, vec![SamplePath::new(g, v, vec![2, 4]).unwrap()]).unwrap(), &psit).unwrap();
    let x = mk(vec![0.0, 0.1, 1.1, 1.0, 3.0, 3.1]);
    let y = mk(vec![1.0, 0.9, -0.1, 0.0, 0.5, 0.4]);
    let lhs = jumps(&x.add(&y).unwrap());
    let rhs = jumps(&x).add(&jumps(&y)).unwrap();
    assert!(rel(&lhs, &rhs) <= TOL);
}

#[test]
fn glue_ignores_divergence_outside_b() {
    // second segment diverges wildly after the debut
    let g = make_grid(1.0, 8).unwrap();
    let psit = Psit::new(g, vec![5], vec![false]).unwrap();
    let base: Vec<f64> = (0..9).map(|k| k as f64 * 0.5).collect();
    let wild: Vec<f64> = base.iter().enumerate().map(|(k, v)| if k > 4 { 1e6 * k as f64 } else { *v }).collect();
    let a_cs = CoupledSequence::new(vec![
        (StoppingTime::constant(1, 2), PathEnsemble::from_values(g, vec![base.clone()]).unwrap()),
        (StoppingTime::constant(1, 8), PathEnsemble::from_values(g, vec![wild]).unwrap()),
    ])
    .unwrap();
    let h_cs = CoupledSequence::new(vec![(StoppingTime::constant(1, 8), PathEnsemble::from_values(g, vec![vec![2.0; 9]]).unwrap())])
        .unwrap();
    let glued = psit_core::calculus::ls_integral_glued(&h_cs, &a_cs, &psit).unwrap().process;
    let direct = ls_integral(&glue(&h_cs, &psit).unwrap(), &glue(&a_cs, &psit).unwrap()).unwrap().process;
    assert!(glued.eq_on_b(&direct));
    assert_eq!(glued.terminal(0), 2.0 * 2.0);
}

#[test]
fn ibp_on_brownian_paths() {
    let g = make_grid(1.0, 2000).unwrap();
    let w = psit_core::grid::gen_correlated_brownians(g, 2, &[vec![1.0, 0.3], vec![0.3, 1.0]], 20, psit_core::grid::RngSpec::new(5)).unwrap();
    let psit = Psit::full(g, 20);
    let (x, y) = (restrict(&w[0], &psit).unwrap(), restrict(&w[1], &psit).unwrap());
    let r = ibp_residual(&x, &y).unwrap();
    assert!(r.max_abs_on_b() <= TOL * 1f64.max(x.max_abs_on_b() * y.max_abs_on_b()));
    let c = restrict(&PathEnsemble::constant(g, 20, 1.7), &psit).unwrap();
    assert_eq!(ibp_residual(&c, &c).unwrap().max_abs_on_b(), 0.0);
}

use mlcouple::poisson::{
    classic_schwarz_poisson, poisson_error_report, solve_poisson_global, PoissonProblem, SchwarzMode,
};
use proptest::prelude::*;

fn global_error(nx: usize, ny: usize) -> f64 {
    let p = PoissonProblem::unit_square(nx, ny, nx / 2 + 1, 2).unwrap();
    let u = solve_poisson_global(&p).unwrap();
    u.max_abs_diff(&p.exact_field().unwrap())
}

#[test]
fn second_order_under_refinement() {
    let e = [global_error(21, 11), global_error(41, 21), global_error(81, 41)];
    for w in e.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((1.8..2.3).contains(&rate), "observed order {rate} from {e:?}");
    }
}

#[test]
fn wider_overlap_needs_fewer_iterations() {
    let narrow = PoissonProblem::reference();
    let wide = PoissonProblem { overlap: 4, ..narrow };
    let a = classic_schwarz_poisson(&narrow, 1e-10, 2000, SchwarzMode::Multiplicative).unwrap();
    let b = classic_schwarz_poisson(&wide, 1e-10, 2000, SchwarzMode::Multiplicative).unwrap();
    assert!(a.converged && b.converged);
    assert!(b.iterations < a.iterations, "{} vs {}", b.iterations, a.iterations);
    assert!(b.field.max_abs_diff(&a.field) < 1e-8);
}

#[test]
fn additive_and_multiplicative_agree() {
    let p = PoissonProblem::reference();
    let tol = 1e-10;
    let m = classic_schwarz_poisson(&p, tol, 2000, SchwarzMode::Multiplicative).unwrap();
    let a = classic_schwarz_poisson(&p, tol, 2000, SchwarzMode::Additive).unwrap();
    assert!(a.converged && m.converged);
    assert!(a.iterations > m.iterations);
    // the residual is a step size; the fixed-point gap is bounded by a few of them
    assert!(a.field.max_abs_diff(&m.field) < 100.0 * tol, "{}", a.field.max_abs_diff(&m.field));
}

#[test]
fn classic_limit_is_the_global_solution() {
    let p = PoissonProblem::reference();
    let r = classic_schwarz_poisson(&p, 1e-12, 4000, SchwarzMode::Multiplicative).unwrap();
    let g = solve_poisson_global(&p).unwrap();
    assert!(r.field.max_abs_diff(&g) < 1e-9);
    let rep = poisson_error_report(&r, &r.field, &p, 0.0).unwrap();
    assert!(rep.satisfies_triangle());
    assert!(rep.err_sbar_exact > 1e-6 && rep.err_sbar_exact < 2e-5, "{}", rep.err_sbar_exact);
}

#[test]
fn residuals_are_monotone_for_multiplicative() {
    let p = PoissonProblem::reference();
    let r = classic_schwarz_poisson(&p, 1e-10, 2000, SchwarzMode::Multiplicative).unwrap();
    assert_eq!(r.residual_history.len(), r.iterations);
    assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert!(*r.residual_history.last().unwrap() <= 1e-10);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let p = PoissonProblem::reference();
    let r = classic_schwarz_poisson(&p, 1e-10, 5, SchwarzMode::Multiplicative).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 5);
    assert_eq!(r.residual_history.len(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_valid_split_converges_to_global(
        nx in 13usize..31,
        ny in 5usize..13,
        frac in 0.3f64..0.7,
        k in 1usize..3,
        additive in any::<bool>(),
    ) {
        let split = ((nx as f64 * frac) as usize).clamp(k + 3, nx - k - 1);
        let p = PoissonProblem::unit_square(nx, ny, split, k).unwrap();
        let mode = if additive { SchwarzMode::Additive } else { SchwarzMode::Multiplicative };
        let r = classic_schwarz_poisson(&p, 1e-11, 20_000, mode).unwrap();
        prop_assert!(r.converged);
        let g = solve_poisson_global(&p).unwrap();
        prop_assert!(r.field.max_abs_diff(&g) < 1e-7);
    }
}

#[test]
fn discrete_maximum_principle() {
    // f = 0: every iterate stays within the range of the boundary data
    let data: [fn(f64, f64) -> f64; 4] = [
        |x, y| x * x - y * y,
        |x, y| (3.0 * x).sin() * (-3.0 * y).exp(),
        |x, y| if x < 0.5 { 1.0 } else { -2.0 * y },
        |x, y| x * y + 0.25,
    ];
    for g in data {
        let mut p = PoissonProblem::unit_square(21, 11, 11, 2).unwrap();
        p.source = |_, _| 0.0;
        p.boundary = g;
        p.exact = None;
        for max_iter in [1, 3, 4000] {
            let r = classic_schwarz_poisson(&p, 1e-10, max_iter, SchwarzMode::Multiplicative).unwrap();
            let (mut blo, mut bhi) = (f64::MAX, f64::MIN);
            for i in 0..21 {
                for j in 0..11 {
                    if i == 0 || i == 20 || j == 0 || j == 10 {
                        blo = blo.min(r.field.get(i, j));
                        bhi = bhi.max(r.field.get(i, j));
                    }
                }
            }
            // the zero start lies in [blo, bhi] only when the data changes sign
            let (blo, bhi) = (blo.min(0.0), bhi.max(0.0));
            assert!(r.field.as_slice().iter().all(|v| *v >= blo - 1e-12 && *v <= bhi + 1e-12));
        }
    }
}

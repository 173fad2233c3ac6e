use proptest::prelude::*;

use ruinlab::exact::{exact_orders_3, exact_orders_4};
use ruinlab::interp::interp_distribution;
use ruinlab::jacobi::{jacobi_solve_3, JacobiOptions};
use ruinlab::model::{
    icm_distribution, identity_residuals, CapitalVector, EliminationOrder, OrderDistribution,
};
use ruinlab::montecarlo::{estimate_orders, SimMode};
use ruinlab::table::{generate_table, TableMethod};

fn triple(max_n: u64) -> impl Strategy<Value = CapitalVector> {
    (1..max_n, 1..max_n, 1..max_n)
        .prop_filter("total bound", move |(a, b, c)| a + b + c <= max_n)
        .prop_map(|(a, b, c)| CapitalVector::new(vec![a, b, c]).unwrap())
}

fn any_order(k: usize) -> impl Strategy<Value = EliminationOrder> {
    let all = EliminationOrder::all(k);
    (0..all.len()).prop_map(move |i| all[i])
}

fn relabel(cv: &CapitalVector, perm: &EliminationOrder) -> CapitalVector {
    CapitalVector::new(perm.players().map(|p| cv.stack(p)).collect::<Vec<_>>()).unwrap()
}

/// `perm` moves player `perm(i)` to slot `i`; orders are renamed to match.
fn rename(sigma: &EliminationOrder, perm: &EliminationOrder) -> EliminationOrder {
    let k = perm.len();
    let mut inv = vec![0; k];
    for (i, p) in perm.players().enumerate() {
        inv[p] = i;
    }
    EliminationOrder::new(&sigma.players().map(|p| inv[p]).collect::<Vec<_>>()).unwrap()
}

fn assert_relabel_invariant(
    cv: &CapitalVector,
    perm: &EliminationOrder,
    f: impl Fn(&CapitalVector) -> OrderDistribution,
    tol: f64,
) -> std::result::Result<(), TestCaseError> {
    let a = f(cv);
    let b = f(&relabel(cv, perm));
    for (sigma, p) in a.iter() {
        let q = b.get(&rename(sigma, perm));
        prop_assert!((p - q).abs() <= tol, "{sigma}: {p} vs {q}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_distribution_is_valid(cv in triple(40)) {
        let d = exact_orders_3(&cv).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        for r in identity_residuals(&d, &cv) {
            prop_assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn exact_is_relabeling_invariant(cv in triple(30), perm in any_order(3)) {
        assert_relabel_invariant(&cv, &perm, |c| exact_orders_3(c).unwrap(), 1e-13)?;
    }

    #[test]
    fn icm_is_relabeling_invariant(
        s in proptest::collection::vec(1u64..500, 4),
        perm in any_order(4),
    ) {
        let cv = CapitalVector::new(s).unwrap();
        assert_relabel_invariant(&cv, &perm, |c| icm_distribution(c).unwrap(), 1e-15)?;
    }

    #[test]
    fn four_player_winner_share(s in proptest::collection::vec(1u64..4, 4)) {
        let cv = CapitalVector::new(s).unwrap();
        let d = exact_orders_4(&cv).unwrap();
        for p in 0..4 {
            let want = cv.stack(p) as f64 / cv.total() as f64;
            prop_assert!((d.winner_marginal(p) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_brackets_exact_for_any_order(cv in triple(24), sigma in any_order(3)) {
        let g = jacobi_solve_3(cv.total(), &sigma, &JacobiOptions::three()).unwrap();
        let (lo, hi) = g.bounds(cv.stacks()).unwrap();
        let e = exact_orders_3(&cv).unwrap().get(&sigma);
        prop_assert!(lo <= e + 1e-15 && e <= hi + 1e-15, "{lo} {e} {hi}");
    }
}

#[test]
fn interpolation_is_exact_on_the_grid() {
    let table = generate_table(3, 24, TableMethod::Exact).unwrap();
    for (s, _) in table.iter().step_by(7) {
        // Scaling by 3 lands exactly on the reference point.
        let cv = CapitalVector::new(s.iter().map(|x| 3 * x).collect::<Vec<_>>()).unwrap();
        let (d, w) = interp_distribution(&table, &cv).unwrap();
        assert_eq!(w.vertices().len(), 1);
        let e = exact_orders_3(&CapitalVector::new(s.clone()).unwrap()).unwrap();
        for (sigma, p) in e.iter() {
            assert!((d.get(sigma) - p).abs() < 1e-15, "{s:?} {sigma}");
        }
    }
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let cv = CapitalVector::new(vec![3, 4, 6, 2]).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_orders(&cv, 20_000, 5, SimMode::Consolidated).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.std_errors, b.std_errors);
}

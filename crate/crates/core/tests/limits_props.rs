use proptest::prelude::*;
use subelliptic::eikonal::{solve_eikonal, Source};
use subelliptic::grid::ScalarField;
use subelliptic::limits::{limit_compare, lipschitz_bound_check, monotonicity_check, p_sweep, LimitKind, SweepConfig, SweepData};
use subelliptic::{Frame, Grid};

fn grid(k: usize, nodes: usize) -> Grid {
    Grid::uniform([Frame::euclidean(2), Frame::grushin()][k].clone(), nodes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(6) })]

    #[test]
    fn warm_start_matches_cold(a in 0.0f64..1.0, b in 0.3f64..2.0, k in 0usize..2) {
        let g = grid(k, 13);
        let f = ScalarField::from_fn(&g, |x| b + a * x[0] * x[0]);
        let data = SweepData::Source(f);
        let ps = [4.0, 6.0, 9.0];
        let warm = p_sweep(&g, &data, &ps, &SweepConfig::default()).unwrap();
        let cold = p_sweep(&g, &data, &ps, &SweepConfig { warm_start: false, ..SweepConfig::default() }).unwrap();
        for (u, v) in warm.fields.iter().zip(&cold.fields) {
            prop_assert!(u.max_abs_diff(v) <= 1e-6, "{}", u.max_abs_diff(v));
        }
    }

    #[test]
    fn n_p_never_increases(a in -0.3f64..0.3, b in 0.5f64..2.0, c in 0.0f64..6.0, k in 0usize..2) {
        let g = grid(k, 13);
        let f = ScalarField::from_fn(&g, |x| b + a * (c * x[0]).sin() + 0.2 * x[1]);
        let rep = p_sweep(&g, &SweepData::Source(f), &[4.0, 6.0, 10.0, 16.0], &SweepConfig::default()).unwrap();
        let v = monotonicity_check(&rep).unwrap();
        prop_assert!(v.passed, "{:?}", v.n_p);
    }

    #[test]
    fn solutions_sit_between_zero_and_distance(b in 0.5f64..2.0, k in 0usize..2) {
        let g = grid(k, 17);
        let f = ScalarField::constant(&g, b);
        let rep = p_sweep(&g, &SweepData::Source(f), &[8.0, 16.0], &SweepConfig::default()).unwrap();
        prop_assert_eq!(rep.limit_kind, LimitKind::Eikonal);
        let d = solve_eikonal(&g, &Source::Boundary).unwrap().d;
        let cmp = limit_compare(&g, &rep, &d).unwrap();
        prop_assert!(cmp.lower_violation <= 0.0, "{}", cmp.lower_violation);
        prop_assert!(cmp.bounds_hold, "{:?}", cmp);
    }

    #[test]
    fn boundary_data_energy_bounds_the_solution(a in -1.0f64..1.0, c in 0.5f64..4.0, k in 0usize..2) {
        let g = grid(k, 13);
        let bd = ScalarField::from_fn(&g, |x| a * (c * x[0]).sin() + x[1] * x[1] - 0.5 * x[0]);
        let rep = p_sweep(&g, &SweepData::Boundary(bd), &[4.0, 8.0], &SweepConfig::default()).unwrap();
        prop_assert!(rep.boundary_mismatch == 0.0);
        let lip = lipschitz_bound_check(&g, &rep).unwrap();
        for b in &lip.energy_bounds {
            prop_assert!(b.holds, "{:?}", b);
        }
        prop_assert!(monotonicity_check(&rep).is_err());
    }
}

#[test]
fn negative_source_and_bad_p_lists_are_rejected() {
    let g = grid(0, 9);
    let f = ScalarField::constant(&g, 1.0);
    let data = SweepData::Source(f);
    for ps in [&[][..], &[2.0, 8.0][..], &[8.0, 4.0][..], &[4.0, 4.0][..]] {
        assert!(p_sweep(&g, &data, ps, &SweepConfig::default()).is_err(), "{ps:?}");
    }
    let neg = ScalarField::from_fn(&g, |x| x[0] - 0.5);
    assert!(p_sweep(&g, &SweepData::Source(neg), &[4.0], &SweepConfig::default()).is_err());
}

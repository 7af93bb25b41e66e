use proptest::prelude::*;

use ldi_control::dataset::{
    consistency_gram, consistency_residual, identify_system, RollingWindow, SystemPair, TrajectoryDataset,
};
use ldi_control::linalg::{self, Mat, Vector};
use ldi_control::lmi::{
    constraint_blocks, export_sdpa, parse_sdpa, performance_block, robust_problem, robust_stabilization_blocks,
    ConstraintPolytope, CostWeights, Margins, VariableLayout,
};

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| Mat::from_vec(rows, cols, v))
}

fn dataset() -> impl Strategy<Value = TrajectoryDataset> {
    (1usize..=4, 1usize..=2, 1usize..=10).prop_flat_map(|(n, m, t)| {
        (mat(n, t), mat(n, t), mat(m, t)).prop_map(|(xp, xm, um)| TrajectoryDataset::new(xp, xm, um).unwrap())
    })
}

fn dataset_and_system() -> impl Strategy<Value = (TrajectoryDataset, SystemPair)> {
    dataset().prop_flat_map(|ds| {
        let (n, m) = (ds.n(), ds.m());
        (Just(ds), mat(n, n), mat(n, m)).prop_map(|(ds, a, b)| (ds, SystemPair::new(a, b).unwrap()))
    })
}

fn residual_map(sys: &SystemPair) -> Mat {
    let (n, m) = (sys.n(), sys.m());
    let mut w = Mat::zeros(n, 2 * n + m);
    w.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));
    w.view_mut((0, n), (n, n)).copy_from(&sys.a);
    w.view_mut((0, 2 * n), (n, m)).copy_from(&sys.b);
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gramian_is_negative_semidefinite(ds in dataset()) {
        let g = consistency_gram(&ds);
        let tol = 1e-10 * linalg::frobenius(&g.gram).max(1.0);
        prop_assert!(linalg::max_eigenvalue(&g.gram) <= tol);
        prop_assert_eq!(g.gram.clone(), g.gram.transpose());
    }

    #[test]
    fn squared_residual_is_the_gramian_form((ds, sys) in dataset_and_system()) {
        let g = consistency_gram(&ds);
        let w = residual_map(&sys);
        let form = -(&w * &g.gram * w.transpose()).trace();
        let r = consistency_residual(&ds, &sys).unwrap();
        prop_assert!((r * r - form).abs() <= 1e-9 * (r * r).max(1e-12));
    }

    #[test]
    fn unexcited_directions_annihilate_the_regressor(ds in dataset()) {
        let g = consistency_gram(&ds);
        let r = ds.regressor();
        for z in g.unexcited.column_iter() {
            prop_assert!((z.transpose() * &r).norm() <= 1e-8 * r.norm().max(1.0));
        }
        // rank plus nullity
        prop_assert_eq!(linalg::rank(&r, 1e-8) + g.unexcited.ncols(), ds.n() + ds.m());
    }

    #[test]
    fn identification_recovers_the_generator(
        a in mat(2, 2),
        b in mat(2, 1),
        xs in mat(2, 5),
        us in mat(1, 5),
    ) {
        let sys = SystemPair::new(a, b).unwrap();
        let xp = &sys.a * &xs + &sys.b * &us;
        let ds = TrajectoryDataset::new(xp, xs, us).unwrap();
        let sv = linalg::singular_values(&ds.regressor());
        prop_assume!(sv[2] > 1e-3 * sv[0]);
        let got = identify_system(&ds).unwrap();
        let cond = sv[0] / sv[2];
        prop_assert!((got.a - &sys.a).norm() <= 1e-10 * cond * cond);
        prop_assert!((got.b - &sys.b).norm() <= 1e-10 * cond * cond);
    }

    #[test]
    fn blocks_are_symmetric_at_random_points(
        ds in dataset().prop_filter("benchmark shape", |d| d.n() == 2 && d.m() == 1),
        x in proptest::collection::vec(-1.0..1.0f64, 2),
        point in proptest::collection::vec(-3.0..3.0f64, 8),
    ) {
        let layout = VariableLayout::new(2, 1, true, 1, 1);
        let g = consistency_gram(&ds);
        let w = CostWeights::diagonal(&[1.0, 1.0], &[0.01]).unwrap();
        let poly = ConstraintPolytope::boxes(Some(&[2.0, 2.0]), &[1.0], 2).unwrap();
        let mut blocks = robust_stabilization_blocks(&layout, std::slice::from_ref(&g), 0.0).unwrap();
        blocks.extend(performance_block(&layout, &g, &w, 0).unwrap());
        blocks.extend(constraint_blocks(&layout, &Vector::from_vec(x), &poly, 0.0).unwrap());
        let pt = &point[..layout.len()];
        for blk in &blocks {
            let v = blk.expr.eval(pt);
            prop_assert!((&v - v.transpose()).norm() <= 1e-12 * v.norm().max(1.0), "{}", blk.label);
        }
    }

    #[test]
    fn window_keeps_the_most_recent_samples(cap in 1usize..6, pushes in 0usize..12) {
        let mut w = RollingWindow::new(cap).unwrap();
        for i in 0..pushes {
            let v = Vector::from_element(1, i as f64);
            w = w.push_sample(v.clone(), v.clone(), v).unwrap();
        }
        prop_assert_eq!(w.len(), pushes.min(cap));
        let first = pushes.saturating_sub(cap);
        let got: Vec<f64> = w.samples().map(|t| t.x[0]).collect();
        let want: Vec<f64> = (first..pushes).map(|i| i as f64).collect();
        prop_assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sdpa_export_is_a_fixed_point(
        d1 in mat(2, 3),
        u1 in mat(1, 3),
        d2 in mat(2, 2),
        u2 in mat(1, 2),
        x in proptest::collection::vec(-1.0..1.0f64, 2),
    ) {
        let a = SystemPair::new(Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.99]), Mat::from_row_slice(2, 1, &[0.0, 0.787])).unwrap();
        let ds1 = TrajectoryDataset::new(&a.a * &d1 + &a.b * &u1, d1, u1).unwrap();
        let ds2 = TrajectoryDataset::new(&a.a * &d2 + &a.b * &u2, d2, u2).unwrap();
        let grams = [consistency_gram(&ds1), consistency_gram(&ds2)];
        let w = CostWeights::diagonal(&[1.0, 1.0], &[0.01]).unwrap();
        let poly = ConstraintPolytope::boxes(None, &[1.0], 2).unwrap();
        let p = robust_problem(&grams, &w, &Vector::from_vec(x), &poly, &Margins::default()).unwrap();
        let text = export_sdpa(&p);
        let again = export_sdpa(&parse_sdpa(&text).unwrap());
        prop_assert_eq!(text, again);
    }
}

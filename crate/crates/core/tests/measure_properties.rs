use ma_chanest::channel::Position;
use ma_chanest::grid::AngleGrid;
use ma_chanest::measure::{
    effective_coherence_1d, gen_random, half_power_width, max_beyond_main_lobe, mutual_coherence_column,
    uniform_positions, MeasurementOperator, MeasurementPlan,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn row0(positions: &[f64], grid: &AngleGrid) -> Vec<f64> {
    let c = effective_coherence_1d(positions, grid).unwrap();
    (0..grid.n()).map(|k| c[(0, k)].norm()).collect()
}

#[test]
fn kronecker_consistency_on_tx_axis() {
    let n = 6;
    let grid = AngleGrid::new(n).unwrap();
    let xs = uniform_positions(2.0, 0.25);
    let pairs = xs.iter().map(|&x| (Position::new(x, 0.0), Position::ORIGIN)).collect();
    let op = MeasurementOperator::matrix_free(MeasurementPlan::custom(pairs, 2.0).unwrap(), grid).unwrap();
    let eff = effective_coherence_1d(&xs, &grid).unwrap();
    // columns that differ only in the Tx azimuth index
    let cols: Vec<usize> = (1..=n).map(|ntx| (ntx - 1) * n * n + 1).collect();
    for (j, &nj) in cols.iter().enumerate() {
        let c = mutual_coherence_column(&op, nj).unwrap();
        for (k, &nk) in cols.iter().enumerate() {
            assert!((c[nk - 1] - eff[(k, j)]).norm() < 1e-10, "({k},{j})");
        }
    }
}

#[test]
fn aliasing_at_integer_spacings() {
    let grid = AngleGrid::new(24).unwrap();
    for d in [1.0, 2.0] {
        let row = row0(&uniform_positions(2.0, d), &grid);
        let lobe = (12.0 / d) as usize;
        assert!(row[lobe] > 0.99, "spacing {d}: {}", row[lobe]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sub_half_wavelength_spacing_has_no_grating_lobe(k in 5usize..=40, n in prop::sample::select(vec![12usize, 16, 24, 32])) {
        let grid = AngleGrid::new(n).unwrap();
        let d = 2.0 / k as f64;
        let row = row0(&uniform_positions(2.0, d), &grid);
        prop_assert!(max_beyond_main_lobe(&row) < 0.5);
    }

    #[test]
    fn full_span_narrows_main_lobe(k in 3usize..=10) {
        let grid = AngleGrid::new(24).unwrap();
        let d = 1.0 / k as f64;
        let half = half_power_width(&row0(&uniform_positions(1.0, d), &grid));
        let full = half_power_width(&row0(&uniform_positions(2.0, d), &grid));
        prop_assert!(full < half, "d={d}: {half} -> {full}");
    }

    #[test]
    fn coherence_ignores_pair_order(seed in any::<u64>(), n_ref in 1usize..=625) {
        let grid = AngleGrid::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = gen_random(2.0, 20, &mut rng).unwrap();
        let order: Vec<usize> = (0..20).map(|i| (i * 7) % 20).collect();
        let a = mutual_coherence_column(&MeasurementOperator::matrix_free(plan.clone(), grid).unwrap(), n_ref).unwrap();
        let b = mutual_coherence_column(&MeasurementOperator::matrix_free(plan.permuted(&order).unwrap(), grid).unwrap(), n_ref).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }
}

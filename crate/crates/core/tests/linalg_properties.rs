use nalgebra::DMatrix;
use proptest::prelude::*;
use schwarz_core::linalg_kernels::{bordered_det, cramer_ratio, rotation_to_pole, taylor_gap, BorderedMatrixSpec, Matrix};

fn ball_point(dim: usize, max_norm: f64) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim), 0.0..max_norm).prop_filter_map("nonzero", move |(v, rho)| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm > 1e-6).then(|| v.iter().map(|x| rho * x / norm).collect())
    })
}

fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter_map("nonzero", |v| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| v.iter().map(|x| x / norm).collect())
    })
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn taylor_gap_is_nonnegative(
        (x, y) in (1usize..6).prop_flat_map(|d| (ball_point(d, 1.0), ball_point(d, 0.999)))
    ) {
        let gap = taylor_gap(&x, &y).unwrap();
        prop_assert!(gap >= -1e-12, "gap {gap}");
    }

    #[test]
    fn taylor_gap_vanishes_on_the_diagonal(y in (1usize..6).prop_flat_map(|d| ball_point(d, 0.99))) {
        prop_assert!(taylor_gap(&y, &y).unwrap().abs() < 1e-14);
    }

    #[test]
    fn bordered_det_matches_dense_determinant(
        b in -3.0f64..3.0,
        a11 in -3.0f64..3.0,
        c in prop::collection::vec(-2.0f64..2.0, 1..7),
    ) {
        let spec = BorderedMatrixSpec { b, a11, c };
        let dense = to_nalgebra(&spec.to_dense()).determinant();
        let fast = bordered_det(&spec);
        prop_assert!((fast - dense).abs() <= 1e-10 * dense.abs().max(1.0), "{fast} vs {dense}");
    }

    #[test]
    fn rotation_to_pole_is_orthogonal_and_maps_to_pole(v in (1usize..7).prop_flat_map(unit_vector)) {
        let q = rotation_to_pole(&v).unwrap();
        let image = q.left_mul(&v);
        prop_assert!((image[0] - 1.0).abs() < 1e-12);
        prop_assert!(image[1..].iter().all(|x| x.abs() < 1e-12));
        let qq = q.matmul(&q.transpose());
        let id = Matrix::identity(v.len());
        for i in 0..v.len() {
            for j in 0..v.len() {
                prop_assert!((qq[(i, j)] - id[(i, j)]).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cramer_identity_holds(
        (entries, x, c, c_last) in (1usize..6).prop_flat_map(|k| (
            prop::collection::vec(-1.0f64..1.0, k * k),
            prop::collection::vec(-1.0f64..1.0, k),
            prop::collection::vec(-1.0f64..1.0, k),
            -1.0f64..1.0,
        ))
    ) {
        let k = x.len();
        // diagonally shifted to keep A comfortably invertible
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| entries[i * k + j] + if i == j { 3.0 } else { 0.0 }).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let b: Vec<f64> = a.mul_vec(&x).iter().map(|v| -v).collect();
        let (lhs, rhs) = cramer_ratio(&a, &x, &b, &c, c_last).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}

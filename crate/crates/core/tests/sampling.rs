use covglasso::{
    make_dense_sigma, make_sparse_sigma, sample_covariance, sample_mvn, CovarianceMatrix, Dataset, ModelKind, ModelSpec,
};
use nalgebra::DMatrix;

#[test]
fn identity_sample_covariance_concentrates() {
    let n = 100_000;
    let y = sample_mvn(&CovarianceMatrix::identity(3), n, 42).unwrap();
    let s = sample_covariance(&y).unwrap();
    let bound = 5.0 / (n as f64).sqrt();
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((s.get(i, j) - target).abs() < bound, "S[{i}][{j}] = {}", s.get(i, j));
        }
    }
}

#[test]
fn replicated_means_are_within_three_standard_errors() {
    let (p, n, reps) = (5, 200, 100);
    for sigma in [make_sparse_sigma(p).unwrap(), make_dense_sigma(p).unwrap()] {
        let mut sum = DMatrix::<f64>::zeros(p, p);
        let mut sum_sq = DMatrix::<f64>::zeros(p, p);
        for seed in 0..reps {
            let s = sample_covariance(&sample_mvn(&sigma, n, seed).unwrap()).unwrap().into_inner();
            sum_sq += s.component_mul(&s);
            sum += s;
        }
        let r = reps as f64;
        for i in 0..p {
            for j in 0..p {
                let mean = sum[(i, j)] / r;
                let var = (sum_sq[(i, j)] / r - mean * mean) * r / (r - 1.0);
                let se = (var / r).sqrt();
                assert!((mean - sigma.get(i, j)).abs() <= 3.0 * se, "({i}, {j}): mean {mean}, se {se}");
            }
        }
    }
}

#[test]
fn dataset_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ModelSpec::new(ModelKind::SparseTridiagonal, 6, 25, 17).unwrap();
    let data = Dataset::generate(spec).unwrap();
    data.save(dir.path()).unwrap();
    let meta = std::fs::read_to_string(dir.path().join("meta.txt")).unwrap();
    assert!(meta.contains("kind=sparse") && meta.contains("seed=17") && meta.contains("delta="));
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back.spec, spec);
    assert_eq!(back.y, data.y);
    assert_eq!(back.sigma_true, data.sigma_true);
    assert_eq!(back.s, data.s);
}

#[test]
fn matrix_csv_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let data = Dataset::generate(ModelSpec::new(ModelKind::DenseCompound, 7, 9, 3).unwrap()).unwrap();
    data.s.write_csv(&path).unwrap();
    assert_eq!(CovarianceMatrix::read_csv(&path).unwrap(), data.s);
}

#[test]
fn malformed_csv_is_rejected() {
    for text in ["1,2\n3\n", "1,x\n2,1\n", "1,2,3\n4,5,6\n", ""] {
        assert!(CovarianceMatrix::from_csv_reader(text.as_bytes()).is_err(), "{text:?}");
    }
}

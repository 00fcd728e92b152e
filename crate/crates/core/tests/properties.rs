//! Property tests over randomly generated inputs.

mod common;

use ndarray::Array2;
use proptest::prelude::*;
use qtamper::attacks::{attack_count, flip_labels, inject_anomalies};
use qtamper::data::{load_tampered_csv, save_tampered_csv, FeatureDataset, Provenance, TamperedDataset};
use qtamper::preprocess::{moving_average_downsample, PcaModel, StandardizerModel};
use qtamper::qkernel::{FeatureMapSpec, Kernel};
use qtamper::qsim::{run_circuit, Gate, QuantumCircuit, StateVector};

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    (0..4u8, 0..n, 1..n.max(2), -7.0..7.0f64).prop_map(move |(kind, t, off, a)| match kind {
        0 => Gate::h(t),
        1 => Gate::rx(a, t),
        2 => Gate::ry(a, t),
        _ => Gate::cnot((t + off) % n, t),
    })
}

fn circuit_strategy() -> impl Strategy<Value = QuantumCircuit> {
    (2usize..7).prop_flat_map(|n| {
        prop::collection::vec(gate_strategy(n), 0..60).prop_map(move |gates| {
            let mut c = QuantumCircuit::new(n).unwrap();
            for g in gates {
                c.push(g).unwrap();
            }
            c
        })
    })
}

fn dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> FeatureDataset {
    let d = rows[0].len();
    let x = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j]);
    FeatureDataset::new(x, labels, classes, (0..d).map(|j| format!("f_{j}")).collect(), Provenance::Synthetic { seed: 0 })
        .unwrap()
}

fn labeled_strategy() -> impl Strategy<Value = FeatureDataset> {
    (4usize..30, 2usize..5, 2usize..4).prop_flat_map(|(n, d, classes)| {
        (
            prop::collection::vec(prop::collection::vec(-50.0..50.0f64, d), n),
            prop::collection::vec(0..classes, n),
        )
            .prop_map(move |(rows, mut labels)| {
                // both ends of the label range always present
                labels[0] = 0;
                labels[1] = classes - 1;
                dataset(rows, labels, classes)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuits_preserve_norm(circ in circuit_strategy()) {
        let out = run_circuit(&circ, &StateVector::zero_state(circ.n_qubits).unwrap()).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn adjoint_undoes_circuit(circ in circuit_strategy()) {
        let zero = StateVector::zero_state(circ.n_qubits).unwrap();
        let out = run_circuit(&circ, &zero).unwrap();
        let back = run_circuit(&circ.adjoint(), &out).unwrap();
        prop_assert!((back.zero_probability() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quantum_gram_is_symmetric_and_permutation_equivariant(
        rows in prop::collection::vec(prop::collection::vec(-4.0..4.0f64, 4), 2..7),
        shift in 1usize..6,
    ) {
        let n = rows.len();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let xp = Array2::from_shape_fn((n, 4), |(i, j)| rows[perm[i]][j]);
        let kernel = Kernel::quantum(FeatureMapSpec::new(2));
        let k = kernel.matrix(x.view(), None).unwrap();
        let kp = kernel.matrix(xp.view(), None).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
                prop_assert!((kp.get(i, j) - k.get(perm[i], perm[j])).abs() < 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&k.get(i, j)));
            }
        }
    }

    #[test]
    fn tampered_csv_round_trips(ds in labeled_strategy(), mask_bits in any::<u64>()) {
        let mask: Vec<bool> = (0..ds.len()).map(|i| mask_bits >> (i % 64) & 1 == 1).collect();
        let t = TamperedDataset { data: ds, tamper_mask: mask };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        save_tampered_csv(&t, &path).unwrap();
        let back = load_tampered_csv(&path).unwrap();
        prop_assert_eq!(&back.data.features, &t.data.features);
        prop_assert_eq!(&back.data.labels, &t.data.labels);
        prop_assert_eq!(&back.tamper_mask, &t.tamper_mask);
    }

    #[test]
    fn label_flips_are_deterministic_and_masked_exactly(
        ds in labeled_strategy(), rate in 0.0..=1.0f64, seed in any::<u64>(),
    ) {
        let a = flip_labels(&ds, rate, seed).unwrap();
        let b = flip_labels(&ds, rate, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.tampered_count(), attack_count(rate, ds.len()));
        prop_assert_eq!(&a.data.features, &ds.features);
        for i in 0..ds.len() {
            prop_assert_eq!(a.tamper_mask[i], a.data.labels[i] != ds.labels[i]);
            prop_assert!(a.data.labels[i] < ds.class_count);
        }
    }

    #[test]
    fn anomalies_touch_only_masked_rows(
        ds in labeled_strategy(), rate in 0.0..=1.0f64, seed in any::<u64>(),
    ) {
        let t = inject_anomalies(&ds, rate, 5.0, seed).unwrap();
        prop_assert_eq!(&t.data.labels, &ds.labels);
        for i in 0..ds.len() {
            if !t.tamper_mask[i] {
                prop_assert_eq!(t.data.features.row(i), ds.features.row(i));
            }
        }
    }

    #[test]
    fn downsampling_commutes_with_scaling(
        series in prop::collection::vec(-100.0..100.0f64, 1..200), w in 1usize..10, c in -5.0..5.0f64,
    ) {
        prop_assume!(series.len() >= w);
        let scaled: Vec<f64> = series.iter().map(|v| c * v).collect();
        let a = moving_average_downsample(&scaled, w).unwrap();
        let b = moving_average_downsample(&series, w).unwrap();
        prop_assert_eq!(a.len(), series.len() / w);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - c * q).abs() < 1e-9 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn standardized_columns_are_centered(ds in labeled_strategy()) {
        let model = StandardizerModel::fit(ds.features.view()).unwrap();
        let z = model.apply(ds.features.view()).unwrap();
        for (j, col) in z.columns().into_iter().enumerate() {
            prop_assert!(col.sum().abs() < 1e-8);
            if model.stds[j] > 0.0 {
                let var = col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64;
                prop_assert!((var - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pca_components_are_orthonormal(ds in labeled_strategy()) {
        let k = ds.dim().min(ds.len() - 1);
        let pca = PcaModel::fit(ds.features.view(), k).unwrap();
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = pca.components[a].iter().zip(&pca.components[b]).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-9);
            }
        }
        prop_assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }
}

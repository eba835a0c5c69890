//! Module-level invariants, mostly as property tests.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{jacobi_singular_values, random_matrix};
use sparsense::placement::{place_sensors, ConstraintSpec};
use sparsense::pod::{compute_pod, cumulative_energy, truncate, ModeScaling, PodBasis, Truncation};
use sparsense::reconstruct::{measure, reconstruct};
use sparsense::snapshots::{
    center, generate_gaussian_dataset, load_snapshots, save_snapshots, split, SnapshotFormat,
    SnapshotMatrix,
};

fn finite_f64() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn centering_round_trips(
        n in 1usize..12,
        m in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-100.0..100.0));
        let snap = SnapshotMatrix::new(values.clone(), m, 1).unwrap();
        let norm = values.norm();
        let (centered, mean) = center(&snap);
        for c in 0..m {
            for r in 0..n {
                let back = centered.values()[(r, c)] + mean.values()[r];
                prop_assert!((back - values[(r, c)]).abs() <= 1e-14 * norm.max(1.0));
            }
        }
        for r in 0..n {
            let row_sum: f64 = centered.values().row(r).iter().sum();
            prop_assert!(row_sum.abs() <= 1e-12 * norm.max(1.0));
        }
    }

    #[test]
    fn split_partitions_cases(
        n_cases in 2usize..40,
        steps in 1usize..4,
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let m = n_cases * steps;
        let values = DMatrix::from_fn(2, m, |r, c| (r * m + c) as f64);
        let snap = SnapshotMatrix::new(values, n_cases, steps).unwrap();
        let sp = split(&snap, fraction, seed).unwrap();
        prop_assert!(!sp.train_indices.is_empty());
        prop_assert!(!sp.test_indices.is_empty());
        let mut all: Vec<usize> = sp.train_indices.iter().chain(&sp.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
        // no case straddles the boundary
        for chunk in [&sp.train_indices, &sp.test_indices] {
            for &col in chunk.iter() {
                let case = col / steps;
                for t in 0..steps {
                    prop_assert!(chunk.contains(&(case * steps + t)));
                }
            }
        }
        // deterministic
        prop_assert_eq!(&split(&snap, fraction, seed).unwrap(), &sp);
    }

    #[test]
    fn packed_binary_round_trip_is_bitwise(
        n in 1usize..6,
        m in 1usize..5,
        values in proptest::collection::vec(finite_f64(), 30),
    ) {
        let matrix = DMatrix::from_fn(n, m, |r, c| values[(r * m + c) % values.len()]);
        let snap = SnapshotMatrix::new(matrix, m, 1).unwrap();
        let path = std::env::temp_dir().join("sparsense-prop-roundtrip.snap");
        save_snapshots(&snap, &path, SnapshotFormat::PackedBinary).unwrap();
        let back = load_snapshots(&path, SnapshotFormat::PackedBinary).unwrap();
        for (a, b) in snap.values().iter().zip(back.values().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn energy_truncation_returns_minimal_rank(
        svals in proptest::collection::vec(0.01f64..10.0, 2..8),
        fraction in 0.1f64..0.999,
    ) {
        let mut svals = svals;
        svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let k = svals.len();
        let left = DMatrix::<f64>::identity(k, k);
        let snap = SnapshotMatrix::new(
            &left * DMatrix::from_diagonal(&DVector::from_row_slice(&svals)),
            k,
            1,
        )
        .unwrap();
        let spectrum = compute_pod(&snap, None).unwrap();
        let basis = truncate(&spectrum, Truncation::Energy(fraction), ModeScaling::Unit).unwrap();
        let energy = cumulative_energy(&spectrum).unwrap();
        let r = basis.rank();
        prop_assert!(energy[r - 1] >= fraction);
        if r > 1 {
            prop_assert!(energy[r - 2] < fraction);
        }
    }
}

#[test]
fn singular_values_match_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // direct-SVD path
    let wide = random_matrix(50, 12, &mut rng);
    let s = compute_pod(&SnapshotMatrix::new(wide.clone(), 12, 1).unwrap(), None).unwrap();
    let oracle = jacobi_singular_values(&wide);
    for (a, b) in s.singular_values().iter().zip(&oracle) {
        assert!(
            (a - b).abs() <= 1e-10 * oracle[0],
            "direct path: {a} vs oracle {b}"
        );
    }
    // method-of-snapshots path (n > 4m)
    let tall = random_matrix(60, 10, &mut rng);
    let s = compute_pod(&SnapshotMatrix::new(tall.clone(), 10, 1).unwrap(), None).unwrap();
    let oracle = jacobi_singular_values(&tall);
    for (a, b) in s.singular_values().iter().zip(&oracle) {
        assert!(
            (a - b).abs() <= 1e-8 * oracle[0],
            "snapshot path: {a} vs oracle {b}"
        );
    }
}

#[test]
fn snapshot_paths_agree_through_the_public_api() {
    // A tall matrix decomposes via the Gram route; its transpose is wide and
    // takes the direct SVD, whose right vectors must span the same modes.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let tall = random_matrix(60, 10, &mut rng);
    let via_gram = compute_pod(&SnapshotMatrix::new(tall.clone(), 10, 1).unwrap(), None).unwrap();
    let via_direct =
        compute_pod(&SnapshotMatrix::new(tall.transpose(), 60, 1).unwrap(), None).unwrap();
    for i in 0..10 {
        let a = via_gram.singular_values()[i];
        let b = via_direct.singular_values()[i];
        assert!((a - b).abs() <= 1e-8 * via_gram.singular_values()[0]);
        // modes agree up to sign for the well-separated part of the spectrum
        if a > 1e-6 * via_gram.singular_values()[0] {
            let dot = via_gram
                .left_vectors()
                .column(i)
                .dot(&via_direct.right_vectors().column(i));
            assert!(
                (dot.abs() - 1.0).abs() <= 1e-7,
                "mode {i} misaligned: |dot| = {}",
                dot.abs()
            );
        }
    }
}

#[test]
fn core_types_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<SnapshotMatrix>();
    assert_send_sync::<sparsense::snapshots::MeanField>();
    assert_send_sync::<sparsense::snapshots::Split>();
    assert_send_sync::<sparsense::snapshots::Coordinates>();
    assert_send_sync::<sparsense::pod::PodSpectrum>();
    assert_send_sync::<PodBasis>();
    assert_send_sync::<sparsense::placement::SensorSet>();
    assert_send_sync::<ConstraintSpec>();
    assert_send_sync::<sparsense::placement::QrFactorization>();
    assert_send_sync::<sparsense::reconstruct::MeasurementSeries>();
    assert_send_sync::<sparsense::reconstruct::ReconstructionReport>();
}

#[test]
fn mode_sign_flip_changes_nothing_downstream() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let snap = SnapshotMatrix::new(random_matrix(30, 8, &mut rng), 8, 1).unwrap();
    let basis = truncate(
        &compute_pod(&snap, None).unwrap(),
        Truncation::Rank(4),
        ModeScaling::SvScaled,
    )
    .unwrap();
    let mut flipped_modes = basis.modes().clone();
    flipped_modes.column_mut(2).neg_mut();
    let flipped = PodBasis::new(
        flipped_modes,
        basis.singular_values().clone(),
        ModeScaling::SvScaled,
    )
    .unwrap();

    let a = place_sensors(&basis, 4, &ConstraintSpec::none(), None).unwrap();
    let b = place_sensors(&flipped, 4, &ConstraintSpec::none(), None).unwrap();
    assert_eq!(a.indices(), b.indices());

    let field = random_matrix(30, 2, &mut rng);
    let ra = reconstruct(&basis, &a, &measure(&field, &a).unwrap(), None).unwrap();
    let rb = reconstruct(&flipped, &b, &measure(&field, &b).unwrap(), None).unwrap();
    assert!((ra.fields - rb.fields).norm() <= 1e-10 * field.norm());
}

#[test]
fn gaussian_generation_is_deterministic_and_lexicographic() {
    let means = [-1.0, 2.0];
    let sigmas = [0.5, 1.0, 2.0];
    let a = generate_gaussian_dataset(-5.0, 5.0, 0.05, &means, &sigmas).unwrap();
    let b = generate_gaussian_dataset(-5.0, 5.0, 0.05, &means, &sigmas).unwrap();
    for (x, y) in a.values().iter().zip(b.values().iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    // means outer, sigmas inner: peaks sit at the column's mean, and the
    // peak height decreases as sigma grows within each mean block
    let coords = a.coords().unwrap();
    for (j, col) in a.values().column_iter().enumerate() {
        let mu = means[j / sigmas.len()];
        let peak = (0..a.n_nodes())
            .max_by(|&i, &k| col[i].partial_cmp(&col[k]).unwrap())
            .unwrap();
        assert!((coords.point(peak)[0] - mu).abs() <= 0.05 + 1e-12);
    }
    for block in 0..means.len() {
        for s in 1..sigmas.len() {
            let prev = a.values().column(block * sigmas.len() + s - 1).max();
            let here = a.values().column(block * sigmas.len() + s).max();
            assert!(here < prev);
        }
    }
}

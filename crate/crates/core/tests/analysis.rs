use ipt_core::analysis::{build_curve, curve_stats, loop_closure, pca, AnalysisError, SweepCurve};
use ipt_core::metrics::{Condition, PredictionRecord};
use ipt_core::{Factor, ScoreVector};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn sweep_record(factor: Factor, value: f64, scores: Vec<f64>) -> PredictionRecord {
    PredictionRecord::new(
        format!("s_{value}"),
        0,
        ScoreVector::new(scores).unwrap(),
        Condition::Sweep { factor, value },
    )
}

fn curve(factor: Factor, ys: &[f64]) -> SweepCurve {
    SweepCurve {
        factor,
        xs: (0..ys.len()).map(|i| i as f64).collect(),
        ys: ys.to_vec(),
        class_id: 0,
        appearance_id: None,
        model: None,
    }
}

/// Largest-magnitude entry non-negative, computed independently of the crate.
fn sign_fixed(v: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

fn arb_matrix(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, m), n)
}

#[test]
fn cos_two_az_extrema() {
    let ys: Vec<f64> = (0..360).map(|a| (2.0 * f64::from(a)).to_radians().cos()).collect();
    let s = curve_stats(&curve(Factor::Azimuth, &ys), 1).unwrap();
    assert_eq!(s.peaks, [0.0, 180.0]);
    assert_eq!(s.valleys, [90.0, 270.0]);
    let s = curve_stats(&curve(Factor::Azimuth, &ys), 5).unwrap();
    assert_eq!(s.peaks, [0.0, 180.0]);
    assert_eq!(s.valleys, [90.0, 270.0]);
}

#[test]
fn monotone_curve_has_no_interior_extrema() {
    let ys: Vec<f64> = (0..50).map(|i| 100.0 - f64::from(i)).collect();
    let s = curve_stats(&curve(Factor::Distance, &ys), 3).unwrap();
    assert!(s.peaks.iter().all(|&x| x == 0.0));
    assert_eq!(s.valleys, [49.0]);
    assert_eq!(s.range, (51.0, 100.0));
}

#[test]
fn unimodal_curve_has_one_peak() {
    let ys: Vec<f64> = (0..41).map(|i| -((f64::from(i) - 17.0).powi(2))).collect();
    let s = curve_stats(&curve(Factor::Elevation, &ys), 1).unwrap();
    assert_eq!(s.peaks, [17.0]);
    assert_eq!(
        curve_stats(&curve(Factor::Elevation, &ys[..3]), 5),
        Err(AnalysisError::Window { window: 5, len: 3 })
    );
}

#[test]
fn flat_curve_from_constant_scores() {
    let recs: Vec<_> = (0..360)
        .map(|a| sweep_record(Factor::Azimuth, f64::from(a), vec![0.25; 4]))
        .collect();
    let c = build_curve(&recs, 2).unwrap();
    assert_eq!(c.xs, (0..360).map(f64::from).collect::<Vec<_>>());
    assert!(c.ys.iter().all(|&y| y == 0.25));
    let s = curve_stats(&c, 5).unwrap();
    assert!(s.peaks.is_empty() && s.valleys.is_empty());
}

#[test]
fn curve_errors() {
    let dup = vec![
        sweep_record(Factor::Azimuth, 3.0, vec![1.0]),
        sweep_record(Factor::Azimuth, 3.0, vec![0.5]),
    ];
    assert_eq!(build_curve(&dup, 0), Err(AnalysisError::DuplicateValue(3.0)));
    let mixed = vec![
        sweep_record(Factor::Azimuth, 3.0, vec![1.0]),
        sweep_record(Factor::Distance, 4.0, vec![0.5]),
    ];
    assert!(matches!(build_curve(&mixed, 0), Err(AnalysisError::MixedFactors(..))));
    // gaps are kept, not filled
    let gappy = vec![
        sweep_record(Factor::Distance, 100.0, vec![1.0]),
        sweep_record(Factor::Distance, 103.0, vec![0.5]),
    ];
    assert_eq!(build_curve(&gappy, 0).unwrap().xs, [100.0, 103.0]);
}

#[test]
fn rank_one_line() {
    let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), 2.0 * f64::from(i)]).collect();
    let e = pca(&pts, 1).unwrap();
    let want = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
    assert!((e.components[0][0] - want[0]).abs() < 1e-12);
    assert!((e.components[0][1] - want[1]).abs() < 1e-12);
    let e2 = pca(&pts, 2).unwrap();
    assert!(e2.rank_deficient);
    assert_eq!(e2.components.len(), 1);
}

#[test]
fn mean_shift_is_exact_on_dyadic_data() {
    // 16 samples of small integers: means and centered values are exact
    let pts: Vec<Vec<f64>> = (0..16)
        .map(|i| (0..5).map(|j| f64::from((i * 7 + j * 3) % 11) - 5.0).collect())
        .collect();
    let shifted: Vec<Vec<f64>> = pts
        .iter()
        .map(|r| r.iter().zip([100.0, -64.0, 3.0, 0.0, 1024.0]).map(|(x, c)| x + c).collect())
        .collect();
    let a = pca(&pts, 4).unwrap();
    let b = pca(&shifted, 4).unwrap();
    assert_eq!(a.coords, b.coords);
    assert_eq!(a.components, b.components);
    assert_eq!(a.explained_variance, b.explained_variance);
}

#[test]
fn circle_closes_the_loop() {
    let pts: Vec<Vec<f64>> = (0..36)
        .map(|i| {
            let t = f64::from(i * 10).to_radians();
            vec![3.0 * t.cos(), 3.0 * t.sin(), 0.5 * t.cos() + 1.0, 0.1]
        })
        .collect();
    let e = pca(&pts, 2).unwrap();
    let gap = loop_closure(&e.coords).unwrap();
    assert!((gap - 1.0).abs() < 0.1, "gap {gap}");
    let line: Vec<Vec<f64>> = (0..36).map(|i| vec![f64::from(i), 0.0]).collect();
    assert!(loop_closure(&line).unwrap() > 10.0);
    assert_eq!(loop_closure(&line[..2]), Err(AnalysisError::TooFewLoopSamples(2)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pca_matches_covariance_eigendecomposition(x in arb_matrix(20, 8)) {
        let e = pca(&x, 7).unwrap();
        prop_assert!(!e.rank_deficient);
        let n = x.len();
        let mut mean = vec![0.0; 8];
        for r in &x {
            for j in 0..8 {
                mean[j] += r[j] / n as f64;
            }
        }
        let centered = DMatrix::from_fn(n, 8, |i, j| x[i][j] - mean[j]);
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        for (k, &idx) in order.iter().take(7).enumerate() {
            prop_assert!((e.explained_variance[k] - eig.eigenvalues[idx]).abs() < 1e-6);
            let v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let v = sign_fixed(&v);
            for j in 0..8 {
                prop_assert!((e.components[k][j] - v[j]).abs() < 1e-6, "component {} entry {}", k, j);
            }
        }
        for w in e.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for a in 0..7 {
            for b in 0..7 {
                let d: f64 = e.components[a].iter().zip(&e.components[b]).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_rank_reconstruction(x in arb_matrix(12, 5)) {
        let e = pca(&x, 5).unwrap();
        let mut err = 0.0;
        let mut norm = 0.0;
        for (i, r) in x.iter().enumerate() {
            for j in 0..5 {
                let c = r[j] - e.mean[j];
                let rec: f64 = (0..5).map(|k| e.coords[i][k] * e.components[k][j]).sum();
                err += (rec - c) * (rec - c);
                norm += c * c;
            }
        }
        prop_assert!((err / norm).sqrt() < 1e-8);
    }

    #[test]
    fn mean_shift_within_tolerance(x in arb_matrix(15, 6), shift in proptest::collection::vec(-50.0f64..50.0, 6)) {
        let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
        let a = pca(&x, 3).unwrap();
        let b = pca(&shifted, 3).unwrap();
        for (p, q) in a.coords.iter().flatten().zip(b.coords.iter().flatten()) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn extrema_match_neighbor_scan(ys in proptest::collection::vec(0u8..20, 5..60), periodic in any::<bool>()) {
        let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
        let factor = if periodic { Factor::Azimuth } else { Factor::Distance };
        let s = curve_stats(&curve(factor, &ys), 1).unwrap();
        let n = ys.len();
        let (mut peaks, mut valleys) = (Vec::new(), Vec::new());
        for i in 0..n {
            let mut nb = Vec::new();
            if periodic || i > 0 {
                nb.push(ys[(i + n - 1) % n]);
            }
            if periodic || i + 1 < n {
                nb.push(ys[(i + 1) % n]);
            }
            if nb.iter().all(|&o| ys[i] > o) {
                peaks.push(i as f64);
            }
            if nb.iter().all(|&o| ys[i] < o) {
                valleys.push(i as f64);
            }
        }
        prop_assert_eq!(s.peaks, peaks);
        prop_assert_eq!(s.valleys, valleys);
    }

    #[test]
    fn curve_ignores_record_order(perm in Just((0..40).collect::<Vec<usize>>()).prop_shuffle()) {
        let recs: Vec<_> = (0..40)
            .map(|i| sweep_record(Factor::Elevation, -30.0 + 0.25 * i as f64, vec![(i as f64).sin().abs(), 0.5]))
            .collect();
        let shuffled: Vec<_> = perm.iter().map(|&i| recs[i].clone()).collect();
        prop_assert_eq!(build_curve(&shuffled, 0).unwrap(), build_curve(&recs, 0).unwrap());
    }
}

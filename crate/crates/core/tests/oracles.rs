mod oracle;

use dsdist_core::analysis::{distribution_summary, sort_by_distance};
use dsdist_core::distance::{self, extreme_images, DistanceReport};
use dsdist_core::performance::{confusion_counts, ods, per_image_fscores, threshold_grid, PixelGrid};
use dsdist_core::projection::{center_concat, fit_pca, project_pair};
use dsdist_core::synth::{generate, NormalStream, SynthSpec};
use dsdist_core::FeatureMatrix;
use nalgebra::DMatrix;
use oracle::{Rows, SplitMix};

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn fm(id: &str, rows: &Rows) -> FeatureMatrix {
    let ids = (0..rows.len()).map(|i| format!("{id}{i}")).collect();
    FeatureMatrix::from_rows_with_ids(id, ids, rows).unwrap()
}

#[test]
fn centering_matches_independent_mean() {
    let p: Rows = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]];
    let s: Rows = vec![vec![2.0, 4.0]];
    let mut all = p.clone();
    all.extend(s.clone());
    let expected = oracle::center(&all);
    let got = center_concat(&fm("p", &p), &fm("s", &s)).unwrap();
    assert_eq!(to_rows(&got.matrix), expected);
}

#[test]
fn pca_matches_covariance_eigen_oracle_10x6() {
    let mut rng = SplitMix(2024);
    let rows = rng.rows(10, 6);
    let (p, s) = rows.split_at(6);
    let res = project_pair(&fm("p", &p.to_vec()), &fm("s", &s.to_vec()), Some(3)).unwrap();
    let expected = oracle::pca_project(&oracle::center(&rows), 3);
    let mut got = to_rows(&res.projected_primary);
    got.extend(to_rows(&res.projected_secondary));
    for c in 0..3 {
        let sign = if got[0][c] * expected[0][c] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..rows.len() {
            assert!((got[r][c] - sign * expected[r][c]).abs() < 1e-8, "row {r} col {c}");
        }
    }
}

#[test]
fn pairwise_matches_double_loop_7x3_vs_5x3() {
    let mut rng = SplitMix(7);
    let s = rng.rows(7, 3);
    let p = rng.rows(5, 3);
    let got = distance::pairwise(
        &DMatrix::from_fn(7, 3, |i, j| s[i][j]),
        &DMatrix::from_fn(5, 3, |i, j| p[i][j]),
    )
    .unwrap();
    let expected = oracle::pairwise(&s, &p);
    for j in 0..7 {
        for k in 0..5 {
            assert!((got[(j, k)] - expected[j][k]).abs() < 1e-12);
        }
    }
    let i_dist = distance::image_distances(&got);
    let o = distance::dataset_distance(&i_dist).unwrap();
    let oracle_i = oracle::row_sums(&expected);
    assert!((o - oracle::mean(&oracle_i)).abs() < 1e-12);
}

#[test]
fn extreme_images_agree_with_sort_oracle() {
    let mut rng = SplitMix(50);
    let values: Vec<f64> = (0..50).map(|_| rng.uniform(0.0, 100.0)).collect();
    let ids: Vec<String> = (0..50).map(|i| format!("img{i:02}")).collect();
    let order = oracle::argsort(&values);
    let e = extreme_images(&ids, &values, 5).unwrap();
    let closest: Vec<String> = order[..5].iter().map(|&i| ids[i].clone()).collect();
    let farthest: Vec<String> = order.iter().rev().take(5).map(|&i| ids[i].clone()).collect();
    assert_eq!(e.closest, closest);
    assert_eq!(e.farthest, farthest);
}

#[test]
fn sort_by_distance_agrees_with_insertion_sort() {
    let mut rng = SplitMix(100);
    let values: Vec<f64> = (0..100).map(|_| (rng.uniform(0.0, 20.0)).floor()).collect();
    assert_eq!(sort_by_distance(&values), oracle::argsort(&values));
}

#[test]
fn distribution_summary_matches_quantile_oracle() {
    let mut st = NormalStream::new(1000);
    let values: Vec<f64> = (0..1000).map(|_| st.normal() * 3.0 + 10.0).collect();
    let s = distribution_summary(&values).unwrap();
    let sorted = oracle::sorted(&values);
    for (got, p) in [(s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75)] {
        assert!((got - oracle::quantile(&sorted, p)).abs() < 1e-9);
    }
    assert_eq!(s.min, sorted[0]);
    assert_eq!(s.max, sorted[999]);
    assert!((s.mean - oracle::mean(&values)).abs() < 1e-9);
}

fn grid(w: usize, h: usize, v: &[f64]) -> PixelGrid {
    PixelGrid::new(w, h, v.to_vec()).unwrap()
}

#[test]
fn worked_ods_example_against_exhaustive_grid() {
    let p = vec![0.2, 0.8, 0.6, 0.4];
    let g = vec![0.0, 1.0, 1.0, 0.0];
    let (t, f) = oracle::ods(&[p.clone()], &[g.clone()]);
    assert_eq!((t, f), (0.41, 1.0));
    let c = confusion_counts(&grid(2, 2, &p), &grid(2, 2, &g), 0.5).unwrap();
    assert_eq!((c.tp, c.fp, c.fn_), (2, 0, 0));
    let r = ods(&[grid(2, 2, &p)], &[grid(2, 2, &g)], &threshold_grid(100)).unwrap();
    assert_eq!((r.best_threshold, r.f_score), (t, f));
}

#[test]
fn per_image_scores_three_image_toy_set() {
    let preds = [vec![0.9, 0.1, 0.7, 0.3], vec![0.2, 0.2, 0.2, 0.9], vec![0.6, 0.6, 0.6, 0.6]];
    let masks = [vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]];
    let pg: Vec<_> = preds.iter().map(|v| grid(2, 2, v)).collect();
    let mg: Vec<_> = masks.iter().map(|v| grid(2, 2, v)).collect();
    let got = per_image_fscores(&pg, &mg, 0.5).unwrap();
    let expected: Vec<f64> = preds
        .iter()
        .zip(&masks)
        .map(|(p, g)| {
            let (mut tp, mut fp, mut fneg) = (0, 0, 0);
            for i in 0..4 {
                match (p[i] >= 0.5, g[i] > 0.5) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fneg += 1,
                    _ => {}
                }
            }
            oracle::f_from_counts(tp, fp, fneg)
        })
        .collect();
    assert_eq!(got, expected);
    assert_eq!(got[0], 1.0);
    assert_eq!(got[1], 0.0);
}

#[test]
fn two_cluster_within_closer_than_between() {
    let m = generate(&SynthSpec::two_cluster("c", 20, 5, 10.0, 4)).unwrap();
    let rows = to_rows(m.values());
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..20 {
        for j in (i + 1)..20 {
            let d = oracle::dist(&rows[i], &rows[j]);
            if (i < 10) == (j < 10) {
                within += d;
                nw += 1;
            } else {
                between += d;
                nb += 1;
            }
        }
    }
    assert!(within / (nw as f64) < between / (nb as f64));
}

#[test]
fn pipeline_on_full_rank_equals_raw_distances() {
    let mut rng = SplitMix(31);
    let p = rng.rows(12, 4);
    let s = rng.rows(9, 4);
    let r = distance::measure(&fm("p", &p), &fm("s", &s), Some(4)).unwrap();
    let expected = oracle::row_sums(&oracle::pairwise(&s, &p));
    for (g, e) in r.image_distances.iter().zip(&expected) {
        assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0));
    }
    assert_eq!(r.dataset_distance, distance::dataset_distance(&r.image_distances).unwrap());
}

#[test]
fn explained_variance_matches_eigenvalues() {
    let mut rng = SplitMix(77);
    let rows = rng.rows(15, 5);
    let centered = oracle::center(&rows);
    let (eig, _) = oracle::jacobi_eigen(&oracle::gram(&centered));
    let c = center_concat(&fm("p", &rows[..8].to_vec()), &fm("s", &rows[8..].to_vec())).unwrap();
    let res = fit_pca(&c, 5).unwrap();
    for (v, e) in res.explained_variance.iter().zip(&eig) {
        assert!((v - e / 14.0).abs() < 1e-9 * e.max(1.0));
    }
}

#[test]
fn report_from_projected_keeps_ids() {
    let s = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let p = DMatrix::from_row_slice(1, 1, &[3.0]);
    let r = DistanceReport::from_projected("P", "S", vec!["a".into(), "b".into()], &s, &p).unwrap();
    let summary = r.summary();
    assert_eq!(summary.i_dist[0].image_id, "a");
    assert_eq!(summary.values(), vec![3.0, 2.0]);
    assert_eq!(summary.o_dist, 2.5);
    assert_eq!(summary.n_primary, 1);
}

use proptest::prelude::*;

use seq2peak::cyclicnorm::{compute_phase_stats, denormalize, normalize, EPSILON};
use seq2peak::data::{acf, extract_peak, split, standardize, synthetic_start, SplitRatios, TimeSeriesFrame};
use seq2peak::grad::Param;
use seq2peak::pipeline::{hybrid_loss, peak_decode};
use seq2peak::train::checkpoint;
use seq2peak::Matrix;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-50.0f64..50.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d))
}

fn days_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..5).prop_flat_map(|(d, c)| matrix(24 * d, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn peaks_commute_with_channel_permutation(y in days_matrix(), rot in 0usize..5) {
        let c = y.cols();
        let perm: Vec<usize> = (0..c).map(|j| (j + rot) % c).collect();
        let permuted = Matrix::from_fn(y.rows(), c, |r, j| y.get(r, perm[j]));
        let p = extract_peak(&y).unwrap();
        let pp = extract_peak(&permuted).unwrap();
        for d in 0..p.rows() {
            for j in 0..c {
                prop_assert_eq!(pp.get(d, j).to_bits(), p.get(d, perm[j]).to_bits());
            }
        }
    }

    #[test]
    fn peak_is_attained_upper_bound(y in days_matrix()) {
        let p = extract_peak(&y).unwrap();
        for d in 0..p.rows() {
            for j in 0..y.cols() {
                let day: Vec<f64> = (0..24).map(|h| y.get(24 * d + h, j)).collect();
                prop_assert!(day.iter().all(|&v| v <= p.get(d, j)));
                prop_assert!(day.contains(&p.get(d, j)));
            }
        }
        prop_assert_eq!(peak_decode(&y).unwrap(), p);
    }

    #[test]
    fn cyclic_round_trip(days in 1usize..5, c in 1usize..4, anchor in 0usize..24, seed in any::<u64>()) {
        let mut s = seed;
        let x = Matrix::from_fn(24 * days, c, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        });
        let stats = compute_phase_stats(&x, anchor).unwrap();
        prop_assert!(stats.stds.data().iter().all(|&v| v >= EPSILON));
        let z = normalize(&x, &stats, anchor).unwrap();
        let back = denormalize(&z, &stats, stats.forecast_phase()).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn hybrid_loss_interpolates(y_hat in matrix(48, 2), y in matrix(48, 2), alpha in 0.0f64..=1.0) {
        let (ph, py) = (extract_peak(&y_hat).unwrap(), extract_peak(&y).unwrap());
        let seq = hybrid_loss(&y_hat, &y, &ph, &py, 1.0).unwrap();
        let peak = hybrid_loss(&y_hat, &y, &ph, &py, 0.0).unwrap();
        let mixed = hybrid_loss(&y_hat, &y, &ph, &py, alpha).unwrap();
        prop_assert!((mixed - (alpha * seq + (1.0 - alpha) * peak)).abs() <= 1e-12 * seq.max(peak).max(1.0));
        prop_assert!(mixed >= seq.min(peak) - 1e-9 && mixed <= seq.max(peak) + 1e-9);
    }

    #[test]
    fn acf_is_bounded(x in prop::collection::vec(-5.0f64..5.0, 10..200), lag in 1usize..9) {
        prop_assume!(x.iter().any(|&v| (v - x[0]).abs() > 1e-6));
        let r = acf(&x, lag).unwrap();
        prop_assert_eq!(r.at(0), 1.0);
        prop_assert!(r.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn checkpoint_round_trip(a in matrix(3, 4), b in matrix(24, 2), name in "[a-z_.]{1,16}") {
        let params = [Param::new(name.clone(), a.clone()), Param::new("b", b.clone())];
        let back = checkpoint::decode(&checkpoint::encode(&params.iter().collect::<Vec<_>>())).unwrap();
        prop_assert_eq!(&back[0].name, &name);
        prop_assert_eq!(&back[0].value, &a);
        prop_assert_eq!(&back[1].value, &b);
    }

    #[test]
    fn splits_are_disjoint_ordered_and_train_standardized(len in 30usize..400, c in 1usize..3) {
        let values = Matrix::from_fn(len, c, |r, j| ((r * 7 + j * 3) % 11) as f64 + r as f64 * 0.01);
        let frame = TimeSeriesFrame::from_start(synthetic_start(), values, (0..c).map(|j| format!("c{j}")).collect()).unwrap();
        let (tr, va, te) = split(&frame, SplitRatios::default(), 1).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), len);
        prop_assert!(tr.timestamps().last() < va.timestamps().first());
        prop_assert!(va.timestamps().last() < te.timestamps().first());
        let (trz, _, stats) = standardize(&tr, &[&va, &te]).unwrap();
        for j in 0..c {
            let col = trz.channel(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(stats.std[j] > 0.0);
        }
        // Statistics come from train rows only.
        let col = tr.channel(0);
        prop_assert!((stats.mean[0] - col.iter().sum::<f64>() / col.len() as f64).abs() < 1e-12);
    }
}

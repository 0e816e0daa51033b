//! Independent re-computations of derived values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seq2peak::cyclicnorm::{compute_phase_stats, denormalize, normalize};
use seq2peak::data::{gen_synthetic, split, standardize, synthetic_start, SplitRatios, SyntheticSpec, TimeSeriesFrame};
use seq2peak::grad::{Graph, Param};
use seq2peak::models::{build_forecaster, ModelArgs, ModelKind};
use seq2peak::pipeline::{build_pipeline, CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{evaluate, peak_mse, prepare_dataset, train, Optimizer, TrainConfig, WindowStrides};
use seq2peak::Matrix;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Per-phase population mean and std by explicit grouping.
fn phase_oracle(x: &Matrix, anchor: usize, j: usize, phase: usize) -> (f64, f64) {
    let vals: Vec<f64> = (0..x.rows())
        .filter(|r| (anchor + r) % 24 == phase)
        .map(|r| x.get(r, j))
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    (mean, var.sqrt().max(1e-5))
}

#[test]
fn two_point_phase_statistics() {
    let x = Matrix::from_fn(48, 1, |r, _| if r < 24 { 1.0 } else { 3.0 });
    let s = compute_phase_stats(&x, 0).unwrap();
    for i in 0..24 {
        assert_eq!(s.means.get(i, 0), 2.0);
        assert_eq!(s.stds.get(i, 0), 1.0);
    }
}

#[test]
fn anchored_stats_match_rolled_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let series = random(&mut rng, 24 * 6, 3, 4.0);
    // Rows 5.. of a midnight-anchored series start at hour 5.
    let window = series.slice_rows(5, 5 + 24 * 5);
    let at5 = compute_phase_stats(&window, 5).unwrap();
    let at0 = compute_phase_stats(&window, 0).unwrap();
    for i in 0..24 {
        for j in 0..3 {
            assert_eq!(at5.means.get((i + 5) % 24, j), at0.means.get(i, j));
            assert_eq!(at5.stds.get((i + 5) % 24, j), at0.stds.get(i, j));
            let (m, s) = phase_oracle(&window, 5, j, (i + 5) % 24);
            assert!((at5.means.get((i + 5) % 24, j) - m).abs() < 1e-12);
            assert!((at5.stds.get((i + 5) % 24, j) - s).abs() < 1e-12);
        }
    }
}

#[test]
fn known_future_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for anchor in [0, 7, 23] {
        let x = random(&mut rng, 72, 2, 3.0);
        let y = random(&mut rng, 48, 2, 3.0);
        let stats = compute_phase_stats(&x, anchor).unwrap();
        let fp = stats.forecast_phase();
        assert_eq!(fp, (anchor + 72) % 24);
        let z = Matrix::from_fn(48, 2, |r, j| {
            let (m, s) = phase_oracle(&x, anchor, j, (fp + r) % 24);
            (y.get(r, j) - m) / s
        });
        let back = denormalize(&z, &stats, fp).unwrap();
        assert!(back.max_abs_diff(&y) < 1e-10);
        let zx = normalize(&x, &stats, anchor).unwrap();
        for r in 0..72 {
            let (m, s) = phase_oracle(&x, anchor, 1, (anchor + r) % 24);
            assert!((zx.get(r, 1) - (x.get(r, 1) - m) / s).abs() < 1e-12);
        }
    }
}

#[test]
fn split_floor_rule() {
    let frame = |len: usize| {
        TimeSeriesFrame::from_start(synthetic_start(), Matrix::zeros(len, 1), vec!["a".into()]).unwrap()
    };
    let lens = |len| {
        let (a, b, c) = split(&frame(len), SplitRatios::default(), 1).unwrap();
        (a.len(), b.len(), c.len())
    };
    assert_eq!(lens(100), (60, 20, 20));
    assert_eq!(lens(101), (60, 20, 21));
    let bad = SplitRatios { train: 0.5, val: 0.5, test: 0.5 };
    assert!(split(&frame(100), bad, 1).is_err());
}

#[test]
fn two_point_standardization() {
    let f = TimeSeriesFrame::from_start(
        synthetic_start(),
        Matrix::from_vec(2, 2, vec![1.0, 5.0, 3.0, 5.0]),
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let (z, _, stats) = standardize(&f, &[]).unwrap();
    assert_eq!((stats.mean[0], stats.std[0]), (2.0, 1.0));
    assert_eq!(z.channel(0), vec![-1.0, 1.0]);
    assert_eq!(z.channel(1), vec![0.0, 0.0]);
    let (zz, _, _) = standardize(&z, &[]).unwrap();
    assert!(zz.values().max_abs_diff(z.values()) < 1e-12);
}

#[test]
fn regression_gradient_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d, k) = (17, 6, 3);
    let x = random(&mut rng, n, d, 1.0);
    let w = random(&mut rng, d, k, 1.0);
    let y = random(&mut rng, n, k, 1.0);
    let mut g = Graph::new();
    let xn = g.constant(x.clone());
    let wn = g.param(w.clone());
    let yn = g.constant(y.clone());
    let pred = g.matmul(xn, wn).unwrap();
    let loss = g.mse(pred, yn).unwrap();
    let grads = g.backward(loss).unwrap();
    // 2 Xᵀ (XW − Y) / (n k)
    let expect = Matrix::from_fn(d, k, |a, b| {
        (0..n)
            .map(|i| {
                let xw: f64 = (0..d).map(|p| x.get(i, p) * w.get(p, b)).sum();
                x.get(i, a) * (xw - y.get(i, b))
            })
            .sum::<f64>()
            * 2.0
            / (n * k) as f64
    });
    assert!(grads.get(wn).unwrap().max_abs_diff(&expect) < 1e-12);
}

/// Solves `A w = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut w = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * w[c]).sum();
        w[r] = (b[r] - s) / a[r][r];
    }
    w
}

#[test]
fn linear_student_recovers_teacher() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, m, c, k) = (12, 4, 3, 40);
    let w_star = random(&mut rng, m, n, 0.5);
    let b_star = random(&mut rng, m, 1, 0.5);
    let xs: Vec<Matrix> = (0..k).map(|_| random(&mut rng, n, c, 1.0)).collect();
    let ys: Vec<Matrix> = xs
        .iter()
        .map(|x| Matrix::from_fn(m, c, |i, j| (0..n).map(|p| w_star.get(i, p) * x.get(p, j)).sum::<f64>() + b_star.get(i, 0)))
        .collect();

    // Least-squares oracle on the stacked columns recovers the teacher.
    let cols: Vec<Vec<f64>> = xs
        .iter()
        .flat_map(|x| (0..c).map(move |j| (0..n).map(|p| x.get(p, j)).chain([1.0]).collect()))
        .collect();
    let targets: Vec<Vec<f64>> = ys.iter().flat_map(|y| (0..c).map(move |j| y.column(j))).collect();
    let gram: Vec<Vec<f64>> = (0..=n)
        .map(|a| (0..=n).map(|b| cols.iter().map(|v| v[a] * v[b]).sum()).collect())
        .collect();
    for i in 0..m {
        let rhs: Vec<f64> = (0..=n).map(|a| cols.iter().zip(&targets).map(|(v, t)| v[a] * t[i]).sum()).collect();
        let sol = solve(gram.clone(), rhs);
        for p in 0..n {
            assert!((sol[p] - w_star.get(i, p)).abs() < 1e-9);
        }
        assert!((sol[n] - b_star.get(i, 0)).abs() < 1e-9);
    }

    // Gradient descent on the forecaster reaches the same fit.
    let mut model = build_forecaster(ModelKind::Linear, &ModelArgs::default(), n, m, c, 1).unwrap();
    let mut opt = Optimizer::sgd(0.5);
    let mut loss = f64::INFINITY;
    for _ in 0..3000 {
        let mut g = Graph::new();
        let ids: Vec<_> = model.params().iter().map(|p| g.param(p.value.clone())).collect();
        let mut total = None;
        for (x, y) in xs.iter().zip(&ys) {
            let xn = g.constant(x.clone());
            let yn = g.constant(y.clone());
            let pred = model.forward(&mut g, &ids, xn).unwrap();
            let l = g.mse(pred, yn).unwrap();
            total = Some(match total {
                None => l,
                Some(t) => g.scale_add(t, 1.0, l, 1.0).unwrap(),
            });
        }
        let total = total.unwrap();
        let avg = g.scale_add(total, 1.0 / k as f64, total, 0.0).unwrap();
        loss = g.scalar(avg);
        let grads = g.backward(avg).unwrap();
        let gs: Vec<Matrix> = ids.iter().map(|&id| grads.get(id).unwrap().clone()).collect();
        let params: &mut [Param] = model.params_mut();
        let mut values: Vec<&mut Matrix> = params.iter_mut().map(|p| &mut p.value).collect();
        opt.step(&mut values, &gs);
    }
    assert!(loss < 1e-6, "final training loss {loss}");
    assert!(model.params()[0].value.max_abs_diff(&w_star) < 1e-3);
}

#[test]
fn linear_pipeline_fits_noiseless_periodic_data() {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 30,
        channels: 2,
        noise_std: 0.0,
        peak_jitter_std: 0.0,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let data = prepare_dataset("periodic", &frame, SplitRatios::default(), 48, 24, WindowStrides { train: 1, eval: 1 }).unwrap();
    let mut p = build_pipeline(
        &PipelineConfig {
            paradigm: Paradigm::Sfs,
            input_len: 48,
            horizon: 24,
            channels: 2,
            model: ModelKind::Linear,
            model_args: ModelArgs::default(),
            cyclicnorm: CyclicNormConfig::disabled(),
            alpha: None,
        },
        0,
    )
    .unwrap();
    let cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let h = train(&mut p, &data.train, &data.val, &cfg).unwrap();
    assert!(h.best_val_peak_mse < 1e-4, "val peak mse {}", h.best_val_peak_mse);
    assert_eq!(peak_mse(&p, &data.val).unwrap(), h.best_val_peak_mse);
}

#[test]
fn zero_predictor_scores_peak_second_moment() {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 60,
        channels: 2,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let data = prepare_dataset("synthetic", &frame, SplitRatios::default(), 48, 48, WindowStrides { train: 24, eval: 24 }).unwrap();
    let mut p = build_pipeline(
        &PipelineConfig {
            paradigm: Paradigm::Pfp,
            input_len: 48,
            horizon: 48,
            channels: 2,
            model: ModelKind::Linear,
            model_args: ModelArgs::default(),
            cyclicnorm: CyclicNormConfig::disabled(),
            alpha: None,
        },
        0,
    )
    .unwrap();
    let zeros: Vec<Matrix> = p.param_values().iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
    p.set_param_values(&zeros).unwrap();
    let report = evaluate(&p, &data.test, &[2]).unwrap();
    // Direct computation over the test frame: daily maxima of each window's
    // forecast days, squared and averaged.
    let values = data.test.frame().values();
    let mut sum = 0.0;
    let mut count = 0;
    for w in 0..data.test.len() {
        let origin = w * 24 + 48;
        for d in 0..2 {
            for j in 0..2 {
                let peak = (0..24).map(|h| values.get(origin + 24 * d + h, j)).fold(f64::NEG_INFINITY, f64::max);
                sum += peak * peak;
                count += 1;
            }
        }
    }
    assert!((report.horizons[0].mse - sum / count as f64).abs() < 1e-12);
}

#[test]
fn reference_gain_arithmetic() {
    // DLinear test peak MSE at 5/10/15/30 days, without and with the framework.
    let base = [0.306, 0.353, 0.393, 0.513];
    let ours = [0.240, 0.263, 0.279, 0.335];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&base) - 0.391).abs() < 5e-4);
    assert!((mean(&ours) - 0.279).abs() < 5e-4);
    let gain = (base[0] - ours[0]) / base[0];
    assert!((gain - 0.216).abs() < 5e-4);
    assert_eq!(30 * 24, 720);
    assert_eq!([5, 10, 15, 30].map(|d| d * 24), [120, 240, 360, 720]);
}

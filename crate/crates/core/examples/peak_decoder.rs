//! The max-pool decoder turns an hourly forecast into daily peaks and routes
//! the peak-loss gradient to the hour that produced each peak.

use seq2peak::grad::Graph;
use seq2peak::pipeline::{hybrid_loss, peak_decode};
use seq2peak::Matrix;

fn main() -> seq2peak::Result<()> {
    // Two days, one channel: a bump at hour 14, then a bump at hour 3.
    let forecast = Matrix::from_fn(48, 1, |t, _| match t {
        14 => 3.0,
        27 => 2.5,
        _ => (t % 24) as f64 * 0.05,
    });
    println!("peaks: {:?}", peak_decode(&forecast)?.data());

    let truth = Matrix::from_vec(2, 1, vec![2.0, 3.0]);
    let mut g = Graph::new();
    let y = g.param(forecast.clone());
    let peaks = g.maxpool_time(y, 24)?;
    let target = g.constant(truth.clone());
    let loss = g.mse(peaks, target)?;
    let grads = g.backward(loss)?;
    let dy = grads.get(y).expect("param has a gradient");
    let nonzero: Vec<(usize, f64)> = (0..48)
        .filter(|&t| dy.get(t, 0) != 0.0)
        .map(|t| (t, dy.get(t, 0)))
        .collect();
    println!("peak-loss gradient reaches hours {nonzero:?}");

    let seq_truth = Matrix::filled(48, 1, 0.5);
    for alpha in [0.0, 0.5, 1.0] {
        let l = hybrid_loss(&forecast, &seq_truth, &peak_decode(&forecast)?, &truth, alpha)?;
        println!("hybrid loss at alpha {alpha}: {l:.4}");
    }
    Ok(())
}

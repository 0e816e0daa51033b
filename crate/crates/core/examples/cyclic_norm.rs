//! Per-phase normalization of one window, a trainable shift of its
//! statistics, and the round trip back to the data scale.

use seq2peak::cyclicnorm::{
    compute_phase_stats, denormalize, normalize, shift_stats, ShiftParams, ShiftVariant,
};
use seq2peak::data::{gen_synthetic, make_windows, SyntheticSpec};

fn main() -> seq2peak::Result<()> {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 40,
        channels: 2,
        trend_slope: 0.01,
        ..SyntheticSpec::default()
    })?;
    let window = make_windows(&frame, 720, 120, 24)?.remove(3);
    let stats = compute_phase_stats(&window.x, window.start_phase)?;
    println!(
        "window starts at hour {}, forecast starts at hour {}",
        window.start_phase,
        stats.forecast_phase()
    );
    for phase in [0, 6, 18] {
        println!(
            "phase {phase:>2}: mean {:+.3}  std {:.3}",
            stats.means.get(phase, 0),
            stats.stds.get(phase, 0)
        );
    }

    let z = normalize(&window.x, &stats, window.start_phase)?;
    // Windows span whole days, so the forecast phase equals the input phase.
    let back = denormalize(&z, &stats, stats.forecast_phase())?;
    println!("round-trip max error {:.2e}", back.max_abs_diff(&window.x));

    let mut shift = ShiftParams::new(ShiftVariant::Affine, 2);
    for p in shift.params_mut() {
        if p.name == "shift.std_scale" {
            p.value.data_mut().iter_mut().for_each(|v| *v = 1.5);
        }
    }
    let shifted = shift_stats(&stats, &shift)?;
    println!(
        "affine shift with std scale 1.5: phase 6 std {:.3} -> {:.3}",
        stats.stds.get(6, 0),
        shifted.stds.get(6, 0)
    );
    Ok(())
}

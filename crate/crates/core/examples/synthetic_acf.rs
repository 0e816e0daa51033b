//! Daily peaks of a noisy periodic series are far less autocorrelated than
//! the hourly series itself.

use seq2peak::data::{acf, extract_peak, gen_synthetic, SyntheticSpec, PERIOD};
use seq2peak::Matrix;

fn main() -> seq2peak::Result<()> {
    for seed in 0..5 {
        let frame = gen_synthetic(&SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        })?;
        let ot = frame.channel(frame.channel_index("OT").expect("last channel is OT"));
        let full = acf(&ot, 2 * PERIOD)?;
        let peaks = extract_peak(&Matrix::column_vector(ot))?.into_data();
        let peak = acf(&peaks, 2)?;
        println!(
            "seed {seed}: full r(24) = {:.3}, peak r(1) = {:.3}, 95% limit {:.3} / {:.3}",
            full.at(PERIOD),
            peak.at(1),
            full.limit,
            peak.limit
        );
    }
    Ok(())
}

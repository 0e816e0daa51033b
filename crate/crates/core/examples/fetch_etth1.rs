//! Download ETTh1 into `data/` (or reuse a verified copy) and compare the
//! autocorrelation of the `OT` series with that of its daily peaks.

use std::path::Path;

use seq2peak::data::{acf, extract_peak, fetch_dataset, load_csv, MissingPolicy, PERIOD};
use seq2peak::Matrix;

fn main() {
    let path = match fetch_dataset("ETTh1", None, Path::new("data")) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("ETTh1 unavailable: {e}");
            std::process::exit(2);
        }
    };
    let frame = load_csv(&path, MissingPolicy::ForwardFill).expect("ETTh1 parses");
    println!("{} rows, channels {:?}", frame.len(), frame.channel_names());
    let ot = frame.channel(frame.channel_index("OT").expect("ETTh1 has OT"));
    let days = ot.len() / PERIOD;
    let full = acf(&ot, PERIOD).expect("non-constant");
    let peaks = extract_peak(&Matrix::column_vector(ot[..days * PERIOD].to_vec()))
        .expect("whole days")
        .into_data();
    let peak = acf(&peaks, 1).expect("non-constant");
    println!("OT: full r(24) = {:.3}, peak r(1) = {:.3}", full.at(PERIOD), peak.at(1));
}

//! Series ingestion, synthetic generation, windowing, peak extraction,
//! splitting, and autocorrelation.

mod acf;
mod fetch;
mod frame;
mod synthetic;
mod window;

pub use acf::{acf, Autocorrelation};
pub use fetch::{cache_paths, fetch_dataset, known_url, sha256_file, verify_cached, KNOWN_DATASETS};
pub use frame::{load_csv, MissingPolicy, TimeSeriesFrame, TIMESTAMP_FORMAT};
pub use synthetic::{gen_synthetic, synthetic_start, SyntheticSpec};
pub use window::{
    extract_peak, make_windows, split, standardize, ChannelStats, SplitRatios, WindowSample,
    WindowSet, DATASET_STD_FLOOR,
};

/// Hours per cycle.
pub const PERIOD: usize = 24;

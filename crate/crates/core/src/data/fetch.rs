//! Download-once dataset cache.
//!
//! Layout: `<cache_dir>/<name>.csv` plus a `<name>.sha256` sidecar holding
//! the hex digest recorded at download time. A cached file is re-hashed on
//! every call and must match its sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Public hourly datasets with a known source.
pub const KNOWN_DATASETS: &[(&str, &str)] = &[
    (
        "ETTh1",
        "https://raw.githubusercontent.com/zhouhaoyi/ETDataset/main/ETT-small/ETTh1.csv",
    ),
    (
        "ETTh2",
        "https://raw.githubusercontent.com/zhouhaoyi/ETDataset/main/ETT-small/ETTh2.csv",
    ),
];

pub fn known_url(name: &str) -> Option<&'static str> {
    KNOWN_DATASETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, url)| *url)
}

pub fn cache_paths(name: &str, cache_dir: &Path) -> (PathBuf, PathBuf) {
    (
        cache_dir.join(format!("{name}.csv")),
        cache_dir.join(format!("{name}.sha256")),
    )
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Verifies a cached dataset against its sidecar digest.
pub fn verify_cached(name: &str, cache_dir: &Path) -> Result<PathBuf> {
    let (csv, sidecar) = cache_paths(name, cache_dir);
    let expected = fs::read_to_string(&sidecar)?.trim().to_string();
    let actual = sha256_file(&csv)?;
    if actual != expected {
        return Err(Error::Integrity {
            path: csv,
            expected,
            actual,
        });
    }
    Ok(csv)
}

/// Returns the local CSV path for `name`, downloading it into `cache_dir`
/// only when no cached copy exists. `url` overrides the built-in source.
pub fn fetch_dataset(name: &str, url: Option<&str>, cache_dir: &Path) -> Result<PathBuf> {
    let (csv, sidecar) = cache_paths(name, cache_dir);
    if csv.exists() && sidecar.exists() {
        return verify_cached(name, cache_dir);
    }
    let url = url.or_else(|| known_url(name)).ok_or_else(|| {
        Error::Usage(format!(
            "unknown dataset `{name}`; pass a url (known: {})",
            KNOWN_DATASETS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    fs::create_dir_all(cache_dir)?;
    let fetch_err = |message: String| Error::Fetch {
        name: name.to_string(),
        message,
    };

    log::info!("downloading {name} from {url}");
    let response = ureq::get(url).call().map_err(|e| fetch_err(e.to_string()))?;
    let declared: Option<u64> = response
        .headers()
        .get("content-length")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok());
    let mut reader = response.into_body().into_reader();

    let part = cache_dir.join(format!("{name}.csv.part"));
    let mut out = fs::File::create(&part)?;
    let mut hasher = Sha256::new();
    let mut received = 0u64;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(n) => n,
            Err(e) => {
                let _ = fs::remove_file(&part);
                return Err(fetch_err(e.to_string()));
            }
        };
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        out.write_all(&buf[..n])?;
        received += n as u64;
    }
    out.flush()?;
    drop(out);

    let digest = hex::encode(hasher.finalize());
    if let Some(expected_len) = declared {
        if received != expected_len {
            let _ = fs::remove_file(&part);
            return Err(Error::Integrity {
                path: csv,
                expected: format!("{expected_len} bytes"),
                actual: format!("{received} bytes"),
            });
        }
    }
    fs::rename(&part, &csv)?;
    fs::write(&sidecar, format!("{digest}\n"))?;
    Ok(csv)
}

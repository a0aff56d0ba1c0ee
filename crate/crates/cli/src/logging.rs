//! Three-level stderr logging, configured once from `--log-level`.

use std::sync::atomic::{AtomicU8, Ordering};

use crate::errors::{CliError, CliResult};

static LEVEL: AtomicU8 = AtomicU8::new(1);

pub fn init(level: &str) -> CliResult<()> {
    let value = match level {
        "quiet" => 0,
        "info" => 1,
        "debug" => 2,
        other => {
            return Err(CliError::config(format!(
                "unknown log level {other:?} (expected quiet, info, or debug)"
            )))
        }
    };
    LEVEL.store(value, Ordering::Relaxed);
    Ok(())
}

pub fn info(message: impl AsRef<str>) {
    if LEVEL.load(Ordering::Relaxed) >= 1 {
        eprintln!("{}", message.as_ref());
    }
}

pub fn debug(message: impl AsRef<str>) {
    if LEVEL.load(Ordering::Relaxed) >= 2 {
        eprintln!("debug: {}", message.as_ref());
    }
}

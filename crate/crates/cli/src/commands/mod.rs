pub mod analyze;
pub mod compare;
pub mod curate;
pub mod eval;
pub mod gradcheck;
pub mod rank;
pub mod select;
pub mod simulate;
pub mod train;

use std::path::{Path, PathBuf};

use serde::Deserialize;
use social_reward::store::{FeedbackStore, InfluencerRoster};

use crate::errors::{CliError, CliResult};

/// Require that an input path exists before handing it to a loader.
pub fn require_file(path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::data(format!("input file {} not found", path.display())));
    }
    Ok(())
}

/// The three canonical log files, loaded and validated.
pub fn load_store(events: &PathBuf, images: &PathBuf, prompts: &PathBuf) -> CliResult<FeedbackStore> {
    for p in [events, images, prompts] {
        require_file(p)?;
    }
    Ok(FeedbackStore::load_log(events, images, prompts)?)
}

/// `roster.json`: {"user_ids": [...]}. Absent path means an empty roster.
pub fn load_roster(path: Option<&PathBuf>) -> CliResult<InfluencerRoster> {
    match path {
        None => Ok(InfluencerRoster::default()),
        Some(path) => {
            require_file(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            #[derive(Deserialize)]
            struct RosterFile {
                user_ids: Vec<String>,
            }
            let file: RosterFile = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            Ok(InfluencerRoster::from_ids(file.user_ids))
        }
    }
}

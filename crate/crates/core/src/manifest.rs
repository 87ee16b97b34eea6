//! Dataset manifest: which raw files form each leave-one-out fold.
//!
//! Folds may pull several recordings into one split (the Univ fold is the
//! usual case); each file keeps its own timeline, so loading shifts every
//! file onto a disjoint step range (separated by more than a window) and
//! namespaces its agent ids. Windows therefore never straddle recordings.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, DataError, Error};
use crate::trajio::{parse_trajectory_file, records_to_tracks, AgentTrack, Fold, FoldName};

/// Step gap inserted between concatenated recordings; anything at least
/// one window long keeps them independent.
const FILE_GAP_STEPS: i64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub name: FoldName,
    #[serde(default)]
    pub train: Vec<PathBuf>,
    #[serde(default)]
    pub val: Vec<PathBuf>,
    #[serde(default)]
    pub test: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub folds: Vec<FoldSpec>,
    /// Paths are resolved relative to this directory (the manifest's own).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut manifest: Manifest =
            toml::from_str(&text).map_err(|source| ConfigError::Toml {
                path: path.display().to_string(),
                source,
            })?;
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(manifest)
    }

    pub fn fold(&self, name: FoldName) -> Option<&FoldSpec> {
        self.folds.iter().find(|f| f.name == name)
    }

    fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }

    /// Load one split of one fold, concatenating its files onto disjoint
    /// step ranges with namespaced agent ids.
    pub fn load_split(
        &self,
        name: FoldName,
        files: &[PathBuf],
        slerp_window: usize,
    ) -> Result<Fold, Error> {
        let mut tracks: Vec<AgentTrack> = Vec::new();
        let mut step_offset: i64 = 0;
        let mut handle_offset: u32 = 0;
        for (file_idx, file) in files.iter().enumerate() {
            let path = self.resolve(file);
            let reader = File::open(&path).map_err(|source| DataError::File {
                path: path.display().to_string(),
                source,
            })?;
            let records = parse_trajectory_file(BufReader::new(reader))?;
            let file_tracks = records_to_tracks(&records, slerp_window)?;
            let mut max_step = step_offset;
            for mut track in file_tracks {
                track.agent_id += (file_idx as i64) << 32;
                track.track_handle += handle_offset;
                track.start_step += step_offset;
                max_step = max_step.max(track.end_step());
                tracks.push(track);
            }
            handle_offset = tracks.iter().map(|t| t.track_handle + 1).max().unwrap_or(0);
            step_offset = max_step + FILE_GAP_STEPS;
        }
        Ok(Fold::new(name, tracks))
    }

    pub fn load_test_fold(&self, name: FoldName, slerp_window: usize) -> Result<Fold, Error> {
        let spec = self
            .fold(name)
            .ok_or_else(|| ConfigError::Invalid(format!("manifest has no fold {name}")))?;
        self.load_split(name, &spec.test.clone(), slerp_window)
    }

    /// Training data for a fold (its own `train` + `val` lists).
    pub fn load_train_fold(&self, name: FoldName, slerp_window: usize) -> Result<Fold, Error> {
        let spec = self
            .fold(name)
            .ok_or_else(|| ConfigError::Invalid(format!("manifest has no fold {name}")))?;
        let mut files = spec.train.clone();
        files.extend(spec.val.clone());
        self.load_split(name, &files, slerp_window)
    }
}

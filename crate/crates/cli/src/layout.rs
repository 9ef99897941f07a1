//! Dataset directory convention.
//!
//! ```text
//! root/
//!   original/          unenhanced images
//!   <model>/           one directory per enhancer, same file names
//!   ground_truth.json  optional
//!   detections/        optional, <model>.json per detector
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use uwqa_core::qindex::ORIGINAL_MODEL;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const DETECTIONS_DIR: &str = "detections";

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("layout has no `{ORIGINAL_MODEL}/` directory")]
    MissingOriginal,
    #[error("`{0}/` contains no images")]
    Empty(String),
    #[error("`{dir}/` has two images with id `{id}`")]
    DuplicateId { dir: String, id: String },
    #[error("`{model}/` does not mirror `{ORIGINAL_MODEL}/`: missing [{}], unexpected [{}]", missing.join(", "), extra.join(", "))]
    Mismatch {
        model: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A validated dataset layout. Image ids are file stems; file names may
/// differ in extension between models.
#[derive(Clone, Debug)]
pub struct DatasetLayout {
    pub root: PathBuf,
    /// `original` first, then enhancers in lexical order.
    pub models: Vec<String>,
    /// Image ids in lexical order.
    pub image_ids: Vec<String>,
    files: BTreeMap<(String, String), PathBuf>,
}

fn list_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>, LayoutError> {
    let io = |e| LayoutError::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let name = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_image = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image {
            continue;
        }
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if out.insert(id.clone(), path).is_some() {
            return Err(LayoutError::DuplicateId { dir: name, id });
        }
    }
    Ok(out)
}

impl DatasetLayout {
    pub fn open(root: &Path) -> Result<Self, LayoutError> {
        if !root.is_dir() {
            return Err(LayoutError::NotADirectory(root.to_path_buf()));
        }
        let original_dir = root.join(ORIGINAL_MODEL);
        if !original_dir.is_dir() {
            return Err(LayoutError::MissingOriginal);
        }
        let io = |e| LayoutError::Io {
            path: root.to_path_buf(),
            source: e,
        };
        let mut enhancers = Vec::new();
        for entry in std::fs::read_dir(root).map_err(io)? {
            let path = entry.map_err(io)?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if path.is_dir() && !name.starts_with('.') && name != ORIGINAL_MODEL && name != DETECTIONS_DIR {
                enhancers.push(name.to_string());
            }
        }
        enhancers.sort();

        let originals = list_images(&original_dir)?;
        if originals.is_empty() {
            return Err(LayoutError::Empty(ORIGINAL_MODEL.into()));
        }
        let image_ids: Vec<String> = originals.keys().cloned().collect();
        let mut files = BTreeMap::new();
        for (id, path) in originals {
            files.insert((ORIGINAL_MODEL.to_string(), id), path);
        }
        for model in &enhancers {
            let images = list_images(&root.join(model))?;
            let missing: Vec<String> = image_ids.iter().filter(|id| !images.contains_key(*id)).cloned().collect();
            let extra: Vec<String> = images
                .keys()
                .filter(|id| image_ids.binary_search(id).is_err())
                .cloned()
                .collect();
            if !missing.is_empty() || !extra.is_empty() {
                return Err(LayoutError::Mismatch {
                    model: model.clone(),
                    missing,
                    extra,
                });
            }
            for (id, path) in images {
                files.insert((model.clone(), id), path);
            }
        }
        let mut models = vec![ORIGINAL_MODEL.to_string()];
        models.extend(enhancers);
        Ok(Self {
            root: root.to_path_buf(),
            models,
            image_ids,
            files,
        })
    }

    pub fn image_path(&self, model: &str, image_id: &str) -> Option<&Path> {
        self.files
            .get(&(model.to_string(), image_id.to_string()))
            .map(PathBuf::as_path)
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.root.join(GROUND_TRUTH_FILE)
    }

    /// `(model, path)` for every `detections/<model>.json`, sorted by model.
    pub fn detection_files(&self) -> Vec<(String, PathBuf)> {
        let mut out = Vec::new();
        if let Ok(entries) = std::fs::read_dir(self.root.join(DETECTIONS_DIR)) {
            for entry in entries.flatten() {
                let path = entry.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let model = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    out.push((model, path));
                }
            }
        }
        out.sort();
        out
    }
}

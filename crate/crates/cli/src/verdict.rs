//! Human review decisions on audit candidates and their append-only log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uwqa_core::deteval::{Annotation, AuditCandidate, BoundingBox, CandidateFile, CandidateStatus, GroundTruth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accepted,
    Rejected,
}

impl Decision {
    pub fn status(self) -> CandidateStatus {
        match self {
            Decision::Accepted => CandidateStatus::Accepted,
            Decision::Rejected => CandidateStatus::Rejected,
        }
    }
}

/// Class and box the annotator settled on for an accepted candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictAnnotation {
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// One recorded decision; a line of the verdict log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub candidate_id: String,
    pub decision: Decision,
    pub annotator: String,
    /// UTC seconds.
    pub timestamp: u64,
    /// Present exactly when the decision is `accepted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<VerdictAnnotation>,
}

/// Body of `POST /api/verdicts`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRequest {
    pub candidate_id: String,
    pub decision: Decision,
    pub annotator: String,
    #[serde(default)]
    pub annotation: Option<VerdictAnnotation>,
    #[serde(default)]
    pub supersede: bool,
    #[serde(default)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum VerdictError {
    #[error("malformed verdict: {0}")]
    Malformed(String),
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("annotator `{annotator}` already {previous:?} `{candidate_id}`; resend with \"supersede\": true to change it")]
    Conflict {
        candidate_id: String,
        annotator: String,
        previous: Decision,
    },
}

/// What applying a request did.
#[derive(Clone, Debug, PartialEq)]
pub enum Applied {
    /// Same decision already recorded; nothing was appended.
    Unchanged(Verdict),
    /// New verdict to append.
    Recorded(Verdict),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl StatusCounts {
    fn add(&mut self, s: CandidateStatus) {
        match s {
            CandidateStatus::Pending => self.pending += 1,
            CandidateStatus::Accepted => self.accepted += 1,
            CandidateStatus::Rejected => self.rejected += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    #[serde(flatten)]
    pub counts: StatusCounts,
    /// Keyed by the model of each candidate's representative detection.
    pub by_model: BTreeMap<String, StatusCounts>,
    pub verdicts: usize,
}

/// Review state rebuilt from the candidate file and the verdict log.
///
/// A candidate's status is that of its most recent verdict from any
/// annotator; per annotator only the latest verdict counts.
#[derive(Clone, Debug)]
pub struct ReviewState {
    candidates: std::sync::Arc<CandidateFile>,
    index: HashMap<String, usize>,
    latest_by_annotator: HashMap<(String, String), Verdict>,
    latest: HashMap<String, Verdict>,
    verdicts: usize,
}

impl ReviewState {
    pub fn new(candidates: std::sync::Arc<CandidateFile>) -> Self {
        let index = candidates
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        Self {
            candidates,
            index,
            latest_by_annotator: HashMap::new(),
            latest: HashMap::new(),
            verdicts: 0,
        }
    }

    pub fn candidate(&self, id: &str) -> Option<&AuditCandidate> {
        self.index.get(id).map(|&i| &self.candidates.candidates[i])
    }

    pub fn candidates(&self) -> &[AuditCandidate] {
        &self.candidates.candidates
    }

    pub fn status(&self, id: &str) -> CandidateStatus {
        self.latest
            .get(id)
            .map(|v| v.decision.status())
            .unwrap_or(CandidateStatus::Pending)
    }

    pub fn verdict_count(&self) -> usize {
        self.verdicts
    }

    /// Validates a request against the current state. Nothing is changed;
    /// call [`ReviewState::record`] once the verdict is persisted.
    pub fn check(&self, req: VerdictRequest, now: u64) -> Result<Applied, VerdictError> {
        if req.annotator.trim().is_empty() {
            return Err(VerdictError::Malformed("annotator must not be empty".into()));
        }
        let candidate = self
            .candidate(&req.candidate_id)
            .ok_or_else(|| VerdictError::UnknownCandidate(req.candidate_id.clone()))?;
        let annotation = match req.decision {
            Decision::Accepted => Some(req.annotation.unwrap_or(VerdictAnnotation {
                class_id: candidate.detection.class_id,
                bbox: candidate.detection.bbox,
            })),
            Decision::Rejected if req.annotation.is_some() => {
                return Err(VerdictError::Malformed("a rejected verdict carries no annotation".into()));
            }
            Decision::Rejected => None,
        };
        let key = (req.candidate_id.clone(), req.annotator.clone());
        if let Some(prev) = self.latest_by_annotator.get(&key) {
            if prev.decision == req.decision && prev.annotation == annotation {
                return Ok(Applied::Unchanged(prev.clone()));
            }
            if !req.supersede {
                return Err(VerdictError::Conflict {
                    candidate_id: req.candidate_id,
                    annotator: req.annotator,
                    previous: prev.decision,
                });
            }
        }
        Ok(Applied::Recorded(Verdict {
            candidate_id: req.candidate_id,
            decision: req.decision,
            annotator: req.annotator,
            timestamp: req.timestamp.unwrap_or(now),
            annotation,
        }))
    }

    /// Applies a verdict taken from the log or returned by `check`.
    pub fn record(&mut self, v: Verdict) -> Result<(), VerdictError> {
        if !self.index.contains_key(&v.candidate_id) {
            return Err(VerdictError::UnknownCandidate(v.candidate_id));
        }
        if (v.decision == Decision::Accepted) != v.annotation.is_some() {
            return Err(VerdictError::Malformed(format!(
                "verdict on `{}` has an annotation mismatch",
                v.candidate_id
            )));
        }
        self.latest_by_annotator
            .insert((v.candidate_id.clone(), v.annotator.clone()), v.clone());
        self.latest.insert(v.candidate_id.clone(), v);
        self.verdicts += 1;
        Ok(())
    }

    pub fn progress(&self) -> Progress {
        let mut counts = StatusCounts::default();
        let mut by_model: BTreeMap<String, StatusCounts> = BTreeMap::new();
        for c in self.candidates() {
            let s = self.status(&c.id);
            counts.add(s);
            by_model.entry(c.model.clone()).or_default().add(s);
        }
        Progress {
            total: self.candidates().len(),
            counts,
            by_model,
            verdicts: self.verdicts,
        }
    }

    /// Ground truth plus one annotation per accepted candidate, in candidate
    /// order. Annotations already present are not added twice.
    pub fn corrected_ground_truth(&self, gt: &GroundTruth) -> GroundTruth {
        let mut out = gt.clone();
        let key = |a: &Annotation| (a.image_id, a.class_id, <[f64; 4]>::from(a.bbox).map(f64::to_bits));
        let mut seen: HashSet<_> = out.annotations.iter().map(key).collect();
        for c in self.candidates() {
            let Some(v) = self.latest.get(&c.id) else { continue };
            let Some(ann) = v.annotation.filter(|_| v.decision == Decision::Accepted) else {
                continue;
            };
            let added = Annotation {
                image_id: c.image_id,
                class_id: ann.class_id,
                bbox: ann.bbox,
            };
            if seen.insert(key(&added)) {
                out.annotations.push(added);
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("verdict log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verdict log {path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

/// Append-only JSONL file of [`Verdict`]s.
pub struct VerdictLog {
    path: PathBuf,
    file: File,
}

impl VerdictLog {
    /// Opens (creating if needed) the log and replays it into `state`.
    ///
    /// An unterminated last line is what a crash mid-append leaves behind;
    /// it is cut off with a warning. Any other unreadable line is an error.
    pub fn open(path: &Path, state: &mut ReviewState) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;

        let mut offset = 0usize;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let terminated = line.ends_with('\n');
            let body = line.trim_end();
            if body.is_empty() {
                offset += line.len();
                continue;
            }
            let parsed = serde_json::from_str::<Verdict>(body)
                .map_err(|e| e.to_string())
                .and_then(|v| state.record(v).map_err(|e| e.to_string()));
            match parsed {
                Ok(()) if terminated => offset += line.len(),
                Ok(()) => {
                    // Complete record without its newline: keep it.
                    file.write_all(b"\n").map_err(io)?;
                    offset += line.len() + 1;
                }
                Err(reason) if !terminated => {
                    log::warn!(
                        "{}: dropping incomplete last line {} ({reason})",
                        path.display(),
                        i + 1
                    );
                    file.set_len(offset as u64).map_err(io)?;
                    file.seek(SeekFrom::End(0)).map_err(io)?;
                }
                Err(reason) => {
                    return Err(LogError::Corrupt {
                        path: path.to_path_buf(),
                        line: i + 1,
                        reason,
                    })
                }
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Appends one verdict and syncs it to disk before returning.
    pub fn append(&mut self, v: &Verdict) -> Result<(), LogError> {
        let line = serde_json::to_string(v).expect("verdict serializes") + "\n";
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

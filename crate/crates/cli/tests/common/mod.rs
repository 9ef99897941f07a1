#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn layout() -> PathBuf {
    fixtures().join("layout")
}

pub fn golden(rel: &str) -> PathBuf {
    fixtures().join("golden").join(rel)
}

/// Runs the `uwqa` binary with logging silenced.
pub fn uwqa<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_uwqa"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("UWQA_CONFIG")
        .output()
        .expect("uwqa runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Copies the fixture layout, keeping only `models` and the first `images`
/// scenes of each.
pub fn copy_layout(dest: &Path, models: &[&str], images: usize) {
    for m in models {
        std::fs::create_dir_all(dest.join(m)).unwrap();
        for i in 1..=images {
            let name = format!("scene{i:02}.png");
            std::fs::copy(layout().join(m).join(&name), dest.join(m).join(&name)).unwrap();
        }
    }
}

/// The five batch stages over the fixture layout, writing under `out`.
pub fn run_pipeline(out: &Path) -> Vec<(&'static str, Output)> {
    let layout = layout();
    let o = out.to_str().unwrap();
    let l = layout.to_str().unwrap();
    vec![
        ("metrics", uwqa(["--out", o, "metrics", l])),
        ("qindex", uwqa(["--out", o, "qindex"])),
        ("map", uwqa(["--out", o, "map", "--layout", l])),
        ("correlate", uwqa(["--out", o, "correlate"])),
        ("audit", uwqa(["--out", o, "audit", "--layout", l])),
    ]
}

/// Files compared byte-for-byte against the committed goldens.
pub const GOLDEN_FILES: [&str; 10] = [
    "metrics/metrics.csv",
    "qindex/qindex.csv",
    "qindex/summary.csv",
    "qindex/delta_qindex.csv",
    "qindex/qindex_extrema.csv",
    "qindex/bins.csv",
    "map/map.csv",
    "correlate/correlation.csv",
    "correlate/scatter.csv",
    "audit/candidates.json",
];

/// Names of golden files whose freshly produced copy under `out` differs.
pub fn golden_mismatches(out: &Path) -> Vec<String> {
    GOLDEN_FILES
        .iter()
        .filter(|f| {
            let want = std::fs::read(golden(f)).unwrap();
            std::fs::read(out.join(f)).ok().as_deref() != Some(want.as_slice())
        })
        .map(|f| f.to_string())
        .collect()
}

//! Fixture loading shared by integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use graphaudit::audit::{ingest, AuditInputs, Ingested, InputFile};
use graphaudit::frontend::{parse_profile, SourceUnit};
use graphaudit::index::Schedule;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn files_in(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == ext))
            .collect(),
        Err(_) => Vec::new(),
    };
    out.sort();
    out
}

pub fn app_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures().join("apps"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Inputs for `fixtures/apps/<name>` by directory convention.
pub fn app_inputs(name: &str) -> AuditInputs {
    let root = fixtures();
    let dir = root.join("apps").join(name);
    let profile = parse_profile(&read(&root.join("profile.json"))).unwrap();
    let sources = files_in(&dir.join("src"), "mapp")
        .iter()
        .map(|p| SourceUnit::new(format!("src/{}", p.file_name().unwrap().to_string_lossy()), read(p)))
        .collect();
    let mut inputs = AuditInputs::new(name, profile, sources);
    let manifest = dir.join("AndroidManifest.xml");
    if manifest.exists() {
        inputs.manifest = Some(InputFile::new("AndroidManifest.xml", read(&manifest)));
    }
    inputs.layouts = files_in(&dir.join("layout"), "xml")
        .iter()
        .map(|p| InputFile::new(format!("layout/{}", p.file_name().unwrap().to_string_lossy()), read(p)))
        .collect();
    inputs.permission_map = Some(InputFile::new("permissions.xml", read(&root.join("permissions.xml"))));
    inputs
}

pub fn app(name: &str) -> Ingested {
    ingest(&app_inputs(name), Schedule::Canonical).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Violating analyzers per app from `labels.json`.
pub fn labels() -> serde_json::Value {
    serde_json::from_str(&read(&fixtures().join("labels.json"))).unwrap()
}

pub fn violating(name: &str) -> Vec<String> {
    labels()[name]["violating"]
        .as_array()
        .unwrap_or_else(|| panic!("no labels for {name}"))
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect()
}

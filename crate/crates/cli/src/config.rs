//! `audit.toml`: which files make up an app and how to audit it.
//!
//! Relative paths resolve against the directory holding the config file.
//! `sources` and `layouts` entries may name directories, which are searched
//! recursively for `.mapp` and `.xml` files respectively.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use graphaudit::analyze::Registry;
use graphaudit::audit::{AuditInputs, InputFile};
use graphaudit::frontend::{parse_profile, SourceUnit};
use graphaudit::index::{BUILTIN_INDEXERS, DEFAULT_PRIORITY_THRESHOLD};
use serde::Deserialize;
use walkdir::WalkDir;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    app: Option<String>,
    sources: Vec<String>,
    manifest: Option<String>,
    #[serde(default)]
    layouts: Vec<String>,
    permission_map: Option<String>,
    profile: String,
    indexers: Option<Vec<String>>,
    priority_threshold: Option<i64>,
    analyzers: Option<Vec<String>>,
    out: Option<String>,
    assets: Option<String>,
}

/// A validated config with absolute paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditConfig {
    pub path: PathBuf,
    pub base: PathBuf,
    pub app: String,
    pub sources: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub layouts: Vec<PathBuf>,
    pub permission_map: Option<PathBuf>,
    pub profile: PathBuf,
    pub indexers: Vec<String>,
    pub priority_threshold: i64,
    /// Empty means every registered analyzer.
    pub analyzers: Vec<String>,
    pub out: PathBuf,
    pub assets: Option<PathBuf>,
}

fn config_error(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn expand(base: &Path, entries: &[String], ext: &str, key: &str, config: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in entries {
        let p = base.join(entry);
        if p.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(&p)
                .into_iter()
                .filter_map(Result::ok)
                .map(|e| e.into_path())
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == ext))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(config_error(config, format!("{key}: directory `{entry}` holds no .{ext} files")));
            }
            out.extend(found);
        } else if p.is_file() {
            out.push(p);
        } else {
            return Err(config_error(config, format!("{key}: `{entry}` does not exist")));
        }
    }
    Ok(out)
}

fn existing(base: &Path, entry: &str, key: &str, config: &Path) -> Result<PathBuf, CliError> {
    let p = base.join(entry);
    if p.is_file() {
        Ok(p)
    } else {
        Err(config_error(config, format!("{key}: `{entry}` does not exist")))
    }
}

fn check_names(names: &[String], known: &BTreeSet<String>, key: &str, config: &Path) -> Result<(), CliError> {
    match names.iter().find(|n| !known.contains(*n)) {
        Some(bad) => Err(config_error(
            config,
            format!(
                "{key}: unknown name `{bad}` (known: {})",
                known.iter().cloned().collect::<Vec<_>>().join(", ")
            ),
        )),
        None => Ok(()),
    }
}

impl AuditConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_error(path, e.to_string()))?;
        Self::parse(path, &text)
    }

    /// Parses `text` as if it were read from `path`.
    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_error(path, e.message().to_owned()))?;
        let path = std::path::absolute(path).map_err(|e| config_error(path, e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if raw.sources.is_empty() {
            return Err(config_error(&path, "sources: at least one source is required"));
        }
        let indexers = raw
            .indexers
            .unwrap_or_else(|| BUILTIN_INDEXERS.iter().map(|s| (*s).to_owned()).collect());
        let known_ix: BTreeSet<String> = BUILTIN_INDEXERS.iter().map(|s| (*s).to_owned()).collect();
        check_names(&indexers, &known_ix, "indexers", &path)?;
        let analyzers = raw.analyzers.unwrap_or_default();
        let known_an: BTreeSet<String> = Registry::builtin().names().map(str::to_owned).collect();
        check_names(&analyzers, &known_an, "analyzers", &path)?;
        let app = match raw.app {
            Some(a) => a,
            None => base
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "app".to_owned()),
        };
        Ok(AuditConfig {
            sources: expand(&base, &raw.sources, "mapp", "sources", &path)?,
            manifest: raw.manifest.map(|m| existing(&base, &m, "manifest", &path)).transpose()?,
            layouts: expand(&base, &raw.layouts, "xml", "layouts", &path)?,
            permission_map: raw
                .permission_map
                .map(|m| existing(&base, &m, "permission_map", &path))
                .transpose()?,
            profile: existing(&base, &raw.profile, "profile", &path)?,
            indexers,
            priority_threshold: raw.priority_threshold.unwrap_or(DEFAULT_PRIORITY_THRESHOLD),
            analyzers,
            out: base.join(raw.out.as_deref().unwrap_or("out")),
            assets: raw.assets.map(|a| base.join(a)),
            app,
            base,
            path,
        })
    }

    /// Path as shown in graphs and reports: relative to the config
    /// directory when possible, always with `/` separators.
    pub fn display_path(&self, p: &Path) -> String {
        let rel = p.strip_prefix(&self.base).unwrap_or(p);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn read(&self, p: &Path) -> Result<String, CliError> {
        fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            reason: e.to_string(),
        })
    }

    fn input(&self, p: &Path) -> Result<InputFile, CliError> {
        Ok(InputFile::new(self.display_path(p), self.read(p)?))
    }

    /// Reads every referenced file.
    pub fn inputs(&self) -> Result<AuditInputs, CliError> {
        let profile = parse_profile(&self.read(&self.profile)?).map_err(|e| config_error(&self.profile, e.to_string()))?;
        let sources = self
            .sources
            .iter()
            .map(|p| Ok(SourceUnit::new(self.display_path(p), self.read(p)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut inputs = AuditInputs::new(&self.app, profile, sources);
        inputs.manifest = self.manifest.as_deref().map(|p| self.input(p)).transpose()?;
        inputs.layouts = self.layouts.iter().map(|p| self.input(p)).collect::<Result<_, _>>()?;
        inputs.permission_map = self.permission_map.as_deref().map(|p| self.input(p)).transpose()?;
        inputs.indexers = self.indexers.clone();
        inputs.priority_threshold = self.priority_threshold;
        Ok(inputs)
    }
}

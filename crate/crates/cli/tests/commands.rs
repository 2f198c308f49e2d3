use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use graphaudit::analyze::{Registry, BROADCAST_BLOCKERS_SCRIPT};
use graphaudit::frontend::export_subgraph_json;
use graphaudit::index::Schedule;
use graphaudit_cli::commands::{EXIT_CLEAN, EXIT_ERROR, EXIT_FINDINGS};
use graphaudit_cli::{cmd_audit, cmd_ingest, cmd_query, run_audit, AuditConfig, CliError, OutputFormat};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config_path(app: &str) -> PathBuf {
    fixtures().join("apps").join(app).join("audit.toml")
}

fn config(app: &str) -> AuditConfig {
    AuditConfig::load(&config_path(app)).unwrap()
}

fn apps() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(fixtures().join("apps"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn violating(app: &str) -> usize {
    let labels: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixtures().join("labels.json")).unwrap()).unwrap();
    labels[app]["violating"].as_array().unwrap().len()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphaudit"))
}

#[test]
fn exit_code_contract_holds_on_every_fixture() {
    for app in apps() {
        let audit = run_audit(&config(&app), Schedule::Canonical).unwrap();
        let expected = if violating(&app) > 0 { EXIT_FINDINGS } else { EXIT_CLEAN };
        assert_eq!(audit.exit_code(), expected, "{app}");
        assert_eq!(audit.report.work_items.len(), violating(&app), "{app}");
    }
}

#[test]
fn binary_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let status = |app: &str| {
        bin()
            .args(["audit", "--config"])
            .arg(config_path(app))
            .arg("--out")
            .arg(out.path().join(app))
            .output()
            .unwrap()
    };
    let benign = status("benign-notes");
    assert_eq!(benign.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&benign.stdout).contains("no findings"));
    let bad = status("smsblocker");
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("broadcast-blockers"));
    for f in ["graph.json", "report.json", "report.txt", "state.json"] {
        assert!(out.path().join("smsblocker").join(f).exists(), "{f}");
    }

    let broken = bin().args(["audit", "--config", "/nonexistent/audit.toml"]).output().unwrap();
    assert_eq!(broken.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("/nonexistent/audit.toml"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for app in ["smsblocker", "toolbox", "conf-field-relay", "benign-notes"] {
        let cfg = config(app);
        let (a, b) = (dir.path().join(format!("{app}-a")), dir.path().join(format!("{app}-b")));
        cmd_audit(&cfg, &a, Schedule::Canonical).unwrap();
        cmd_audit(&cfg, &b, Schedule::Randomized(7)).unwrap();
        for f in ["report.json", "report.txt", "graph.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{app}/{f}");
        }
    }
}

#[test]
fn broadcast_script_matches_the_analyzer() {
    let dir = tempfile::tempdir().unwrap();
    for app in ["smsblocker", "smsblocker-nopriority", "smsblocker-noabort", "smsblocker-lowpriority"] {
        let cfg = config(app);
        let graph = cmd_ingest(&cfg, &dir.path().join(app)).unwrap();
        let by_query = cmd_query(&graph, BROADCAST_BLOCKERS_SCRIPT, OutputFormat::Json).unwrap();
        let audit = run_audit(&cfg, Schedule::Canonical).unwrap();
        let env = &audit.run.envelopes["broadcast-blockers"];
        assert_eq!(by_query, export_subgraph_json(&env.subgraph), "{app}");
        assert_eq!(env.is_empty(), app != "smsblocker", "{app}");
    }
}

#[test]
fn query_script_from_file_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let graph = cmd_ingest(&config("smsblocker"), dir.path()).unwrap();
    let script = fixtures().join("queries/broadcast-blockers.q");
    let out = bin()
        .args(["query", "--graph"])
        .arg(&graph)
        .arg("--script")
        .arg(format!("@{}", script.display()))
        .args(["--format", "dot"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("onReceive"));
    let text = cmd_query(&graph, "nodes(ENTRY_POINT)", OutputFormat::Text).unwrap();
    assert!(text.contains("onReceive"));
    assert!(matches!(cmd_query(&graph, "nodes(", OutputFormat::Json), Err(CliError::Syntax(_))));
}

#[test]
fn config_errors_name_the_path_and_reason() {
    let dir = tempfile::tempdir().unwrap();
    let write = |body: &str| {
        let p = dir.path().join("audit.toml");
        fs::write(&p, body).unwrap();
        p
    };
    let profile = fixtures().join("profile.json");
    let profile = profile.to_string_lossy().replace('\\', "/");
    fs::write(dir.path().join("Main.mapp"), "class Main { void main() { } }").unwrap();

    let p = write(&format!("sources = [\"Main.mapp\"]\nprofile = \"{profile}\"\ncolour = 1\n"));
    let err = AuditConfig::load(&p).unwrap_err().to_string();
    assert!(err.contains("audit.toml") && err.contains("colour"), "{err}");

    let p = write(&format!("sources = [\"Missing.mapp\"]\nprofile = \"{profile}\"\n"));
    let err = AuditConfig::load(&p).unwrap_err().to_string();
    assert!(err.contains("Missing.mapp") && err.contains("does not exist"), "{err}");

    let p = write(&format!("sources = [\"Main.mapp\"]\nprofile = \"{profile}\"\nanalyzers = [\"psychic\"]\n"));
    let err = AuditConfig::load(&p).unwrap_err().to_string();
    assert!(err.contains("psychic"), "{err}");

    let p = write(&format!("sources = [\"Main.mapp\"]\nprofile = \"{profile}\"\nindexers = [\"rta\", \"telepathy\"]\n"));
    assert!(AuditConfig::load(&p).unwrap_err().to_string().contains("telepathy"));

    let p = write(&format!("sources = [\".\"]\nprofile = \"{profile}\"\npriority_threshold = 5\n"));
    let cfg = AuditConfig::load(&p).unwrap();
    assert_eq!(cfg.sources.len(), 1);
    assert_eq!(cfg.priority_threshold, 5);
    assert_eq!(cfg.analyzers, Vec::<String>::new());
    assert_eq!(cfg.indexers.len(), 4);
    assert!(cfg.out.is_absolute() && cfg.out.ends_with("out"));
}

#[test]
fn priority_threshold_flag_changes_the_verdict() {
    // smsblocker declares priority 999; raising the bar clears it.
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["audit", "--config"])
        .arg(config_path("smsblocker"))
        .arg("--out")
        .arg(dir.path())
        .args(["--priority-threshold", "1000", "--format", "json"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let analyzers: Vec<&str> = report["workItems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["analyzer"].as_str().unwrap())
        .collect();
    assert!(!analyzers.contains(&"broadcast-blockers"));
}

#[test]
fn analyzer_subset_pulls_in_nothing_extra() {
    let mut cfg = config("toolbox");
    cfg.analyzers = vec!["reflection".into()];
    let audit = run_audit(&cfg, Schedule::Canonical).unwrap();
    let ran: Vec<&str> = audit.run.log.iter().map(|r| r.analyzer.as_str()).collect();
    assert_eq!(ran, ["reflection"]);
    assert_eq!(Registry::builtin().names().count(), 7);
}

//! Runs analyzers concurrently over their dependency DAG.
//!
//! Every analyzer gets its own thread, which blocks until the analyzers it
//! depends on have finished. Results are collected by name, so nothing
//! downstream observes completion order.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::analyze::{AnalysisContext, Envelope, Registry};
use crate::index::{find_cycle, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// Empty envelope: the property holds.
    Satisfied,
    Findings,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunRecord {
    pub analyzer: String,
    /// Microseconds since the run started.
    pub start_us: u64,
    pub end_us: u64,
    pub status: RunStatus,
    pub findings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub envelopes: BTreeMap<String, Envelope>,
    /// One record per analyzer, in name order.
    pub log: Vec<RunRecord>,
}

impl RunOutcome {
    /// Envelopes with findings, in name order.
    pub fn non_empty(&self) -> impl Iterator<Item = &Envelope> + '_ {
        self.envelopes.values().filter(|e| !e.is_empty())
    }
}

/// The requested analyzers plus every analyzer they depend on,
/// transitively. An empty request selects every registered analyzer.
fn closure(registry: &Registry, names: &[String]) -> Result<BTreeMap<String, BTreeSet<String>>, AuditError> {
    let mut todo: Vec<String> = if names.is_empty() {
        registry.names().map(str::to_owned).collect()
    } else {
        names.to_vec()
    };
    let mut out = BTreeMap::new();
    while let Some(name) = todo.pop() {
        if out.contains_key(&name) {
            continue;
        }
        let d = registry.descriptor(&name)?;
        let deps: BTreeSet<String> = d
            .dependencies
            .into_iter()
            .filter(|dep| registry.get(dep).is_ok())
            .collect();
        todo.extend(deps.iter().cloned());
        out.insert(name, deps);
    }
    Ok(out)
}

fn check_acyclic(deps: &BTreeMap<String, BTreeSet<String>>) -> Result<(), AuditError> {
    let mut remaining: BTreeMap<&str, BTreeSet<&str>> = deps
        .iter()
        .map(|(n, d)| (n.as_str(), d.iter().map(String::as_str).collect()))
        .collect();
    loop {
        let ready: Vec<&str> = remaining
            .iter()
            .filter(|(_, d)| d.is_empty())
            .map(|(n, _)| *n)
            .collect();
        if ready.is_empty() {
            break;
        }
        for r in &ready {
            remaining.remove(r);
        }
        for d in remaining.values_mut() {
            for r in &ready {
                d.remove(r);
            }
        }
    }
    if remaining.is_empty() {
        Ok(())
    } else {
        Err(AuditError::DependencyCycle(find_cycle(&remaining)))
    }
}

#[derive(Default)]
struct Board {
    done: BTreeMap<String, Result<Envelope, String>>,
    log: Vec<RunRecord>,
}

/// Runs `names` (and their analyzer dependencies) over `ctx`.
///
/// An analyzer failure, including a panic, is recorded in the log and
/// fails its dependents; siblings still run.
pub fn schedule_and_run(
    registry: &Registry,
    names: &[String],
    ctx: &AnalysisContext,
    schedule: Schedule,
) -> Result<RunOutcome, AuditError> {
    let deps = closure(registry, names)?;
    check_acyclic(&deps)?;

    let mut launch: Vec<(&String, u64)> = deps.keys().map(|n| (n, 0)).collect();
    if let Schedule::Randomized(seed) = schedule {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        launch.shuffle(&mut rng);
        for slot in &mut launch {
            slot.1 = rand::Rng::random_range(&mut rng, 0..500);
        }
    }

    let board = Mutex::new(Board::default());
    let signal = Condvar::new();
    let origin = Instant::now();
    let micros = || origin.elapsed().as_micros() as u64;

    std::thread::scope(|scope| {
        for (name, delay) in &launch {
            let (board, signal, deps) = (&board, &signal, &deps[*name]);
            let name: &String = name;
            let delay = Duration::from_micros(*delay);
            scope.spawn(move || {
                std::thread::sleep(delay);
                let mut guard = board.lock().expect("board lock");
                while !deps.iter().all(|d| guard.done.contains_key(d)) {
                    guard = signal.wait(guard).expect("board lock");
                }
                let failed_dep = deps.iter().find(|d| guard.done[*d].is_err()).cloned();
                let mut local = ctx.clone();
                local
                    .completed
                    .extend(guard.done.iter().filter(|(_, r)| r.is_ok()).map(|(n, _)| n.clone()));
                drop(guard);

                let start = micros();
                let result = match failed_dep {
                    Some(dep) => Err(format!("dependency `{dep}` failed")),
                    None => match catch_unwind(AssertUnwindSafe(|| registry.run(name, &local))) {
                        Ok(Ok(envelope)) => Ok(envelope),
                        Ok(Err(e)) => Err(e.to_string()),
                        Err(_) => Err(format!("analyzer `{name}` panicked")),
                    },
                };
                let end = micros();
                let record = RunRecord {
                    analyzer: name.clone(),
                    start_us: start,
                    end_us: end,
                    status: match &result {
                        Ok(e) if e.is_empty() => RunStatus::Satisfied,
                        Ok(_) => RunStatus::Findings,
                        Err(_) => RunStatus::Failed,
                    },
                    findings: result.as_ref().map(|e| e.findings.len()).unwrap_or(0),
                    error: result.as_ref().err().cloned(),
                };
                if let Some(err) = &record.error {
                    log::warn!("analyzer {name} failed: {err}");
                }
                let mut guard = board.lock().expect("board lock");
                guard.log.push(record);
                guard.done.insert(name.clone(), result);
                signal.notify_all();
            });
        }
    });

    let board = board.into_inner().expect("board lock");
    let mut log = board.log;
    log.sort_by(|a, b| a.analyzer.cmp(&b.analyzer));
    let envelopes = board
        .done
        .into_iter()
        .filter_map(|(n, r)| r.ok().map(|e| (n, e)))
        .collect();
    Ok(RunOutcome { envelopes, log })
}

//! Scenario runner behind the `liact` command.
//!
//! A scenario names an algebra, a group model, a chart and the vector
//! fields `rho`, then lists tasks. Running it writes
//! `<out>/<name>.report.json` and any leaf polylines next to it.

pub mod polyline;
pub mod scenario;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use scenario::{Built, LoadError, Scenario, Tolerances};
pub use tasks::{Status, Task, TaskOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_OBSTRUCTION: i32 = 3;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Worker threads for independent tasks; 1 runs them in order.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: PathBuf::from("."),
            seed: None,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub exit_code: i32,
    pub results: Vec<TaskOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<LoadError>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Report,
    pub report_path: Option<PathBuf>,
}

/// Exit status for a set of task outcomes.
pub fn exit_code(results: &[TaskOutcome]) -> i32 {
    let any = |f: &dyn Fn(&TaskOutcome) -> bool| results.iter().any(f);
    if any(&|r| r.status == Status::Error) {
        EXIT_INPUT
    } else if any(&|r| r.status == Status::Fail && r.kind == "validate") {
        EXIT_CHECK_FAILED
    } else if any(&|r| r.status == Status::Obstruction) {
        EXIT_OBSTRUCTION
    } else if any(&|r| r.status == Status::Fail) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

/// Loads and runs a scenario file.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> RunOutcome {
    match fs::read_to_string(path) {
        Ok(src) => run_document(&src, &stem(path), opts),
        Err(e) => failed(
            stem(path),
            opts,
            LoadError {
                pointer: None,
                offset: None,
                message: format!("{}: {e}", path.display()),
            },
        ),
    }
}

fn failed(name: String, opts: &RunOptions, error: LoadError) -> RunOutcome {
    log::error!("{error}");
    let report = Report {
        scenario: name,
        seed: opts.seed.unwrap_or(0),
        exit_code: EXIT_INPUT,
        results: Vec::new(),
        error: Some(error),
    };
    let report_path = write_report(&report, opts).ok();
    RunOutcome {
        exit_code: EXIT_INPUT,
        report,
        report_path,
    }
}

fn write_report(report: &Report, opts: &RunOptions) -> std::io::Result<PathBuf> {
    fs::create_dir_all(&opts.out)?;
    let p = opts.out.join(format!("{}.report.json", report.scenario));
    fs::write(&p, report.to_json())?;
    Ok(p)
}

/// Runs a scenario given as JSON text; `fallback` names the report when the
/// document cannot be parsed.
pub fn run_document(src: &str, fallback: &str, opts: &RunOptions) -> RunOutcome {
    let scenario = match Scenario::from_json(src) {
        Ok(s) => s,
        Err(e) => return failed(fallback.to_string(), opts, e),
    };
    let built = match scenario.build() {
        Ok(b) => b,
        Err(e) => return failed(scenario.name.clone(), opts, e),
    };
    let seed = opts.seed.unwrap_or(scenario.seed);
    log::info!("scenario {} ({} tasks, seed {seed})", scenario.name, scenario.tasks.len());

    let run_one = |(i, task): (usize, &Task)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut artifacts = Vec::new();
        let out = task.run(i, &built, &mut rng, &scenario.name, &mut artifacts);
        log::debug!("task {i} ({}): {:?}", out.kind, out.status);
        (out, artifacts)
    };
    let done: Vec<_> = if opts.jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
            Ok(pool) => pool.install(|| scenario.tasks.par_iter().enumerate().map(run_one).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running tasks in order");
                scenario.tasks.iter().enumerate().map(run_one).collect()
            }
        }
    } else {
        scenario.tasks.iter().enumerate().map(run_one).collect()
    };

    let mut results = Vec::with_capacity(done.len());
    let mut io_error = None;
    for (outcome, artifacts) in done {
        for a in artifacts {
            let p = opts.out.join(&a.name);
            if let Err(e) = fs::create_dir_all(&opts.out).and_then(|_| fs::write(&p, a.contents)) {
                io_error.get_or_insert_with(|| format!("{}: {e}", p.display()));
            }
        }
        results.push(outcome);
    }
    let mut code = exit_code(&results);
    let error = io_error.map(|message| {
        code = EXIT_INPUT;
        LoadError {
            pointer: None,
            offset: None,
            message,
        }
    });
    let report = Report {
        scenario: scenario.name.clone(),
        seed,
        exit_code: code,
        results,
        error,
    };
    let report_path = match write_report(&report, opts) {
        Ok(p) => Some(p),
        Err(e) => {
            log::error!("cannot write report: {e}");
            code = EXIT_INPUT;
            None
        }
    };
    RunOutcome {
        exit_code: code,
        report: Report { exit_code: code, ..report },
        report_path,
    }
}

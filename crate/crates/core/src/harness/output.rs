use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::RunResult;
use crate::error::{Error, Result};
use crate::metrics::overall_reward;

pub const STEPS_FILE: &str = "steps.csv";
pub const PROBE_FILE: &str = "probe.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

const AGGREGATE_HEADER: [&str; 14] = [
    "label",
    "sweep_param",
    "sweep_value",
    "policy",
    "seed",
    "num_sources",
    "config_digest",
    "best_arm",
    "best_arm_skill",
    "overall_reward",
    "static_regret",
    "dynamic_regret",
    "teacher_instances",
    "wall_clock_secs",
];

#[derive(Serialize)]
struct Summary<'a> {
    label: &'a str,
    policy: &'a str,
    config_digest: &'a str,
    seed: u64,
    num_sources: usize,
    instances: usize,
    best_arm: usize,
    best_arm_skill: f64,
    overall_reward: u64,
    static_regret: f64,
    dynamic_regret: Option<f64>,
    teacher_instances: u64,
    final_skills: &'a [f64],
    final_means: &'a [f64],
    wall_clock_secs: f64,
}

/// Writes per-run step/probe CSVs, summaries and configs under
/// `dir/<label>/`, plus `dir/aggregate.csv` with one row per run.
///
/// Everything except the timing fields is a pure function of the records.
pub fn write_outputs(results: &[RunResult], dir: &Path) -> Result<()> {
    let mut seen = HashSet::new();
    for r in results {
        if r.label.is_empty() || r.label.contains(['/', '\\']) || r.label == "." || r.label == ".." {
            return Err(Error::contract(format!("run label {:?} is not a plain directory name", r.label)));
        }
        if !seen.insert(r.label.as_str()) {
            return Err(Error::contract(format!("duplicate run label {:?}", r.label)));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in results {
        let run_dir = dir.join(&r.label);
        fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
        write_steps(r, &run_dir.join(STEPS_FILE))?;
        write_probes(r, &run_dir.join(PROBE_FILE))?;
        write_summary(r, &run_dir.join(SUMMARY_FILE))?;
        let config = toml::to_string(&r.config).map_err(|e| Error::contract(format!("config does not serialize: {e}")))?;
        let path = run_dir.join(CONFIG_FILE);
        fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
    }
    write_aggregate(results, &dir.join(AGGREGATE_FILE))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let kind = match e.kind() {
        csv::ErrorKind::Io(io) => io.kind(),
        _ => std::io::ErrorKind::Other,
    };
    Error::io(path, std::io::Error::new(kind, e.to_string()))
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_steps(r: &RunResult, path: &Path) -> Result<()> {
    let k = r.record.num_sources();
    let mut header: Vec<String> = [
        "step",
        "chosen_i",
        "chosen_j",
        "batch_reward_i",
        "batch_reward_j",
        "cum_reward",
        "static_regret",
        "dynamic_regret",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..k).map(|n| format!("skill_{n}")));
    header.push("corrupted_count".into());

    let mut cum_reward = 0u64;
    let mut cum_static = 0.0;
    let mut cum_dynamic = Some(0.0);
    let rows = r.record.steps.iter().map(move |s| {
        let ri = s.batch_reward_i();
        let rj = s.batch_reward_j();
        cum_reward += ri + rj.unwrap_or(0);
        cum_static += s.static_regret;
        cum_dynamic = cum_dynamic.zip(s.dynamic_regret).map(|(a, b)| a + b);
        let mut row = vec![
            s.step.to_string(),
            s.chosen_i.to_string(),
            opt(s.chosen_j),
            ri.to_string(),
            opt(rj),
            cum_reward.to_string(),
            cum_static.to_string(),
            opt(cum_dynamic),
        ];
        row.extend(s.skills.iter().map(f64::to_string));
        row.push(s.corrupted.to_string());
        row
    });
    write_rows(path, header, rows)
}

fn write_probes(r: &RunResult, path: &Path) -> Result<()> {
    let header = ["instances_seen", "best_arm", "mean_f1"].iter().map(|s| s.to_string()).collect();
    let rows = r
        .record
        .probes
        .iter()
        .map(|p| vec![p.instances_seen.to_string(), p.best_arm.to_string(), p.mean_f1.to_string()]);
    write_rows(path, header, rows)
}

fn summary(r: &RunResult) -> Summary<'_> {
    let rec = &r.record;
    Summary {
        label: &r.label,
        policy: rec.policy.as_str(),
        config_digest: &rec.config_digest,
        seed: rec.seed,
        num_sources: rec.num_sources(),
        instances: rec.instances(),
        best_arm: rec.best_arm.0,
        best_arm_skill: rec.best_arm_skill(),
        overall_reward: overall_reward(rec),
        static_regret: rec.static_regret(),
        dynamic_regret: rec.dynamic_regret(),
        teacher_instances: rec.teacher_instances,
        final_skills: rec.final_skills(),
        final_means: &rec.final_means,
        wall_clock_secs: r.elapsed.as_secs_f64(),
    }
}

fn write_summary(r: &RunResult, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&summary(r)).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_aggregate(results: &[RunResult], path: &PathBuf) -> Result<()> {
    let header = AGGREGATE_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = results.iter().map(|r| {
        let s = summary(r);
        vec![
            s.label.to_string(),
            opt(r.sweep.map(|(p, _)| p)),
            opt(r.sweep.map(|(_, v)| v)),
            s.policy.to_string(),
            s.seed.to_string(),
            s.num_sources.to_string(),
            s.config_digest.to_string(),
            s.best_arm.to_string(),
            s.best_arm_skill.to_string(),
            s.overall_reward.to_string(),
            s.static_regret.to_string(),
            opt(s.dynamic_regret),
            s.teacher_instances.to_string(),
            s.wall_clock_secs.to_string(),
        ]
    });
    write_rows(path, header, rows)
}

//! Browser bindings for the simulator: run a short experiment, sample the
//! noise channel, and score two spans.
//!
//! The exported functions return JSON strings so the page needs no glue
//! beyond the generated bindings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use tta_bandit_core::feedback::{apply_noise, NoiseChannel, PreferenceLabel};
use tta_bandit_core::metrics::overall_reward;
use tta_bandit_core::{run_experiment, ExperimentConfig, PolicyKind, Span};

/// Largest stream the page may request.
pub const MAX_STREAM: usize = 200_000;
const MAX_POINTS: usize = 400;

#[derive(Debug, Serialize)]
pub struct Trace {
    pub policy: String,
    pub best_arm: usize,
    pub best_arm_skill: f64,
    pub overall_reward: u64,
    pub static_regret: f64,
    /// Instances seen at each sampled point.
    pub instances: Vec<u64>,
    pub cum_reward: Vec<u64>,
    pub cum_regret: Vec<f64>,
    /// `skills[k][n]`: skill of model `k` at point `n`.
    pub skills: Vec<Vec<f64>>,
    /// How often each model was chosen (either duel slot).
    pub pulls: Vec<u64>,
}

fn parse_policy(name: &str) -> Result<PolicyKind, String> {
    match name {
        "ucb" => Ok(PolicyKind::Ucb),
        "ucb_preference" => Ok(PolicyKind::UcbPreference),
        "co_ucb" => Ok(PolicyKind::CoUcb),
        "co_ucb_no_collab" => Ok(PolicyKind::CoUcbNoCollab),
        other => Err(format!("unknown policy {other:?}")),
    }
}

/// Runs one experiment and thins the step log to at most a few hundred points.
pub fn simulate_trace(
    policy: &str,
    skills: &[f64],
    stream_length: usize,
    noise_rate: f64,
    seed: u64,
) -> Result<Trace, String> {
    if stream_length > MAX_STREAM {
        return Err(format!("stream length is capped at {MAX_STREAM}"));
    }
    let mut config = ExperimentConfig {
        policy: parse_policy(policy)?,
        ..ExperimentConfig::default()
    };
    config.profile.initial_skills = skills.to_vec();
    config.profile.stream_length = stream_length;
    config.profile.seed = seed;
    config.noise.noise_rate = noise_rate;
    config.probe_every = 0;
    config.dynamic_regret = false;
    config.preference_samples = 20_000;
    let run = run_experiment(&config).map_err(|e| e.to_string())?;

    let every = run.steps.len().div_ceil(MAX_POINTS).max(1);
    let mut trace = Trace {
        policy: config.policy.to_string(),
        best_arm: run.best_arm.index(),
        best_arm_skill: run.best_arm_skill(),
        overall_reward: overall_reward(&run),
        static_regret: run.static_regret(),
        instances: Vec::new(),
        cum_reward: Vec::new(),
        cum_regret: Vec::new(),
        skills: vec![Vec::new(); skills.len()],
        pulls: vec![0; skills.len()],
    };
    let (mut seen, mut reward, mut regret) = (0u64, 0u64, 0.0);
    for (n, step) in run.steps.iter().enumerate() {
        seen += step.batch_size() as u64;
        reward += step.batch_reward_i() + step.batch_reward_j().unwrap_or(0);
        regret += step.static_regret;
        trace.pulls[step.chosen_i.index()] += 1;
        if let Some(j) = step.chosen_j {
            trace.pulls[j.index()] += 1;
        }
        if (n + 1) % every == 0 || n + 1 == run.steps.len() {
            trace.instances.push(seen);
            trace.cum_reward.push(reward);
            trace.cum_regret.push(regret);
            for (row, &s) in trace.skills.iter_mut().zip(&step.skills) {
                row.push(s);
            }
        }
    }
    Ok(trace)
}

/// Empirical 3x3 relabelling frequencies (rows: true label, order `>`, `<`, `=`).
pub fn transition_frequencies(noise_rate: f64, draws: u32, seed: u64) -> Result<[[f64; 3]; 3], String> {
    if draws == 0 {
        return Err("draws must be positive".into());
    }
    let channel = NoiseChannel::equal_split(noise_rate).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq = [[0.0; 3]; 3];
    for from in PreferenceLabel::ALL {
        let mut counts = [0u32; 3];
        for _ in 0..draws {
            counts[apply_noise(from, &channel, &mut rng).index()] += 1;
        }
        for (cell, c) in freq[from.index()].iter_mut().zip(counts) {
            *cell = f64::from(c) / f64::from(draws);
        }
    }
    Ok(freq)
}

pub fn f1(pred_start: usize, pred_end: usize, gold_start: usize, gold_end: usize) -> Result<f64, String> {
    let pred = Span::new(pred_start, pred_end).map_err(|e| e.to_string())?;
    let gold = Span::new(gold_start, gold_end).map_err(|e| e.to_string())?;
    Ok(tta_bandit_core::feedback::span_f1(&pred, &gold))
}

/// `skills` is a comma-separated list such as `"0.6,0.5,0.55"`.
#[wasm_bindgen]
pub fn simulate(policy: &str, skills: &str, stream_length: usize, noise_rate: f64, seed: u32) -> Result<String, JsError> {
    let skills = skills
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| JsError::new(&format!("bad skill {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = simulate_trace(policy, &skills, stream_length, noise_rate, u64::from(seed)).map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&trace).expect("trace serializes"))
}

#[wasm_bindgen]
pub fn noise_transition(noise_rate: f64, draws: u32, seed: u32) -> Result<String, JsError> {
    let freq = transition_frequencies(noise_rate, draws, u64::from(seed)).map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&freq).expect("matrix serializes"))
}

#[wasm_bindgen]
pub fn span_f1(pred_start: usize, pred_end: usize, gold_start: usize, gold_end: usize) -> Result<f64, JsError> {
    f1(pred_start, pred_end, gold_start, gold_end).map_err(|e| JsError::new(&e))
}

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, PolicyKind};
use super::sweep::SweepParam;
use crate::bandit::{ArmId, MabLedger};
use crate::dueling::{combine_predictions, DuelLedger};
use crate::environment::{
    collaborative_adapt, self_adapt, Collaboration, DuelFeedback, InstanceSampler, SyntheticModel, TaskInstance,
};
use crate::error::{Error, Result};
use crate::feedback::{apply_noise, exact_match_reward, make_preference, preference_to_rewards, span_f1, NoiseChannel};
use crate::metrics::{mab_step_regret, PreferenceModel, ProbePoint, RunRecord, StepRecord};

/// Added to the run seed to seed the Monte Carlo tie-rate estimate.
pub const PREFERENCE_SEED_OFFSET: u64 = 0x5eed_0f_7ea5;

// independent ChaCha streams under one seed
const INSTANCE_STREAM: u64 = 0;
const PREDICTION_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const PROBE_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A finished run together with how it was produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Output directory name; unique within one `write_outputs` call.
    pub label: String,
    pub sweep: Option<(SweepParam, f64)>,
    pub config: ExperimentConfig,
    pub record: RunRecord,
    pub elapsed: Duration,
}

/// Runs one experiment and times it.
pub fn run_labeled(config: &ExperimentConfig, label: impl Into<String>, sweep: Option<(SweepParam, f64)>) -> Result<RunResult> {
    let started = Instant::now();
    let record = run_experiment(config)?;
    Ok(RunResult {
        label: label.into(),
        sweep,
        config: config.clone(),
        record,
        elapsed: started.elapsed(),
    })
}

/// Executes the configured policy over the synthetic stream.
///
/// Each step draws a full batch, selects an arm (or pair), simulates the
/// user's feedback, updates the ledger and, unless `policy_only` is set,
/// adapts the chosen models. A trailing partial batch is dropped.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let state = RunState::new(config)?;
    if config.policy.is_dueling() {
        state.run_dueling()
    } else {
        state.run_single()
    }
}

struct RunState<'c> {
    config: &'c ExperimentConfig,
    initial_skills: Vec<f64>,
    models: Vec<SyntheticModel>,
    sampler: InstanceSampler,
    instance_rng: ChaCha8Rng,
    prediction_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    channel: NoiseChannel,
    probe_sampler: InstanceSampler,
    probe_rng: ChaCha8Rng,
    steps: Vec<StepRecord>,
    probes: Vec<ProbePoint>,
    teacher_instances: u64,
}

impl<'c> RunState<'c> {
    fn new(config: &'c ExperimentConfig) -> Result<Self> {
        let seed = config.profile.seed;
        let models = config
            .profile
            .initial_skills
            .iter()
            .map(|&s| SyntheticModel::new(s, config.learning_gain, config.perturb_width, config.top2_degradation))
            .collect::<Result<Vec<_>>>()?;
        let num_steps = config.profile.stream_length / config.profile.batch_size;
        Ok(RunState {
            config,
            initial_skills: config.profile.initial_skills.clone(),
            models,
            sampler: InstanceSampler::new(config.passage),
            instance_rng: stream(seed, INSTANCE_STREAM),
            prediction_rng: stream(seed, PREDICTION_STREAM),
            noise_rng: stream(seed, NOISE_STREAM),
            channel: config.noise.channel()?,
            probe_sampler: InstanceSampler::new(config.passage),
            probe_rng: stream(seed, PROBE_STREAM),
            steps: Vec::with_capacity(num_steps),
            probes: Vec::new(),
            teacher_instances: 0,
        })
    }

    fn num_steps(&self) -> u64 {
        (self.config.profile.stream_length / self.config.profile.batch_size) as u64
    }

    fn skills(&self) -> Vec<f64> {
        self.models.iter().map(SyntheticModel::skill).collect()
    }

    fn next_batch(&mut self) -> Vec<TaskInstance> {
        (0..self.config.profile.batch_size)
            .map(|_| self.sampler.sample(&mut self.instance_rng))
            .collect()
    }

    /// Mean F1 of `arm` on fresh instances, when this step crosses a probe mark.
    fn maybe_probe(&mut self, step: u64, best: impl FnOnce() -> ArmId) {
        let every = self.config.probe_every as u64;
        if every == 0 {
            return;
        }
        let batch = self.config.profile.batch_size as u64;
        let seen = step * batch;
        if seen / every == (seen - batch) / every {
            return;
        }
        let arm = best();
        let model = &self.models[arm.0];
        let n = self.config.probe_size;
        let mut total = 0.0;
        for _ in 0..n {
            let inst = self.probe_sampler.sample(&mut self.probe_rng);
            total += span_f1(&model.predict(&inst, &mut self.probe_rng), &inst.gold);
        }
        self.probes.push(ProbePoint {
            instances_seen: seen,
            best_arm: arm,
            mean_f1: total / n as f64,
        });
    }

    fn finish(self, best_arm: ArmId, final_means: Vec<f64>) -> RunRecord {
        RunRecord {
            config_digest: self.config.digest(),
            seed: self.config.profile.seed,
            policy: self.config.policy,
            initial_skills: self.initial_skills,
            steps: self.steps,
            probes: self.probes,
            best_arm,
            final_means,
            teacher_instances: self.teacher_instances,
        }
    }

    fn run_single(mut self) -> Result<RunRecord> {
        let config = self.config;
        let batch_size = config.profile.batch_size;
        let mut ledger = MabLedger::new(self.models.len())?;
        for step in 1..=self.num_steps() {
            let batch = self.next_batch();
            let arm = ledger.select_arm();
            let before = self.skills();
            let mut rewards = Vec::with_capacity(batch_size);
            let mut teacher_is_gold = Vec::with_capacity(batch_size);
            let mut corrupted = 0u32;
            let model = &self.models[arm.0];
            for inst in &batch {
                match config.policy {
                    PolicyKind::Ucb => {
                        let r = exact_match_reward(&model.predict(inst, &mut self.prediction_rng), &inst.gold);
                        rewards.push(r);
                        // only an exact match is rewarded, so the forwarded span is gold
                        teacher_is_gold.push(true);
                    }
                    _ => {
                        let (first, second) = model.predict_top2(inst, &mut self.prediction_rng);
                        let clean = make_preference(span_f1(&first, &inst.gold), span_f1(&second, &inst.gold));
                        let label = apply_noise(clean, &self.channel, &mut self.noise_rng);
                        corrupted += u32::from(label != clean);
                        let (r1, r2) = preference_to_rewards(label);
                        let teacher = combine_predictions(first, second, r1, r2)?;
                        rewards.push(r1 + r2);
                        teacher_is_gold.push(teacher == Some(inst.gold));
                    }
                }
            }
            ledger.update_binary(arm, &rewards)?;
            if !config.policy_only {
                self_adapt(&mut self.models[arm.0], &rewards, &teacher_is_gold, config.adapt_rule)?;
            }
            self.teacher_instances += rewards.iter().map(|&r| u64::from(r)).sum::<u64>();
            self.steps.push(StepRecord {
                step,
                chosen_i: arm,
                chosen_j: None,
                rewards_i: rewards,
                rewards_j: Vec::new(),
                skills: self.skills(),
                static_regret: mab_step_regret(&self.initial_skills, arm),
                dynamic_regret: config.dynamic_regret.then(|| mab_step_regret(&before, arm)),
                corrupted,
            });
            self.maybe_probe(step, || ledger.best_arm());
        }
        let best = ledger.best_arm();
        let means = ledger.means().to_vec();
        Ok(self.finish(best, means))
    }

    fn run_dueling(mut self) -> Result<RunRecord> {
        let config = self.config;
        let batch_size = config.profile.batch_size;
        let collaboration = match config.policy {
            PolicyKind::CoUcbNoCollab => Collaboration::OwnWinsOnly,
            _ => Collaboration::Joint,
        };
        let preferences = PreferenceModel::estimate(
            config.perturb_width,
            config.passage,
            config.preference_samples,
            config.profile.seed.wrapping_add(PREFERENCE_SEED_OFFSET),
        )?;
        let static_row = preferences.beats_row(&self.initial_skills);
        let mut ledger = DuelLedger::with_rule(self.models.len(), config.total_count_rule)?;
        for step in 1..=self.num_steps() {
            let batch = self.next_batch();
            let pair = ledger.select_pair();
            let (i, j) = (pair.i(), pair.j());
            let before = self.skills();
            let mut rewards_i = Vec::with_capacity(batch_size);
            let mut rewards_j = Vec::with_capacity(batch_size);
            let mut teacher_is_gold = Vec::with_capacity(batch_size);
            let mut corrupted = 0u32;
            for inst in &batch {
                let pred_i = self.models[i.0].predict(inst, &mut self.prediction_rng);
                let pred_j = self.models[j.0].predict(inst, &mut self.prediction_rng);
                let clean = make_preference(span_f1(&pred_i, &inst.gold), span_f1(&pred_j, &inst.gold));
                let label = apply_noise(clean, &self.channel, &mut self.noise_rng);
                corrupted += u32::from(label != clean);
                let (ri, rj) = preference_to_rewards(label);
                let teacher = combine_predictions(pred_i, pred_j, ri, rj)?;
                if teacher.is_some() != (ri + rj == 1) {
                    return Err(Error::contract(format!(
                        "step {step}: preferred span present={} with rewards ({ri}, {rj})",
                        teacher.is_some()
                    )));
                }
                rewards_i.push(ri);
                rewards_j.push(rj);
                teacher_is_gold.push(teacher == Some(inst.gold));
            }
            ledger.update_pair(pair, &rewards_i, &rewards_j)?;
            if !config.policy_only {
                let (model_i, model_j) = pair_mut(&mut self.models, i.0, j.0);
                let feedback = DuelFeedback {
                    rewards_i: &rewards_i,
                    rewards_j: &rewards_j,
                    teacher_is_gold: &teacher_is_gold,
                };
                collaborative_adapt(model_i, model_j, feedback, collaboration, config.adapt_rule)?;
            }
            self.teacher_instances += rewards_i.iter().chain(&rewards_j).map(|&r| u64::from(r)).sum::<u64>();
            let dynamic_regret = config.dynamic_regret.then(|| {
                let row = preferences.beats_row(&before);
                (row[i.0] - 0.5) + (row[j.0] - 0.5)
            });
            self.steps.push(StepRecord {
                step,
                chosen_i: i,
                chosen_j: Some(j),
                rewards_i,
                rewards_j,
                skills: self.skills(),
                static_regret: (static_row[i.0] - 0.5) + (static_row[j.0] - 0.5),
                dynamic_regret,
                corrupted,
            });
            self.maybe_probe(step, || ledger.best_model());
        }
        let best = ledger.best_model();
        let means = ledger.means().to_vec();
        Ok(self.finish(best, means))
    }
}

fn pair_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = items.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(policy: PolicyKind) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            policy,
            ..ExperimentConfig::default()
        };
        c.profile.stream_length = 3_200;
        c.profile.seed = 7;
        c.probe_every = 800;
        c.probe_size = 50;
        c.preference_samples = 2_000;
        c
    }

    #[test]
    fn single_arm_ucb_always_picks_arm_zero() {
        let mut c = small(PolicyKind::Ucb);
        c.profile.initial_skills = vec![0.4];
        let r = run_experiment(&c).unwrap();
        assert!(r.steps.iter().all(|s| s.chosen_i == ArmId(0)));
        assert_eq!(r.best_arm, ArmId(0));
        assert_eq!(r.steps.len(), 200);
    }

    #[test]
    fn runs_are_deterministic_for_every_policy() {
        for policy in [PolicyKind::Ucb, PolicyKind::UcbPreference, PolicyKind::CoUcb, PolicyKind::CoUcbNoCollab] {
            let c = small(policy);
            assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap(), "{policy}");
        }
    }

    #[test]
    fn trailing_partial_batch_is_dropped() {
        let mut c = small(PolicyKind::CoUcb);
        c.profile.stream_length = 100;
        c.profile.batch_size = 16;
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.steps.len(), 6);
        assert_eq!(r.instances(), 96);
        assert!(r.steps.iter().enumerate().all(|(n, s)| s.step == n as u64 + 1));
    }

    #[test]
    fn policy_only_keeps_skills() {
        for policy in [PolicyKind::Ucb, PolicyKind::CoUcb] {
            let mut c = small(policy);
            c.policy_only = true;
            let r = run_experiment(&c).unwrap();
            assert_eq!(r.final_skills(), &c.profile.initial_skills[..]);
        }
    }

    #[test]
    fn probes_follow_the_cadence() {
        let r = run_experiment(&small(PolicyKind::CoUcb)).unwrap();
        let marks: Vec<u64> = r.probes.iter().map(|p| p.instances_seen).collect();
        assert_eq!(marks, vec![800, 1600, 2400, 3200]);
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let mut c = small(PolicyKind::CoUcb);
        c.profile.initial_skills = vec![0.5];
        assert!(matches!(run_experiment(&c), Err(Error::Config(_))));
    }

    #[test]
    fn noise_is_counted() {
        let mut c = small(PolicyKind::CoUcb);
        c.noise.noise_rate = 0.5;
        let r = run_experiment(&c).unwrap();
        let corrupted: u32 = r.steps.iter().map(|s| s.corrupted).sum();
        // every corruption changes the label, so about half the instances
        let frac = f64::from(corrupted) / r.instances() as f64;
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }
}

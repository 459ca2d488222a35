use serde::{Deserialize, Serialize};

use super::config::{hash_u64, ExperimentConfig};
use super::run::{run_labeled, RunResult};
use crate::error::{Error, Result};

/// The configuration knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
#[cfg_attr(feature = "cli", clap(rename_all = "snake_case"))]
pub enum SweepParam {
    NoiseRate,
    /// Uses the first `n` entries of the base skill vector.
    NumSources,
    /// The value is the run seed itself.
    Seed,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::NoiseRate => "noise_rate",
            SweepParam::NumSources => "num_sources",
            SweepParam::Seed => "seed",
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

fn as_count(v: f64) -> Option<u64> {
    (v.fract() == 0.0 && v >= 0.0 && v < 2f64.powi(53)).then_some(v as u64)
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>) -> Self {
        SweepSpec { parameter, values }
    }

    /// Checks every value against the parameter's domain and `base`.
    pub fn validate(&self, base: &ExperimentConfig) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep has no values"));
        }
        for (n, v) in self.values.iter().enumerate() {
            if self.values[..n].contains(v) {
                return Err(Error::config(format!("duplicate {} value {v}", self.parameter)));
            }
        }
        for &v in &self.values {
            self.configure(base, v)?.validate()?;
        }
        Ok(())
    }

    /// Output label for the run at `value`.
    pub fn label(&self, value: f64) -> String {
        format!("{}={value}", self.parameter)
    }

    /// The base config with `value` applied and its child seed derived.
    ///
    /// Non-seed sweeps offset the base seed by a hash of the label, so adding
    /// sweep points leaves existing runs unchanged.
    pub fn configure(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut config = base.clone();
        match self.parameter {
            SweepParam::NoiseRate => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::config(format!("noise rate {value} outside [0, 1]")));
                }
                config.noise.noise_rate = value;
            }
            SweepParam::NumSources => {
                let k = as_count(value)
                    .filter(|&k| k >= 1 && k as usize <= base.num_sources())
                    .ok_or_else(|| {
                        Error::config(format!(
                            "source count {value} must be an integer in [1, {}]",
                            base.num_sources()
                        ))
                    })?;
                config.profile.initial_skills.truncate(k as usize);
            }
            SweepParam::Seed => {
                config.profile.seed =
                    as_count(value).ok_or_else(|| Error::config(format!("seed {value} is not a non-negative integer")))?;
                return Ok(config);
            }
        }
        config.profile.seed = base.profile.seed.wrapping_add(hash_u64(self.label(value).as_bytes()));
        Ok(config)
    }
}

/// One run per sweep value, in value order.
pub fn run_sweep(base: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<RunResult>> {
    sweep.validate(base)?;
    let jobs = sweep
        .values
        .iter()
        .map(|&v| Ok((sweep.label(v), sweep.configure(base, v)?, Some((sweep.parameter, v)))))
        .collect::<Result<Vec<_>>>()?;
    run_jobs(jobs)
}

type Job = (String, ExperimentConfig, Option<(SweepParam, f64)>);

#[cfg(feature = "parallel")]
fn run_jobs(jobs: Vec<Job>) -> Result<Vec<RunResult>> {
    use rayon::prelude::*;
    jobs.into_par_iter()
        .map(|(label, config, point)| run_labeled(&config, label, point))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_jobs(jobs: Vec<Job>) -> Result<Vec<RunResult>> {
    jobs.into_iter()
        .map(|(label, config, point)| run_labeled(&config, label, point))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.profile.stream_length = 640;
        c.preference_samples = 1_000;
        c.probe_every = 0;
        c
    }

    #[test]
    fn noise_sweep_changes_only_the_channel_and_seed() {
        let b = base();
        let spec = SweepSpec::new(SweepParam::NoiseRate, vec![0.0, 0.1, 0.3, 0.5]);
        let runs = run_sweep(&b, &spec).unwrap();
        assert_eq!(runs.len(), 4);
        for (r, v) in runs.iter().zip(&spec.values) {
            let mut expect = b.clone();
            expect.noise.noise_rate = *v;
            expect.profile.seed = r.config.profile.seed;
            assert_eq!(r.config, expect);
            assert_eq!(r.sweep, Some((SweepParam::NoiseRate, *v)));
        }
    }

    #[test]
    fn source_sweep_uses_prefixes() {
        let b = base();
        let spec = SweepSpec::new(SweepParam::NumSources, vec![2.0, 3.0, 4.0, 5.0]);
        let runs = run_sweep(&b, &spec).unwrap();
        for (r, k) in runs.iter().zip(2..) {
            assert_eq!(r.config.profile.initial_skills, b.profile.initial_skills[..k]);
            assert_eq!(r.record.num_sources(), k);
        }
    }

    #[test]
    fn seed_sweep_gives_distinct_seeds() {
        let spec = SweepSpec::new(SweepParam::Seed, (0..20).map(f64::from).collect());
        let runs = run_sweep(&base(), &spec).unwrap();
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.record.seed).collect();
        seeds.dedup();
        assert_eq!(seeds, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn child_seeds_do_not_depend_on_other_points() {
        let b = base();
        let short = SweepSpec::new(SweepParam::NoiseRate, vec![0.3]);
        let long = SweepSpec::new(SweepParam::NoiseRate, vec![0.1, 0.3, 0.7]);
        assert_eq!(short.configure(&b, 0.3).unwrap(), long.configure(&b, 0.3).unwrap());
        assert_ne!(long.configure(&b, 0.1).unwrap().profile.seed, long.configure(&b, 0.3).unwrap().profile.seed);
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let b = base();
        for spec in [
            SweepSpec::new(SweepParam::NoiseRate, vec![]),
            SweepSpec::new(SweepParam::NoiseRate, vec![1.5]),
            SweepSpec::new(SweepParam::NoiseRate, vec![0.1, 0.1]),
            SweepSpec::new(SweepParam::NumSources, vec![6.0]),
            SweepSpec::new(SweepParam::NumSources, vec![2.5]),
            // a dueling policy needs two sources
            SweepSpec::new(SweepParam::NumSources, vec![1.0]),
            SweepSpec::new(SweepParam::Seed, vec![-1.0]),
        ] {
            assert!(matches!(run_sweep(&b, &spec), Err(Error::Config(_))), "{spec:?}");
        }
    }
}

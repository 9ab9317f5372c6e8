//! Bernoulli-gated deception attacks on measured outputs.
//!
//! Each agent's sensor channel carries an additive false-data signal
//! `alpha_i(t) * epsilon_i(t)`. The gate `alpha_i` is an independent
//! Bernoulli draw with probability `alpha_bar_i`, resampled at the start
//! of each resample interval and held inside it. The waveform
//! `epsilon_i(t)` is a fixed sinusoid in output space; at construction
//! all amplitudes are scaled down, if needed, so the stacked worst-case
//! signal energy `sum_i ||epsilon_i(t)||^2` never exceeds the declared
//! budget `tau`.
//!
//! Gate draws are produced by hashing `(seed, interval index, agent)`
//! rather than by walking an RNG stream, so any subsystem can query the
//! gate at any time in any order and see the same attack realization.

use crate::rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
    #[error("output dimension mismatch for agent {agent}: expected {expected}, got {got}")]
    DimensionMismatch {
        agent: usize,
        expected: usize,
        got: usize,
    },
}

/// One sinusoidal false-data waveform: `amplitude * sin(omega t + phase)`
/// with `amplitude` a vector in output space (m), `omega` in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidSpec {
    pub amplitude: Vec<f64>,
    pub omega: f64,
    pub phase: f64,
}

/// Full attack description for a fleet: per-agent gate probabilities,
/// per-agent waveforms, the energy budget, and the gate resample
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    probabilities: Vec<f64>,
    tau: f64,
    signals: Vec<SinusoidSpec>,
    resample_interval: f64,
    output_dim: usize,
}

impl AttackConfig {
    pub fn new(
        probabilities: Vec<f64>,
        tau: f64,
        signals: Vec<SinusoidSpec>,
        resample_interval: f64,
    ) -> Result<AttackConfig, AttackError> {
        if probabilities.is_empty() {
            return Err(AttackError::InvalidConfig(
                "need at least one agent".into(),
            ));
        }
        if signals.len() != probabilities.len() {
            return Err(AttackError::InvalidConfig(format!(
                "{} waveforms for {} agents",
                signals.len(),
                probabilities.len()
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(AttackError::InvalidConfig(format!(
                "energy budget tau must be finite and nonnegative, got {tau}"
            )));
        }
        if !(resample_interval > 0.0 && resample_interval.is_finite()) {
            return Err(AttackError::InvalidConfig(format!(
                "resample interval must be positive, got {resample_interval}"
            )));
        }
        for (i, p) in probabilities.iter().enumerate() {
            if !(*p >= 0.0 && *p <= 1.0) {
                return Err(AttackError::InvalidConfig(format!(
                    "probability {p} for agent {i} outside [0, 1]"
                )));
            }
        }
        let output_dim = signals[0].amplitude.len();
        if output_dim == 0 {
            return Err(AttackError::InvalidConfig(
                "amplitude vectors must be non-empty".into(),
            ));
        }
        for (i, s) in signals.iter().enumerate() {
            if s.amplitude.len() != output_dim {
                return Err(AttackError::InvalidConfig(format!(
                    "agent {i} amplitude has dimension {}, expected {output_dim}",
                    s.amplitude.len()
                )));
            }
            if !s.amplitude.iter().all(|a| a.is_finite())
                || !s.omega.is_finite()
                || !s.phase.is_finite()
            {
                return Err(AttackError::InvalidConfig(format!(
                    "non-finite waveform parameter for agent {i}"
                )));
            }
        }
        let mut cfg = AttackConfig {
            probabilities,
            tau,
            signals,
            resample_interval,
            output_dim,
        };
        let envelope = cfg.worst_case_energy();
        if envelope > tau {
            let scale = (tau / envelope).sqrt();
            for s in &mut cfg.signals {
                for a in &mut s.amplitude {
                    *a *= scale;
                }
            }
        }
        Ok(cfg)
    }

    /// Attack-free placeholder for the given fleet and output dimension.
    pub fn disabled(n_agents: usize, output_dim: usize) -> AttackConfig {
        AttackConfig {
            probabilities: vec![0.0; n_agents],
            tau: 0.0,
            signals: vec![
                SinusoidSpec {
                    amplitude: vec![0.0; output_dim],
                    omega: 0.0,
                    phase: 0.0,
                };
                n_agents
            ],
            resample_interval: 1.0,
            output_dim,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.probabilities.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn resample_interval(&self) -> f64 {
        self.resample_interval
    }

    pub fn signals(&self) -> &[SinusoidSpec] {
        &self.signals
    }

    /// Largest eigenvalue of `F F'` where `F = diag(alpha_bar)`: simply
    /// the square of the largest gate probability.
    pub fn lambda_max_fft(&self) -> f64 {
        let worst = self.probabilities.iter().copied().fold(0.0, f64::max);
        worst * worst
    }

    /// Waveform value for one agent, gate not applied.
    pub fn epsilon(&self, agent: usize, t: f64) -> Vec<f64> {
        let s = &self.signals[agent];
        let factor = (s.omega * t + s.phase).sin();
        s.amplitude.iter().map(|a| a * factor).collect()
    }

    /// Gate state for one agent at time `t` under the given attack seed.
    pub fn alpha(&self, agent: usize, t: f64, seed: u64) -> bool {
        let p = self.probabilities[agent];
        if p <= 0.0 {
            return false;
        }
        let interval = ((t / self.resample_interval) + 1e-9).floor().max(0.0) as u64;
        rng::indexed_uniform(seed, interval, agent as u64) < p
    }

    /// Stacked worst-case signal energy: every sinusoid at its peak
    /// simultaneously.
    pub fn worst_case_energy(&self) -> f64 {
        self.signals
            .iter()
            .map(|s| s.amplitude.iter().map(|a| a * a).sum::<f64>())
            .sum()
    }

    /// Largest stacked `||epsilon(t)||^2` observed on a uniform time grid.
    pub fn max_energy_on_grid(&self, t0: f64, t1: f64, samples: usize) -> f64 {
        assert!(samples >= 2 && t1 > t0, "need a non-degenerate grid");
        let mut worst = 0.0f64;
        for k in 0..samples {
            let t = t0 + (t1 - t0) * k as f64 / (samples - 1) as f64;
            let energy: f64 = (0..self.n_agents())
                .map(|i| self.epsilon(i, t).iter().map(|e| e * e).sum::<f64>())
                .sum();
            worst = worst.max(energy);
        }
        worst
    }
}

/// Realized attack at one instant: gate states and ungated waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSample {
    pub alpha: Vec<bool>,
    pub epsilon: Vec<Vec<f64>>,
}

/// Draws the fleet-wide attack state at time `t` for the given seed.
pub fn sample_attack(cfg: &AttackConfig, t: f64, seed: u64) -> AttackSample {
    let n = cfg.n_agents();
    AttackSample {
        alpha: (0..n).map(|i| cfg.alpha(i, t, seed)).collect(),
        epsilon: (0..n).map(|i| cfg.epsilon(i, t)).collect(),
    }
}

/// Applies a realized attack to the fleet's true outputs.
pub fn corrupt_output(
    y: &[Vec<f64>],
    sample: &AttackSample,
) -> Result<Vec<Vec<f64>>, AttackError> {
    if y.len() != sample.alpha.len() {
        return Err(AttackError::DimensionMismatch {
            agent: 0,
            expected: sample.alpha.len(),
            got: y.len(),
        });
    }
    let mut out = Vec::with_capacity(y.len());
    for (i, yi) in y.iter().enumerate() {
        let eps = &sample.epsilon[i];
        if yi.len() != eps.len() {
            return Err(AttackError::DimensionMismatch {
                agent: i,
                expected: eps.len(),
                got: yi.len(),
            });
        }
        if sample.alpha[i] {
            out.push(yi.iter().zip(eps).map(|(a, b)| a + b).collect());
        } else {
            out.push(yi.clone());
        }
    }
    Ok(out)
}

/// Outcome of auditing a trace of attack samples against the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub max_energy: f64,
    pub tau: f64,
    pub pass: bool,
}

/// Checks `sum_i ||epsilon_i||^2 <= tau` over every sample of a trace.
pub fn verify_energy_bound(samples: &[AttackSample], tau: f64) -> EnergyReport {
    let mut max_energy = 0.0f64;
    for s in samples {
        let energy: f64 = s
            .epsilon
            .iter()
            .map(|e| e.iter().map(|v| v * v).sum::<f64>())
            .sum();
        max_energy = max_energy.max(energy);
    }
    EnergyReport {
        max_energy,
        tau,
        pass: max_energy <= tau + 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_probs() -> Vec<f64> {
        vec![0.32, 0.24, 0.30, 0.42, 0.27, 0.32, 0.25, 0.23, 0.39, 0.28]
    }

    fn demo_config() -> AttackConfig {
        let n = 10;
        let per_agent = (0.02f64 / n as f64).sqrt();
        let signals = (0..n)
            .map(|i| {
                let mut amplitude = vec![0.0; 3];
                amplitude[i % 3] = per_agent;
                SinusoidSpec {
                    amplitude,
                    omega: 1.0 + 0.37 * i as f64,
                    phase: 0.6 * i as f64,
                }
            })
            .collect();
        AttackConfig::new(table_probs(), 0.02, signals, 0.01).unwrap()
    }

    #[test]
    fn waveform_matches_formula() {
        let cfg = AttackConfig::new(
            vec![1.0],
            10.0,
            vec![SinusoidSpec {
                amplitude: vec![0.1, 0.0, 0.0],
                omega: 2.0,
                phase: std::f64::consts::FRAC_PI_2,
            }],
            0.5,
        )
        .unwrap();
        let e0 = cfg.epsilon(0, 0.0);
        assert!((e0[0] - 0.1).abs() < 1e-15);
        assert_eq!(e0[1], 0.0);
        let t = 0.7;
        let expected = 0.1 * (2.0 * t + std::f64::consts::FRAC_PI_2).sin();
        assert!((cfg.epsilon(0, t)[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn amplitudes_normalize_down_to_budget() {
        let hot = AttackConfig::new(
            vec![0.5, 0.5],
            0.02,
            vec![
                SinusoidSpec {
                    amplitude: vec![0.2, 0.0],
                    omega: 1.0,
                    phase: 0.0,
                },
                SinusoidSpec {
                    amplitude: vec![0.0, 0.2],
                    omega: 2.0,
                    phase: 0.3,
                },
            ],
            0.1,
        )
        .unwrap();
        assert!((hot.worst_case_energy() - 0.02).abs() < 1e-15);
        assert!(hot.max_energy_on_grid(0.0, 50.0, 20_001) <= 0.02 + 1e-12);

        let quiet = AttackConfig::new(
            vec![0.5],
            0.02,
            vec![SinusoidSpec {
                amplitude: vec![0.05],
                omega: 1.0,
                phase: 0.0,
            }],
            0.1,
        )
        .unwrap();
        assert!((quiet.worst_case_energy() - 0.0025).abs() < 1e-15);
        assert_eq!(quiet.signals()[0].amplitude[0], 0.05);
    }

    #[test]
    fn demo_energy_stays_within_budget() {
        let cfg = demo_config();
        assert!((cfg.worst_case_energy() - 0.02).abs() < 1e-12);
        assert!(cfg.max_energy_on_grid(0.0, 100.0, 100_001) <= 0.02 + 1e-12);
    }

    #[test]
    fn zero_probability_never_gates() {
        let mut probs = table_probs();
        probs[0] = 0.0;
        let cfg = AttackConfig::new(probs, 0.02, demo_config().signals().to_vec(), 0.01).unwrap();
        for k in 0..10_000 {
            assert!(!cfg.alpha(0, k as f64 * 0.01, 99));
        }
    }

    #[test]
    fn unit_probability_always_gates() {
        let cfg = AttackConfig::new(
            vec![1.0],
            1.0,
            vec![SinusoidSpec {
                amplitude: vec![0.1],
                omega: 1.0,
                phase: 0.0,
            }],
            0.01,
        )
        .unwrap();
        for k in 0..10_000 {
            assert!(cfg.alpha(0, k as f64 * 0.01, 7));
        }
    }

    #[test]
    fn empirical_gate_rate_matches_probability() {
        let cfg = demo_config();
        let interval = cfg.resample_interval();
        let hits = (0..100_000)
            .filter(|k| cfg.alpha(0, *k as f64 * interval, 2024))
            .count();
        let rate = hits as f64 / 100_000.0;
        assert!(
            (rate - 0.32).abs() <= 0.01,
            "empirical rate {rate} too far from 0.32"
        );
    }

    #[test]
    fn gate_is_constant_within_an_interval() {
        let cfg = demo_config();
        for agent in 0..cfg.n_agents() {
            for k in 0..200 {
                let base = k as f64 * 0.01;
                assert_eq!(
                    cfg.alpha(agent, base, 5),
                    cfg.alpha(agent, base + 0.004, 5)
                );
            }
        }
    }

    #[test]
    fn corruption_is_additive_and_gated() {
        let cfg = AttackConfig::new(
            vec![0.5, 0.5],
            1.0,
            vec![
                SinusoidSpec {
                    amplitude: vec![0.1, 0.0],
                    omega: 0.0,
                    phase: std::f64::consts::FRAC_PI_2,
                },
                SinusoidSpec {
                    amplitude: vec![0.0, 0.2],
                    omega: 0.0,
                    phase: std::f64::consts::FRAC_PI_2,
                },
            ],
            1.0,
        )
        .unwrap();
        let mut sample = sample_attack(&cfg, 0.0, 1);
        sample.alpha = vec![true, false];
        let y = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let corrupted = corrupt_output(&y, &sample).unwrap();
        assert!((corrupted[0][0] - 1.1).abs() < 1e-15);
        assert_eq!(corrupted[0][1], 2.0);
        assert_eq!(corrupted[1], vec![3.0, 4.0]);

        let bad = vec![vec![1.0], vec![2.0, 3.0]];
        assert!(matches!(
            corrupt_output(&bad, &sample),
            Err(AttackError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn energy_audit_passes_then_fails_after_doubling() {
        let cfg = demo_config();
        let samples: Vec<AttackSample> = (0..5000)
            .map(|k| sample_attack(&cfg, k as f64 * 0.02, 11))
            .collect();
        let report = verify_energy_bound(&samples, cfg.tau());
        assert!(report.pass);
        assert!(report.max_energy <= 0.02 + 1e-12);

        let doubled: Vec<AttackSample> = samples
            .iter()
            .map(|s| AttackSample {
                alpha: s.alpha.clone(),
                epsilon: s
                    .epsilon
                    .iter()
                    .map(|e| e.iter().map(|v| 2.0 * v).collect())
                    .collect(),
            })
            .collect();
        let report = verify_energy_bound(&doubled, cfg.tau());
        assert!(!report.pass);
        assert!(report.max_energy > 0.02);
    }

    #[test]
    fn samples_are_seed_deterministic() {
        let cfg = demo_config();
        let a = sample_attack(&cfg, 3.17, 42);
        assert_eq!(a, sample_attack(&cfg, 3.17, 42));
        let across_seeds: Vec<bool> = (0..200)
            .map(|seed| sample_attack(&cfg, 3.17, seed).alpha[3])
            .collect();
        assert!(across_seeds.iter().any(|v| *v));
        assert!(across_seeds.iter().any(|v| !*v));
    }

    #[test]
    fn lambda_max_fft_is_square_of_worst_probability() {
        let cfg = demo_config();
        assert!((cfg.lambda_max_fft() - 0.42 * 0.42).abs() < 1e-15);
        assert_eq!(AttackConfig::disabled(4, 3).lambda_max_fft(), 0.0);
    }

    #[test]
    fn disabled_config_is_silent() {
        let cfg = AttackConfig::disabled(3, 2);
        let sample = sample_attack(&cfg, 12.0, 1);
        assert!(sample.alpha.iter().all(|a| !a));
        assert!(sample
            .epsilon
            .iter()
            .all(|e| e.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::new(vec![], 0.1, vec![], 0.1).is_err());
        assert!(AttackConfig::new(
            vec![1.5],
            0.1,
            vec![SinusoidSpec {
                amplitude: vec![0.1],
                omega: 1.0,
                phase: 0.0
            }],
            0.1
        )
        .is_err());
        assert!(AttackConfig::new(
            vec![0.5],
            -1.0,
            vec![SinusoidSpec {
                amplitude: vec![0.1],
                omega: 1.0,
                phase: 0.0
            }],
            0.1
        )
        .is_err());
        assert!(AttackConfig::new(
            vec![0.5, 0.5],
            0.1,
            vec![
                SinusoidSpec {
                    amplitude: vec![0.1],
                    omega: 1.0,
                    phase: 0.0
                },
                SinusoidSpec {
                    amplitude: vec![0.1, 0.2],
                    omega: 1.0,
                    phase: 0.0
                }
            ],
            0.1
        )
        .is_err());
    }
}

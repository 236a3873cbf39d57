//! Multiplicative reward shaping with a trend-triggered gain schedule.
//!
//! The shaped reward is `alpha_m * R_t * (D_min / D) - alpha_eps`. Whenever the
//! least-squares slope of recent per-episode average rewards turns negative,
//! `alpha_m` grows by `psi` (optionally capped at `alpha_max`) and `alpha_eps`
//! follows the sigmoid coupling `0.2 * (1 - 1 / (1 + exp(1 - alpha_m)))`.

use serde::{Deserialize, Serialize};

use super::AgentError;

/// `D_min / D`, in `[D_min / D_max, 1]` for admissible durations.
pub fn duration_reward(duration: f64, min_duration: f64) -> Result<f64, AgentError> {
    if !(duration > 0.0) || !(min_duration > 0.0) {
        return Err(AgentError::Domain(format!(
            "durations must be positive (D = {duration}, D_min = {min_duration})"
        )));
    }
    Ok(min_duration / duration)
}

/// Per-step penalty coupled to the gain: equals 0.1 at `alpha_m = 1` and
/// decays toward zero as `alpha_m` grows.
pub fn alpha_epsilon_of(alpha_m: f64) -> f64 {
    0.2 * (1.0 - 1.0 / (1.0 + (1.0 - alpha_m).exp()))
}

pub fn shape_reward(task_reward: f64, duration: f64, min_duration: f64, alpha_m: f64, alpha_eps: f64) -> Result<f64, AgentError> {
    Ok(alpha_m * task_reward * duration_reward(duration, min_duration)? - alpha_eps)
}

/// Least-squares slope of `values` against the indices `1..=n`.
pub fn reward_slope(values: &[f64]) -> Result<f64, AgentError> {
    let n = values.len();
    if n < 2 {
        return Err(AgentError::InsufficientData(format!("slope needs at least 2 points, got {n}")));
    }
    // centered indices pair up symmetrically, so a constant list gives exactly 0
    let mid = (n as f64 + 1.0) / 2.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n / 2 {
        let c = (k + 1) as f64 - mid;
        num += c * (values[k] - values[n - 1 - k]);
        den += 2.0 * c * c;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaConfig {
    pub initial: f64,
    /// Increment applied on each adjustment.
    pub psi: f64,
    pub max: f64,
    pub capped: bool,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self { initial: 1.0, psi: 0.05, max: 5.0, capped: true }
    }
}

/// Adaptive shaping parameters plus the buffer of per-episode averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaState {
    alpha_m: f64,
    alpha_eps: f64,
    pub psi: f64,
    pub alpha_max: f64,
    pub capped: bool,
    averages: Vec<f64>,
}

impl AlphaState {
    pub fn new(cfg: &AlphaConfig) -> Result<Self, AgentError> {
        if !(cfg.initial >= 0.0) || !(cfg.psi >= 0.0) {
            return Err(AgentError::Config("alpha_m and psi must be non-negative".into()));
        }
        if cfg.capped && cfg.initial > cfg.max {
            return Err(AgentError::Config("initial alpha_m exceeds alpha_max".into()));
        }
        Ok(Self {
            alpha_m: cfg.initial,
            alpha_eps: alpha_epsilon_of(cfg.initial),
            psi: cfg.psi,
            alpha_max: cfg.max,
            capped: cfg.capped,
            averages: Vec::new(),
        })
    }

    pub fn alpha_m(&self) -> f64 {
        self.alpha_m
    }

    pub fn alpha_eps(&self) -> f64 {
        self.alpha_eps
    }

    pub fn averages(&self) -> &[f64] {
        &self.averages
    }

    pub fn record_episode_average(&mut self, average: f64) {
        self.averages.push(average);
    }

    pub fn shape(&self, task_reward: f64, duration: f64, min_duration: f64) -> Result<f64, AgentError> {
        shape_reward(task_reward, duration, min_duration, self.alpha_m, self.alpha_eps)
    }

    /// Raises `alpha_m` when the recorded averages trend downward and clears
    /// the buffer; otherwise leaves everything, buffer included, untouched.
    /// Returns whether an adjustment fired.
    pub fn maybe_adjust(&mut self) -> bool {
        let Ok(slope) = reward_slope(&self.averages) else {
            return false;
        };
        if slope >= 0.0 {
            return false;
        }
        self.alpha_m = if self.capped {
            (self.alpha_m + self.psi).min(self.alpha_max)
        } else {
            self.alpha_m + self.psi
        };
        self.alpha_eps = alpha_epsilon_of(self.alpha_m);
        self.averages.clear();
        true
    }
}

/// Fixed weights of the additive baseline reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeacWeights {
    pub task: f64,
    pub energy: f64,
    pub time: f64,
}

impl Default for SeacWeights {
    fn default() -> Self {
        Self { task: 1.0, energy: 0.1, time: 0.5 }
    }
}

/// `w_task * R_t - w_energy - w_time * D`.
pub fn seac_baseline_reward(task_reward: f64, duration: f64, w: &SeacWeights) -> f64 {
    w.task * task_reward - w.energy - w.time * duration
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_reward_endpoints() {
        assert_eq!(duration_reward(0.02, 0.02).unwrap(), 1.0);
        assert_eq!(duration_reward(0.5, 0.02).unwrap(), 0.02 / 0.5);
        assert_eq!(duration_reward(0.04, 0.02).unwrap(), 0.5);
        assert!(matches!(duration_reward(0.0, 0.02), Err(AgentError::Domain(_))));
        assert!(matches!(duration_reward(-0.1, 0.02), Err(AgentError::Domain(_))));
    }

    #[test]
    fn alpha_epsilon_sigmoid() {
        assert!((alpha_epsilon_of(1.0) - 0.1).abs() < 1e-12);
        let big = alpha_epsilon_of(50.0);
        assert!(big >= 0.0 && big < 1e-10);
        // 0.2 * (1 - 1/(1 + e)) evaluated independently
        let e = std::f64::consts::E;
        assert!((alpha_epsilon_of(0.0) - 0.2 * e / (1.0 + e)).abs() < 1e-15);
        assert!((alpha_epsilon_of(0.0) - 0.146_211_715_726_000_97).abs() < 1e-15);
    }

    #[test]
    fn shaping_examples() {
        assert!((shape_reward(1.0, 0.02, 0.02, 1.0, 0.1).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(shape_reward(0.0, 0.3, 0.02, 1.7, 0.07).unwrap(), -0.07);
        let eps = alpha_epsilon_of(1.2);
        let expected = 1.2 * 500.0 * 0.08 - eps;
        assert!((shape_reward(500.0, 0.25, 0.02, 1.2, eps).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn slope_examples() {
        assert_eq!(reward_slope(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!((reward_slope(&[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(reward_slope(&[1.0]), Err(AgentError::InsufficientData(_))));
    }

    #[test]
    fn slope_matches_centered_least_squares() {
        let ys = [3.0, 2.5, 2.7, 1.9];
        // independent fit via centered sums
        let xm = 2.5;
        let ym = ys.iter().sum::<f64>() / 4.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (k, y) in ys.iter().enumerate() {
            let x = (k + 1) as f64;
            sxy += (x - xm) * (y - ym);
            sxx += (x - xm) * (x - xm);
        }
        let slope = reward_slope(&ys).unwrap();
        assert!((slope - sxy / sxx).abs() < 1e-12);
        assert!((slope - -0.31).abs() < 1e-12);
    }

    #[test]
    fn adjustment_branches() {
        let mut a = AlphaState::new(&AlphaConfig::default()).unwrap();
        for r in [1.0, 2.0, 3.0] {
            a.record_episode_average(r);
        }
        assert!(!a.maybe_adjust());
        assert_eq!(a.alpha_m(), 1.0);
        assert_eq!(a.averages().len(), 3);

        let mut a = AlphaState::new(&AlphaConfig::default()).unwrap();
        a.record_episode_average(2.0);
        a.record_episode_average(1.0);
        assert!(a.maybe_adjust());
        assert!((a.alpha_m() - 1.05).abs() < 1e-15);
        assert_eq!(a.alpha_eps(), alpha_epsilon_of(a.alpha_m()));
        assert!(a.averages().is_empty());
    }

    #[test]
    fn capped_gain_stays_at_max() {
        let cfg = AlphaConfig { initial: 5.0, psi: 0.05, max: 5.0, capped: true };
        let mut a = AlphaState::new(&cfg).unwrap();
        a.record_episode_average(1.0);
        a.record_episode_average(0.0);
        assert!(a.maybe_adjust());
        assert_eq!(a.alpha_m(), 5.0);
    }

    #[test]
    fn seac_reward_examples() {
        let identity = SeacWeights { task: 1.0, energy: 0.0, time: 0.0 };
        assert_eq!(seac_baseline_reward(3.25, 0.4, &identity), 3.25);
        let w = SeacWeights { task: 1.0, energy: 0.1, time: 0.5 };
        assert!((seac_baseline_reward(0.0, 0.1, &w) + 0.15).abs() < 1e-15);
    }

    #[test]
    fn seac_matches_moseac_only_in_degenerate_case() {
        // D = D_min, alpha_m = w_task, w_energy = alpha_eps, w_time = 0
        let d_min = 0.02;
        let alpha_m = 1.3;
        let eps = alpha_epsilon_of(alpha_m);
        let w = SeacWeights { task: alpha_m, energy: eps, time: 0.0 };
        for r in [-30.0, 0.0, 0.7, 500.0] {
            let m = shape_reward(r, d_min, d_min, alpha_m, eps).unwrap();
            assert!((m - seac_baseline_reward(r, d_min, &w)).abs() < 1e-12);
            // any longer duration breaks the match for non-zero task reward
            if r != 0.0 {
                let m = shape_reward(r, 0.2, d_min, alpha_m, eps).unwrap();
                assert!((m - seac_baseline_reward(r, 0.2, &w)).abs() > 1e-6);
            }
        }
    }
}

//! Finite MDPs whose actions carry a duration, used to check the soft
//! Bellman operator numerically: contraction, unique fixed point, the
//! soft-versus-iterate value bound, policy improvement and the gain schedule.

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::alpha_epsilon_of;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {iterations} iterations (last change {change})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value table indexed `(state, action, duration index)`.
pub type QTable = Array3<f64>;

/// Policy table indexed `(state, action * durations + duration index)`.
pub type PolicyTable = Array2<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    pub states: usize,
    pub actions: usize,
    pub durations: Vec<f64>,
    pub min_duration: f64,
    /// `kernel[[s, a, d, s']]`
    pub kernel: ndarray::Array4<f64>,
    /// Task reward `R_t(s, a, D)`.
    pub reward: Array3<f64>,
    pub gamma: f64,
}

/// Reward-shaping constants applied inside the backup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shaping {
    pub alpha_m: f64,
    pub alpha_eps: f64,
}

impl Shaping {
    pub fn initial() -> Self {
        Self { alpha_m: 1.0, alpha_eps: alpha_epsilon_of(1.0) }
    }
}

impl TabularMDP {
    pub fn new(
        kernel: ndarray::Array4<f64>,
        reward: Array3<f64>,
        durations: Vec<f64>,
        min_duration: f64,
        gamma: f64,
    ) -> Result<Self, TheoryError> {
        let (s, a, d, s2) = kernel.dim();
        if s == 0 || a == 0 || d == 0 || s2 != s {
            return Err(TheoryError::Domain(format!("kernel shape {:?} is not (S, A, D, S)", kernel.dim())));
        }
        if reward.dim() != (s, a, d) || durations.len() != d {
            return Err(TheoryError::Domain("reward table or duration grid does not match the kernel".into()));
        }
        if !(gamma >= 0.0 && gamma < 1.0) {
            return Err(TheoryError::Domain(format!("discount {gamma} outside [0, 1)")));
        }
        if durations.iter().any(|&x| !(x >= min_duration) || !(min_duration > 0.0)) {
            return Err(TheoryError::Domain("durations must be at least the positive minimum".into()));
        }
        for row in kernel.lanes(Axis(3)) {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                return Err(TheoryError::Domain(format!("kernel row sums to {sum}")));
            }
        }
        Ok(Self { states: s, actions: a, durations, min_duration, kernel, reward, gamma })
    }

    /// Random kernel rows (normalized uniforms) and rewards uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(
        states: usize,
        actions: usize,
        durations: Vec<f64>,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self, TheoryError> {
        let d = durations.len();
        let mut kernel = ndarray::Array4::from_shape_simple_fn((states, actions, d, states), || rng.random::<f64>() + 1e-3);
        for mut row in kernel.lanes_mut(Axis(3)) {
            let sum: f64 = row.sum();
            row.mapv_inplace(|p| p / sum);
        }
        let reward = Array3::from_shape_simple_fn((states, actions, d), || rng.random_range(-1.0..=1.0));
        let min_duration = durations.iter().copied().fold(f64::INFINITY, f64::min);
        Self::new(kernel, reward, durations, min_duration, gamma)
    }

    pub fn pairs(&self) -> usize {
        self.actions * self.durations.len()
    }

    /// `alpha_m R_t (D_min / D) - alpha_eps` for every `(s, a, D)`.
    pub fn shaped_reward(&self, shaping: &Shaping) -> Array3<f64> {
        Array3::from_shape_fn(self.reward.dim(), |(s, a, d)| {
            shaping.alpha_m * self.reward[[s, a, d]] * self.min_duration / self.durations[d] - shaping.alpha_eps
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, TheoryError> {
        Self::new(self.kernel.clone(), self.reward.clone(), self.durations.clone(), self.min_duration, gamma)
    }

    pub fn scaled_rewards(&self, c: f64) -> Self {
        Self { reward: &self.reward * c, ..self.clone() }
    }

    pub fn zero_q(&self) -> QTable {
        QTable::zeros(self.reward.dim())
    }

    pub fn random_q<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> QTable {
        QTable::from_shape_simple_fn(self.reward.dim(), || rng.random_range(-scale..=scale))
    }
}

fn flat_row(q: &QTable, s: usize) -> Vec<f64> {
    q.index_axis(Axis(0), s).iter().copied().collect()
}

/// `V(s) = sum_j pi(j|s) (Q(s, j) - temperature log pi(j|s))`, with `0 log 0 = 0`.
pub fn soft_value(q: &QTable, pi: &PolicyTable, temperature: f64) -> Result<Vec<f64>, TheoryError> {
    let (s_n, a_n, d_n) = q.dim();
    if pi.dim() != (s_n, a_n * d_n) {
        return Err(TheoryError::Domain("policy shape does not match the value table".into()));
    }
    (0..s_n)
        .map(|s| {
            let row = pi.row(s);
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(TheoryError::Domain(format!("policy row {s} sums to {sum}")));
            }
            Ok(flat_row(q, s)
                .iter()
                .zip(row.iter())
                .map(|(&qv, &p)| if p > 0.0 { p * (qv - temperature * p.ln()) } else { 0.0 })
                .sum())
        })
        .collect()
}

/// Boltzmann policy `pi ∝ exp(Q / temperature)`; uniform over the maximizers
/// at temperature zero.
pub fn soft_greedy_policy(q: &QTable, temperature: f64) -> PolicyTable {
    let (s_n, a_n, d_n) = q.dim();
    let n = a_n * d_n;
    let mut pi = PolicyTable::zeros((s_n, n));
    for s in 0..s_n {
        let row = flat_row(q, s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if temperature > 0.0 {
            let w: Vec<f64> = row.iter().map(|&v| ((v - max) / temperature).exp()).collect();
            let z: f64 = w.iter().sum();
            for (j, wj) in w.iter().enumerate() {
                pi[[s, j]] = wj / z;
            }
        } else {
            let count = row.iter().filter(|&&v| v == max).count() as f64;
            for (j, &v) in row.iter().enumerate() {
                pi[[s, j]] = if v == max { 1.0 / count } else { 0.0 };
            }
        }
    }
    pi
}

/// Value of the soft-greedy policy: `temperature * logsumexp(Q / temperature)`
/// per state, or the maximum at temperature zero.
pub fn soft_max_value(q: &QTable, temperature: f64) -> Vec<f64> {
    (0..q.dim().0)
        .map(|s| {
            let row = flat_row(q, s);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if temperature > 0.0 {
                max + temperature * row.iter().map(|&v| ((v - max) / temperature).exp()).sum::<f64>().ln()
            } else {
                max
            }
        })
        .collect()
}

fn backup_with_values(mdp: &TabularMDP, shaped: &Array3<f64>, v: &[f64], ops: &mut u64) -> QTable {
    let s_n = mdp.states;
    let mut out = shaped.clone();
    for s in 0..s_n {
        for a in 0..mdp.actions {
            for d in 0..mdp.durations.len() {
                let mut ev = 0.0;
                for (s2, &vs2) in v.iter().enumerate() {
                    ev += mdp.kernel[[s, a, d, s2]] * vs2;
                }
                *ops += s_n as u64;
                out[[s, a, d]] += mdp.gamma * ev;
            }
        }
    }
    out
}

/// `(TQ)(s,a,D) = alpha_m R_t (D_min/D) - alpha_eps + gamma E[V(s')]` with `V` the
/// soft-greedy value of `Q`.
pub fn soft_bellman_backup(q: &QTable, mdp: &TabularMDP, shaping: &Shaping, temperature: f64) -> QTable {
    soft_bellman_backup_counted(q, mdp, shaping, temperature).0
}

/// Backup plus the number of elementary operations: one per state for the
/// value and one per kernel entry for the expectation, `S*N + S*N*S` with
/// `N = |A| |D|`.
pub fn soft_bellman_backup_counted(q: &QTable, mdp: &TabularMDP, shaping: &Shaping, temperature: f64) -> (QTable, u64) {
    let mut ops = (mdp.states * mdp.pairs()) as u64;
    let v = soft_max_value(q, temperature);
    let out = backup_with_values(mdp, &mdp.shaped_reward(shaping), &v, &mut ops);
    (out, ops)
}

pub fn sup_distance(a: &QTable, b: &QTable) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `||TQ1 - TQ2|| / ||Q1 - Q2||` in the sup norm; zero when `Q1 = Q2`.
pub fn contraction_ratio(q1: &QTable, q2: &QTable, mdp: &TabularMDP, shaping: &Shaping, temperature: f64) -> f64 {
    let den = sup_distance(q1, q2);
    if den == 0.0 {
        return 0.0;
    }
    let t1 = soft_bellman_backup(q1, mdp, shaping, temperature);
    let t2 = soft_bellman_backup(q2, mdp, shaping, temperature);
    sup_distance(&t1, &t2) / den
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub q: QTable,
    pub iterations: usize,
    /// `||TQ - Q||` of the returned table.
    pub residual: f64,
}

/// Iterates the backup until one step moves less than `tol * (1 - gamma)`,
/// which places the result within `tol` of the true fixed point.
pub fn solve_fixed_point(
    mdp: &TabularMDP,
    shaping: &Shaping,
    temperature: f64,
    tol: f64,
    init: QTable,
    max_iterations: usize,
) -> Result<FixedPoint, TheoryError> {
    if !(tol > 0.0) {
        return Err(TheoryError::Domain("tolerance must be positive".into()));
    }
    let threshold = tol * (1.0 - mdp.gamma);
    let mut q = init;
    let mut change = f64::INFINITY;
    for it in 1..=max_iterations {
        let next = soft_bellman_backup(&q, mdp, shaping, temperature);
        change = sup_distance(&next, &q);
        q = next;
        if change < threshold {
            let residual = sup_distance(&soft_bellman_backup(&q, mdp, shaping, temperature), &q);
            return Ok(FixedPoint { q, iterations: it, residual });
        }
    }
    Err(TheoryError::NoConvergence { iterations: max_iterations, change })
}

fn solve_linear(mut a: Array2<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, TheoryError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .expect("non-empty range");
        if a[[pivot, col]].abs() < 1e-300 {
            return Err(TheoryError::Domain("singular evaluation system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap([col, k], [pivot, k]);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = a[[r, col]] / a[[col, col]];
            if f != 0.0 {
                for k in col..n {
                    a[[r, k]] -= f * a[[col, k]];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[[r, k]] * x[k]).sum();
        x[r] = (b[r] - tail) / a[[r, r]];
    }
    Ok(x)
}

/// Entropy-regularized value of a fixed policy, solved exactly from
/// `(I - gamma P_pi) V = r_pi - temperature * E_pi[log pi]`.
pub fn evaluate_policy(mdp: &TabularMDP, shaping: &Shaping, pi: &PolicyTable, temperature: f64) -> Result<Vec<f64>, TheoryError> {
    let n = mdp.states;
    let d_n = mdp.durations.len();
    let shaped = mdp.shaped_reward(shaping);
    let mut a = Array2::<f64>::eye(n);
    let mut b = vec![0.0; n];
    for s in 0..n {
        for act in 0..mdp.actions {
            for d in 0..d_n {
                let p = pi[[s, act * d_n + d]];
                if p <= 0.0 {
                    continue;
                }
                b[s] += p * (shaped[[s, act, d]] - temperature * p.ln());
                for s2 in 0..n {
                    a[[s, s2]] -= mdp.gamma * p * mdp.kernel[[s, act, d, s2]];
                }
            }
        }
    }
    solve_linear(a, b)
}

/// `Q^pi` from the exact policy value.
pub fn policy_q(mdp: &TabularMDP, shaping: &Shaping, pi: &PolicyTable, temperature: f64) -> Result<QTable, TheoryError> {
    let v = evaluate_policy(mdp, shaping, pi, temperature)?;
    let mut ops = 0;
    Ok(backup_with_values(mdp, &mdp.shaped_reward(shaping), &v, &mut ops))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub iterations: usize,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
    /// Set when the bound collapses to zero and the comparison says nothing.
    pub degenerate: bool,
}

/// Compares the soft-greedy policy of `T^k 0` with that of the fixed point,
/// both evaluated exactly, against `2 T gamma log(|A| |D|) / (1 - gamma)^2`
/// where `|D|` is the grid size.
pub fn error_bound_check(
    mdp: &TabularMDP,
    shaping: &Shaping,
    temperature: f64,
    k: usize,
    tol: f64,
) -> Result<ErrorBoundReport, TheoryError> {
    let star = solve_fixed_point(mdp, shaping, temperature, tol, mdp.zero_q(), 1_000_000)?;
    let mut qk = mdp.zero_q();
    for _ in 0..k {
        qk = soft_bellman_backup(&qk, mdp, shaping, temperature);
    }
    let v_star = evaluate_policy(mdp, shaping, &soft_greedy_policy(&star.q, temperature), temperature)?;
    let v_k = evaluate_policy(mdp, shaping, &soft_greedy_policy(&qk, temperature), temperature)?;
    let measured = v_star.iter().zip(&v_k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bound = 2.0 * temperature * mdp.gamma * (mdp.pairs() as f64).ln() / (1.0 - mdp.gamma).powi(2);
    Ok(ErrorBoundReport { iterations: k, measured, bound, satisfied: measured <= bound, degenerate: bound == 0.0 })
}

/// Soft policy iteration from the uniform policy; returns `Q^{pi_k}` for
/// `k = 0..=iterations`.
pub fn soft_policy_iteration(
    mdp: &TabularMDP,
    shaping: &Shaping,
    temperature: f64,
    iterations: usize,
) -> Result<Vec<QTable>, TheoryError> {
    let n = mdp.pairs();
    let mut pi = PolicyTable::from_elem((mdp.states, n), 1.0 / n as f64);
    let mut out = Vec::with_capacity(iterations + 1);
    for _ in 0..=iterations {
        let q = policy_q(mdp, shaping, &pi, temperature)?;
        pi = soft_greedy_policy(&q, temperature);
        out.push(q);
    }
    Ok(out)
}

/// Largest decrease of any entry between consecutive tables (0 when monotone).
pub fn max_decrease(trace: &[QTable]) -> f64 {
    trace
        .windows(2)
        .flat_map(|w| w[0].iter().zip(w[1].iter()).map(|(a, b)| a - b).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub t: usize,
    pub alpha_m: f64,
    pub alpha_eps: f64,
}

/// `alpha_m(t) = min(alpha_m0 + rate t, alpha_max)` for `t = 0..=horizon`.
pub fn alpha_schedule_trace(alpha_m0: f64, rate: f64, alpha_max: f64, horizon: usize) -> Result<Vec<SchedulePoint>, TheoryError> {
    if !(rate >= 0.0) {
        return Err(TheoryError::Domain("rate must be non-negative".into()));
    }
    let crossing = if rate > 0.0 { (alpha_max - alpha_m0) / rate } else { f64::INFINITY };
    Ok((0..=horizon)
        .map(|t| {
            let alpha_m = if t as f64 >= crossing { alpha_max } else { (alpha_m0 + rate * t as f64).min(alpha_max) };
            SchedulePoint { t, alpha_m, alpha_eps: alpha_epsilon_of(alpha_m) }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    /// Largest `|shaped reward|` seen on the stream.
    pub observed: f64,
    pub candidate: f64,
    pub within: bool,
}

/// Shapes each raw reward with the gain at the same step and compares the
/// largest magnitude against `candidate`. `duration_factors` are `D_min / D`.
pub fn boundedness_check(
    rewards: &[f64],
    duration_factors: &[f64],
    trace: &[SchedulePoint],
    candidate: f64,
) -> Result<BoundednessReport, TheoryError> {
    if rewards.len() != trace.len() || duration_factors.len() != trace.len() {
        return Err(TheoryError::Domain("reward, duration and gain streams differ in length".into()));
    }
    let observed = rewards
        .iter()
        .zip(duration_factors)
        .zip(trace)
        .map(|((r, f), p)| (p.alpha_m * r * f - p.alpha_eps).abs())
        .fold(0.0, f64::max);
    Ok(BoundednessReport { observed, candidate, within: observed <= candidate })
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheck {
    pub name: String,
    pub parameters: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub mdps: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub durations: Vec<f64>,
    pub pairs_per_mdp: usize,
    pub gammas: Vec<f64>,
    pub temperature: f64,
    pub tol: f64,
    pub initializations: usize,
    pub scales: Vec<f64>,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            mdps: 20,
            max_states: 10,
            max_actions: 4,
            durations: vec![0.02, 0.1, 0.5],
            pairs_per_mdp: 1000,
            gammas: vec![0.5, 0.9, 0.99],
            temperature: 0.1,
            tol: 1e-10,
            initializations: 5,
            scales: vec![0.5, 2.0, 10.0],
            seed: 0,
        }
    }
}

fn random_mdps(cfg: &SuiteConfig, gamma: f64, rng: &mut crate::SimRng) -> Result<Vec<TabularMDP>, TheoryError> {
    (0..cfg.mdps)
        .map(|_| {
            let s = rng.random_range(2..=cfg.max_states.max(2));
            let a = rng.random_range(1..=cfg.max_actions.max(1));
            TabularMDP::random(s, a, cfg.durations.clone(), gamma, rng)
        })
        .collect()
}

/// Contraction ratios over random pairs: one check per discount.
pub fn contraction_suite(cfg: &SuiteConfig) -> Result<Vec<TheoryCheck>, TheoryError> {
    use rand::SeedableRng;
    let mut rng = crate::SimRng::seed_from_u64(cfg.seed);
    let shaping = Shaping::initial();
    let mut out = Vec::new();
    for &gamma in &cfg.gammas {
        let mut worst: f64 = 0.0;
        let mut count = 0usize;
        for mdp in random_mdps(cfg, gamma, &mut rng)? {
            for p in 0..cfg.pairs_per_mdp {
                let scale = [0.1, 1.0, 10.0, 100.0][p % 4];
                let q1 = mdp.random_q(scale, &mut rng);
                let q2 = mdp.random_q(scale, &mut rng);
                worst = worst.max(contraction_ratio(&q1, &q2, &mdp, &shaping, cfg.temperature));
                count += 1;
            }
        }
        out.push(TheoryCheck {
            name: "contraction".into(),
            parameters: format!("gamma={gamma} temperature={} mdps={} pairs={count}", cfg.temperature, cfg.mdps),
            measured: worst,
            bound: gamma + 1e-9,
            pass: worst <= gamma + 1e-9,
        });
    }
    Ok(out)
}

/// Agreement of fixed points reached from several random starts, plus the
/// worst residual.
pub fn fixed_point_suite(cfg: &SuiteConfig) -> Result<Vec<TheoryCheck>, TheoryError> {
    use rand::SeedableRng;
    let mut rng = crate::SimRng::seed_from_u64(cfg.seed.wrapping_add(1));
    let shaping = Shaping::initial();
    let mut out = Vec::new();
    for &gamma in &cfg.gammas {
        let (mut spread, mut residual): (f64, f64) = (0.0, 0.0);
        for mdp in random_mdps(cfg, gamma, &mut rng)? {
            let sols: Vec<FixedPoint> = (0..cfg.initializations)
                .map(|_| {
                    let init = mdp.random_q(50.0, &mut rng);
                    solve_fixed_point(&mdp, &shaping, cfg.temperature, cfg.tol, init, 1_000_000)
                })
                .collect::<Result<_, _>>()?;
            for (i, a) in sols.iter().enumerate() {
                residual = residual.max(a.residual);
                for b in &sols[i + 1..] {
                    spread = spread.max(sup_distance(&a.q, &b.q));
                }
            }
        }
        let params = format!("gamma={gamma} temperature={} inits={} tol={}", cfg.temperature, cfg.initializations, cfg.tol);
        out.push(TheoryCheck {
            name: "fixed_point_agreement".into(),
            parameters: params.clone(),
            measured: spread,
            bound: 10.0 * cfg.tol,
            pass: spread < 10.0 * cfg.tol,
        });
        out.push(TheoryCheck {
            name: "fixed_point_residual".into(),
            parameters: params,
            measured: residual,
            bound: cfg.tol,
            pass: residual < cfg.tol,
        });
    }
    Ok(out)
}

/// With no per-step penalty and zero temperature, scaling every task reward
/// by `c` scales the optimal values by `c`.
pub fn homogeneity_suite(cfg: &SuiteConfig) -> Result<Vec<TheoryCheck>, TheoryError> {
    use rand::SeedableRng;
    let mut rng = crate::SimRng::seed_from_u64(cfg.seed.wrapping_add(2));
    let shaping = Shaping { alpha_m: 1.0, alpha_eps: 0.0 };
    let tol = 1e-11;
    let mut out = Vec::new();
    let gamma = 0.9;
    let mdps = random_mdps(cfg, gamma, &mut rng)?;
    let base: Vec<QTable> = mdps
        .iter()
        .map(|m| solve_fixed_point(m, &shaping, 0.0, tol, m.zero_q(), 1_000_000).map(|f| f.q))
        .collect::<Result<_, _>>()?;
    for &c in &cfg.scales {
        let mut worst: f64 = 0.0;
        for (m, q) in mdps.iter().zip(&base) {
            let scaled = solve_fixed_point(&m.scaled_rewards(c), &shaping, 0.0, tol, m.zero_q(), 1_000_000)?;
            worst = worst.max(sup_distance(&scaled.q, &(q * c)));
        }
        out.push(TheoryCheck {
            name: "scaling_homogeneity".into(),
            parameters: format!("c={c} gamma={gamma} alpha_eps=0 temperature=0"),
            measured: worst,
            bound: 1e-9,
            pass: worst <= 1e-9,
        });
    }
    Ok(out)
}

/// Error bound, soft policy improvement and gain-schedule boundedness.
pub fn auxiliary_suite(cfg: &SuiteConfig) -> Result<Vec<TheoryCheck>, TheoryError> {
    use rand::SeedableRng;
    let mut rng = crate::SimRng::seed_from_u64(cfg.seed.wrapping_add(3));
    let shaping = Shaping::initial();
    let mut out = Vec::new();
    let mdp = TabularMDP::random(8, 3, cfg.durations.clone(), 0.9, &mut rng)?;
    for k in [1, 3, 10, 50] {
        let r = error_bound_check(&mdp, &shaping, cfg.temperature, k, 1e-10)?;
        out.push(TheoryCheck {
            name: "error_bound".into(),
            parameters: format!("states=8 gamma=0.9 temperature={} k={k}", cfg.temperature),
            measured: r.measured,
            bound: r.bound,
            pass: r.satisfied,
        });
    }
    let mut worst_drop: f64 = 0.0;
    for m in random_mdps(cfg, 0.9, &mut rng)? {
        worst_drop = worst_drop.max(max_decrease(&soft_policy_iteration(&m, &shaping, cfg.temperature, 10)?));
    }
    out.push(TheoryCheck {
        name: "policy_improvement".into(),
        parameters: format!("mdps={} gamma=0.9 temperature={} iterations=10", cfg.mdps, cfg.temperature),
        measured: worst_drop,
        bound: 1e-9,
        pass: worst_drop <= 1e-9,
    });
    let horizon = 400;
    let rewards: Vec<f64> = (0..=horizon).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let factors: Vec<f64> = (0..=horizon).map(|_| rng.random_range(0.04..=1.0)).collect();
    let capped = alpha_schedule_trace(1.0, 0.05, 5.0, horizon)?;
    let r = boundedness_check(&rewards, &factors, &capped, 5.0 + 0.2)?;
    out.push(TheoryCheck {
        name: "shaped_reward_bounded".into(),
        parameters: format!("alpha_m0=1 rate=0.05 alpha_max=5 horizon={horizon} |R_t|<=1"),
        measured: r.observed,
        bound: r.candidate,
        pass: r.within,
    });
    let uncapped = alpha_schedule_trace(1.0, 0.05, f64::INFINITY, horizon)?;
    let r = boundedness_check(&rewards, &factors, &uncapped, 5.0 + 0.2)?;
    out.push(TheoryCheck {
        name: "shaped_reward_uncapped".into(),
        parameters: format!("alpha_m0=1 rate=0.05 uncapped horizon={horizon} |R_t|<=1 (informational)"),
        measured: r.observed,
        bound: r.candidate,
        pass: true,
    });
    Ok(out)
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<TheoryCheck>, TheoryError> {
    let mut all = contraction_suite(cfg)?;
    all.extend(fixed_point_suite(cfg)?);
    all.extend(homogeneity_suite(cfg)?);
    all.extend(auxiliary_suite(cfg)?);
    Ok(all)
}

pub fn write_report_csv<W: std::io::Write>(checks: &[TheoryCheck], w: W) -> Result<(), TheoryError> {
    let mut out = csv::Writer::from_writer(w);
    for c in checks {
        out.serialize(c)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> crate::SimRng {
        crate::SimRng::seed_from_u64(seed)
    }

    fn grid() -> Vec<f64> {
        vec![0.02, 0.1, 0.5]
    }

    #[test]
    fn soft_value_examples() {
        let q = QTable::from_elem((2, 2, 3), 4.0);
        let uniform = PolicyTable::from_elem((2, 6), 1.0 / 6.0);
        for v in soft_value(&q, &uniform, 0.0).unwrap() {
            assert!((v - 4.0).abs() < 1e-12);
        }
        let zero = QTable::zeros((2, 2, 3));
        for v in soft_value(&zero, &uniform, 0.3).unwrap() {
            assert!((v - 0.3 * 6f64.ln()).abs() < 1e-12);
        }
        let bad = PolicyTable::from_elem((2, 6), 0.2);
        assert!(soft_value(&q, &bad, 0.1).is_err());
    }

    #[test]
    fn soft_value_matches_summation() {
        let mut r = rng(1);
        let mdp = TabularMDP::random(4, 2, grid(), 0.9, &mut r).unwrap();
        let q = mdp.random_q(3.0, &mut r);
        let mut pi = PolicyTable::from_shape_simple_fn((4, 6), || r.random::<f64>());
        for mut row in pi.rows_mut() {
            let s: f64 = row.sum();
            row.mapv_inplace(|p| p / s);
        }
        let v = soft_value(&q, &pi, 0.25).unwrap();
        for s in 0..4 {
            let mut acc = 0.0;
            for a in 0..2 {
                for d in 0..3 {
                    let p = pi[[s, a * 3 + d]];
                    acc += p * q[[s, a, d]] - 0.25 * p * p.ln();
                }
            }
            assert!((v[s] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_policy_value_equals_log_sum_exp() {
        let mut r = rng(2);
        let mdp = TabularMDP::random(3, 2, grid(), 0.9, &mut r).unwrap();
        let q = mdp.random_q(2.0, &mut r);
        let pi = soft_greedy_policy(&q, 0.4);
        let a = soft_value(&q, &pi, 0.4).unwrap();
        let b = soft_max_value(&q, 0.4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_discount_backup_is_shaped_reward() {
        let mut r = rng(3);
        let mdp = TabularMDP::random(4, 3, grid(), 0.0, &mut r).unwrap();
        let q = mdp.random_q(5.0, &mut r);
        let sh = Shaping::initial();
        assert_eq!(soft_bellman_backup(&q, &mdp, &sh, 0.2), mdp.shaped_reward(&sh));
        let q2 = mdp.random_q(5.0, &mut r);
        assert_eq!(contraction_ratio(&q, &q2, &mdp, &sh, 0.2), 0.0);
        assert_eq!(contraction_ratio(&q, &q, &mdp, &sh, 0.2), 0.0);
    }

    #[test]
    fn single_pair_fixed_point_is_geometric_series() {
        let kernel = ndarray::Array4::from_elem((1, 1, 1, 1), 1.0);
        let reward = Array3::from_elem((1, 1, 1), 2.0);
        let mdp = TabularMDP::new(kernel, reward, vec![0.04], 0.02, 0.8).unwrap();
        let sh = Shaping::initial();
        let r_shaped = 1.0 * 2.0 * 0.5 - 0.1;
        let fp = solve_fixed_point(&mdp, &sh, 0.0, 1e-12, mdp.zero_q(), 100_000).unwrap();
        assert!((fp.q[[0, 0, 0]] - r_shaped / 0.2).abs() < 1e-10);
        assert!(fp.residual < 1e-12);
    }

    #[test]
    fn backup_matches_brute_force() {
        let mut r = rng(4);
        let mdp = TabularMDP::random(5, 2, grid(), 0.9, &mut r).unwrap();
        let q = mdp.random_q(3.0, &mut r);
        let sh = Shaping { alpha_m: 1.3, alpha_eps: alpha_epsilon_of(1.3) };
        let temp = 0.2;
        let (t, ops) = soft_bellman_backup_counted(&q, &mdp, &sh, temp);
        assert_eq!(ops, (5 * 6 + 5 * 6 * 5) as u64);
        let v: Vec<f64> = (0..5)
            .map(|s| {
                let z: f64 = q.index_axis(Axis(0), s).iter().map(|x| (x / temp).exp()).sum();
                temp * z.ln()
            })
            .collect();
        for s in 0..5 {
            for a in 0..2 {
                for d in 0..3 {
                    let shaped = 1.3 * mdp.reward[[s, a, d]] * 0.02 / mdp.durations[d] - sh.alpha_eps;
                    let ev: f64 = (0..5).map(|s2| mdp.kernel[[s, a, d, s2]] * v[s2]).sum();
                    assert!((t[[s, a, d]] - (shaped + 0.9 * ev)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn random_pairs_contract() {
        let mut r = rng(5);
        let sh = Shaping::initial();
        let mdp = TabularMDP::random(6, 3, grid(), 0.9, &mut r).unwrap();
        for _ in 0..1000 {
            let q1 = mdp.random_q(10.0, &mut r);
            let q2 = mdp.random_q(10.0, &mut r);
            assert!(contraction_ratio(&q1, &q2, &mdp, &sh, 0.1) <= 0.9 + 1e-9);
        }
    }

    #[test]
    fn fixed_points_agree_across_starts() {
        let mut r = rng(6);
        let mdp = TabularMDP::random(5, 2, grid(), 0.9, &mut r).unwrap();
        let sh = Shaping::initial();
        let a = solve_fixed_point(&mdp, &sh, 0.1, 1e-10, mdp.random_q(20.0, &mut r), 100_000).unwrap();
        let b = solve_fixed_point(&mdp, &sh, 0.1, 1e-10, mdp.random_q(20.0, &mut r), 100_000).unwrap();
        assert!(sup_distance(&a.q, &b.q) < 1e-9);
        assert!(a.residual < 1e-10 && b.residual < 1e-10);
        assert!(matches!(
            solve_fixed_point(&mdp, &sh, 0.1, 1e-10, mdp.zero_q(), 2),
            Err(TheoryError::NoConvergence { .. })
        ));
    }

    #[test]
    fn soft_fixed_point_is_policy_value() {
        let mut r = rng(7);
        let mdp = TabularMDP::random(4, 2, grid(), 0.8, &mut r).unwrap();
        let sh = Shaping::initial();
        let fp = solve_fixed_point(&mdp, &sh, 0.3, 1e-12, mdp.zero_q(), 100_000).unwrap();
        let q = policy_q(&mdp, &sh, &soft_greedy_policy(&fp.q, 0.3), 0.3).unwrap();
        assert!(sup_distance(&q, &fp.q) < 1e-9);
    }

    #[test]
    fn error_bound_examples() {
        let mut r = rng(8);
        let mdp = TabularMDP::random(8, 3, grid(), 0.9, &mut r).unwrap();
        let sh = Shaping::initial();
        let rep = error_bound_check(&mdp, &sh, 0.1, 3, 1e-10).unwrap();
        assert!(rep.satisfied && !rep.degenerate);
        let late = error_bound_check(&mdp, &sh, 0.1, 400, 1e-10).unwrap();
        assert!(late.measured < 1e-9);
        let hard = error_bound_check(&mdp, &sh, 0.0, 3, 1e-10).unwrap();
        assert!(hard.degenerate && hard.bound == 0.0);
    }

    #[test]
    fn soft_policy_iteration_improves() {
        let mut r = rng(9);
        for _ in 0..5 {
            let mdp = TabularMDP::random(6, 3, grid(), 0.9, &mut r).unwrap();
            let trace = soft_policy_iteration(&mdp, &Shaping::initial(), 0.2, 8).unwrap();
            assert!(max_decrease(&trace) <= 1e-9);
        }
    }

    #[test]
    fn schedule_examples() {
        let tr = alpha_schedule_trace(1.0, 0.1, 2.0, 30).unwrap();
        assert_eq!(tr[0].alpha_m, 1.0);
        assert!((tr[5].alpha_m - 1.5).abs() < 1e-15);
        assert!(tr[10..].iter().all(|p| p.alpha_m == 2.0));
        assert!(tr.iter().all(|p| p.alpha_eps == alpha_epsilon_of(p.alpha_m)));
        assert!(alpha_schedule_trace(1.0, -0.1, 2.0, 3).is_err());
    }

    #[test]
    fn boundedness_examples() {
        let tr = alpha_schedule_trace(1.0, 0.5, 3.0, 20).unwrap();
        let zeros = vec![0.0; 21];
        let ones = vec![1.0; 21];
        let r = boundedness_check(&zeros, &ones, &tr, 0.2).unwrap();
        assert!(r.within && r.observed <= 0.2);
        let mut r2 = rng(10);
        let rewards: Vec<f64> = (0..21).map(|_| r2.random_range(-1.0..=1.0)).collect();
        let r = boundedness_check(&rewards, &ones, &tr, 3.0 + 0.2).unwrap();
        assert!(r.within);
        let up = alpha_schedule_trace(1.0, 0.5, f64::INFINITY, 20).unwrap();
        let r = boundedness_check(&vec![-1.0; 21], &ones, &up, 3.2).unwrap();
        assert!(!r.within);
    }

    #[test]
    fn rejects_bad_kernel() {
        let kernel = ndarray::Array4::from_elem((1, 1, 1, 1), 0.9);
        let reward = Array3::zeros((1, 1, 1));
        assert!(TabularMDP::new(kernel, reward, vec![0.1], 0.02, 0.9).is_err());
    }
}

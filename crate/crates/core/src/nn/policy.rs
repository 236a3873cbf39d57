//! Tanh-squashed diagonal Gaussian over a box of per-dimension bounds.
//!
//! The policy network emits `2k` raw values: `k` means followed by `k`
//! log-standard-deviations. A sample is drawn in the unbounded space as
//! `u = mean + std * eps`, squashed with `tanh` to `y in (-1, 1)` and mapped
//! affinely onto `[low, high]`. The log-density of the final value carries the
//! change-of-variables terms of both the squash and the affine map.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::NnError;

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct SquashedGaussian {
    bounds: Vec<(f64, f64)>,
    log_std_min: f64,
    log_std_max: f64,
}

/// One reparameterised draw together with the partial derivatives the actor
/// update needs. All derivative vectors are indexed by output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    /// Pre-squash Gaussian draw.
    pub unsquashed: Vec<f64>,
    /// `tanh(unsquashed)`, in `(-1, 1)`.
    pub normalized: Vec<f64>,
    /// Value in `[low, high]` per dimension.
    pub value: Vec<f64>,
    pub log_prob: f64,
    /// d normalized_i / d mean_i
    pub dnorm_dmean: Vec<f64>,
    /// d normalized_i / d raw_log_std_i (zero where the clamp is active)
    pub dnorm_dlogstd: Vec<f64>,
    /// d log_prob / d mean_i
    pub dlogp_dmean: Vec<f64>,
    /// d log_prob / d raw_log_std_i
    pub dlogp_dlogstd: Vec<f64>,
}

impl SquashedGaussian {
    pub fn new(bounds: Vec<(f64, f64)>, log_std_min: f64, log_std_max: f64) -> Result<Self, NnError> {
        if bounds.is_empty() {
            return Err(NnError::Dimension("policy head needs at least one dimension".into()));
        }
        if let Some((i, _)) = bounds.iter().enumerate().find(|(_, (lo, hi))| !(lo < hi)) {
            return Err(NnError::Dimension(format!("bound {i} has low >= high")));
        }
        if !(log_std_min < log_std_max) {
            return Err(NnError::Dimension("log-std clamp range is empty".into()));
        }
        Ok(Self { bounds, log_std_min, log_std_max })
    }

    /// Default clamp of `[-20, 2]` on the log standard deviation.
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Result<Self, NnError> {
        Self::new(bounds, -20.0, 2.0)
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    /// Width of the network output this head consumes.
    pub fn raw_dims(&self) -> usize {
        2 * self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn log_std_range(&self) -> (f64, f64) {
        (self.log_std_min, self.log_std_max)
    }

    fn scale(&self, i: usize) -> f64 {
        0.5 * (self.bounds[i].1 - self.bounds[i].0)
    }

    pub fn denormalize(&self, i: usize, y: f64) -> f64 {
        let (lo, hi) = self.bounds[i];
        (lo + (y + 1.0) * self.scale(i)).clamp(lo, hi)
    }

    pub fn normalize(&self, i: usize, value: f64) -> f64 {
        let (lo, _) = self.bounds[i];
        ((value - lo) / self.scale(i) - 1.0).clamp(-1.0, 1.0)
    }

    fn check(&self, raw: &[f64]) -> Result<(), NnError> {
        if raw.len() != self.raw_dims() {
            return Err(NnError::Dimension(format!(
                "policy head expects {} raw outputs, got {}",
                self.raw_dims(),
                raw.len()
            )));
        }
        Ok(())
    }

    pub fn clamp_log_std(&self, raw: f64) -> f64 {
        raw.clamp(self.log_std_min, self.log_std_max)
    }

    /// Squashed mean: the deterministic action.
    pub fn mode(&self, raw: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        self.check(raw)?;
        let k = self.dims();
        let normalized: Vec<f64> = raw[..k].iter().map(|m| m.tanh()).collect();
        let value = normalized.iter().enumerate().map(|(i, &y)| self.denormalize(i, y)).collect();
        Ok((normalized, value))
    }

    pub fn sample<R: Rng + ?Sized>(&self, raw: &[f64], rng: &mut R) -> Result<SquashedSample, NnError> {
        let noise: Vec<f64> = (0..self.dims()).map(|_| StandardNormal.sample(rng)).collect();
        self.sample_with_noise(raw, &noise)
    }

    /// Deterministic transform of standard-normal `noise` into a sample.
    pub fn sample_with_noise(&self, raw: &[f64], noise: &[f64]) -> Result<SquashedSample, NnError> {
        self.check(raw)?;
        let k = self.dims();
        if noise.len() != k {
            return Err(NnError::Dimension(format!("expected {k} noise values, got {}", noise.len())));
        }
        let mut s = SquashedSample {
            unsquashed: Vec::with_capacity(k),
            normalized: Vec::with_capacity(k),
            value: Vec::with_capacity(k),
            log_prob: 0.0,
            dnorm_dmean: Vec::with_capacity(k),
            dnorm_dlogstd: Vec::with_capacity(k),
            dlogp_dmean: Vec::with_capacity(k),
            dlogp_dlogstd: Vec::with_capacity(k),
        };
        for i in 0..k {
            let mean = raw[i];
            let raw_ls = raw[k + i];
            let log_std = self.clamp_log_std(raw_ls);
            let clamp_active = raw_ls < self.log_std_min || raw_ls > self.log_std_max;
            let std = log_std.exp();
            let eps = noise[i];
            let u = mean + std * eps;
            let y = u.tanh();
            let jac = 1.0 - y * y;
            s.log_prob += -0.5 * eps * eps - log_std - LOG_SQRT_2PI
                - log_one_minus_tanh_sq(u)
                - self.scale(i).ln();
            s.unsquashed.push(u);
            s.normalized.push(y);
            s.value.push(self.denormalize(i, y));
            // d(-log(1 - tanh^2 u))/du = 2 tanh u
            let dlogp_du = 2.0 * y;
            s.dnorm_dmean.push(jac);
            s.dlogp_dmean.push(dlogp_du);
            if clamp_active {
                s.dnorm_dlogstd.push(0.0);
                s.dlogp_dlogstd.push(0.0);
            } else {
                s.dnorm_dlogstd.push(jac * std * eps);
                s.dlogp_dlogstd.push(-1.0 + dlogp_du * std * eps);
            }
        }
        Ok(s)
    }
}

/// `log(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_mode_is_rescaled_tanh_mean() {
        let head = SquashedGaussian::with_bounds(vec![(-1.0, 1.0), (0.02, 0.5)]).unwrap();
        let (y, v) = head.mode(&[0.3, -0.7, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.3f64.tanh(), (-0.7f64).tanh()]);
        assert!((v[1] - (0.02 + ((-0.7f64).tanh() + 1.0) * 0.24)).abs() < 1e-15);
        let (_, zero) = head.mode(&[0.0; 4]).unwrap();
        assert_eq!(zero, vec![0.0, 0.26]);
    }

    #[test]
    fn zero_draw_log_prob_matches_change_of_variables() {
        let head = SquashedGaussian::with_bounds(vec![(0.02, 0.5)]).unwrap();
        let s = head.sample_with_noise(&[0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(s.value[0], 0.26);
        // log N(0 | 0, 1) - log(1 - tanh(0)^2) - log(scale)
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.0 - (0.24f64).ln();
        assert!((s.log_prob - expected).abs() < 1e-14);
    }

    #[test]
    fn log_one_minus_tanh_sq_is_stable() {
        for &u in &[0.0, 0.5, -2.0, 5.0] {
            let direct = (1.0 - (u as f64).tanh().powi(2)).ln();
            assert!((log_one_minus_tanh_sq(u) - direct).abs() < 1e-10);
        }
        assert!(log_one_minus_tanh_sq(400.0).is_finite());
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(SquashedGaussian::with_bounds(vec![(1.0, -1.0)]).is_err());
    }

    #[test]
    fn samples_respect_bounds() {
        let head = SquashedGaussian::with_bounds(vec![(-1.0, 1.0), (-1.0, 1.0), (0.02, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let s = head.sample(&[2.5, -3.0, 0.4, 1.5, 1.9, -0.2], &mut rng).unwrap();
            assert!(s.log_prob.is_finite());
            for (i, v) in s.value.iter().enumerate() {
                let (lo, hi) = head.bounds()[i];
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let head = SquashedGaussian::with_bounds(vec![(-1.0, 1.0), (0.02, 0.5)]).unwrap();
        let raw = [0.4, -0.9, -0.3, 0.2];
        let noise = [0.7, -1.1];
        let s = head.sample_with_noise(&raw, &noise).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            for (col, dn, dl) in [
                (i, s.dnorm_dmean[i], s.dlogp_dmean[i]),
                (2 + i, s.dnorm_dlogstd[i], s.dlogp_dlogstd[i]),
            ] {
                let mut plus = raw;
                let mut minus = raw;
                plus[col] += h;
                minus[col] -= h;
                let sp = head.sample_with_noise(&plus, &noise).unwrap();
                let sm = head.sample_with_noise(&minus, &noise).unwrap();
                let fd_n = (sp.normalized[i] - sm.normalized[i]) / (2.0 * h);
                let fd_l = (sp.log_prob - sm.log_prob) / (2.0 * h);
                assert!((fd_n - dn).abs() < 1e-7, "dnorm col {col}: {fd_n} vs {dn}");
                assert!((fd_l - dl).abs() < 1e-6, "dlogp col {col}: {fd_l} vs {dl}");
            }
        }
    }
}

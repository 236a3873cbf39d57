//! Point-mass Ackermann vehicle with friction and power terms.
//!
//! Per command held for `dt` seconds:
//!
//! ```text
//! a_net = P / M + (V_target - V) / dt - mu_k * g
//! V'    = clamp(V + a_net * dt, -V_max, V_max)
//! theta'= theta + (V' / L) * tan(steer) * dt      (bicycle heading law)
//! X'    = X + V' * cos(theta') * dt
//! Y'    = Y + V' * sin(theta') * dt
//! ```

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::SimError;

pub const GRAVITY: f64 = 9.81;
pub const MASS: f64 = 4.2;
pub const WHEELBASE: f64 = 0.204;
pub const MAX_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Kinetic friction coefficient.
    pub mu_k: f64,
    /// Power factor in newtons; may be negative.
    pub power: f64,
}

impl PhysicalParams {
    pub const fn new(mu_k: f64, power: f64) -> Self {
        Self { mu_k, power }
    }
}

/// One held command: duration in seconds, target speed in m/s and a
/// normalised steering value in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub duration: f64,
    pub linear: f64,
    pub angular: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
    pub last_command: Command,
}

impl RobotState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadingModel {
    /// `theta += V'/L * tan(cmd * max_steer) * dt`
    Bicycle { max_steer: f64 },
    /// `theta += cmd * max_rate * dt`
    AngularRate { max_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    /// Friction always subtracts `mu_k * g`, exactly as the update formula reads.
    Raw,
    /// Friction opposes motion and stops at zero speed instead of reversing it.
    NoReversal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleModel {
    pub heading: HeadingModel,
    pub friction: FrictionMode,
    pub max_speed: f64,
    pub wheelbase: f64,
    pub mass: f64,
    pub gravity: f64,
}

impl Default for VehicleModel {
    fn default() -> Self {
        Self {
            heading: HeadingModel::Bicycle { max_steer: 0.48 },
            friction: FrictionMode::NoReversal,
            max_speed: MAX_SPEED,
            wheelbase: WHEELBASE,
            mass: MASS,
            gravity: GRAVITY,
        }
    }
}

impl VehicleModel {
    pub fn raw() -> Self {
        Self { friction: FrictionMode::Raw, ..Self::default() }
    }

    pub fn net_acceleration(&self, v: f64, cmd: &Command, p: &PhysicalParams) -> f64 {
        p.power / self.mass + (cmd.linear - v) / cmd.duration - p.mu_k * self.gravity
    }

    pub fn step(&self, state: &RobotState, cmd: &Command, p: &PhysicalParams) -> Result<RobotState, SimError> {
        Ok(self.step_with_jacobian(state, cmd, p)?.0)
    }

    /// Next state plus `d(X', Y') / d(mu_k, P)` as `[[dX/dmu, dX/dP], [dY/dmu, dY/dP]]`.
    pub fn step_with_jacobian(
        &self,
        state: &RobotState,
        cmd: &Command,
        p: &PhysicalParams,
    ) -> Result<(RobotState, [[f64; 2]; 2]), SimError> {
        let dt = cmd.duration;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::Domain(format!("control duration must be positive, got {dt}")));
        }
        let g = self.gravity;
        let (v_unclamped, dv_dmu, dv_dp) = match self.friction {
            FrictionMode::Raw => {
                let a_net = self.net_acceleration(state.v, cmd, p);
                (state.v + a_net * dt, -g * dt, dt / self.mass)
            }
            FrictionMode::NoReversal => {
                let driven = state.v + (p.power / self.mass + (cmd.linear - state.v) / dt) * dt;
                let loss = p.mu_k * g * dt;
                if driven.abs() > loss {
                    let s = driven.signum();
                    (driven - s * loss, -s * g * dt, dt / self.mass)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        };
        let (v, dv_dmu, dv_dp) = if v_unclamped.abs() > self.max_speed {
            (v_unclamped.signum() * self.max_speed, 0.0, 0.0)
        } else {
            (v_unclamped, dv_dmu, dv_dp)
        };
        let (theta, dtheta_dv) = match self.heading {
            HeadingModel::Bicycle { max_steer } => {
                let k = (cmd.angular * max_steer).tan() / self.wheelbase * dt;
                (state.theta + v * k, k)
            }
            HeadingModel::AngularRate { max_rate } => (state.theta + cmd.angular * max_rate * dt, 0.0),
        };
        let (s, c) = theta.sin_cos();
        let next = RobotState {
            x: state.x + v * c * dt,
            y: state.y + v * s * dt,
            v,
            theta: wrap_angle(theta),
            last_command: *cmd,
        };
        let dx_dv = dt * (c - v * s * dtheta_dv);
        let dy_dv = dt * (s + v * c * dtheta_dv);
        let jac = [[dx_dv * dv_dmu, dx_dv * dv_dp], [dy_dv * dv_dmu, dy_dv * dv_dp]];
        Ok((next, jac))
    }
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Spatially varying ground truth for `(mu_k, P)`: one friction coefficient
/// and one power gain per map quadrant, with `P = gain * (V_target - V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamField {
    /// Quadrants ordered (+x,+y), (-x,+y), (-x,-y), (+x,-y).
    pub mu_k: [f64; 4],
    pub power_gain: [f64; 4],
}

impl Default for ParamField {
    fn default() -> Self {
        Self { mu_k: [0.03, 0.05, 0.08, 0.06], power_gain: [0.4, 0.2, 0.1, 0.3] }
    }
}

impl ParamField {
    pub fn constant(mu_k: f64, power_gain: f64) -> Self {
        Self { mu_k: [mu_k; 4], power_gain: [power_gain; 4] }
    }

    /// A different field used to emulate a change of floor surface.
    pub fn shifted() -> Self {
        Self { mu_k: [0.07, 0.03, 0.05, 0.09], power_gain: [0.1, 0.45, 0.3, 0.2] }
    }

    pub fn quadrant(x: f64, y: f64) -> usize {
        match (x >= 0.0, y >= 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        }
    }

    pub fn params_at(&self, state: &RobotState, cmd: &Command) -> PhysicalParams {
        let q = Self::quadrant(state.x, state.y);
        PhysicalParams::new(self.mu_k[q], self.power_gain[q] * (cmd.linear - state.v))
    }

    pub fn mean_params(&self, state: &RobotState, cmd: &Command) -> PhysicalParams {
        let mu = self.mu_k.iter().sum::<f64>() / 4.0;
        let gain = self.power_gain.iter().sum::<f64>() / 4.0;
        PhysicalParams::new(mu, gain * (cmd.linear - state.v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(duration: f64, linear: f64, angular: f64) -> Command {
        Command { duration, linear, angular }
    }

    #[test]
    fn equilibrium_cruise_goes_straight() {
        let m = VehicleModel::raw();
        let s = RobotState { x: 0.1, y: -0.2, v: 0.6, theta: 0.0, ..Default::default() };
        let n = m.step(&s, &cmd(0.25, 0.6, 0.0), &PhysicalParams::new(0.0, 0.0)).unwrap();
        assert_eq!(n.v, 0.6);
        assert!((n.x - (0.1 + 0.6 * 0.25)).abs() < 1e-15);
        assert_eq!(n.y, -0.2);
    }

    #[test]
    fn raw_friction_reverses_a_resting_robot() {
        let m = VehicleModel::raw();
        let s = RobotState::default();
        let c = cmd(0.1, 0.0, 0.0);
        let p = PhysicalParams::new(0.1, 0.0);
        assert!((m.net_acceleration(0.0, &c, &p) + 0.981).abs() < 1e-12);
        let n = m.step(&s, &c, &p).unwrap();
        assert!((n.v + 0.0981).abs() < 1e-12);
    }

    #[test]
    fn friction_does_not_reverse_in_default_mode() {
        let m = VehicleModel::default();
        let n = m
            .step(&RobotState::default(), &cmd(0.1, 0.0, 0.0), &PhysicalParams::new(0.1, 0.0))
            .unwrap();
        assert_eq!(n.v, 0.0);
        assert_eq!(n.position(), Vec2::new(0.0, 0.0));
        // moving backwards, friction slows toward zero
        let back = RobotState { v: -0.5, ..Default::default() };
        let n = m.step(&back, &cmd(0.1, -0.5, 0.0), &PhysicalParams::new(0.1, 0.0)).unwrap();
        assert!((n.v - (-0.5 + 0.0981)).abs() < 1e-12);
    }

    #[test]
    fn hand_worked_step() {
        let m = VehicleModel::raw();
        let s = RobotState { x: 0.2, y: 0.1, v: 0.5, theta: 0.3, ..Default::default() };
        let c = cmd(0.1, 1.0, 0.5);
        let p = PhysicalParams::new(0.05, 2.1);
        let a = m.net_acceleration(s.v, &c, &p);
        assert!((a - 5.0095).abs() < 1e-12);
        let n = m.step(&s, &c, &p).unwrap();
        // 0.5 + 5.0095 * 0.1 = 1.00095 exceeds the 1 m/s limit
        assert_eq!(n.v, 1.0);
        let theta = 0.3 + 1.0 / 0.204 * (0.5f64 * 0.48).tan() * 0.1;
        assert!((n.theta - theta).abs() < 1e-15);
        assert!((n.x - (0.2 + theta.cos() * 0.1)).abs() < 1e-15);
        assert!((n.y - (0.1 + theta.sin() * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn frictionless_step_reaches_target_speed() {
        let m = VehicleModel::raw();
        for &(v, target, dt) in &[(0.0, 0.8, 0.02), (0.9, -0.3, 0.5), (-0.2, 0.1, 0.13)] {
            let s = RobotState { v, ..Default::default() };
            let n = m.step(&s, &cmd(dt, target, 0.3), &PhysicalParams::new(0.0, 0.0)).unwrap();
            assert!((n.v - target).abs() < 1e-15);
        }
    }

    #[test]
    fn non_positive_duration_is_a_domain_error() {
        let m = VehicleModel::default();
        let r = m.step(&RobotState::default(), &cmd(0.0, 0.5, 0.0), &PhysicalParams::new(0.0, 0.0));
        assert!(matches!(r, Err(SimError::Domain(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = RobotState { x: 0.3, y: -0.4, v: 0.2, theta: 1.1, ..Default::default() };
        let c = cmd(0.37, 0.7, -0.6);
        for model in [VehicleModel::raw(), VehicleModel::default()] {
            let p = PhysicalParams::new(0.04, 0.3);
            let (_, jac) = model.step_with_jacobian(&s, &c, &p).unwrap();
            let h = 1e-7;
            for k in 0..2 {
                let mut hi = p;
                let mut lo = p;
                if k == 0 {
                    hi.mu_k += h;
                    lo.mu_k -= h;
                } else {
                    hi.power += h;
                    lo.power -= h;
                }
                let a = model.step(&s, &c, &hi).unwrap();
                let b = model.step(&s, &c, &lo).unwrap();
                assert!(((a.x - b.x) / (2.0 * h) - jac[0][k]).abs() < 1e-7);
                assert!(((a.y - b.y) / (2.0 * h) - jac[1][k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn angular_rate_heading_mode() {
        let m = VehicleModel { heading: HeadingModel::AngularRate { max_rate: 2.0 }, ..VehicleModel::raw() };
        let n = m
            .step(&RobotState::default(), &cmd(0.1, 0.5, 0.5), &PhysicalParams::new(0.0, 0.0))
            .unwrap();
        assert!((n.theta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }
}

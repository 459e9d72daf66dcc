use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    /// Per second.
    pub ki: f64,
    /// Seconds.
    pub kd: f64,
    /// Actuation limits (rad).
    pub out_min: f64,
    pub out_max: f64,
}

impl Default for PidGains {
    /// Gains tuned for the default lock parameters (error normalized by `G`).
    fn default() -> Self {
        Self { kp: 1.0, ki: 1000.0, kd: 0.0, out_min: -20.0, out_max: 20.0 }
    }
}

impl PidGains {
    pub fn zero() -> Self {
        Self { kp: 0.0, ki: 0.0, kd: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.kp, self.ki, self.kd, self.out_min, self.out_max].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("PID gains and limits must be finite".into()));
        }
        if self.out_min > self.out_max {
            return Err(Error::InvalidParameter(format!("PID limits out of order: {} > {}", self.out_min, self.out_max)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One servo step. The integral only accumulates while the output is inside
/// the limits, or when the error drives it back inside.
pub fn pid_update(state: &PidState, gains: &PidGains, error: f64, dt: f64) -> Result<(PidState, f64)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("PID step must be > 0, got {dt}")));
    }
    let deriv = state.prev_error.map(|p| gains.kd * (error - p) / dt).unwrap_or(0.0);
    let trial = state.integral + gains.ki * error * dt;
    let raw = gains.kp * error + trial + deriv;
    let out = raw.clamp(gains.out_min, gains.out_max);
    let winding = (raw > gains.out_max && error > 0.0) || (raw < gains.out_min && error < 0.0);
    let integral = if winding { state.integral } else { trial };
    Ok((PidState { integral, prev_error: Some(error) }, out))
}

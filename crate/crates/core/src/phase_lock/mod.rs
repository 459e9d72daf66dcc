//! Active stabilization of the interferometer phase: modulated locking
//! light, mixer and low-pass demodulation, PID servo on a drifting phase.

mod demod;
mod pid;
mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use demod::{calibrate_gain, demodulate_error, sample_intensity, theoretical_gain, Demodulator};
pub use pid::{pid_update, PidGains, PidState};
pub use sim::{simulate_lock, DriftKind, DriftModel, LockTrace};

/// Locking-light and demodulator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockParams {
    /// Modulation depth (rad).
    pub theta: f64,
    /// Modulation angular frequency (rad/s).
    pub omega: f64,
    /// Optical carrier (rad/s). Cancels out of every intensity.
    pub carrier: f64,
    /// Demodulation phase offset (rad).
    pub tau: f64,
    pub e0h: f64,
    pub e0v: f64,
    /// Low-pass cutoff in Hz; `None` means `omega / (2 pi 50)`.
    pub lpf_cutoff: Option<f64>,
    /// Sample period (s).
    pub dt: f64,
    /// Std. dev. of additive Gaussian detector noise on each intensity sample.
    pub detector_noise: f64,
}

impl Default for LockParams {
    fn default() -> Self {
        let f_m = 10_000.0;
        Self {
            theta: 0.2,
            omega: 2.0 * std::f64::consts::PI * f_m,
            carrier: 2.0 * std::f64::consts::PI * 2.8e14,
            tau: std::f64::consts::FRAC_PI_2,
            e0h: 1.0,
            e0v: 1.0,
            lpf_cutoff: None,
            dt: 1.0 / (20.0 * f_m),
            detector_noise: 0.0,
        }
    }
}

impl LockParams {
    /// Modulation frequency in Hz.
    pub fn f_mod(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }

    pub fn cutoff(&self) -> f64 {
        self.lpf_cutoff.unwrap_or(self.f_mod() / 50.0)
    }

    /// Samples per modulation period (rounded).
    pub fn samples_per_period(&self) -> usize {
        (1.0 / (self.f_mod() * self.dt)).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let finite = [self.theta, self.omega, self.tau, self.e0h, self.e0v, self.dt, self.detector_noise];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("lock parameters must be finite".into());
        }
        if self.theta < 0.0 {
            return bad(format!("modulation depth must be >= 0, got {}", self.theta));
        }
        if self.omega <= 0.0 {
            return bad(format!("modulation frequency must be > 0, got {}", self.omega));
        }
        let c = self.cutoff();
        if !(c > 0.0 && c < self.f_mod()) {
            return bad(format!("low-pass cutoff {c} Hz must lie in (0, {}) Hz", self.f_mod()));
        }
        if !(self.dt > 0.0 && self.dt < 1.0 / (10.0 * self.f_mod())) {
            return bad(format!("sample period {} s must be below a tenth of the modulation period", self.dt));
        }
        if self.detector_noise < 0.0 {
            return bad("detector noise must be >= 0".into());
        }
        Ok(())
    }
}

/// `(E0H^2 + E0V^2 + 2 E0H E0V cos(theta sin(Omega t) - zeta)) / 4`.
pub fn intensity(t: f64, zeta: f64, p: &LockParams) -> f64 {
    let arg = p.theta * (p.omega * t).sin() - zeta;
    0.25 * (p.e0h * p.e0h + p.e0v * p.e0v + 2.0 * p.e0h * p.e0v * arg.cos())
}

/// Same quantity from the complex fields: `E_H = E0H e^{i(w t + theta sin Omega t)}`,
/// `E_V = E0V e^{i(w t + zeta)}`, projected on the diagonal polarizer and
/// squared with the `1/2` intensity convention.
pub fn intensity_from_fields(t: f64, zeta: f64, p: &LockParams) -> f64 {
    use num_complex::Complex64;
    let carrier = p.carrier * t;
    let eh = Complex64::from_polar(p.e0h, carrier + p.theta * (p.omega * t).sin());
    let ev = Complex64::from_polar(p.e0v, carrier + zeta);
    let out = (eh + ev) / 2f64.sqrt();
    0.5 * out.norm_sqr()
}

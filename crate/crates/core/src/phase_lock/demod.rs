use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::{intensity, LockParams};

/// Streaming mixer plus single-pole IIR low-pass.
#[derive(Clone, Debug)]
pub struct Demodulator {
    omega: f64,
    tau: f64,
    dt: f64,
    alpha: f64,
    step: u64,
    /// Filter output.
    pub value: f64,
}

impl Demodulator {
    pub fn new(p: &LockParams) -> Self {
        let alpha = 1.0 - (-2.0 * std::f64::consts::PI * p.cutoff() * p.dt).exp();
        Self { omega: p.omega, tau: p.tau, dt: p.dt, alpha, step: 0, value: 0.0 }
    }

    /// Local oscillator `cos(Omega t + tau)` at sample `k`.
    fn lo(&self, k: u64) -> f64 {
        (self.omega * k as f64 * self.dt + self.tau).cos()
    }

    /// Sets the output to the periodic steady state for an input that repeats
    /// `period` forever, without advancing the clock.
    pub fn prime(&mut self, period: &[f64]) {
        let mut probe = Self { value: 0.0, ..self.clone() };
        for &s in period {
            probe.push(s);
        }
        let decay = (1.0 - self.alpha).powi(period.len() as i32);
        self.value = probe.value / (1.0 - decay);
    }

    pub fn push(&mut self, sample: f64) -> f64 {
        let x = sample * self.lo(self.step);
        self.value += self.alpha * (x - self.value);
        self.step += 1;
        self.value
    }
}

/// Intensity trace `I(k dt)` at fixed `zeta`, with the configured detector
/// noise drawn from `seed`.
pub fn sample_intensity(zeta: f64, n: usize, p: &LockParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, p.detector_noise).ok();
    (0..n)
        .map(|k| {
            let i = intensity(k as f64 * p.dt, zeta, p);
            match (&noise, p.detector_noise > 0.0) {
                (Some(d), true) => i + d.sample(&mut rng),
                _ => i,
            }
        })
        .collect()
}

/// Demodulated error of a trace starting at `t = 0`.
///
/// The filter starts in the periodic steady state of the first period's mixed
/// signal, and the result is the filter output averaged over the last full
/// period, which removes the ripple at the modulation harmonics.
pub fn demodulate_error(samples: &[f64], p: &LockParams) -> Result<f64> {
    p.validate()?;
    let periods = samples.len() as f64 * p.dt * p.f_mod();
    if periods < 10.0 - 1e-9 {
        return Err(Error::InsufficientTrace { periods });
    }
    let n = p.samples_per_period();
    let mut d = Demodulator::new(p);
    d.prime(&samples[..n]);
    let mut tail = 0.0;
    let start = samples.len() - n;
    for (k, &s) in samples.iter().enumerate() {
        let y = d.push(s);
        if k >= start {
            tail += y;
        }
    }
    Ok(tail / n as f64)
}

/// `-J1(theta) E0H E0V / 2`: the DC term of the mixed intensity per unit
/// `sin zeta sin tau`.
pub fn theoretical_gain(p: &LockParams) -> f64 {
    -0.5 * libm::j1(p.theta) * p.e0h * p.e0v
}

/// Least-squares gain `G` from a sweep of `zeta` over `[-pi/2, pi/2]` with
/// `tau = pi/2`, so that `error ~ G sin(zeta) sin(tau)`.
pub fn calibrate_gain(p: &LockParams) -> Result<f64> {
    let q = LockParams { tau: std::f64::consts::FRAC_PI_2, detector_noise: 0.0, ..p.clone() };
    q.validate()?;
    let len = 40 * q.samples_per_period();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=12 {
        let zeta = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / 12.0;
        let e = demodulate_error(&sample_intensity(zeta, len, &q, 0), &q)?;
        num += e * zeta.sin();
        den += zeta.sin().powi(2);
    }
    Ok(num / den)
}

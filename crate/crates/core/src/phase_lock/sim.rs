use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{calibrate_gain, intensity, pid_update, Demodulator, LockParams, PidGains, PidState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    /// Gaussian increments with std. dev. `sigma sqrt(dt)` (rad/sqrt(s)).
    RandomWalk { sigma: f64 },
    Sinusoidal { amplitude: f64, period: f64 },
    Step { size: f64, at: f64 },
}

/// Open-loop phase of the interferometer. Flattening rules out
/// `deny_unknown_fields` here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    #[serde(flatten)]
    pub kind: DriftKind,
    #[serde(default)]
    pub initial: f64,
}

impl DriftModel {
    pub fn none(initial: f64) -> Self {
        Self { kind: DriftKind::None, initial }
    }

    pub fn random_walk(sigma: f64) -> Self {
        Self { kind: DriftKind::RandomWalk { sigma }, initial: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            DriftKind::None => true,
            DriftKind::RandomWalk { sigma } => sigma >= 0.0 && sigma.is_finite(),
            DriftKind::Sinusoidal { amplitude, period } => amplitude >= 0.0 && period > 0.0 && period.is_finite(),
            DriftKind::Step { size, at } => size.is_finite() && at.is_finite(),
        };
        if !ok || !self.initial.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid drift model {self:?}")));
        }
        Ok(())
    }
}

/// Sampled run of the open and closed loops.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LockTrace {
    pub t: Vec<f64>,
    pub zeta_open: Vec<f64>,
    pub zeta_closed: Vec<f64>,
    /// Demodulated error signal.
    pub error: Vec<f64>,
    pub actuation: Vec<f64>,
    pub setpoint: f64,
    /// Calibrated demodulator gain used to normalize the error.
    pub gain: f64,
    /// Lock lost or numerics blew up.
    pub diverged: bool,
}

fn rms(v: &[f64], center: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| (x - center).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

impl LockTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn rms_open(&self) -> f64 {
        rms(&self.zeta_open, self.setpoint)
    }

    pub fn rms_closed(&self) -> f64 {
        rms(&self.zeta_closed, self.setpoint)
    }

    /// `t,zeta_open,zeta_closed,error,actuation`, every `stride`-th sample.
    pub fn to_csv(&self, stride: usize, fmt: impl Fn(f64) -> String) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io { path: "<csv>".into(), message: e.to_string() };
        w.write_record(["t", "zeta_open", "zeta_closed", "error", "actuation"]).map_err(io)?;
        for k in (0..self.len()).step_by(stride.max(1)) {
            let row = [self.t[k], self.zeta_open[k], self.zeta_closed[k], self.error[k], self.actuation[k]];
            w.write_record(row.map(&fmt)).map_err(io)?;
        }
        crate::analysis::finish_csv(w)
    }
}

/// Co-simulates the drifting phase with and without the servo.
///
/// The servo runs once per modulation period on the period-averaged filter
/// output, converted to `(sin zeta* - sin zeta)` with the calibrated gain.
/// Its output adds to the phase.
pub fn simulate_lock(p: &LockParams, drift: &DriftModel, gains: &PidGains, duration: f64, setpoint: f64, seed: u64) -> Result<LockTrace> {
    p.validate()?;
    drift.validate()?;
    gains.validate()?;
    if !(duration > 0.0 && duration.is_finite()) || !setpoint.is_finite() {
        return Err(Error::InvalidParameter("duration must be > 0 and the setpoint finite".into()));
    }
    let sin_tau = p.tau.sin();
    if sin_tau.abs() < 1e-6 {
        return Err(Error::InvalidParameter("demodulation phase tau gives no error signal".into()));
    }
    let gain = calibrate_gain(p)?;
    let scale = gain * sin_tau;
    let offset = scale * setpoint.sin();

    let n = (duration / p.dt).round() as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut demod = Demodulator::new(p);
    let mut pid = PidState::default();
    let mut u = 0.0;
    let per = p.samples_per_period();
    let loop_dt = per as f64 * p.dt;
    let mut acc = 0.0;
    let mut walk = drift.initial;
    let mut tr = LockTrace { setpoint, gain, ..LockTrace::default() };
    for k in 0..n {
        let t = k as f64 * p.dt;
        let open = match drift.kind {
            DriftKind::None => drift.initial,
            DriftKind::RandomWalk { sigma } => {
                if k > 0 {
                    walk += sigma * p.dt.sqrt() * unit.sample(&mut rng);
                }
                walk
            }
            DriftKind::Sinusoidal { amplitude, period } => {
                drift.initial + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
            DriftKind::Step { size, at } => drift.initial + if t >= at { size } else { 0.0 },
        };
        let closed = open + u;
        let mut i = intensity(t, closed, p);
        if p.detector_noise > 0.0 {
            i += p.detector_noise * unit.sample(&mut rng);
        }
        let e = demod.push(i);
        acc += e;
        tr.t.push(t);
        tr.zeta_open.push(open);
        tr.zeta_closed.push(closed);
        tr.error.push(e);
        tr.actuation.push(u);
        if (k + 1) % per == 0 {
            let (next, out) = pid_update(&pid, gains, -(acc / per as f64 - offset) / scale, loop_dt)?;
            pid = next;
            u = out;
            acc = 0.0;
        }
    }
    let tail = n - n / 10;
    tr.diverged = tr.zeta_closed.iter().any(|z| !z.is_finite())
        || tr.zeta_closed[tail..].iter().any(|z| (z - setpoint).abs() > std::f64::consts::PI);
    Ok(tr)
}

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::sample_counts;
use crate::linalg::CMatrix;
use crate::oam_d4::{BranchMaps, NoiseSpec, Pipeline};
use crate::qudit::{cpf_oracle, BellOutcome};
use crate::scalar::C;

use super::bases::{BasisName, BasisTable};
use super::stabilizer::{stabilizer_expectations, stabilizer_fidelity};

/// `[F_ZX + F_XZ - 1, min(F_ZX, F_XZ)]`, lower clamped at 0.
///
/// Both ends are rounded to 12 significant digits, the precision of every
/// emitted report, so that decimal inputs give decimal bounds.
pub fn hofmann_bounds(f_zx: f64, f_xz: f64) -> Result<[f64; 2]> {
    for f in [f_zx, f_xz] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("fidelity {f} outside [0, 1]")));
        }
    }
    let lower = round_sig(f_zx + f_xz - 1.0, 12).max(0.0);
    let upper = round_sig(f_zx.min(f_xz), 12);
    Ok([lower, upper])
}

/// Rounds `x` to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Outcome probabilities of each table input measured in the same table basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeMatrix {
    pub basis: BasisName,
    pub labels: Vec<String>,
    /// `probabilities[input][outcome]`, conditional on a herald.
    pub probabilities: Vec<Vec<f64>>,
    /// Sampled counts in shot mode.
    pub counts: Option<Vec<Vec<u64>>>,
    /// Index of the ideal output for each input.
    pub expected: Vec<usize>,
}

impl OutcomeMatrix {
    /// Average probability of the expected output (from counts in shot mode).
    pub fn fidelity(&self) -> f64 {
        let n = self.expected.len() as f64;
        let per_input = |i: usize| match &self.counts {
            Some(c) => {
                let tot: u64 = c[i].iter().sum();
                if tot == 0 {
                    0.0
                } else {
                    c[i][self.expected[i]] as f64 / tot as f64
                }
            }
            None => self.probabilities[i][self.expected[i]],
        };
        (0..self.expected.len()).map(per_input).sum::<f64>() / n
    }

    /// Inputs whose expected output differs from themselves.
    pub fn flipped(&self) -> Vec<usize> {
        self.expected.iter().enumerate().filter(|(i, e)| i != *e).map(|(i, _)| i).collect()
    }

    /// True when every row has a single entry 1 (within `tol`) at `expected`.
    pub fn is_permutation(&self, tol: f64) -> bool {
        self.probabilities.iter().enumerate().all(|(i, row)| {
            row.iter().enumerate().all(|(j, p)| (p - if j == self.expected[i] { 1.0 } else { 0.0 }).abs() <= tol)
        })
    }

    /// Long form: `input,outcome,probability,count`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io { path: "<csv>".into(), message: e.to_string() };
        w.write_record(["input", "outcome", "probability", "count"]).map_err(io)?;
        for (i, row) in self.probabilities.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                let count = self.counts.as_ref().map(|c| c[i][j].to_string()).unwrap_or_default();
                w.write_record([&self.labels[i], &self.labels[j], &format_sig(*p), &count]).map_err(io)?;
            }
        }
        finish_csv(w)
    }

    /// Square matrix with inputs as rows, in table order.
    pub fn matrix_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io { path: "<csv>".into(), message: e.to_string() };
        let mut header = vec!["input".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (i, row) in self.probabilities.iter().enumerate() {
            let mut rec = vec![self.labels[i].clone()];
            rec.extend(row.iter().map(|p| format_sig(*p)));
            w.write_record(&rec).map_err(io)?;
        }
        finish_csv(w)
    }
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io { path: "<csv>".into(), message: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Error::Io { path: "<csv>".into(), message: e.to_string() })
}

/// Fixed 12-significant-digit rendering used in every emitted file.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x, 12);
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub f_zx: f64,
    pub f_xz: f64,
    /// `[lower, upper]`.
    pub bounds: [f64; 2],
    /// Heralding probability averaged over the inputs.
    pub heralding_probability: f64,
    pub shots: Option<u64>,
    pub zx: OutcomeMatrix,
    pub xz: OutcomeMatrix,
}

/// Heralded maps of the pipeline under `noise`, plus the pipeline itself.
pub struct Channel {
    pub pipeline: Pipeline,
    pub maps: BranchMaps,
    pub accepted: Vec<BellOutcome>,
}

impl Channel {
    pub fn new(noise: &NoiseSpec, accepted: &[BellOutcome]) -> Result<Self> {
        let pipeline = Pipeline::new()?;
        Self::with_pipeline(pipeline, noise, accepted)
    }

    pub fn with_pipeline(pipeline: Pipeline, noise: &NoiseSpec, accepted: &[BellOutcome]) -> Result<Self> {
        if accepted.is_empty() {
            return Err(Error::InvalidParameter("no accepted Bell outcome".into()));
        }
        let maps = pipeline.branch_maps(&noise.draws()?, noise.loss)?;
        Ok(Self { pipeline, maps, accepted: accepted.to_vec() })
    }

    /// Normalized output density matrix and heralding probability for input `v`.
    pub fn output(&self, v: &[C<f64>]) -> Result<(CMatrix<f64>, f64)> {
        let n = v.len();
        let mut rho = CMatrix::zeros(n, n);
        let count = self.maps.realizations.len() as f64;
        for r in &self.maps.realizations {
            for b in &self.accepted {
                let Some(k) = r.get(b) else { continue };
                let w = k.mul_vec(v);
                for i in 0..n {
                    for j in 0..n {
                        rho[(i, j)] += w[i] * w[j].conj() / count;
                    }
                }
            }
        }
        let p = rho.trace().re;
        if !(p > 1e-14) {
            return Err(Error::EmptyPostSelection);
        }
        Ok((rho.scale(C::new(1.0 / p, 0.0)), p * self.maps.loss_factor))
    }

    /// Process fidelity of the heralded, renormalized channel with the CPF gate.
    pub fn process_fidelity(&self) -> Result<f64> {
        let u = cpf_oracle::<f64>(4)?;
        let (ov, mass) = self.maps.overlap_and_mass(&u, &self.accepted);
        if !(mass > 0.0) {
            return Err(Error::EmptyPostSelection);
        }
        Ok(ov / mass)
    }
}

fn expectation(rho: &CMatrix<f64>, v: &[C<f64>]) -> f64 {
    let rv = rho.mul_vec(v);
    v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C<f64>>().re
}

/// Ideal output index for each entry; errors if the gate leaves the basis.
pub fn expected_outputs(table: &BasisTable) -> Result<Vec<usize>> {
    let u = cpf_oracle::<f64>(4)?;
    (0..table.len())
        .map(|i| {
            let out = u.mul_vec(&table.vector(i));
            (0..table.len())
                .find(|&j| {
                    let b = table.vector(j);
                    let ov: C<f64> = b.iter().zip(&out).map(|(x, y)| x.conj() * y).sum();
                    (ov.norm_sqr() - 1.0).abs() < 1e-12
                })
                .ok_or_else(|| Error::InvalidParameter(format!("ideal output of input {i} is not a basis state")))
        })
        .collect()
}

/// Runs one basis table through `channel`. `shots = None` gives exact
/// probabilities only.
pub fn measure_table(channel: &Channel, table: &BasisTable, shots: Option<u64>, seed: u64) -> Result<(OutcomeMatrix, f64)> {
    let expected = expected_outputs(table)?;
    let mut probabilities = Vec::with_capacity(table.len());
    let mut counts = shots.map(|_| Vec::with_capacity(table.len()));
    let mut herald = 0.0;
    let stream_base = match table.name {
        BasisName::ZX => 0,
        BasisName::XZ => 1 << 16,
        BasisName::TableA3 => 2 << 16,
    };
    for i in 0..table.len() {
        let (rho, p) = channel.output(&table.vector(i))?;
        herald += p / table.len() as f64;
        let row: Vec<f64> = (0..table.len()).map(|j| expectation(&rho, &table.vector(j)).max(0.0)).collect();
        if let (Some(n), Some(c)) = (shots, counts.as_mut()) {
            let dist = row.iter().copied().enumerate().collect();
            let drawn = sample_counts(&dist, n, seed, stream_base + i as u64);
            c.push(drawn.into_values().collect());
        }
        probabilities.push(row);
    }
    Ok((OutcomeMatrix { basis: table.name, labels: table.labels(), probabilities, counts, expected }, herald))
}

/// One basis table under `noise`, heralding on Phi+.
pub fn run_fidelity_experiment(basis: BasisName, shots: Option<u64>, noise: &NoiseSpec) -> Result<OutcomeMatrix> {
    if basis == BasisName::TableA3 {
        return Err(Error::InvalidParameter("fidelity experiments use the ZX or XZ table".into()));
    }
    let channel = Channel::new(noise, &[BellOutcome::PhiPlus])?;
    Ok(measure_table(&channel, &BasisTable::by_name(basis), shots, noise.seed)?.0)
}

/// Both tables and the resulting bounds.
pub fn fidelity_report(channel: &Channel, shots: Option<u64>, seed: u64) -> Result<FidelityReport> {
    let (zx, hz) = measure_table(channel, &BasisTable::zx(), shots, seed)?;
    let (xz, hx) = measure_table(channel, &BasisTable::xz(), shots, seed)?;
    let (f_zx, f_xz) = (zx.fidelity(), xz.fidelity());
    let bounds = hofmann_bounds(f_zx.clamp(0.0, 1.0), f_xz.clamp(0.0, 1.0))?;
    Ok(FidelityReport { f_zx, f_xz, bounds, heralding_probability: (hz + hx) / 2.0, shots, zx, xz })
}

/// Score of one superposition input.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuperpositionResult {
    pub index: usize,
    pub label: String,
    pub fidelity: f64,
    /// Stabilizer expectations (entangled case only).
    pub stabilizers: Option<[f64; 3]>,
}

/// Binomial estimate of `p` from `shots` draws on `stream`.
fn sampled(p: f64, shots: u64, seed: u64, stream: u64) -> f64 {
    let dist = [(0u8, p.clamp(0.0, 1.0)), (1u8, (1.0 - p).clamp(0.0, 1.0))].into_iter().collect();
    let c = sample_counts(&dist, shots, seed, stream);
    c[&0] as f64 / shots.max(1) as f64
}

/// Scores the seven superposition inputs. The first six are compared with
/// their product outputs; the seventh via its stabilizers.
pub fn superposition_suite(channel: &Channel, shots: Option<u64>, seed: u64) -> Result<Vec<SuperpositionResult>> {
    let table = BasisTable::table_a3();
    let u = cpf_oracle::<f64>(4)?;
    let labels = table.labels();
    let mut out = Vec::new();
    for i in 0..table.len() {
        let v = table.vector(i);
        let (rho, _) = channel.output(&v)?;
        let stream = (3 << 16) + 8 * i as u64;
        if i + 1 < table.len() {
            let want = u.mul_vec(&v);
            let f = expectation(&rho, &want);
            let fidelity = match shots {
                Some(n) => sampled(f, n, seed, stream),
                None => f,
            };
            out.push(SuperpositionResult { index: i + 1, label: labels[i].clone(), fidelity, stabilizers: None });
        } else {
            let exact = stabilizer_expectations(&rho);
            let e = match shots {
                // Each stabilizer has eigenvalues +-1 on the subspace; draw the sign.
                Some(n) => {
                    let mut e = [0.0; 3];
                    for (k, val) in exact.iter().enumerate() {
                        e[k] = 2.0 * sampled((1.0 + val) / 2.0, n, seed, stream + 1 + k as u64) - 1.0;
                    }
                    e
                }
                None => exact,
            };
            let fidelity = stabilizer_fidelity(e[0].clamp(-1.0, 1.0), e[1].clamp(-1.0, 1.0), e[2].clamp(-1.0, 1.0))?;
            out.push(SuperpositionResult { index: i + 1, label: labels[i].clone(), fidelity, stabilizers: Some(e) });
        }
    }
    Ok(out)
}

/// Heralded probability of finding photon 1 back in `(|1> + |2>)/sqrt2`
/// (photon 4 in `|0>`). Equal to `(1 + cos zeta)/2` for a jitter `zeta`.
pub fn locking_observable(channel: &Channel) -> Result<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![C::new(0.0, 0.0); 16];
    v[4] = C::new(s, 0.0);
    v[2 * 4] = C::new(s, 0.0);
    let (rho, _) = channel.output(&v)?;
    Ok(expectation(&rho, &v))
}

/// Dephasing strength whose analytic `F_ZX` equals `target`, found by
/// bisection with the other fields of `base` held fixed (seed included, so
/// the Monte Carlo draws scale smoothly with the strength).
pub fn calibrate_dephasing(pipeline: &Pipeline, base: &NoiseSpec, target: f64) -> Result<NoiseSpec> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("target fidelity {target} outside [0, 1]")));
    }
    let table = BasisTable::zx();
    let f_at = |s: f64| -> Result<f64> {
        let spec = NoiseSpec { oam_dephasing: s, ..base.clone() };
        let ch = Channel::with_pipeline(pipeline.clone(), &spec, &[BellOutcome::PhiPlus])?;
        Ok(measure_table(&ch, &table, None, 0)?.0.fidelity())
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    if f_at(lo)? < target || f_at(hi)? > target {
        return Err(Error::InvalidParameter(format!("target fidelity {target} not reachable by dephasing")));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if f_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(NoiseSpec { oam_dephasing: 0.5 * (lo + hi), ..base.clone() })
}

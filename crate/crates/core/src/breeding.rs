//! Beam-splitter breeding rounds, homodyne statistics and the two protocols.
//!
//! A round mixes port 1 and port 2 on a balanced beam splitter and measures
//! the `p` quadrature of port 2. Port 1 then carries
//! `D((a + b)/sqrt(2))` for every pair of input amplitudes `a`, `b`, weighted
//! by `exp(i p (a - b))`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_state::{same_delta, DisplacedSqueezedSum};
use crate::numerics::TabulatedCdf;

/// Largest number of rounds any protocol will run.
pub const MAX_ROUNDS: u32 = 10;

const OFFSET_REAL_TOL: f64 = 1e-12;
const STEP_RATIO_TOL: f64 = 1e-9;
/// Pairs of output components further apart than this (in log overlap) are dropped.
const LN_OVERLAP_CUTOFF: f64 = -40.0;
const SAMPLER_POINTS: usize = 1 << 14;
const SAMPLER_MAX_POINTS: usize = 1 << 22;
const SAMPLER_MASS_TOL: f64 = 1e-6;
const SAMPLER_TAIL_TOL: f64 = 1e-9;

/// Phase-estimation form `D(shift) prod_j (1 + e^{i phi_j} D(alpha_j)) S(Delta)|vac>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub phases: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Real coherent amplitude of the leading displacement.
    pub shift: f64,
}

impl OpRecord {
    pub fn new(phases: Vec<f64>, alphas: Vec<f64>, shift: f64) -> Result<Self> {
        let r = OpRecord { phases, alphas, shift };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.len() != self.alphas.len() {
            return Err(Error::Domain(format!(
                "{} phases for {} amplitudes",
                self.phases.len(),
                self.alphas.len()
            )));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Domain("operator amplitudes must be finite and > 0".into()));
        }
        if self.phases.iter().any(|p| !p.is_finite()) || !self.shift.is_finite() {
            return Err(Error::Domain("operator phases and shift must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Expand the product into a normalized superposition.
    pub fn to_state(&self, delta: f64) -> Result<DisplacedSqueezedSum> {
        self.validate()?;
        let mut order: Vec<usize> = (0..self.len()).collect();
        // ascending amplitudes keep every factor on the lattice of the previous ones
        order.sort_by(|&a, &b| self.alphas[a].total_cmp(&self.alphas[b]));
        let mut s = DisplacedSqueezedSum::squeezed_vacuum(delta)?.apply_displacement(Complex64::new(self.shift, 0.0));
        for j in order {
            s = s.apply_measurement_op(self.phases[j], self.alphas[j])?;
        }
        s.normalized()
    }
}

/// A mode together with the operator record that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BredMode {
    pub state: DisplacedSqueezedSum,
    pub record: OpRecord,
}

impl BredMode {
    pub fn normalized(self) -> Result<Self> {
        Ok(BredMode { state: self.state.normalized()?, record: self.record })
    }
}

/// Normalized squeezed cat `(1 + D(alpha)) S(Delta)|vac>`, optionally preceded by `D(-alpha/2)`.
pub fn squeezed_cat(delta: f64, alpha: f64, preshift: bool) -> Result<BredMode> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("cat amplitude must be > 0, got {alpha}")));
    }
    let shift = if preshift { -0.5 * alpha } else { 0.0 };
    let state = DisplacedSqueezedSum::squeezed_vacuum(delta)?
        .apply_displacement(Complex64::new(shift, 0.0))
        .apply_measurement_op(0.0, alpha)?
        .normalized()?;
    Ok(BredMode { state, record: OpRecord { phases: vec![0.0], alphas: vec![alpha], shift } })
}

/// Lattice positions of a state on a common grid of spacing `unit`.
struct Placed {
    origin: f64,
    entries: Vec<(i64, Complex64)>,
}

fn real_origin(s: &DisplacedSqueezedSum) -> Result<f64> {
    let o = s.offset();
    if o.im.abs() > OFFSET_REAL_TOL * (1.0 + o.norm()) {
        return Err(Error::Unsupported("breeding needs real component amplitudes".into()));
    }
    Ok(o.re)
}

fn place(s: &DisplacedSqueezedSum, mult: i64) -> Result<Placed> {
    let origin = real_origin(s)?;
    if s.support_len() == 1 {
        let (&t, &c) = s.coefficients().iter().next().expect("nonempty");
        return Ok(Placed { origin: s.amplitude(t).re, entries: vec![(0, c)] });
    }
    Ok(Placed { origin, entries: s.coefficients().iter().map(|(&t, &c)| (t * mult, c)).collect() })
}

/// Common lattice unit of two inputs and both placements on it.
fn common_lattice(s1: &DisplacedSqueezedSum, s2: &DisplacedSqueezedSum) -> Result<(f64, Placed, Placed)> {
    if !same_delta(s1.delta(), s2.delta()) {
        return Err(Error::Unsupported(format!(
            "breeding modes with squeezing {} and {}",
            s1.delta(),
            s2.delta()
        )));
    }
    let single1 = s1.support_len() == 1;
    let single2 = s2.support_len() == 1;
    let (unit, m1, m2) = match (single1, single2) {
        (true, true) => (s1.step().max(s2.step()), 1, 1),
        (true, false) => (s2.step(), 1, 1),
        (false, true) => (s1.step(), 1, 1),
        (false, false) => {
            let (a, b) = (s1.step(), s2.step());
            let (small, big) = if a <= b { (a, b) } else { (b, a) };
            let ratio = big / small;
            let r = ratio.round();
            if (ratio - r).abs() > STEP_RATIO_TOL * ratio {
                return Err(Error::Lattice { amplitude: big, step: small });
            }
            let r = r as i64;
            if a <= b {
                (a, 1, r)
            } else {
                (b, r, 1)
            }
        }
    };
    Ok((unit, place(s1, m1)?, place(s2, m2)?))
}

/// `p`-space wavefunction of the squeezed vacuum.
fn vac_p(delta: f64, p: f64) -> f64 {
    (delta * delta / PI).powf(0.25) * (-0.5 * p * p * delta * delta).exp()
}

/// Port-1 state after measuring `p_out` on port 2; unnormalized, with squared
/// norm equal to the outcome density at `p_out`.
pub fn breed_states(s1: &DisplacedSqueezedSum, s2: &DisplacedSqueezedSum, p_out: f64) -> Result<DisplacedSqueezedSum> {
    if !p_out.is_finite() {
        return Err(Error::Domain("homodyne outcome must be finite".into()));
    }
    let (unit, a, b) = common_lattice(s1, s2)?;
    let env = vac_p(s1.delta(), p_out);
    let mut coeffs: BTreeMap<i64, Complex64> = BTreeMap::new();
    for &(i, c) in &a.entries {
        for &(j, d) in &b.entries {
            let sep = a.origin - b.origin + (i - j) as f64 * unit;
            *coeffs.entry(i + j).or_insert(Complex64::new(0.0, 0.0)) += c * d * Complex64::from_polar(env, p_out * sep);
        }
    }
    DisplacedSqueezedSum::from_components(
        s1.delta(),
        unit * FRAC_1_SQRT_2,
        Complex64::new((a.origin + b.origin) * FRAC_1_SQRT_2, 0.0),
        coeffs,
    )
}

/// One breeding round on bred modes; the returned state is unnormalized.
pub fn breed_round(port1: &BredMode, port2: &BredMode, p_out: f64) -> Result<BredMode> {
    let state = breed_states(&port1.state, &port2.state, p_out)?;
    let r1 = &port1.record;
    let r2 = &port2.record;
    let mut phases = Vec::with_capacity(r1.len() + r2.len());
    let mut alphas = Vec::with_capacity(r1.len() + r2.len());
    for (&phi, &a) in r1.phases.iter().zip(&r1.alphas) {
        phases.push(phi + a * p_out);
        alphas.push(a * FRAC_1_SQRT_2);
    }
    for (&phi, &b) in r2.phases.iter().zip(&r2.alphas) {
        phases.push(phi - b * p_out);
        alphas.push(b * FRAC_1_SQRT_2);
    }
    let record = OpRecord { phases, alphas, shift: (r1.shift + r2.shift) * FRAC_1_SQRT_2 };
    Ok(BredMode { state, record })
}

/// Outcome density of the port-2 `p` measurement,
/// `P(p) = (Delta/sqrt(pi)) e^{-Delta^2 p^2} Re sum_f T_f e^{i f unit p} / Z`.
#[derive(Clone, Debug)]
pub struct HomodyneDensity {
    delta: f64,
    unit: f64,
    /// `T_f` for `f >= 0`; `T_{-f} = conj(T_f)`.
    trig: Vec<Complex64>,
    normalization: f64,
}

pub fn homodyne_density(s1: &DisplacedSqueezedSum, s2: &DisplacedSqueezedSum) -> Result<HomodyneDensity> {
    if !(s1.is_normalized() && s2.is_normalized()) {
        return Err(Error::Contract("homodyne density requires normalized inputs".into()));
    }
    let (unit, a, b) = common_lattice(s1, s2)?;
    let delta = s1.delta();
    // output index -> list of (frequency, weight)
    let mut groups: BTreeMap<i64, Vec<(i64, Complex64)>> = BTreeMap::new();
    for &(i, c) in &a.entries {
        for &(j, d) in &b.entries {
            groups.entry(i + j).or_default().push((i - j, c * d));
        }
    }
    let keys: Vec<i64> = groups.keys().copied().collect();
    // differences of input frequencies span twice their range
    let fmax = 2 * groups.values().flatten().map(|(f, _)| f.abs()).max().unwrap_or(0) as usize;
    let mut trig = vec![Complex64::new(0.0, 0.0); 2 * fmax + 1];
    let ln_unit = unit * unit / (4.0 * delta * delta);
    for (x, &n) in keys.iter().enumerate() {
        let gn = &groups[&n];
        for &m in &keys[x..] {
            let ln_ov = -ln_unit * ((m - n) * (m - n)) as f64;
            if ln_ov < LN_OVERLAP_CUTOFF {
                break;
            }
            let ov = ln_ov.exp();
            let gm = &groups[&m];
            for &(f, w) in gn {
                for &(g, v) in gm {
                    let term = w.conj() * v * ov;
                    let idx = (g - f + fmax as i64) as usize;
                    trig[idx] += term;
                    if m != n {
                        // the (m, n) pair contributes the conjugate at the opposite frequency
                        trig[2 * fmax - idx] += term.conj();
                    }
                }
            }
        }
    }
    let trig: Vec<Complex64> = (0..=fmax)
        .map(|f| {
            // symmetrize against rounding
            let hi = trig[fmax + f];
            let lo = trig[fmax - f].conj();
            (hi + lo) * 0.5
        })
        .collect();
    let mut normalization = trig[0].re;
    for (f, t) in trig.iter().enumerate().skip(1) {
        normalization += 2.0 * t.re * (-((f * f) as f64) * ln_unit).exp();
    }
    if !(normalization.is_finite() && normalization > 0.0) {
        return Err(Error::Domain("homodyne density has no mass".into()));
    }
    Ok(HomodyneDensity { delta, unit, trig, normalization })
}

impl HomodyneDensity {
    /// Integral of the unnormalized density; one for normalized inputs.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Spacing of the frequencies present in the trigonometric sum.
    pub fn frequency_unit(&self) -> f64 {
        self.unit
    }

    fn trig_sum(&self, p: f64) -> f64 {
        let z = Complex64::from_polar(1.0, self.unit * p);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in self.trig.iter().skip(1).rev() {
            acc = (acc + t) * z;
        }
        self.trig[0].re + 2.0 * acc.re
    }

    pub fn density(&self, p: f64) -> f64 {
        let d = self.delta;
        let env = d / PI.sqrt() * (-d * d * p * p).exp();
        (env * self.trig_sum(p) / self.normalization).max(0.0)
    }

    /// Inverse-CDF sampler on a Simpson-integrated grid.
    pub fn sampler(&self) -> Result<HomodyneSampler> {
        let d = self.delta;
        let sigma = FRAC_1_SQRT_2 / d;
        let weight: f64 = self.trig[0].norm() + 2.0 * self.trig.iter().skip(1).map(|t| t.norm()).sum::<f64>();
        let mut half = 6.0 * sigma;
        while weight / self.normalization * statrs::function::erf::erfc(d * half) > SAMPLER_TAIL_TOL {
            half += sigma;
        }
        let mut cells = SAMPLER_POINTS;
        loop {
            let table = TabulatedCdf::from_density(|p| self.density(p), -half, half, cells);
            if (table.mass() - 1.0).abs() < SAMPLER_MASS_TOL {
                return Ok(HomodyneSampler { table });
            }
            if cells >= SAMPLER_MAX_POINTS {
                return Err(Error::Resource(format!("homodyne sampler grid did not converge (mass {})", table.mass())));
            }
            cells *= 2;
        }
    }
}

#[derive(Clone, Debug)]
pub struct HomodyneSampler {
    table: TabulatedCdf,
}

impl HomodyneSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.table.quantile(rng.random::<f64>())
    }

    pub fn cdf(&self, p: f64) -> f64 {
        self.table.cdf(p)
    }
}

/// Draw one outcome from `density`.
pub fn sample_homodyne<R: Rng + ?Sized>(density: &HomodyneDensity, rng: &mut R) -> Result<f64> {
    Ok(density.sampler()?.sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Slow,
    Efficient,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Slow => "slow",
            Protocol::Efficient => "efficient",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub rounds: u32,
    pub delta: f64,
    pub xi: f64,
    pub preshift: bool,
}

impl ProtocolConfig {
    pub fn new(rounds: u32, delta: f64, xi: f64) -> Self {
        ProtocolConfig { rounds, delta, xi, preshift: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Domain(format!("squeezing parameter must be > 0, got {}", self.delta)));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::Domain(format!("grid spacing must be > 0, got {}", self.xi)));
        }
        if self.rounds > MAX_ROUNDS {
            return Err(Error::Resource(format!("{} rounds exceeds the limit of {MAX_ROUNDS}", self.rounds)));
        }
        Ok(())
    }

    /// Amplitude of the initial cats, `xi 2^{(M-1)/2}`.
    pub fn base_amplitude(&self) -> f64 {
        self.xi * 2f64.powf((self.rounds as f64 - 1.0) / 2.0)
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRecord {
    pub rounds: u32,
    pub xi: f64,
    pub delta: f64,
    pub protocol: Protocol,
    pub preshift: bool,
    /// `outcomes[r - 1][i]` is the outcome at node `i` of round `r`.
    pub outcomes: Vec<Vec<f64>>,
}

impl MeasurementRecord {
    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig { rounds: self.rounds, delta: self.delta, xi: self.xi, preshift: self.preshift }
    }

    pub fn validate(&self) -> Result<()> {
        self.config().validate()?;
        if self.outcomes.len() != self.rounds as usize {
            return Err(Error::schema(
                "outcomes",
                format!("expected {} rounds of outcomes, found {}", self.rounds, self.outcomes.len()),
            ));
        }
        for (r, row) in self.outcomes.iter().enumerate() {
            let expected = match self.protocol {
                Protocol::Slow => 1,
                Protocol::Efficient => 1usize << (self.rounds as usize - r - 1),
            };
            if row.len() != expected {
                return Err(Error::schema(
                    format!("outcomes[{r}]"),
                    format!("expected {expected} outcomes, found {}", row.len()),
                ));
            }
            if let Some(i) = row.iter().position(|p| !p.is_finite()) {
                return Err(Error::schema(format!("outcomes[{r}][{i}]"), "outcome is not finite"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::schema("record", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: MeasurementRecord = serde_json::from_str(text)
            .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Supplies the homodyne outcome for each `(round, node)`.
pub trait OutcomeSource {
    fn outcome(&mut self, round: usize, node: usize, density: &dyn Fn() -> Result<HomodyneDensity>) -> Result<f64>;
}

/// Outcomes drawn from the exact homodyne density.
pub struct Sampled<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> OutcomeSource for Sampled<'_, R> {
    fn outcome(&mut self, _round: usize, _node: usize, density: &dyn Fn() -> Result<HomodyneDensity>) -> Result<f64> {
        sample_homodyne(&density()?, self.0)
    }
}

/// Every outcome forced to zero.
pub struct PostSelected;

impl OutcomeSource for PostSelected {
    fn outcome(&mut self, _round: usize, _node: usize, _density: &dyn Fn() -> Result<HomodyneDensity>) -> Result<f64> {
        Ok(0.0)
    }
}

/// Outcomes read back from a record.
pub struct Replayed<'a>(pub &'a MeasurementRecord);

impl OutcomeSource for Replayed<'_> {
    fn outcome(&mut self, round: usize, node: usize, _density: &dyn Fn() -> Result<HomodyneDensity>) -> Result<f64> {
        self.0
            .outcomes
            .get(round - 1)
            .and_then(|row| row.get(node))
            .copied()
            .ok_or_else(|| Error::schema(format!("outcomes[{}][{node}]", round - 1), "missing outcome"))
    }
}

fn bred_step(
    port1: &BredMode,
    port2: &BredMode,
    round: usize,
    node: usize,
    source: &mut dyn OutcomeSource,
) -> Result<(BredMode, f64)> {
    let density = || homodyne_density(&port1.state, &port2.state);
    let p = source.outcome(round, node, &density)?;
    Ok((breed_round(port1, port2, p)?.normalized()?, p))
}

/// Run either protocol with outcomes from `source`; the final mode is normalized.
pub fn run_protocol(
    config: &ProtocolConfig,
    protocol: Protocol,
    source: &mut dyn OutcomeSource,
) -> Result<(BredMode, MeasurementRecord)> {
    config.validate()?;
    let m = config.rounds as usize;
    let alpha = config.base_amplitude();
    let mut outcomes = Vec::with_capacity(m);
    let result = match protocol {
        Protocol::Efficient => {
            let leaf = squeezed_cat(config.delta, alpha, config.preshift)?;
            let mut nodes = vec![leaf; 1 << m];
            for r in 1..=m {
                let mut next = Vec::with_capacity(nodes.len() / 2);
                let mut row = Vec::with_capacity(nodes.len() / 2);
                for (i, pair) in nodes.chunks_exact(2).enumerate() {
                    let (mode, p) = bred_step(&pair[0], &pair[1], r, i, source)?;
                    next.push(mode);
                    row.push(p);
                }
                outcomes.push(row);
                nodes = next;
            }
            nodes.pop().expect("one root")
        }
        Protocol::Slow => {
            let mut current = squeezed_cat(config.delta, alpha, config.preshift)?;
            for r in 1..=m {
                let beta = alpha / 2f64.powf((r as f64 - 1.0) / 2.0);
                let fresh = squeezed_cat(config.delta, beta, config.preshift)?;
                let (mode, p) = bred_step(&current, &fresh, r, 0, source)?;
                current = mode;
                outcomes.push(vec![p]);
            }
            current
        }
    };
    let record = MeasurementRecord {
        rounds: config.rounds,
        xi: config.xi,
        delta: config.delta,
        protocol,
        preshift: config.preshift,
        outcomes,
    };
    Ok((result, record))
}

pub fn run_slow_breeding<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<(BredMode, MeasurementRecord)> {
    run_protocol(config, Protocol::Slow, &mut Sampled(rng))
}

pub fn run_efficient_breeding<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(BredMode, MeasurementRecord)> {
    run_protocol(config, Protocol::Efficient, &mut Sampled(rng))
}

/// Run with every outcome equal to zero.
pub fn post_select_run(config: &ProtocolConfig, protocol: Protocol) -> Result<(BredMode, MeasurementRecord)> {
    run_protocol(config, protocol, &mut PostSelected)
}

/// Rebuild the final mode of a recorded run.
pub fn replay(record: &MeasurementRecord) -> Result<BredMode> {
    record.validate()?;
    Ok(run_protocol(&record.config(), record.protocol, &mut Replayed(record))?.0)
}

/// Square-lattice spacing `sqrt(2 pi)`.
pub fn standard_spacing() -> f64 {
    (2.0 * PI).sqrt()
}

/// Cat amplitude of a zero-round run, `xi / sqrt(2)`.
pub fn single_cat_amplitude(xi: f64) -> f64 {
    xi / SQRT_2
}

//! Seeded Monte Carlo sweeps and file output.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breeding::{self, post_select_run, run_protocol, BredMode, MeasurementRecord, Protocol, ProtocolConfig, Sampled};
use crate::error::{Error, Result};
use crate::gaussian_state::{DisplacedSqueezedSum, Stabilizer, WignerGrid, WignerSpec};
use crate::mises::{
    calibrate_kappa0, cat_delta_p, effective_squeezing_from_kappa_at, run_mises_protocol, MisesConfig, MisesTrajectory,
    OutcomeChoice,
};

/// Largest `rounds_max` a sweep accepts.
pub const SWEEP_MAX_ROUNDS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Efficient breeding with sampled outcomes.
    Breeding,
    /// Von Mises model with sampled outcomes.
    Mises,
    /// Efficient breeding with every outcome equal to zero.
    Postselect,
    /// `Delta_p(2^M kappa0)`.
    Lower,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Breeding, Variant::Mises, Variant::Postselect, Variant::Lower];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Breeding => "breeding",
            Variant::Mises => "mises",
            Variant::Postselect => "postselect",
            Variant::Lower => "lower",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::schema("variants", format!("unknown variant '{s}'")))
    }
}

fn default_delta() -> f64 {
    0.2
}

fn default_xi() -> f64 {
    TAU.sqrt()
}

fn default_rounds() -> u32 {
    4
}

fn default_reps() -> usize {
    200
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Sweep parameters; every field is optional in the JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_rounds")]
    pub rounds_max: u32,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_true")]
    pub preshift: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rounds_max: default_rounds(),
            delta: default_delta(),
            xi: default_xi(),
            repetitions: default_reps(),
            seed: 0,
            variants: default_variants(),
            preshift: true,
            output_dir: default_output_dir(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::schema("repetitions", "must be >= 1"));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::schema("xi", "must be finite and > 0"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::schema("delta", "must be finite and > 0"));
        }
        if self.rounds_max > SWEEP_MAX_ROUNDS {
            return Err(Error::Resource(format!(
                "rounds_max {} exceeds {SWEEP_MAX_ROUNDS} (2^M + 1 coefficients per state)",
                self.rounds_max
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(text)
            .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn protocol_config(&self, rounds: u32) -> ProtocolConfig {
        ProtocolConfig { rounds, delta: self.delta, xi: self.xi, preshift: self.preshift }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one repetition: the ChaCha key comes from `seed`,
/// the stream number from a hash of `(variant, rounds, repetition)`.
pub fn stream_rng(seed: u64, variant: Variant, rounds: u32, repetition: u64) -> ChaCha8Rng {
    let mut h = splitmix64(variant.stream_id());
    h = splitmix64(h ^ rounds as u64);
    h = splitmix64(h ^ repetition);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub rounds: u32,
    pub mean_delta_p: f64,
    pub dev_up: f64,
    pub dev_down: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn get(&self, variant: Variant, rounds: u32) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.variant == variant && r.rounds == rounds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,M,mean_delta_p,dev_up,dev_down,n\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.variant.name(), r.rounds, r.mean_delta_p, r.dev_up, r.dev_down, r.n);
        }
        out
    }
}

/// Mean and root-mean-square deviations of the samples above and below it.
pub fn split_deviations(values: &[f64]) -> (f64, f64, f64) {
    if values.iter().all(|&v| v == values[0]) {
        return (values.first().copied().unwrap_or(f64::NAN), 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let rms = |keep: &dyn Fn(f64) -> bool| {
        let sel: Vec<f64> = values.iter().copied().filter(|&v| keep(v)).collect();
        if sel.is_empty() {
            0.0
        } else {
            (sel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sel.len() as f64).sqrt()
        }
    };
    (mean, rms(&|v| v > mean), rms(&|v| v < mean))
}

fn row(variant: Variant, rounds: u32, values: &[f64]) -> SweepRow {
    let (mean, up, down) = split_deviations(values);
    SweepRow { variant, rounds, mean_delta_p: mean, dev_up: up, dev_down: down, n: values.len() }
}

/// `Delta_p` of a bred mode with respect to `S_p` at spacing `xi`.
pub fn mode_delta_p(mode: &BredMode, xi: f64) -> Result<f64> {
    Ok(mode.state.effective_squeezing(xi / SQRT_2, Stabilizer::Sp)?.delta_eff)
}

/// Initial concentration matching the `M = 0` cat.
pub fn calibrated_kappa0(config: &SweepConfig) -> Result<f64> {
    calibrate_kappa0(cat_delta_p(config.delta, config.xi)?, config.xi)
}

/// Sampled efficient-breeding runs for one `M`, ordered by repetition.
pub fn breeding_repetitions(config: &SweepConfig, rounds: u32) -> Result<Vec<(BredMode, MeasurementRecord)>> {
    let pc = config.protocol_config(rounds);
    (0..config.repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(config.seed, Variant::Breeding, rounds, rep);
            run_protocol(&pc, Protocol::Efficient, &mut Sampled(&mut rng))
        })
        .collect()
}

/// Sampled von Mises runs for one `M`, ordered by repetition.
pub fn mises_repetitions(config: &SweepConfig, rounds: u32, kappa0: f64) -> Result<Vec<MisesTrajectory>> {
    let mc = MisesConfig { rounds, delta: config.delta, xi: config.xi, kappa0 };
    (0..config.repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(config.seed, Variant::Mises, rounds, rep);
            run_mises_protocol(&mc, OutcomeChoice::Sample, &mut rng)
        })
        .collect()
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let needs_kappa = config.variants.iter().any(|v| matches!(v, Variant::Mises | Variant::Lower));
    let kappa0 = if needs_kappa { calibrated_kappa0(config)? } else { 0.0 };
    let mut rows = Vec::new();
    for &variant in &config.variants {
        for m in 0..=config.rounds_max {
            let values: Vec<f64> = match variant {
                Variant::Breeding => breeding_repetitions(config, m)?
                    .iter()
                    .map(|(mode, _)| mode_delta_p(mode, config.xi))
                    .collect::<Result<_>>()?,
                Variant::Mises => mises_repetitions(config, m, kappa0)?
                    .iter()
                    .map(|t| effective_squeezing_from_kappa_at(t.root().kappa, config.xi))
                    .collect(),
                Variant::Postselect => {
                    let (mode, _) = post_select_run(&config.protocol_config(m), Protocol::Efficient)?;
                    vec![mode_delta_p(&mode, config.xi)?]
                }
                Variant::Lower => {
                    vec![effective_squeezing_from_kappa_at(2f64.powi(m as i32) * kappa0, config.xi)]
                }
            };
            rows.push(row(variant, m, &values));
        }
    }
    Ok(SweepResult { rows })
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))
}

/// Wigner grid of `state`; JSON when the path ends in `.json`, CSV otherwise.
pub fn emit_wigner(state: &DisplacedSqueezedSum, spec: &WignerSpec, path: &Path) -> Result<WignerGrid> {
    let grid = state.wigner_grid(spec)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => grid.write_json(path)?,
        _ => grid.write_csv(path)?,
    }
    Ok(grid)
}

/// Squeezing, mean phases and correction of a bred mode, plus its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreedReport {
    pub protocol: Protocol,
    pub rounds: u32,
    pub delta: f64,
    pub xi: f64,
    pub delta_p: f64,
    pub delta_q: f64,
    pub theta_p: f64,
    pub theta_q: f64,
    pub correction: Complex64,
    pub mean_photon_number: f64,
    pub operators: usize,
}

impl BreedReport {
    pub fn new(mode: &BredMode, record: &MeasurementRecord) -> Result<Self> {
        let r = mode.state.squeezing_report(record.xi)?;
        Ok(BreedReport {
            protocol: record.protocol,
            rounds: record.rounds,
            delta: record.delta,
            xi: record.xi,
            delta_p: r.delta_p,
            delta_q: r.delta_q,
            theta_p: r.theta_p,
            theta_q: r.theta_q,
            correction: r.correction,
            mean_photon_number: mode.state.mean_photon_number()?,
            operators: mode.record.len(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::schema("report", e.to_string()))
    }
}

/// State of a recorded run, rebuilt from the record file.
pub fn replay(record_path: &Path) -> Result<(BredMode, MeasurementRecord)> {
    let record = MeasurementRecord::read(record_path)?;
    let mode = breeding::replay(&record)?;
    Ok((mode, record))
}

/// Final state moved by its correcting displacement.
pub fn corrected_state(mode: &BredMode, xi: f64) -> Result<DisplacedSqueezedSum> {
    let r = mode.state.squeezing_report(xi)?;
    Ok(mode.state.apply_displacement(r.correction))
}

/// `delta` bound rows `kappa,epsilon,delta,variance_bound` with `Var = 1/kappa`.
pub fn bounds_table(kappas: &[f64], epsilons: &[f64]) -> Result<String> {
    let mut out = String::from("kappa,epsilon,delta,variance_bound\n");
    for &k in kappas {
        for &e in epsilons {
            let d = crate::mises::improvement_probability_bound(k, k, e)?;
            let v = crate::mises::variance_bound(1.0 / k, 1.0 / k, e)?;
            let _ = writeln!(out, "{k},{e},{d},{v}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn deviations_split_at_the_mean() {
        let (m, up, down) = split_deviations(&[1.0, 2.0, 6.0]);
        assert_eq!(m, 3.0);
        assert_eq!(up, 3.0);
        assert!((down - (5.0f64 / 2.0).sqrt()).abs() < 1e-15);
        assert_eq!(split_deviations(&[0.5]), (0.5, 0.0, 0.0));
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(1, Variant::Breeding, 2, 0).random();
        let b: u64 = stream_rng(1, Variant::Breeding, 2, 1).random();
        let c: u64 = stream_rng(1, Variant::Mises, 2, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stream_rng(1, Variant::Breeding, 2, 0).random::<u64>());
    }

    #[test]
    fn config_defaults_and_errors() {
        let c = SweepConfig::from_json("{}").unwrap();
        assert_eq!(c, SweepConfig::default());
        assert!(matches!(SweepConfig::from_json("{\"repetitions\": 0}"), Err(Error::Schema { .. })));
        assert!(matches!(SweepConfig::from_json("{\"rounds_max\": 9}"), Err(Error::Resource(_))));
        assert!(matches!(SweepConfig::from_json("{\"bogus\": 1}"), Err(Error::Schema { .. })));
        assert_eq!("mises".parse::<Variant>().unwrap(), Variant::Mises);
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let c = SweepConfig { variants: vec![], ..SweepConfig::default() };
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.to_csv(), "variant,M,mean_delta_p,dev_up,dev_down,n\n");
    }

    #[test]
    fn deterministic_rows_have_no_spread() {
        let c = SweepConfig { rounds_max: 2, variants: vec![Variant::Postselect, Variant::Lower], ..SweepConfig::default() };
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.rows.iter().all(|row| row.n == 1 && row.dev_up == 0.0 && row.dev_down == 0.0));
    }
}

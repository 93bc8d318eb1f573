//! Von Mises model of breeding.
//!
//! A model grid state at round `m` of an `M`-round run is described by a
//! concentration `kappa` and mean `mu` of the von Mises wavefunction
//! `V_kappa(u) = exp(kappa cos(u) / 2) / sqrt(2 pi I0(kappa))` over the
//! periodic variable `u`, on a lattice scaled by `s_m = sqrt(2^{m - M})`.
//! Breeding two such states gives another one: the product of two von Mises
//! wavefunctions is a von Mises wavefunction.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::breeding::{squeezed_cat, MAX_ROUNDS};
use crate::error::{Error, Result};
use crate::gaussian_state::Stabilizer;
use crate::numerics::{
    bessel_ratio_i1_i0, bessel_ratios, ln_i0_unchecked, one_minus_bessel_ratio, wrap_angle, TabulatedCdf,
};

/// Below this value of `Delta * s_m` outcomes are drawn from the wrapped,
/// squeezing-independent density of `x`.
pub const X_REGIME_THRESHOLD: f64 = 0.3;

const X_GRID_CELLS: usize = 1 << 11;
const P_GRID_MIN_CELLS: usize = 1 << 14;
const P_ENVELOPE_WIDTHS: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VonMisesGridState {
    pub kappa: f64,
    /// Wrapped into `[-pi, pi)`.
    pub mu: f64,
    pub round: u32,
    pub rounds_total: u32,
    /// `sqrt(2^{round - rounds_total})`.
    pub scale: f64,
    pub delta: f64,
    pub xi: f64,
}

fn scale_for(round: u32, total: u32) -> f64 {
    2f64.powf((round as f64 - total as f64) / 2.0)
}

impl VonMisesGridState {
    pub fn new(kappa: f64, mu: f64, round: u32, rounds_total: u32, delta: f64, xi: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Domain(format!("concentration must be finite and >= 0, got {kappa}")));
        }
        if !mu.is_finite() {
            return Err(Error::Domain("mean must be finite".into()));
        }
        if round > rounds_total {
            return Err(Error::Contract(format!("round {round} beyond the last round {rounds_total}")));
        }
        if !(delta.is_finite() && delta > 0.0 && xi.is_finite() && xi > 0.0) {
            return Err(Error::Domain("squeezing and spacing must be > 0".into()));
        }
        Ok(VonMisesGridState {
            kappa,
            mu: wrap_angle(mu),
            round,
            rounds_total,
            scale: scale_for(round, rounds_total),
            delta,
            xi,
        })
    }

    /// Effective squeezing at this node's own spacing `xi / s_m`.
    pub fn delta_p(&self) -> f64 {
        effective_squeezing_from_kappa_at(self.kappa, self.xi / self.scale)
    }
}

/// `V_kappa(x)`.
pub fn von_mises_wavefunction(kappa: f64, x: f64) -> f64 {
    (0.5 * kappa * x.cos() - 0.5 * (TAU.ln() + ln_i0_unchecked(kappa))).exp()
}

/// `V_{k1}(x - mu1) V_{k2}(x - mu2) = exp(log_prefactor) V_kappa(x - mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VonMisesProduct {
    pub kappa: f64,
    pub mu: f64,
    pub log_prefactor: f64,
}

pub fn von_mises_product(kappa1: f64, mu1: f64, kappa2: f64, mu2: f64) -> Result<VonMisesProduct> {
    if !(kappa1.is_finite() && kappa1 >= 0.0 && kappa2.is_finite() && kappa2 >= 0.0) {
        return Err(Error::Domain(format!("concentrations must be >= 0, got {kappa1} and {kappa2}")));
    }
    // resultant of the two phasors kappa_i e^{i mu_i}
    let re = kappa1 * mu1.cos() + kappa2 * mu2.cos();
    let im = kappa1 * mu1.sin() + kappa2 * mu2.sin();
    let kappa = re.hypot(im).min(kappa1 + kappa2);
    let mu = if kappa > 0.0 { wrap_angle(im.atan2(re)) } else { 0.0 };
    let log_prefactor = 0.5 * (ln_i0_unchecked(kappa) - TAU.ln() - ln_i0_unchecked(kappa1) - ln_i0_unchecked(kappa2));
    Ok(VonMisesProduct { kappa, mu, log_prefactor })
}

fn check_pair(s1: &VonMisesGridState, s2: &VonMisesGridState) -> Result<()> {
    if s1.round != s2.round || s1.rounds_total != s2.rounds_total {
        return Err(Error::Contract(format!("breeding rounds {} and {}", s1.round, s2.round)));
    }
    if s1.round >= s1.rounds_total {
        return Err(Error::Contract("the final round cannot be bred further".into()));
    }
    if s1.delta != s2.delta || s1.xi != s2.xi {
        return Err(Error::Contract("breeding states with different squeezing or spacing".into()));
    }
    Ok(())
}

/// Output state for a shifted-mean offset `p_tilde`.
fn merge(s1: &VonMisesGridState, s2: &VonMisesGridState, p_tilde: f64) -> Result<VonMisesGridState> {
    let prod = von_mises_product(s1.kappa, s1.mu - p_tilde, s2.kappa, s2.mu + p_tilde)?;
    VonMisesGridState::new(prod.kappa, prod.mu, s1.round + 1, s1.rounds_total, s1.delta, s1.xi)
}

/// `p_tilde = 2 pi p / (xi s_{m+1})`.
pub fn p_tilde(s: &VonMisesGridState, p_out: f64) -> f64 {
    TAU * p_out / (s.xi * s.scale * SQRT_2)
}

/// One breeding round in `(kappa, mu)` space for homodyne outcome `p_out`.
pub fn breed_step(s1: &VonMisesGridState, s2: &VonMisesGridState, p_out: f64) -> Result<VonMisesGridState> {
    check_pair(s1, s2)?;
    if !p_out.is_finite() {
        return Err(Error::Domain("homodyne outcome must be finite".into()));
    }
    merge(s1, s2, p_tilde(s1, p_out))
}

/// One breeding round parametrized by `x = mu1 - mu2 - 2 p_tilde (mod 2 pi)`.
/// The two preimages of `x` differ by `pi` in `p_tilde`; `branch` picks one.
pub fn breed_step_x(s1: &VonMisesGridState, s2: &VonMisesGridState, x: f64, branch: bool) -> Result<VonMisesGridState> {
    check_pair(s1, s2)?;
    let pt = 0.5 * (s1.mu - s2.mu - x) + if branch { PI } else { 0.0 };
    merge(s1, s2, pt)
}

/// `kappa_out` as a function of `x`.
pub fn kappa_out(kappa1: f64, kappa2: f64, x: f64) -> f64 {
    let (re, im) = (kappa1 + kappa2 * x.cos(), kappa2 * x.sin());
    re.hypot(im).min(kappa1 + kappa2)
}

/// `ln P(x) = ln I0(kappa_out(x)) - ln(2 pi) - ln I0(kappa1) - ln I0(kappa2)`.
pub fn ln_density_x(kappa1: f64, kappa2: f64, x: f64) -> f64 {
    ln_i0_unchecked(kappa_out(kappa1, kappa2, x)) - TAU.ln() - ln_i0_unchecked(kappa1) - ln_i0_unchecked(kappa2)
}

pub fn density_x(kappa1: f64, kappa2: f64, x: f64) -> f64 {
    ln_density_x(kappa1, kappa2, x).exp()
}

/// Tabulated `P(x)` on `[0, pi]`; the density is even in `x`.
#[derive(Clone, Debug)]
pub struct XSampler {
    table: TabulatedCdf,
}

impl XSampler {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self> {
        if !(kappa1.is_finite() && kappa1 >= 0.0 && kappa2.is_finite() && kappa2 >= 0.0) {
            return Err(Error::Domain("concentrations must be >= 0".into()));
        }
        // shift by the peak log-density before exponentiating
        let peak = ln_density_x(kappa1, kappa2, 0.0);
        let table = TabulatedCdf::from_density(|x| (ln_density_x(kappa1, kappa2, x) - peak).exp(), 0.0, PI, X_GRID_CELLS);
        Ok(XSampler { table })
    }

    /// Draw `x` in `[-pi, pi)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.table.quantile(rng.random::<f64>());
        let x = if rng.random::<bool>() { -x } else { x };
        wrap_angle(x)
    }

    /// CDF of `x` over `[-pi, pi)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let half = self.table.cdf(x.abs());
        if x >= 0.0 {
            0.5 + 0.5 * half
        } else {
            0.5 - 0.5 * half
        }
    }
}

/// Draw `x` from `P(x)`.
pub fn sample_x<R: Rng + ?Sized>(kappa1: f64, kappa2: f64, rng: &mut R) -> Result<f64> {
    Ok(XSampler::new(kappa1, kappa2)?.sample(rng))
}

/// `P(p) ∝ I0(kappa_out(p)) exp(-p^2 Delta^2 / xi^2)`, normalized numerically.
#[derive(Clone, Debug)]
pub struct MisesOutcomeDensity {
    s1: VonMisesGridState,
    s2: VonMisesGridState,
    ln_peak: f64,
    table: TabulatedCdf,
}

impl MisesOutcomeDensity {
    fn ln_unnormalized(&self, p: f64) -> f64 {
        ln_p_density(&self.s1, &self.s2, p) - self.ln_peak
    }

    pub fn density(&self, p: f64) -> f64 {
        self.ln_unnormalized(p).exp() / self.table.mass()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.table.quantile(rng.random::<f64>())
    }

    pub fn support(&self) -> (f64, f64) {
        self.table.support()
    }
}

fn ln_p_density(s1: &VonMisesGridState, s2: &VonMisesGridState, p: f64) -> f64 {
    let x = s1.mu - s2.mu - 2.0 * p_tilde(s1, p);
    let r = p * s1.delta / s1.xi;
    ln_i0_unchecked(kappa_out(s1.kappa, s2.kappa, x)) - r * r
}

pub fn outcome_density(s1: &VonMisesGridState, s2: &VonMisesGridState) -> Result<MisesOutcomeDensity> {
    check_pair(s1, s2)?;
    let half = P_ENVELOPE_WIDTHS * s1.xi / s1.delta;
    // period of kappa_out in p is xi s_{m+1} / 2
    let period = 0.5 * s1.xi * s1.scale * SQRT_2;
    let cells = P_GRID_MIN_CELLS.max((64.0 * 2.0 * half / period).ceil() as usize);
    if cells > 1 << 24 {
        return Err(Error::Resource(format!("outcome density needs {cells} grid cells")));
    }
    let ln_peak = ln_i0_unchecked(s1.kappa + s2.kappa);
    let table = TabulatedCdf::from_density(|p| (ln_p_density(s1, s2, p) - ln_peak).exp(), -half, half, cells);
    Ok(MisesOutcomeDensity { s1: *s1, s2: *s2, ln_peak, table })
}

/// `Delta_p = sqrt(ln(I0^2 / I1^2) / pi)` of a model state on the square lattice.
pub fn effective_squeezing_from_kappa(kappa: f64) -> f64 {
    effective_squeezing_from_kappa_at(kappa, (TAU).sqrt())
}

/// `Delta_p` for spacing `xi`: `(sqrt(2)/xi) sqrt(-2 ln(I1/I0))`.
pub fn effective_squeezing_from_kappa_at(kappa: f64, xi: f64) -> f64 {
    if kappa <= 0.0 {
        return f64::INFINITY;
    }
    let ln_rho = match one_minus_bessel_ratio(kappa) {
        Ok(om) if om < 0.5 => (-om).ln_1p(),
        _ => bessel_ratio_i1_i0(kappa).map(f64::ln).unwrap_or(f64::NEG_INFINITY),
    };
    SQRT_2 / xi * (-2.0 * ln_rho).max(0.0).sqrt()
}

/// Squeezing of the single cat that starts an `M = 0` run.
pub fn cat_delta_p(delta: f64, xi: f64) -> Result<f64> {
    let cat = squeezed_cat(delta, xi / SQRT_2, true)?;
    Ok(cat.state.effective_squeezing(xi / SQRT_2, Stabilizer::Sp)?.delta_eff)
}

/// Largest `kappa0` (to 1e-10) with `Delta_p(kappa0) >= target` at spacing `xi`.
pub fn calibrate_kappa0(target_delta_p: f64, xi: f64) -> Result<f64> {
    if !(target_delta_p.is_finite() && target_delta_p > 0.0) {
        return Err(Error::Domain(format!("target squeezing must be > 0, got {target_delta_p}")));
    }
    let f = |k: f64| effective_squeezing_from_kappa_at(k, xi);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) >= target_delta_p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain("target squeezing is below the reachable range".into()));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target_delta_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Lower bound on `P(kappa_out >= (kappa1 + kappa2)(1 - eps))`.
pub fn improvement_probability_bound(kappa1: f64, kappa2: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let min_kappa = 1.0 / (1.0 - epsilon);
    if !(kappa1 >= min_kappa && kappa2 >= min_kappa) || !(kappa1.is_finite() && kappa2.is_finite()) {
        return Err(Error::Domain(format!("concentrations must be >= 1/(1 - epsilon) = {min_kappa}")));
    }
    let sum = kappa1 + kappa2;
    let pre = (TAU * kappa1 * kappa2 / (sum * (1.0 - epsilon))).sqrt();
    Ok(1.0 - pre * (-epsilon * (sum + 1.0) + 1.25).exp())
}

/// Upper bound on the output variance that holds with the probability above.
pub fn variance_bound(var1: f64, var2: f64, epsilon: f64) -> Result<f64> {
    if !(var1 > 0.0 && var2 > 0.0 && var1.is_finite() && var2.is_finite()) {
        return Err(Error::Domain("variances must be finite and > 0".into()));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    Ok(var1 * var2 / ((1.0 - epsilon) * (var1 + var2)))
}

/// Terms of `N^2 - 1 = 2 sum_{n >= 1} rho_n cos(n mu) exp(-pi^2 n^2 / sigma^2)` in log form.
fn normalization_terms(kappa: f64, mu: f64, sigma: f64) -> Result<Vec<(f64, f64)>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("envelope width must be > 0, got {sigma}")));
    }
    // beyond n_max the Gaussian factor is below e^-745 relative to n = 1
    let n_max = ((sigma * 30.0 / PI).ceil() as usize).max(1) + 1;
    let rho = bessel_ratios(kappa, n_max)?;
    Ok(rho
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let n = (i + 1) as f64;
            let c = (n * mu).cos();
            (2f64.ln() + r.ln() + c.abs().ln() - PI * PI * n * n / (sigma * sigma), c.signum())
        })
        .collect())
}

/// `N^2` of a model state with envelope width `sigma`.
pub fn normalization_sq(kappa: f64, mu: f64, sigma: f64) -> Result<f64> {
    Ok(1.0 + normalization_terms(kappa, mu, sigma)?.iter().map(|&(l, s)| s * l.exp()).sum::<f64>())
}

/// `ln |N^2 - 1|`, usable long after `N^2 - 1` underflows.
pub fn log_normalization_excess(kappa: f64, mu: f64, sigma: f64) -> Result<f64> {
    let terms = normalization_terms(kappa, mu, sigma)?;
    let peak = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let s: f64 = terms.iter().map(|&(l, sign)| sign * (l - peak).exp()).sum();
    Ok(peak + s.abs().ln())
}

/// How each merge picks its outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeChoice {
    Sample,
    /// `x = 0`, the most likely outcome.
    Mode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MisesConfig {
    pub rounds: u32,
    pub delta: f64,
    pub xi: f64,
    pub kappa0: f64,
}

impl MisesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds > MAX_ROUNDS {
            return Err(Error::Resource(format!("{} rounds exceeds the limit of {MAX_ROUNDS}", self.rounds)));
        }
        if !(self.kappa0.is_finite() && self.kappa0 >= 0.0) {
            return Err(Error::Domain(format!("initial concentration must be >= 0, got {}", self.kappa0)));
        }
        Ok(())
    }
}

/// States at every node; `levels[m][i]` is node `i` after round `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MisesTrajectory {
    pub levels: Vec<Vec<VonMisesGridState>>,
}

impl MisesTrajectory {
    pub fn root(&self) -> &VonMisesGridState {
        &self.levels.last().expect("at least the leaves")[0]
    }
}

fn merge_choice<R: Rng + ?Sized>(
    s1: &VonMisesGridState,
    s2: &VonMisesGridState,
    choice: OutcomeChoice,
    rng: &mut R,
) -> Result<VonMisesGridState> {
    match choice {
        OutcomeChoice::Mode => breed_step_x(s1, s2, 0.0, false),
        OutcomeChoice::Sample if s1.delta * s1.scale < X_REGIME_THRESHOLD => {
            let x = sample_x(s1.kappa, s2.kappa, rng)?;
            breed_step_x(s1, s2, x, rng.random::<bool>())
        }
        OutcomeChoice::Sample => {
            let p = outcome_density(s1, s2)?.sample(rng);
            breed_step(s1, s2, p)
        }
    }
}

/// Binary-tree run over `2^M` leaves with `kappa = kappa0`, `mu = 0`.
pub fn run_mises_protocol<R: Rng + ?Sized>(
    config: &MisesConfig,
    choice: OutcomeChoice,
    rng: &mut R,
) -> Result<MisesTrajectory> {
    config.validate()?;
    let m = config.rounds;
    let leaf = VonMisesGridState::new(config.kappa0, 0.0, 0, m, config.delta, config.xi)?;
    let mut levels = vec![vec![leaf; 1 << m]];
    for _ in 0..m {
        let prev = levels.last().expect("nonempty");
        let next = prev.chunks_exact(2).map(|pair| merge_choice(&pair[0], &pair[1], choice, rng)).collect::<Result<Vec<_>>>()?;
        levels.push(next);
    }
    Ok(MisesTrajectory { levels })
}

/// Append trajectories as CSV rows `repetition,round,node,kappa,mu,delta_p`.
pub fn write_trajectories_csv<W: Write>(out: &mut W, runs: &[(usize, MisesTrajectory)]) -> std::io::Result<()> {
    writeln!(out, "repetition,round,node,kappa,mu,delta_p")?;
    for (rep, traj) in runs {
        for (round, level) in traj.levels.iter().enumerate() {
            for (node, s) in level.iter().enumerate() {
                writeln!(out, "{rep},{round},{node},{},{},{}", s.kappa, s.mu, s.delta_p())?;
            }
        }
    }
    Ok(())
}

pub fn save_trajectories_csv(path: &Path, runs: &[(usize, MisesTrajectory)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_trajectories_csv(&mut w, runs).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

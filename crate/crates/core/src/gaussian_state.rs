//! Finite superpositions of displaced squeezed vacua.
//!
//! Conventions: `q = (a + a^dag)/sqrt(2)`, `p = i(a^dag - a)/sqrt(2)`,
//! `D(alpha) = exp(alpha a^dag - alpha^* a)`, and `S(Delta)` squeezes `q` by
//! `Delta` so that `Var(q) = Delta^2 / 2` in `S(Delta)|vac>`. A real coherent
//! amplitude `alpha` translates `q` by `sqrt(2) alpha`; the stabilizers of a
//! grid with spacing `xi` are `S_p = D(xi/sqrt(2))` and `S_q = D(i xi/sqrt(2))`.
//!
//! Every matrix element between components reduces to the characteristic
//! function of the squeezed vacuum,
//! `<vac|S^dag D(z) S|vac> = exp(-Im(z)^2 Delta^2/2 - Re(z)^2/(2 Delta^2))`,
//! times the phase picked up when displacements are composed,
//! `D(a) D(b) = exp(i Im(a b^*)) D(a + b)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{stable_complex_sum, wrap_angle, LogComplex};

const NORMALIZATION_TOL: f64 = 1e-12;
const LATTICE_TOL: f64 = 1e-9;

/// `sum_t c_t D(offset + t * step) S(delta) |vac>`.
///
/// Component amplitudes live on a one-dimensional real lattice with an
/// optional complex origin; the origin is only non-real after a corrective
/// displacement has been applied.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacedSqueezedSum {
    delta: f64,
    step: f64,
    offset: Complex64,
    coeffs: BTreeMap<i64, Complex64>,
    normalized: bool,
}

/// Which stabilizer an effective squeezing parameter refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stabilizer {
    /// `S_p = D(u)`, a translation of `q`.
    Sp,
    /// `S_q = D(i u)`, a translation of `p`.
    Sq,
}

/// Mean phase and effective squeezing parameter with respect to one displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingEstimate {
    pub theta: f64,
    pub delta_eff: f64,
}

impl SqueezingEstimate {
    /// Build from `ln|Tr D rho|`, `arg Tr D rho` and the coherent amplitude `u` of `D`.
    pub fn from_log_expectation(value: LogComplex, u: f64) -> Self {
        if value.is_zero() {
            return SqueezingEstimate { theta: 0.0, delta_eff: f64::INFINITY };
        }
        // |Tr D rho| <= 1; rounding can push the log a hair above zero
        let lm = value.log_magnitude.min(0.0);
        SqueezingEstimate { theta: wrap_angle(value.phase), delta_eff: (-2.0 * lm).sqrt() / u }
    }
}

/// Mean phases and effective squeezing of both grid stabilizers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub theta_p: f64,
    pub delta_p: f64,
    pub theta_q: f64,
    pub delta_q: f64,
    /// Coherent amplitude of the displacement that brings both mean phases to zero.
    pub correction: Complex64,
}

/// Sampling window of a Wigner grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerSpec {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    pub q_points: usize,
    pub p_points: usize,
}

impl Default for WignerSpec {
    fn default() -> Self {
        WignerSpec { q_range: (-4.0, 4.0), p_range: (-4.0, 4.0), q_points: 201, p_points: 201 }
    }
}

/// `values[i][j] = W(q[j], p[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    /// First row `p\q,q_1,...`; then one row `p_i,W(q_1,p_i),...` per momentum.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("p\\q");
        for q in &self.q {
            let _ = write!(out, ",{q}");
        }
        out.push('\n');
        for (p, row) in self.p.iter().zip(&self.values) {
            let _ = write!(out, "{p}");
            for w in row {
                let _ = write!(out, ",{w}");
            }
            out.push('\n');
        }
        out
    }

    /// `{"q": [...], "p": [...], "w": [[row per p]]}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "q": self.q, "p": self.p, "w": self.values }).to_string()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// `(q, p)` of the largest grid value.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > best.0 {
                    best = (w, i, j);
                }
            }
        }
        (self.q[best.2], self.p[best.1])
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
}

/// `ln` of the squeezed-vacuum characteristic function at `z`.
#[inline]
fn ln_char(delta: f64, z: Complex64) -> f64 {
    -0.5 * z.im * z.im * delta * delta - 0.5 * z.re * z.re / (delta * delta)
}

/// `<vac|S^dag D(-a_j) D(beta) D(a_k) S|vac>` in log form.
#[inline]
fn displacement_kernel(delta: f64, aj: Complex64, beta: Complex64, ak: Complex64) -> LogComplex {
    let phase = (beta * ak.conj()).im - (aj * beta.conj()).im - (aj * ak.conj()).im;
    LogComplex::new(ln_char(delta, beta + ak - aj), phase)
}

/// Squeezed-vacuum position wavefunction.
#[inline]
fn vac_q(delta: f64, q: f64) -> f64 {
    (PI * delta * delta).powf(-0.25) * (-0.5 * q * q / (delta * delta)).exp()
}

/// Squeezed-vacuum momentum wavefunction.
#[inline]
fn vac_p(delta: f64, p: f64) -> f64 {
    (delta * delta / PI).powf(0.25) * (-0.5 * p * p * delta * delta).exp()
}

impl DisplacedSqueezedSum {
    /// `S(delta)|vac>`.
    pub fn squeezed_vacuum(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, Complex64::new(1.0, 0.0));
        Ok(DisplacedSqueezedSum { delta, step: 1.0, offset: Complex64::new(0.0, 0.0), coeffs, normalized: true })
    }

    /// Build a state from raw lattice data. The result is marked unnormalized.
    pub fn from_components(
        delta: f64,
        step: f64,
        offset: Complex64,
        coeffs: BTreeMap<i64, Complex64>,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Domain(format!("lattice step must be finite and > 0, got {step}")));
        }
        if !(offset.re.is_finite() && offset.im.is_finite()) {
            return Err(Error::Domain("lattice offset must be finite".into()));
        }
        let coeffs: BTreeMap<i64, Complex64> = coeffs.into_iter().filter(|(_, c)| c.norm_sqr() > 0.0).collect();
        if coeffs.is_empty() {
            return Err(Error::Domain("state needs at least one nonzero coefficient".into()));
        }
        if coeffs.values().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(DisplacedSqueezedSum { delta, step, offset, coeffs, normalized: false })
    }

    /// Coherent state `D(alpha)|vac>`.
    pub fn coherent(alpha: Complex64) -> Self {
        let mut s = Self::squeezed_vacuum(1.0).expect("delta = 1 is valid");
        s.offset = alpha;
        s
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn offset(&self) -> Complex64 {
        self.offset
    }

    pub fn coefficients(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Coherent amplitude of lattice site `t`.
    pub fn amplitude(&self, t: i64) -> Complex64 {
        self.offset + Complex64::new(self.step * t as f64, 0.0)
    }

    /// `(amplitude, coefficient)` pairs in lattice order.
    pub fn components(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.coeffs.iter().map(move |(&t, &c)| (self.amplitude(t), c))
    }

    fn ensure_normalized(&self, what: &str) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::Contract(format!("{what} requires a normalized state")))
        }
    }

    /// Move all coefficients onto a lattice whose step is `alpha`, when the
    /// state has a single support point.
    fn rebased_single(&self, step: f64) -> Self {
        let (&t0, &c) = self.coeffs.iter().next().expect("nonempty");
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, c);
        DisplacedSqueezedSum { delta: self.delta, step, offset: self.amplitude(t0), coeffs, normalized: self.normalized }
    }

    /// Integer `k` with `alpha = k * step`, if any.
    fn lattice_multiple(&self, alpha: f64) -> Result<i64> {
        let k = alpha / self.step;
        let kr = k.round();
        if (k - kr).abs() > LATTICE_TOL * k.abs().max(1.0) {
            return Err(Error::Lattice { amplitude: alpha, step: self.step });
        }
        Ok(kr as i64)
    }

    /// Apply `1 + e^{i phi} D(alpha)` for real `alpha`. The result is unnormalized.
    pub fn apply_measurement_op(&self, phi: f64, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || !phi.is_finite() {
            return Err(Error::Domain("measurement operator needs finite phase and amplitude".into()));
        }
        let base = if self.coeffs.len() == 1 && alpha != 0.0 { self.rebased_single(alpha.abs()) } else { self.clone() };
        let k = base.lattice_multiple(alpha)?;
        // D(alpha) D(o + t step) = e^{-i alpha Im o} D(o + (t + k) step)
        let rot = Complex64::from_polar(1.0, phi - alpha * base.offset.im);
        let mut coeffs = base.coeffs.clone();
        for (&t, &c) in &base.coeffs {
            *coeffs.entry(t + k).or_insert(Complex64::new(0.0, 0.0)) += rot * c;
        }
        coeffs.retain(|_, c| c.norm_sqr() > 0.0);
        if coeffs.is_empty() {
            return Err(Error::Domain("measurement operator annihilated the state".into()));
        }
        Ok(DisplacedSqueezedSum { coeffs, normalized: false, ..base })
    }

    /// `D(gamma) |self>`.
    pub fn apply_displacement(&self, gamma: Complex64) -> Self {
        // D(g) D(o + t s) = exp(i Im(g conj(o)) + i t s Im g) D(o + g + t s)
        let base_phase = (gamma * self.offset.conj()).im;
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&t, &c)| (t, c * Complex64::from_polar(1.0, base_phase + t as f64 * self.step * gamma.im)))
            .collect();
        DisplacedSqueezedSum { offset: self.offset + gamma, coeffs, ..self.clone() }
    }

    fn bilinear<F>(&self, other: &Self, kernel: F) -> LogComplex
    where
        F: Fn(Complex64, Complex64) -> LogComplex,
    {
        let mut terms = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for (aj, cj) in self.components() {
            let lcj = LogComplex::from_complex(cj.conj());
            for (ak, ck) in other.components() {
                terms.push(lcj * LogComplex::from_complex(ck) * kernel(aj, ak));
            }
        }
        stable_complex_sum(terms)
    }

    /// `<self|self>` in log form.
    pub fn log_norm_sq(&self) -> f64 {
        let z = ZERO;
        self.bilinear(self, |aj, ak| displacement_kernel(self.delta, aj, z, ak)).log_magnitude
    }

    pub fn norm_sq(&self) -> f64 {
        self.log_norm_sq().exp()
    }

    /// Rescale to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let ln = self.log_norm_sq();
        if !ln.is_finite() {
            return Err(Error::Domain("cannot normalize a state of zero or infinite norm".into()));
        }
        let scale = (-0.5 * ln).exp();
        let mut coeffs: BTreeMap<i64, Complex64> = self.coeffs.iter().map(|(&t, &c)| (t, c * scale)).collect();
        if !scale.is_finite() || scale == 0.0 {
            // extreme norms: rescale in log space
            coeffs = self
                .coeffs
                .iter()
                .map(|(&t, &c)| {
                    let l = LogComplex::from_complex(c);
                    (t, LogComplex::new(l.log_magnitude - 0.5 * ln, l.phase).to_complex())
                })
                .collect();
        }
        Ok(DisplacedSqueezedSum { coeffs, normalized: true, ..self.clone() })
    }

    /// `<self|D(beta)|self>`; the state must be normalized.
    pub fn expect_displacement(&self, beta: Complex64) -> Result<Complex64> {
        Ok(self.log_expect_displacement(beta)?.to_complex())
    }

    pub fn log_expect_displacement(&self, beta: Complex64) -> Result<LogComplex> {
        self.ensure_normalized("expect_displacement")?;
        Ok(self.bilinear(self, |aj, ak| displacement_kernel(self.delta, aj, beta, ak)))
    }

    /// Mean phase and effective squeezing with respect to `D(u)` or `D(i u)`.
    pub fn effective_squeezing(&self, u: f64, stabilizer: Stabilizer) -> Result<SqueezingEstimate> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::Domain(format!("displacement magnitude must be > 0, got {u}")));
        }
        let beta = match stabilizer {
            Stabilizer::Sp => Complex64::new(u, 0.0),
            Stabilizer::Sq => Complex64::new(0.0, u),
        };
        Ok(SqueezingEstimate::from_log_expectation(self.log_expect_displacement(beta)?, u))
    }

    /// `(<q>, <p>)`.
    pub fn mean_quadratures(&self) -> Result<(f64, f64)> {
        self.ensure_normalized("mean_quadratures")?;
        let d = self.delta;
        let mut q = Complex64::new(0.0, 0.0);
        let mut p = Complex64::new(0.0, 0.0);
        for (aj, cj) in self.components() {
            for (ak, ck) in self.components() {
                let f0 = displacement_kernel(d, aj, ZERO, ak).to_complex() * cj.conj() * ck;
                let diff = ak - aj;
                let gq = Complex64::new(-d * d * diff.im * FRAC_1_SQRT_2, (ak.re + aj.re) * FRAC_1_SQRT_2);
                let gp = Complex64::new(-diff.re * FRAC_1_SQRT_2 / (d * d), -(ak.im + aj.im) * FRAC_1_SQRT_2);
                q += f0 * gq * Complex64::new(0.0, -1.0);
                p += f0 * gp * Complex64::new(0.0, 1.0);
            }
        }
        Ok((q.re, p.re))
    }

    /// Both stabilizer estimates at spacing `xi` plus the smallest correcting
    /// displacement that zeroes the mean phases and recentres the envelope.
    pub fn squeezing_report(&self, xi: f64) -> Result<SqueezingReport> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Domain(format!("spacing must be > 0, got {xi}")));
        }
        let u = xi * FRAC_1_SQRT_2;
        let sp = self.effective_squeezing(u, Stabilizer::Sp)?;
        let sq = self.effective_squeezing(u, Stabilizer::Sq)?;
        let (mq, mp) = self.mean_quadratures()?;
        // D(g): theta_p -> theta_p - sqrt(2) xi Im g, theta_q -> theta_q + sqrt(2) xi Re g;
        // both are periodic in g with period sqrt(2) pi / xi
        let period = SQRT_2 * PI / xi;
        let base_re = -sq.theta / (SQRT_2 * xi);
        let base_im = sp.theta / (SQRT_2 * xi);
        // D(g) moves <q> by sqrt(2) Re g and <p> by sqrt(2) Im g
        let k = ((-mq / SQRT_2 - base_re) / period).round();
        let l = ((-mp / SQRT_2 - base_im) / period).round();
        let correction = Complex64::new(base_re + k * period, base_im + l * period);
        Ok(SqueezingReport { theta_p: sp.theta, delta_p: sp.delta_eff, theta_q: sq.theta, delta_q: sq.delta_eff, correction })
    }

    /// Position-space amplitude `<q|self>`.
    pub fn q_wavefunction(&self, q: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, c) in self.components() {
            let (u, v) = (SQRT_2 * a.im, SQRT_2 * a.re);
            acc += c * Complex64::from_polar(vac_q(self.delta, q - v), u * q - 0.5 * u * v);
        }
        acc
    }

    /// Momentum-space amplitude `<p|self>`.
    pub fn p_wavefunction(&self, p: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, c) in self.components() {
            let (u, v) = (SQRT_2 * a.im, SQRT_2 * a.re);
            acc += c * Complex64::from_polar(vac_p(self.delta, p - u), 0.5 * u * v - v * p);
        }
        acc
    }

    /// Wigner function at a single phase-space point.
    pub fn wigner(&self, q: f64, p: f64) -> Result<f64> {
        self.ensure_normalized("wigner")?;
        Ok(self.wigner_unchecked(q, p))
    }

    fn wigner_unchecked(&self, q: f64, p: f64) -> f64 {
        let gamma = Complex64::new(q, p) * FRAC_1_SQRT_2;
        let d = self.delta;
        let comps: Vec<(Complex64, Complex64)> = self.components().collect();
        let mut acc = 0.0;
        for (j, &(aj, cj)) in comps.iter().enumerate() {
            for &(ak, ck) in &comps[j..] {
                let phase = -2.0 * (gamma * ak.conj()).im - 2.0 * (aj * gamma.conj()).im + (aj * ak.conj()).im;
                let z = gamma * 2.0 - aj - ak;
                let w = (cj.conj() * ck * Complex64::from_polar(ln_char(d, z).exp(), phase)).re;
                // (j, k) and (k, j) are complex conjugates
                acc += if aj == ak { w } else { 2.0 * w };
            }
        }
        acc / PI
    }

    /// Wigner function sampled on a rectangular grid.
    pub fn wigner_grid(&self, spec: &WignerSpec) -> Result<WignerGrid> {
        use rayon::prelude::*;
        self.ensure_normalized("wigner_grid")?;
        if spec.q_points < 2 || spec.p_points < 2 {
            return Err(Error::Domain("Wigner grid needs at least 2 points per axis".into()));
        }
        let q = linspace(spec.q_range.0, spec.q_range.1, spec.q_points);
        let p = linspace(spec.p_range.0, spec.p_range.1, spec.p_points);
        let values = p.par_iter().map(|&pi| q.iter().map(|&qj| self.wigner_unchecked(qj, pi)).collect()).collect();
        Ok(WignerGrid { q, p, values })
    }

    /// `<a^dag a>` from the closed-form second moments of each component pair.
    pub fn mean_photon_number(&self) -> Result<f64> {
        self.ensure_normalized("mean_photon_number")?;
        let d = self.delta;
        let d2 = d * d;
        let terms = self.components().flat_map(|(aj, cj)| {
            self.components().map(move |(ak, ck)| {
                let f0 = displacement_kernel(d, aj, ZERO, ak);
                let diff = ak - aj;
                let gq = Complex64::new(-d2 * diff.im * FRAC_1_SQRT_2, (ak.re + aj.re) * FRAC_1_SQRT_2);
                let gp = Complex64::new(-diff.re * FRAC_1_SQRT_2 / d2, -(ak.im + aj.im) * FRAC_1_SQRT_2);
                let q2 = 0.5 * d2 - gq * gq;
                let p2 = 0.5 / d2 - gp * gp;
                let n = (q2 + p2 - 1.0) * 0.5;
                LogComplex::from_complex(cj.conj() * ck) * f0 * LogComplex::from_complex(n)
            })
        });
        Ok(stable_complex_sum(terms.collect::<Vec<_>>()).to_complex().re)
    }

    /// Approximate grid state `sum_{|t| <= t_max} exp(-pi kappa^2 t^2) S_p^t S(delta)|vac>`.
    pub fn gkp_approx(delta: f64, kappa_env: f64, xi: f64, t_max: u32) -> Result<Self> {
        if t_max < 1 {
            return Err(Error::Domain("t_max must be >= 1".into()));
        }
        if !(xi.is_finite() && xi > 0.0) || !(kappa_env.is_finite() && kappa_env >= 0.0) {
            return Err(Error::Domain("grid approximation needs xi > 0 and kappa >= 0".into()));
        }
        let t_max = t_max as i64;
        let coeffs = (-t_max..=t_max)
            .map(|t| (t, Complex64::new((-PI * kappa_env * kappa_env * (t * t) as f64).exp(), 0.0)))
            .collect();
        Self::from_components(delta, xi * FRAC_1_SQRT_2, ZERO, coeffs)?.normalized()
    }
}

/// `<a|b>` for states sharing the squeezing parameter.
pub fn overlap(a: &DisplacedSqueezedSum, b: &DisplacedSqueezedSum) -> Result<Complex64> {
    Ok(log_overlap(a, b)?.to_complex())
}

pub fn log_overlap(a: &DisplacedSqueezedSum, b: &DisplacedSqueezedSum) -> Result<LogComplex> {
    if !same_delta(a.delta, b.delta) {
        return Err(Error::Unsupported(format!(
            "overlap between different squeezing parameters {} and {}",
            a.delta, b.delta
        )));
    }
    Ok(a.bilinear(b, |aj, ak| displacement_kernel(a.delta, aj, ZERO, ak)))
}

/// `|<a|b>|^2 / (<a|a><b|b>)`.
pub fn fidelity(a: &DisplacedSqueezedSum, b: &DisplacedSqueezedSum) -> Result<f64> {
    let ov = log_overlap(a, b)?;
    if ov.is_zero() {
        return Ok(0.0);
    }
    Ok((2.0 * ov.log_magnitude - a.log_norm_sq() - b.log_norm_sq()).exp())
}

/// Upper bound `(2 Delta / pi) exp(-pi / (4 Delta^2))` on the logical error
/// probability of a GKP qubit with `Delta_p = Delta_q = Delta`.
pub fn gkp_logical_error_bound(delta: f64) -> f64 {
    2.0 * delta / PI * (-PI / (4.0 * delta * delta)).exp()
}

pub(crate) fn same_delta(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("squeezing parameter must be finite and > 0, got {delta}")));
    }
    Ok(())
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Whether `|<psi|psi> - 1|` is within the normalization tolerance.
pub fn is_unit_norm(state: &DisplacedSqueezedSum) -> bool {
    (state.norm_sq() - 1.0).abs() < NORMALIZATION_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn squeezed_vacuum_stabilizers() {
        let s = DisplacedSqueezedSum::squeezed_vacuum(0.2).unwrap();
        let xi = (2.0 * PI).sqrt();
        let r = s.squeezing_report(xi).unwrap();
        assert!((r.delta_q - 0.2).abs() < 1e-12);
        assert!((r.delta_p - 5.0).abs() < 1e-12);
        assert_eq!(r.theta_q, 0.0);
        assert_eq!(r.correction.re, 0.0);

        let v = DisplacedSqueezedSum::squeezed_vacuum(1.0).unwrap();
        let r = v.squeezing_report(xi).unwrap();
        assert!((r.delta_p - 1.0).abs() < 1e-12 && (r.delta_q - 1.0).abs() < 1e-12);
        assert!(DisplacedSqueezedSum::squeezed_vacuum(0.0).is_err());
        assert!(DisplacedSqueezedSum::squeezed_vacuum(-1.0).is_err());
    }

    #[test]
    fn measurement_op_polynomial_identity() {
        let s = DisplacedSqueezedSum::squeezed_vacuum(0.5).unwrap();
        let out = s.apply_measurement_op(PI / 2.0, 0.7).unwrap();
        assert_eq!(out.step(), 0.7);
        assert!(!out.is_normalized());
        let cs = out.coefficients();
        assert!((cs[&0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((cs[&1] - c(0.0, 1.0)).norm() < 1e-15);

        let doubled = out.apply_measurement_op(0.0, 0.0).unwrap();
        for (t, v) in doubled.coefficients() {
            assert!((v - cs[t] * 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn incommensurate_displacement_is_rejected() {
        let cat = DisplacedSqueezedSum::squeezed_vacuum(0.5).unwrap().apply_measurement_op(0.0, 1.0).unwrap();
        assert!(matches!(cat.apply_measurement_op(0.0, 0.37), Err(Error::Lattice { .. })));
        assert!(cat.apply_measurement_op(0.0, 3.0).is_ok());
    }

    #[test]
    fn component_overlap_is_gaussian_in_lattice_distance() {
        let xi = (2.0 * PI).sqrt();
        let d = 0.4;
        for (j, k) in [(0i64, 1i64), (0, 2), (3, 1)] {
            let a = DisplacedSqueezedSum::from_components(d, xi / SQRT_2, ZERO, [(j, c(1.0, 0.0))].into()).unwrap();
            let b = DisplacedSqueezedSum::from_components(d, xi / SQRT_2, ZERO, [(k, c(1.0, 0.0))].into()).unwrap();
            let ov = overlap(&a, &b).unwrap();
            let expected = (-xi * xi * ((j - k) * (j - k)) as f64 / (4.0 * d * d)).exp();
            assert!((ov.norm() - expected).abs() <= 1e-13 * expected, "{j},{k}: {} vs {expected}", ov.norm());
        }
    }

    #[test]
    fn overlap_rejects_mismatched_delta() {
        let a = DisplacedSqueezedSum::squeezed_vacuum(0.3).unwrap();
        let b = DisplacedSqueezedSum::squeezed_vacuum(0.4).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn expectation_needs_normalized_state() {
        let cat = DisplacedSqueezedSum::squeezed_vacuum(0.5).unwrap().apply_measurement_op(0.0, 1.0).unwrap();
        assert!(matches!(cat.expect_displacement(ZERO), Err(Error::Contract(_))));
        let n = cat.normalized().unwrap();
        assert!((n.expect_displacement(ZERO).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(is_unit_norm(&n));
    }

    #[test]
    fn vacuum_displacement_expectation() {
        let v = DisplacedSqueezedSum::squeezed_vacuum(1.0).unwrap();
        let beta = c(0.3, -1.1);
        let got = v.expect_displacement(beta).unwrap();
        assert!((got - c((-beta.norm_sqr() / 2.0).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn squeezed_cat_delta_q_closed_form() {
        let d: f64 = 0.2;
        let xi = (2.0 * PI).sqrt();
        let cat = DisplacedSqueezedSum::squeezed_vacuum(d)
            .unwrap()
            .apply_displacement(c(-PI.sqrt() / 2.0, 0.0))
            .apply_measurement_op(0.0, PI.sqrt())
            .unwrap()
            .normalized()
            .unwrap();
        let est = cat.effective_squeezing(xi / SQRT_2, Stabilizer::Sq).unwrap();
        let expected = (d * d - 2.0 / PI * (PI / (4.0 * d * d)).tanh().ln()).sqrt();
        assert!((est.delta_eff - expected).abs() < 1e-10);
    }

    #[test]
    fn eigenstate_limit_gives_zero_squeezing() {
        let e = SqueezingEstimate::from_log_expectation(LogComplex::new(0.0, 0.4), 1.0);
        assert_eq!(e.delta_eff, 0.0);
        assert!((e.theta - 0.4).abs() < 1e-15);
        let z = SqueezingEstimate::from_log_expectation(LogComplex::ZERO, 1.0);
        assert!(z.delta_eff.is_infinite());
    }

    #[test]
    fn vacuum_wavefunction_and_wigner_peak() {
        let d = 0.7;
        let s = DisplacedSqueezedSum::squeezed_vacuum(d).unwrap();
        assert!((s.q_wavefunction(0.0).re - (PI * d * d).powf(-0.25)).abs() < 1e-15);
        let v = DisplacedSqueezedSum::squeezed_vacuum(1.0).unwrap();
        assert!((v.wigner(0.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn p_density_integrates_to_one() {
        let cat = DisplacedSqueezedSum::squeezed_vacuum(0.3)
            .unwrap()
            .apply_measurement_op(0.4, 1.3)
            .unwrap()
            .apply_measurement_op(-1.0, 1.3)
            .unwrap()
            .normalized()
            .unwrap();
        let h = 0.002;
        let total: f64 = (-20_000..=20_000).map(|i| cat.p_wavefunction(i as f64 * h).norm_sqr() * h).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let totq: f64 = (-20_000..=20_000).map(|i| cat.q_wavefunction(i as f64 * h).norm_sqr() * h).sum();
        assert!((totq - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wigner_integrates_to_one() {
        let cat = DisplacedSqueezedSum::squeezed_vacuum(0.6)
            .unwrap()
            .apply_measurement_op(0.3, 1.5)
            .unwrap()
            .normalized()
            .unwrap();
        let spec = WignerSpec { q_range: (-7.0, 9.0), p_range: (-8.0, 8.0), q_points: 161, p_points: 161 };
        let grid = cat.wigner_grid(&spec).unwrap();
        let (hq, hp) = (16.0 / 160.0, 16.0 / 160.0);
        let total: f64 = grid.values.iter().flatten().sum::<f64>() * hq * hp;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn wigner_csv_layout() {
        let v = DisplacedSqueezedSum::squeezed_vacuum(1.0).unwrap();
        let spec = WignerSpec { q_range: (-1.0, 1.0), p_range: (-2.0, 2.0), q_points: 3, p_points: 5 };
        let g = v.wigner_grid(&spec).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "p\\q,-1,0,1");
        assert!(lines[3].starts_with("0,"));
        assert_eq!(g.argmax(), (0.0, 0.0));
        let json: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(json["w"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn photon_number_closed_forms() {
        let v = DisplacedSqueezedSum::squeezed_vacuum(1.0).unwrap();
        assert!(v.mean_photon_number().unwrap().abs() < 1e-15);
        let alpha = c(1.3, -0.4);
        let coh = DisplacedSqueezedSum::coherent(alpha);
        assert!((coh.mean_photon_number().unwrap() - alpha.norm_sqr()).abs() < 1e-13);
        let sq = DisplacedSqueezedSum::squeezed_vacuum(0.5).unwrap();
        let sinh_r = (2f64.ln()).sinh();
        assert!((sq.mean_photon_number().unwrap() - sinh_r * sinh_r).abs() < 1e-13);
    }

    #[test]
    fn gkp_approx_stabilizers() {
        let xi = (2.0 * PI).sqrt();
        let g = DisplacedSqueezedSum::gkp_approx(0.2, 0.2, xi, 10).unwrap();
        let r = g.squeezing_report(xi).unwrap();
        assert!((r.delta_q - 0.2).abs() / 0.2 < 0.05);
        assert!((r.delta_p - 0.2).abs() / 0.2 < 0.05);
        assert!(DisplacedSqueezedSum::gkp_approx(0.2, 0.2, xi, 0).is_err());
        let collapsed = DisplacedSqueezedSum::gkp_approx(0.3, 1e3, xi, 1).unwrap();
        assert_eq!(collapsed.support_len(), 1);
    }

    #[test]
    fn logical_error_bound_dominates_peak_escape() {
        let d: f64 = 0.2;
        let bound = gkp_logical_error_bound(d);
        // Var(q) = d^2/2: probability of a shift beyond the sqrt(pi)/2 decision boundary
        let escape = statrs::function::erf::erfc(PI.sqrt() / (2.0 * d));
        assert!(escape < bound);
        assert!(bound < 1e-9);
    }

    #[test]
    fn correction_zeroes_mean_phases() {
        let xi = (2.0 * PI).sqrt();
        let s = DisplacedSqueezedSum::squeezed_vacuum(0.3)
            .unwrap()
            .apply_measurement_op(0.9, xi / SQRT_2)
            .unwrap()
            .apply_measurement_op(-2.1, xi / SQRT_2)
            .unwrap()
            .normalized()
            .unwrap()
            .apply_displacement(c(0.2, 0.35));
        let r = s.squeezing_report(xi).unwrap();
        let fixed = s.apply_displacement(r.correction);
        let r2 = fixed.squeezing_report(xi).unwrap();
        assert!(r2.theta_p.abs() < 1e-9 && r2.theta_q.abs() < 1e-9, "{r2:?}");
        assert!((r2.delta_p - r.delta_p).abs() < 1e-12);
        assert!((r2.delta_q - r.delta_q).abs() < 1e-12);
    }

    #[test]
    fn displacement_is_unitary() {
        let s = DisplacedSqueezedSum::squeezed_vacuum(0.45)
            .unwrap()
            .apply_measurement_op(0.2, 1.1)
            .unwrap()
            .normalized()
            .unwrap();
        let moved = s.apply_displacement(c(-0.7, 1.9));
        assert!(is_unit_norm(&moved));
        let back = moved.apply_displacement(c(0.7, -1.9));
        assert!((fidelity(&s, &back).unwrap() - 1.0).abs() < 1e-12);
    }
}

//! Truncated Fock-space reference computations.
//!
//! Everything here is plain linear algebra on photon-number amplitudes and is
//! meant as ground truth for the closed-form engine in tests. Conventions
//! match the engine: `q = (a + a^dag)/sqrt(2)`, `p = i(a^dag - a)/sqrt(2)`,
//! `S(Delta) = exp(r (a^2 - a^dag^2)/2)` with `Delta = e^{-r}`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("truncation at n_max = {n_max} leaves tail mass {tail:e}")]
    Truncation { n_max: usize, tail: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Largest tail mass above `0.9 n_max` a state may carry.
pub const TAIL_TOL: f64 = 1e-10;

/// Single-mode amplitudes `c_n`, `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Mass in `n > 0.9 n_max`.
    pub fn tail_mass(&self) -> f64 {
        let cut = (0.9 * self.n_max() as f64).floor() as usize;
        self.amplitudes.iter().skip(cut + 1).map(|c| c.norm_sqr()).sum()
    }

    pub fn check_truncation(&self) -> Result<()> {
        let tail = self.tail_mass() / self.norm_sqr().max(f64::MIN_POSITIVE);
        if tail > TAIL_TOL {
            return Err(OracleError::Truncation { n_max: self.n_max(), tail });
        }
        Ok(())
    }

    pub fn scale(&self, k: Complex64) -> FockVector {
        FockVector { amplitudes: self.amplitudes.iter().map(|c| c * k).collect() }
    }

    /// `self + other`, padding the shorter vector with zeros.
    pub fn add(&self, other: &FockVector) -> FockVector {
        let n = self.amplitudes.len().max(other.amplitudes.len());
        let get = |v: &FockVector, i: usize| v.amplitudes.get(i).copied().unwrap_or_default();
        FockVector { amplitudes: (0..n).map(|i| get(self, i) + get(other, i)).collect() }
    }

    pub fn normalized(&self) -> FockVector {
        self.scale(Complex64::new(1.0 / self.norm_sqr().sqrt(), 0.0))
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum::<f64>() / self.norm_sqr()
    }
}

/// `D(beta) S(delta)|vac>` from the eigenvalue relation
/// `(a cosh r + a^dag sinh r)|psi> = (beta cosh r + beta^* sinh r)|psi>`.
pub fn displaced_squeezed_fock(delta: f64, beta: Complex64, n_max: usize) -> Result<FockVector> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(OracleError::Domain(format!("squeezing must be > 0, got {delta}")));
    }
    let r = -delta.ln();
    let (ch, sh) = (r.cosh(), r.sinh());
    let gamma = beta * ch + beta.conj() * sh;
    let mut c = vec![Complex64::new(0.0, 0.0); n_max + 1];
    c[0] = (-0.5 * beta.norm_sqr() - 0.5 * beta.conj() * beta.conj() * r.tanh()).exp() / ch.sqrt();
    for n in 0..n_max {
        let prev = if n == 0 { Complex64::new(0.0, 0.0) } else { c[n - 1] };
        c[n + 1] = (gamma * c[n] - prev * (sh * (n as f64).sqrt())) / (ch * ((n + 1) as f64).sqrt());
    }
    let v = FockVector { amplitudes: c };
    v.check_truncation()?;
    Ok(v)
}

/// `<a|b>`.
pub fn oracle_overlap(a: &FockVector, b: &FockVector) -> Complex64 {
    a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Generalized Laguerre `L_n^{(k)}(x)` by the three-term recurrence.
fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let mut l0 = 1.0;
    if n == 0 {
        return l0;
    }
    let mut l1 = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let l2 = ((2.0 * jf + 1.0 + k - x) * l1 - (jf + k) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// `<m|D(beta)|n>`.
pub fn displacement_element(m: usize, n: usize, beta: Complex64) -> Complex64 {
    let x = beta.norm_sqr();
    let (lo, hi) = (m.min(n), m.max(n));
    let k = hi - lo;
    let base = if m >= n { beta } else { -beta.conj() };
    let lag = laguerre(lo, k as f64, x);
    if lag == 0.0 || (k > 0 && x == 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + k as f64 * base.norm().ln() - 0.5 * x + lag.abs().ln();
    let phase = k as f64 * base.arg() + if lag < 0.0 { PI } else { 0.0 };
    Complex64::from_polar(ln_mag.exp(), phase)
}

/// `<v|D(beta)|v> / <v|v>`.
pub fn oracle_expect_displacement(v: &FockVector, beta: Complex64) -> Complex64 {
    let n = v.amplitudes.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        if v.amplitudes[m].norm_sqr() == 0.0 {
            continue;
        }
        let row: Complex64 = (0..n).map(|k| displacement_element(m, k, beta) * v.amplitudes[k]).sum();
        acc += v.amplitudes[m].conj() * row;
    }
    acc / v.norm_sqr()
}

/// Hermite functions `psi_0..=psi_n_max` at `x`.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n_max + 1];
    psi[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n_max >= 1 {
        psi[1] = 2f64.sqrt() * x * psi[0];
    }
    for n in 1..n_max {
        let nf = n as f64;
        psi[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
    }
    psi
}

/// `<q|v>`.
pub fn oracle_q_amplitude(v: &FockVector, q: f64) -> Complex64 {
    let h = hermite_functions(q, v.n_max());
    v.amplitudes.iter().zip(&h).map(|(c, h)| c * h).sum()
}

/// `<p|n> = (-i)^n psi_n(p)`.
fn p_basis(p: f64, n_max: usize) -> Vec<Complex64> {
    const PHASES: [Complex64; 4] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    hermite_functions(p, n_max).into_iter().enumerate().map(|(n, h)| PHASES[n % 4] * h).collect()
}

/// `<p|v>`.
pub fn oracle_p_amplitude(v: &FockVector, p: f64) -> Complex64 {
    let b = p_basis(p, v.n_max());
    v.amplitudes.iter().zip(&b).map(|(c, b)| c * b).sum()
}

/// `|<p|v>|^2 / <v|v>`.
pub fn oracle_p_density(v: &FockVector, p: f64) -> f64 {
    oracle_p_amplitude(v, p).norm_sqr() / v.norm_sqr()
}

/// `(1/pi) int psi^*(q + y) psi(q - y) e^{2 i p y} dy` by the trapezoid rule.
pub fn oracle_wigner_point(v: &FockVector, q: f64, p: f64) -> f64 {
    let (half, steps) = (14.0, 5600);
    let h = 2.0 * half / steps as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=steps {
        let y = -half + h * i as f64;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let term = oracle_q_amplitude(v, q + y).conj() * oracle_q_amplitude(v, q - y) * Complex64::from_polar(1.0, 2.0 * p * y);
        acc += term * w;
    }
    (acc * h).re / (PI * v.norm_sqr())
}

/// Two-mode amplitudes `c[n1][n2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeVector {
    pub amplitudes: Vec<Vec<Complex64>>,
}

impl TwoModeVector {
    pub fn product(a: &FockVector, b: &FockVector) -> Self {
        TwoModeVector { amplitudes: a.amplitudes.iter().map(|x| b.amplitudes.iter().map(|y| x * y).collect()).collect() }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn total_photon_number(&self) -> f64 {
        let mut acc = 0.0;
        for (n1, row) in self.amplitudes.iter().enumerate() {
            for (n2, c) in row.iter().enumerate() {
                acc += (n1 + n2) as f64 * c.norm_sqr();
            }
        }
        acc / self.norm_sqr()
    }
}

/// `exp(theta G) v` for `G = a1^dag a2 - a2^dag a1` restricted to `n1 + n2 = total`,
/// where `v[k]` is the amplitude of `|k, total - k>`.
fn beam_splitter_block(v: &[Complex64], theta: f64) -> Vec<Complex64> {
    let total = v.len() - 1;
    // G |k, N-k> = sqrt((k+1)(N-k)) |k+1, N-k-1> - sqrt(k (N-k+1)) |k-1, N-k+1>
    let up: Vec<f64> = (0..=total).map(|k| (((k + 1) * (total - k)) as f64).sqrt()).collect();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for k in 0..x.len() {
            if k + 1 < x.len() {
                y[k + 1] += x[k] * up[k];
            }
            if k > 0 {
                y[k - 1] -= x[k] * up[k - 1];
            }
        }
        y
    };
    let norm_bound = 2.0 * up.iter().cloned().fold(0.0, f64::max);
    let steps = ((theta.abs() * norm_bound).ceil() as usize).max(1);
    let h = theta / steps as f64;
    let mut w = v.to_vec();
    for _ in 0..steps {
        let mut term = w.clone();
        let mut acc = w.clone();
        for j in 1..60 {
            term = apply(&term).into_iter().map(|t| t * (h / j as f64)).collect();
            let mut size = 0.0f64;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
                size = size.max(t.norm());
            }
            if size < 1e-18 {
                break;
            }
        }
        w = acc;
    }
    w
}

/// Balanced beam splitter `exp((pi/4)(a1^dag a2 - a2^dag a1))`.
pub fn oracle_beam_splitter(state: &TwoModeVector) -> TwoModeVector {
    let n1 = state.amplitudes.len();
    let n2 = state.amplitudes[0].len();
    let max_total = n1 + n2 - 2;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); max_total + 1]; max_total + 1];
    for total in 0..=max_total {
        let v: Vec<Complex64> = (0..=total)
            .map(|k| {
                if k < n1 && total - k < n2 {
                    state.amplitudes[k][total - k]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        if v.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        for (k, w) in beam_splitter_block(&v, FRAC_PI_4).into_iter().enumerate() {
            out[k][total - k] = w;
        }
    }
    TwoModeVector { amplitudes: out }
}

/// Mode 1 after the beam splitter and projecting mode 2 onto `<p_out|`; unnormalized.
pub fn oracle_two_mode_round(state1: &FockVector, state2: &FockVector, p_out: f64) -> FockVector {
    let mixed = oracle_beam_splitter(&TwoModeVector::product(state1, state2));
    let basis = p_basis(p_out, mixed.amplitudes[0].len() - 1);
    FockVector {
        amplitudes: mixed.amplitudes.iter().map(|row| row.iter().zip(&basis).map(|(c, b)| c * b).sum()).collect(),
    }
}

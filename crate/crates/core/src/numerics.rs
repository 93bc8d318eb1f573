//! Log-domain special functions and stable accumulation.
//!
//! Overlaps between strongly squeezed components carry Gaussian factors such
//! as `exp(-xi^2 (j-k)^2 / (4 Delta^2))` that underflow long before the sums
//! they enter become negligible, so magnitudes are carried as logarithms and
//! only exponentiated after rescaling by the dominant term.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Crossover between the power series and the large-argument expansion.
pub const BESSEL_SERIES_CUTOFF: f64 = 15.0;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let y = x - TAU * ((x + PI) / TAU).floor();
    // floor can round y up to exactly pi
    if y >= PI {
        y - TAU
    } else {
        y
    }
}

/// A complex number stored as `(ln|z|, arg z)`.
///
/// `log_magnitude == -inf` is the exact zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex { log_magnitude: f64::NEG_INFINITY, phase: 0.0 };

    pub fn new(log_magnitude: f64, phase: f64) -> Self {
        if log_magnitude == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex { log_magnitude, phase: wrap_angle(phase) }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::new(z.norm().ln(), z.arg())
    }

    pub fn is_zero(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    pub fn conj(self) -> LogComplex {
        if self.is_zero() {
            return self;
        }
        Self::new(self.log_magnitude, -self.phase)
    }
}

impl std::ops::Mul for LogComplex {
    type Output = LogComplex;

    fn mul(self, other: LogComplex) -> LogComplex {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_magnitude + other.log_magnitude, self.phase + other.phase)
    }
}

/// Sum of log-represented complex numbers, rescaled by the largest magnitude.
pub fn stable_complex_sum<I>(terms: I) -> LogComplex
where
    I: IntoIterator<Item = LogComplex>,
{
    let terms: Vec<LogComplex> = terms.into_iter().filter(|t| !t.is_zero()).collect();
    match terms.len() {
        0 => LogComplex::ZERO,
        1 => terms[0],
        _ => {
            let scale = terms.iter().map(|t| t.log_magnitude).fold(f64::NEG_INFINITY, f64::max);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in &terms {
                acc += Complex64::from_polar((t.log_magnitude - scale).exp(), t.phase);
            }
            let mut out = LogComplex::from_complex(acc);
            if !out.is_zero() {
                out.log_magnitude += scale;
            }
            out
        }
    }
}

fn check_bessel_arg(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {kappa}")));
    }
    Ok(())
}

/// Power series for I0 and I1 (both positive-term, no cancellation).
fn bessel_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let mut s0 = t0;
    let mut s1 = t1;
    for k in 1..500 {
        let k = k as f64;
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        if t0 < 1e-17 * s0 && t1 < 1e-17 * s1 {
            break;
        }
    }
    (s0, s1)
}

/// Hankel-type expansion sums for `I_nu(x) sqrt(2 pi x) e^-x`, nu = 0 and 1.
///
/// Returns `(s0, s1, s0 - s1)`; the difference is accumulated termwise so
/// that `1 - I1/I0` keeps full relative precision for huge `x`.
fn bessel_asymptotic(x: f64) -> (f64, f64, f64) {
    let mut a = 1.0;
    let mut b = 1.0;
    let mut s0 = 1.0;
    let mut s1 = 1.0;
    let mut diff = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let na = a * odd * odd / (8.0 * x * kf);
        let nb = b * (odd * odd - 4.0) / (8.0 * x * kf);
        let size = na.abs().max(nb.abs());
        // stop at the smallest term of the divergent expansion
        if size > last {
            break;
        }
        a = na;
        b = nb;
        s0 += a;
        s1 += b;
        diff += a - b;
        last = size;
        if size < 1e-18 {
            break;
        }
    }
    (s0, s1, diff)
}

/// `ln I0(kappa)`.
pub fn log_bessel_i0(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(ln_i0_unchecked(kappa))
}

pub(crate) fn ln_i0_unchecked(kappa: f64) -> f64 {
    if kappa < BESSEL_SERIES_CUTOFF {
        bessel_series(kappa).0.ln()
    } else {
        let (s0, _, _) = bessel_asymptotic(kappa);
        kappa - 0.5 * (TAU * kappa).ln() + s0.ln()
    }
}

/// `I1(kappa) / I0(kappa)`, the mean resultant length of a von Mises law.
pub fn bessel_ratio_i1_i0(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(ratio_unchecked(kappa))
}

pub(crate) fn ratio_unchecked(kappa: f64) -> f64 {
    if kappa < BESSEL_SERIES_CUTOFF {
        let (s0, s1) = bessel_series(kappa);
        s1 / s0
    } else {
        let (s0, s1, _) = bessel_asymptotic(kappa);
        s1 / s0
    }
}

/// `1 - I1(kappa)/I0(kappa)` without cancellation at large `kappa`.
pub fn one_minus_bessel_ratio(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(if kappa < BESSEL_SERIES_CUTOFF {
        1.0 - ratio_unchecked(kappa)
    } else {
        let (s0, _, diff) = bessel_asymptotic(kappa);
        diff / s0
    })
}

/// Two-sided bound `e^(k -/+ 1/(2k)) / sqrt(2 pi k)` on `I0(k)`, in log form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PaltsevBounds {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl PaltsevBounds {
    pub fn lower(&self) -> f64 {
        self.ln_lower.exp()
    }

    pub fn upper(&self) -> f64 {
        self.ln_upper.exp()
    }

    pub fn contains_ln(&self, ln_value: f64) -> bool {
        self.ln_lower <= ln_value && ln_value <= self.ln_upper
    }
}

pub fn paltsev_bounds(kappa: f64) -> Result<PaltsevBounds> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::Domain(format!("Pal'tsev bounds need kappa > 0, got {kappa}")));
    }
    let base = kappa - 0.5 * (TAU * kappa).ln();
    let corr = 0.5 / kappa;
    Ok(PaltsevBounds { ln_lower: base - corr, ln_upper: base + corr })
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `I_n(kappa) / I_0(kappa)` for `n = 1..=n_max`, by backward recurrence on
/// `r_n = I_n / I_{n-1} = 1 / (2n/kappa + r_{n+1})`.
pub fn bessel_ratios(kappa: f64, n_max: usize) -> Result<Vec<f64>> {
    check_bessel_arg(kappa)?;
    if kappa == 0.0 {
        return Ok(vec![0.0; n_max]);
    }
    let start = n_max + 40 + (2.0 * kappa).ceil().min(1e6) as usize;
    let mut r = vec![0.0; start + 2];
    for n in (1..=start).rev() {
        r[n] = 1.0 / (2.0 * n as f64 / kappa + r[n + 1]);
    }
    let mut out = Vec::with_capacity(n_max);
    let mut acc = 1.0;
    for rn in r.iter().skip(1).take(n_max) {
        acc *= rn;
        out.push(acc);
    }
    Ok(out)
}

/// Cumulative distribution of a nonnegative density tabulated on a uniform grid
/// with Simpson's rule per cell.
#[derive(Clone, Debug)]
pub struct TabulatedCdf {
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    /// Tabulate `density` on `[lo, hi]` with `cells` cells. Negative values are clipped.
    pub fn from_density<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Self {
        let h = (hi - lo) / cells as f64;
        let f = |i: usize| density(lo + 0.5 * h * i as f64).max(0.0);
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut left = f(0);
        for c in 0..cells {
            let right = f(2 * c + 2);
            acc += h / 6.0 * (left + 4.0 * f(2 * c + 1) + right);
            cdf.push(acc);
            left = right;
        }
        TabulatedCdf { lo, h, cdf }
    }

    /// Total tabulated mass.
    pub fn mass(&self) -> f64 {
        *self.cdf.last().expect("nonempty")
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.h * (self.cdf.len() - 1) as f64)
    }

    /// Normalized CDF at `x`, linear within cells.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let cell = t.floor() as usize;
        if cell + 1 >= self.cdf.len() {
            return 1.0;
        }
        let frac = t - cell as f64;
        (self.cdf[cell] + frac * (self.cdf[cell + 1] - self.cdf[cell])) / self.mass()
    }

    /// Inverse CDF at `u` in `[0, 1)`, linear within cells.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u * self.mass();
        let cell = self.cdf.partition_point(|&c| c <= target).clamp(1, self.cdf.len() - 1) - 1;
        let (c0, c1) = (self.cdf[cell], self.cdf[cell + 1]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.lo + self.h * (cell as f64 + frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series summed in extended fashion (pairwise, many terms).
    fn i0_series_oracle(x: f64) -> f64 {
        let mut terms = Vec::new();
        let mut t = 1.0f64;
        terms.push(t);
        for k in 1..400 {
            t *= (x * x / 4.0) / ((k * k) as f64);
            terms.push(t);
        }
        terms.iter().rev().sum()
    }

    fn ratio_lentz(x: f64) -> f64 {
        // I1/I0 = 1 / (2/x + 1 / (4/x + 1 / (6/x + ...)))
        let tiny = 1e-300;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        for j in 1..10_000 {
            let b = 2.0 * j as f64 / x;
            d += b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + 1.0 / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        f
    }

    #[test]
    fn i0_at_zero_and_one() {
        assert_eq!(log_bessel_i0(0.0).unwrap(), 0.0);
        let expected = 1.266_065_877_752_008_4f64.ln();
        assert!((log_bessel_i0(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((log_bessel_i0(1.0).unwrap() - i0_series_oracle(1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn i0_large_argument() {
        let k = 1e6;
        let approx = k - 0.5 * (TAU * k).ln();
        let got = log_bessel_i0(k).unwrap();
        assert!(((got - approx) / got).abs() < 1e-9);
    }

    #[test]
    fn i0_seam_agrees() {
        for &x in &[14.0, 15.0, 16.0, 20.0, 30.0] {
            let series = i0_series_oracle(x).ln();
            let (s0, _, _) = bessel_asymptotic(x);
            let asym = x - 0.5 * (TAU * x).ln() + s0.ln();
            assert!(((series - asym) / series).abs() < 1e-12, "x={x}");
            assert!(((log_bessel_i0(x).unwrap() - series) / series).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_matches_continued_fraction() {
        assert_eq!(bessel_ratio_i1_i0(0.0).unwrap(), 0.0);
        for &x in &[0.01, 0.5, 1.0, 5.0, 14.9, 15.0, 40.0, 1e3] {
            let cf = ratio_lentz(x);
            let got = bessel_ratio_i1_i0(x).unwrap();
            assert!(((got - cf) / cf).abs() < 1e-12, "x={x}: {got} vs {cf}");
        }
    }

    #[test]
    fn ratio_huge_argument() {
        let k = 1e8;
        let got = bessel_ratio_i1_i0(k).unwrap();
        assert!((got - (1.0 - 0.5 / k)).abs() < 1e-8);
        let om = one_minus_bessel_ratio(k).unwrap();
        assert!(((om - 0.5 / k) / om).abs() < 1e-8);
    }

    #[test]
    fn one_minus_ratio_consistent_at_seam() {
        for &x in &[15.0, 20.0, 100.0] {
            let direct = 1.0 - ratio_lentz(x);
            let got = one_minus_bessel_ratio(x).unwrap();
            assert!(((got - direct) / direct).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(log_bessel_i0(-1.0).is_err());
        assert!(log_bessel_i0(f64::NAN).is_err());
        assert!(bessel_ratio_i1_i0(-0.1).is_err());
        assert!(paltsev_bounds(0.0).is_err());
        assert!(paltsev_bounds(-2.0).is_err());
    }

    #[test]
    fn monotone_on_geometric_grid() {
        let mut prev_i0 = f64::NEG_INFINITY;
        let mut prev_r = -1.0;
        let mut k = 1e-6;
        while k <= 1e8 {
            let li = log_bessel_i0(k).unwrap();
            let r = bessel_ratio_i1_i0(k).unwrap();
            assert!(li > prev_i0, "ln I0 not increasing at {k}");
            assert!(r > prev_r, "ratio not increasing at {k}");
            assert!(r < 1.0);
            prev_i0 = li;
            prev_r = r;
            k *= 1.07;
        }
    }

    #[test]
    fn paltsev_sandwich() {
        let at_one = paltsev_bounds(1.0).unwrap();
        assert!((at_one.lower() - 0.5f64.exp() / TAU.sqrt()).abs() < 1e-15);
        assert!((at_one.upper() - 1.5f64.exp() / TAU.sqrt()).abs() < 1e-14);
        assert!(at_one.contains_ln(i0_series_oracle(1.0).ln()));

        let ext = (7f64.sqrt() + 2.0) / 3.0;
        assert!(1.5f64.exp() / TAU.sqrt() > i0_series_oracle(ext));
        assert!(paltsev_bounds(ext).unwrap().contains_ln(log_bessel_i0(ext).unwrap()));

        let b = paltsev_bounds(100.0).unwrap();
        assert!((b.ln_upper - b.ln_lower).exp() - 1.0 < 1.1e-2);
        assert!(b.contains_ln(log_bessel_i0(100.0).unwrap()));
    }

    #[test]
    fn wrap_angle_range() {
        for &x in &[-PI, PI, 3.0 * PI, -7.5, 0.0, 1e3] {
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w), "{x} -> {w}");
            assert!(((x - w) / TAU - ((x - w) / TAU).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_sum_basics() {
        assert!(stable_complex_sum(Vec::new()).is_zero());
        let one = LogComplex::new(0.0, 0.0);
        let minus_one = LogComplex::new(0.0, PI);
        let s = stable_complex_sum(vec![one, minus_one]);
        assert!(s.is_zero() || s.log_magnitude < -30.0);
        let single = LogComplex::new(-1234.5, 0.3);
        assert_eq!(stable_complex_sum(vec![single]), single);
    }

    #[test]
    fn complex_sum_handles_underflowing_magnitudes() {
        let terms = vec![LogComplex::new(-2000.0, 0.1), LogComplex::new(-2000.0, 0.1)];
        let s = stable_complex_sum(terms);
        assert!((s.log_magnitude - (-2000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((s.phase - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bessel_ratios_match_direct_ratio() {
        for &k in &[0.3, 1.0, 7.5, 40.0] {
            let r = bessel_ratios(k, 5).unwrap();
            assert!((r[0] - ratio_lentz(k)).abs() < 1e-14);
            // I_2 = I_0 - (2/k) I_1
            assert!((r[1] - (1.0 - 2.0 / k * r[0])).abs() < 1e-13);
            assert!(r.windows(2).all(|w| w[1] < w[0]));
        }
        assert_eq!(bessel_ratios(0.0, 3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn tabulated_cdf_of_uniform() {
        let t = TabulatedCdf::from_density(|_| 0.5, -1.0, 1.0, 64);
        assert!((t.mass() - 1.0).abs() < 1e-14);
        assert!((t.quantile(0.25) + 0.5).abs() < 1e-12);
        assert!((t.cdf(0.5) - 0.75).abs() < 1e-12);
        assert_eq!(t.cdf(-3.0), 0.0);
        assert_eq!(t.cdf(3.0), 1.0);
    }
}

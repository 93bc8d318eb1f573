#![allow(dead_code)]

use fock_oracle::{displaced_squeezed_fock, FockVector};
use gridbreed::gaussian_state::DisplacedSqueezedSum;
use num_complex::Complex64;
use rand::Rng;
use std::collections::BTreeMap;

/// Photon cutoff per mode that keeps the oracle's tail check satisfied for
/// amplitudes up to about 2 at the given squeezing.
pub fn n_max_for(delta: f64) -> usize {
    if delta >= 0.75 {
        50
    } else if delta >= 0.55 {
        70
    } else {
        110
    }
}

pub fn to_fock(state: &DisplacedSqueezedSum, n_max: usize) -> FockVector {
    let mut acc = FockVector { amplitudes: vec![Complex64::new(0.0, 0.0); n_max + 1] };
    for (alpha, c) in state.components() {
        let v = displaced_squeezed_fock(state.delta(), alpha, n_max).expect("adequate truncation");
        acc = acc.add(&v.scale(c));
    }
    acc
}

/// Normalized state with 1 to 3 components, `|alpha| <= 1.5`.
pub fn random_state<R: Rng>(rng: &mut R, delta: f64) -> DisplacedSqueezedSum {
    let step = rng.random_range(0.4..0.8);
    let offset = Complex64::new(rng.random_range(-0.6..0.2), rng.random_range(-0.5..0.5));
    let len = rng.random_range(1..=3);
    let coeffs: BTreeMap<i64, Complex64> = (0..len)
        .map(|t| (t, Complex64::from_polar(rng.random_range(0.2..1.0), rng.random_range(-3.0..3.0))))
        .collect();
    DisplacedSqueezedSum::from_components(delta, step, offset, coeffs).unwrap().normalized().unwrap()
}

pub fn fock_fidelity(a: &FockVector, b: &FockVector) -> f64 {
    let ov = fock_oracle::oracle_overlap(a, b);
    ov.norm_sqr() / (a.norm_sqr() * b.norm_sqr())
}

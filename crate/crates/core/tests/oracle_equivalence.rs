mod common;

use common::{fock_fidelity, n_max_for, random_state, to_fock};
use fock_oracle::{
    oracle_expect_displacement, oracle_overlap, oracle_p_density, oracle_two_mode_round, oracle_wigner_point,
};
use gridbreed::breeding::{breed_states, homodyne_density, squeezed_cat};
use gridbreed::gaussian_state::{overlap, DisplacedSqueezedSum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn single_mode_quantities_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for &delta in &[0.4, 0.6, 0.8] {
        let n = n_max_for(delta);
        for _ in 0..10 {
            let a = random_state(&mut rng, delta);
            let b = random_state(&mut rng, delta);
            let (fa, fb) = (to_fock(&a, n), to_fock(&b, n));
            assert!((fa.norm_sqr() - 1.0).abs() < 1e-9);
            assert!((overlap(&a, &b).unwrap() - oracle_overlap(&fa, &fb)).norm() < 1e-9);

            let beta = Complex64::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
            let e = a.expect_displacement(beta).unwrap();
            assert!((e - oracle_expect_displacement(&fa, beta)).norm() < 1e-9, "delta={delta} beta={beta}");

            for &p in &[-1.3, 0.0, 0.4, 2.2] {
                let d = a.p_wavefunction(p).norm_sqr();
                assert!((d - oracle_p_density(&fa, p)).abs() < 1e-8, "p={p}: {d} vs {} vs mirrored {}", oracle_p_density(&fa, p), oracle_p_density(&fa, -p));
            }
            assert!((a.mean_photon_number().unwrap() - fa.mean_photon_number()).abs() < 1e-8);
        }
    }
}

#[test]
fn wigner_values_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &delta in &[0.6, 0.8] {
        let a = random_state(&mut rng, delta);
        let fa = to_fock(&a, n_max_for(delta));
        for &(q, p) in &[(0.0, 0.0), (-0.7, 0.3), (0.5, -1.1)] {
            let w = a.wigner(q, p).unwrap();
            assert!((w - oracle_wigner_point(&fa, q, p)).abs() < 1e-8, "({q},{p})");
        }
    }
}

#[test]
fn squeezed_vacuum_photon_number() {
    let s = DisplacedSqueezedSum::squeezed_vacuum(0.5).unwrap();
    let f = to_fock(&s, 80);
    assert!((s.mean_photon_number().unwrap() - f.mean_photon_number()).abs() < 1e-10);
}

#[test]
fn breeding_round_matches_beam_splitter_and_homodyne() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for &(delta, alpha) in &[(0.5, 1.2), (0.6, 0.9), (0.8, 1.4)] {
        let n = n_max_for(delta);
        let c1 = squeezed_cat(delta, alpha, rng.random()).unwrap();
        let c2 = squeezed_cat(delta, alpha, rng.random()).unwrap();
        let dens = homodyne_density(&c1.state, &c2.state).unwrap();
        let (f1, f2) = (to_fock(&c1.state, n), to_fock(&c2.state, n));
        for _ in 0..3 {
            let p = rng.random_range(-2.0..2.0);
            let engine = breed_states(&c1.state, &c2.state, p).unwrap();
            let oracle = oracle_two_mode_round(&f1, &f2, p);
            let fe = to_fock(&engine, 2 * n);
            assert!(fock_fidelity(&fe, &oracle) > 1.0 - 1e-8, "delta={delta} p={p}");
            assert!((oracle.norm_sqr() - dens.density(p)).abs() < 1e-8);
            assert!((engine.norm_sq() - dens.density(p)).abs() < 1e-12);
        }
    }
}

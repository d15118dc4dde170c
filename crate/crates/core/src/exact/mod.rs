//! Ground-truth backends: exact diagonalization of the drivers,
//! entanglement entropy across register cuts, exact thermal expectations
//! of the learner, and brute-force OTOC evaluation.

use crate::drivers::{Driver, DriverSpec, DENSE_CAP};
use crate::error::{NqsError, Result};
use crate::rbm::{ln_2cosh, RbmParams};
use crate::spin::SpinConfig;
use nalgebra::{DMatrix, DVector};

pub mod lanczos;
mod otoc_brute;

pub use otoc_brute::{
    brute_force_otoc, commutator_stats, CommutatorStats, LearnerThermal, OtocSample, PauliAxis,
    OTOC_BRUTE_CAP,
};

/// Largest visible-register size for exact `2^n` enumerations.
pub const ENUMERATION_CAP: usize = 20;

/// Exact lowest eigenpair of a driver Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    /// Smallest eigenvalue.
    pub energy: f64,
    /// Unit-norm eigenvector, sign-fixed so the largest-magnitude
    /// amplitude is positive.
    pub amplitudes: DVector<f64>,
    /// Whether every amplitude has the same sign (within 1e-8), the
    /// Perron-Frobenius signature of a nonnegative ground state.
    pub positive: bool,
    /// Ground-space dimension. Exact for the field-free (diagonal) case;
    /// reported as 1 otherwise, where the flip terms make the matrix
    /// irreducible.
    pub degeneracy: usize,
}

/// Lowest eigenpair of the driver, with the default size cap.
pub fn ground_state(spec: &DriverSpec) -> Result<GroundStateResult> {
    ground_state_with_cap(spec, DENSE_CAP)
}

pub fn ground_state_with_cap(spec: &DriverSpec, cap: usize) -> Result<GroundStateResult> {
    if spec.n > cap {
        return Err(NqsError::SizeCap {
            quantity: "exact diagonalization spin count",
            cap,
            got: spec.n,
        });
    }
    let driver = Driver::new(spec.clone())?;
    let n = spec.n;
    let dim = 1usize << n;

    // Diagonal classical energies, shared by both paths.
    let diag: Vec<f64> = (0..dim)
        .map(|idx| driver.diag_energy(&SpinConfig::from_index(idx, n)))
        .collect();

    if spec.b == 0.0 && driver.couplings().yy_pairs().is_empty() {
        // Diagonal Hamiltonian: the ground space is spanned by basis
        // states of minimal classical energy.
        let energy = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * (1.0 + energy.abs());
        let minima: Vec<usize> =
            (0..dim).filter(|&i| (diag[i] - energy).abs() <= tol).collect();
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[minima[0]] = 1.0;
        return Ok(GroundStateResult { energy, amplitudes, positive: true, degeneracy: minima.len() });
    }

    let b = spec.b;
    let yy: Vec<(usize, usize, f64)> = driver.couplings().yy_pairs();
    let flip_masks: Vec<usize> = (0..n).map(|site| 1usize << (n - 1 - site)).collect();
    let yy_terms: Vec<(usize, usize, usize, f64)> = yy
        .iter()
        .map(|&(i, j, jy)| (i, j, flip_masks[i] | flip_masks[j], jy))
        .collect();

    let matvec = |x: &[f64], y: &mut [f64]| {
        for (idx, out) in y.iter_mut().enumerate() {
            let mut acc = diag[idx] * x[idx];
            for &mask in &flip_masks {
                acc -= b * x[idx ^ mask];
            }
            for &(i, j, mask, jy) in &yy_terms {
                let v = SpinConfig::from_index(idx, n);
                acc += jy * v.spin(i) * v.spin(j) * x[idx ^ mask];
            }
            *out = acc;
        }
    };

    let res = lanczos::lowest_eigenpair(dim, 1e-10, matvec);
    let mut amplitudes = res.eigenvector;
    // Sign convention: largest-magnitude amplitude positive.
    let mut arg = 0;
    for i in 1..dim {
        if amplitudes[i].abs() > amplitudes[arg].abs() {
            arg = i;
        }
    }
    if amplitudes[arg] < 0.0 {
        amplitudes.neg_mut();
    }
    let positive = amplitudes.iter().all(|&x| x >= -1e-8);
    Ok(GroundStateResult { energy: res.eigenvalue, amplitudes, positive, degeneracy: 1 })
}

/// Von Neumann entropy, in bits, of the reduced state of the first `cut`
/// sites of a pure state over `N` spins.
pub fn entanglement_entropy(state: &[f64], cut: usize) -> Result<f64> {
    let dim = state.len();
    let n = dim.trailing_zeros() as usize;
    if dim == 0 || dim != (1usize << n) {
        return Err(NqsError::DimensionMismatch {
            what: "state vector length (must be a power of two)",
            expected: 1usize << n,
            got: dim,
        });
    }
    if cut < 1 || cut >= n {
        return Err(NqsError::InvalidSpec(format!("cut must lie in [1, {}], got {cut}", n - 1)));
    }
    let norm2: f64 = state.iter().map(|x| x * x).sum();
    let defect = (norm2 - 1.0).abs();
    if defect > 1e-10 {
        return Err(NqsError::NotNormalized { defect });
    }

    // Gram matrix on the smaller side of the 2^cut x 2^(n-cut) reshape.
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    let small = rows.min(cols);
    let mut gram = DMatrix::zeros(small, small);
    if rows <= cols {
        for r1 in 0..rows {
            for r2 in r1..rows {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += state[r1 * cols + c] * state[r2 * cols + c];
                }
                gram[(r1, r2)] = acc;
                gram[(r2, r1)] = acc;
            }
        }
    } else {
        for c1 in 0..cols {
            for c2 in c1..cols {
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += state[r * cols + c1] * state[r * cols + c2];
                }
                gram[(c1, c2)] = acc;
                gram[(c2, c1)] = acc;
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let mut s = 0.0;
    for &lambda in eig.eigenvalues.iter() {
        if lambda > 0.0 {
            s -= lambda * lambda.log2();
        }
    }
    Ok(s)
}

/// Shared exact enumeration over the visible register with the hidden
/// register summed analytically.
///
/// Visits every visible configuration in Gray-code order (one flip per
/// step, so theta updates cost O(p)) and hands the visitor the visible
/// weight `w(v) = exp(-sum a_i v_i) * prod_j 2cosh(theta_j)` relative to
/// the all-up configuration, together with the current config and thetas.
fn visible_enumeration(
    x: &RbmParams,
    mut visit: impl FnMut(&SpinConfig, &[f64], f64),
) -> Result<()> {
    let n = x.n();
    if n > ENUMERATION_CAP {
        return Err(NqsError::SizeCap {
            quantity: "exact enumeration spin count",
            cap: ENUMERATION_CAP,
            got: n,
        });
    }
    let mut v = SpinConfig::all_up(n);
    let mut theta: Vec<f64> = (0..x.p()).map(|j| {
        let mut t = x.b()[j];
        for i in 0..n {
            t += x.w()[(i, j)];
        }
        t
    }).collect();
    let mut a_sum: f64 = x.a().iter().sum();
    let log_w0 = -a_sum + theta.iter().map(|&t| ln_2cosh(t)).sum::<f64>();

    let total = 1u64 << n;
    visit(&v, &theta, 1.0);
    for step in 1..total {
        // Gray code: flip the site given by the trailing zeros of `step`.
        let site = step.trailing_zeros() as usize;
        let old = v.spin(site);
        v.flip(site);
        a_sum -= 2.0 * x.a()[site] * old;
        let mut log_w = -a_sum;
        for j in 0..x.p() {
            theta[j] -= 2.0 * x.w()[(site, j)] * old;
            log_w += ln_2cosh(theta[j]);
        }
        visit(&v, &theta, (log_w - log_w0).exp());
    }
    Ok(())
}

/// Thermal moments of the pair (visible k, hidden m) over the learner's
/// thermal state: (<z_v z_h>, <z_v>, <z_h>).
///
/// Uses the analytic hidden marginal `<h_m | v> = -tanh(theta_m)`.
pub fn thermal_pair_moments(x: &RbmParams, k: usize, m: usize) -> Result<(f64, f64, f64)> {
    assert!(k < x.n() && m < x.p());
    let mut z = 0.0;
    let mut zz = 0.0;
    let mut zv = 0.0;
    let mut zh = 0.0;
    visible_enumeration(x, |v, theta, w| {
        let hv = -theta[m].tanh();
        let vk = v.spin(k);
        z += w;
        zz += w * vk * hv;
        zv += w * vk;
        zh += w * hv;
    })?;
    Ok((zz / z, zv / z, zh / z))
}

/// `<sigma^z(v_k) sigma^z(h_m)>` over the learner's thermal state.
pub fn thermal_zz(x: &RbmParams, k: usize, m: usize) -> Result<f64> {
    thermal_pair_moments(x, k, m).map(|(zz, _, _)| zz)
}

/// `<sigma^z(v_k)>` over the learner's thermal state.
pub fn thermal_z_visible(x: &RbmParams, k: usize) -> Result<f64> {
    thermal_pair_moments(x, k, 0).map(|(_, zv, _)| zv)
}

/// `<sigma^z(h_m)>` over the learner's thermal state.
pub fn thermal_z_hidden(x: &RbmParams, m: usize) -> Result<f64> {
    thermal_pair_moments(x, 0, m).map(|(_, _, zh)| zh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::dense_hamiltonian;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_spin_in_field() {
        let mut spec = DriverSpec::tfim(1, 1.0);
        spec.j0 = 0.0;
        let gs = ground_state(&spec).unwrap();
        assert!((gs.energy + 1.0).abs() < 1e-10);
        let c = 1.0 / 2.0f64.sqrt();
        assert!((gs.amplitudes[0] - c).abs() < 1e-8);
        assert!((gs.amplitudes[1] - c).abs() < 1e-8);
        assert!(gs.positive);
    }

    #[test]
    fn classical_limit_is_degenerate_ferromagnet() {
        let gs = ground_state(&DriverSpec::tfim(4, 0.0)).unwrap();
        assert!((gs.energy + 3.0).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 2);
        // Amplitude concentrated on one of |0000>, |1111>.
        let idx = gs.amplitudes.iter().position(|&x| x.abs() > 0.5).unwrap();
        assert!(idx == 0 || idx == 15);
    }

    #[test]
    fn two_spin_chain_has_closed_form_energy() {
        // Hand 4x4 eigensolve of -B(X1+X2) - J Z1Z2 gives -sqrt(J^2+4B^2).
        let gs = ground_state(&DriverSpec::tfim(2, 1.0)).unwrap();
        assert!((gs.energy + 5.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn concentric_chain_decouples_into_pairs() {
        for n in [4usize, 6, 8] {
            let g: f64 = 0.5;
            let gs = ground_state(&DriverSpec::ctfim(n, g)).unwrap();
            let pair = -(1.0 + 4.0 * g * g).sqrt();
            assert!(
                (gs.energy - pair * (n as f64) / 2.0).abs() < 1e-9,
                "n = {n}: {} vs {}",
                gs.energy,
                pair * (n as f64) / 2.0
            );
        }
    }

    #[test]
    fn lanczos_matches_dense_eigensolve() {
        for spec in [DriverSpec::tfim(6, 1.3), DriverSpec::sk(5, 3), DriverSpec::yz(5, 0.8, 0.4)] {
            let gs = ground_state(&spec).unwrap();
            let h = dense_hamiltonian(&spec).unwrap();
            let eig = h.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((gs.energy - min).abs() < 1e-9, "{:?}", spec.kind);
        }
    }

    #[test]
    fn residual_is_tiny_and_energy_is_variational_floor() {
        let spec = DriverSpec::tfim(8, 0.9);
        let gs = ground_state(&spec).unwrap();
        let h = dense_hamiltonian(&spec).unwrap();
        let r = &h * &gs.amplitudes - &gs.amplitudes * gs.energy;
        assert!(r.norm() <= 1e-9, "residual {}", r.norm());
        // Rayleigh quotients of random vectors never dip below the ground energy.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let v = DVector::from_fn(h.nrows(), |_, _| rng.random::<f64>() - 0.5).normalize();
            let rq = v.dot(&(&h * &v));
            assert!(rq >= gs.energy - 1e-9);
        }
    }

    #[test]
    fn perron_frobenius_positivity_for_nonnegative_couplings() {
        for spec in [DriverSpec::tfim(6, 0.5), DriverSpec::ctfim(6, 0.5), DriverSpec::tfim(5, 2.0)]
        {
            let gs = ground_state(&spec).unwrap();
            assert!(gs.positive, "{:?} should have single-signed ground state", spec.kind);
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        match ground_state(&DriverSpec::tfim(15, 1.0)) {
            Err(NqsError::SizeCap { .. }) => {}
            other => panic!("expected size cap, got {other:?}"),
        }
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let mut state = vec![0.0; 16];
        state[0] = 1.0;
        for cut in 1..4 {
            assert!(entanglement_entropy(&state, cut).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn bell_state_has_one_bit() {
        let c = 1.0 / 2.0f64.sqrt();
        let state = vec![c, 0.0, 0.0, c];
        let s = entanglement_entropy(&state, 1).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_symmetric_under_register_reversal() {
        let spec = DriverSpec::tfim(6, 0.9);
        let gs = ground_state(&spec).unwrap();
        let n = 6;
        // Reverse the register: bit-reverse each basis index.
        let mut rev = vec![0.0; 1 << n];
        for idx in 0..(1usize << n) {
            let mut r = 0usize;
            for bit in 0..n {
                if idx & (1 << bit) != 0 {
                    r |= 1 << (n - 1 - bit);
                }
            }
            rev[r] = gs.amplitudes[idx];
        }
        for cut in 1..n {
            let a = entanglement_entropy(gs.amplitudes.as_slice(), cut).unwrap();
            let b = entanglement_entropy(&rev, n - cut).unwrap();
            assert!((a - b).abs() < 1e-10, "cut {cut}: {a} vs {b}");
        }
    }

    #[test]
    fn non_normalized_state_is_rejected() {
        let state = vec![1.0, 1.0, 0.0, 0.0];
        match entanglement_entropy(&state, 1) {
            Err(NqsError::NotNormalized { .. }) => {}
            other => panic!("expected normalization error, got {other:?}"),
        }
    }

    #[test]
    fn concentric_entropy_grows_with_size() {
        // Exact check for the volume-law family: the concentric chain
        // decouples into N/2 pairs that all straddle the central cut, so
        // S(central) = (N/2) * S_pair exactly.
        let g: f64 = 0.5;
        let e = (1.0 + 4.0 * g * g).sqrt();
        let ratio = (e - 1.0) / (2.0 * g); // b/a amplitude ratio of one pair
        let a2 = 1.0 / (2.0 * (1.0 + ratio * ratio));
        let ab2 = 2.0 * a2 * ratio; // off-diagonal of the 1-site RDM
        let lam = 0.5 + ab2;
        let s_pair = -(lam * lam.log2() + (1.0 - lam) * (1.0 - lam).log2());

        let mut prev = 0.0;
        for n in [4usize, 6, 8, 10] {
            let gs = ground_state(&DriverSpec::ctfim(n, g)).unwrap();
            let s = entanglement_entropy(gs.amplitudes.as_slice(), n / 2).unwrap();
            assert!(s > prev, "entropy must increase with N");
            assert!(
                (s - s_pair * (n as f64) / 2.0).abs() < 1e-8,
                "n = {n}: {s} vs {}",
                s_pair * (n as f64) / 2.0
            );
            prev = s;
        }
    }

    #[test]
    fn thermal_zz_factorizes_without_couplings() {
        let a = vec![0.3, -0.2, 0.5];
        let b = vec![0.7, -0.4];
        let x = RbmParams::new(a, b, DMatrix::zeros(3, 2)).unwrap();
        let (zz, zv, zh) = thermal_pair_moments(&x, 1, 1).unwrap();
        assert!((zz - zv * zh).abs() < 1e-14);
        // <z_h> = -tanh(b_m) when W = 0.
        assert!((zh + (-0.4f64).tanh()).abs() < 1e-14);
        // <z_v> = -tanh(a_k) when W = 0.
        assert!((zv + (-0.2f64).tanh()).abs() < 1e-14);
    }

    #[test]
    fn single_pair_thermal_zz_by_hand() {
        let w = 0.8;
        let x = RbmParams::new(vec![0.0], vec![0.0], DMatrix::from_element(1, 1, w)).unwrap();
        assert!((thermal_zz(&x, 0, 0).unwrap() + w.tanh()).abs() < 1e-14);
    }

    #[test]
    fn thermal_zz_is_bounded() {
        for seed in 0..5 {
            let x = RbmParams::random_with_std(4, 3, 1.5, seed);
            let zz = thermal_zz(&x, seed as usize % 4, seed as usize % 3).unwrap();
            assert!((-1.0..=1.0).contains(&zz));
        }
    }

    #[test]
    fn thermal_moments_match_full_enumeration() {
        // Direct 2^(n+p) sum over both registers.
        for seed in 0..3 {
            let n = 4;
            let p = 5;
            let x = RbmParams::random_with_std(n, p, 0.7, 60 + seed);
            let (k, m) = (1, 3);
            let mut z = 0.0;
            let mut zz = 0.0;
            for vi in 0..(1usize << n) {
                let v = SpinConfig::from_index(vi, n);
                for hi in 0..(1usize << p) {
                    let h = SpinConfig::from_index(hi, p);
                    let mut e = 0.0;
                    for i in 0..n {
                        e += x.a()[i] * v.spin(i);
                    }
                    for j in 0..p {
                        e += x.b()[j] * h.spin(j);
                        for i in 0..n {
                            e += x.w()[(i, j)] * v.spin(i) * h.spin(j);
                        }
                    }
                    let w = (-e).exp();
                    z += w;
                    zz += w * v.spin(k) * h.spin(m);
                }
            }
            let direct = zz / z;
            let fast = thermal_zz(&x, k, m).unwrap();
            assert!((direct - fast).abs() < 1e-12, "{direct} vs {fast}");
        }
    }
}

//! Brute-force OTOC evaluation on the learner's full `2^(n+p)` register.
//!
//! The learner Hamiltonian is diagonal in the computational basis, so
//! Heisenberg evolution never needs a matrix exponential: conjugating an
//! operator rescales each matrix element by a phase built from the two
//! diagonal energies it connects. The time direction is fixed so that the
//! closed forms hold with a positive imaginary amplitude,
//!
//! ```text
//! C(0, 0, X, t) = cos(4 W_km t) + i <z_v z_h> sin(4 W_km t)
//! ```
//!
//! i.e. `sigma(t) = e^{-iHt} sigma e^{+iHt}`.

use crate::error::{NqsError, Result};
use crate::rbm::RbmParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Largest combined register size for brute-force operator evaluation.
pub const OTOC_BRUTE_CAP: usize = 12;

/// Pauli flavor of an OTOC probe operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
}

/// One brute-force OTOC evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OtocSample {
    pub value: Complex64,
    pub t: f64,
    pub kappa1: Complex64,
    pub kappa2: Complex64,
    pub alpha: PauliAxis,
    pub beta: PauliAxis,
    /// (visible index k, hidden index m).
    pub pair: (usize, usize),
}

/// The learner's thermal state as explicit diagonal weights over the
/// combined register, with basis index `(v_index << p) | h_index`.
pub struct LearnerThermal {
    n: usize,
    p: usize,
    energies: Vec<f64>,
    rho: Vec<f64>,
}

impl LearnerThermal {
    pub fn new(x: &RbmParams) -> Result<Self> {
        let (n, p) = (x.n(), x.p());
        if n + p > OTOC_BRUTE_CAP {
            return Err(NqsError::SizeCap {
                quantity: "brute-force register size n+p",
                cap: OTOC_BRUTE_CAP,
                got: n + p,
            });
        }
        let dim = 1usize << (n + p);
        let mut energies = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut e = 0.0;
            for i in 0..n {
                e += x.a()[i] * Self::spin_at(c, n + p, i);
            }
            for j in 0..p {
                let hj = Self::spin_at(c, n + p, n + j);
                e += x.b()[j] * hj;
                for i in 0..n {
                    e += x.w()[(i, j)] * Self::spin_at(c, n + p, i) * hj;
                }
            }
            energies.push(e);
        }
        let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut rho: Vec<f64> = energies.iter().map(|&e| (-(e - emin)).exp()).collect();
        let z: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|w| *w /= z);
        Ok(Self { n, p, energies, rho })
    }

    /// Spin of overall site index `site` (visible sites first) in basis
    /// state `c` over `total` sites.
    #[inline]
    fn spin_at(c: usize, total: usize, site: usize) -> f64 {
        if c & (1usize << (total - 1 - site)) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn mask(&self, site: usize) -> usize {
        1usize << (self.n + self.p - 1 - site)
    }

    fn visible_site(&self, k: usize) -> usize {
        assert!(k < self.n);
        k
    }

    fn hidden_site(&self, m: usize) -> usize {
        assert!(m < self.p);
        self.n + m
    }

    /// Amplitude and target of `sigma^axis(site)` applied to `|c>`,
    /// optionally Heisenberg-evolved for time `t`.
    #[inline]
    fn apply_sigma(&self, axis: PauliAxis, site: usize, t: Option<f64>, c: usize) -> (usize, Complex64) {
        let mask = self.mask(site);
        let target = c ^ mask;
        let base = match axis {
            PauliAxis::X => Complex64::new(1.0, 0.0),
            // sigma^y |0> = i |1>, sigma^y |1> = -i |0>.
            PauliAxis::Y => Complex64::new(0.0, Self::spin_at(c, self.n + self.p, site)),
        };
        match t {
            None => (target, base),
            Some(t) => {
                // e^{-iHt} sigma e^{+iHt} on a diagonal H.
                let phase = (self.energies[c] - self.energies[target]) * t;
                (target, base * Complex64::from_polar(1.0, phase))
            }
        }
    }

    fn dim(&self) -> usize {
        1usize << (self.n + self.p)
    }
}

/// Evaluate the mean-translated OTOC string
/// `< (A - k1)† (B(t) - k2)† (A - k1) (B(t) - k2) >` with
/// `A = sigma^alpha(v_k)` and `B = sigma^beta(h_m)` over the learner's
/// thermal state.
pub fn brute_force_otoc(
    x: &RbmParams,
    pair: (usize, usize),
    alpha: PauliAxis,
    beta: PauliAxis,
    kappa1: Complex64,
    kappa2: Complex64,
    t: f64,
) -> Result<OtocSample> {
    let sys = LearnerThermal::new(x)?;
    let (k, m) = pair;
    let vk = sys.visible_site(k);
    let hm = sys.hidden_site(m);

    // Operator string in application order (rightmost factor first):
    // (axis, site, evolved, kappa).
    let factors = [
        (beta, hm, Some(t), kappa2),
        (alpha, vk, None, kappa1),
        (beta, hm, Some(t), kappa2.conj()),
        (alpha, vk, None, kappa1.conj()),
    ];

    let mut value = Complex64::new(0.0, 0.0);
    let mut terms: Vec<(usize, Complex64)> = Vec::with_capacity(16);
    let mut next: Vec<(usize, Complex64)> = Vec::with_capacity(16);
    for c in 0..sys.dim() {
        if sys.rho[c] == 0.0 {
            continue;
        }
        terms.clear();
        terms.push((c, Complex64::new(1.0, 0.0)));
        for &(axis, site, tt, kappa) in &factors {
            next.clear();
            for &(state, amp) in terms.iter() {
                let (target, a) = sys.apply_sigma(axis, site, tt, state);
                next.push((target, amp * a));
                if kappa != Complex64::new(0.0, 0.0) {
                    next.push((state, -kappa * amp));
                }
            }
            std::mem::swap(&mut terms, &mut next);
        }
        let mut diag = Complex64::new(0.0, 0.0);
        for &(state, amp) in terms.iter() {
            if state == c {
                diag += amp;
            }
        }
        value += diag * sys.rho[c];
    }
    Ok(OtocSample { value, t, kappa1, kappa2, alpha, beta, pair })
}

/// Expectations of the commutator string `Theta = [A, B(t)]` and the
/// anticommutator string `Phi = {A, B(t)}`, plus the positive-semidefinite
/// quadratic forms `<L(l1,l2)† L(l1,l2)>` with `L = l1 Phi + i l2 Theta`.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorStats {
    /// `<Theta† Theta>` over the thermal state.
    pub exp_theta_dag_theta: f64,
    /// Squared Frobenius norm of Theta.
    pub frob_theta_sq: f64,
    /// `<Phi† Theta>` over the thermal state.
    pub exp_phi_dag_theta: Complex64,
    /// `<L(0,1)† L(0,1)>`.
    pub l01: f64,
    /// `<L(1,0)† L(1,0)>`.
    pub l10: f64,
    /// `<L(1,1)† L(1,1)>`.
    pub l11: f64,
}

pub fn commutator_stats(
    x: &RbmParams,
    pair: (usize, usize),
    alpha: PauliAxis,
    beta: PauliAxis,
    t: f64,
) -> Result<CommutatorStats> {
    let sys = LearnerThermal::new(x)?;
    let (k, m) = pair;
    let vk = sys.visible_site(k);
    let hm = sys.hidden_site(m);

    let mut exp_tt = 0.0;
    let mut frob = 0.0;
    let mut exp_pt = Complex64::new(0.0, 0.0);
    let mut l01 = 0.0;
    let mut l10 = 0.0;
    let mut l11 = 0.0;

    for c in 0..sys.dim() {
        // A B(t) |c> and B(t) A |c> both land on the double flip of c.
        let (c1, b1) = sys.apply_sigma(beta, hm, Some(t), c);
        let (_, a1) = sys.apply_sigma(alpha, vk, None, c1);
        let u = b1 * a1;
        let (c2, a2) = sys.apply_sigma(alpha, vk, None, c);
        let (_, b2) = sys.apply_sigma(beta, hm, Some(t), c2);
        let w = a2 * b2;
        let theta_amp = u - w;
        let phi_amp = u + w;

        let t2 = theta_amp.norm_sqr();
        frob += t2;
        let rho = sys.rho[c];
        exp_tt += rho * t2;
        exp_pt += rho * phi_amp.conj() * theta_amp;
        l01 += rho * theta_amp.norm_sqr(); // |i Theta|^2 = |Theta|^2
        l10 += rho * phi_amp.norm_sqr();
        l11 += rho * (phi_amp + Complex64::i() * theta_amp).norm_sqr();
    }
    Ok(CommutatorStats {
        exp_theta_dag_theta: exp_tt,
        frob_theta_sq: frob,
        exp_phi_dag_theta: exp_pt,
        l01,
        l10,
        l11,
    })
}

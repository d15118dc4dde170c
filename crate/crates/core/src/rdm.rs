//! Two-body reduced density matrices of the learner, their mutual
//! information and covariance, and the bound curves of the I-eta plane.
//!
//! For a visible-hidden pair (k, m) the two-body reduced state is
//! diagonal; its four eigenvalues are indexed in the order
//! `(v=+1,h=+1), (v=+1,h=-1), (v=-1,h=+1), (v=-1,h=-1)`.
//! The covariance `eta = <z_v z_h> - <z_v><z_h>` and the mutual
//! information `I = S(v) + S(h) - S(v,h)` then obey
//!
//! ```text
//! LB(eta) <= I <= UB(eta)
//! LB(eta) = 2 + (1+eta)/2 log2((1+eta)/4) + (1-eta)/2 log2((1-eta)/4)
//! UB(eta) = H2((1 + sqrt(1 - |eta|)) / 2)
//! ```
//!
//! in bits, which is tighter than the conventional `eta^2 / 2`.

use crate::error::{NqsError, Result};
use crate::exact::{brute_force_otoc, thermal_pair_moments, PauliAxis, OTOC_BRUTE_CAP};
use crate::rbm::{ln_2cosh, RbmParams};
use crate::derive_seed;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest visible register for the exact `2^(n-1)` spectrum sum.
pub const EXACT_RDM_CAP: usize = 20;

/// Entropy/log base used for information quantities. The artifact's
/// default is bits; nats are retained behind this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Conversion factor from bits.
    fn from_bits(self) -> f64 {
        match self {
            LogBase::Bits => 1.0,
            LogBase::Nats => std::f64::consts::LN_2,
        }
    }
}

/// How two-body spectra are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdmMode {
    Exact,
    Gibbs { n_samples: usize },
}

/// The four diagonal eigenvalues of the two-body reduced state of one
/// visible-hidden pair, in the order (++, +-, -+, --).
#[derive(Debug, Clone)]
pub struct TwoBodySpectrum {
    pub lambdas: [f64; 4],
    /// (visible index k, hidden index m).
    pub pair: (usize, usize),
    /// Per-eigenvalue standard errors (sampling mode only).
    pub stderr: Option<[f64; 4]>,
}

impl TwoBodySpectrum {
    pub fn trace_defect(&self) -> f64 {
        (self.lambdas.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Running log-sum-exp accumulator.
struct LogSum {
    shift: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { shift: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term > self.shift {
            self.sum = self.sum * (self.shift - log_term).exp() + 1.0;
            self.shift = log_term;
        } else {
            self.sum += (log_term - self.shift).exp();
        }
    }

    fn log_total(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.sum.ln()
        }
    }
}

fn normalize_logs(logs: [f64; 4]) -> [f64; 4] {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw = [
        (logs[0] - max).exp(),
        (logs[1] - max).exp(),
        (logs[2] - max).exp(),
        (logs[3] - max).exp(),
    ];
    let total: f64 = raw.iter().sum();
    [raw[0] / total, raw[1] / total, raw[2] / total, raw[3] / total]
}

/// Log of the closed-form prefactor `exp(-a_k x - b_m y - W_km x y)`.
fn log_prefactor(x: &RbmParams, k: usize, m: usize, vx: f64, hy: f64) -> f64 {
    -x.a()[k] * vx - x.b()[m] * hy - x.w()[(k, m)] * vx * hy
}

/// Exact two-body spectrum by summation over the `2^(n-1)` configurations
/// of the other visible spins; all hidden spins except `h_m` are summed
/// analytically through the product of 2cosh factors.
pub fn exact_rdm_spectrum(x: &RbmParams, k: usize, m: usize) -> Result<TwoBodySpectrum> {
    let n = x.n();
    let p = x.p();
    assert!(k < n && m < p);
    if n > EXACT_RDM_CAP {
        return Err(NqsError::SizeCap {
            quantity: "exact two-body spectrum spin count",
            cap: EXACT_RDM_CAP,
            got: n,
        });
    }

    // Sites other than k, in a fixed order.
    let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let rest = others.len();

    // State walked in Gray-code order over the other visible spins.
    let mut spins = vec![1.0f64; rest];
    // c_{y} = sum_{i != k} (a_i + W_im y) v_i for both h_m branches.
    let mut c_plus: f64 = others.iter().map(|&i| x.a()[i] + x.w()[(i, m)]).sum();
    let mut c_minus: f64 = others.iter().map(|&i| x.a()[i] - x.w()[(i, m)]).sum();
    // theta'_j = b_j + sum_{i != k} W_ij v_i for j != m.
    let hidden: Vec<usize> = (0..p).filter(|&j| j != m).collect();
    let mut theta: Vec<f64> = hidden
        .iter()
        .map(|&j| x.b()[j] + others.iter().map(|&i| x.w()[(i, j)]).sum::<f64>())
        .collect();

    // Accumulators indexed by [x branch][y branch] with +1 first.
    let mut acc = [[LogSum::new(), LogSum::new()], [LogSum::new(), LogSum::new()]];
    let total = 1u64 << rest;
    for step in 0..total {
        if step > 0 {
            let pos = step.trailing_zeros() as usize;
            let old = spins[pos];
            spins[pos] = -old;
            let site = others[pos];
            c_plus -= 2.0 * (x.a()[site] + x.w()[(site, m)]) * old;
            c_minus -= 2.0 * (x.a()[site] - x.w()[(site, m)]) * old;
            for (jj, &j) in hidden.iter().enumerate() {
                theta[jj] -= 2.0 * x.w()[(site, j)] * old;
            }
        }
        let mut lp_plus = 0.0;
        let mut lp_minus = 0.0;
        for (jj, &j) in hidden.iter().enumerate() {
            lp_plus += ln_2cosh(theta[jj] + x.w()[(k, j)]);
            lp_minus += ln_2cosh(theta[jj] - x.w()[(k, j)]);
        }
        acc[0][0].add(-c_plus + lp_plus);
        acc[0][1].add(-c_minus + lp_plus);
        acc[1][0].add(-c_plus + lp_minus);
        acc[1][1].add(-c_minus + lp_minus);
    }

    let logs = [
        log_prefactor(x, k, m, 1.0, 1.0) + acc[0][0].log_total(),
        log_prefactor(x, k, m, 1.0, -1.0) + acc[0][1].log_total(),
        log_prefactor(x, k, m, -1.0, 1.0) + acc[1][0].log_total(),
        log_prefactor(x, k, m, -1.0, -1.0) + acc[1][1].log_total(),
    ];
    Ok(TwoBodySpectrum { lambdas: normalize_logs(logs), pair: (k, m), stderr: None })
}

/// Sampled two-body spectrum.
///
/// The conditional distribution of the other visible spins factorizes
/// site by site, so each sample is an independent product draw (no Markov
/// chain): `P(v_i) ~ exp(-(a_i + W_im h_m) v_i)`. For each drawn
/// configuration the compound observable
/// `prod_{j != m} 2cosh(theta'_j + W_kj x)` is evaluated for both values
/// of `v_k = x` and averaged; closed-form prefactors and the product
/// normalization `N_y = prod_{i != k} 2cosh(a_i + W_im y)` complete the
/// eigenvalues, which are then normalized to unit trace. Standard errors
/// come from chunked batching.
pub fn gibbs_rdm_spectrum(
    x: &RbmParams,
    k: usize,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<TwoBodySpectrum> {
    let (spectrum, _) = gibbs_rdm_chunks(x, k, m, n_samples, seed)?;
    Ok(spectrum)
}

/// Sampled spectrum together with the per-chunk normalized spectra the
/// standard errors are built from.
pub fn gibbs_rdm_chunks(
    x: &RbmParams,
    k: usize,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(TwoBodySpectrum, Vec<[f64; 4]>)> {
    if n_samples < 1 {
        return Err(NqsError::InvalidSpec("Gibbs sampling needs at least one sample".into()));
    }
    let n = x.n();
    let p = x.p();
    assert!(k < n && m < p);
    let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let hidden: Vec<usize> = (0..p).filter(|&j| j != m).collect();

    let n_chunks = n_samples.min(20);
    let chunk_sizes: Vec<usize> = {
        let base = n_samples / n_chunks;
        let extra = n_samples % n_chunks;
        (0..n_chunks).map(|c| base + usize::from(c < extra)).collect()
    };

    // log N_y and per-site P(v_i = +1) for both h_m branches.
    let mut log_ny = [0.0f64; 2];
    let mut p_up = [Vec::with_capacity(others.len()), Vec::with_capacity(others.len())];
    for (bi, y) in [(0usize, 1.0f64), (1, -1.0)] {
        for &i in &others {
            let c = x.a()[i] + x.w()[(i, m)] * y;
            log_ny[bi] += ln_2cosh(c);
            p_up[bi].push(1.0 / (1.0 + (2.0 * c).exp()));
        }
    }

    // Chunked log-mean accumulators: [y branch][x branch].
    let mut chunk_logs: Vec<[[f64; 2]; 2]> = Vec::with_capacity(n_chunks);
    let mut rng_plus = ChaCha8Rng::seed_from_u64(seed);
    rng_plus.set_stream(1);
    let mut rng_minus = ChaCha8Rng::seed_from_u64(seed);
    rng_minus.set_stream(2);

    let mut theta = vec![0.0f64; hidden.len()];
    for &size in &chunk_sizes {
        let mut acc = [[LogSum::new(), LogSum::new()], [LogSum::new(), LogSum::new()]];
        for _ in 0..size {
            for (bi, rng) in [(0usize, &mut rng_plus), (1, &mut rng_minus)] {
                // Independent inverse-CDF draw per site.
                for (jj, &j) in hidden.iter().enumerate() {
                    theta[jj] = x.b()[j];
                }
                for (oi, &i) in others.iter().enumerate() {
                    let v = if rng.random::<f64>() < p_up[bi][oi] { 1.0 } else { -1.0 };
                    for (jj, &j) in hidden.iter().enumerate() {
                        theta[jj] += x.w()[(i, j)] * v;
                    }
                }
                let mut lp_plus = 0.0;
                let mut lp_minus = 0.0;
                for (jj, &j) in hidden.iter().enumerate() {
                    lp_plus += ln_2cosh(theta[jj] + x.w()[(k, j)]);
                    lp_minus += ln_2cosh(theta[jj] - x.w()[(k, j)]);
                }
                acc[bi][0].add(lp_plus);
                acc[bi][1].add(lp_minus);
            }
        }
        let log_mean = |ls: &LogSum| ls.log_total() - (size as f64).ln();
        chunk_logs.push([
            [log_mean(&acc[0][0]), log_mean(&acc[0][1])],
            [log_mean(&acc[1][0]), log_mean(&acc[1][1])],
        ]);
    }

    let assemble = |means: &[[f64; 2]; 2]| -> [f64; 4] {
        // lambda(x, y) = prefactor * N_y * E[compound_x | y].
        normalize_logs([
            log_prefactor(x, k, m, 1.0, 1.0) + log_ny[0] + means[0][0],
            log_prefactor(x, k, m, 1.0, -1.0) + log_ny[1] + means[1][0],
            log_prefactor(x, k, m, -1.0, 1.0) + log_ny[0] + means[0][1],
            log_prefactor(x, k, m, -1.0, -1.0) + log_ny[1] + means[1][1],
        ])
    };

    let chunks: Vec<[f64; 4]> = chunk_logs.iter().map(assemble).collect();

    // Pooled estimate: combine chunk log-means weighted by chunk size.
    let total = n_samples as f64;
    let mut pooled = [[LogSum::new(), LogSum::new()], [LogSum::new(), LogSum::new()]];
    for (logs, &size) in chunk_logs.iter().zip(chunk_sizes.iter()) {
        let lw = (size as f64 / total).ln();
        for yb in 0..2 {
            for xb in 0..2 {
                pooled[yb][xb].add(logs[yb][xb] + lw);
            }
        }
    }
    let pooled_means = [
        [pooled[0][0].log_total(), pooled[0][1].log_total()],
        [pooled[1][0].log_total(), pooled[1][1].log_total()],
    ];
    let lambdas = assemble(&pooled_means);

    let stderr = if chunks.len() >= 2 {
        let c = chunks.len() as f64;
        let mut se = [0.0f64; 4];
        for (i, s) in se.iter_mut().enumerate() {
            let mean: f64 = chunks.iter().map(|ch| ch[i]).sum::<f64>() / c;
            let var: f64 =
                chunks.iter().map(|ch| (ch[i] - mean).powi(2)).sum::<f64>() / (c - 1.0);
            *s = (var / c).sqrt();
        }
        Some(se)
    } else {
        None
    };

    Ok((TwoBodySpectrum { lambdas, pair: (k, m), stderr }, chunks))
}

/// Marginal eigenvalue pairs by contraction:
/// visible `(P(v=+1), P(v=-1))` and hidden `(P(h=+1), P(h=-1))`.
pub fn one_rdm(spectrum: &TwoBodySpectrum) -> ((f64, f64), (f64, f64)) {
    let l = &spectrum.lambdas;
    ((l[0] + l[1], l[2] + l[3]), (l[0] + l[2], l[1] + l[3]))
}

#[inline]
fn entropy_term_bits(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Mutual information `S(v) + S(h) - S(v,h)` in bits.
pub fn mutual_information(spectrum: &TwoBodySpectrum) -> f64 {
    mutual_information_in(spectrum, LogBase::Bits)
}

pub fn mutual_information_in(spectrum: &TwoBodySpectrum, base: LogBase) -> f64 {
    let ((v0, v1), (h0, h1)) = one_rdm(spectrum);
    let marginals = entropy_term_bits(v0)
        + entropy_term_bits(v1)
        + entropy_term_bits(h0)
        + entropy_term_bits(h1);
    let joint: f64 = spectrum.lambdas.iter().map(|&l| entropy_term_bits(l)).sum();
    (marginals - joint) * base.from_bits()
}

/// Covariance `<z_v z_h> - <z_v><z_h>` of the pair.
pub fn eta(spectrum: &TwoBodySpectrum) -> f64 {
    let l = &spectrum.lambdas;
    let zz = l[0] - l[1] - l[2] + l[3];
    let zv = l[0] + l[1] - l[2] - l[3];
    let zh = l[0] - l[1] + l[2] - l[3];
    zz - zv * zh
}

fn check_eta(eta: f64) -> Result<f64> {
    if !eta.is_finite() || eta.abs() > 1.0 + 1e-12 {
        return Err(NqsError::EtaOutOfRange(eta));
    }
    Ok(eta.clamp(-1.0, 1.0))
}

/// Lower bound of the mutual information at covariance `eta`, in bits.
pub fn lower_bound(eta: f64) -> Result<f64> {
    lower_bound_in(eta, LogBase::Bits)
}

pub fn lower_bound_in(eta: f64, base: LogBase) -> Result<f64> {
    let eta = check_eta(eta)?;
    // Evaluate through |eta| so the bound is an even function bit-exactly.
    let u = eta.abs();
    let term = |v: f64| if v > 0.0 { (v / 2.0) * (v / 4.0).log2() } else { 0.0 };
    Ok((2.0 + term(1.0 + u) + term(1.0 - u)) * base.from_bits())
}

/// Upper bound of the mutual information at covariance `eta`, in bits.
/// The inner square root takes the branch that keeps the spectrum
/// nonnegative: `sqrt(1 - eta)` for `eta >= 0`, `sqrt(1 + eta)` below.
pub fn upper_bound(eta: f64) -> Result<f64> {
    upper_bound_in(eta, LogBase::Bits)
}

pub fn upper_bound_in(eta: f64, base: LogBase) -> Result<f64> {
    let eta = check_eta(eta)?;
    let inner = if eta >= 0.0 { 1.0 - eta } else { 1.0 + eta };
    let lam = (1.0 + inner.max(0.0).sqrt()) / 2.0;
    Ok((entropy_term_bits(lam) + entropy_term_bits(1.0 - lam)) * base.from_bits())
}

/// The conventional general-bipartition lower bound `eta^2 / 2`.
pub fn conventional_lb(eta: f64) -> Result<f64> {
    let eta = check_eta(eta)?;
    Ok(eta * eta / 2.0)
}

/// One point of the I-eta plane for a trained (or arbitrary) network.
#[derive(Debug, Clone)]
pub struct IEtaPoint {
    /// (visible index k, hidden index m).
    pub pair: (usize, usize),
    /// Driver field-to-coupling ratio this network was trained at.
    pub g: f64,
    pub eta: f64,
    pub mi: f64,
    pub lb: f64,
    pub ub: f64,
    pub lb_gap: f64,
    pub stderr_eta: Option<f64>,
    pub stderr_mi: Option<f64>,
}

/// Scan over all visible-hidden pairs.
#[derive(Debug, Clone)]
pub struct IetaScan {
    pub points: Vec<IEtaPoint>,
    pub median_lb_gap: f64,
    pub max_lb_gap: f64,
}

/// Evaluate (eta, MI, bounds) for every pair (k, m), in pair order.
pub fn ieta_scan(x: &RbmParams, g_label: f64, mode: RdmMode, seed: u64) -> Result<IetaScan> {
    let pairs: Vec<(usize, usize)> =
        (0..x.n()).flat_map(|k| (0..x.p()).map(move |m| (k, m))).collect();
    let points: Result<Vec<IEtaPoint>> = pairs
        .par_iter()
        .map(|&(k, m)| {
            let pair_seed = derive_seed(seed, (k * x.p() + m) as u64);
            let (spectrum, chunks) = match mode {
                RdmMode::Exact => (exact_rdm_spectrum(x, k, m)?, Vec::new()),
                RdmMode::Gibbs { n_samples } => gibbs_rdm_chunks(x, k, m, n_samples, pair_seed)?,
            };
            let e = eta(&spectrum);
            let mi = mutual_information(&spectrum);
            let lb = lower_bound(e)?;
            let ub = upper_bound(e)?;
            debug_assert!(lb - 1e-9 <= mi && mi <= ub + 1e-9, "bound violation at ({k},{m})");
            let (stderr_eta, stderr_mi) = if chunks.len() >= 2 {
                let c = chunks.len() as f64;
                let etas: Vec<f64> = chunks
                    .iter()
                    .map(|l| {
                        eta(&TwoBodySpectrum { lambdas: *l, pair: (k, m), stderr: None })
                    })
                    .collect();
                let mis: Vec<f64> = chunks
                    .iter()
                    .map(|l| {
                        mutual_information(&TwoBodySpectrum {
                            lambdas: *l,
                            pair: (k, m),
                            stderr: None,
                        })
                    })
                    .collect();
                let spread = |vals: &[f64]| {
                    let mean = vals.iter().sum::<f64>() / c;
                    let var =
                        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c - 1.0);
                    (var / c).sqrt()
                };
                (Some(spread(&etas)), Some(spread(&mis)))
            } else {
                (None, None)
            };
            Ok(IEtaPoint {
                pair: (k, m),
                g: g_label,
                eta: e,
                mi,
                lb,
                ub,
                lb_gap: mi - lb,
                stderr_eta,
                stderr_mi,
            })
        })
        .collect();
    let points = points?;
    let mut gaps: Vec<f64> = points.iter().map(|p| p.lb_gap).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let median_lb_gap = if gaps.is_empty() {
        0.0
    } else if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
    };
    let max_lb_gap = gaps.last().copied().unwrap_or(0.0);
    Ok(IetaScan { points, median_lb_gap, max_lb_gap })
}

/// Covariance of a pair read off the OTOC side: the mean-translation
/// combination evaluated at the quarter period `t1 = pi / (8 W_km)`,
/// where the string value is purely the two-point correlator.
///
/// The translated combination only carries `|kappa|^2` moduli, so the
/// signed product of the one-point means cannot come from it; the product
/// is subtracted directly and the OTOC contributes the imaginary part.
pub fn eta_from_otoc(x: &RbmParams, k: usize, m: usize) -> Result<f64> {
    if x.visible_isolated(k) || x.hidden_isolated(m) {
        // A disconnected neuron is exactly independent of the other
        // register; the covariance is zero by construction.
        return Ok(0.0);
    }
    let w = x.w()[(k, m)];
    if w == 0.0 {
        return Err(NqsError::ZeroWeight { k, m });
    }
    let (_, zv, zh) = thermal_pair_moments(x, k, m)?;
    let t1 = std::f64::consts::PI / (8.0 * w);
    let kappa1 = Complex64::new(0.0, zv).sqrt();
    let kappa2 = Complex64::new(0.0, zh).sqrt();

    let combination = if x.n() + x.p() <= OTOC_BRUTE_CAP {
        let c_a = brute_force_otoc(x, (k, m), PauliAxis::X, PauliAxis::X, kappa1, ZERO, t1)?;
        let c_b = brute_force_otoc(x, (k, m), PauliAxis::X, PauliAxis::X, ZERO, kappa2, t1)?;
        let c_ab = brute_force_otoc(x, (k, m), PauliAxis::X, PauliAxis::X, kappa1, kappa2, t1)?;
        c_a.value + c_b.value - c_ab.value
    } else {
        // Closed form: C(0,0,t1) = i <z_v z_h>, and the translation
        // offsets cancel down to -|k1|^2 |k2|^2.
        let zz = crate::exact::thermal_zz(x, k, m)?;
        Complex64::new(-(kappa1.norm_sqr() * kappa2.norm_sqr()), zz)
    };
    Ok(combination.im - zv * zh)
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One row of the bound-curve table.
#[derive(Debug, Clone, Copy)]
pub struct BoundPoint {
    pub eta: f64,
    pub lb: f64,
    pub ub: f64,
    pub conventional_lb: f64,
}

/// Bound curves sampled on a uniform eta grid over [-1, 1].
pub fn bound_curve(points: usize) -> Vec<BoundPoint> {
    assert!(points >= 2);
    (0..points)
        .map(|i| {
            let eta = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            BoundPoint {
                eta,
                lb: lower_bound(eta).unwrap(),
                ub: upper_bound(eta).unwrap(),
                conventional_lb: conventional_lb(eta).unwrap(),
            }
        })
        .collect()
}

//! Closed-form OTOC traces of the learner, their invariants of motion,
//! mean-translation offsets, and invariant-preserving shift maps.
//!
//! For Pauli probes on a visible-hidden pair (k, m), the string value as
//! a function of the scaled time `tau = 4 W_km t` is
//!
//! ```text
//! C(tau) = cos(tau) + i zz sin(tau),    zz = <z_v z_h>
//! ```
//!
//! independent of which of x or y is probed at either end. Writing `xi`
//! for either component, `I1 = -2 xi' cos(tau) - 2 xi sin(tau)` and
//! `I2 = -2 xi' sin(tau) + 2 xi cos(tau)` are constant along the
//! trajectory: (0, 2) for the real part and (-2 zz, 0) for the imaginary
//! part, whose phase-space circle radius |zz| tracks training while the
//! real part's does not.

use crate::error::{NqsError, Result};
use crate::exact::{brute_force_otoc, commutator_stats, thermal_zz, PauliAxis};
use crate::rbm::RbmParams;
use crate::rdm::gibbs_rdm_spectrum;
use crate::sr::TrainingHistory;
use crate::{derive_seed, exact::ENUMERATION_CAP};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which component of the OTOC a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TracePart {
    Real,
    Imag,
}

/// Where a trace's two-point amplitude came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZzSource {
    ThermalExact,
    GibbsRdm,
}

/// Number of grid points in [`default_tau_grid`].
pub const DEFAULT_TAU_POINTS: usize = 1024;

/// Uniform periodic grid over one period `[0, 2 pi)`; the endpoint is
/// excluded so central differences can wrap.
pub fn default_tau_grid() -> Vec<f64> {
    tau_grid(DEFAULT_TAU_POINTS)
}

pub fn tau_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / points as f64)
        .collect()
}

/// Closed-form OTOC components of one pair sampled on a tau grid.
#[derive(Debug, Clone)]
pub struct OtocTrace {
    pub tau: Vec<f64>,
    pub c_real: Vec<f64>,
    pub c_imag: Vec<f64>,
    /// Two-point amplitude `<z_v z_h>` of the imaginary component.
    pub zz: f64,
    pub pair: (usize, usize),
    pub w_km: f64,
    pub zz_source: ZzSource,
}

/// Fill the closed forms `cos(tau)` and `zz sin(tau)` on a grid.
pub fn analytic_trace(
    x: &RbmParams,
    k: usize,
    m: usize,
    zz: f64,
    zz_source: ZzSource,
    tau_grid: &[f64],
) -> OtocTrace {
    OtocTrace {
        tau: tau_grid.to_vec(),
        c_real: tau_grid.iter().map(|t| t.cos()).collect(),
        c_imag: tau_grid.iter().map(|t| zz * t.sin()).collect(),
        zz,
        pair: (k, m),
        w_km: x.w()[(k, m)],
        zz_source,
    }
}

/// Analytic trace with the two-point amplitude evaluated by the exact
/// thermal sum when the register is small enough, and by the sampled
/// two-body spectrum beyond that.
pub fn trace_for(x: &RbmParams, k: usize, m: usize, tau_grid: &[f64], seed: u64) -> Result<OtocTrace> {
    let (zz, source) = zz_for(x, k, m, seed)?;
    Ok(analytic_trace(x, k, m, zz, source, tau_grid))
}

/// Two-point amplitude with the size-dependent evaluation rule.
pub fn zz_for(x: &RbmParams, k: usize, m: usize, seed: u64) -> Result<(f64, ZzSource)> {
    if x.n() <= ENUMERATION_CAP {
        Ok((thermal_zz(x, k, m)?, ZzSource::ThermalExact))
    } else {
        let spectrum = gibbs_rdm_spectrum(x, k, m, GIBBS_ZZ_SAMPLES, seed)?;
        let l = &spectrum.lambdas;
        Ok((l[0] - l[1] - l[2] + l[3], ZzSource::GibbsRdm))
    }
}

const GIBBS_ZZ_SAMPLES: usize = 50_000;

/// How the tau derivative entering the invariants is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Closed-form derivative of the trace's analytic components.
    Analytic,
    /// Central finite differences on the grid, wrapping periodically
    /// when the grid covers exactly one period.
    FiniteDifference,
}

/// The two invariants of motion of one OTOC component, their compound
/// combinations, and how constant they actually were across the grid.
#[derive(Debug, Clone, Copy)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    /// (I1^2 + I2^2) / 4.
    pub compound_sum: f64,
    /// I1 I2 / 2.
    pub compound_prod: f64,
    pub part: TracePart,
    /// Largest standard deviation of either invariant across the grid.
    pub constancy_std: f64,
}

/// Evaluate the invariants `I1 = -2 xi' cos - 2 xi sin` and
/// `I2 = -2 xi' sin + 2 xi cos` pointwise and report their means and
/// grid spread.
pub fn invariants(trace: &OtocTrace, part: TracePart, mode: DerivativeMode) -> Result<InvariantSet> {
    let xi: &[f64] = match part {
        TracePart::Real => &trace.c_real,
        TracePart::Imag => &trace.c_imag,
    };
    let tau = &trace.tau;
    let n = tau.len();
    if n == 0 || (mode == DerivativeMode::FiniteDifference && n < 3) {
        return Err(NqsError::DegenerateGrid { need: 3, got: n });
    }

    let xi_dot: Vec<f64> = match mode {
        DerivativeMode::Analytic => match part {
            TracePart::Real => tau.iter().map(|t| -t.sin()).collect(),
            TracePart::Imag => tau.iter().map(|t| trace.zz * t.cos()).collect(),
        },
        DerivativeMode::FiniteDifference => finite_difference(xi, tau),
    };

    let mut i1 = Vec::with_capacity(n);
    let mut i2 = Vec::with_capacity(n);
    for idx in 0..n {
        let (s, c) = tau[idx].sin_cos();
        i1.push(-2.0 * xi_dot[idx] * c - 2.0 * xi[idx] * s);
        i2.push(-2.0 * xi_dot[idx] * s + 2.0 * xi[idx] * c);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let std = |v: &[f64], m: f64| {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let m1 = mean(&i1);
    let m2 = mean(&i2);
    Ok(InvariantSet {
        i1: m1,
        i2: m2,
        compound_sum: (m1 * m1 + m2 * m2) / 4.0,
        compound_prod: m1 * m2 / 2.0,
        part,
        constancy_std: std(&i1, m1).max(std(&i2, m2)),
    })
}

/// Central differences; wraps periodically when the grid is uniform and
/// spans one full period, otherwise falls back to one-sided ends.
fn finite_difference(xi: &[f64], tau: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let h = tau[1] - tau[0];
    let uniform = tau.windows(2).all(|w| ((w[1] - w[0]) - h).abs() < 1e-9 * h.abs().max(1.0));
    let periodic = uniform
        && ((tau[n - 1] + h) - (tau[0] + 2.0 * std::f64::consts::PI)).abs() < 1e-9;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if periodic {
            let prev = xi[(i + n - 1) % n];
            let next = xi[(i + 1) % n];
            (next - prev) / (2.0 * h)
        } else if i == 0 {
            (xi[1] - xi[0]) / (tau[1] - tau[0])
        } else if i == n - 1 {
            (xi[n - 1] - xi[n - 2]) / (tau[n - 1] - tau[n - 2])
        } else {
            (xi[i + 1] - xi[i - 1]) / (tau[i + 1] - tau[i - 1])
        };
        out.push(d);
    }
    out
}

/// The mean-translation offset identity: translating both probes by
/// `kappa_1, kappa_2` adds the real constant
/// `|k1|^2 |k2|^2 + |k1|^2 + |k2|^2` to the untranslated string value.
pub fn translated_otoc(c00: Complex64, kappa1: Complex64, kappa2: Complex64) -> Complex64 {
    let offset =
        kappa1.norm_sqr() * kappa2.norm_sqr() + kappa1.norm_sqr() + kappa2.norm_sqr();
    Complex64::new(c00.re + offset, c00.im)
}

/// Generator of an invariant-preserving shift of trace components:
/// adding `phi cos(tau)` preserves I1, adding `phi sin(tau)` preserves I2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftGenerator {
    Cos,
    Sin,
}

/// A trace component with accumulated invariant-preserving shifts.
///
/// Shifts from the two generators commute exactly: composition only adds
/// their coefficients, and materialization applies the combined shift in
/// one fixed expression.
#[derive(Debug, Clone)]
pub struct ShiftedSeries {
    base: Vec<f64>,
    tau: Vec<f64>,
    phi_cos: f64,
    phi_sin: f64,
}

impl ShiftedSeries {
    pub fn new(values: &[f64], tau: &[f64]) -> Self {
        assert_eq!(values.len(), tau.len());
        Self { base: values.to_vec(), tau: tau.to_vec(), phi_cos: 0.0, phi_sin: 0.0 }
    }

    pub fn apply(mut self, phi: f64, generator: ShiftGenerator) -> Self {
        match generator {
            ShiftGenerator::Cos => self.phi_cos += phi,
            ShiftGenerator::Sin => self.phi_sin += phi,
        }
        self
    }

    pub fn values(&self) -> Vec<f64> {
        self.base
            .iter()
            .zip(self.tau.iter())
            .map(|(&x, &t)| x + (self.phi_cos * t.cos() + self.phi_sin * t.sin()))
            .collect()
    }
}

/// One-shot form of the shift map.
pub fn lie_transform(values: &[f64], tau: &[f64], phi: f64, generator: ShiftGenerator) -> Vec<f64> {
    ShiftedSeries::new(values, tau).apply(phi, generator).values()
}

/// Size cap for the decomposition identity check, which walks the full
/// operator algebra.
pub const DECOMPOSITION_CAP: usize = 10;

/// Verification data for the positive-semidefinite decomposition of the
/// string value: `Re C = 1 - <B'B>/2` from the commutator, and `Im C`
/// from the three quadratic forms `<L(l1,l2)' L(l1,l2)>` with
/// `L = l1 {A,B(t)} + i l2 [A,B(t)]`.
#[derive(Debug, Clone, Copy)]
pub struct DecompositionReport {
    pub c: Complex64,
    /// |Re C - (1 - <Theta'Theta>/2)|.
    pub re_residual: f64,
    /// |Im C - (<L01'L01> + <L10'L10> - <L11'L11>)/4|.
    pub im_residual: f64,
    /// <Theta'Theta>.
    pub comm_quadratic: f64,
    pub l01: f64,
    pub l10: f64,
    pub l11: f64,
    /// Smallest of the quadratic forms; nonnegative up to roundoff.
    pub min_l: f64,
}

pub fn otoc_decomposition_check(
    x: &RbmParams,
    pair: (usize, usize),
    alpha: PauliAxis,
    beta: PauliAxis,
    t: f64,
) -> Result<DecompositionReport> {
    if x.n() + x.p() > DECOMPOSITION_CAP {
        return Err(NqsError::SizeCap {
            quantity: "decomposition-check register size n+p",
            cap: DECOMPOSITION_CAP,
            got: x.n() + x.p(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let c = brute_force_otoc(x, pair, alpha, beta, zero, zero, t)?.value;
    let stats = commutator_stats(x, pair, alpha, beta, t)?;
    let re_pred = 1.0 - stats.exp_theta_dag_theta / 2.0;
    let im_pred = (stats.l01 + stats.l10 - stats.l11) / 4.0;
    Ok(DecompositionReport {
        c,
        re_residual: (c.re - re_pred).abs(),
        im_residual: (c.im - im_pred).abs(),
        comm_quadratic: stats.exp_theta_dag_theta,
        l01: stats.l01,
        l10: stats.l10,
        l11: stats.l11,
        min_l: stats.l01.min(stats.l10).min(stats.l11),
    })
}

/// Per-epoch invariants along a training history for one pair.
#[derive(Debug, Clone, Copy)]
pub struct InvariantProfileRow {
    pub epoch: usize,
    pub zz: f64,
    /// Imaginary-part invariants (-2 zz, 0) and compound zz^2.
    pub i1_imag: f64,
    pub i2_imag: f64,
    pub compound_imag: f64,
    /// Real-part invariants, fixed at (0, 2) with compound 1.
    pub i1_real: f64,
    pub i2_real: f64,
    pub compound_real: f64,
}

/// Closed-form invariant profile across training epochs. The two-point
/// amplitude of each snapshot follows the same size rule as [`zz_for`].
pub fn invariant_training_profile(
    history: &TrainingHistory,
    pair: (usize, usize),
) -> Result<Vec<InvariantProfileRow>> {
    if history.records.is_empty() {
        return Err(NqsError::MissingSnapshots);
    }
    let (k, m) = pair;
    history
        .records
        .iter()
        .map(|rec| {
            let (zz, _) = zz_for(&rec.params, k, m, derive_seed(0x1a11, rec.iteration as u64))?;
            Ok(InvariantProfileRow {
                epoch: rec.iteration,
                zz,
                i1_imag: -2.0 * zz,
                i2_imag: 0.0,
                compound_imag: zz * zz,
                i1_real: 0.0,
                i2_real: 2.0,
                compound_real: 1.0,
            })
        })
        .collect()
}

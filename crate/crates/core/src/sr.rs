//! Stochastic-reconfiguration optimization of the learner.
//!
//! Each iteration samples visible configurations, estimates the geometric
//! matrix `F_ij = <D_i D_j> - <D_i><D_j>` and force vector
//! `S_i = <E_loc D_i> - <E_loc><D_i>`, and moves the parameters along
//! `X -> X - l (F + shift I)^{-1} S`.

use crate::drivers::{Connection, Driver, DriverSpec, DENSE_CAP};
use crate::error::{NqsError, Result};
use crate::exact::{ground_state, ENUMERATION_CAP};
use crate::rbm::{
    log_derivatives_into, log_psi, RbmParams, ThetaCache,
};
use crate::sampler::{sample, ChainPool, SampleBatch, SamplerConfig};
use crate::derive_seed;
use crate::spin::SpinConfig;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// What the optimizer drives toward. Only ground-state energy for now.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    GroundEnergy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrConfig {
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    /// Diagonal regularizer added to F before solving.
    #[serde(default = "defaults::shift")]
    pub shift: f64,
    #[serde(default = "defaults::max_iterations")]
    pub max_iterations: usize,
    /// Relative energy error against the exact ground energy at which
    /// training stops (when the oracle is in reach).
    #[serde(default = "defaults::convergence_threshold")]
    pub convergence_threshold: f64,
    #[serde(default)]
    pub target: Target,
}

mod defaults {
    pub fn learning_rate() -> f64 {
        0.1
    }
    pub fn shift() -> f64 {
        0.01
    }
    pub fn max_iterations() -> usize {
        200
    }
    pub fn convergence_threshold() -> f64 {
        1e-3
    }
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            learning_rate: defaults::learning_rate(),
            shift: defaults::shift(),
            max_iterations: defaults::max_iterations(),
            convergence_threshold: defaults::convergence_threshold(),
            target: Target::GroundEnergy,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(NqsError::InvalidSpec("learning rate must be positive".into()));
        }
        if !(self.shift >= 0.0) {
            return Err(NqsError::InvalidSpec("shift must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Oracle-free convergence: energy variance per spin below this for
/// [`VARIANCE_PLATEAU_RUN`] consecutive iterations.
pub const VARIANCE_PLATEAU: f64 = 1e-3;
pub const VARIANCE_PLATEAU_RUN: usize = 10;

/// One training iteration's record.
#[derive(Debug, Clone)]
pub struct TrainingRecord {
    pub iteration: usize,
    /// Sampled energy estimate.
    pub energy: f64,
    /// Sampled variance of the local energy.
    pub variance: f64,
    /// |E(X) - lambda_0| / |lambda_0| against the dense oracle, from the
    /// exact Rayleigh quotient of the snapshot; `None` beyond oracle reach.
    pub rel_error: Option<f64>,
    /// Largest eigenvalue of the sampled F matrix.
    pub fisher_max_eig: f64,
    pub acceptance_rate: f64,
    pub wall_ms: f64,
    /// Parameter snapshot at the start of the iteration.
    pub params: RbmParams,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub records: Vec<TrainingRecord>,
    /// Exact ground energy when the oracle is in reach.
    pub oracle_energy: Option<f64>,
    pub converged: bool,
    pub best_iteration: Option<usize>,
}

impl TrainingHistory {
    pub fn best_record(&self) -> Option<&TrainingRecord> {
        self.best_iteration.map(|i| &self.records[i])
    }
}

/// Local energy `E_loc(v) = <v|H|psi> / psi(v)`: the diagonal element
/// plus every connected off-diagonal element weighted by the amplitude
/// ratio `psi(v')/psi(v)`.
pub fn local_energy(x: &RbmParams, v: &SpinConfig, driver: &Driver) -> Result<f64> {
    if v.len() != driver.n() || x.n() != driver.n() {
        return Err(NqsError::DimensionMismatch {
            what: "visible register",
            expected: driver.n(),
            got: v.len(),
        });
    }
    let cache = ThetaCache::new(x, v);
    Ok(local_energy_cached(x, v, cache.theta(), driver))
}

/// Same with the hidden fields already at hand. O(N p).
pub fn local_energy_cached(x: &RbmParams, v: &SpinConfig, theta: &[f64], driver: &Driver) -> f64 {
    let cache = ThetaCacheView { theta };
    let mut e = 0.0;
    driver.for_each_connected(v, |conn, amp| match conn {
        Connection::Diagonal => e += amp,
        Connection::Flip(site) => {
            e += amp * cache.ratio(x, v, site).exp();
        }
        Connection::DoubleFlip(i, j) => {
            e += amp * cache.ratio_pair(x, v, i, j).exp();
        }
    });
    e
}

/// Borrowed theta view so local energy can reuse a batch's cached fields
/// without rebuilding a ThetaCache.
struct ThetaCacheView<'a> {
    theta: &'a [f64],
}

impl ThetaCacheView<'_> {
    fn ratio(&self, x: &RbmParams, v: &SpinConfig, site: usize) -> f64 {
        let vk = v.spin(site);
        let mut r = 2.0 * x.a()[site] * vk;
        for (j, &t) in self.theta.iter().enumerate() {
            r += crate::rbm::ln_2cosh(t - 2.0 * x.w()[(site, j)] * vk)
                - crate::rbm::ln_2cosh(t);
        }
        r
    }

    fn ratio_pair(&self, x: &RbmParams, v: &SpinConfig, si: usize, sj: usize) -> f64 {
        let vi = v.spin(si);
        let vj = v.spin(sj);
        let mut r = 2.0 * x.a()[si] * vi + 2.0 * x.a()[sj] * vj;
        for (j, &t) in self.theta.iter().enumerate() {
            let shifted = t - 2.0 * x.w()[(si, j)] * vi - 2.0 * x.w()[(sj, j)] * vj;
            r += crate::rbm::ln_2cosh(shifted) - crate::rbm::ln_2cosh(t);
        }
        r
    }
}

/// Local energy for an arbitrary log-amplitude function; used by the
/// zero-variance checks with exact eigenstate lookups.
pub fn local_energy_generic(
    driver: &Driver,
    v: &SpinConfig,
    log_amplitude: impl Fn(&SpinConfig) -> f64,
) -> Result<f64> {
    let base = log_amplitude(v);
    let mut e = 0.0;
    for el in driver.connected_elements(v)? {
        if el.config == *v {
            e += el.amplitude;
        } else {
            e += el.amplitude * (log_amplitude(&el.config) - base).exp();
        }
    }
    Ok(e)
}

/// Covariance estimates of F and S over a uniform-weight batch.
pub fn estimate_f_s(
    batch: &SampleBatch,
    x: &RbmParams,
    driver: &Driver,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if batch.is_empty() {
        return Err(NqsError::EmptyBatch);
    }
    let energies: Vec<f64> = batch
        .configs
        .iter()
        .zip(batch.thetas.iter())
        .map(|(v, theta)| local_energy_cached(x, v, theta, driver))
        .collect();
    let weights = vec![1.0; batch.len()];
    estimate_f_s_weighted(&batch.configs, &batch.thetas, &weights, &energies, x)
}

/// Shared weighted implementation; weights need not be normalized.
/// Exposed so exact-enumeration references can use the same accumulation.
pub fn estimate_f_s_weighted(
    configs: &[SpinConfig],
    thetas: &[Vec<f64>],
    weights: &[f64],
    energies: &[f64],
    x: &RbmParams,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if configs.is_empty() {
        return Err(NqsError::EmptyBatch);
    }
    let d = x.dim();
    let total: f64 = weights.iter().sum();
    let mut mean_d = DVector::<f64>::zeros(d);
    let mut mean_ed = DVector::<f64>::zeros(d);
    let mut mean_e = 0.0;
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut dvec = DVector::<f64>::zeros(d);
    for ((v, theta), (&w, &e)) in
        configs.iter().zip(thetas.iter()).zip(weights.iter().zip(energies.iter()))
    {
        log_derivatives_into(x, v, theta, dvec.as_mut_slice());
        let wn = w / total;
        mean_d.axpy(wn, &dvec, 1.0);
        mean_ed.axpy(wn * e, &dvec, 1.0);
        mean_e += wn * e;
        second.ger(wn, &dvec, &dvec, 1.0);
    }
    let mut f = second;
    f.ger(-1.0, &mean_d, &mean_d, 1.0);
    // Symmetrize explicitly; the accumulation is symmetric up to rounding.
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (f[(i, j)] + f[(j, i)]);
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    let s = mean_ed - mean_d * mean_e;
    Ok((f, s))
}

/// One SR parameter update: solve `(F + shift I) delta = S` and step
/// `X - l delta`. Falls back to an SVD least-squares solve if the
/// regularized matrix is not positive definite.
pub fn sr_update(
    x: &RbmParams,
    f: &DMatrix<f64>,
    s: &DVector<f64>,
    cfg: &SrConfig,
) -> Result<RbmParams> {
    cfg.validate()?;
    if f.nrows() != x.dim() || f.ncols() != x.dim() || s.len() != x.dim() {
        return Err(NqsError::DimensionMismatch {
            what: "F matrix / force vector",
            expected: x.dim(),
            got: f.nrows().max(s.len()),
        });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(NqsError::NonFinite("F matrix"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(NqsError::NonFinite("force vector"));
    }
    let mut reg = f.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += cfg.shift;
    }
    let delta = match reg.clone().cholesky() {
        Some(chol) => chol.solve(s),
        None => reg
            .svd(true, true)
            .solve(s, 1e-12)
            .map_err(|_| NqsError::NonFinite("SR solve"))?,
    };
    x.stepped(&delta, cfg.learning_rate)
}

/// Exact Rayleigh quotient `<psi|H|psi> / <psi|psi>` by enumeration of
/// the visible register.
pub fn exact_energy(x: &RbmParams, driver: &Driver) -> Result<f64> {
    let n = x.n();
    if n > ENUMERATION_CAP {
        return Err(NqsError::SizeCap {
            quantity: "exact Rayleigh quotient spin count",
            cap: ENUMERATION_CAP,
            got: n,
        });
    }
    let dim = 1usize << n;
    let mut max_lp = f64::NEG_INFINITY;
    let mut lps = Vec::with_capacity(dim);
    for idx in 0..dim {
        let v = SpinConfig::from_index(idx, n);
        let lp = log_psi(x, &v);
        max_lp = max_lp.max(lp);
        lps.push(lp);
    }
    let mut z = 0.0;
    let mut e = 0.0;
    for idx in 0..dim {
        let v = SpinConfig::from_index(idx, n);
        let w = (2.0 * (lps[idx] - max_lp)).exp();
        let cache = ThetaCache::new(x, &v);
        z += w;
        e += w * local_energy_cached(x, &v, cache.theta(), driver);
    }
    Ok(e / z)
}

/// Result of a power-iteration eigenvalue estimate.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 100_000;

/// Largest eigenvalue of a symmetric matrix by power iteration with a
/// deterministic start vector. On non-convergence the last estimate is
/// reported with `converged == false`.
pub fn fisher_largest_eig(f: &DMatrix<f64>) -> PowerIteration {
    use rand::{Rng, SeedableRng};
    let n = f.nrows();
    assert_eq!(n, f.ncols(), "matrix must be square");
    if n == 0 {
        return PowerIteration { value: 0.0, converged: true, iterations: 0 };
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x00f1_5e1e);
    let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() + 0.5);
    v /= v.norm();
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let mut y = f * &v;
        lambda = v.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return PowerIteration { value: 0.0, converged: true, iterations: it };
        }
        y /= norm;
        let residual = (f * &y - &y * lambda).norm();
        v = y;
        if residual <= POWER_TOL * lambda.abs().max(f64::MIN_POSITIVE) {
            return PowerIteration { value: lambda, converged: true, iterations: it };
        }
    }
    PowerIteration { value: lambda, converged: false, iterations: POWER_MAX_ITER }
}

/// Train the learner on a driver's ground state.
///
/// Stops when the relative energy error against the dense oracle crosses
/// the threshold (for sizes the oracle reaches), or when the energy
/// variance per spin plateaus below [`VARIANCE_PLATEAU`], or at the
/// iteration cap. Returns the best-energy snapshot, not the last iterate.
pub fn train(
    spec: &DriverSpec,
    hidden_units: usize,
    sr: &SrConfig,
    sampler: &SamplerConfig,
    init_seed: u64,
) -> Result<(RbmParams, TrainingHistory)> {
    sr.validate()?;
    let driver = Driver::new(spec.clone())?;
    let n = spec.n;
    let mut x = RbmParams::random(n, hidden_units, init_seed);
    let mut history = TrainingHistory::default();

    if sr.max_iterations == 0 {
        return Ok((x, history));
    }

    let oracle = if n <= DENSE_CAP { Some(ground_state(spec)?.energy) } else { None };
    history.oracle_energy = oracle;

    let seed_base = derive_seed(sampler.seed, init_seed);
    let mut pool = sampler
        .persistent_chains
        .then(|| ChainPool::new(&x, &sampler.clone().with_seed(seed_base)));
    let mut best: Option<(f64, usize)> = None;
    let mut plateau_run = 0usize;

    for iteration in 0..sr.max_iterations {
        let started = Instant::now();
        let batch = match pool.as_mut() {
            Some(pool) => pool.draw(&x, sampler),
            None => {
                let iter_cfg =
                    sampler.clone().with_seed(derive_seed(seed_base, iteration as u64));
                sample(&x, &iter_cfg)
            }
        };
        if batch.is_empty() {
            return Err(NqsError::EmptyBatch);
        }
        let energies: Vec<f64> = batch
            .configs
            .iter()
            .zip(batch.thetas.iter())
            .map(|(v, theta)| local_energy_cached(&x, v, theta, &driver))
            .collect();
        let m = energies.len() as f64;
        let energy = energies.iter().sum::<f64>() / m;
        if !energy.is_finite() {
            return Err(NqsError::Diverged { iteration });
        }
        let variance = energies.iter().map(|e| (e - energy).powi(2)).sum::<f64>() / m;

        let weights = vec![1.0; batch.len()];
        let (f, s) =
            estimate_f_s_weighted(&batch.configs, &batch.thetas, &weights, &energies, &x)?;
        let fisher = fisher_largest_eig(&f).value;

        // Convergence metric: exact Rayleigh quotient against the oracle
        // where it exists, the sampled-variance plateau otherwise.
        let (rel_error, score) = match oracle {
            Some(lambda0) => {
                let e_exact = exact_energy(&x, &driver)?;
                let rel = (e_exact - lambda0).abs() / lambda0.abs();
                (Some(rel), e_exact)
            }
            None => (None, energy),
        };

        history.records.push(TrainingRecord {
            iteration,
            energy,
            variance,
            rel_error,
            fisher_max_eig: fisher,
            acceptance_rate: batch.mean_acceptance,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            params: x.clone(),
        });
        if best.map_or(true, |(b, _)| score < b) {
            best = Some((score, iteration));
        }

        let converged = match rel_error {
            Some(rel) => rel <= sr.convergence_threshold,
            None => {
                if variance / (n as f64) < VARIANCE_PLATEAU {
                    plateau_run += 1;
                } else {
                    plateau_run = 0;
                }
                plateau_run >= VARIANCE_PLATEAU_RUN
            }
        };
        if converged {
            history.converged = true;
            break;
        }
        x = sr_update(&x, &f, &s, sr)?;
    }

    let best_iter = best.map(|(_, i)| i);
    history.best_iteration = best_iter;
    let x_star = best_iter.map(|i| history.records[i].params.clone()).unwrap_or(x);
    Ok((x_star, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::DriverKind;

    fn tfim_driver(n: usize, g: f64) -> Driver {
        Driver::new(DriverSpec::tfim(n, g)).unwrap()
    }

    #[test]
    fn classical_energy_is_x_independent_without_field() {
        let driver = tfim_driver(4, 0.0);
        for seed in 0..3 {
            let x = RbmParams::random_with_std(4, 4, 0.8, seed);
            let v = SpinConfig::all_up(4);
            let e = local_energy(&x, &v, &driver).unwrap();
            assert!((e + 3.0).abs() < 1e-12);
            let v2 = SpinConfig::from_index(0b0101, 4);
            // Classical energy of an alternating configuration: +3.
            assert!((local_energy(&x, &v2, &driver).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_eigenstate_has_zero_variance_local_energy() {
        let spec = DriverSpec::tfim(4, 1.0);
        let driver = Driver::new(spec.clone()).unwrap();
        let gs = ground_state(&spec).unwrap();
        let log_amp = |v: &SpinConfig| gs.amplitudes[v.index()].abs().ln();
        let mut es = Vec::new();
        for idx in 0..16 {
            let v = SpinConfig::from_index(idx, 4);
            es.push(local_energy_generic(&driver, &v, log_amp).unwrap());
        }
        let mean = es.iter().sum::<f64>() / es.len() as f64;
        let var = es.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / es.len() as f64;
        assert!((mean - gs.energy).abs() < 1e-10);
        assert!(var <= 1e-20, "variance {var}");
    }

    #[test]
    fn identical_configs_give_zero_covariances() {
        let x = RbmParams::random_with_std(3, 3, 0.4, 2);
        let driver = tfim_driver(3, 0.5);
        let v = SpinConfig::from_index(5, 3);
        let cache = ThetaCache::new(&x, &v);
        let batch = SampleBatch {
            configs: vec![v; 10],
            thetas: vec![cache.theta().to_vec(); 10],
            mean_acceptance: 1.0,
            per_chain_acceptance: vec![],
        };
        let (f, s) = estimate_f_s(&batch, &x, &driver).unwrap();
        assert!(f.iter().all(|&v| v.abs() < 1e-14));
        assert!(s.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn estimated_f_is_exactly_symmetric() {
        let x = RbmParams::random_with_std(3, 3, 0.5, 3);
        let driver = tfim_driver(3, 0.8);
        let cfg = SamplerConfig {
            n_chains: 32,
            n_sweeps_per_sample: 3,
            burn_in_sweeps: Some(5),
            samples_per_chain: 2,
            seed: 5,
        };
        let batch = sample(&x, &cfg);
        let (f, _) = estimate_f_s(&batch, &x, &driver).unwrap();
        assert_eq!(f, f.transpose());
    }

    #[test]
    fn f_matches_centered_gram_reference() {
        // Exact enumeration weights; reference built from first principles
        // as the weighted Gram matrix of centered derivative vectors.
        let n = 3;
        let p = 2;
        let x = RbmParams::random_with_std(n, p, 0.6, 4);
        let driver = tfim_driver(n, 0.7);
        let dim = 1usize << n;
        let mut configs = Vec::new();
        let mut thetas = Vec::new();
        let mut weights = Vec::new();
        let mut energies = Vec::new();
        for idx in 0..dim {
            let v = SpinConfig::from_index(idx, n);
            let cache = ThetaCache::new(&x, &v);
            weights.push((2.0 * log_psi(&x, &v)).exp());
            energies.push(local_energy_cached(&x, &v, cache.theta(), &driver));
            thetas.push(cache.theta().to_vec());
            configs.push(v);
        }
        let (f, s) = estimate_f_s_weighted(&configs, &thetas, &weights, &energies, &x).unwrap();

        let d = x.dim();
        let total: f64 = weights.iter().sum();
        let mut mean = DVector::<f64>::zeros(d);
        for (v, (theta, &w)) in configs.iter().zip(thetas.iter().zip(weights.iter())) {
            mean += crate::rbm::log_derivatives(&x, v, theta) * (w / total);
        }
        let mut f_ref = DMatrix::<f64>::zeros(d, d);
        let mut s_ref = DVector::<f64>::zeros(d);
        let mean_e: f64 = energies
            .iter()
            .zip(weights.iter())
            .map(|(&e, &w)| e * w / total)
            .sum();
        for ((v, theta), (&w, &e)) in
            configs.iter().zip(thetas.iter()).zip(weights.iter().zip(energies.iter()))
        {
            let centered = crate::rbm::log_derivatives(&x, v, theta) - &mean;
            f_ref.ger(w / total, &centered, &centered, 1.0);
            s_ref += &centered * ((e - mean_e) * w / total);
        }
        assert!((f - &f_ref).norm() < 1e-12);
        assert!((s - &s_ref).norm() < 1e-12);
    }

    #[test]
    fn sr_update_keeps_stationary_points_fixed() {
        let x = RbmParams::random_with_std(3, 3, 0.3, 6);
        let d = x.dim();
        let f = DMatrix::identity(d, d);
        let s = DVector::zeros(d);
        let x2 = sr_update(&x, &f, &s, &SrConfig::default()).unwrap();
        assert_eq!(x2.flatten(), x.flatten());
    }

    #[test]
    fn pure_regularizer_rescales_force() {
        let x = RbmParams::zeros(2, 2);
        let d = x.dim();
        let f = DMatrix::zeros(d, d);
        let s = DVector::from_element(d, 0.02);
        let cfg = SrConfig { learning_rate: 1.0, ..Default::default() };
        let x2 = sr_update(&x, &f, &s, &cfg).unwrap();
        // delta = S / shift = 2.0 each.
        for &v in x2.flatten().iter() {
            assert!((v + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_system_matches_hand_solution() {
        // (F + 0*I) delta = S with F = [[2,1,0],[1,3,1],[0,1,4]],
        // S = (1,2,3): delta = (1/3, 1/3, 2/3) by Cramer's rule.
        let x = RbmParams::new(vec![0.0], vec![0.0], DMatrix::zeros(1, 1)).unwrap();
        let f = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let cfg = SrConfig { learning_rate: 1.0, shift: 0.0, ..Default::default() };
        let x2 = sr_update(&x, &f, &s, &cfg).unwrap();
        let expect = [-1.0 / 3.0, -1.0 / 3.0, -2.0 / 3.0];
        for (got, want) in x2.flatten().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let x = RbmParams::zeros(1, 1);
        let mut f = DMatrix::zeros(3, 3);
        f[(0, 0)] = f64::NAN;
        let s = DVector::zeros(3);
        assert!(matches!(
            sr_update(&x, &f, &s, &SrConfig::default()),
            Err(NqsError::NonFinite(_))
        ));
    }

    #[test]
    fn power_iteration_on_small_diagonals() {
        let f = DMatrix::identity(5, 5);
        let r = fisher_largest_eig(&f);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-8);
        let f = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 7.0]));
        let r = fisher_largest_eig(&f);
        assert!((r.value - 7.0).abs() < 1e-7);
    }

    #[test]
    fn power_iteration_matches_dense_eigensolve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let a = DMatrix::from_fn(50, 50, |_, _| rng.random::<f64>() - 0.5);
            let f = &a * a.transpose();
            let r = fisher_largest_eig(&f);
            let dense = f
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(r.converged);
            assert!((r.value - dense).abs() / dense.abs() < 1e-6);
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let spec = DriverSpec::tfim(3, 1.0);
        let sr = SrConfig { max_iterations: 0, ..Default::default() };
        let (x, history) = train(&spec, 3, &sr, &SamplerConfig::default(), 11).unwrap();
        assert!(history.records.is_empty());
        assert_eq!(x.flatten(), RbmParams::random(3, 3, 11).flatten());
    }

    #[test]
    fn training_is_replayable() {
        let spec = DriverSpec::tfim(3, 1.0);
        let sr = SrConfig { max_iterations: 5, ..Default::default() };
        let sampler = SamplerConfig {
            n_chains: 32,
            n_sweeps_per_sample: 5,
            burn_in_sweeps: Some(10),
            samples_per_chain: 1,
            seed: 3,
        };
        let (xa, ha) = train(&spec, 3, &sr, &sampler, 21).unwrap();
        let (xb, hb) = train(&spec, 3, &sr, &sampler, 21).unwrap();
        assert_eq!(xa.flatten(), xb.flatten());
        let ea: Vec<f64> = ha.records.iter().map(|r| r.energy).collect();
        let eb: Vec<f64> = hb.records.iter().map(|r| r.energy).collect();
        assert_eq!(ea, eb);
    }

    #[test]
    fn small_chain_trains_to_oracle_accuracy() {
        let spec = DriverSpec::tfim(3, 1.0);
        let sr = SrConfig::default();
        let sampler = SamplerConfig {
            n_chains: 200,
            n_sweeps_per_sample: 10,
            burn_in_sweeps: Some(30),
            samples_per_chain: 1,
            seed: 17,
        };
        let (x_star, history) = train(&spec, 3, &sr, &sampler, 5).unwrap();
        assert!(history.converged, "training did not converge");
        let driver = Driver::new(spec.clone()).unwrap();
        let lambda0 = history.oracle_energy.unwrap();
        let e = exact_energy(&x_star, &driver).unwrap();
        assert!((e - lambda0).abs() / lambda0.abs() <= 1e-3);
        assert_eq!(driver.spec().kind, DriverKind::Tfim);
    }

    #[test]
    fn variational_energy_never_beats_oracle() {
        let spec = DriverSpec::tfim(4, 0.9);
        let driver = Driver::new(spec.clone()).unwrap();
        let lambda0 = ground_state(&spec).unwrap().energy;
        for seed in 0..5 {
            let x = RbmParams::random_with_std(4, 4, 0.5, 100 + seed);
            assert!(exact_energy(&x, &driver).unwrap() >= lambda0 - 1e-10);
        }
    }
}

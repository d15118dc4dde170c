//! The learner's variational wavefunction.
//!
//! Parameters X = (a, b, W) define an unnormalized amplitude over visible
//! configurations,
//!
//! ```text
//! psi(v, X) = exp(-sum_i a_i v_i) * prod_j 2 cosh(b_j + sum_i W_ij v_i)
//! ```
//!
//! (the hidden register is summed out analytically). Everything downstream
//! works with `ln psi`, which drops the constant normalization.

use crate::error::{NqsError, Result};
use crate::spin::SpinConfig;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::cell::Cell;
use std::path::Path;

/// Standard deviation of the random initialization.
pub const INIT_STD: f64 = 0.01;

/// Parameter vector X = (a, b, W) of the learner network.
///
/// Flattened layout is `a` (length n), then `b` (length p), then `W` in
/// row-major order (`W[i][j]` at position `n + p + i*p + j`), giving a
/// total dimension of `n + p + n*p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    a: Vec<f64>,
    b: Vec<f64>,
    w: DMatrix<f64>,
}

impl RbmParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>, w: DMatrix<f64>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(NqsError::InvalidSpec("both registers need at least one neuron".into()));
        }
        if w.nrows() != a.len() || w.ncols() != b.len() {
            return Err(NqsError::DimensionMismatch {
                what: "weight matrix",
                expected: a.len() * b.len(),
                got: w.nrows() * w.ncols(),
            });
        }
        let params = Self { a, b, w };
        if !params.is_finite() {
            return Err(NqsError::NonFinite("network parameters"));
        }
        Ok(params)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { a: vec![0.0; n], b: vec![0.0; p], w: DMatrix::zeros(n, p) }
    }

    /// I.i.d. normal entries with mean 0 and standard deviation
    /// [`INIT_STD`], the initialization used for training.
    pub fn random(n: usize, p: usize, seed: u64) -> Self {
        Self::random_with_std(n, p, INIT_STD, seed)
    }

    pub fn random_with_std(n: usize, p: usize, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let a = (0..n).map(|_| draw()).collect();
        let b = (0..p).map(|_| draw()).collect();
        let w = DMatrix::from_fn(n, p, |_, _| draw());
        Self { a, b, w }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    /// Total parameter count n + p + n*p.
    pub fn dim(&self) -> usize {
        self.n() + self.p() + self.n() * self.p()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
            && self.b.iter().all(|x| x.is_finite())
            && self.w.iter().all(|x| x.is_finite())
    }

    /// Whether visible neuron `k` is disconnected from the hidden register.
    pub fn visible_isolated(&self, k: usize) -> bool {
        (0..self.p()).all(|j| self.w[(k, j)] == 0.0)
    }

    /// Whether hidden neuron `m` is disconnected from the visible register.
    pub fn hidden_isolated(&self, m: usize) -> bool {
        (0..self.n()).all(|i| self.w[(i, m)] == 0.0)
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.b);
        for i in 0..self.n() {
            for j in 0..self.p() {
                out.push(self.w[(i, j)]);
            }
        }
        DVector::from_vec(out)
    }

    pub fn from_flat(n: usize, p: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n + p + n * p {
            return Err(NqsError::DimensionMismatch {
                what: "flattened parameter vector",
                expected: n + p + n * p,
                got: flat.len(),
            });
        }
        let a = flat[..n].to_vec();
        let b = flat[n..n + p].to_vec();
        let w = DMatrix::from_fn(n, p, |i, j| flat[n + p + i * p + j]);
        Self::new(a, b, w)
    }

    /// X - lr * delta over the flattened layout.
    pub fn stepped(&self, delta: &DVector<f64>, lr: f64) -> Result<Self> {
        let flat = self.flatten() - delta * lr;
        Self::from_flat(self.n(), self.p(), flat.as_slice())
    }

    /// Checkpoint text: `n,p` header then one parameter per line in
    /// flattened order. Uses the shortest round-trip float representation,
    /// so read-back is bit-exact.
    pub fn to_checkpoint_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{},{}\n", self.n(), self.p()));
        for x in self.flatten().iter() {
            s.push_str(&format!("{x}\n"));
        }
        s
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| NqsError::Parse("empty checkpoint".into()))?;
        let (ns, ps) = header
            .split_once(',')
            .ok_or_else(|| NqsError::Parse("checkpoint header must be `n,p`".into()))?;
        let n: usize = ns.trim().parse().map_err(|e| NqsError::Parse(format!("{e}")))?;
        let p: usize = ps.trim().parse().map_err(|e| NqsError::Parse(format!("{e}")))?;
        let flat: Result<Vec<f64>> = lines
            .map(|l| l.trim().parse::<f64>().map_err(|e| NqsError::Parse(format!("{e}"))))
            .collect();
        Self::from_flat(n, p, &flat?)
    }

    pub fn write_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string())?;
        Ok(())
    }

    pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint_str(&text)
    }
}

/// ln(2 cosh x), stable for large |x|.
#[inline]
pub fn ln_2cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p()
}

/// Effective hidden fields theta_j = b_j + sum_i W_ij v_i, maintained
/// incrementally in O(p) per spin flip.
#[derive(Debug, Clone)]
pub struct ThetaCache {
    theta: Vec<f64>,
    verify_tick: Cell<u32>,
}

/// How often the debug build cross-checks the cache by full recompute.
const VERIFY_PERIOD: u32 = 257;

impl ThetaCache {
    pub fn new(x: &RbmParams, v: &SpinConfig) -> Self {
        let mut cache = Self { theta: vec![0.0; x.p()], verify_tick: Cell::new(0) };
        cache.refresh(x, v);
        cache
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Recompute from scratch in O(n p).
    pub fn refresh(&mut self, x: &RbmParams, v: &SpinConfig) {
        for j in 0..x.p() {
            let mut t = x.b()[j];
            for i in 0..x.n() {
                t += x.w()[(i, j)] * v.spin(i);
            }
            self.theta[j] = t;
        }
    }

    /// Update after flipping `site`, where `old_spin` is the value the
    /// site had before the flip.
    pub fn apply_flip(&mut self, x: &RbmParams, site: usize, old_spin: f64) {
        for j in 0..x.p() {
            self.theta[j] -= 2.0 * x.w()[(site, j)] * old_spin;
        }
    }

    fn max_drift(&self, x: &RbmParams, v: &SpinConfig) -> f64 {
        let mut fresh = Self { theta: vec![0.0; x.p()], verify_tick: Cell::new(0) };
        fresh.refresh(x, v);
        self.theta
            .iter()
            .zip(fresh.theta.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[inline]
    fn debug_verify(&self, x: &RbmParams, v: &SpinConfig) {
        if cfg!(debug_assertions) {
            let tick = self.verify_tick.get().wrapping_add(1);
            self.verify_tick.set(tick);
            if tick % VERIFY_PERIOD == 0 {
                debug_assert!(
                    self.max_drift(x, v) < 1e-12,
                    "stale theta cache: drift {:e}",
                    self.max_drift(x, v)
                );
            }
        }
    }
}

/// ln psi(v, X) = -sum_i a_i v_i + sum_j ln 2cosh(theta_j).
pub fn log_psi(x: &RbmParams, v: &SpinConfig) -> f64 {
    debug_assert_eq!(v.len(), x.n());
    let mut visible = 0.0;
    for i in 0..x.n() {
        visible += x.a()[i] * v.spin(i);
    }
    let mut hidden = 0.0;
    for j in 0..x.p() {
        let mut t = x.b()[j];
        for i in 0..x.n() {
            t += x.w()[(i, j)] * v.spin(i);
        }
        hidden += ln_2cosh(t);
    }
    -visible + hidden
}

/// ln |psi(v') / psi(v)| for v' = v with `site` flipped, in O(p) from the
/// cached theta.
pub fn log_psi_ratio(x: &RbmParams, cache: &ThetaCache, v: &SpinConfig, site: usize) -> f64 {
    cache.debug_verify(x, v);
    let vk = v.spin(site);
    let mut r = 2.0 * x.a()[site] * vk;
    for (j, &t) in cache.theta().iter().enumerate() {
        r += ln_2cosh(t - 2.0 * x.w()[(site, j)] * vk) - ln_2cosh(t);
    }
    r
}

/// Same for a simultaneous flip of two distinct sites.
pub fn log_psi_ratio_pair(
    x: &RbmParams,
    cache: &ThetaCache,
    v: &SpinConfig,
    site_i: usize,
    site_j: usize,
) -> f64 {
    debug_assert_ne!(site_i, site_j);
    cache.debug_verify(x, v);
    let vi = v.spin(site_i);
    let vj = v.spin(site_j);
    let mut r = 2.0 * x.a()[site_i] * vi + 2.0 * x.a()[site_j] * vj;
    for (j, &t) in cache.theta().iter().enumerate() {
        let shifted = t - 2.0 * x.w()[(site_i, j)] * vi - 2.0 * x.w()[(site_j, j)] * vj;
        r += ln_2cosh(shifted) - ln_2cosh(t);
    }
    r
}

/// Logarithmic derivatives D_i = d ln psi / d X_i in flattened order:
/// D_a_i = -v_i, D_b_j = tanh(theta_j), D_W_ij = v_i tanh(theta_j).
pub fn log_derivatives(x: &RbmParams, v: &SpinConfig, theta: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(x.dim());
    log_derivatives_into(x, v, theta, out.as_mut_slice());
    out
}

pub fn log_derivatives_into(x: &RbmParams, v: &SpinConfig, theta: &[f64], out: &mut [f64]) {
    let n = x.n();
    let p = x.p();
    debug_assert_eq!(out.len(), x.dim());
    debug_assert_eq!(theta.len(), p);
    for i in 0..n {
        out[i] = -v.spin(i);
    }
    for j in 0..p {
        out[n + j] = theta[j].tanh();
    }
    for i in 0..n {
        let vi = v.spin(i);
        for j in 0..p {
            out[n + p + i * p + j] = vi * out[n + j];
        }
    }
}

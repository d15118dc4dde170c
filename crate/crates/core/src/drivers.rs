//! Driver Hamiltonians: the physical spin systems whose ground states the
//! learner is trained to represent.
//!
//! All drivers share the form
//!
//! ```text
//! H = -B sum_i sigma^x_i - sum_{i<j} Jzz_ij sigma^z_i sigma^z_j
//!                        - sum_{i<j} Jyy_ij sigma^y_i sigma^y_j
//! ```
//!
//! with the YY table nonzero only for the anisotropic YZ chain. Chains are
//! open (no wrap-around term between the last and first site).

use crate::error::{NqsError, Result};
use crate::spin::SpinConfig;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Largest spin count for which a dense `2^N x 2^N` matrix may be built.
pub const DENSE_CAP: usize = 14;

/// Driver families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    /// Transverse-field Ising chain, nearest-neighbor couplings.
    Tfim,
    /// Concentric-pairing variant: site N/2-(q-1) couples to N/2+q.
    #[serde(rename = "ctfim")]
    CTfim,
    /// Sherrington-Kirkpatrick: all-to-all couplings drawn from N(0, 1).
    Sk,
    /// Anisotropic chain with ZZ strength J0(1+gamma) and YY strength
    /// J0(1-gamma) on nearest neighbors.
    Yz,
}

/// Description of a driver Hamiltonian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriverSpec {
    pub kind: DriverKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Transverse field strength.
    #[serde(rename = "B")]
    pub b: f64,
    /// Coupling scale.
    #[serde(rename = "J0")]
    pub j0: f64,
    /// YZ anisotropy; required for [`DriverKind::Yz`], ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_yz: Option<f64>,
    /// Seed for the random couplings of [`DriverKind::Sk`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Explicit symmetric zero-diagonal ZZ coupling matrix, row per site.
    /// Overrides the built-in pattern when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<Vec<f64>>>,
}

impl DriverSpec {
    /// Nearest-neighbor chain with `J0 = 1` and `B = g`.
    pub fn tfim(n: usize, g: f64) -> Self {
        Self { kind: DriverKind::Tfim, n, b: g, j0: 1.0, gamma_yz: None, seed: None, couplings: None }
    }

    /// Concentric-pairing chain with `J0 = 1` and `B = g`.
    pub fn ctfim(n: usize, g: f64) -> Self {
        Self { kind: DriverKind::CTfim, n, b: g, j0: 1.0, gamma_yz: None, seed: None, couplings: None }
    }

    /// Sherrington-Kirkpatrick glass at fixed field `B = 1`.
    pub fn sk(n: usize, seed: u64) -> Self {
        Self { kind: DriverKind::Sk, n, b: 1.0, j0: 1.0, gamma_yz: None, seed: Some(seed), couplings: None }
    }

    /// Anisotropic YZ chain with `J0 = 1` and `B = g`.
    pub fn yz(n: usize, g: f64, gamma: f64) -> Self {
        Self {
            kind: DriverKind::Yz,
            n,
            b: g,
            j0: 1.0,
            gamma_yz: Some(gamma),
            seed: None,
            couplings: None,
        }
    }

    /// Replace the built-in coupling pattern with an explicit matrix.
    pub fn with_couplings(mut self, j: Vec<Vec<f64>>) -> Self {
        self.couplings = Some(j);
        self
    }

    /// Same driver at a different field-to-coupling ratio.
    pub fn at_g(mut self, g: f64) -> Self {
        self.b = g * self.j0;
        self
    }

    /// Same driver family at a different size.
    pub fn at_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Field-to-coupling ratio `B / J0`.
    pub fn g(&self) -> f64 {
        if self.j0 != 0.0 {
            self.b / self.j0
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(NqsError::InvalidSpec("driver needs at least one spin".into()));
        }
        if self.kind == DriverKind::CTfim && (self.n % 2 != 0 || self.n < 2) {
            return Err(NqsError::InvalidSpec(format!(
                "concentric pairing requires a positive even spin count, got N = {}",
                self.n
            )));
        }
        if self.kind == DriverKind::Yz && self.gamma_yz.is_none() {
            return Err(NqsError::InvalidSpec("YZ driver needs the anisotropy gamma_yz".into()));
        }
        if !(self.b.is_finite() && self.j0.is_finite()) {
            return Err(NqsError::InvalidSpec("B and J0 must be finite".into()));
        }
        if let Some(j) = &self.couplings {
            check_coupling_matrix(j, self.n)?;
        }
        Ok(())
    }
}

fn check_coupling_matrix(j: &[Vec<f64>], n: usize) -> Result<()> {
    if j.len() != n || j.iter().any(|row| row.len() != n) {
        return Err(NqsError::InvalidSpec(format!("coupling matrix must be {n}x{n}")));
    }
    for (i, row) in j.iter().enumerate() {
        if row[i] != 0.0 {
            return Err(NqsError::InvalidSpec("coupling matrix must have a zero diagonal".into()));
        }
        for (jj, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(NqsError::NonFinite("coupling matrix"));
            }
            if (v - j[jj][i]).abs() > 1e-12 {
                return Err(NqsError::InvalidSpec("coupling matrix must be symmetric".into()));
            }
        }
    }
    Ok(())
}

/// Coupling tables of a driver. `yy` is identically zero except for the
/// YZ kind, whose ZZ and YY strengths differ.
#[derive(Debug, Clone)]
pub struct Couplings {
    pub zz: DMatrix<f64>,
    pub yy: DMatrix<f64>,
}

impl Couplings {
    /// Nonzero entries above the diagonal, in (i, j, strength) form.
    pub fn zz_pairs(&self) -> Vec<(usize, usize, f64)> {
        upper_pairs(&self.zz)
    }

    pub fn yy_pairs(&self) -> Vec<(usize, usize, f64)> {
        upper_pairs(&self.yy)
    }
}

fn upper_pairs(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let n = m.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != 0.0 {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

/// Build the coupling tables for a spec.
///
/// TFIM places `J0` on nearest-neighbor pairs of an open chain; the
/// concentric variant pairs site `N/2-(q-1)` with `N/2+q` (1-based) for
/// `q = 1..N/2`; SK draws the strict upper triangle i.i.d. from N(0, 1)
/// with the spec's seed and symmetrizes; YZ places `J0(1+gamma)` in the
/// ZZ table and `J0(1-gamma)` in the YY table on nearest neighbors.
pub fn build_couplings(spec: &DriverSpec) -> Result<Couplings> {
    spec.validate()?;
    let n = spec.n;
    let mut zz = DMatrix::zeros(n, n);
    let mut yy = DMatrix::zeros(n, n);

    if let Some(j) = &spec.couplings {
        for i in 0..n {
            for k in 0..n {
                zz[(i, k)] = j[i][k];
            }
        }
        return Ok(Couplings { zz, yy });
    }

    match spec.kind {
        DriverKind::Tfim => {
            for i in 0..n.saturating_sub(1) {
                zz[(i, i + 1)] = spec.j0;
                zz[(i + 1, i)] = spec.j0;
            }
        }
        DriverKind::CTfim => {
            let half = n / 2;
            for q in 1..=half {
                // 1-based pair (N/2 - (q-1), N/2 + q).
                let i = half - q;
                let j = half + q - 1;
                zz[(i, j)] = spec.j0;
                zz[(j, i)] = spec.j0;
            }
        }
        DriverKind::Sk => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(0));
            for i in 0..n {
                for j in (i + 1)..n {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    zz[(i, j)] = v;
                    zz[(j, i)] = v;
                }
            }
        }
        DriverKind::Yz => {
            let gamma = spec.gamma_yz.unwrap_or(0.0);
            let jz = spec.j0 * (1.0 + gamma);
            let jy = spec.j0 * (1.0 - gamma);
            for i in 0..n.saturating_sub(1) {
                zz[(i, i + 1)] = jz;
                zz[(i + 1, i)] = jz;
                yy[(i, i + 1)] = jy;
                yy[(i + 1, i)] = jy;
            }
        }
    }
    Ok(Couplings { zz, yy })
}

/// Parse a coupling matrix from CSV text, one row per site.
pub fn parse_couplings_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| NqsError::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(NqsError::Parse("empty coupling CSV".into()));
    }
    check_coupling_matrix(&rows, rows.len())?;
    Ok(rows)
}

/// One off- or on-diagonal matrix element `<v'|H|v>` reachable from `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectedElement {
    pub config: SpinConfig,
    pub amplitude: f64,
}

/// How a connected element relates to the source configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    Diagonal,
    Flip(usize),
    DoubleFlip(usize, usize),
}

/// A driver with its coupling tables materialized, ready for repeated
/// local-energy and matrix-element evaluation.
#[derive(Debug, Clone)]
pub struct Driver {
    spec: DriverSpec,
    couplings: Couplings,
    zz_pairs: Vec<(usize, usize, f64)>,
    yy_pairs: Vec<(usize, usize, f64)>,
}

impl Driver {
    pub fn new(spec: DriverSpec) -> Result<Self> {
        let couplings = build_couplings(&spec)?;
        let zz_pairs = couplings.zz_pairs();
        let yy_pairs = couplings.yy_pairs();
        Ok(Self { spec, couplings, zz_pairs, yy_pairs })
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    /// Classical (diagonal) energy  -sum_{i<j} Jzz_ij v_i v_j.
    pub fn diag_energy(&self, v: &SpinConfig) -> f64 {
        let mut e = 0.0;
        for &(i, j, jij) in &self.zz_pairs {
            e -= jij * v.spin(i) * v.spin(j);
        }
        e
    }

    /// Visit every connected element of the row `v`: the diagonal entry,
    /// one single-flip entry `-B` per site, and for YZ one double-flip
    /// entry `Jyy_ij v_i v_j` per coupled pair.
    pub fn for_each_connected(&self, v: &SpinConfig, mut f: impl FnMut(Connection, f64)) {
        f(Connection::Diagonal, self.diag_energy(v));
        if self.spec.b != 0.0 {
            for site in 0..self.n() {
                f(Connection::Flip(site), -self.spec.b);
            }
        }
        // <flip_i flip_j v| sigma^y_i sigma^y_j |v> = -v_i v_j, and the
        // Hamiltonian carries -Jyy, so the element is +Jyy v_i v_j.
        for &(i, j, jy) in &self.yy_pairs {
            f(Connection::DoubleFlip(i, j), jy * v.spin(i) * v.spin(j));
        }
    }

    pub fn connected_elements(&self, v: &SpinConfig) -> Result<Vec<ConnectedElement>> {
        if v.len() != self.n() {
            return Err(NqsError::DimensionMismatch {
                what: "spin configuration",
                expected: self.n(),
                got: v.len(),
            });
        }
        let mut out = Vec::with_capacity(1 + self.n() + self.yy_pairs.len());
        self.for_each_connected(v, |conn, amp| {
            let config = match conn {
                Connection::Diagonal => *v,
                Connection::Flip(i) => v.flipped(i),
                Connection::DoubleFlip(i, j) => v.flipped(i).flipped(j),
            };
            out.push(ConnectedElement { config, amplitude: amp });
        });
        Ok(out)
    }

    /// Dense `2^N x 2^N` real symmetric matrix of the Hamiltonian.
    pub fn dense_hamiltonian(&self) -> Result<DMatrix<f64>> {
        if self.n() > DENSE_CAP {
            return Err(NqsError::SizeCap {
                quantity: "dense Hamiltonian spin count",
                cap: DENSE_CAP,
                got: self.n(),
            });
        }
        let dim = 1usize << self.n();
        let mut h = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            let v = SpinConfig::from_index(row, self.n());
            self.for_each_connected(&v, |conn, amp| {
                let col = match conn {
                    Connection::Diagonal => row,
                    Connection::Flip(i) => v.flipped(i).index(),
                    Connection::DoubleFlip(i, j) => v.flipped(i).flipped(j).index(),
                };
                h[(row, col)] += amp;
            });
        }
        Ok(h)
    }
}

/// Convenience wrapper over [`Driver::connected_elements`].
pub fn connected_elements(spec: &DriverSpec, v: &SpinConfig) -> Result<Vec<ConnectedElement>> {
    Driver::new(spec.clone())?.connected_elements(v)
}

/// Convenience wrapper over [`Driver::dense_hamiltonian`].
pub fn dense_hamiltonian(spec: &DriverSpec) -> Result<DMatrix<f64>> {
    Driver::new(spec.clone())?.dense_hamiltonian()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn tfim_couplings_are_open_chain() {
        let c = build_couplings(&DriverSpec::tfim(4, 1.0)).unwrap();
        assert_eq!(c.zz_pairs(), vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        assert!(c.yy_pairs().is_empty());
        // No wrap-around term.
        assert_eq!(c.zz[(0, 3)], 0.0);
    }

    #[test]
    fn ctfim_couplings_pair_concentrically() {
        let c = build_couplings(&DriverSpec::ctfim(4, 1.0)).unwrap();
        // 1-based pairs (2,3) and (1,4).
        assert_eq!(c.zz_pairs(), vec![(0, 3, 1.0), (1, 2, 1.0)]);
        let c6 = build_couplings(&DriverSpec::ctfim(6, 1.0)).unwrap();
        assert_eq!(c6.zz_pairs(), vec![(0, 5, 1.0), (1, 4, 1.0), (2, 3, 1.0)]);
    }

    #[test]
    fn zero_coupling_scale_gives_zero_matrix() {
        let mut spec = DriverSpec::tfim(2, 1.0);
        spec.j0 = 0.0;
        let c = build_couplings(&spec).unwrap();
        assert!(c.zz.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ctfim_rejects_odd_sizes() {
        assert!(build_couplings(&DriverSpec::ctfim(5, 1.0)).is_err());
        assert!(build_couplings(&DriverSpec::ctfim(0, 1.0)).is_err());
    }

    #[test]
    fn sk_couplings_are_reproducible_and_symmetric() {
        let a = build_couplings(&DriverSpec::sk(6, 42)).unwrap();
        let b = build_couplings(&DriverSpec::sk(6, 42)).unwrap();
        assert_eq!(a.zz, b.zz);
        let c = build_couplings(&DriverSpec::sk(6, 43)).unwrap();
        assert_ne!(a.zz, c.zz);
        for i in 0..6 {
            assert_eq!(a.zz[(i, i)], 0.0);
            for j in 0..6 {
                assert_eq!(a.zz[(i, j)], a.zz[(j, i)]);
            }
        }
    }

    #[test]
    fn connected_set_without_field_is_diagonal_only() {
        let drv = Driver::new(DriverSpec::tfim(2, 0.0)).unwrap();
        let v = SpinConfig::all_up(2);
        let els = drv.connected_elements(&v).unwrap();
        assert_eq!(els.len(), 1);
        assert_eq!(els[0].config, v);
        assert_eq!(els[0].amplitude, -1.0);
    }

    #[test]
    fn connected_set_with_field_adds_single_flips() {
        let drv = Driver::new(DriverSpec::tfim(2, 1.0)).unwrap();
        let v = SpinConfig::all_up(2);
        let els = drv.connected_elements(&v).unwrap();
        assert_eq!(els.len(), 3);
        assert_eq!(els[0].amplitude, -1.0);
        assert_eq!(els[1].config, v.flipped(0));
        assert_eq!(els[1].amplitude, -1.0);
        assert_eq!(els[2].config, v.flipped(1));
        assert_eq!(els[2].amplitude, -1.0);
    }

    #[test]
    fn yz_at_unit_anisotropy_reduces_to_tfim() {
        let yz = Driver::new(DriverSpec::yz(2, 1.0, 1.0)).unwrap();
        let mut tfim_spec = DriverSpec::tfim(2, 1.0);
        tfim_spec.j0 = 2.0; // J0(1+gamma) = 2
        let tf = Driver::new(tfim_spec).unwrap();
        for idx in 0..4 {
            let v = SpinConfig::from_index(idx, 2);
            assert_eq!(yz.connected_elements(&v).unwrap(), tf.connected_elements(&v).unwrap());
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let drv = Driver::new(DriverSpec::tfim(3, 1.0)).unwrap();
        assert!(drv.connected_elements(&SpinConfig::all_up(2)).is_err());
    }

    #[test]
    fn dense_single_site_is_minus_sigma_x() {
        let h = dense_hamiltonian(&DriverSpec::tfim(1, 1.0)).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn dense_is_symmetric() {
        for spec in [DriverSpec::tfim(4, 0.7), DriverSpec::sk(4, 7), DriverSpec::yz(4, 0.5, 0.3)] {
            let h = dense_hamiltonian(&spec).unwrap();
            assert_eq!(h, h.transpose());
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        match dense_hamiltonian(&DriverSpec::tfim(15, 1.0)) {
            Err(NqsError::SizeCap { .. }) => {}
            other => panic!("expected size-cap error, got {other:?}"),
        }
    }

    #[test]
    fn classical_ground_energy_of_open_chain() {
        let h = dense_hamiltonian(&DriverSpec::tfim(4, 0.0)).unwrap();
        let eig = h.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - (-3.0)).abs() < 1e-12);
    }

    /// Independent construction by Kronecker products of 2x2 Paulis.
    fn kron_hamiltonian(spec: &DriverSpec) -> DMatrix<f64> {
        let n = spec.n;
        let c = build_couplings(spec).unwrap();
        let one = |x: f64| Complex64::new(x, 0.0);
        let id = DMatrix::from_row_slice(2, 2, &[one(1.0), one(0.0), one(0.0), one(1.0)]);
        let sx = DMatrix::from_row_slice(2, 2, &[one(0.0), one(1.0), one(1.0), one(0.0)]);
        let sy = DMatrix::from_row_slice(
            2,
            2,
            &[one(0.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), one(0.0)],
        );
        let sz = DMatrix::from_row_slice(2, 2, &[one(1.0), one(0.0), one(0.0), one(-1.0)]);
        let op_at = |ops: &[(usize, &DMatrix<Complex64>)]| {
            let mut full = DMatrix::from_element(1, 1, one(1.0));
            for site in 0..n {
                let factor = ops
                    .iter()
                    .find(|(s, _)| *s == site)
                    .map(|(_, m)| (*m).clone())
                    .unwrap_or_else(|| id.clone());
                full = full.kronecker(&factor);
            }
            full
        };
        let dim = 1 << n;
        let mut h = DMatrix::from_element(dim, dim, one(0.0));
        for i in 0..n {
            h -= op_at(&[(i, &sx)]) * one(spec.b);
        }
        for (i, j, jz) in c.zz_pairs() {
            h -= op_at(&[(i, &sz), (j, &sz)]) * one(jz);
        }
        for (i, j, jy) in c.yy_pairs() {
            h -= op_at(&[(i, &sy), (j, &sy)]) * one(jy);
        }
        let mut out = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for cidx in 0..dim {
                assert!(h[(r, cidx)].im.abs() < 1e-15, "Hamiltonian must be real");
                out[(r, cidx)] = h[(r, cidx)].re;
            }
        }
        out
    }

    #[test]
    fn rows_match_kronecker_construction() {
        for spec in [
            DriverSpec::tfim(3, 0.8),
            DriverSpec::ctfim(4, 0.5),
            DriverSpec::sk(3, 11),
            DriverSpec::yz(4, 0.7, 0.4),
            DriverSpec::yz(2, 1.0, -0.5),
        ] {
            let dense = dense_hamiltonian(&spec).unwrap();
            let kron = kron_hamiltonian(&spec);
            assert_eq!(dense, kron, "mismatch for {:?}", spec.kind);
        }
    }

    #[test]
    fn explicit_couplings_round_trip_csv() {
        let text = "0,1.5,0\n1.5,0,-0.25\n0,-0.25,0\n";
        let j = parse_couplings_csv(text).unwrap();
        let spec = DriverSpec::tfim(3, 0.3).with_couplings(j);
        let c = build_couplings(&spec).unwrap();
        assert_eq!(c.zz[(0, 1)], 1.5);
        assert_eq!(c.zz[(1, 2)], -0.25);
        assert!(parse_couplings_csv("0,1\n2,0\n").is_err()); // asymmetric
        assert!(parse_couplings_csv("1,0\n0,1\n").is_err()); // nonzero diagonal
    }
}

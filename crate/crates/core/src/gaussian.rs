//! Numeric engine for finitely squeezed Gaussian pure states.
//!
//! A state is `(p − Z x)|φ⟩ = (mean_p − Z mean_x)|φ⟩` for a complex symmetric
//! graph matrix `Z = V + iU` with `U ≻ 0`. Gates update `Z` directly; homodyne
//! measurement goes through the covariance matrix. Modes carry labels so that
//! measured modes can be removed without renumbering the caller's indices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{
    cluster_graph, AdjacencyMatrix, LatticeSpec, Quadrature, SqueezingMap, StabilizerGen,
};
use crate::wh::QuadraticGate;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("mode {0} is not part of the state")]
    UnknownMode(usize),
    #[error("imaginary part of the graph matrix is not positive definite")]
    NotPositive,
    #[error("covariance block is singular")]
    Singular,
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("the numeric engine needs finite squeezing on mode {0}")]
    InfiniteSqueezing(usize),
    #[error("squeezing must be positive, got r = {0}")]
    BadSqueezing(f64),
    #[error("mode {0} already exists")]
    DuplicateMode(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGraphState {
    pub z: DMatrix<Complex64>,
    pub mean_x: DVector<f64>,
    pub mean_p: DVector<f64>,
    /// Log of the scalar in front of the normal-ordered displacement
    /// `Z(mean_p) X(mean_x)`. Gates do not touch it; measurements reset it.
    pub log_scalar: Complex64,
    /// External mode label of each row.
    pub labels: Vec<usize>,
}

/// Covariance and mean, ordered `(x_1..x_N, p_1..p_N)`, vacuum variance 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMoments {
    pub sigma: DMatrix<f64>,
    pub mean: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub mode: usize,
    pub basis: Quadrature,
    pub outcome: f64,
}

/// Where a homodyne outcome comes from.
pub enum Outcome<'a, R: Rng + ?Sized> {
    Sample(&'a mut R),
    Forced(f64),
}

impl GaussianGraphState {
    /// Empty state on zero modes.
    pub fn empty() -> Self {
        GaussianGraphState {
            z: DMatrix::zeros(0, 0),
            mean_x: DVector::zeros(0),
            mean_p: DVector::zeros(0),
            log_scalar: Complex64::new(0.0, 0.0),
            labels: Vec::new(),
        }
    }

    /// `Z = A + i diag(e^{-2r})` on modes labelled `0..N`.
    pub fn graph_from_cluster(a: &AdjacencyMatrix, r: &[f64]) -> Result<Self, EngineError> {
        let n = a.len();
        assert_eq!(r.len(), n, "one squeezing value per node");
        for &rk in r {
            if !rk.is_finite() {
                return Err(EngineError::NonFinite("squeezing"));
            }
            if rk < 0.0 {
                return Err(EngineError::BadSqueezing(rk));
            }
        }
        let z = DMatrix::from_fn(n, n, |i, j| {
            let re = a.matrix()[(i, j)];
            if i == j {
                Complex64::new(re, (-2.0 * r[i]).exp())
            } else {
                Complex64::new(re, 0.0)
            }
        });
        Ok(GaussianGraphState {
            z,
            mean_x: DVector::zeros(n),
            mean_p: DVector::zeros(n),
            log_scalar: Complex64::new(0.0, 0.0),
            labels: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, mode: usize) -> Result<usize, EngineError> {
        self.labels
            .iter()
            .position(|&l| l == mode)
            .ok_or(EngineError::UnknownMode(mode))
    }

    pub fn relabel(&mut self, from: usize, to: usize) -> Result<(), EngineError> {
        if from != to && self.labels.contains(&to) {
            return Err(EngineError::DuplicateMode(to));
        }
        let k = self.index_of(from)?;
        self.labels[k] = to;
        Ok(())
    }

    /// Tensors in a fresh mode with `Z_kk = z_kk` (for example `i e^{−2r}` for
    /// a momentum-squeezed ancilla).
    pub fn append_mode(&mut self, label: usize, z_kk: Complex64) -> Result<(), EngineError> {
        if self.labels.contains(&label) {
            return Err(EngineError::DuplicateMode(label));
        }
        if z_kk.im <= 0.0 || !z_kk.is_finite() {
            return Err(EngineError::NotPositive);
        }
        let n = self.len();
        let mut z = DMatrix::zeros(n + 1, n + 1);
        z.view_mut((0, 0), (n, n)).copy_from(&self.z);
        z[(n, n)] = z_kk;
        self.z = z;
        self.mean_x = self.mean_x.clone().insert_row(n, 0.0);
        self.mean_p = self.mean_p.clone().insert_row(n, 0.0);
        self.labels.push(label);
        Ok(())
    }

    pub fn mean(&self, mode: usize) -> Result<(f64, f64), EngineError> {
        let k = self.index_of(mode)?;
        Ok((self.mean_x[k], self.mean_p[k]))
    }

    /// Applies `X(s)` to the state: `mean_x += s`, and the scalar picks up
    /// `e^{-is mean_p}` from reordering.
    pub fn displace_x(&mut self, mode: usize, s: f64) -> Result<(), EngineError> {
        if !s.is_finite() {
            return Err(EngineError::NonFinite("displacement"));
        }
        let k = self.index_of(mode)?;
        self.log_scalar += -I * s * self.mean_p[k];
        self.mean_x[k] += s;
        Ok(())
    }

    pub fn displace_z(&mut self, mode: usize, t: f64) -> Result<(), EngineError> {
        if !t.is_finite() {
            return Err(EngineError::NonFinite("displacement"));
        }
        let k = self.index_of(mode)?;
        self.mean_p[k] += t;
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: QuadraticGate) -> Result<(), EngineError> {
        match gate {
            QuadraticGate::Squeeze { mode, eta } => {
                let k = self.index_of(mode)?;
                self.z[(k, k)] += eta;
                self.mean_p[k] += eta * self.mean_x[k];
            }
            QuadraticGate::ControlledZ { a, b } => {
                let (i, j) = (self.index_of(a)?, self.index_of(b)?);
                self.z[(i, j)] += 1.0;
                self.z[(j, i)] += 1.0;
                let (xi, xj) = (self.mean_x[i], self.mean_x[j]);
                self.mean_p[i] += xj;
                self.mean_p[j] += xi;
            }
            QuadraticGate::Fourier { mode } => {
                let k = self.index_of(mode)?;
                let zkk = self.z[(k, k)];
                if zkk.norm() < 1e-300 {
                    // Cannot happen for Im Z ≻ 0, kept as a guard.
                    let mut cov = self.to_covariance()?;
                    cov.rotate(k);
                    let labels = self.labels.clone();
                    *self = Self::from_covariance(&cov, labels)?;
                    return Ok(());
                }
                let n = self.len();
                let old = self.z.clone();
                for i in 0..n {
                    for l in 0..n {
                        self.z[(i, l)] = match (i == k, l == k) {
                            (true, true) => -1.0 / zkk,
                            (true, false) => -old[(k, l)] / zkk,
                            (false, true) => -old[(i, k)] / zkk,
                            (false, false) => old[(i, l)] - old[(i, k)] * old[(k, l)] / zkk,
                        };
                    }
                }
                let (x, p) = (self.mean_x[k], self.mean_p[k]);
                self.mean_x[k] = -p;
                self.mean_p[k] = x;
            }
        }
        Ok(())
    }

    pub fn to_covariance(&self) -> Result<CovarianceMoments, EngineError> {
        let n = self.len();
        let u = self.z.map(|c| c.im);
        let v = self.z.map(|c| c.re);
        let u_inv = u
            .clone()
            .cholesky()
            .ok_or(EngineError::NotPositive)?
            .inverse();
        let sxx = &u_inv * 0.5;
        let sxp = &u_inv * &v * 0.5;
        let spp = (&u + &v * &u_inv * &v) * 0.5;
        let mut sigma = DMatrix::zeros(2 * n, 2 * n);
        sigma.view_mut((0, 0), (n, n)).copy_from(&sxx);
        sigma.view_mut((0, n), (n, n)).copy_from(&sxp);
        sigma.view_mut((n, 0), (n, n)).copy_from(&sxp.transpose());
        sigma.view_mut((n, n), (n, n)).copy_from(&spp);
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let mut mean = DVector::zeros(2 * n);
        mean.rows_mut(0, n).copy_from(&self.mean_x);
        mean.rows_mut(n, n).copy_from(&self.mean_p);
        Ok(CovarianceMoments { sigma, mean })
    }

    /// Inverse of [`to_covariance`](Self::to_covariance) for pure states:
    /// `V = σ_xx⁻¹ σ_xp`, `U = σ_xx⁻¹ / 2`. The log scalar is zero.
    pub fn from_covariance(
        cov: &CovarianceMoments,
        labels: Vec<usize>,
    ) -> Result<Self, EngineError> {
        let n = cov.modes();
        assert_eq!(labels.len(), n);
        let sxx = cov.sigma.view((0, 0), (n, n)).into_owned();
        let sxp = cov.sigma.view((0, n), (n, n)).into_owned();
        let sxx_inv = sxx.cholesky().ok_or(EngineError::Singular)?.inverse();
        let v = &sxx_inv * &sxp;
        let v = (&v + v.transpose()) * 0.5;
        let u = &sxx_inv * 0.5;
        let z = DMatrix::from_fn(n, n, |i, j| Complex64::new(v[(i, j)], u[(i, j)]));
        Ok(GaussianGraphState {
            z,
            mean_x: cov.mean.rows(0, n).into_owned(),
            mean_p: cov.mean.rows(n, n).into_owned(),
            log_scalar: Complex64::new(0.0, 0.0),
            labels,
        })
    }

    /// Homodyne measurement of `basis` on `mode`. The mode is removed and the
    /// remaining state is the Gaussian conditional. The log scalar is reset.
    ///
    /// Works on the graph matrix: a position outcome `m` just fixes `x_k = m`
    /// in the wavefunction, so `Z` loses row and column `k` and only the means
    /// move. A momentum measurement is a position measurement after `F†`.
    pub fn measure_homodyne<R: Rng + ?Sized>(
        &mut self,
        mode: usize,
        basis: Quadrature,
        outcome: Outcome<'_, R>,
    ) -> Result<MeasurementRecord, EngineError> {
        let k = self.index_of(mode)?;
        if basis == Quadrature::Momentum {
            self.inverse_fourier(k);
        }
        let mu = self.mean_x[k];
        let m = match outcome {
            Outcome::Forced(m) => {
                if !m.is_finite() {
                    return Err(EngineError::NonFinite("forced outcome"));
                }
                m
            }
            Outcome::Sample(rng) => {
                let u = self.z.map(|c| c.im);
                let chol = u.cholesky().ok_or(EngineError::NotPositive)?;
                let mut e = DVector::zeros(self.len());
                e[k] = 1.0;
                let var = chol.solve(&e)[k] / 2.0;
                Normal::new(mu, var.sqrt())
                    .map_err(|_| EngineError::NonFinite("variance"))?
                    .sample(rng)
            }
        };
        self.condition_position(k, m)?;
        Ok(MeasurementRecord {
            mode,
            basis,
            outcome: m,
        })
    }

    /// `F† = F · parity` on row `k`.
    fn inverse_fourier(&mut self, k: usize) {
        let label = self.labels[k];
        self.apply_gate(QuadraticGate::Fourier { mode: label })
            .expect("label present");
        for l in 0..self.len() {
            if l != k {
                self.z[(k, l)] = -self.z[(k, l)];
                self.z[(l, k)] = -self.z[(l, k)];
            }
        }
        self.mean_x[k] = -self.mean_x[k];
        self.mean_p[k] = -self.mean_p[k];
    }

    fn condition_position(&mut self, k: usize, m: f64) -> Result<(), EngineError> {
        let n = self.len();
        let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let r = keep.len();
        let delta = m - self.mean_x[k];
        let z = DMatrix::from_fn(r, r, |a, b| self.z[(keep[a], keep[b])]);
        let zrk = DVector::from_fn(r, |a, _| self.z[(keep[a], k)] * delta);
        let mut mean_x = DVector::from_fn(r, |a, _| self.mean_x[keep[a]]);
        let mut mean_p = DVector::from_fn(r, |a, _| self.mean_p[keep[a]]);
        if r > 0 {
            // (p − Z x) ψ = c ψ with the outcome folded into c.
            let u = z.map(|c| c.im);
            let v = z.map(|c| c.re);
            let shift = u
                .cholesky()
                .ok_or(EngineError::NotPositive)?
                .solve(&zrk.map(|c| c.im));
            mean_x -= &shift;
            mean_p += zrk.map(|c| c.re) - &v * &shift;
        }
        let mut labels = self.labels.clone();
        labels.remove(k);
        *self = GaussianGraphState {
            z,
            mean_x,
            mean_p,
            log_scalar: Complex64::new(0.0, 0.0),
            labels,
        };
        Ok(())
    }

    /// `(⟨g⟩, ⟨g²⟩ − ⟨g⟩²)` for a linear nullifier `g`, using the complex
    /// bilinear form `cᵀ σ c` (no conjugation), so exact complex annihilators
    /// have zero variance.
    pub fn nullifier_stats(
        &self,
        gen: &StabilizerGen,
    ) -> Result<(Complex64, Complex64), EngineError> {
        let n = self.len();
        let cov = self.to_covariance()?;
        let mut c = DVector::<Complex64>::zeros(2 * n);
        for (&mode, &(alpha, beta)) in &gen.coeffs {
            let k = self.index_of(mode)?;
            c[k] += alpha;
            c[n + k] += beta;
        }
        let mean = cov.mean.map(|v| Complex64::new(v, 0.0));
        let sigma = cov.sigma.map(|v| Complex64::new(v, 0.0));
        let expectation = gen.offset + c.dot(&mean);
        let variance = c.dot(&(&sigma * &c));
        Ok((expectation, variance))
    }

    /// `det(2σ)`; equals 1 for a pure state.
    pub fn purity_determinant(&self) -> Result<f64, EngineError> {
        self.to_covariance()?.purity_determinant()
    }

    /// Plain-text dump of labels, means and the graph matrix.
    pub fn snapshot_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("modes {}\n", self.len()));
        out.push_str(&format!(
            "log_scalar {}\n",
            crate::wh::fmt_complex(self.log_scalar)
        ));
        out.push_str("label,mean_x,mean_p\n");
        for (k, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("{l},{},{}\n", self.mean_x[k], self.mean_p[k]));
        }
        out.push_str("Z\n");
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|j| crate::wh::fmt_complex(self.z[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// `label,mean_x,mean_p,var_x,var_p` per mode.
    pub fn moments_csv(&self) -> Result<String, EngineError> {
        let cov = self.to_covariance()?;
        let n = self.len();
        let mut out = String::from("mode,mean_x,mean_p,var_x,var_p\n");
        for (k, l) in self.labels.iter().enumerate() {
            out.push_str(&format!(
                "{l},{},{},{},{}\n",
                self.mean_x[k],
                self.mean_p[k],
                cov.sigma[(k, k)],
                cov.sigma[(n + k, n + k)]
            ));
        }
        Ok(out)
    }
}

impl CovarianceMoments {
    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// `det(2σ)` as `det(2σ_xx) · det(2(σ_pp − σ_px σ_xx⁻¹ σ_xp))`, with both
    /// factors from Cholesky log-determinants. Strongly squeezed states make a
    /// plain LU determinant lose several digits.
    pub fn purity_determinant(&self) -> Result<f64, EngineError> {
        let n = self.modes();
        if n == 0 {
            return Ok(1.0);
        }
        let sxx = self.sigma.view((0, 0), (n, n)).into_owned();
        let sxp = self.sigma.view((0, n), (n, n)).into_owned();
        let spp = self.sigma.view((n, n), (n, n)).into_owned();
        let chol = sxx.clone().cholesky().ok_or(EngineError::Singular)?;
        let schur = &spp - sxp.transpose() * chol.solve(&sxp);
        let schur = (&schur + schur.transpose()) * 0.5;
        let logdet = |m: DMatrix<f64>| -> Result<f64, EngineError> {
            let c = (m * 2.0).cholesky().ok_or(EngineError::Singular)?;
            Ok(2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
        };
        Ok((logdet(sxx)? + logdet(schur)?).exp())
    }

    /// Gaussian conditioning on quadrature row `q` having value `m`; removes
    /// the mode of `q` from the moments.
    pub fn condition(&self, q: usize, m: f64) -> CovarianceMoments {
        let n = self.modes();
        let k = q % n;
        let var = self.sigma[(q, q)];
        let keep: Vec<usize> = (0..2 * n).filter(|&i| i != k && i != n + k).collect();
        let rows = keep.len();
        let sigma = DMatrix::from_fn(rows, rows, |a, b| {
            let (i, j) = (keep[a], keep[b]);
            self.sigma[(i, j)] - self.sigma[(i, q)] * self.sigma[(q, j)] / var
        });
        let mean = DVector::from_fn(rows, |a, _| {
            let i = keep[a];
            self.mean[i] + self.sigma[(i, q)] / var * (m - self.mean[q])
        });
        CovarianceMoments { sigma, mean }
    }

    /// Applies `x_k → −p_k, p_k → x_k` to the moments.
    pub fn rotate(&mut self, k: usize) {
        let n = self.modes();
        let mut s = DMatrix::<f64>::identity(2 * n, 2 * n);
        s[(k, k)] = 0.0;
        s[(n + k, n + k)] = 0.0;
        s[(k, n + k)] = -1.0;
        s[(n + k, k)] = 1.0;
        self.apply_symplectic(&s);
    }

    /// `σ ← S σ Sᵀ`, `μ ← S μ`.
    pub fn apply_symplectic(&mut self, s: &DMatrix<f64>) {
        self.sigma = s * &self.sigma * s.transpose();
        self.mean = s * &self.mean;
    }

    /// Smallest eigenvalue of the Hermitian matrix `σ + (i/2) Ω`; non-negative
    /// for a physical state.
    pub fn uncertainty_margin(&self) -> f64 {
        let n = self.modes();
        let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let omega = if i < n && j == i + n {
                1.0
            } else if i >= n && j + n == i {
                -1.0
            } else {
                0.0
            };
            Complex64::new(self.sigma[(i, j)], 0.5 * omega)
        });
        m.symmetric_eigenvalues().min()
    }
}

/// Ground state of the code on the edge modes, built from the cluster state of
/// [`cluster_graph`]: ancillas are measured with outcome zero and every edge
/// mode gets a Fourier gate. Ancillas use the default squeezing of the map.
pub fn prepare_code_ground_state(
    spec: &LatticeSpec,
    squeezing: &SqueezingMap,
) -> Result<GaussianGraphState, EngineError> {
    let (a, pattern) = cluster_graph(spec);
    let e = spec.num_modes();
    let ancilla_r = squeezing
        .default
        .finite()
        .ok_or(EngineError::InfiniteSqueezing(usize::MAX))?;
    let mut r = vec![ancilla_r; a.len()];
    for (mode, rk) in r.iter_mut().enumerate().take(e) {
        *rk = squeezing
            .get(mode)
            .finite()
            .ok_or(EngineError::InfiniteSqueezing(mode))?;
    }
    let mut state = GaussianGraphState::graph_from_cluster(&a, &r)?;
    for &(node, basis) in &pattern.measurements {
        state.measure_homodyne::<rand::rngs::ThreadRng>(node, basis, Outcome::Forced(0.0))?;
    }
    if pattern.fourier_on_survivors {
        for &m in &pattern.surviving {
            state.apply_gate(QuadraticGate::Fourier { mode: m })?;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(r: f64) -> GaussianGraphState {
        let a = AdjacencyMatrix::new(DMatrix::zeros(1, 1)).unwrap();
        GaussianGraphState::graph_from_cluster(&a, &[r]).unwrap()
    }

    #[test]
    fn vacuum_covariance() {
        let cov = single(0.0).to_covariance().unwrap();
        assert!((cov.sigma.clone() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn squeezed_node_variances() {
        let cov = single(1.0).to_covariance().unwrap();
        assert!((cov.sigma[(0, 0)] - 3.694528049465325).abs() < 1e-12);
        assert!((cov.sigma[(1, 1)] - 0.06766764161830635).abs() < 1e-12);
    }

    #[test]
    fn cz_on_vacua() {
        let mut s = single(0.0);
        s.append_mode(1, I).unwrap();
        s.apply_gate(QuadraticGate::ControlledZ { a: 0, b: 1 }).unwrap();
        assert_eq!(s.z[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(s.z[(0, 0)], I);
    }

    #[test]
    fn displacement_order_changes_scalar_only() {
        let (s, t) = (0.6, -1.3);
        let mut a = single(0.5);
        a.displace_z(0, t).unwrap();
        a.displace_x(0, s).unwrap();
        let mut b = single(0.5);
        b.displace_x(0, s).unwrap();
        b.displace_z(0, t).unwrap();
        assert_eq!((a.mean_x[0], a.mean_p[0]), (b.mean_x[0], b.mean_p[0]));
        assert!((a.log_scalar - b.log_scalar - Complex64::new(0.0, -s * t)).norm() < 1e-15);
    }

    #[test]
    fn fourier_twice_is_parity() {
        let mut s = single(0.0);
        s.displace_x(0, 1.0).unwrap();
        s.displace_z(0, 2.0).unwrap();
        s.apply_gate(QuadraticGate::Fourier { mode: 0 }).unwrap();
        s.apply_gate(QuadraticGate::Fourier { mode: 0 }).unwrap();
        assert_eq!((s.mean_x[0], s.mean_p[0]), (-1.0, -2.0));
        assert!((s.z[(0, 0)] - I).norm() < 1e-15);
    }

    #[test]
    fn measuring_product_state_leaves_partner() {
        let mut s = single(0.3);
        s.append_mode(7, Complex64::new(0.2, 0.8)).unwrap();
        s.displace_x(7, 0.4).unwrap();
        let before = s.z[(1, 1)];
        s.measure_homodyne::<rand::rngs::ThreadRng>(0, Quadrature::Position, Outcome::Forced(2.0))
            .unwrap();
        assert_eq!(s.labels, vec![7]);
        assert!((s.z[(0, 0)] - before).norm() < 1e-12);
        assert!((s.mean_x[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn measuring_last_mode_empties_state() {
        let mut s = single(0.3);
        s.measure_homodyne::<rand::rngs::ThreadRng>(0, Quadrature::Momentum, Outcome::Forced(0.1))
            .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn forced_nan_rejected() {
        let mut s = single(0.3);
        let r = s.measure_homodyne::<rand::rngs::ThreadRng>(
            0,
            Quadrature::Momentum,
            Outcome::Forced(f64::NAN),
        );
        assert!(matches!(r, Err(EngineError::NonFinite(_))));
    }
}

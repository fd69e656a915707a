//! Covariance-matrix algebra for bosonic Gaussian states.
//!
//! Quadratures are ordered `(q1, p1, q2, p2, ...)` and measured in vacuum-noise
//! units (the vacuum state has covariance matrix `I`). Every matrix in this
//! module follows that convention, including the 2x2 block formulas used for
//! measurement conditioning.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance below 1 accepted for symplectic eigenvalues of physical states.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Entrywise symmetry tolerance, relative to `max(1, max |V_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// `det Θ` at or below this value makes a Bell detection degenerate.
pub const BELL_DET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("covariance matrix must be square with even dimension, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("mode index {index} out of range for {modes} modes")]
    ModeIndex { index: usize, modes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("internal consistency failure: {0}")]
    Singular(&'static str),
    #[error("degenerate Bell detection: det Θ = {0:e}")]
    DegenerateBell(f64),
}

pub type Result<T> = std::result::Result<T, GaussianError>;

fn domain(name: &'static str, value: f64, constraint: &'static str) -> GaussianError {
    GaussianError::Domain {
        name,
        value,
        constraint,
    }
}

/// Real symmetric covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    /// Wraps `matrix` after checking shape and symmetry.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(GaussianError::Shape { rows, cols });
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if !asym.is_finite() || asym > SYMMETRY_TOL * scale {
            return Err(GaussianError::NotSymmetric(asym));
        }
        Ok(Self(symmetrize(matrix)))
    }

    /// Builds from a matrix produced by exact congruences, averaging away round-off.
    pub(crate) fn from_symmetric(matrix: DMatrix<f64>) -> Self {
        debug_assert!(matrix.is_square() && matrix.nrows().is_multiple_of(2));
        Self(symmetrize(matrix))
    }

    pub fn identity(modes: usize) -> Self {
        Self(DMatrix::identity(2 * modes, 2 * modes))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// The 2x2 block coupling modes `i` and `j`.
    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn symplectic_eigenvalues(&self) -> SymplecticSpectrum {
        symplectic_eigenvalues(self)
    }

    /// True when every symplectic eigenvalue is at least `1 - tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues().is_physical(tol)
    }

    pub fn entropy(&self) -> Result<f64> {
        von_neumann_entropy(self)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CovarianceMatrix {
    type Error = GaussianError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(GaussianError::Shape {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl From<CovarianceMatrix> for Vec<Vec<f64>> {
    fn from(cm: CovarianceMatrix) -> Self {
        cm.0.row_iter()
            .map(|row| row.iter().copied().collect())
            .collect()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// First and second moments of a Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub cm: CovarianceMatrix,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, cm: CovarianceMatrix) -> Result<Self> {
        if mean.len() != 2 * cm.modes() {
            return Err(GaussianError::DimensionMismatch {
                expected: 2 * cm.modes(),
                got: mean.len(),
            });
        }
        Ok(Self { mean, cm })
    }

    pub fn zero_mean(cm: CovarianceMatrix) -> Self {
        Self {
            mean: vec![0.0; 2 * cm.modes()],
            cm,
        }
    }

    /// Applies a symplectic map to both moments.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        let cm = apply_symplectic(&self.cm, s)?;
        let mean = s * DVector::from_column_slice(&self.mean);
        Ok(Self {
            mean: mean.iter().copied().collect(),
            cm,
        })
    }
}

/// Sorted symplectic spectrum `ν_1 <= ν_2 <= ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl SymplecticSpectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.eigenvalues.iter().all(|&nu| nu >= 1.0 - tol)
    }

    /// `Π ν_k²`, equal to `det V`.
    pub fn product_of_squares(&self) -> f64 {
        self.eigenvalues.iter().map(|nu| nu * nu).product()
    }

    pub fn entropy(&self) -> Result<f64> {
        self.eigenvalues.iter().map(|&nu| h_entropy(nu)).sum()
    }
}

/// `Ω = ⊕ [[0, 1], [-1, 0]]` on `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// `Z = diag(1, -1)`.
pub fn pauli_z() -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, -1.0)
}

/// Largest deviation of `S Ω Sᵀ` from `Ω`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(s.nrows() / 2);
    (s * &omega * s.transpose() - omega).amax()
}

/// Two-mode squeezed vacuum with local variance `mu`.
pub fn epr_cm(mu: f64) -> Result<CovarianceMatrix> {
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(domain("mu", mu, "mu >= 1"));
    }
    let mu_prime = (mu * mu - 1.0).sqrt();
    let mut v = DMatrix::from_diagonal_element(4, 4, mu);
    v[(0, 2)] = mu_prime;
    v[(2, 0)] = mu_prime;
    v[(1, 3)] = -mu_prime;
    v[(3, 1)] = -mu_prime;
    Ok(CovarianceMatrix(v))
}

/// Single-mode thermal state `ωI`.
pub fn thermal_cm(omega: f64) -> Result<CovarianceMatrix> {
    if !(omega >= 1.0) || !omega.is_finite() {
        return Err(domain("omega", omega, "omega >= 1"));
    }
    Ok(CovarianceMatrix(DMatrix::from_diagonal_element(2, 2, omega)))
}

/// Two-mode normal form `[[ω_A I, G], [G, ω_B I]]` with `G = diag(g, g')`.
///
/// Only the thermal variances are checked; whether the correlations are
/// compatible with the uncertainty principle is decided by the caller.
pub fn correlated_thermal_cm(
    omega_a: f64,
    omega_b: f64,
    g: f64,
    g_prime: f64,
) -> Result<CovarianceMatrix> {
    if !(omega_a >= 1.0) || !omega_a.is_finite() {
        return Err(domain("omega_a", omega_a, "omega_a >= 1"));
    }
    if !(omega_b >= 1.0) || !omega_b.is_finite() {
        return Err(domain("omega_b", omega_b, "omega_b >= 1"));
    }
    if !g.is_finite() || !g_prime.is_finite() {
        return Err(domain("g", if g.is_finite() { g_prime } else { g }, "finite"));
    }
    let mut v = DMatrix::zeros(4, 4);
    v[(0, 0)] = omega_a;
    v[(1, 1)] = omega_a;
    v[(2, 2)] = omega_b;
    v[(3, 3)] = omega_b;
    v[(0, 2)] = g;
    v[(2, 0)] = g;
    v[(1, 3)] = g_prime;
    v[(3, 1)] = g_prime;
    Ok(CovarianceMatrix(v))
}

/// Block-diagonal composition of independent states.
pub fn direct_sum(parts: &[&CovarianceMatrix]) -> CovarianceMatrix {
    let dim: usize = parts.iter().map(|p| p.0.nrows()).sum();
    let mut v = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for p in parts {
        let n = p.0.nrows();
        v.view_mut((offset, offset), (n, n)).copy_from(&p.0);
        offset += n;
    }
    CovarianceMatrix(v)
}

/// Beam splitter of transmissivity `tau` acting on modes `(i, j)` of a
/// `total_modes`-mode system.
///
/// The 4x4 block is `[[√τ I, √(1-τ) I], [-√(1-τ) I, √τ I]]`; with
/// `transposed = true` its transpose is embedded instead.
pub fn beam_splitter_symplectic(
    tau: f64,
    mode_i: usize,
    mode_j: usize,
    total_modes: usize,
    transposed: bool,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(domain("tau", tau, "0 <= tau <= 1"));
    }
    for index in [mode_i, mode_j] {
        if index >= total_modes {
            return Err(GaussianError::ModeIndex {
                index,
                modes: total_modes,
            });
        }
    }
    if mode_i == mode_j {
        return Err(domain("mode_j", mode_j as f64, "distinct from mode_i"));
    }
    let t = tau.sqrt();
    let r = (1.0 - tau).sqrt();
    let r = if transposed { -r } else { r };
    let mut s = DMatrix::identity(2 * total_modes, 2 * total_modes);
    for k in 0..2 {
        let (a, b) = (2 * mode_i + k, 2 * mode_j + k);
        s[(a, a)] = t;
        s[(b, b)] = t;
        s[(a, b)] = r;
        s[(b, a)] = -r;
    }
    Ok(s)
}

/// Phase rotation by `angle` on one mode.
pub fn rotation_symplectic(angle: f64, mode: usize, total_modes: usize) -> Result<DMatrix<f64>> {
    if mode >= total_modes {
        return Err(GaussianError::ModeIndex {
            index: mode,
            modes: total_modes,
        });
    }
    let (s, c) = angle.sin_cos();
    let mut m = DMatrix::identity(2 * total_modes, 2 * total_modes);
    let k = 2 * mode;
    m[(k, k)] = c;
    m[(k, k + 1)] = s;
    m[(k + 1, k)] = -s;
    m[(k + 1, k + 1)] = c;
    Ok(m)
}

/// Single-mode squeezer `diag(e^{-r}, e^{r})`.
pub fn squeezer_symplectic(r: f64, mode: usize, total_modes: usize) -> Result<DMatrix<f64>> {
    if mode >= total_modes {
        return Err(GaussianError::ModeIndex {
            index: mode,
            modes: total_modes,
        });
    }
    let mut m = DMatrix::identity(2 * total_modes, 2 * total_modes);
    m[(2 * mode, 2 * mode)] = (-r).exp();
    m[(2 * mode + 1, 2 * mode + 1)] = r.exp();
    Ok(m)
}

/// `V ↦ S V Sᵀ`.
pub fn apply_symplectic(cm: &CovarianceMatrix, s: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    let n = cm.0.nrows();
    if s.shape() != (n, n) {
        return Err(GaussianError::DimensionMismatch {
            expected: n,
            got: s.nrows(),
        });
    }
    Ok(CovarianceMatrix::from_symmetric(s * &cm.0 * s.transpose()))
}

fn quadrature_indices(modes: &[usize], total: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(2 * modes.len());
    for &m in modes {
        if m >= total {
            return Err(GaussianError::ModeIndex {
                index: m,
                modes: total,
            });
        }
        idx.extend([2 * m, 2 * m + 1]);
    }
    Ok(idx)
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Reorders modes so that new mode `k` is old mode `order[k]`.
pub fn permute_modes(cm: &CovarianceMatrix, order: &[usize]) -> Result<CovarianceMatrix> {
    let n = cm.modes();
    if order.len() != n {
        return Err(GaussianError::DimensionMismatch {
            expected: n,
            got: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &m in order {
        if m >= n || seen[m] {
            return Err(GaussianError::ModeIndex { index: m, modes: n });
        }
        seen[m] = true;
    }
    let idx = quadrature_indices(order, n)?;
    Ok(CovarianceMatrix(select(&cm.0, &idx, &idx)))
}

/// Reduced state on `keep_modes` (in the given order).
pub fn partial_trace(cm: &CovarianceMatrix, keep_modes: &[usize]) -> Result<CovarianceMatrix> {
    if keep_modes.is_empty() {
        return Err(GaussianError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let idx = quadrature_indices(keep_modes, cm.modes())?;
    Ok(CovarianceMatrix(select(&cm.0, &idx, &idx)))
}

/// Gaussian elimination of the variables at `measured`: returns
/// `V_kept - C M⁻¹ Cᵀ` over the remaining indices, in their original order.
///
/// This is the conditional covariance of a jointly Gaussian vector; for
/// quadratures it describes ideal homodyne detection of the eliminated ones.
pub fn gaussian_elimination(v: &DMatrix<f64>, measured: &[usize]) -> Result<DMatrix<f64>> {
    let n = v.nrows();
    if let Some(&bad) = measured.iter().find(|&&i| i >= n) {
        return Err(GaussianError::ModeIndex {
            index: bad,
            modes: n,
        });
    }
    let kept: Vec<usize> = (0..n).filter(|i| !measured.contains(i)).collect();
    let vk = select(v, &kept, &kept);
    let c = select(v, &kept, measured);
    let m = select(v, measured, measured);
    let m_inv = m
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .or_else(|| m.try_inverse())
        .ok_or(GaussianError::Singular("measured block is singular"))?;
    let out = vk - &c * m_inv * c.transpose();
    Ok(symmetrize(out))
}

/// Heterodyne detection of `mode`: `b - cᵀ(a + I)⁻¹c` on the remaining modes.
pub fn condition_on_heterodyne(cm: &CovarianceMatrix, mode: usize) -> Result<CovarianceMatrix> {
    let (a, b, c) = split_one_mode(cm, mode)?;
    let shifted = a + Matrix2::identity();
    let inv = shifted.try_inverse().ok_or(GaussianError::Singular(
        "a + I is singular in heterodyne conditioning",
    ))?;
    let inv = DMatrix::from_iterator(2, 2, inv.iter().copied());
    Ok(CovarianceMatrix::from_symmetric(
        &b - c.transpose() * inv * &c,
    ))
}

/// Same as [`condition_on_heterodyne`] through the adjugate form
/// `b - ζ⁻¹ cᵀ(Ω a Ωᵀ + I)c`, `ζ = det a + Tr a + 1`.
pub fn condition_on_heterodyne_adjugate(
    cm: &CovarianceMatrix,
    mode: usize,
) -> Result<CovarianceMatrix> {
    let (a, b, c) = split_one_mode(cm, mode)?;
    let zeta = a.determinant() + a.trace() + 1.0;
    if zeta.abs() <= f64::EPSILON {
        return Err(GaussianError::Singular(
            "zeta vanishes in heterodyne conditioning",
        ));
    }
    let omega = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let adj = omega * a * omega.transpose() + Matrix2::identity();
    let adj = DMatrix::from_iterator(2, 2, adj.iter().copied());
    Ok(CovarianceMatrix::from_symmetric(
        &b - c.transpose() * adj * &c / zeta,
    ))
}

fn split_one_mode(
    cm: &CovarianceMatrix,
    mode: usize,
) -> Result<(Matrix2<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = cm.modes();
    if n < 2 {
        return Err(GaussianError::DimensionMismatch {
            expected: 2,
            got: n,
        });
    }
    if mode >= n {
        return Err(GaussianError::ModeIndex { index: mode, modes: n });
    }
    let measured = [2 * mode, 2 * mode + 1];
    let rest: Vec<usize> = (0..2 * n).filter(|i| !measured.contains(i)).collect();
    let a = cm.block(mode, mode);
    let b = select(&cm.0, &rest, &rest);
    let c = select(&cm.0, &measured, &rest);
    Ok((a, b, c))
}

/// Bell detection on the last two modes, conditioning the remaining ones.
///
/// With blocks `A`, `B`, `D` of the detected modes and cross-correlations
/// `C_1`, `C_2`, the conditional matrix is
/// `V - (2 det Θ)⁻¹ Σ_ij C_i (X_iᵀ Θ X_j) C_jᵀ`, where
/// `Θ = (ZAZ + B - ZD - DᵀZ) / 2`.
pub fn condition_on_bell(cm: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let n = cm.modes();
    if n < 3 {
        return Err(GaussianError::DimensionMismatch {
            expected: 3,
            got: n,
        });
    }
    let (ia, ib) = (n - 2, n - 1);
    let z = pauli_z();
    let a = cm.block(ia, ia);
    let b = cm.block(ib, ib);
    let d = cm.block(ia, ib);
    let theta = (z * a * z + b - z * d - d.transpose() * z) * 0.5;
    let det_theta = theta.determinant();
    if det_theta <= BELL_DET_TOL {
        return Err(GaussianError::DegenerateBell(det_theta));
    }
    let k = 2 * (n - 2);
    let v_kept = cm.0.view((0, 0), (k, k)).into_owned();
    let c = [
        cm.0.view((0, 2 * ia), (k, 2)).into_owned(),
        cm.0.view((0, 2 * ib), (k, 2)).into_owned(),
    ];
    let x = [
        Matrix2::new(0.0, 1.0, 1.0, 0.0),
        Matrix2::new(0.0, 1.0, -1.0, 0.0),
    ];
    let mut correction = DMatrix::zeros(k, k);
    for i in 0..2 {
        for j in 0..2 {
            let middle = x[i].transpose() * theta * x[j];
            let middle = DMatrix::from_iterator(2, 2, middle.iter().copied());
            correction += &c[i] * middle * c[j].transpose();
        }
    }
    Ok(CovarianceMatrix::from_symmetric(
        v_kept - correction / (2.0 * det_theta),
    ))
}

/// Symplectic spectrum: the moduli of the eigenvalues of `iΩV`, one per mode.
///
/// Positive-definite inputs go through `V = LLᵀ` and the singular values of
/// the antisymmetric `LᵀΩL`, which keeps small eigenvalues accurate next to
/// very large ones. Other inputs fall back to the eigenvalues of `ΩV`.
pub fn symplectic_eigenvalues(cm: &CovarianceMatrix) -> SymplecticSpectrum {
    let n = cm.modes();
    let omega = symplectic_form(n);
    let mut moduli: Vec<f64> = match cm.0.clone().cholesky() {
        Some(ch) => {
            let l = ch.l();
            let m = l.transpose() * &omega * &l;
            m.singular_values().iter().copied().collect()
        }
        None => (&omega * &cm.0)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect(),
    };
    moduli.sort_by(|a, b| a.total_cmp(b));
    let eigenvalues = moduli
        .chunks_exact(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect();
    SymplecticSpectrum { eigenvalues }
}

/// Closed-form two-mode spectrum `2ν±² = Δ ± √(Δ² − 4 det V)`,
/// `Δ = det A + det B + 2 det C`.
pub fn two_mode_symplectic_eigenvalues(cm: &CovarianceMatrix) -> Result<[f64; 2]> {
    if cm.modes() != 2 {
        return Err(GaussianError::DimensionMismatch {
            expected: 2,
            got: cm.modes(),
        });
    }
    let delta = cm.block(0, 0).determinant()
        + cm.block(1, 1).determinant()
        + 2.0 * cm.block(0, 1).determinant();
    let (minus_sq, plus_sq) = two_mode_roots(delta, cm.determinant());
    Ok([minus_sq.max(0.0).sqrt(), plus_sq.max(0.0).sqrt()])
}

/// Roots of `x² − Δx + det = 0` in ascending order, evaluated without cancellation.
pub(crate) fn two_mode_roots(delta: f64, det: f64) -> (f64, f64) {
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    let plus = 0.5 * (delta + disc);
    let minus = if plus > 0.0 { det / plus } else { 0.5 * (delta - disc) };
    (minus, plus)
}

/// Binary entropy of a thermal mode with symplectic eigenvalue `x`, in bits.
///
/// Values in `[1 - PHYSICAL_TOL, 1]` are clamped to 1.
pub fn h_entropy(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 - PHYSICAL_TOL {
        return Err(domain("x", x, "symplectic eigenvalue >= 1"));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    // (x-1)/2 · ln(1 + 2/(x-1)) + ln((x+1)/2), free of the large-x cancellation
    let half_minus = 0.5 * (x - 1.0);
    let nats = half_minus * (1.0 / half_minus).ln_1p() + (0.5 * (x + 1.0)).ln();
    Ok(nats / std::f64::consts::LN_2)
}

/// `S(ρ) = Σ_k h(ν_k)` in bits.
pub fn von_neumann_entropy(cm: &CovarianceMatrix) -> Result<f64> {
    symplectic_eigenvalues(cm).entropy()
}

/// Random Gaussian states and symplectic maps, for sampling-based checks.
pub mod sampling {
    use super::*;
    use rand::Rng;

    /// Product of random rotations, squeezers and beam splitters.
    pub fn random_symplectic<R: Rng + ?Sized>(
        modes: usize,
        max_squeezing: f64,
        rng: &mut R,
    ) -> DMatrix<f64> {
        let mut s = DMatrix::identity(2 * modes, 2 * modes);
        for _ in 0..(3 * modes + 2) {
            let m = rng.random_range(0..modes);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            s = rotation_symplectic(angle, m, modes).expect("mode in range") * s;
            let r = rng.random_range(-max_squeezing..=max_squeezing);
            s = squeezer_symplectic(r, m, modes).expect("mode in range") * s;
            if modes > 1 {
                let other = (m + rng.random_range(1..modes)) % modes;
                let tau = rng.random_range(0.0..=1.0);
                s = beam_splitter_symplectic(tau, m, other, modes, false)
                    .expect("modes in range")
                    * s;
            }
        }
        s
    }

    /// `S (⊕ ν_k I) Sᵀ` with thermal eigenvalues `ν_k ∈ [1, max_nu]`.
    pub fn random_physical_cm<R: Rng + ?Sized>(
        modes: usize,
        max_nu: f64,
        max_squeezing: f64,
        rng: &mut R,
    ) -> CovarianceMatrix {
        let diag = DVector::from_fn(2 * modes, |_, _| 0.0);
        let mut d = DMatrix::from_diagonal(&diag);
        for k in 0..modes {
            let nu = rng.random_range(1.0..=max_nu);
            d[(2 * k, 2 * k)] = nu;
            d[(2 * k + 1, 2 * k + 1)] = nu;
        }
        let s = random_symplectic(modes, max_squeezing, rng);
        CovarianceMatrix::from_symmetric(&s * d * s.transpose())
    }
}

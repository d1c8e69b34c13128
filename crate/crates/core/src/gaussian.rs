//! Gaussian-state algebra on zero-mean covariance matrices.
//!
//! Conventions: shot-noise units (vacuum quadrature variance is 1) and
//! `xpxp` ordering, so mode `k` owns rows and columns `2k` and `2k + 1`.
//! Entropies are in bits.

use std::fmt;

use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::linalg::SquareMatrix;
use crate::scalar::Real;

/// Quadrature measured by a homodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

/// Block-diagonal symplectic form with per-mode blocks `[[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix<T: Real>(&self) -> SquareMatrix<T> {
        SquareMatrix::from_fn(2 * self.n_modes, |i, j| {
            if i / 2 != j / 2 {
                T::zero()
            } else if i % 2 == 0 && j % 2 == 1 {
                T::one()
            } else if i % 2 == 1 && j % 2 == 0 {
                -T::one()
            } else {
                T::zero()
            }
        })
    }
}

/// Two-mode beamsplitter symplectic matrix
/// `[[√η·I, √(1−η)·I], [−√(1−η)·I, √η·I]]` acting on (signal, ancilla).
pub fn beamsplitter_symplectic<T: Real>(eta: T) -> Result<SquareMatrix<T>> {
    check_transmissivity(eta)?;
    let t = eta.sqrt();
    let r = (T::one() - eta).sqrt();
    Ok(SquareMatrix::from_fn(4, |i, j| {
        if i % 2 != j % 2 {
            return T::zero();
        }
        match (i / 2, j / 2) {
            (0, 0) | (1, 1) => t,
            (0, 1) => r,
            _ => -r,
        }
    }))
}

fn check_transmissivity<T: Real>(eta: T) -> Result<()> {
    if eta >= T::zero() && eta <= T::one() {
        Ok(())
    } else {
        Err(Error::domain("transmissivity", eta.as_f64(), "must lie in [0, 1]"))
    }
}

/// Entropy of a single thermal symplectic eigenvalue, in bits:
/// `g(x) = ((x+1)/2)·log2((x+1)/2) − ((x−1)/2)·log2((x−1)/2)`.
///
/// Exactly 0 for `x ≤ 1 + ENTROPY_FLOOR`.
pub fn entropy_g<T: Real>(x: T) -> T {
    if x - T::one() <= T::lit(T::ENTROPY_FLOOR) {
        return T::zero();
    }
    let half = T::lit(0.5);
    let plus = (x + T::one()) * half;
    let minus = (x - T::one()) * half;
    plus * plus.log2() - minus * minus.log2()
}

/// Covariance matrix of an `n`-mode zero-mean Gaussian state with mode labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    matrix: SquareMatrix<T>,
    labels: Vec<String>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Wraps a matrix after checking shape, label count and symmetry.
    pub fn new(matrix: SquareMatrix<T>, labels: Vec<String>) -> Result<Self> {
        let dim = matrix.dim();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "covariance dimension {dim} is not a positive even number"
            )));
        }
        if labels.len() != dim / 2 {
            return Err(Error::Argument(format!(
                "{} labels supplied for {} modes",
                labels.len(),
                dim / 2
            )));
        }
        let tol = T::lit(T::SYMMETRY_TOL);
        for i in 0..dim {
            for j in i + 1..dim {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Argument(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > tol * T::one().max(a.abs()) {
                    return Err(Error::Argument(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { matrix, labels })
    }

    /// Builds a matrix from a function returning the 2×2 block of mode pair `(i, j)`.
    /// Only blocks with `i <= j` are queried; the lower triangle is mirrored.
    pub fn from_mode_blocks(labels: &[&str], mut block: impl FnMut(usize, usize) -> [[T; 2]; 2]) -> Result<Self> {
        let n = labels.len();
        let mut m = SquareMatrix::zeros(2 * n);
        for i in 0..n {
            for j in i..n {
                let b = block(i, j);
                for (qi, row) in b.iter().enumerate() {
                    for (qj, &v) in row.iter().enumerate() {
                        m[(2 * i + qi, 2 * j + qj)] = v;
                        m[(2 * j + qj, 2 * i + qi)] = v;
                    }
                }
            }
        }
        Self::new(m, labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn vacuum(labels: &[&str]) -> Self {
        Self {
            matrix: SquareMatrix::identity(2 * labels.len()),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Single-mode thermal state `diag(v, v)`.
    pub fn thermal(v: T, label: &str) -> Result<Self> {
        if !(v >= T::one()) {
            return Err(Error::domain("thermal variance", v.as_f64(), "must be >= 1"));
        }
        Ok(Self {
            matrix: SquareMatrix::diagonal(&[v, v]),
            labels: vec![label.to_string()],
        })
    }

    /// Two-mode squeezed vacuum (EPR) state with quadrature variance `v`,
    /// modes labelled `A` and `B`.
    pub fn two_mode_squeezed(v: T) -> Result<Self> {
        if !(v >= T::one()) {
            return Err(Error::domain("EPR variance V", v.as_f64(), "must be >= 1"));
        }
        let c = (v * v - T::one()).sqrt();
        Self::from_mode_blocks(&["A", "B"], |i, j| {
            if i == j {
                [[v, T::zero()], [T::zero(), v]]
            } else {
                sigma_z(c)
            }
        })
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.matrix[(i, j)]
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// 2×2 block between modes `i` and `j`.
    pub fn block(&self, i: usize, j: usize) -> [[T; 2]; 2] {
        let m = &self.matrix;
        [
            [m[(2 * i, 2 * j)], m[(2 * i, 2 * j + 1)]],
            [m[(2 * i + 1, 2 * j)], m[(2 * i + 1, 2 * j + 1)]],
        ]
    }

    pub fn relabel(mut self, mode: usize, label: &str) -> Result<Self> {
        self.check_mode(mode)?;
        self.labels[mode] = label.to_string();
        Ok(self)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "mode index {mode} out of range for {} modes",
                self.n_modes()
            )))
        }
    }

    /// Reduced state on the listed modes, in the listed order.
    pub fn select_modes(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        Ok(Self {
            matrix: self.matrix.select(&idx),
            labels: modes.iter().map(|&m| self.labels[m].clone()).collect(),
        })
    }

    /// Permutes modes: output mode `k` is input mode `permutation[k]`.
    pub fn reorder_modes(&self, permutation: &[usize]) -> Result<Self> {
        let n = self.n_modes();
        let mut seen = vec![false; n];
        if permutation.len() != n {
            return Err(Error::Argument(format!(
                "permutation of length {} for {n} modes",
                permutation.len()
            )));
        }
        for &p in permutation {
            if p >= n || seen[p] {
                return Err(Error::Argument(format!(
                    "permutation {permutation:?} is not a bijection on 0..{n}"
                )));
            }
            seen[p] = true;
        }
        self.select_modes(permutation)
    }

    /// Mixes mode `mode` with a fresh vacuum ancilla on a beamsplitter of
    /// transmissivity `eta`.
    ///
    /// The ancilla is appended as the last mode under `ancilla_label`. The
    /// transmitted signal stays at `mode`: `√η·signal + √(1−η)·ancilla`, and
    /// the ancilla output is `−√(1−η)·signal + √η·ancilla`.
    pub fn beamsplitter_transform(&self, mode: usize, eta: T, ancilla_label: &str) -> Result<Self> {
        self.check_mode(mode)?;
        let bs = beamsplitter_symplectic(eta)?;
        let n = self.n_modes() + 1;
        let anc = n - 1;
        let extended = self.matrix.direct_sum(&SquareMatrix::identity(2));

        let mut y = SquareMatrix::identity(2 * n);
        let slots = [mode, anc];
        for (bi, &mi) in slots.iter().enumerate() {
            for (bj, &mj) in slots.iter().enumerate() {
                for q in 0..2 {
                    y[(2 * mi + q, 2 * mj + q)] = bs[(2 * bi + q, 2 * bj + q)];
                }
            }
        }
        let out = &(&y * &extended) * &y.transpose();
        let sym = SquareMatrix::from_fn(2 * n, |i, j| (out[(i, j)] + out[(j, i)]) * T::lit(0.5));
        let mut labels = self.labels.clone();
        labels.push(ancilla_label.to_string());
        Ok(Self { matrix: sym, labels })
    }

    /// Symplectic eigenvalues, sorted descending.
    ///
    /// Computed as the singular values of `γ^{1/2} Ω γ^{1/2}`, which coincide
    /// with the moduli of the eigenvalues of `iΩγ`. Values within
    /// `PURITY_TOL` below 1 are clamped to 1; anything below
    /// `1 − UNPHYSICAL_TOL` is an error.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<T>> {
        let n = self.n_modes();
        let (vals, vecs) = self.matrix.symmetric_eigen();
        let min = vals.iter().fold(T::infinity(), |m, &v| m.min(v));
        if !(min > T::zero()) {
            // Not positive definite: no symplectic spectrum, certainly unphysical.
            return Err(Error::Unphysical { nu: min.as_f64() });
        }
        let roots: Vec<T> = vals.iter().map(|v| v.sqrt()).collect();
        let sqrt_gamma = &(&vecs * &SquareMatrix::diagonal(&roots)) * &vecs.transpose();
        let omega = SymplecticForm::new(n).matrix::<T>();
        let a = &(&sqrt_gamma * &omega) * &sqrt_gamma;
        let ata = &a.transpose() * &a;
        let (mut sq, _) = ata.symmetric_eigen();
        sq.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));

        let one = T::one();
        let mut nus = Vec::with_capacity(n);
        for k in 0..n {
            let pair = (sq[2 * k] + sq[2 * k + 1]) * T::lit(0.5);
            let mut nu = pair.max(T::zero()).sqrt();
            if nu < one - T::lit(T::UNPHYSICAL_TOL) {
                return Err(Error::Unphysical { nu: nu.as_f64() });
            }
            if nu < one && nu >= one - T::lit(T::PURITY_TOL) {
                nu = one;
            }
            nus.push(nu);
        }
        Ok(nus)
    }

    /// Fails with the smallest offending eigenvalue unless every symplectic
    /// eigenvalue is at least `1 − PURITY_TOL`.
    pub fn ensure_physical(&self) -> Result<()> {
        let nus = self.symplectic_eigenvalues()?;
        let floor = T::one() - T::lit(T::PURITY_TOL);
        match nus.iter().find(|&&nu| nu < floor) {
            Some(&nu) => Err(Error::Unphysical { nu: nu.as_f64() }),
            None => Ok(()),
        }
    }

    /// Von Neumann entropy in bits, `Σ g(ν_k)`.
    pub fn von_neumann_entropy(&self) -> Result<T> {
        Ok(self
            .symplectic_eigenvalues()?
            .into_iter()
            .fold(T::zero(), |s, nu| s + entropy_g(nu)))
    }

    /// Conditional state of the remaining modes after an ideal homodyne
    /// measurement of `quadrature` on `mode`.
    ///
    /// `γ_rest − σ (Π γ_m Π)^MP σᵀ`; with a single-quadrature projector the
    /// pseudo-inverse reduces to dividing by the measured variance.
    pub fn homodyne_condition(&self, mode: usize, quadrature: Quadrature) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes() < 2 {
            return Err(Error::Argument("homodyne conditioning needs at least two modes".into()));
        }
        let q = 2 * mode + quadrature.offset();
        let variance = self.matrix[(q, q)];
        if !(variance > T::zero()) {
            return Err(Error::DegenerateMeasurement {
                variance: variance.as_f64(),
            });
        }
        let rest: Vec<usize> = (0..2 * self.n_modes()).filter(|&i| i / 2 != mode).collect();
        let m = &self.matrix;
        let cond = SquareMatrix::from_fn(rest.len(), |i, j| {
            let (ri, rj) = (rest[i], rest[j]);
            m[(ri, rj)] - m[(ri, q)] * m[(rj, q)] / variance
        });
        let labels = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != mode)
            .map(|(_, l)| l.clone())
            .collect();
        Ok(Self { matrix: cond, labels })
    }
}

/// `c·σ_z` with `σ_z = diag(1, −1)`.
pub fn sigma_z<T: Real>(c: T) -> [[T; 2]; 2] {
    [[c, T::zero()], [T::zero(), -c]]
}

/// `c·I` for the 2×2 identity.
pub fn scaled_identity<T: Real>(c: T) -> [[T; 2]; 2] {
    [[c, T::zero()], [T::zero(), c]]
}

/// Canonical text rendering: a `modes:` line followed by one line per row,
/// entries at 12 significant digits separated by single spaces.
impl<T: Real> fmt::Display for CovarianceMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "modes: {}", self.labels.join(" "))?;
        for row in self.matrix.rows() {
            let cells: Vec<String> = row.iter().map(|x| sig12(x.as_f64() + 0.0)).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

//! Bipartite logarithmic negativity of Gaussian states.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::CovarianceMatrix;

/// Relative slack on a negative discriminant before it counts as unphysical.
pub const DISCRIMINANT_CLAMP: f64 = 1e-9;

/// The four bosonic modes, in quadrature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Mode {
    Atom,
    Cavity,
    Phonon,
    Magnon,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Atom, Mode::Cavity, Mode::Phonon, Mode::Magnon];

    /// Row of the amplitude quadrature in the 8×8 covariance matrix.
    pub fn offset(self) -> usize {
        match self {
            Mode::Atom => 0,
            Mode::Cavity => 2,
            Mode::Phonon => 4,
            Mode::Magnon => 6,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Mode::Atom => 'a',
            Mode::Cavity => 'c',
            Mode::Phonon => 'b',
            Mode::Magnon => 'm',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.letter() == c)
    }
}

/// An unordered-for-E_N, distinct pair of modes, written e.g. `am`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ModePair(pub Mode, pub Mode);

impl ModePair {
    pub const CB: ModePair = ModePair(Mode::Cavity, Mode::Phonon);
    pub const AB: ModePair = ModePair(Mode::Atom, Mode::Phonon);
    pub const AM: ModePair = ModePair(Mode::Atom, Mode::Magnon);
    pub const CM: ModePair = ModePair(Mode::Cavity, Mode::Magnon);

    /// The pairs reported in sweep tables, in column order.
    pub const REPORTED: [ModePair; 4] = [Self::CB, Self::AB, Self::AM, Self::CM];

    pub fn new(e: Mode, f: Mode) -> Result<Self> {
        if e == f {
            return Err(Error::domain("pair", format!("modes must differ, got {e:?} twice")));
        }
        Ok(Self(e, f))
    }

    pub fn label(self) -> String {
        format!("{}{}", self.0.letter(), self.1.letter())
    }

    /// Same pair irrespective of order.
    pub fn same_as(self, other: ModePair) -> bool {
        self == other || (self.0 == other.1 && self.1 == other.0)
    }
}

impl fmt::Display for ModePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ModePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        let bad = || Error::domain("pair", format!("expected two mode letters from a, c, b, m; got {s:?}"));
        if chars.len() != 2 {
            return Err(bad());
        }
        let e = Mode::from_letter(chars[0]).ok_or_else(bad)?;
        let f = Mode::from_letter(chars[1]).ok_or_else(bad)?;
        ModePair::new(e, f)
    }
}

/// 4×4 covariance matrix of two modes, laid out as `[V_e, V_ef; V_efᵀ, V_f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipartiteCM(Matrix4<f64>);

impl BipartiteCM {
    pub fn new(v: Matrix4<f64>) -> Self {
        Self((v + v.transpose()) * 0.5)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn first(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn second(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn cross(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&DMatrix::from_column_slice(4, 4, self.0.as_slice()))
    }
}

pub fn reduced_cm(v: &CovarianceMatrix, pair: ModePair) -> Result<BipartiteCM> {
    let ModePair(e, f) = ModePair::new(pair.0, pair.1)?;
    let idx = [e.offset(), e.offset() + 1, f.offset(), f.offset() + 1];
    let vm = v.matrix();
    Ok(BipartiteCM::new(Matrix4::from_fn(|i, j| vm[(idx[i], idx[j])])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Negativity {
    /// `E_N = max(0, −ln 2η⁻)`.
    pub value: f64,
    /// Smallest symplectic eigenvalue of the partial transpose.
    pub eta_minus: f64,
    /// `Σ = det V_e + det V_f − 2 det V_ef`.
    pub sigma: f64,
}

pub fn log_negativity(v4: &BipartiteCM) -> Result<Negativity> {
    let sigma = v4.first().determinant() + v4.second().determinant() - 2.0 * v4.cross().determinant();
    let det = v4.matrix().determinant();
    let mut disc = sigma * sigma - 4.0 * det;
    if disc < 0.0 {
        if disc < -DISCRIMINANT_CLAMP * sigma * sigma {
            return Err(Error::Unphysical(format!(
                "negative discriminant {disc:e} (Σ = {sigma:e})"
            )));
        }
        disc = 0.0;
    }
    let inner = sigma - disc.sqrt();
    if !(inner > 0.0) {
        return Err(Error::Unphysical(format!(
            "non-positive partial-transpose spectrum (Σ = {sigma:e}, det = {det:e})"
        )));
    }
    let eta_minus = (inner / 2.0).sqrt();
    let value = (-(2.0 * eta_minus).ln()).max(0.0);
    Ok(Negativity {
        value,
        eta_minus,
        sigma,
    })
}

/// Symplectic form `⊕ [[0, 1], [−1, 0]]` on `n` modes.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// The `n` symplectic eigenvalues of a `2n × 2n` covariance matrix, ascending.
///
/// Computed as the singular values of `V^{1/2} Ω V^{1/2}`, which come in
/// degenerate pairs.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = v.nrows();
    if dim != v.ncols() || dim % 2 != 0 || dim == 0 {
        return Err(Error::domain("V", format!("expected even square matrix, got {}×{}", v.nrows(), v.ncols())));
    }
    let scale = v.amax().max(f64::MIN_POSITIVE);
    if (v - v.transpose()).amax() > 1e-10 * scale {
        return Err(Error::domain("V", "not symmetric"));
    }
    let sym = (v + v.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Unphysical("covariance matrix not positive definite".into()));
    }
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let k = &root * symplectic_form(dim / 2) * &root;
    let gram = k.transpose() * &k;
    let mut nu2: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
    if nu2.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            op: "symplectic_eigenvalues",
            reason: "eigen solver produced non-finite values".into(),
        });
    }
    nu2.sort_by(f64::total_cmp);
    Ok(nu2
        .chunks(2)
        .map(|p| (0.5 * (p[0] + p[1])).max(0.0).sqrt())
        .collect())
}

/// E_N for every requested pair, with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub entries: Vec<(ModePair, Negativity)>,
}

impl EntanglementReport {
    pub fn compute(v: &CovarianceMatrix, pairs: &[ModePair]) -> Result<Self> {
        let entries = pairs
            .iter()
            .map(|&p| Ok((p, log_negativity(&reduced_cm(v, p)?)?)))
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn get(&self, pair: ModePair) -> Option<f64> {
        self.entries
            .iter()
            .find(|(p, _)| p.same_as(pair))
            .map(|(_, n)| n.value)
    }
}

//! Linearized fluctuation dynamics `u̇ = A u + n` in the quadrature basis
//! `(δx_a, δy_a, δx_c, δy_c, δq, δp, δx_m, δy_m)`.
//!
//! The steady-state covariance matrix solves `A V + V Aᵀ = −D`; it is
//! computed by vectorization, and [`evolve_cm`] integrates the moment
//! equation `V̇ = A V + V Aᵀ + D` as an independent check.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SMatrix, Schur};
use serde::Serialize;

use crate::entanglement;
use crate::error::{Error, Result};
use crate::params::{thermal_occupation, ValidatedModel};
use crate::steady::SteadyState;

pub type Mat8 = SMatrix<f64, 8, 8>;

/// Number of quadratures (four modes, two each).
pub const DIM: usize = 8;

/// Tolerance on the relative Lyapunov residual `‖AV + VAᵀ + D‖_F / ‖D‖_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Slack below 1/2 allowed for the smallest symplectic eigenvalue.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// The parameters that fully determine the drift matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftParameters {
    pub gamma_a: f64,
    pub delta_a: f64,
    pub g_n: f64,
    pub kappa_c: f64,
    pub delta_c_eff: f64,
    pub coupling_c: f64,
    pub omega_b: f64,
    pub gamma_b: f64,
    pub coupling_m: f64,
    pub kappa_m: f64,
    pub delta_m_eff: f64,
}

impl DriftParameters {
    pub fn from_state(ss: &SteadyState, model: &ValidatedModel) -> Self {
        let (coupling_c, coupling_m) = ss.drift_couplings();
        Self {
            gamma_a: model.gamma_a,
            delta_a: model.delta_a,
            g_n: model.g_n,
            kappa_c: model.kappa_c,
            delta_c_eff: ss.delta_c_eff,
            coupling_c,
            omega_b: model.omega_b,
            gamma_b: model.gamma_b,
            coupling_m,
            kappa_m: model.kappa_m,
            delta_m_eff: ss.delta_m_eff,
        }
    }

    pub fn build(&self) -> Result<DriftMatrix> {
        let &DriftParameters {
            gamma_a: ga,
            delta_a: da,
            g_n: gn,
            kappa_c: kc,
            delta_c_eff: dc,
            coupling_c: gc,
            omega_b: wb,
            gamma_b: gb,
            coupling_m: gm,
            kappa_m: km,
            delta_m_eff: dm,
        } = self;
        #[rustfmt::skip]
        let a = Mat8::from_row_slice(&[
            -ga,  da,  0.0,  gn,  0.0, 0.0,  0.0, 0.0,
            -da, -ga, -gn,   0.0, 0.0, 0.0,  0.0, 0.0,
             0.0, gn, -kc,   dc,  gc,  0.0,  0.0, 0.0,
            -gn,  0.0, -dc, -kc,  0.0, 0.0,  0.0, 0.0,
             0.0, 0.0, 0.0,  0.0, 0.0, wb,   0.0, 0.0,
             0.0, 0.0, 0.0, -gc, -wb, -gb,   0.0, gm,
             0.0, 0.0, 0.0,  0.0, -gm, 0.0, -km,  dm,
             0.0, 0.0, 0.0,  0.0, 0.0, 0.0, -dm, -km,
        ]);
        DriftMatrix::new(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix(Mat8);

impl DriftMatrix {
    pub fn new(a: Mat8) -> Result<Self> {
        if a.iter().all(|x| x.is_finite()) {
            Ok(Self(a))
        } else {
            Err(Error::Numerical {
                op: "build_drift",
                reason: "non-finite entry".into(),
            })
        }
    }

    pub fn matrix(&self) -> &Mat8 {
        &self.0
    }

    /// Largest absolute entry; bounds the fastest rate in the dynamics.
    pub fn spectral_scale(&self) -> f64 {
        self.0.amax()
    }
}

pub fn build_drift(ss: &SteadyState, model: &ValidatedModel) -> Result<DriftMatrix> {
    DriftParameters::from_state(ss, model).build()
}

/// Diagonal noise matrix; the optical and atomic baths are taken at zero occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(Mat8);

impl DiffusionMatrix {
    pub fn from_diagonal(diag: [f64; DIM]) -> Self {
        Self(Mat8::from_diagonal(&diag.into()))
    }

    pub fn matrix(&self) -> &Mat8 {
        &self.0
    }
}

pub fn build_diffusion(model: &ValidatedModel, temperature: f64) -> Result<DiffusionMatrix> {
    let n_b = thermal_occupation(model.omega_b, temperature)?;
    let n_m = thermal_occupation(model.omega_m, temperature)?;
    let (ga, kc, km) = (model.gamma_a, model.kappa_c, model.kappa_m);
    let mech = model.gamma_b * (2.0 * n_b + 1.0);
    let mag = km * (2.0 * n_m + 1.0);
    Ok(DiffusionMatrix::from_diagonal([ga, ga, kc, kc, 0.0, mech, mag, mag]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part of the drift spectrum.
    pub margin: f64,
}

pub fn is_stable(a: &DriftMatrix) -> Result<Stability> {
    let schur = Schur::try_new(a.0, f64::EPSILON, 10_000).ok_or(Error::Numerical {
        op: "is_stable",
        reason: "Schur decomposition did not converge".into(),
    })?;
    let margin = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Stability {
        stable: margin < 0.0,
        margin,
    })
}

/// Steady-state covariance matrix; vacuum variance is 1/2 per quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(Mat8);

impl CovarianceMatrix {
    /// Wraps `v` after symmetrizing it.
    pub fn new(v: Mat8) -> Self {
        Self((v + v.transpose()) * 0.5)
    }

    pub fn vacuum() -> Self {
        Self(Mat8::identity() * 0.5)
    }

    pub fn matrix(&self) -> &Mat8 {
        &self.0
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        entanglement::symplectic_eigenvalues(&DMatrix::from_column_slice(DIM, DIM, self.0.as_slice()))
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self.symplectic_eigenvalues()?[0])
    }

    pub fn is_physical(&self) -> Result<bool> {
        Ok(self.min_symplectic_eigenvalue()? >= 0.5 - PHYSICALITY_TOL)
    }

    /// Row-major dump, 17 significant digits, one row per line.
    pub fn to_text(&self) -> String {
        dump_matrix(&self.0)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_matrix(text).map(Self::new)
    }
}

/// `‖AV + VAᵀ + D‖_F / ‖D‖_F`.
pub fn lyapunov_residual(a: &DriftMatrix, d: &DiffusionMatrix, v: &CovarianceMatrix) -> f64 {
    let r = a.0 * v.0 + v.0 * a.0.transpose() + d.0;
    r.norm() / d.0.norm()
}

/// Solves `A V + V Aᵀ = −D` for a stable drift matrix.
pub fn solve_lyapunov(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    let st = is_stable(a)?;
    if !st.stable {
        return Err(Error::Unstable { margin: st.margin });
    }
    solve_lyapunov_unchecked(a, d)
}

/// Vectorized solve `(I⊗A + A⊗I) vec V = −vec D` without the stability gate.
pub(crate) fn solve_lyapunov_unchecked(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    const N: usize = DIM;
    let am = &a.0;
    let mut k = DMatrix::<f64>::zeros(N * N, N * N);
    for j in 0..N {
        for i in 0..N {
            let row = i + N * j;
            for l in 0..N {
                // (I ⊗ A): A_il acting on V_lj
                k[(row, l + N * j)] += am[(i, l)];
                // (A ⊗ I): A_jl acting on V_il
                k[(row, i + N * l)] += am[(j, l)];
            }
        }
    }
    let rhs = DVector::from_iterator(N * N, d.0.iter().map(|x| -x));
    let sol = k.lu().solve(&rhs).ok_or(Error::Numerical {
        op: "solve_lyapunov",
        reason: "singular Lyapunov operator".into(),
    })?;
    let v = CovarianceMatrix::new(Mat8::from_column_slice(sol.as_slice()));
    let residual = lyapunov_residual(a, d, &v);
    if !(residual <= LYAPUNOV_RESIDUAL_TOL) {
        return Err(Error::IllConditioned { residual });
    }
    Ok(v)
}

/// Largest admissible time step for [`evolve_cm`].
pub fn max_time_step(a: &DriftMatrix) -> f64 {
    0.01 / a.spectral_scale()
}

/// Integrates `V̇ = A V + V Aᵀ + D` from `v0` up to `t_final` with classical
/// fourth-order Runge–Kutta. The step is shortened so that an integer number
/// of steps lands exactly on `t_final`.
pub fn evolve_cm(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    v0: &CovarianceMatrix,
    t_final: f64,
    dt: f64,
) -> Result<CovarianceMatrix> {
    let limit = max_time_step(a);
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::StepSize { dt, limit });
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::domain("t_final", format!("must be >= 0, got {t_final}")));
    }
    let steps = (t_final / dt).ceil() as u64;
    if steps == 0 {
        return Ok(*v0);
    }
    let h = t_final / steps as f64;
    let am = a.0;
    let dm = d.0;
    // V stays symmetric, so V Aᵀ = (A V)ᵀ.
    let rhs = |v: &Mat8| {
        let av = am * v;
        av + av.transpose() + dm
    };
    let mut v = v0.0;
    for step in 0..steps {
        let k1 = rhs(&v);
        let k2 = rhs(&(v + k1 * (0.5 * h)));
        let k3 = rhs(&(v + k2 * (0.5 * h)));
        let k4 = rhs(&(v + k3 * h));
        v += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        v = (v + v.transpose()) * 0.5;
        if step % 1024 == 0 && !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence {
                time: (step + 1) as f64 * h,
            });
        }
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::Divergence { time: t_final });
    }
    Ok(CovarianceMatrix(v))
}

pub fn dump_matrix<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> String {
    let mut out = String::new();
    for i in 0..R {
        for j in 0..C {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Mat8> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let bad = |reason: String| Error::Domain {
        field: "matrix",
        reason,
    };
    if rows.len() != DIM {
        return Err(bad(format!("expected {DIM} rows, found {}", rows.len())));
    }
    let mut m = Mat8::zeros();
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if vals.len() != DIM {
            return Err(bad(format!("row {}: expected {DIM} values, found {}", i + 1, vals.len())));
        }
        for (j, x) in vals.into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PhysicalParams;
    use crate::steady::solve_steady_state;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn baseline() -> (ValidatedModel, DriftMatrix, DiffusionMatrix) {
        let m = PhysicalParams::baseline().validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        let a = build_drift(&ss, &m).unwrap();
        let d = build_diffusion(&m, m.temperature).unwrap();
        (m, a, d)
    }

    fn decoupled() -> DriftParameters {
        let wb = TAU * 40e6;
        DriftParameters {
            gamma_a: TAU * 1e6,
            delta_a: -wb,
            g_n: 0.0,
            kappa_c: TAU * 2e6,
            delta_c_eff: 0.5 * wb,
            coupling_c: 0.0,
            omega_b: wb,
            gamma_b: TAU * 100.0,
            coupling_m: 0.0,
            kappa_m: TAU * 1e6,
            delta_m_eff: wb,
        }
    }

    #[test]
    fn entries_follow_the_reference_layout() {
        let p = DriftParameters {
            gamma_a: 1.0,
            delta_a: 2.0,
            g_n: 3.0,
            kappa_c: 4.0,
            delta_c_eff: 5.0,
            coupling_c: 6.0,
            omega_b: 7.0,
            gamma_b: 8.0,
            coupling_m: 9.0,
            kappa_m: 10.0,
            delta_m_eff: 11.0,
        };
        let a = *p.build().unwrap().matrix();
        // 1-based (row, col) as usually written
        let e = |r: usize, c: usize| a[(r - 1, c - 1)];
        assert_eq!(a.row(4).iter().copied().collect::<Vec<_>>(), vec![0., 0., 0., 0., 0., 7., 0., 0.]);
        assert_eq!(e(6, 4), -6.0);
        assert_eq!(e(6, 8), 9.0);
        assert_eq!(e(3, 5), 6.0);
        assert_eq!(e(7, 5), -9.0);
        assert_eq!((e(1, 1), e(1, 2), e(1, 4)), (-1.0, 2.0, 3.0));
        assert_eq!((e(2, 1), e(2, 3)), (-2.0, -3.0));
        assert_eq!((e(3, 2), e(3, 4), e(4, 1), e(4, 3)), (3.0, 5.0, -3.0, -5.0));
        assert_eq!((e(6, 5), e(6, 6)), (-7.0, -8.0));
        assert_eq!((e(7, 7), e(7, 8), e(8, 7), e(8, 8)), (-10.0, 11.0, -11.0, -10.0));
        assert_eq!(a.iter().filter(|x| **x != 0.0).count(), 23);
    }

    #[test]
    fn zero_coupling_is_block_diagonal() {
        let a = *decoupled().build().unwrap().matrix();
        for i in 0..DIM {
            for j in 0..DIM {
                if i / 2 != j / 2 {
                    assert_eq!(a[(i, j)], 0.0);
                }
            }
        }
        let atom = a.fixed_view::<2, 2>(0, 0).into_owned();
        let eig = atom.complex_eigenvalues();
        let p = decoupled();
        for z in eig.iter() {
            assert_relative_eq!(z.re, -p.gamma_a, max_relative = 1e-12);
            assert_relative_eq!(z.im.abs(), p.delta_a.abs(), max_relative = 1e-12);
        }
        let mech = a.fixed_view::<2, 2>(4, 4).into_owned();
        assert_eq!(mech.trace(), -p.gamma_b);
        assert_relative_eq!(mech.determinant(), p.omega_b * p.omega_b, max_relative = 1e-15);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let mut p = decoupled();
        p.coupling_c = f64::NAN;
        assert!(p.build().is_err());
    }

    #[test]
    fn diffusion_entries() {
        let mut params = PhysicalParams::baseline();
        params.temperature = Some(0.0);
        let m = params.validate().unwrap();
        let d0 = build_diffusion(&m, 0.0).unwrap();
        let expect = [m.gamma_a, m.gamma_a, m.kappa_c, m.kappa_c, 0.0, m.gamma_b, m.kappa_m, m.kappa_m];
        assert_eq!(d0.matrix().diagonal().as_slice(), &expect);

        let d = build_diffusion(&m, 10e-3).unwrap();
        let n_b = 1.0 / (1.054_571_817e-34 * m.omega_b / (1.380_649e-23 * 10e-3)).exp_m1();
        assert_relative_eq!(d.matrix()[(5, 5)], m.gamma_b * (2.0 * n_b + 1.0), max_relative = 1e-14);
        assert!((d.matrix()[(5, 5)] / m.gamma_b - 10.45).abs() < 0.01);
        assert_relative_eq!(d.matrix()[(6, 6)], m.kappa_m, max_relative = 1e-15);
        assert_relative_eq!(d.matrix()[(7, 7)], m.kappa_m, max_relative = 1e-15);
        assert!(build_diffusion(&m, -1.0).is_err());
    }

    #[test]
    fn decoupled_modes_are_stable() {
        let st = is_stable(&decoupled().build().unwrap()).unwrap();
        assert!(st.stable);
        // slowest decay is the mechanical pair at -γ_b/2
        assert_relative_eq!(st.margin, -TAU * 100.0 / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn undamped_oscillator_is_marginal() {
        let mut p = decoupled();
        p.gamma_b = 0.0;
        let st = is_stable(&p.build().unwrap()).unwrap();
        assert!(!st.stable);
        assert!(st.margin.abs() < 1e-6 * p.omega_b, "{}", st.margin);
    }

    #[test]
    fn baseline_is_stable() {
        let (_, a, _) = baseline();
        let st = is_stable(&a).unwrap();
        assert!(st.stable, "{st:?}");
    }

    #[test]
    fn decoupled_steady_states_are_analytic() {
        let p = decoupled();
        let a = p.build().unwrap();
        let n_b = 4.726;
        let d = DiffusionMatrix::from_diagonal([
            p.gamma_a,
            p.gamma_a,
            p.kappa_c,
            p.kappa_c,
            0.0,
            p.gamma_b * (2.0 * n_b + 1.0),
            p.kappa_m,
            p.kappa_m,
        ]);
        let v = solve_lyapunov(&a, &d).unwrap();
        let vm = v.matrix();
        for i in [0, 1, 2, 3, 6, 7] {
            assert_relative_eq!(vm[(i, i)], 0.5, max_relative = 1e-10);
        }
        assert_relative_eq!(vm[(4, 4)], n_b + 0.5, max_relative = 1e-8);
        assert_relative_eq!(vm[(5, 5)], n_b + 0.5, max_relative = 1e-8);
        for i in 0..DIM {
            for j in 0..DIM {
                if i != j {
                    assert!(vm[(i, j)].abs() < 1e-8, "({i},{j}) = {}", vm[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn unstable_drift_is_rejected_before_solving() {
        let mut p = decoupled();
        p.gamma_b = 0.0;
        let a = p.build().unwrap();
        let d = DiffusionMatrix::from_diagonal([1.0; DIM]);
        assert!(matches!(solve_lyapunov(&a, &d), Err(Error::Unstable { .. })));
    }

    #[test]
    fn baseline_lyapunov_solution() {
        let (_, a, d) = baseline();
        let v = solve_lyapunov(&a, &d).unwrap();
        assert!(lyapunov_residual(&a, &d, &v) <= LYAPUNOV_RESIDUAL_TOL);
        let vm = v.matrix();
        assert!((vm - vm.transpose()).amax() < 1e-12);
        assert!(v.is_physical().unwrap());
    }

    #[test]
    fn lyapunov_fixed_point_is_preserved_by_flow() {
        let (_, a, d) = baseline();
        let v = solve_lyapunov(&a, &d).unwrap();
        let dt = max_time_step(&a);
        let w = evolve_cm(&a, &d, &v, 2e-7, dt).unwrap();
        assert!((w.matrix() - v.matrix()).norm() / v.matrix().norm() < 1e-8);
    }

    #[test]
    fn decoupled_mechanics_thermalizes() {
        // Stronger damping keeps the integration short.
        let mut p = decoupled();
        p.gamma_b = TAU * 2e6;
        let a = p.build().unwrap();
        let n_b = 3.0;
        let d = DiffusionMatrix::from_diagonal([
            p.gamma_a,
            p.gamma_a,
            p.kappa_c,
            p.kappa_c,
            0.0,
            p.gamma_b * (2.0 * n_b + 1.0),
            p.kappa_m,
            p.kappa_m,
        ]);
        let margin = is_stable(&a).unwrap().margin;
        let v = evolve_cm(&a, &d, &CovarianceMatrix::vacuum(), 20.0 / margin.abs(), max_time_step(&a)).unwrap();
        let vm = v.matrix();
        assert_relative_eq!(vm[(4, 4)], n_b + 0.5, max_relative = 1e-6);
        assert_relative_eq!(vm[(5, 5)], n_b + 0.5, max_relative = 1e-6);
        assert_relative_eq!(vm[(2, 2)], 0.5, max_relative = 1e-6);
    }

    #[test]
    fn step_size_is_enforced() {
        let (_, a, d) = baseline();
        let dt = 2.0 * max_time_step(&a);
        assert!(matches!(
            evolve_cm(&a, &d, &CovarianceMatrix::vacuum(), 1e-6, dt),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn unstable_flow_diverges() {
        let mut p = decoupled();
        p.gamma_b = -TAU * 1e7;
        let a = p.build().unwrap();
        let d = DiffusionMatrix::from_diagonal([1.0; DIM]);
        let r = evolve_cm(&a, &d, &CovarianceMatrix::vacuum(), 1e-3, max_time_step(&a));
        assert!(matches!(r, Err(Error::Divergence { .. })), "{r:?}");
    }

    #[test]
    fn matrix_text_round_trip() {
        let (_, a, d) = baseline();
        let v = solve_lyapunov(&a, &d).unwrap();
        let text = v.to_text();
        assert_eq!(text.lines().count(), DIM);
        let first = text.lines().next().unwrap().split(' ').next().unwrap();
        // 17 significant digits: d.dddddddddddddddde±x
        assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
        let back = CovarianceMatrix::from_text(&text).unwrap();
        assert_eq!(back.matrix(), v.matrix());
        assert!(CovarianceMatrix::from_text("1 2 3").is_err());
    }
}

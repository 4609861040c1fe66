//! Classical steady state of the driven four-mode system.
//!
//! The mechanical displacement `⟨q⟩` shifts both the cavity and the magnon
//! detunings, which in turn set the amplitudes that produce `⟨q⟩`. In
//! drive-power mode with bare detunings this loop is closed with a damped
//! scalar fixed-point iteration on `⟨q⟩`; every other mode combination is
//! solved in closed form.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Detunings, Drive, ValidatedModel};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Occupation-to-capacity ratio above which the bosonic description is flagged.
pub const LOW_EXCITATION_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Consecutive residual increases treated as oscillatory divergence.
    pub growth_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 10_000,
            growth_window: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub amp_a: Complex64,
    pub amp_c: Complex64,
    pub amp_m: Complex64,
    pub q_mean: f64,
    /// Bare detunings `Δ_c`, `Δ_m` consistent with the effective ones.
    pub delta_c: f64,
    pub delta_m: f64,
    pub delta_c_eff: f64,
    pub delta_m_eff: f64,
    /// `G_c = i√2 g_c ⟨c⟩`.
    pub coupling_c: Complex64,
    /// `G_m = i√2 g_m ⟨m⟩`.
    pub coupling_m: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

impl SteadyState {
    /// Coupling magnitudes entering the drift matrix (phases fixed real-positive).
    pub fn drift_couplings(&self) -> (f64, f64) {
        (self.coupling_c.norm(), self.coupling_m.norm())
    }
}

/// `⟨m⟩ = Ω_d / (κ_m + iΔ̃_m)`.
pub fn magnon_amplitude(rabi: f64, kappa_m: f64, delta_m_eff: f64) -> Complex64 {
    Complex64::new(rabi, 0.0) / Complex64::new(kappa_m, delta_m_eff)
}

/// `⟨c⟩ = E(γ_a + iΔ_a) / [g_N² + (γ_a + iΔ_a)(κ_c + iΔ̃_c)]`.
pub fn cavity_amplitude(model: &ValidatedModel, drive_e: f64, delta_c_eff: f64) -> Complex64 {
    let atom = Complex64::new(model.gamma_a, model.delta_a);
    let cav = Complex64::new(model.kappa_c, delta_c_eff);
    drive_e * atom / (model.g_n * model.g_n + atom * cav)
}

/// `⟨a⟩ = −i g_N ⟨c⟩ / (γ_a + iΔ_a)`.
pub fn atom_amplitude(model: &ValidatedModel, amp_c: Complex64) -> Complex64 {
    -I * model.g_n * amp_c / Complex64::new(model.gamma_a, model.delta_a)
}

/// `⟨q⟩ = (g_c|⟨c⟩|² − g_m|⟨m⟩|²) / ω_b`.
pub fn displacement(model: &ValidatedModel, amp_c: Complex64, amp_m: Complex64) -> f64 {
    (model.g_c * amp_c.norm_sqr() - model.g_m * amp_m.norm_sqr()) / model.omega_b
}

pub fn solve_steady_state(model: &ValidatedModel) -> Result<SteadyState> {
    solve_steady_state_with(model, &SolverOptions::default())
}

pub fn solve_steady_state_with(model: &ValidatedModel, opts: &SolverOptions) -> Result<SteadyState> {
    match (model.drive, model.detunings) {
        (Drive::Power { drive_e, rabi, .. }, Detunings::Effective { delta_c_eff, delta_m_eff }) => {
            let amp_c = cavity_amplitude(model, drive_e, delta_c_eff);
            let amp_m = magnon_amplitude(rabi, model.kappa_m, delta_m_eff);
            let q = displacement(model, amp_c, amp_m);
            Ok(assemble(
                model,
                amp_c,
                amp_m,
                q,
                delta_c_eff + model.g_c * q,
                delta_m_eff - model.g_m * q,
                delta_c_eff,
                delta_m_eff,
                0,
                0.0,
            ))
        }
        (Drive::Power { drive_e, rabi, .. }, Detunings::Bare { delta_c, delta_m }) => {
            iterate_displacement(model, drive_e, rabi, delta_c, delta_m, opts)
        }
        (Drive::Coupling { coupling_c, coupling_m }, detunings) => {
            let amp_c = backfill_amplitude(coupling_c, model.g_c, "g_c")?;
            let amp_m = backfill_amplitude(coupling_m, model.g_m, "g_m")?;
            let q = displacement(model, amp_c, amp_m);
            let (dc, dm, dce, dme) = match detunings {
                Detunings::Effective { delta_c_eff, delta_m_eff } => (
                    delta_c_eff + model.g_c * q,
                    delta_m_eff - model.g_m * q,
                    delta_c_eff,
                    delta_m_eff,
                ),
                Detunings::Bare { delta_c, delta_m } => {
                    (delta_c, delta_m, delta_c - model.g_c * q, delta_m + model.g_m * q)
                }
            };
            Ok(assemble(model, amp_c, amp_m, q, dc, dm, dce, dme, 0, 0.0))
        }
    }
}

/// Inverts `G = i√2 g ⟨o⟩` for real positive `G`: `⟨o⟩ = −i G / (√2 g)`.
fn backfill_amplitude(coupling: f64, bare: f64, field: &'static str) -> Result<Complex64> {
    if coupling == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if bare <= 0.0 {
        return Err(Error::domain(
            field,
            "must be > 0 to infer an amplitude from a nonzero effective coupling",
        ));
    }
    Ok(-I * coupling / (std::f64::consts::SQRT_2 * bare))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    model: &ValidatedModel,
    amp_c: Complex64,
    amp_m: Complex64,
    q_mean: f64,
    delta_c: f64,
    delta_m: f64,
    delta_c_eff: f64,
    delta_m_eff: f64,
    iterations: usize,
    residual: f64,
) -> SteadyState {
    let root2 = std::f64::consts::SQRT_2;
    SteadyState {
        amp_a: atom_amplitude(model, amp_c),
        amp_c,
        amp_m,
        q_mean,
        delta_c,
        delta_m,
        delta_c_eff,
        delta_m_eff,
        coupling_c: I * root2 * model.g_c * amp_c,
        coupling_m: I * root2 * model.g_m * amp_m,
        iterations,
        residual,
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    let scale = new.abs().max(old.abs());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).abs() / scale
    }
}

fn relative_change_c(new: Complex64, old: Complex64) -> f64 {
    let scale = new.norm().max(old.norm());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).norm() / scale
    }
}

fn iterate_displacement(
    model: &ValidatedModel,
    drive_e: f64,
    rabi: f64,
    delta_c: f64,
    delta_m: f64,
    opts: &SolverOptions,
) -> Result<SteadyState> {
    let amplitudes = |q: f64| {
        (
            cavity_amplitude(model, drive_e, delta_c - model.g_c * q),
            magnon_amplitude(rabi, model.kappa_m, delta_m + model.g_m * q),
        )
    };

    let mut q = 0.0;
    let (mut c, mut m) = amplitudes(q);
    let mut last_residual = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut growth = 0;

    for k in 1..=opts.max_iterations {
        let target = displacement(model, c, m);
        let q_next = q + opts.damping * (target - q);
        let (c_next, m_next) = amplitudes(q_next);
        residual = relative_change(q_next, q)
            .max(relative_change_c(c_next, c))
            .max(relative_change_c(m_next, m));
        q = q_next;
        c = c_next;
        m = m_next;

        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                iterations: k,
                residual,
            });
        }
        if residual <= opts.tolerance {
            return Ok(assemble(
                model,
                c,
                m,
                q,
                delta_c,
                delta_m,
                delta_c - model.g_c * q,
                delta_m + model.g_m * q,
                k,
                residual,
            ));
        }
        if residual > last_residual {
            growth += 1;
            if growth >= opts.growth_window {
                return Err(Error::Bistability {
                    streak: growth,
                    residual,
                });
            }
        } else {
            growth = 0;
        }
        last_residual = residual;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Low-excitation diagnostics for the two spin-derived bosonic modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcitationReport {
    /// `⟨m†m⟩ = |⟨m⟩|²`.
    pub magnons: f64,
    /// `⟨a†a⟩ = |⟨a⟩|²`.
    pub atoms: f64,
    /// `2Ns`.
    pub magnon_capacity: f64,
    /// `N_atoms`, when known.
    pub atom_capacity: Option<f64>,
    pub magnon_ratio: f64,
    pub atom_ratio: Option<f64>,
}

impl ExcitationReport {
    pub fn magnon_valid(&self) -> bool {
        self.magnon_ratio <= LOW_EXCITATION_LIMIT
    }

    pub fn atom_valid(&self) -> Option<bool> {
        self.atom_ratio.map(|r| r <= LOW_EXCITATION_LIMIT)
    }

    pub fn warning(&self) -> bool {
        !self.magnon_valid() || self.atom_valid() == Some(false)
    }
}

pub fn excitation_numbers(ss: &SteadyState, model: &ValidatedModel) -> ExcitationReport {
    let magnons = ss.amp_m.norm_sqr();
    let atoms = ss.amp_a.norm_sqr();
    let magnon_capacity = model.spin_capacity();
    let atom_capacity = model.n_atoms;
    let ratio = |n: f64, cap: f64| if n == 0.0 { 0.0 } else { n / cap };
    ExcitationReport {
        magnons,
        atoms,
        magnon_capacity,
        atom_capacity,
        magnon_ratio: ratio(magnons, magnon_capacity),
        atom_ratio: atom_capacity.map(|cap| ratio(atoms, cap)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Frequency, PhysicalParams};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn power_params(p_laser: f64, b_drive: f64) -> PhysicalParams {
        PhysicalParams {
            coupling_c: None,
            coupling_m: None,
            p_laser: Some(p_laser),
            b_drive: Some(b_drive),
            ..PhysicalParams::baseline()
        }
    }

    fn bare(mut p: PhysicalParams, dc: f64, dm: f64) -> PhysicalParams {
        p.delta_c_eff = None;
        p.delta_m_eff = None;
        p.delta_c = Some(Frequency::hz(dc));
        p.delta_m = Some(Frequency::hz(dm));
        p
    }

    #[test]
    fn undriven_fixed_point() {
        let m = bare(power_params(0.0, 0.0), 20e6, 40e6).validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        assert_eq!(ss.amp_c, Complex64::new(0.0, 0.0));
        assert_eq!(ss.amp_m, Complex64::new(0.0, 0.0));
        assert_eq!(ss.amp_a, Complex64::new(0.0, 0.0));
        assert_eq!(ss.q_mean, 0.0);
        let rep = excitation_numbers(&ss, &m);
        assert_eq!((rep.magnons, rep.atoms), (0.0, 0.0));
        assert_eq!((rep.magnon_ratio, rep.atom_ratio), (0.0, Some(0.0)));
    }

    #[test]
    fn effective_mode_backfills_amplitudes() {
        let m = PhysicalParams::baseline().validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        assert_relative_eq!(ss.amp_c.norm(), 8e6 / (2f64.sqrt() * 1e3), max_relative = 1e-12);
        assert_relative_eq!(ss.amp_c.norm_sqr(), 3.2e7, max_relative = 1e-12);
        assert_relative_eq!(ss.coupling_c.re, TAU * 8e6, max_relative = 1e-12);
        assert!(ss.coupling_c.im.abs() < 1e-6);
        assert_relative_eq!(ss.coupling_m.re, TAU * 2.5e6, max_relative = 1e-12);
        assert_eq!(ss.delta_c_eff, m.omega_b * 0.5);
    }

    #[test]
    fn drive_power_reproduces_optomechanical_coupling() {
        let m = power_params(4.4e-3, 0.0).validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        let g = ss.coupling_c.norm() / TAU;
        assert!((g / 8e6 - 1.0).abs() < 0.05, "G_c/2π = {g:e}");
    }

    #[test]
    fn approximate_amplitudes_in_resolved_sideband_limit() {
        let m = power_params(4.4e-3, 1.1e-3).validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        let Drive::Power { drive_e, rabi, .. } = m.drive else {
            unreachable!()
        };
        let approx_c = I * drive_e * m.delta_a / (m.g_n * m.g_n - m.delta_a * ss.delta_c_eff);
        let approx_m = -I * rabi / ss.delta_m_eff;
        assert!((ss.amp_c - approx_c).norm() / approx_c.norm() < 0.1);
        assert!((ss.amp_m - approx_m).norm() / approx_m.norm() < 0.03);
    }

    #[test]
    fn self_consistent_iteration() {
        let m = bare(power_params(4.4e-3, 1.1e-3), 20e6, 40e6).validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        assert!(ss.iterations > 1);
        assert!(ss.residual <= 1e-12);
        let rhs = m.g_c * ss.amp_c.norm_sqr() - m.g_m * ss.amp_m.norm_sqr();
        assert_relative_eq!(ss.q_mean * m.omega_b, rhs, max_relative = 1e-10);
        assert_relative_eq!(ss.delta_c_eff, ss.delta_c - m.g_c * ss.q_mean, max_relative = 1e-12);
        assert_relative_eq!(ss.delta_m_eff, ss.delta_m + m.g_m * ss.q_mean, max_relative = 1e-12);

        let Drive::Power { drive_e, rabi, .. } = m.drive else {
            unreachable!()
        };
        let c = cavity_amplitude(&m, drive_e, ss.delta_c_eff);
        let mm = magnon_amplitude(rabi, m.kappa_m, ss.delta_m_eff);
        assert!((c - ss.amp_c).norm() / c.norm() < 1e-10);
        assert!((mm - ss.amp_m).norm() / mm.norm() < 1e-10);
    }

    #[test]
    fn uncoupled_mechanics_converges_immediately() {
        let mut p = bare(power_params(4.4e-3, 1.1e-3), 20e6, 40e6);
        p.g_c = Some(Frequency::hz(0.0));
        p.g_m = Some(Frequency::hz(0.0));
        let m = p.validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        assert_eq!(ss.iterations, 1);
        assert_eq!(ss.q_mean, 0.0);
        assert_eq!(ss.delta_c_eff, ss.delta_c);
        assert_eq!(ss.delta_m_eff, ss.delta_m);
    }

    #[test]
    fn weak_backaction_amplitude_is_linear_in_drive() {
        let mut p = bare(power_params(1e-9, 0.0), 20e6, 40e6);
        let m1 = p.clone().validate().unwrap();
        p.p_laser = Some(1e-9 * 1.001f64.powi(2));
        let m2 = p.validate().unwrap();
        let a1 = solve_steady_state(&m1).unwrap().amp_c.norm();
        let a2 = solve_steady_state(&m2).unwrap().amp_c.norm();
        let slope = (a2 / a1 - 1.0) / 0.001;
        assert!((slope - 1.0).abs() < 1e-3, "{slope}");
    }

    #[test]
    fn atom_occupation_closed_form() {
        for p in [PhysicalParams::baseline(), power_params(2e-3, 5e-4)] {
            let m = p.validate().unwrap();
            let ss = solve_steady_state(&m).unwrap();
            let closed = (m.g_n * ss.amp_c.norm()).powi(2) / (m.gamma_a.powi(2) + m.delta_a.powi(2));
            assert_relative_eq!(ss.amp_a.norm_sqr(), closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn occupations_at_baseline() {
        let m = PhysicalParams::baseline().validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        let rep = excitation_numbers(&ss, &m);
        assert_relative_eq!(rep.magnons, (2.5e6f64).powi(2) / (2.0 * 400.0), max_relative = 1e-12);
        assert!((rep.magnons / 7.7e9 - 1.0).abs() < 0.1);
        assert_relative_eq!(rep.magnon_capacity, 2.11e11, max_relative = 1e-12);
        assert!((rep.magnon_ratio - 0.037).abs() < 1e-3);
        assert!((rep.atoms / 1.3e6 - 1.0).abs() < 0.15);
        assert!(!rep.warning());
    }

    #[test]
    fn coupling_mode_with_bare_detunings_applies_shift() {
        let m = bare(PhysicalParams::baseline(), 20e6, 40e6).validate().unwrap();
        let ss = solve_steady_state(&m).unwrap();
        // magnon radiation pressure dominates at these settings
        assert!(ss.q_mean < 0.0);
        assert_eq!(ss.delta_c_eff, ss.delta_c - m.g_c * ss.q_mean);
        assert_eq!(ss.delta_m_eff, ss.delta_m + m.g_m * ss.q_mean);
    }

    #[test]
    fn nonzero_coupling_needs_bare_coupling() {
        let mut p = PhysicalParams::baseline();
        p.g_m = Some(Frequency::hz(0.0));
        let m = p.validate().unwrap();
        assert!(matches!(
            solve_steady_state(&m),
            Err(Error::Domain { field: "g_m", .. })
        ));
    }

    #[test]
    fn iteration_limit_reports_residual() {
        let m = bare(power_params(4.4e-3, 1.1e-3), 20e6, 40e6).validate().unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            ..Default::default()
        };
        match solve_steady_state_with(&m, &opts) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oscillating_iteration_is_flagged() {
        // An over-relaxed update overshoots the fixed point with growing amplitude.
        let m = bare(power_params(4.4e-3, 1.1e-3), 20e6, 40e6).validate().unwrap();
        let opts = SolverOptions {
            damping: 2.5,
            growth_window: 20,
            ..Default::default()
        };
        let err = solve_steady_state_with(&m, &opts).unwrap_err();
        assert!(
            matches!(err, Error::Bistability { .. } | Error::NonConvergence { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn magnon_dilution_raises_flag() {
        let mut p = PhysicalParams::baseline();
        let base = {
            let m = p.clone().validate().unwrap();
            excitation_numbers(&solve_steady_state(&m).unwrap(), &m)
        };
        p.g_m = Some(Frequency::hz(0.2));
        let m = p.validate().unwrap();
        let rep = excitation_numbers(&solve_steady_state(&m).unwrap(), &m);
        assert_relative_eq!(rep.magnon_ratio / base.magnon_ratio, 1e4, max_relative = 1e-10);
        assert!(rep.warning());
    }
}

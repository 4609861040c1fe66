//! Physical parameter model, unit handling and derived drive/thermal quantities.
//!
//! Every frequency is stored internally as an angular frequency in rad/s.
//! Inputs carry an explicit unit tag ([`Frequency`]) so the factor of 2π is
//! applied exactly once, during [`PhysicalParams::validate`].

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, FieldErrors, Result};

/// CODATA 2018 constants and material defaults.
pub mod constants {
    use std::f64::consts::TAU;

    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant, J/K.
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Electron gyromagnetic ratio used for the magnon drive, rad/(s·T).
    pub const GYROMAGNETIC_RATIO: f64 = TAU * 28.0e9;
    /// Net spin density of YIG, m⁻³.
    pub const YIG_SPIN_DENSITY: f64 = 4.22e27;
    /// Volume of a 5 × 2 × 1 μm³ YIG bridge, m³.
    pub const YIG_BRIDGE_VOLUME: f64 = 10.0e-18;
    /// Spin number of the Fe³⁺ ground state.
    pub const FE3_SPIN: f64 = 2.5;
}

use constants::*;

/// A frequency with an explicit unit tag.
///
/// Serialized as `{"over_2pi_hz": x}` or `{"rad_per_s": x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Frequency {
    /// Value quoted as ω/2π, in Hz.
    #[serde(rename = "over_2pi_hz")]
    Over2PiHz(f64),
    /// Angular frequency, rad/s.
    #[serde(rename = "rad_per_s")]
    RadPerS(f64),
}

impl Frequency {
    pub fn hz(value: f64) -> Self {
        Frequency::Over2PiHz(value)
    }

    pub fn mhz(value: f64) -> Self {
        Frequency::Over2PiHz(value * 1e6)
    }

    pub fn rad(value: f64) -> Self {
        Frequency::RadPerS(value)
    }

    pub fn rad_per_s(self) -> f64 {
        match self {
            Frequency::Over2PiHz(v) => TAU * v,
            Frequency::RadPerS(v) => v,
        }
    }

    /// The numeric payload, in whatever unit the tag names.
    pub fn raw(self) -> f64 {
        match self {
            Frequency::Over2PiHz(v) | Frequency::RadPerS(v) => v,
        }
    }
}

/// Mean thermal occupation `1 / (exp(ħω / k_B T) − 1)` of a bosonic mode.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain("omega", format!("must be > 0, got {omega}")));
    }
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::domain(
            "T",
            format!("must be >= 0, got {temperature}"),
        ));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (BOLTZMANN * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Cavity drive strength `E = sqrt(2 κ_c P_L / ħ ω_L)` in rad/s.
pub fn drive_amplitude_from_power(power: f64, wavelength: f64, kappa_c: f64) -> Result<f64> {
    for (field, v) in [("P_L", power), ("lambda_l", wavelength), ("kappa_c", kappa_c)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(field, format!("must be > 0, got {v}")));
        }
    }
    let photon_energy = HBAR * TAU * SPEED_OF_LIGHT / wavelength;
    Ok((2.0 * kappa_c * power / photon_energy).sqrt())
}

/// Magnon drive Rabi frequency `Ω_d = (√5/4) γ √N B_d` in rad/s.
pub fn rabi_from_field(field_amplitude: f64, n_spins: f64) -> Result<f64> {
    if !(field_amplitude.is_finite() && field_amplitude >= 0.0) {
        return Err(Error::domain(
            "b_drive",
            format!("must be >= 0, got {field_amplitude}"),
        ));
    }
    if !(n_spins.is_finite() && n_spins > 0.0) {
        return Err(Error::domain("n_spins", format!("must be > 0, got {n_spins}")));
    }
    Ok(5.0_f64.sqrt() / 4.0 * GYROMAGNETIC_RATIO * n_spins.sqrt() * field_amplitude)
}

/// Raw, unit-tagged parameter set as read from a configuration document.
///
/// Exactly one detuning form (`delta_c`/`delta_m` or
/// `delta_c_eff`/`delta_m_eff`) and one drive form (`p_laser`/`b_drive` or
/// `G_c`/`G_m`) must be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_b: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<Frequency>,
    /// Laser wavelength, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_c: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_m: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_a: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_c: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_m: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_a: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,
    /// Collective atom-cavity coupling `g_a √N_atoms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_n: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_a: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c_eff: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_m_eff: Option<Frequency>,
    /// Laser power, W.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_laser: Option<f64>,
    /// Microwave drive field amplitude, T.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_drive: Option<f64>,
    /// Number of spins in the YIG crystal; defaults to `spin_density * yig_volume`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_spins: Option<f64>,
    #[serde(rename = "G_c", default, skip_serializing_if = "Option::is_none")]
    pub coupling_c: Option<Frequency>,
    #[serde(rename = "G_m", default, skip_serializing_if = "Option::is_none")]
    pub coupling_m: Option<Frequency>,
    /// Bath temperature, K.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yig_volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_spin: Option<f64>,
}

impl PhysicalParams {
    /// Reference parameter set in effective-coupling mode:
    /// `G_c/2π = 8 MHz`, `G_m/2π = 2.5 MHz`, `Δ_a = −ω_b`, `Δ̃_c = 0.5 ω_b`,
    /// `Δ̃_m = ω_b`, `T = 10 mK`.
    pub fn baseline() -> Self {
        let omega_b = 40.0e6;
        PhysicalParams {
            omega_b: Some(Frequency::hz(omega_b)),
            omega_m: Some(Frequency::hz(10.0e9)),
            lambda_l: Some(1064.0e-9),
            kappa_c: Some(Frequency::mhz(2.0)),
            kappa_m: Some(Frequency::mhz(1.0)),
            gamma_a: Some(Frequency::mhz(1.0)),
            gamma_b: Some(Frequency::hz(100.0)),
            g_c: Some(Frequency::hz(1.0e3)),
            g_m: Some(Frequency::hz(20.0)),
            g_a: Some(Frequency::hz(1.0e3)),
            g_n: Some(Frequency::mhz(8.0)),
            delta_a: Some(Frequency::hz(-omega_b)),
            delta_c_eff: Some(Frequency::hz(0.5 * omega_b)),
            delta_m_eff: Some(Frequency::hz(omega_b)),
            coupling_c: Some(Frequency::mhz(8.0)),
            coupling_m: Some(Frequency::mhz(2.5)),
            temperature: Some(10.0e-3),
            ..Default::default()
        }
    }

    /// Checks every invariant and resolves the parameter set into rad/s.
    ///
    /// All violations are collected; nothing is partially validated.
    pub fn validate(&self) -> Result<ValidatedModel> {
        let mut errs = Vec::new();

        let positive = |errs: &mut Vec<FieldError>, field: &'static str, v: Option<Frequency>| {
            match v.map(Frequency::rad_per_s) {
                None => {
                    errs.push(FieldError::new(field, "missing"));
                    None
                }
                Some(x) if !(x.is_finite() && x > 0.0) => {
                    errs.push(FieldError::new(field, format!("must be > 0, got {x}")));
                    None
                }
                Some(x) => Some(x),
            }
        };
        let non_negative =
            |errs: &mut Vec<FieldError>, field: &'static str, v: Option<f64>, required: bool| match v {
                None => {
                    if required {
                        errs.push(FieldError::new(field, "missing"));
                    }
                    None
                }
                Some(x) if !(x.is_finite() && x >= 0.0) => {
                    errs.push(FieldError::new(field, format!("must be >= 0, got {x}")));
                    None
                }
                Some(x) => Some(x),
            };
        let finite = |errs: &mut Vec<FieldError>, field: &'static str, v: Option<Frequency>| {
            let x = v?.rad_per_s();
            if x.is_finite() {
                Some(x)
            } else {
                errs.push(FieldError::new(field, format!("must be finite, got {x}")));
                None
            }
        };

        let omega_b = positive(&mut errs, "omega_b", self.omega_b);
        let omega_m = positive(&mut errs, "omega_m", self.omega_m);
        let kappa_c = positive(&mut errs, "kappa_c", self.kappa_c);
        let kappa_m = positive(&mut errs, "kappa_m", self.kappa_m);
        let gamma_a = positive(&mut errs, "gamma_a", self.gamma_a);
        let gamma_b = positive(&mut errs, "gamma_b", self.gamma_b);
        let g_c = non_negative(&mut errs, "g_c", self.g_c.map(Frequency::rad_per_s), true);
        let g_m = non_negative(&mut errs, "g_m", self.g_m.map(Frequency::rad_per_s), true);
        let temperature = non_negative(&mut errs, "T", self.temperature, true);
        let lambda_l = match self.lambda_l {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                errs.push(FieldError::new("lambda_l", format!("must be > 0, got {x}")));
                None
            }
            other => other,
        };
        let delta_a = finite(&mut errs, "delta_a", self.delta_a);
        if self.delta_a.is_none() {
            errs.push(FieldError::new("delta_a", "missing"));
        }

        let atoms = self.resolve_atoms(&mut errs);
        let detunings = self.resolve_detunings(&mut errs, &finite);
        let n_spins = self.resolve_spins(&mut errs);
        let s_spin = match self.s_spin {
            None => Some(FE3_SPIN),
            Some(s) if s.is_finite() && s > 0.0 => Some(s),
            Some(s) => {
                errs.push(FieldError::new("s_spin", format!("must be > 0, got {s}")));
                None
            }
        };
        let drive = self.resolve_drive(&mut errs, lambda_l, kappa_c, n_spins);

        if !errs.is_empty() {
            return Err(Error::Validation(FieldErrors(errs)));
        }
        let (g_n, g_a, n_atoms) = atoms.expect("atoms resolved when no errors");
        Ok(ValidatedModel {
            omega_b: omega_b.unwrap(),
            omega_m: omega_m.unwrap(),
            lambda_l,
            kappa_c: kappa_c.unwrap(),
            kappa_m: kappa_m.unwrap(),
            gamma_a: gamma_a.unwrap(),
            gamma_b: gamma_b.unwrap(),
            g_c: g_c.unwrap(),
            g_m: g_m.unwrap(),
            g_n,
            g_a,
            n_atoms,
            delta_a: delta_a.unwrap(),
            detunings: detunings.unwrap(),
            drive: drive.unwrap(),
            temperature: temperature.unwrap(),
            n_spins: n_spins.unwrap(),
            s_spin: s_spin.unwrap(),
        })
    }

    #[allow(clippy::type_complexity)]
    fn resolve_atoms(&self, errs: &mut Vec<FieldError>) -> Option<(f64, Option<f64>, Option<f64>)> {
        let before = errs.len();
        let g_n = self.g_n.map(Frequency::rad_per_s);
        let g_a = self.g_a.map(Frequency::rad_per_s);
        let n = self.n_atoms;
        for (field, v) in [("g_n", g_n), ("n_atoms", n)] {
            if let Some(x) = v {
                if !(x.is_finite() && x >= 0.0) {
                    errs.push(FieldError::new(field, format!("must be >= 0, got {x}")));
                }
            }
        }
        if let Some(x) = g_a {
            if !(x.is_finite() && x > 0.0) {
                errs.push(FieldError::new("g_a", format!("must be > 0, got {x}")));
            }
        }
        if errs.len() > before {
            return None;
        }
        match (g_n, g_a, n) {
            (Some(g_n), Some(g_a), Some(n)) => {
                let expect = g_a * g_a * n;
                let got = g_n * g_n;
                if (got - expect).abs() > 1e-12 * got.abs().max(expect.abs()) {
                    errs.push(FieldError::new(
                        "g_n",
                        format!("inconsistent with g_a * sqrt(n_atoms) = {}", expect.sqrt()),
                    ));
                    return None;
                }
                Some((g_n, Some(g_a), Some(n)))
            }
            (Some(g_n), Some(g_a), None) => {
                let ratio = g_n / g_a;
                Some((g_n, Some(g_a), Some(ratio * ratio)))
            }
            (Some(g_n), None, Some(n)) => {
                let g_a = if n > 0.0 { Some(g_n / n.sqrt()) } else { None };
                Some((g_n, g_a, Some(n)))
            }
            (Some(g_n), None, None) => Some((g_n, None, None)),
            (None, Some(g_a), Some(n)) => Some((g_a * n.sqrt(), Some(g_a), Some(n))),
            _ => {
                errs.push(FieldError::new(
                    "g_n",
                    "missing (give g_n, or g_a together with n_atoms)",
                ));
                None
            }
        }
    }

    fn resolve_detunings(
        &self,
        errs: &mut Vec<FieldError>,
        finite: &dyn Fn(&mut Vec<FieldError>, &'static str, Option<Frequency>) -> Option<f64>,
    ) -> Option<Detunings> {
        let bare = self.delta_c.is_some() || self.delta_m.is_some();
        let eff = self.delta_c_eff.is_some() || self.delta_m_eff.is_some();
        match (bare, eff) {
            (true, true) => {
                errs.push(FieldError::new(
                    "detuning",
                    "both bare (delta_c, delta_m) and effective (delta_c_eff, delta_m_eff) detunings given",
                ));
                None
            }
            (false, false) => {
                errs.push(FieldError::new(
                    "detuning",
                    "missing (give delta_c and delta_m, or delta_c_eff and delta_m_eff)",
                ));
                None
            }
            (true, false) => {
                let c = require(errs, "delta_c", self.delta_c).and_then(|v| finite(errs, "delta_c", Some(v)));
                let m = require(errs, "delta_m", self.delta_m).and_then(|v| finite(errs, "delta_m", Some(v)));
                Some(Detunings::Bare {
                    delta_c: c?,
                    delta_m: m?,
                })
            }
            (false, true) => {
                let c = require(errs, "delta_c_eff", self.delta_c_eff)
                    .and_then(|v| finite(errs, "delta_c_eff", Some(v)));
                let m = require(errs, "delta_m_eff", self.delta_m_eff)
                    .and_then(|v| finite(errs, "delta_m_eff", Some(v)));
                Some(Detunings::Effective {
                    delta_c_eff: c?,
                    delta_m_eff: m?,
                })
            }
        }
    }

    fn resolve_spins(&self, errs: &mut Vec<FieldError>) -> Option<f64> {
        if let Some(n) = self.n_spins {
            if n.is_finite() && n > 0.0 {
                return Some(n);
            }
            errs.push(FieldError::new("n_spins", format!("must be > 0, got {n}")));
            return None;
        }
        let rho = self.spin_density.unwrap_or(YIG_SPIN_DENSITY);
        let vol = self.yig_volume.unwrap_or(YIG_BRIDGE_VOLUME);
        let mut ok = true;
        for (field, v) in [("spin_density", rho), ("yig_volume", vol)] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(FieldError::new(field, format!("must be > 0, got {v}")));
                ok = false;
            }
        }
        ok.then_some(rho * vol)
    }

    fn resolve_drive(
        &self,
        errs: &mut Vec<FieldError>,
        lambda_l: Option<f64>,
        kappa_c: Option<f64>,
        n_spins: Option<f64>,
    ) -> Option<Drive> {
        let power = self.p_laser.is_some() || self.b_drive.is_some();
        let coupling = self.coupling_c.is_some() || self.coupling_m.is_some();
        match (power, coupling) {
            (true, true) => {
                errs.push(FieldError::new(
                    "drive",
                    "both drive powers (p_laser, b_drive) and effective couplings (G_c, G_m) given",
                ));
                None
            }
            (false, false) => {
                errs.push(FieldError::new(
                    "drive",
                    "missing (give p_laser and b_drive, or G_c and G_m)",
                ));
                None
            }
            (true, false) => {
                let p = require(errs, "p_laser", self.p_laser);
                let b = require(errs, "b_drive", self.b_drive);
                if self.lambda_l.is_none() {
                    errs.push(FieldError::new("lambda_l", "missing (required with p_laser)"));
                }
                let p = match p {
                    Some(p) if !(p.is_finite() && p >= 0.0) => {
                        errs.push(FieldError::new("p_laser", format!("must be >= 0, got {p}")));
                        None
                    }
                    other => other,
                };
                if let Some(b) = b {
                    if !(b.is_finite() && b >= 0.0) {
                        errs.push(FieldError::new("b_drive", format!("must be >= 0, got {b}")));
                        return None;
                    }
                }
                let (p, b, lambda, kappa, n) = (p?, b?, lambda_l?, kappa_c?, n_spins?);
                let drive_e = if p == 0.0 {
                    0.0
                } else {
                    drive_amplitude_from_power(p, lambda, kappa).ok()?
                };
                let rabi = rabi_from_field(b, n).ok()?;
                Some(Drive::Power {
                    p_laser: p,
                    b_drive: b,
                    drive_e,
                    rabi,
                })
            }
            (false, true) => {
                let mut get = |field: &'static str, v: Option<Frequency>| match require(errs, field, v)
                    .map(Frequency::rad_per_s)
                {
                    Some(x) if !(x.is_finite() && x >= 0.0) => {
                        errs.push(FieldError::new(field, format!("must be >= 0, got {x}")));
                        None
                    }
                    other => other,
                };
                let gc = get("G_c", self.coupling_c);
                let gm = get("G_m", self.coupling_m);
                Some(Drive::Coupling {
                    coupling_c: gc?,
                    coupling_m: gm?,
                })
            }
        }
    }
}

fn require<T>(errs: &mut Vec<FieldError>, field: &'static str, v: Option<T>) -> Option<T> {
    if v.is_none() {
        errs.push(FieldError::new(field, "missing"));
    }
    v
}

/// Cavity and magnon detunings, either bare or including the mechanical shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Detunings {
    Bare { delta_c: f64, delta_m: f64 },
    Effective { delta_c_eff: f64, delta_m_eff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Drive {
    /// Laser power (W) and microwave field (T), with the derived drive
    /// strengths `E` and `Ω_d` in rad/s.
    Power {
        p_laser: f64,
        b_drive: f64,
        drive_e: f64,
        rabi: f64,
    },
    /// Effective couplings `G_c`, `G_m` in rad/s, taken real and non-negative.
    Coupling { coupling_c: f64, coupling_m: f64 },
}

/// A fully resolved parameter set. All frequencies are in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedModel {
    pub omega_b: f64,
    pub omega_m: f64,
    pub lambda_l: Option<f64>,
    pub kappa_c: f64,
    pub kappa_m: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub g_c: f64,
    pub g_m: f64,
    pub g_n: f64,
    pub g_a: Option<f64>,
    pub n_atoms: Option<f64>,
    pub delta_a: f64,
    pub detunings: Detunings,
    pub drive: Drive,
    pub temperature: f64,
    pub n_spins: f64,
    pub s_spin: f64,
}

impl ValidatedModel {
    /// Maximum magnon number `2Ns` compatible with the bosonic description.
    pub fn spin_capacity(&self) -> f64 {
        2.0 * self.n_spins * self.s_spin
    }

    pub fn thermal_phonons(&self) -> f64 {
        thermal_occupation(self.omega_b, self.temperature).expect("validated omega_b and T")
    }

    pub fn thermal_magnons(&self) -> f64 {
        thermal_occupation(self.omega_m, self.temperature).expect("validated omega_m and T")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_temperature_is_vacuum() {
        assert_eq!(thermal_occupation(TAU * 40e6, 0.0).unwrap(), 0.0);
        assert_eq!(thermal_occupation(TAU * 10e9, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn phonon_occupation_at_10_mk() {
        // ħω/k_BT for ω/2π = 40 MHz, T = 10 mK
        let x = HBAR * TAU * 40e6 / (BOLTZMANN * 10e-3);
        assert_relative_eq!(x, 0.191_92, max_relative = 1e-3);
        let n = thermal_occupation(TAU * 40e6, 10e-3).unwrap();
        assert!((n - 4.726).abs() < 1e-3, "{n}");
    }

    #[test]
    fn optical_and_microwave_modes_are_cold() {
        assert!(thermal_occupation(TAU * 10e9, 10e-3).unwrap() < 1e-20);
    }

    #[test]
    fn thermal_occupation_rejects_bad_input() {
        assert!(matches!(
            thermal_occupation(0.0, 1.0),
            Err(Error::Domain { field: "omega", .. })
        ));
        assert!(thermal_occupation(-1.0, 1.0).is_err());
        assert!(thermal_occupation(1.0, -1e-3).is_err());
    }

    #[test]
    fn laser_drive_strength() {
        let e = drive_amplitude_from_power(4.4e-3, 1064e-9, TAU * 2e6).unwrap();
        assert_relative_eq!(e, 7.70e11, max_relative = 2e-3);
        let quarter = drive_amplitude_from_power(1.1e-3, 1064e-9, TAU * 2e6).unwrap();
        assert_relative_eq!(quarter, e / 2.0, max_relative = 1e-12);
        assert!(drive_amplitude_from_power(0.0, 1064e-9, TAU * 2e6).is_err());
        assert!(drive_amplitude_from_power(1e-3, -1.0, TAU * 2e6).is_err());
    }

    #[test]
    fn magnon_rabi_frequency() {
        let n = YIG_SPIN_DENSITY * YIG_BRIDGE_VOLUME;
        assert_relative_eq!(n, 4.22e10, max_relative = 1e-12);
        assert_relative_eq!(2.0 * n * FE3_SPIN, 2.11e11, max_relative = 1e-12);
        assert_eq!(rabi_from_field(0.0, n).unwrap(), 0.0);
        let omega_d = rabi_from_field(1.1e-3, n).unwrap();
        assert!((omega_d / 2.2e13 - 1.0).abs() < 0.02, "{omega_d:e}");
        assert!(rabi_from_field(-1e-3, n).is_err());
        assert!(rabi_from_field(1e-3, 0.0).is_err());
    }

    #[test]
    fn baseline_validates() {
        let m = PhysicalParams::baseline().validate().unwrap();
        assert_relative_eq!(m.omega_b, TAU * 40e6);
        assert_relative_eq!(m.kappa_c, 2.0 * m.kappa_m);
        assert_eq!(m.gamma_a, m.kappa_m);
        assert_eq!(m.n_atoms, Some(6.4e7));
        assert!(matches!(m.detunings, Detunings::Effective { .. }));
        assert!(matches!(m.drive, Drive::Coupling { .. }));
    }

    #[test]
    fn negative_rate_names_its_field() {
        let mut p = PhysicalParams::baseline();
        p.kappa_c = Some(Frequency::mhz(-2.0));
        match p.validate() {
            Err(Error::Validation(FieldErrors(errs))) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].field, "kappa_c");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detuning_modes_are_exclusive() {
        let mut p = PhysicalParams::baseline();
        p.delta_c = Some(Frequency::mhz(20.0));
        p.delta_m = Some(Frequency::mhz(40.0));
        let Err(Error::Validation(FieldErrors(errs))) = p.validate() else {
            panic!("expected a conflict");
        };
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "detuning");
    }

    #[test]
    fn drive_modes_are_exclusive() {
        let mut p = PhysicalParams::baseline();
        p.p_laser = Some(1e-3);
        let Err(Error::Validation(FieldErrors(errs))) = p.validate() else {
            panic!("expected a conflict");
        };
        assert_eq!(errs[0].field, "drive");
    }

    #[test]
    fn all_errors_are_reported() {
        let p = PhysicalParams {
            omega_b: Some(Frequency::hz(-1.0)),
            ..Default::default()
        };
        let Err(Error::Validation(FieldErrors(errs))) = p.validate() else {
            panic!();
        };
        let fields: Vec<_> = errs.iter().map(|e| e.field).collect();
        for f in ["omega_b", "omega_m", "kappa_c", "gamma_b", "T", "delta_a", "detuning", "drive"] {
            assert!(fields.contains(&f), "{f} not in {fields:?}");
        }
    }

    #[test]
    fn inconsistent_atom_representations() {
        let mut p = PhysicalParams::baseline();
        p.n_atoms = Some(6.5e7);
        assert!(p.validate().is_err());
        p.n_atoms = Some(6.4e7);
        assert!(p.validate().is_ok());
        p.g_a = None;
        let m = p.validate().unwrap();
        assert_relative_eq!(m.g_a.unwrap(), TAU * 1e3, max_relative = 1e-12);
    }

    #[test]
    fn unit_tags_apply_two_pi_once() {
        assert_eq!(Frequency::rad(3.0).rad_per_s(), 3.0);
        assert_eq!(Frequency::hz(1.0).rad_per_s(), TAU);
        let json = r#"{"over_2pi_hz": 40e6}"#;
        let f: Frequency = serde_json::from_str(json).unwrap();
        assert_eq!(f.rad_per_s(), TAU * 40e6);
        assert!(serde_json::from_str::<Frequency>(r#"{"hz": 1}"#).is_err());
    }

    #[test]
    fn zero_temperature_is_allowed() {
        let mut p = PhysicalParams::baseline();
        p.temperature = Some(0.0);
        let m = p.validate().unwrap();
        assert_eq!(m.thermal_phonons(), 0.0);
        p.temperature = Some(-0.01);
        assert!(p.validate().is_err());
    }

    #[test]
    fn power_mode_resolves_drives() {
        let mut p = PhysicalParams::baseline();
        p.coupling_c = None;
        p.coupling_m = None;
        p.p_laser = Some(4.4e-3);
        p.b_drive = Some(1.1e-3);
        let m = p.validate().unwrap();
        let Drive::Power { drive_e, rabi, .. } = m.drive else {
            panic!();
        };
        assert_relative_eq!(drive_e, 7.70e11, max_relative = 2e-3);
        assert!(rabi > 2.1e13 && rabi < 2.3e13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bose_einstein_identity(f in 1e5f64..1e10, t in 1e-3f64..10.0) {
                let omega = TAU * f;
                let n = thermal_occupation(omega, t).unwrap();
                let x = HBAR * omega / (BOLTZMANN * t);
                prop_assert!((n * x.exp_m1() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn occupation_increases_with_temperature(f in 1e6f64..1e10, t in 1e-3f64..1.0) {
                let a = thermal_occupation(TAU * f, t).unwrap();
                let b = thermal_occupation(TAU * f, t * 1.01).unwrap();
                prop_assert!(b > a);
            }

            #[test]
            fn drive_scales_as_sqrt_power(p in 1e-6f64..1.0) {
                let e1 = drive_amplitude_from_power(p, 1064e-9, TAU * 2e6).unwrap();
                let e4 = drive_amplitude_from_power(4.0 * p, 1064e-9, TAU * 2e6).unwrap();
                prop_assert!((e4 / (2.0 * e1) - 1.0).abs() < 1e-14);
            }

            #[test]
            fn collective_coupling_round_trip(gn in 1e3f64..1e8, ga in 1.0f64..1e4) {
                let p = PhysicalParams {
                    g_n: Some(Frequency::hz(gn)),
                    g_a: Some(Frequency::hz(ga)),
                    ..PhysicalParams::baseline()
                };
                let m = p.validate().unwrap();
                let ga = m.g_a.unwrap();
                let n = m.n_atoms.unwrap();
                prop_assert!((ga * ga * n / (m.g_n * m.g_n) - 1.0).abs() < 1e-12);
            }
        }
    }
}

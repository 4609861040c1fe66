//! Parameter sweeps over the full pipeline
//! (parameters → steady state → drift/diffusion → covariance → E_N).
//!
//! Grid points are independent and evaluated in parallel; results are always
//! merged by grid index, so output is identical for any thread count.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::entanglement::{EntanglementReport, ModePair};
use crate::error::{Error, Result};
use crate::linear::{build_diffusion, build_drift, is_stable, solve_lyapunov, CovarianceMatrix, Stability};
use crate::params::{Detunings, Drive, ValidatedModel};
use crate::steady::{excitation_numbers, solve_steady_state, ExcitationReport, SteadyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SweepParam {
    DeltaA,
    DeltaCEff,
    DeltaMEff,
    CouplingM,
    CouplingC,
    Temperature,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DeltaA => "delta_a",
            SweepParam::DeltaCEff => "delta_c_eff",
            SweepParam::DeltaMEff => "delta_m_eff",
            SweepParam::CouplingM => "G_m",
            SweepParam::CouplingC => "G_c",
            SweepParam::Temperature => "T",
        }
    }

    fn is_frequency(self) -> bool {
        self != SweepParam::Temperature
    }

    fn is_coupling(self) -> bool {
        matches!(self, SweepParam::CouplingC | SweepParam::CouplingM)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delta_a" => SweepParam::DeltaA,
            "delta_c_eff" => SweepParam::DeltaCEff,
            "delta_m_eff" => SweepParam::DeltaMEff,
            "G_m" => SweepParam::CouplingM,
            "G_c" => SweepParam::CouplingC,
            "T" => SweepParam::Temperature,
            other => {
                return Err(Error::InvalidAxis {
                    axis: other.to_string(),
                    reason: "unknown parameter (expected delta_a, delta_c_eff, delta_m_eff, G_m, G_c or T)".into(),
                })
            }
        })
    }
}

/// How axis values translate into absolute SI values (rad/s or K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisUnit {
    Absolute,
    Over2PiHz,
    OmegaB,
    CouplingC,
}

impl AxisUnit {
    pub fn tag(self) -> &'static str {
        match self {
            AxisUnit::Absolute => "abs",
            AxisUnit::Over2PiHz => "over_2pi_hz",
            AxisUnit::OmegaB => "omega_b",
            AxisUnit::CouplingC => "G_c",
        }
    }
}

impl FromStr for AxisUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "abs" | "rad_per_s" | "K" => AxisUnit::Absolute,
            "over_2pi_hz" => AxisUnit::Over2PiHz,
            "omega_b" => AxisUnit::OmegaB,
            "G_c" => AxisUnit::CouplingC,
            other => {
                return Err(Error::InvalidAxis {
                    axis: other.to_string(),
                    reason: "unknown unit (expected abs, over_2pi_hz, omega_b or G_c)".into(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub unit: AxisUnit,
}

impl SweepAxis {
    pub fn new(param: SweepParam, start: f64, stop: f64, count: usize, unit: AxisUnit) -> Result<Self> {
        let fail = |reason: String| Error::InvalidAxis {
            axis: param.name().to_string(),
            reason,
        };
        if count < 2 {
            return Err(fail(format!("point count must be >= 2, got {count}")));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(fail("endpoints must be finite".into()));
        }
        if start == stop {
            return Err(fail("start and stop must differ".into()));
        }
        if !param.is_frequency() && unit != AxisUnit::Absolute {
            return Err(fail(format!("temperature axes take absolute kelvin, not {}", unit.tag())));
        }
        if (param.is_coupling() || param == SweepParam::Temperature) && start.min(stop) < 0.0 {
            return Err(fail("values must be >= 0".into()));
        }
        Ok(Self {
            param,
            start,
            stop,
            count,
            unit,
        })
    }

    /// Grid values in axis units; the endpoints are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * (i as f64 / n as f64)
                }
            })
            .collect()
    }

    /// Converts an axis value into rad/s (or K) for `model`.
    pub fn to_absolute(&self, model: &ValidatedModel, value: f64) -> Result<f64> {
        Ok(match self.unit {
            AxisUnit::Absolute => value,
            AxisUnit::Over2PiHz => std::f64::consts::TAU * value,
            AxisUnit::OmegaB => value * model.omega_b,
            AxisUnit::CouplingC => match model.drive {
                Drive::Coupling { coupling_c, .. } => value * coupling_c,
                Drive::Power { .. } => {
                    return Err(Error::InvalidAxis {
                        axis: self.param.name().to_string(),
                        reason: "G_c units need effective-coupling drive mode".into(),
                    })
                }
            },
        })
    }
}

/// Overwrites one parameter of a resolved model.
pub fn apply(model: &mut ValidatedModel, param: SweepParam, value: f64) -> Result<()> {
    let missing = |what: &str| Error::InvalidAxis {
        axis: param.name().to_string(),
        reason: format!("model is not in {what} mode"),
    };
    match param {
        SweepParam::DeltaA => model.delta_a = value,
        SweepParam::DeltaCEff | SweepParam::DeltaMEff => match &mut model.detunings {
            Detunings::Effective { delta_c_eff, delta_m_eff } => {
                if param == SweepParam::DeltaCEff {
                    *delta_c_eff = value;
                } else {
                    *delta_m_eff = value;
                }
            }
            Detunings::Bare { .. } => return Err(missing("effective-detuning")),
        },
        SweepParam::CouplingC | SweepParam::CouplingM => match &mut model.drive {
            Drive::Coupling { coupling_c, coupling_m } => {
                if param == SweepParam::CouplingC {
                    *coupling_c = value;
                } else {
                    *coupling_m = value;
                }
            }
            Drive::Power { .. } => return Err(missing("effective-coupling")),
        },
        SweepParam::Temperature => model.temperature = value,
    }
    Ok(())
}

/// Single run of the full pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub steady: SteadyState,
    pub excitation: ExcitationReport,
    pub stability: Stability,
    /// Present only for a stable drift matrix.
    pub covariance: Option<CovarianceMatrix>,
    pub entanglement: Option<EntanglementReport>,
    pub min_symplectic: Option<f64>,
}

/// Runs the pipeline; an unstable drift matrix is reported, not an error.
pub fn evaluate(model: &ValidatedModel, pairs: &[ModePair]) -> Result<PointEvaluation> {
    let steady = solve_steady_state(model)?;
    let excitation = excitation_numbers(&steady, model);
    let a = build_drift(&steady, model)?;
    let stability = is_stable(&a)?;
    if !stability.stable {
        return Ok(PointEvaluation {
            steady,
            excitation,
            stability,
            covariance: None,
            entanglement: None,
            min_symplectic: None,
        });
    }
    let d = build_diffusion(model, model.temperature)?;
    let v = solve_lyapunov(&a, &d)?;
    let nu = v.min_symplectic_eigenvalue()?;
    if nu < 0.5 - crate::linear::PHYSICALITY_TOL {
        return Err(Error::Unphysical(format!("min symplectic eigenvalue {nu}")));
    }
    let entanglement = EntanglementReport::compute(&v, pairs)?;
    Ok(PointEvaluation {
        steady,
        excitation,
        stability,
        covariance: Some(v),
        entanglement: Some(entanglement),
        min_symplectic: Some(nu),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PointStatus {
    Ok,
    Unstable,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    /// Axis values in axis units.
    pub coords: Vec<f64>,
    /// E_N for [`ModePair::REPORTED`], absent when not requested or not computable.
    pub values: [Option<f64>; 4],
    pub status: PointStatus,
    pub margin: Option<f64>,
    pub min_symplectic: Option<f64>,
    pub magnon_valid: Option<bool>,
    pub atom_valid: Option<bool>,
}

impl SweepRecord {
    pub fn stable(&self) -> bool {
        self.status == PointStatus::Ok
    }

    pub fn get(&self, pair: ModePair) -> Option<f64> {
        ModePair::REPORTED
            .iter()
            .position(|p| p.same_as(pair))
            .and_then(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub pairs: Vec<ModePair>,
    /// Row-major over the axes (last axis fastest).
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn column(&self, pair: ModePair) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.get(pair)).collect()
    }

    /// CSV table: `#` comment lines with axis units, then the header
    /// `<axes>,E_cb,E_ab,E_am,E_cm,stable,valid_magnon,valid_atom`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for ax in &self.axes {
            writeln!(
                out,
                "# axis {} unit={} start={} stop={} count={}",
                ax.param.name(),
                ax.unit.tag(),
                fmt_float(ax.start),
                fmt_float(ax.stop),
                ax.count
            )
            .unwrap();
        }
        let names: Vec<&str> = self.axes.iter().map(|a| a.param.name()).collect();
        writeln!(out, "{},E_cb,E_ab,E_am,E_cm,stable,valid_magnon,valid_atom", names.join(",")).unwrap();
        for r in &self.records {
            let mut fields: Vec<String> = r.coords.iter().map(|&x| fmt_float(x)).collect();
            fields.extend(r.values.iter().map(|v| v.map_or_else(|| "NA".to_string(), fmt_float)));
            fields.push(r.stable().to_string());
            fields.push(fmt_opt_bool(r.magnon_valid));
            fields.push(fmt_opt_bool(r.atom_valid));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Ten significant digits, scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.9e}")
}

fn fmt_opt_bool(b: Option<bool>) -> String {
    b.map_or_else(|| "NA".to_string(), |b| b.to_string())
}

fn record_for(model: &ValidatedModel, coords: Vec<f64>, pairs: &[ModePair]) -> SweepRecord {
    match evaluate(model, pairs) {
        Ok(ev) => {
            let mut values = [None; 4];
            if let Some(rep) = &ev.entanglement {
                for (slot, p) in values.iter_mut().zip(ModePair::REPORTED) {
                    if pairs.iter().any(|q| q.same_as(p)) {
                        *slot = rep.get(p);
                    }
                }
            }
            SweepRecord {
                coords,
                values,
                status: if ev.stability.stable {
                    PointStatus::Ok
                } else {
                    PointStatus::Unstable
                },
                margin: Some(ev.stability.margin),
                min_symplectic: ev.min_symplectic,
                magnon_valid: Some(ev.excitation.magnon_valid()),
                atom_valid: ev.excitation.atom_valid(),
            }
        }
        Err(e) => SweepRecord {
            coords,
            values: [None; 4],
            status: PointStatus::Failed(e.to_string()),
            margin: None,
            min_symplectic: None,
            magnon_valid: None,
            atom_valid: None,
        },
    }
}

/// Evaluates the pipeline on the Cartesian grid spanned by `axes`.
pub fn sweep(model: &ValidatedModel, axes: &[SweepAxis], pairs: &[ModePair]) -> Result<SweepResult> {
    if axes.is_empty() {
        return Err(Error::InvalidAxis {
            axis: String::new(),
            reason: "at least one axis required".into(),
        });
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.param == a.param) {
            return Err(Error::InvalidAxis {
                axis: a.param.name().to_string(),
                reason: "swept twice".into(),
            });
        }
        // Checks that the parameter exists in this model and the unit resolves.
        let mut probe = model.clone();
        apply(&mut probe, a.param, a.to_absolute(model, a.start)?)?;
    }
    let grids: Vec<Vec<f64>> = axes.iter().map(SweepAxis::values).collect();
    let absolute: Vec<Vec<f64>> = axes
        .iter()
        .zip(&grids)
        .map(|(a, g)| g.iter().map(|&x| a.to_absolute(model, x)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let total: usize = grids.iter().map(Vec::len).product();

    let records = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut idx = vec![0; axes.len()];
            for k in (0..axes.len()).rev() {
                idx[k] = rem % grids[k].len();
                rem /= grids[k].len();
            }
            let mut point = model.clone();
            for (k, ax) in axes.iter().enumerate() {
                apply(&mut point, ax.param, absolute[k][idx[k]]).expect("checked above");
            }
            let coords = idx.iter().enumerate().map(|(k, &i)| grids[k][i]).collect();
            record_for(&point, coords, pairs)
        })
        .collect();

    Ok(SweepResult {
        axes: axes.to_vec(),
        pairs: pairs.to_vec(),
        records,
    })
}

pub fn sweep2d(
    model: &ValidatedModel,
    axis1: SweepAxis,
    axis2: SweepAxis,
    pairs: &[ModePair],
) -> Result<SweepResult> {
    sweep(model, &[axis1, axis2], pairs)
}

/// E_am versus bath temperature.
pub fn temperature_sweep(model: &ValidatedModel, axis: SweepAxis) -> Result<SweepResult> {
    if axis.param != SweepParam::Temperature {
        return Err(Error::InvalidAxis {
            axis: axis.param.name().to_string(),
            reason: "temperature sweep needs a T axis".into(),
        });
    }
    sweep(model, &[axis], &[ModePair::AM])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Search interval for Δ̃_c, in units of ω_b.
    pub range: (f64, f64),
    pub prescan_points: usize,
    pub brackets: usize,
    /// Golden-section stopping width, in units of ω_b.
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            range: (0.01, 1.5),
            prescan_points: 150,
            brackets: 3,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalDetuning {
    pub coupling_m: f64,
    /// Maximizing Δ̃_c in rad/s; `None` when E_am vanishes on the whole range.
    pub delta_c_opt: Option<f64>,
    pub e_am_max: f64,
    pub evaluations: usize,
}

/// Maximizes E_am over Δ̃_c at fixed `G_m`.
///
/// A uniform pre-scan locates local maxima; the best few are refined by
/// golden-section search and the global best is returned. Unstable points
/// never qualify.
pub fn optimal_cavity_detuning(
    model: &ValidatedModel,
    coupling_m: f64,
    opts: &SearchOptions,
) -> Result<OptimalDetuning> {
    let mut base = model.clone();
    apply(&mut base, SweepParam::CouplingM, coupling_m)?;
    apply(&mut base, SweepParam::DeltaCEff, model.omega_b * opts.range.0)?;
    if opts.prescan_points < 3 || !(opts.range.0 < opts.range.1) {
        return Err(Error::domain("search", "need >= 3 pre-scan points and an increasing range"));
    }
    let wb = model.omega_b;
    let mut evaluations = 0usize;
    let mut objective = |x: f64| -> Option<f64> {
        evaluations += 1;
        let mut m = base.clone();
        apply(&mut m, SweepParam::DeltaCEff, x * wb).ok()?;
        let ev = evaluate(&m, &[ModePair::AM]).ok()?;
        ev.entanglement?.get(ModePair::AM)
    };

    let (lo, hi) = opts.range;
    let n = opts.prescan_points;
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let fs: Vec<Option<f64>> = xs.iter().map(|&x| objective(x)).collect();
    if fs.iter().all(Option::is_none) {
        return Err(Error::NoStablePoint);
    }
    let score = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);

    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (&x, &f) in xs.iter().zip(&fs) {
        if score(f) > best.0 {
            best = (score(f), x);
        }
    }

    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let f = score(fs[i]);
            f > 0.0
                && (i == 0 || f >= score(fs[i - 1]))
                && (i == n - 1 || f >= score(fs[i + 1]))
        })
        .collect();
    peaks.sort_by(|&i, &j| score(fs[j]).total_cmp(&score(fs[i])));
    peaks.truncate(opts.brackets);

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for i in peaks {
        let mut a = xs[i.saturating_sub(1)];
        let mut b = xs[(i + 1).min(n - 1)];
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = score(objective(c));
        let mut fd = score(objective(d));
        while b - a > opts.tolerance {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = score(objective(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = score(objective(d));
            }
        }
        for (f, x) in [(fc, c), (fd, d)] {
            if f > best.0 {
                best = (f, x);
            }
        }
    }

    let (e_am_max, x_best) = best;
    Ok(OptimalDetuning {
        coupling_m,
        delta_c_opt: (e_am_max > 0.0).then_some(x_best * wb),
        e_am_max: e_am_max.max(0.0),
        evaluations,
    })
}

/// Optimal detuning for each coupling in `couplings_m` (rad/s), in input order.
pub fn optimal_detuning_scan(
    model: &ValidatedModel,
    couplings_m: &[f64],
    opts: &SearchOptions,
) -> Result<Vec<OptimalDetuning>> {
    couplings_m
        .par_iter()
        .map(|&g| optimal_cavity_detuning(model, g, opts))
        .collect()
}

pub fn optimal_detuning_csv(model: &ValidatedModel, rows: &[OptimalDetuning]) -> String {
    let mut out = String::from("G_m,delta_c_opt,E_am_max\n");
    for r in rows {
        let opt = r
            .delta_c_opt
            .map_or_else(|| "NA".to_string(), |x| fmt_float(x / model.omega_b));
        writeln!(out, "{},{},{}", fmt_float(r.coupling_m / std::f64::consts::TAU), opt, fmt_float(r.e_am_max)).unwrap();
    }
    out
}

/// Low-excitation check across a set of parameter assignments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub entries: Vec<ExcitationReport>,
    /// Indices of entries with a ratio above the low-excitation limit.
    pub flagged: Vec<usize>,
}

impl ValidityReport {
    pub fn max_magnon_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.magnon_ratio).fold(0.0, f64::max)
    }

    pub fn max_atom_ratio(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| e.atom_ratio)
            .try_fold(0.0, |acc, r| r.map(|r| f64::max(acc, r)))
    }
}

/// One entry per assignment of absolute parameter values.
pub fn validity_report(model: &ValidatedModel, points: &[Vec<(SweepParam, f64)>]) -> Result<ValidityReport> {
    let entries = points
        .iter()
        .map(|assign| {
            let mut m = model.clone();
            for &(p, v) in assign {
                apply(&mut m, p, v)?;
            }
            let ss = solve_steady_state(&m)?;
            Ok(excitation_numbers(&ss, &m))
        })
        .collect::<Result<Vec<_>>>()?;
    let flagged = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.warning())
        .map(|(i, _)| i)
        .collect();
    Ok(ValidityReport { entries, flagged })
}

/// Reference configurations and scan ranges.
pub mod presets {
    use super::*;
    use crate::params::{Frequency, PhysicalParams};

    /// Effective-coupling reference point (see [`PhysicalParams::baseline`]).
    pub fn baseline() -> ValidatedModel {
        PhysicalParams::baseline()
            .validate()
            .expect("baseline parameters are valid")
    }

    pub fn with_coupling_m(over_2pi_hz: f64) -> ValidatedModel {
        PhysicalParams {
            coupling_m: Some(Frequency::hz(over_2pi_hz)),
            ..PhysicalParams::baseline()
        }
        .validate()
        .expect("valid")
    }

    /// Δ_a/ω_b ∈ [−1.5, −0.5].
    pub fn atom_detuning_axis(count: usize) -> SweepAxis {
        SweepAxis::new(SweepParam::DeltaA, -1.5, -0.5, count, AxisUnit::OmegaB).expect("valid")
    }

    /// Δ̃_c/ω_b ∈ [0.01, 1.5].
    pub fn cavity_detuning_axis(count: usize) -> SweepAxis {
        SweepAxis::new(SweepParam::DeltaCEff, 0.01, 1.5, count, AxisUnit::OmegaB).expect("valid")
    }

    /// G_m/G_c ∈ [0, 0.5].
    pub fn magnon_coupling_axis(count: usize) -> SweepAxis {
        SweepAxis::new(SweepParam::CouplingM, 0.0, 0.5, count, AxisUnit::CouplingC).expect("valid")
    }

    /// T ∈ [10, 500] mK.
    pub fn temperature_axis(count: usize) -> SweepAxis {
        SweepAxis::new(SweepParam::Temperature, 0.01, 0.5, count, AxisUnit::Absolute).expect("valid")
    }

    /// G_m/2π ∈ [0.5, 4] MHz, in rad/s.
    pub fn coupling_scan(count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| std::f64::consts::TAU * (0.5e6 + 3.5e6 * i as f64 / (count - 1) as f64))
            .collect()
    }
}

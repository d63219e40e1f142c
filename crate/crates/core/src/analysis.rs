//! Verification of protocols against targets and strong-field convergence
//! sweeps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    classify_gaps, dual_pattern, Cycle, Drive, DualPattern, GapTag, LevelSystem, Protocol,
    TargetDecomposition, Transition,
};
use crate::numkernel::{fidelity, StateVector};
use crate::propagator::{strongfield_forward, TwoLevelDriveParams};
use crate::simulator::evolve;
use crate::synthesis::{synthesize, DriveBudget, SynthesisOptions};

/// Infidelities below this are clamped before taking logarithms.
pub const INFIDELITY_FLOOR: f64 = 1e-12;

/// One row of the per-cycle parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub transitions: Vec<Transition>,
    pub strengths: Vec<f64>,
    pub repeats: u64,
    pub delta1: f64,
    pub delta2: f64,
    pub wait: f64,
    /// `Omega l Delta`
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub class: GapTag,
    pub protocol: Protocol,
    #[serde(with = "crate::serde_complex::vec")]
    pub target: Vec<Complex64>,
    /// Strong-field prediction.
    pub predicted: StateVector,
    /// Exact piecewise-constant evolution.
    pub exact: StateVector,
    pub analytic_fidelity: f64,
    pub exact_fidelity: f64,
    pub cycles: Vec<CycleRow>,
    pub total_duration: f64,
}

/// Rotation angle produced by the drive of `cycle`.
pub fn cycle_angle(system: &LevelSystem, cycle: &Cycle) -> Result<f64> {
    let l = cycle.drive.repeats() as f64;
    let (d1, d2) = cycle.drive.durations();
    let rabi = match &cycle.drive {
        Drive::Single { pulse, .. } => {
            TwoLevelDriveParams::new(system, pulse.transition, pulse.d)?.rabi
        }
        Drive::Dual {
            transitions,
            strengths,
            ..
        } => match dual_pattern(classify_gaps(system).tag, transitions) {
            Some(DualPattern::CommutingBlocks) => {
                TwoLevelDriveParams::new(system, transitions[0], strengths[0])?.rabi
            }
            Some(DualPattern::Ladder) => strengths[0].hypot(strengths[1]),
            None => {
                return Err(Error::InvalidProtocol(format!(
                    "no rotation angle for simultaneous drive of {transitions:?}"
                )))
            }
        },
    };
    Ok(rabi * l * (d2 - d1))
}

/// Runs `protocol` from its initial level through the strong-field maps and
/// the exact simulator and compares both with `target`.
pub fn verify(protocol: &Protocol, target: &TargetDecomposition) -> Result<SynthesisReport> {
    if target.dim() != protocol.dim() {
        return Err(Error::DimensionMismatch {
            expected: protocol.dim(),
            found: target.dim(),
        });
    }
    protocol.validate()?;
    let initial = protocol.initial_state();
    let goal = target.state();
    let (predicted, exact) = rayon::join(
        || strongfield_forward(protocol, &initial),
        || evolve(protocol, &initial),
    );
    let (predicted, exact) = (predicted?, exact?);
    let cycles = protocol
        .cycles
        .iter()
        .map(|c| {
            let (delta1, delta2) = c.drive.durations();
            let (transitions, strengths) = c.drive.couplings().into_iter().unzip();
            Ok(CycleRow {
                transitions,
                strengths,
                repeats: c.drive.repeats(),
                delta1,
                delta2,
                wait: c.wait,
                angle: cycle_angle(&protocol.system, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthesisReport {
        class: classify_gaps(&protocol.system).tag,
        analytic_fidelity: fidelity(&predicted, &goal)?,
        exact_fidelity: fidelity(&exact, &goal)?,
        protocol: protocol.clone(),
        target: target.amplitudes.clone(),
        predicted,
        exact,
        cycles,
        total_duration: protocol.total_duration(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ratio: f64,
    pub fidelity: Option<f64>,
    pub infidelity: Option<f64>,
    /// `"ok"` or the error kind that stopped this point.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

/// Least-squares line `log10(1 - F) = slope * log10(d / omega) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub fit: Option<SlopeFit>,
}

/// Ordinary least squares on `(x, y)`; `None` with fewer than two points or
/// no spread in `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    Some(SlopeFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
    })
}

/// Re-synthesizes `target` at each drive ratio and measures the exact
/// infidelity. Points run in parallel; results keep the order of `ratios`.
pub fn sweep_ratio(
    target: &TargetDecomposition,
    system: &LevelSystem,
    ratios: &[f64],
    options: &SynthesisOptions,
) -> Result<SweepResult> {
    if ratios.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "sweep needs at least 3 ratios, got {}",
            ratios.len()
        )));
    }
    if let Some(r) = ratios.iter().find(|&&r| !(r > 0.5 && r.is_finite())) {
        return Err(Error::InvalidInput(format!("sweep ratio {r} must exceed 0.5")));
    }
    if ratios.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sweep ratios must be strictly increasing".into()));
    }
    let points: Vec<SweepPoint> = ratios
        .par_iter()
        .map(|&ratio| {
            let opts = SynthesisOptions {
                budget: DriveBudget {
                    ratio,
                    ..options.budget
                },
                ..*options
            };
            let outcome = synthesize(target, system, &opts).and_then(|s| {
                let exact = evolve(&s.protocol, &s.protocol.initial_state())?;
                fidelity(&exact, &target.state())
            });
            match outcome {
                Ok(f) => SweepPoint {
                    ratio,
                    fidelity: Some(f),
                    infidelity: Some((1.0 - f).max(0.0)),
                    status: "ok".into(),
                    message: None,
                },
                Err(e) => SweepPoint {
                    ratio,
                    fidelity: None,
                    infidelity: None,
                    status: e.kind().into(),
                    message: Some(e.to_string()),
                },
            }
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.infidelity.map(|inf| (p.ratio.log10(), inf.max(INFIDELITY_FLOOR).log10())))
        .unzip();
    Ok(SweepResult {
        fit: fit_line(&x, &y),
        points,
    })
}

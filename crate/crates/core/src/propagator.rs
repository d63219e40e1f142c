//! Closed-form propagators for square-pulse drives.
//!
//! [`exact_pulse_propagator`] is the exact operator of one constant-polarity
//! segment. Everything named `strongfield_*` (and the System II / System III
//! cycle-1 maps) is the idealised rotation obtained when the drive dominates
//! the transition frequency; those are exact functions of the rotation angle
//! `Omega * l * Delta`, and their distance from the true dynamics is measured
//! against the simulator, not baked in here.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    classify_gaps, dual_pattern, Cycle, Drive, DualPattern, GapTag, LevelSystem, Protocol,
    Transition,
};
use crate::numkernel::{cis, ComplexMatrix, StateVector, I};

/// Sign of the square wave during a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// Two-level drive constants for transition `(m, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelDriveParams {
    pub transition: Transition,
    /// `omega = E_m - E_n`
    pub omega: f64,
    pub d: f64,
    /// `Omega = sqrt(omega^2 / 4 + d^2)`
    pub rabi: f64,
    /// `theta = (E_n + E_m) / 2`
    pub theta: f64,
}

impl TwoLevelDriveParams {
    pub fn new(system: &LevelSystem, transition: Transition, d: f64) -> Result<Self> {
        transition.check(system)?;
        let omega = transition.gap(system);
        Ok(TwoLevelDriveParams {
            transition,
            omega,
            d,
            rabi: (0.25 * omega * omega + d * d).sqrt(),
            theta: 0.5 * (system.energy(transition.upper) + system.energy(transition.lower)),
        })
    }
}

/// Strengths of the simultaneous `(1,2)` and `(2,3)` couplings of an
/// equal-gap three-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SysIIIDriveParams {
    pub d1: f64,
    pub d2: f64,
    /// `Omega_1 = sqrt(d1^2 + d2^2)`
    pub rabi: f64,
}

impl SysIIIDriveParams {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ladder strengths must be positive, got ({d1}, {d2})"
            )));
        }
        Ok(SysIIIDriveParams {
            d1,
            d2,
            rabi: d1.hypot(d2),
        })
    }
}

fn diag_phases(system: &LevelSystem, t: f64) -> ComplexMatrix {
    let n = system.dim();
    let mut u = ComplexMatrix::zeros(n, n);
    for (k, &e) in system.energies().iter().enumerate() {
        u[(k, k)] = cis(-e * t);
    }
    u
}

/// `exp(-i H_0 tau)`.
pub fn free_evolution(system: &LevelSystem, wait: f64) -> ComplexMatrix {
    diag_phases(system, wait)
}

/// Exact `exp(-i (H_0 +/- d sigma_x^{mn}) t)` assembled from the invariant
/// two-level subspace.
///
/// On `{|n>, |m>}` the operator is `e^{-i theta t} [cos(Omega t) - i sin(Omega t)/Omega H_c]`
/// with `H_c = (omega/2)(|m><m| - |n><n|) +/- d sigma_x`; every other level
/// only picks up `e^{-i E_k t}`.
pub fn exact_pulse_propagator(
    system: &LevelSystem,
    params: &TwoLevelDriveParams,
    polarity: Polarity,
    t: f64,
) -> ComplexMatrix {
    let mut u = diag_phases(system, t);
    let (m, n) = params.transition.indices();
    let half = 0.5 * params.omega;
    let coupling = polarity.sign() * params.d;
    let (s, c) = (params.rabi * t).sin_cos();
    let sinc = s / params.rabi;
    let ph = cis(-params.theta * t);

    u[(n, n)] = ph * Complex64::new(c, half * sinc);
    u[(m, m)] = ph * Complex64::new(c, -half * sinc);
    u[(m, n)] = ph * (-I * sinc * coupling);
    u[(n, m)] = u[(m, n)];
    u
}

/// Idealised rotation by `angle` on `{|n>, |m>}` while `elapsed` time
/// passes: `|n> -> e^{-i theta t}[cos a |n> + i sin a |m>]` and likewise for
/// `|m>`; spectators get `e^{-i E_k t}`.
fn strongfield_rotation(
    params: &TwoLevelDriveParams,
    angle: f64,
    elapsed: f64,
    u: &mut ComplexMatrix,
) {
    let (m, n) = params.transition.indices();
    let ph = cis(-params.theta * elapsed);
    let (s, c) = angle.sin_cos();
    u[(n, n)] = ph * c;
    u[(m, m)] = ph * c;
    u[(m, n)] = ph * I * s;
    u[(n, m)] = ph * I * s;
}

/// Strong-field operator of one period `T` with asymmetry `Delta`.
pub fn strongfield_period_map(
    system: &LevelSystem,
    params: &TwoLevelDriveParams,
    delta: f64,
    period: f64,
) -> ComplexMatrix {
    strongfield_lpulse_map(system, params, delta, period, 1)
}

/// Strong-field operator of `l` periods: rotation angle `Omega l Delta`,
/// elapsed time `l T`.
pub fn strongfield_lpulse_map(
    system: &LevelSystem,
    params: &TwoLevelDriveParams,
    delta: f64,
    period: f64,
    l: u64,
) -> ComplexMatrix {
    let lf = l as f64;
    let mut u = diag_phases(system, lf * period);
    strongfield_rotation(params, params.rabi * lf * delta, lf * period, &mut u);
    u
}

/// Cycle-1 operator of a System II spectrum: the `(1,2)` and `(3,4)` blocks
/// rotate independently under one shared square wave.
pub fn sysii_cycle1_map(
    system: &LevelSystem,
    d1: f64,
    d2: f64,
    delta: f64,
    period: f64,
    l: u64,
) -> Result<ComplexMatrix> {
    let tag = classify_gaps(system).tag;
    if tag != GapTag::SystemII {
        return Err(Error::WrongGapClass {
            expected: GapTag::SystemII,
            found: tag,
        });
    }
    let lf = l as f64;
    let mut u = diag_phases(system, lf * period);
    for (tr, d) in [(Transition { upper: 2, lower: 1 }, d1), (Transition { upper: 4, lower: 3 }, d2)] {
        let p = TwoLevelDriveParams::new(system, tr, d)?;
        strongfield_rotation(&p, p.rabi * lf * delta, lf * period, &mut u);
    }
    Ok(u)
}

/// Cycle-1 operator of the equal-gap three-level ladder in the frame where
/// `E_2 = 0` and the bare energies are negligible against the drive.
///
/// Columns are the images of `|1>, |2>, |3>` after `l` periods; with
/// `a = Omega_1 l Delta`:
/// `|1> -> [1 + d1^2/W^2 (cos a - 1)] |1> + i d1/W sin a |2> + d1 d2/W^2 (cos a - 1) |3>`.
pub fn sysiii_cycle1_map(params: &SysIIIDriveParams, delta: f64, l: u64) -> ComplexMatrix {
    let SysIIIDriveParams { d1, d2, rabi } = *params;
    let (s, c) = (rabi * l as f64 * delta).sin_cos();
    let w2 = rabi * rabi;
    let cm1 = c - 1.0;
    let is1 = I * (d1 / rabi * s);
    let is2 = I * (d2 / rabi * s);
    let cross = Complex64::from(d1 * d2 / w2 * cm1);

    let mut u = ComplexMatrix::zeros(3, 3);
    // |1>
    u[(0, 0)] = Complex64::from(1.0 + d1 * d1 / w2 * cm1);
    u[(1, 0)] = is1;
    u[(2, 0)] = cross;
    // |2>
    u[(0, 1)] = is1;
    u[(1, 1)] = Complex64::from(c);
    u[(2, 1)] = is2;
    // |3>
    u[(0, 2)] = cross;
    u[(1, 2)] = is2;
    u[(2, 2)] = Complex64::from(1.0 + d2 * d2 / w2 * cm1);
    u
}

/// Strong-field operator of a whole cycle (drive followed by its wait), in
/// the lab gauge of `system`.
pub fn strongfield_cycle_map(system: &LevelSystem, cycle: &Cycle) -> Result<ComplexMatrix> {
    let drive = match &cycle.drive {
        Drive::Single { pulse, repeats } => {
            let p = TwoLevelDriveParams::new(system, pulse.transition, pulse.d)?;
            strongfield_lpulse_map(system, &p, pulse.asymmetry(), pulse.period(), *repeats)
        }
        Drive::Dual {
            transitions,
            strengths,
            delta1,
            delta2,
            repeats,
        } => {
            let tag = classify_gaps(system).tag;
            let delta = delta2 - delta1;
            let period = delta1 + delta2;
            match dual_pattern(tag, transitions) {
                Some(DualPattern::CommutingBlocks) => {
                    sysii_cycle1_map(system, strengths[0], strengths[1], delta, period, *repeats)?
                }
                Some(DualPattern::Ladder) => {
                    let p = SysIIIDriveParams::new(strengths[0], strengths[1])?;
                    // undo the E_2 = 0 centering: a global phase only
                    let global = cis(-system.energy(2) * *repeats as f64 * period);
                    sysiii_cycle1_map(&p, delta, *repeats).map(|x| x * global)
                }
                None => {
                    return Err(Error::InvalidProtocol(format!(
                        "no closed form for simultaneous drive of {transitions:?} on {tag:?}"
                    )))
                }
            }
        }
    };
    Ok(free_evolution(system, cycle.wait) * drive)
}

/// Composes the strong-field cycle maps of a protocol.
pub fn strongfield_protocol_map(protocol: &Protocol) -> Result<ComplexMatrix> {
    let n = protocol.dim();
    protocol
        .cycles
        .iter()
        .try_fold(ComplexMatrix::identity(n, n), |acc, cycle| {
            Ok(strongfield_cycle_map(&protocol.system, cycle)? * acc)
        })
}

/// Strong-field prediction of the final state from `initial`.
pub fn strongfield_forward(protocol: &Protocol, initial: &StateVector) -> Result<StateVector> {
    if initial.dim() != protocol.dim() {
        return Err(Error::DimensionMismatch {
            expected: protocol.dim(),
            found: initial.dim(),
        });
    }
    let mut state = initial.clone();
    for cycle in &protocol.cycles {
        state = state.apply(&strongfield_cycle_map(&protocol.system, cycle)?);
    }
    Ok(state)
}

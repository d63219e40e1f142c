//! Level systems, gap classification, pulses, cycles, protocols and target
//! states.
//!
//! Level labels in this module are 1-based (`|1>` is the lowest level), as in
//! the usual physics notation; `Transition::indices` converts to 0-based
//! matrix indices.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::StateVector;

/// Relative tolerance for deciding that two gaps are equal.
pub const GAP_RTOL: f64 = 1e-9;
/// Relative tolerance on the resonance condition `2 pi / T = E_m - E_n`.
pub const RESONANCE_RTOL: f64 = 1e-9;
/// Allowed deviation of a target's norm from one before it is rejected.
pub const TARGET_NORM_TOL: f64 = 1e-8;

pub(crate) fn rel_eq(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}

/// Non-degenerate spectrum `E_1 < E_2 < ... < E_N` (hbar = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLevelSystem")]
pub struct LevelSystem {
    energies: Vec<f64>,
}

#[derive(Deserialize)]
struct RawLevelSystem {
    energies: Vec<f64>,
}

impl TryFrom<RawLevelSystem> for LevelSystem {
    type Error = Error;
    fn try_from(raw: RawLevelSystem) -> Result<Self> {
        LevelSystem::new(raw.energies)
    }
}

impl LevelSystem {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a level system needs at least 2 energies, got {}",
                energies.len()
            )));
        }
        if let Some(k) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidInput(format!("energy E_{} is not finite", k + 1)));
        }
        if let Some(k) = energies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Degenerate { index: k + 2 });
        }
        Ok(LevelSystem { energies })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `E_k` for a 1-based level label.
    pub fn energy(&self, level: usize) -> f64 {
        self.energies[level - 1]
    }

    /// Adjacent gaps `mu_i = E_{i+1} - E_i`.
    pub fn gaps(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same spectrum moved by a constant.
    pub fn shifted(&self, offset: f64) -> LevelSystem {
        LevelSystem {
            energies: self.energies.iter().map(|e| e + offset).collect(),
        }
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.dim() {
            Err(Error::InvalidIndex(level))
        } else {
            Ok(())
        }
    }

    pub fn classify(&self) -> GapClass {
        classify_gaps(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GapTag {
    /// First gap distinct, all remaining gaps equal (N >= 3).
    SystemI,
    /// Four levels with `mu_1 = mu_3 != mu_2`.
    SystemII,
    /// Three levels with equal gaps.
    SystemIII,
    AllDistinct,
    Other,
}

impl fmt::Display for GapTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapClass {
    pub tag: GapTag,
    pub gaps: Vec<f64>,
}

/// Classifies the adjacent-gap pattern of a spectrum.
///
/// A three-level system with two different gaps matches both the System I
/// pattern and the all-distinct pattern; System I wins because it has a
/// synthesis route.
pub fn classify_gaps(system: &LevelSystem) -> GapClass {
    let gaps = system.gaps();
    let eq = |a: f64, b: f64| rel_eq(a, b, GAP_RTOL);
    let n = system.dim();

    let tag = if n == 3 && eq(gaps[0], gaps[1]) {
        GapTag::SystemIII
    } else if n == 4 && eq(gaps[0], gaps[2]) && !eq(gaps[0], gaps[1]) {
        GapTag::SystemII
    } else if n >= 3 && !eq(gaps[0], gaps[1]) && gaps[1..].iter().all(|&g| eq(g, gaps[1])) {
        GapTag::SystemI
    } else if n >= 3
        && (0..gaps.len()).all(|i| (i + 1..gaps.len()).all(|j| !eq(gaps[i], gaps[j])))
    {
        GapTag::AllDistinct
    } else {
        GapTag::Other
    };
    GapClass { tag, gaps }
}

/// A driven pair of levels `(upper, lower)`, 1-based, `upper > lower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub upper: usize,
    pub lower: usize,
}

impl Transition {
    pub fn new(upper: usize, lower: usize) -> Result<Self> {
        if lower == 0 || upper <= lower {
            return Err(Error::InvalidInput(format!(
                "transition ({upper},{lower}) must satisfy upper > lower >= 1"
            )));
        }
        Ok(Transition { upper, lower })
    }

    /// 0-based `(upper, lower)` matrix indices.
    pub fn indices(&self) -> (usize, usize) {
        (self.upper - 1, self.lower - 1)
    }

    pub fn check(&self, system: &LevelSystem) -> Result<()> {
        Transition::new(self.upper, self.lower)?;
        system.check_level(self.upper)?;
        system.check_level(self.lower)
    }

    /// Transition frequency `E_m - E_n`.
    pub fn gap(&self, system: &LevelSystem) -> f64 {
        system.energy(self.upper) - system.energy(self.lower)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.upper, self.lower)
    }
}

/// `T = 2 pi / (E_m - E_n)`.
pub fn resonant_period(system: &LevelSystem, m: usize, n: usize) -> Result<f64> {
    let tr = Transition::new(m, n)?;
    tr.check(system)?;
    Ok(TAU / tr.gap(system))
}

/// One period of the alternating square wave: `+d` for `delta1`, then `-d`
/// for `delta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub transition: Transition,
    /// Field amplitude times coupling.
    pub d: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Pulse {
    pub fn period(&self) -> f64 {
        self.delta1 + self.delta2
    }

    /// `Delta = delta2 - delta1`.
    pub fn asymmetry(&self) -> f64 {
        self.delta2 - self.delta1
    }

    pub fn validate(&self, system: &LevelSystem) -> Result<()> {
        self.transition.check(system)?;
        check_timing(self.delta1, self.delta2, self.transition.gap(system))?;
        if !self.d.is_finite() {
            return Err(Error::InvalidProtocol("drive strength is not finite".into()));
        }
        Ok(())
    }
}

fn check_timing(delta1: f64, delta2: f64, gap: f64) -> Result<()> {
    if !(delta1 >= 0.0 && delta2 >= 0.0 && delta1.is_finite() && delta2.is_finite()) {
        return Err(Error::InvalidProtocol(format!(
            "pulse durations must be finite and non-negative, got ({delta1}, {delta2})"
        )));
    }
    let period = delta1 + delta2;
    if !rel_eq(TAU / period, gap, RESONANCE_RTOL) {
        return Err(Error::InvalidProtocol(format!(
            "period {period} is not resonant with gap {gap}"
        )));
    }
    if (delta2 - delta1).abs() >= period {
        return Err(Error::InvalidProtocol("|delta2 - delta1| must be below the period".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    /// `repeats` periods of a single resonant pulse; `repeats = 0` switches
    /// the drive off.
    Single { pulse: Pulse, repeats: u64 },
    /// One square wave simultaneously driving several transitions that share
    /// a gap, with per-transition strengths.
    Dual {
        transitions: Vec<Transition>,
        strengths: Vec<f64>,
        delta1: f64,
        delta2: f64,
        repeats: u64,
    },
}

impl Drive {
    pub fn repeats(&self) -> u64 {
        match self {
            Drive::Single { repeats, .. } | Drive::Dual { repeats, .. } => *repeats,
        }
    }

    pub fn durations(&self) -> (f64, f64) {
        match self {
            Drive::Single { pulse, .. } => (pulse.delta1, pulse.delta2),
            Drive::Dual { delta1, delta2, .. } => (*delta1, *delta2),
        }
    }

    pub fn period(&self) -> f64 {
        let (a, b) = self.durations();
        a + b
    }

    /// `(transition, strength)` pairs that are switched on together.
    pub fn couplings(&self) -> Vec<(Transition, f64)> {
        match self {
            Drive::Single { pulse, .. } => vec![(pulse.transition, pulse.d)],
            Drive::Dual {
                transitions,
                strengths,
                ..
            } => transitions.iter().copied().zip(strengths.iter().copied()).collect(),
        }
    }
}

/// A resonant pulse train followed by free evolution for `wait`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub drive: Drive,
    pub wait: f64,
}

impl Cycle {
    pub fn duration(&self) -> f64 {
        self.drive.repeats() as f64 * self.drive.period() + self.wait
    }
}

fn default_initial() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub system: LevelSystem,
    /// 1-based label of the initial basis state.
    #[serde(default = "default_initial")]
    pub initial: usize,
    pub cycles: Vec<Cycle>,
}

impl Protocol {
    pub fn new(system: LevelSystem, cycles: Vec<Cycle>) -> Self {
        Protocol {
            system,
            initial: 1,
            cycles,
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn total_duration(&self) -> f64 {
        self.cycles.iter().map(Cycle::duration).sum()
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::basis(self.dim(), self.initial - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let sys = &self.system;
        sys.check_level(self.initial)
            .map_err(|_| Error::InvalidProtocol(format!("initial level {} out of range", self.initial)))?;
        let class = classify_gaps(sys).tag;
        for (i, cycle) in self.cycles.iter().enumerate() {
            let ctx = |e: Error| Error::InvalidProtocol(format!("cycle {}: {e}", i + 1));
            if !(cycle.wait >= 0.0 && cycle.wait.is_finite()) {
                return Err(ctx(Error::InvalidInput(format!("wait {} must be >= 0", cycle.wait))));
            }
            match &cycle.drive {
                Drive::Single { pulse, .. } => pulse.validate(sys).map_err(ctx)?,
                Drive::Dual {
                    transitions,
                    strengths,
                    delta1,
                    delta2,
                    ..
                } => {
                    if transitions.len() != strengths.len() {
                        return Err(ctx(Error::InvalidInput(
                            "one strength per transition required".into(),
                        )));
                    }
                    if dual_pattern(class, transitions).is_none() {
                        return Err(ctx(Error::InvalidInput(format!(
                            "simultaneous drive of {transitions:?} is not supported for {class:?}"
                        ))));
                    }
                    for tr in transitions {
                        tr.check(sys).map_err(ctx)?;
                        check_timing(*delta1, *delta2, tr.gap(sys)).map_err(ctx)?;
                    }
                    if strengths.iter().any(|d| !d.is_finite()) {
                        return Err(ctx(Error::InvalidInput("strength is not finite".into())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Which closed-form family a simultaneous drive belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualPattern {
    /// (1,2) and (3,4) of a System II spectrum: two commuting blocks.
    CommutingBlocks,
    /// (1,2) and (2,3) of a System III spectrum: non-commuting ladder.
    Ladder,
}

pub fn dual_pattern(class: GapTag, transitions: &[Transition]) -> Option<DualPattern> {
    let pairs: Vec<(usize, usize)> = transitions.iter().map(|t| (t.upper, t.lower)).collect();
    match (class, pairs.as_slice()) {
        (GapTag::SystemII, [(2, 1), (4, 3)]) => Some(DualPattern::CommutingBlocks),
        (GapTag::SystemIII, [(2, 1), (3, 2)]) => Some(DualPattern::Ladder),
        _ => None,
    }
}

/// Target written as `a_k = C_k gamma_k`, `C_k >= 0`, `|gamma_k| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDecomposition {
    #[serde(with = "crate::serde_complex::vec")]
    pub amplitudes: Vec<Complex64>,
    pub magnitudes: Vec<f64>,
    #[serde(with = "crate::serde_complex::vec")]
    pub phases: Vec<Complex64>,
}

impl TargetDecomposition {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn state(&self) -> StateVector {
        StateVector::new(self.amplitudes.clone())
    }
}

/// Splits a (near-)normalized amplitude vector into moduli and phases.
pub fn validate_target(amplitudes: &[Complex64]) -> Result<TargetDecomposition> {
    if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::InvalidInput("target amplitude is not finite".into()));
    }
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() > TARGET_NORM_TOL {
        return Err(Error::InvalidInput(format!(
            "target norm {norm} differs from 1 by more than {TARGET_NORM_TOL:e}"
        )));
    }
    let amplitudes: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
    let magnitudes: Vec<f64> = amplitudes.iter().map(|a| a.norm()).collect();
    let phases = amplitudes
        .iter()
        .zip(&magnitudes)
        .map(|(a, &m)| if m > 0.0 { a / m } else { Complex64::ONE })
        .collect();
    Ok(TargetDecomposition {
        amplitudes,
        magnitudes,
        phases,
    })
}

/// Like [`validate_target`] but rescales any non-zero vector first.
pub fn normalize_target(amplitudes: &[Complex64]) -> Result<TargetDecomposition> {
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let scaled: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
    validate_target(&scaled)
}

/// Haar-random normalized amplitudes of dimension `dim`.
pub fn random_target<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c, cis};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn sys(e: &[f64]) -> LevelSystem {
        LevelSystem::new(e.to_vec()).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0, 3.0, 5.0])).tag, GapTag::SystemI);
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0, 3.0, 4.0])).tag, GapTag::SystemII);
        assert_eq!(classify_gaps(&sys(&[-1.0, 0.0, 1.0])).tag, GapTag::SystemIII);
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0])).tag, GapTag::Other);
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0, 3.0, 6.0, 10.0])).tag, GapTag::AllDistinct);
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0, 2.0, 4.0])).tag, GapTag::Other);
        assert_eq!(classify_gaps(&sys(&[0.0, 1.0, 2.0, 3.0])).tag, GapTag::Other);
        let c = classify_gaps(&sys(&[0.0, 1.0, 3.0, 5.0]));
        assert_eq!(c.gaps, vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn classify_tolerates_rounding() {
        let e = [0.1, 0.2, 0.3];
        assert_eq!(classify_gaps(&sys(&e)).tag, GapTag::SystemIII);
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        assert_eq!(LevelSystem::new(vec![0.0, 1.0, 1.0]), Err(Error::Degenerate { index: 3 }));
        assert!(LevelSystem::new(vec![0.0]).is_err());
        let parsed: std::result::Result<LevelSystem, _> =
            serde_json::from_str(r#"{"energies":[2.0,1.0]}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn resonant_periods() {
        assert!((resonant_period(&sys(&[0.0, 2.0]), 2, 1).unwrap() - PI).abs() < 1e-15);
        assert!((resonant_period(&sys(&[0.0, 1.0, 3.0]), 3, 1).unwrap() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((resonant_period(&sys(&[-1.0, 0.0, 1.0]), 3, 1).unwrap() - PI).abs() < 1e-15);
        assert!(resonant_period(&sys(&[0.0, 2.0]), 1, 2).is_err());
        assert!(resonant_period(&sys(&[0.0, 2.0]), 3, 1).is_err());
    }

    #[test]
    fn target_decomposition_examples() {
        let t = validate_target(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(t.magnitudes, vec![1.0, 0.0, 0.0]);
        assert_eq!(t.phases, vec![Complex64::ONE; 3]);

        let t = validate_target(&[c(0.0, 0.0), c(0.0, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        assert!((t.magnitudes[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((t.phases[1] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((t.phases[2] - c(1.0, 0.0)).norm() < 1e-15);

        let t = validate_target(&[cis(0.3) * 0.6, cis(-1.1) * 0.8]).unwrap();
        assert!((t.magnitudes[0] - 0.6).abs() < 1e-15 && (t.magnitudes[1] - 0.8).abs() < 1e-15);
        assert!((t.phases[0] - cis(0.3)).norm() < 1e-15);
        assert!((t.phases[1] - cis(-1.1)).norm() < 1e-15);
    }

    #[test]
    fn target_errors() {
        assert_eq!(validate_target(&[Complex64::ZERO; 2]), Err(Error::ZeroVector));
        assert!(matches!(
            validate_target(&[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::InvalidInput(_))
        ));
        let t = normalize_target(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((t.magnitudes[0] - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn protocol_validation() {
        let s = sys(&[0.0, 1.0, 3.0]);
        let t = TAU;
        let good = Pulse {
            transition: Transition::new(2, 1).unwrap(),
            d: 100.0,
            delta1: t / 2.0 - 0.01,
            delta2: t / 2.0 + 0.01,
        };
        let p = Protocol::new(
            s.clone(),
            vec![Cycle {
                drive: Drive::Single { pulse: good, repeats: 3 },
                wait: 0.5,
            }],
        );
        p.validate().unwrap();

        let mut off = p.clone();
        if let Drive::Single { pulse, .. } = &mut off.cycles[0].drive {
            pulse.delta2 += 0.1;
        }
        assert!(off.validate().is_err());

        let mut neg = p.clone();
        neg.cycles[0].wait = -1.0;
        assert!(neg.validate().is_err());

        let mut zero = p.clone();
        if let Drive::Single { repeats, .. } = &mut zero.cycles[0].drive {
            *repeats = 0;
        }
        // drive switched off: a pure wait
        assert!(zero.validate().is_ok());

        let dual = Protocol::new(
            s,
            vec![Cycle {
                drive: Drive::Dual {
                    transitions: vec![Transition::new(2, 1).unwrap(), Transition::new(3, 2).unwrap()],
                    strengths: vec![1.0, 1.0],
                    delta1: PI,
                    delta2: PI,
                    repeats: 1,
                },
                wait: 0.0,
            }],
        );
        // (0,1,3) is System I: no ladder drive allowed
        assert!(dual.validate().is_err());
    }

    #[test]
    fn protocol_json_round_trip() {
        let s = sys(&[-1.0, 0.0, 1.0]);
        let p = Protocol::new(
            s,
            vec![Cycle {
                drive: Drive::Dual {
                    transitions: vec![Transition::new(2, 1).unwrap(), Transition::new(3, 2).unwrap()],
                    strengths: vec![10.0, 10.0],
                    delta1: PI - 0.1,
                    delta2: PI + 0.1,
                    repeats: 2,
                },
                wait: 0.25,
            }],
        );
        p.validate().unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: Protocol = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}

//! Inverse problem: target amplitudes to a concrete [`Protocol`].
//!
//! Every route splits the target `a_k = C_k gamma_k` into rotation angles
//! (from the moduli) and free-evolution waits (from the phases). The waits
//! only enter through accumulated phases `sum_i E_k tau'_i`, so each route
//! reduces them to a chain of congruences `coef * x = residual (mod 2 pi)`
//! over nested partial sums, solved by [`solve_wait_chain`].
//!
//! Levels whose target modulus vanishes carry no phase information; they are
//! given the phase the zero-wait protocol would produce, which keeps waits
//! at zero for targets generated by a forward run.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{verify, SynthesisReport};
use crate::error::{Error, Result};
use crate::model::{
    classify_gaps, Cycle, Drive, GapTag, LevelSystem, Protocol, Pulse, TargetDecomposition,
    Transition,
};
use crate::numkernel::{cis, I};
use crate::propagator::{SysIIIDriveParams, TwoLevelDriveParams};

/// Moduli at or below this are treated as zero amplitudes.
pub const AMPLITUDE_TOL: f64 = 1e-12;
/// Upper bound on the branch integer of any wait congruence.
pub const BRANCH_BOUND: u32 = 64;
/// Largest relative deviation between redundant angle determinations.
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Drive strength and pulse-count limits used when realizing angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriveBudget {
    /// `d / omega` for every driven transition.
    pub ratio: f64,
    pub l_max: u64,
    /// Largest allowed `|Delta| / T`.
    pub duty: f64,
}

impl Default for DriveBudget {
    fn default() -> Self {
        DriveBudget {
            ratio: 100.0,
            l_max: 1_000_000,
            duty: 0.9,
        }
    }
}

impl DriveBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidInput(format!("drive ratio must be positive, got {}", self.ratio)));
        }
        if self.l_max < 1 {
            return Err(Error::InvalidInput("l_max must be at least 1".into()));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::InvalidInput(format!("duty must lie in (0, 1), got {}", self.duty)));
        }
        Ok(())
    }
}

/// Relative strengths of the `(1,2)` and `(2,3)` couplings of an equal-gap
/// ladder. Only `d2 / d1` matters; the absolute scale is set by
/// [`ladder_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderWeights {
    pub d1: f64,
    pub d2: f64,
}

impl Default for LadderWeights {
    fn default() -> Self {
        LadderWeights { d1: 1.0, d2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub budget: DriveBudget,
    pub ladder: LadderWeights,
}

/// Rotation angles `Omega_i l_i Delta_i`, one per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSchedule {
    pub angles: Vec<f64>,
}

/// Waits after each cycle and the branch integer picked for each congruence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitSchedule {
    pub waits: Vec<f64>,
    pub branches: Vec<u32>,
}

/// Physical pulse train realizing one rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRealization {
    pub repeats: u64,
    /// `Delta = angle / (Omega l)`; `delta2 - delta1` equals it up to
    /// rounding on the scale of the period.
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub d: f64,
    pub rabi: f64,
    pub period: f64,
}

impl PulseRealization {
    /// Driven time `l T` of the emitted cycle.
    pub fn elapsed(&self) -> f64 {
        self.emitted_repeats() as f64 * self.period
    }

    /// `Omega l Delta`
    pub fn angle(&self) -> f64 {
        self.rabi * self.repeats as f64 * self.delta
    }

    /// Zero-angle trains are emitted with the drive switched off, so an
    /// identity step stays an identity under the exact dynamics too.
    fn emitted_repeats(&self) -> u64 {
        if self.delta == 0.0 {
            0
        } else {
            self.repeats
        }
    }
}

/// Realizes `angle` at rotation rate `rabi` with pulses of period `period`.
pub fn realize_rotation(
    angle: f64,
    rabi: f64,
    period: f64,
    d: f64,
    budget: &DriveBudget,
) -> Result<PulseRealization> {
    budget.validate()?;
    if !(angle >= 0.0 && angle.is_finite()) {
        return Err(Error::InvalidInput(format!("rotation angle must be non-negative, got {angle}")));
    }
    let per_pulse = rabi * budget.duty * period;
    let needed = (angle / per_pulse).ceil().max(1.0);
    if needed > budget.l_max as f64 {
        return Err(Error::BudgetExceeded {
            needed: if needed >= u64::MAX as f64 { u64::MAX } else { needed as u64 },
            max: budget.l_max,
        });
    }
    let repeats = needed as u64;
    let delta = angle / (rabi * repeats as f64);
    Ok(PulseRealization {
        repeats,
        delta,
        delta1: 0.5 * (period - delta),
        delta2: 0.5 * (period + delta),
        d,
        rabi,
        period,
    })
}

/// Resonant pulse train on `transition` with `d = ratio * omega`.
pub fn realize_angle(
    angle: f64,
    transition: Transition,
    system: &LevelSystem,
    budget: &DriveBudget,
) -> Result<PulseRealization> {
    let omega = {
        transition.check(system)?;
        transition.gap(system)
    };
    let params = TwoLevelDriveParams::new(system, transition, budget.ratio * omega)?;
    realize_rotation(angle, params.rabi, TAU / omega, params.d, budget)
}

fn single_cycle(transition: Transition, p: &PulseRealization, wait: f64) -> Cycle {
    Cycle {
        drive: Drive::Single {
            pulse: Pulse {
                transition,
                d: p.d,
                delta1: p.delta1,
                delta2: p.delta2,
            },
            repeats: p.emitted_repeats(),
        },
        wait,
    }
}

fn dual_cycle(transitions: [Transition; 2], strengths: [f64; 2], p: &PulseRealization, wait: f64) -> Cycle {
    Cycle {
        drive: Drive::Dual {
            transitions: transitions.to_vec(),
            strengths: strengths.to_vec(),
            delta1: p.delta1,
            delta2: p.delta2,
            repeats: p.emitted_repeats(),
        },
        wait,
    }
}

fn tr(upper: usize, lower: usize) -> Transition {
    Transition { upper, lower }
}

// ---------------------------------------------------------------------------
// Wait congruences

/// One congruence `coef * x = residual (mod 2 pi)`; `residual: None` leaves
/// `x` unconstrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLink {
    pub coef: f64,
    pub residual: Option<f64>,
}

/// Solves a chain of congruences for `0 <= x_0 <= x_1 <= ...`, taking each
/// `x_j` as the smallest solution not below `x_{j-1}`. Returns the values and
/// the branch integers used.
pub fn solve_wait_chain(links: &[ChainLink]) -> Result<(Vec<f64>, Vec<u32>)> {
    let mut lower = 0.0_f64;
    let mut values = Vec::with_capacity(links.len());
    let mut branches = Vec::with_capacity(links.len());
    for link in links {
        if !(link.coef > 0.0 && link.coef.is_finite()) {
            return Err(Error::InvalidInput(format!("wait coefficient must be positive, got {}", link.coef)));
        }
        let Some(residual) = link.residual else {
            values.push(lower);
            branches.push(0);
            continue;
        };
        let period = TAU / link.coef;
        let mut x0 = (residual / link.coef).rem_euclid(period);
        if period - x0 < 1e-9 * period {
            x0 = 0.0;
        }
        let n = ((lower - x0) / period - 1e-9).ceil().max(0.0);
        if n > BRANCH_BOUND as f64 {
            return Err(Error::BranchSearchExhausted { bound: BRANCH_BOUND });
        }
        let x = (x0 + n * period).max(lower);
        values.push(x);
        branches.push(n as u32);
        lower = x;
    }
    Ok((values, branches))
}

/// Relative phases `arg[(c_k / c_1) / (t_k / t_1)]` between the zero-wait
/// forward phases `c` and the target phases `t`, for every level.
///
/// Target phases of zero-modulus levels are replaced by the forward phase
/// relative to the largest component.
pub fn phase_residuals(target: &TargetDecomposition, zero_wait: &[Complex64]) -> Vec<f64> {
    let mags = &target.magnitudes;
    let r = (0..mags.len())
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .unwrap_or(0);
    let t: Vec<Complex64> = (0..mags.len())
        .map(|k| {
            if mags[k] <= AMPLITUDE_TOL {
                target.phases[r] * zero_wait[k] * zero_wait[r].conj()
            } else {
                target.phases[k]
            }
        })
        .collect();
    (0..mags.len())
        .map(|k| (zero_wait[k] * zero_wait[0].conj() * t[k].conj() * t[0]).arg())
        .collect()
}

fn check_dims(target: &TargetDecomposition, system: &LevelSystem) -> Result<()> {
    if target.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: target.dim(),
        });
    }
    Ok(())
}

fn require_class(system: &LevelSystem, expected: GapTag) -> Result<()> {
    let found = classify_gaps(system).tag;
    if found != expected {
        return Err(Error::WrongGapClass { expected, found });
    }
    Ok(())
}

/// Synthesized protocol together with the solved parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub class: GapTag,
    pub protocol: Protocol,
    pub angles: AngleSchedule,
    pub waits: WaitSchedule,
}

// ---------------------------------------------------------------------------
// System I: cycle m rotates |1> into |m+1>

/// Moduli after the chain of rotations `angles`:
/// `C_1 = prod cos`, `C_k = sin phi_{k-1} prod_{i<k-1} cos phi_i`.
pub fn chain_amplitudes(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    out.push(0.0);
    let mut prod = 1.0;
    for &phi in angles {
        out.push(phi.sin() * prod);
        prod *= phi.cos();
    }
    out[0] = prod;
    out
}

/// Chain angles reproducing the moduli `c` (`c_k >= 0`, unit norm).
///
/// `phi_{k-1} = atan2(C_k, sqrt(C_1^2 + sum_{j>k} C_j^2))`, which equals the
/// arcsine recursion `arcsin(C_k / prod_{i<k-1} cos phi_i)` for normalized
/// moduli without losing accuracy when a product of cosines is tiny.
pub fn angles_sys1(c: &[f64]) -> Result<AngleSchedule> {
    if c.len() < 2 {
        return Err(Error::InvalidInput("chain needs at least two levels".into()));
    }
    if c.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput("moduli must be finite and non-negative".into()));
    }
    let total: f64 = c.iter().map(|x| x * x).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::UnreachableAmplitudes { argument: total.sqrt() });
    }
    let n = c.len();
    let mut tail = c[0] * c[0];
    let mut angles = vec![0.0; n - 1];
    for k in (1..n).rev() {
        angles[k - 1] = c[k].atan2(tail.sqrt());
        tail += c[k] * c[k];
    }
    Ok(AngleSchedule { angles })
}

fn sys1_theta(system: &LevelSystem, m: usize) -> f64 {
    0.5 * (system.energy(1) + system.energy(m + 1))
}

/// Unit phases `gamma_k` of the System I chain after `elapsed.len()` cycles
/// with drive durations `elapsed[i] = l_i T_i` and waits `waits[i]`.
/// Levels not yet reached get phase 1.
pub fn sys1_phases(system: &LevelSystem, elapsed: &[f64], waits: &[f64]) -> Vec<Complex64> {
    let m = elapsed.len();
    let e = system.energies();
    let mut out = vec![Complex64::ONE; system.dim()];
    let drive: f64 = (0..m).map(|i| sys1_theta(system, i + 1) * elapsed[i]).sum();
    out[0] = cis(-(drive + e[0] * waits[..m].iter().sum::<f64>()));
    for k in 2..=m + 1 {
        let ek = e[k - 1];
        let mut phase = 0.0;
        phase += ek * waits[k - 2..m].iter().sum::<f64>();
        phase += e[0] * waits[..k - 2].iter().sum::<f64>();
        phase += ek * elapsed[k - 1..m].iter().sum::<f64>();
        phase += (0..k - 1).map(|i| sys1_theta(system, i + 1) * elapsed[i]).sum::<f64>();
        out[k - 1] = I * cis(-phase);
    }
    out
}

/// Closed-form state of the System I chain from `|1>`.
pub fn sys1_closed_form(
    system: &LevelSystem,
    angles: &[f64],
    elapsed: &[f64],
    waits: &[f64],
) -> Vec<Complex64> {
    let mut mags = chain_amplitudes(angles);
    mags.resize(system.dim(), 0.0);
    sys1_phases(system, elapsed, waits)
        .into_iter()
        .zip(mags)
        .map(|(g, c)| g * c)
        .collect()
}

/// System I state built cycle by cycle from the single-cycle recursion.
pub fn sys1_recursion(
    system: &LevelSystem,
    angles: &[f64],
    elapsed: &[f64],
    waits: &[f64],
) -> Vec<Complex64> {
    let e = system.energies();
    let mut a = vec![Complex64::ZERO; system.dim()];
    a[0] = Complex64::ONE;
    for m in 1..=angles.len() {
        let (phi, l_t, tau) = (angles[m - 1], elapsed[m - 1], waits[m - 1]);
        let drive = cis(-sys1_theta(system, m) * l_t);
        let a1 = a[0];
        a[0] = cis(-e[0] * tau) * drive * phi.cos() * a1;
        a[m] = cis(-e[m] * tau) * drive * I * phi.sin() * a1;
        for k in 1..m {
            a[k] *= cis(-e[k] * (l_t + tau));
        }
    }
    a
}

/// Waits of the System I chain, given the realized pulse trains.
pub fn waits_sys1(
    target: &TargetDecomposition,
    realizations: &[PulseRealization],
    system: &LevelSystem,
) -> Result<WaitSchedule> {
    check_dims(target, system)?;
    let n = system.dim();
    if realizations.len() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: realizations.len(),
        });
    }
    let elapsed: Vec<f64> = realizations.iter().map(PulseRealization::elapsed).collect();
    let zero = sys1_phases(system, &elapsed, &vec![0.0; n - 1]);
    let residuals = phase_residuals(target, &zero);
    let e = system.energies();
    // level k constrains S_{k-1} = sum_{i >= k-1} tau'_i; innermost is S_{N-1}
    let links: Vec<ChainLink> = (2..=n)
        .rev()
        .map(|k| ChainLink {
            coef: e[k - 1] - e[0],
            residual: Some(residuals[k - 1]),
        })
        .collect();
    let (sums, mut branches) = solve_wait_chain(&links)?;
    let mut sums = sums;
    sums.reverse();
    branches.reverse();
    sums.push(0.0);
    let waits = (0..n - 1).map(|j| sums[j] - sums[j + 1]).collect();
    Ok(WaitSchedule { waits, branches })
}

/// System I synthesis (also used for two-level systems).
pub fn synth_sys1(
    target: &TargetDecomposition,
    system: &LevelSystem,
    budget: &DriveBudget,
) -> Result<Synthesis> {
    check_dims(target, system)?;
    let class = classify_gaps(system).tag;
    if class != GapTag::SystemI && system.dim() != 2 {
        return Err(Error::WrongGapClass {
            expected: GapTag::SystemI,
            found: class,
        });
    }
    let angles = angles_sys1(&target.magnitudes)?;
    let realizations = angles
        .angles
        .iter()
        .enumerate()
        .map(|(i, &phi)| realize_angle(phi, tr(i + 2, 1), system, budget))
        .collect::<Result<Vec<_>>>()?;
    let waits = waits_sys1(target, &realizations, system)?;
    let cycles = realizations
        .iter()
        .enumerate()
        .map(|(i, p)| single_cycle(tr(i + 2, 1), p, waits.waits[i]))
        .collect();
    Ok(Synthesis {
        class,
        protocol: Protocol::new(system.clone(), cycles),
        angles,
        waits,
    })
}

// ---------------------------------------------------------------------------
// System II: (1,2)+(3,4) together, then (1,4), then (2,3)

/// Moduli after the three System II rotations.
pub fn sys2_amplitudes(angles: &[f64]) -> Vec<f64> {
    let (p1, p2, p3) = (angles[0], angles[1], angles[2]);
    vec![
        p2.cos() * p1.cos(),
        p3.cos() * p1.sin(),
        p3.sin() * p1.sin(),
        p2.sin() * p1.cos(),
    ]
}

pub fn angles_sys2(c: &[f64]) -> Result<AngleSchedule> {
    if c.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: c.len(),
        });
    }
    let phi2 = c[3].atan2(c[0]);
    let phi3 = c[2].atan2(c[1]);
    let phi1 = c[1].hypot(c[2]).atan2(c[0].hypot(c[3]));
    let angles = vec![phi1, phi2, phi3];
    let back = sys2_amplitudes(&angles);
    let dev = back
        .iter()
        .zip(c)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > CONSISTENCY_TOL {
        return Err(Error::InconsistentAmplitudes(format!(
            "angles reproduce the moduli only to {dev:e}"
        )));
    }
    Ok(AngleSchedule { angles })
}

/// Unit phases of the System II protocol for drive durations `elapsed` and
/// waits `waits` (three each).
pub fn sys2_phases(system: &LevelSystem, elapsed: &[f64], waits: &[f64]) -> Vec<Complex64> {
    let e = system.energies();
    let (l1, l2, l3) = (elapsed[0], elapsed[1], elapsed[2]);
    let (t1, t2, t3) = (waits[0], waits[1], waits[2]);
    let th12 = 0.5 * (e[0] + e[1]);
    let th14 = 0.5 * (e[0] + e[3]);
    let th23 = 0.5 * (e[1] + e[2]);
    let head1 = th12 * l1 + e[0] * t1 + th14 * l2;
    let head2 = th12 * l1 + e[1] * (t1 + l2 + t2) + th23 * l3;
    vec![
        cis(-(head1 + e[0] * (t2 + l3 + t3))),
        I * cis(-(head2 + e[1] * t3)),
        -cis(-(head2 + e[2] * t3)),
        I * cis(-(head1 + e[3] * (t2 + l3 + t3))),
    ]
}

/// Determinant of the System II wait equations
/// `{sum tau', E_2(tau'_1+tau'_2) + E_3 tau'_3, E_1 tau'_1 + E_4(tau'_2+tau'_3)}`.
pub fn sys2_wait_determinant(system: &LevelSystem) -> f64 {
    let e = system.energies();
    (e[3] - e[0]) * (e[1] - e[2])
}

pub fn synth_sys2(
    target: &TargetDecomposition,
    system: &LevelSystem,
    budget: &DriveBudget,
) -> Result<Synthesis> {
    check_dims(target, system)?;
    require_class(system, GapTag::SystemII)?;
    let e = system.energies();
    let scale = e[3] - e[0];
    if sys2_wait_determinant(system).abs() <= 1e-12 * scale * scale {
        return Err(Error::InvalidInput("System II wait equations are singular".into()));
    }
    let angles = angles_sys2(&target.magnitudes)?;
    let [p1, p2, p3] = [angles.angles[0], angles.angles[1], angles.angles[2]];
    let r1 = realize_angle(p1, tr(2, 1), system, budget)?;
    let r2 = realize_angle(p2, tr(4, 1), system, budget)?;
    let r3 = realize_angle(p3, tr(3, 2), system, budget)?;
    let elapsed = [r1.elapsed(), r2.elapsed(), r3.elapsed()];
    let zero = sys2_phases(system, &elapsed, &[0.0; 3]);
    let res = phase_residuals(target, &zero);
    // v = tau'_3, u = tau'_2 + tau'_3, S = u + tau'_1
    let links = [
        ChainLink {
            coef: e[2] - e[1],
            residual: Some(res[2] - res[1]),
        },
        ChainLink {
            coef: e[3] - e[0],
            residual: Some(res[3]),
        },
        ChainLink {
            coef: e[1] - e[0],
            residual: Some(res[1]),
        },
    ];
    let (x, branches) = solve_wait_chain(&links)?;
    let waits = vec![x[2] - x[1], x[1] - x[0], x[0]];
    let cycles = vec![
        dual_cycle([tr(2, 1), tr(4, 3)], [r1.d, r1.d], &r1, waits[0]),
        single_cycle(tr(4, 1), &r2, waits[1]),
        single_cycle(tr(3, 2), &r3, waits[2]),
    ];
    Ok(Synthesis {
        class: GapTag::SystemII,
        protocol: Protocol::new(system.clone(), cycles),
        angles,
        waits: WaitSchedule { waits, branches },
    })
}

// ---------------------------------------------------------------------------
// System III: (1,2)+(2,3) ladder, then (1,3)

/// Closed-form System III state from `|1>` in the lab gauge, with
/// `psi1 = Omega_1 l_1 Delta_1` on the ladder and `psi2` on `(1,3)`.
pub fn sys3_closed_form(
    system: &LevelSystem,
    params: &SysIIIDriveParams,
    psi: [f64; 2],
    elapsed: [f64; 2],
    waits: [f64; 2],
) -> Vec<Complex64> {
    let e = system.energies();
    let (r1, s, r3) = ladder_column(params, psi[0]);
    let (s2, c2) = psi[1].sin_cos();
    let (t1, t2) = (waits[0], waits[1]);
    let total = t1 + t2;
    let global = cis(-e[1] * (elapsed[0] + elapsed[1]));
    vec![
        global * (c2 * r1 * cis(-e[0] * total) + I * s2 * r3 * cis(-(e[2] * t1 + e[0] * t2))),
        global * I * s * cis(-e[1] * total),
        global * (I * s2 * r1 * cis(-(e[0] * t1 + e[2] * t2)) + c2 * r3 * cis(-e[2] * total)),
    ]
}

/// Ladder strengths with `d1` close to `ratio * mu`, rounded so that
/// `sqrt(mu^2 + Omega_1^2) = 2 n mu` for a whole `n`: each half period then
/// turns the full ladder Hamiltonian through a multiple of `2 pi`, which
/// removes the leading correction to the strong-field map when `d1 = d2`.
pub fn ladder_params(mu: f64, weights: &LadderWeights, ratio: f64) -> Result<SysIIIDriveParams> {
    if !(weights.d1 > 0.0 && weights.d2 > 0.0 && weights.d1.is_finite() && weights.d2.is_finite()) {
        return Err(Error::InvalidInput("ladder weights must be positive".into()));
    }
    let w = weights.d2 / weights.d1;
    let norm = w.hypot(1.0);
    let nominal = ratio * norm;
    let n = (0.5 * nominal.hypot(1.0)).round().max(1.0);
    let rabi = mu * (4.0 * n * n - 1.0).sqrt();
    let d1 = rabi / norm;
    SysIIIDriveParams::new(d1, d1 * w)
}

/// Image of `|1>` under the ladder rotation: `(R_1, s, R_3)` with the `|2>`
/// entry `i s`.
fn ladder_column(params: &SysIIIDriveParams, psi1: f64) -> (f64, f64, f64) {
    let w2 = params.rabi * params.rabi;
    let (s, c) = psi1.sin_cos();
    (
        1.0 + params.d1 * params.d1 / w2 * (c - 1.0),
        params.d1 / params.rabi * s,
        params.d1 * params.d2 / w2 * (c - 1.0),
    )
}

/// Wait constraints left by one ladder solution, with `x = mu (tau'_1 +
/// tau'_2)` and `y = mu tau'_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum LadderWaits {
    /// `2y = inner` and `mult * x = outer.1` (mod 2 pi); `None` is free.
    Nested {
        inner: Option<f64>,
        outer: Option<(f64, f64)>,
    },
    /// Only `2 (x - y) = 2 mu tau'_2` is fixed; `tau'_1 = 0`.
    Gap(Option<f64>),
    /// Only `2y - x` is fixed; taken with `tau'_2 = 0` so it reads
    /// `mu tau'_1`.
    Lead(f64),
}

impl LadderWaits {
    fn solve(self, mu: f64) -> Result<WaitSchedule> {
        match self {
            LadderWaits::Nested { inner, outer } => {
                let (mult, res) = match outer {
                    Some((m, r)) => (m, Some(r)),
                    None => (1.0, None),
                };
                let links = [
                    ChainLink { coef: 2.0 * mu, residual: inner },
                    ChainLink { coef: mult * mu, residual: res },
                ];
                let (x, branches) = solve_wait_chain(&links)?;
                Ok(WaitSchedule {
                    waits: vec![x[0], x[1] - x[0]],
                    branches,
                })
            }
            LadderWaits::Gap(res) => {
                let (x, branches) = solve_wait_chain(&[ChainLink { coef: 2.0 * mu, residual: res }])?;
                Ok(WaitSchedule {
                    waits: vec![0.0, x[0]],
                    branches,
                })
            }
            LadderWaits::Lead(res) => {
                let (x, branches) = solve_wait_chain(&[ChainLink { coef: mu, residual: Some(res) }])?;
                Ok(WaitSchedule {
                    waits: vec![x[0], 0.0],
                    branches,
                })
            }
        }
    }
}

/// Candidate solution for one ladder angle.
#[derive(Debug, Clone, Copy)]
struct LadderBranch {
    psi1: f64,
    psi2: f64,
    waits: LadderWaits,
}

/// Solves the second rotation and the waits for a given ladder angle.
///
/// Writing the target in the frame rotating with `E_2` and fixing its
/// global phase by the `|2>` entry `i s`, with `P = e^{-ix} a_1`,
/// `Q = e^{-ix} conj(a_3)`:
/// `cos(psi2) rho^2 = P R_1 + Q R_3` and
/// `sin(psi2) e^{-2iy} rho^2 = -i (P R_3 - Q R_1)`, `rho^2 = R_1^2 + R_3^2`.
/// When `|2>` is empty the global phase is free as well, and `P`, `Q` are
/// taken real.
fn ladder_branch(target: &TargetDecomposition, params: &SysIIIDriveParams, psi1: f64) -> Result<LadderBranch> {
    let (r1, s, r3) = ladder_column(params, psi1);
    let rho2 = r1 * r1 + r3 * r3;
    let (b, mags) = (&target.amplitudes, &target.magnitudes);
    let tol = AMPLITUDE_TOL;
    let (c2n, zn, waits) = if mags[1] > tol && s > tol {
        let gauge = I * target.phases[1].conj();
        let (a1, a3) = (gauge * b[0], gauge * b[2]);
        let k = a1 * r1 + a3.conj() * r3;
        let w = a1 * r3 - a3.conj() * r1;
        if k.norm() > tol {
            let x = k.arg();
            let z = -I * cis(-x) * w;
            let inner = (z.norm() > tol).then(|| -z.arg());
            (k.norm(), z, LadderWaits::Nested { inner, outer: Some((1.0, x)) })
        } else {
            // cos(psi2) = 0: only 2y - x is pinned
            (0.0, w, LadderWaits::Lead(FRAC_PI_2 - w.arg()))
        }
    } else {
        let (m1, m3) = (mags[0], mags[2]);
        let sign = if m1 * r1 + m3 * r3 < 0.0 { -1.0 } else { 1.0 };
        let (p, q) = (sign * m1, sign * m3);
        let z = Complex64::new(0.0, -(p * r3 - q * r1));
        let inner = (z.norm() > tol).then(|| -z.arg());
        let relative = (target.phases[0] * target.phases[2].conj()).arg();
        let waits = if m1 <= tol || m3 <= tol {
            // one empty outer level: its phase absorbs x
            LadderWaits::Nested { inner, outer: None }
        } else if r1.abs() <= tol || r3.abs() <= tol {
            // x and y shift together; only tau'_2 is pinned
            LadderWaits::Gap(inner.map(|i| relative - i))
        } else {
            LadderWaits::Nested {
                inner,
                outer: Some((2.0, relative)),
            }
        };
        (p * r1 + q * r3, z, waits)
    };
    let (c2, sz) = (c2n / rho2, zn.norm() / rho2);
    if sz > 1.0 + CONSISTENCY_TOL {
        return Err(Error::UnreachableTarget(format!("second ladder rotation needs sin = {sz}")));
    }
    Ok(LadderBranch {
        psi1,
        psi2: sz.atan2(c2),
        waits,
    })
}

pub fn synth_sys3(
    target: &TargetDecomposition,
    system: &LevelSystem,
    weights: &LadderWeights,
    budget: &DriveBudget,
) -> Result<Synthesis> {
    check_dims(target, system)?;
    require_class(system, GapTag::SystemIII)?;
    budget.validate()?;
    let mu = system.energy(2) - system.energy(1);
    let params = ladder_params(mu, weights, budget.ratio)?;
    if weights.d1 != weights.d2 {
        log::warn!(
            "unequal ladder weights: the strong-field ladder map carries an O(1) phase error \
             that does not shrink with the drive ratio"
        );
    }

    let reach = params.d1 / params.rabi;
    let c2 = target.magnitudes[1];
    if c2 > reach + AMPLITUDE_TOL {
        return Err(Error::UnreachableTarget(format!(
            "|a_2| = {c2} exceeds the ladder bound {reach}"
        )));
    }
    let base = (c2 / reach).min(1.0).asin();
    let mut candidates = vec![base];
    if (PI - 2.0 * base).abs() > 1e-12 {
        candidates.push(PI - base);
    }
    let best = candidates
        .into_iter()
        .map(|psi1| ladder_branch(target, &params, psi1))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| {
            let key = |x: &LadderBranch| ((x.psi2 * 1e9).round(), x.psi1);
            key(a).partial_cmp(&key(b)).unwrap()
        })
        .expect("at least one ladder branch");
    let waits = best.waits.solve(mu)?;

    let r1 = realize_rotation(best.psi1, params.rabi, TAU / mu, params.d1, budget)?;
    let r2 = realize_angle(best.psi2, tr(3, 1), system, budget)?;
    let cycles = vec![
        dual_cycle([tr(2, 1), tr(3, 2)], [params.d1, params.d2], &r1, waits.waits[0]),
        single_cycle(tr(3, 1), &r2, waits.waits[1]),
    ];
    Ok(Synthesis {
        class: GapTag::SystemIII,
        protocol: Protocol::new(system.clone(), cycles),
        angles: AngleSchedule {
            angles: vec![best.psi1, best.psi2],
        },
        waits,
    })
}

// ---------------------------------------------------------------------------

/// Dispatches on the gap class of `system`.
pub fn synthesize(
    target: &TargetDecomposition,
    system: &LevelSystem,
    options: &SynthesisOptions,
) -> Result<Synthesis> {
    check_dims(target, system)?;
    options.budget.validate()?;
    match classify_gaps(system).tag {
        GapTag::SystemI => synth_sys1(target, system, &options.budget),
        GapTag::SystemII => synth_sys2(target, system, &options.budget),
        GapTag::SystemIII => synth_sys3(target, system, &options.ladder, &options.budget),
        _ if system.dim() == 2 => synth_sys1(target, system, &options.budget),
        tag => Err(Error::UnsupportedGapClass(tag)),
    }
}

/// Synthesizes a protocol and checks it with both the strong-field maps and
/// the exact simulator.
pub fn synth(
    target: &TargetDecomposition,
    system: &LevelSystem,
    options: &SynthesisOptions,
) -> Result<SynthesisReport> {
    let s = synthesize(target, system, options)?;
    log::debug!("synthesized {} cycles for {:?}", s.protocol.cycles.len(), s.class);
    verify(&s.protocol, target)
}

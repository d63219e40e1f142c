//! Exact propagation of a protocol through its piecewise-constant
//! Hamiltonian, with no strong-field assumption.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::Protocol;
use crate::numkernel::{diagonal, propagator, sigma_x, ComplexMatrix, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Shared between all segments of a cycle with the same polarity.
    pub hamiltonian: Arc<ComplexMatrix>,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Expands every cycle into `l` pairs of `(H_+, delta1), (H_-, delta2)`
/// followed by `(H_0, wait)`.
pub fn compile(protocol: &Protocol) -> Result<Vec<Segment>> {
    protocol.validate()?;
    let sys = &protocol.system;
    let n = sys.dim();
    let h0 = Arc::new(diagonal(sys.energies()));

    let mut segments = Vec::new();
    for cycle in &protocol.cycles {
        let mut coupling = ComplexMatrix::zeros(n, n);
        for (tr, d) in cycle.drive.couplings() {
            let (m, k) = tr.indices();
            coupling += sigma_x(n, m, k).map(|x| x * d);
        }
        let plus = Arc::new(&*h0 + &coupling);
        let minus = Arc::new(&*h0 - &coupling);
        let (delta1, delta2) = cycle.drive.durations();
        let repeats = cycle.drive.repeats();
        segments.reserve(2 * repeats as usize + 1);
        for _ in 0..repeats {
            segments.push(Segment {
                hamiltonian: Arc::clone(&plus),
                duration: delta1,
            });
            segments.push(Segment {
                hamiltonian: Arc::clone(&minus),
                duration: delta2,
            });
        }
        segments.push(Segment {
            hamiltonian: Arc::clone(&h0),
            duration: cycle.wait,
        });
    }
    Ok(segments)
}

/// Evenly spaced sample times over `[0, total]`; the ends are always kept.
fn sample_times(total: f64, samples: Option<usize>) -> Vec<f64> {
    match samples {
        None | Some(0) | Some(1) => vec![0.0, total],
        Some(k) => (0..k).map(|i| total * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Time-ordered product of exact segment exponentials applied to `initial`,
/// recorded at `samples` evenly spaced times (start and end by default).
pub fn run_segments(
    segments: &[Segment],
    initial: &StateVector,
    samples: Option<usize>,
) -> Result<Trajectory> {
    let dim = initial.dim();
    if let Some(seg) = segments.first() {
        if seg.hamiltonian.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: seg.hamiltonian.nrows(),
                found: dim,
            });
        }
    }
    let total: f64 = segments.iter().map(|s| s.duration).sum();
    let times = sample_times(total, samples);
    let last = times.len() - 1;
    let mut next = 0;

    let mut cache: HashMap<(usize, u64), ComplexMatrix> = HashMap::new();
    let mut state = initial.clone();
    let mut traj = Trajectory {
        times: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
    };
    while next < last && times[next] <= 0.0 {
        traj.times.push(times[next]);
        traj.states.push(state.clone());
        next += 1;
    }

    let mut clock = 0.0;
    for seg in segments {
        if seg.duration == 0.0 {
            continue;
        }
        let end = clock + seg.duration;
        while next < last && times[next] < end {
            let partial = propagator(&seg.hamiltonian, times[next] - clock)?;
            traj.times.push(times[next]);
            traj.states.push(state.apply(&partial));
            next += 1;
        }
        let key = (Arc::as_ptr(&seg.hamiltonian) as usize, seg.duration.to_bits());
        let u = match cache.get(&key) {
            Some(u) => u,
            None => {
                let u = propagator(&seg.hamiltonian, seg.duration)?;
                cache.entry(key).or_insert(u)
            }
        };
        state = state.apply(u);
        clock = end;
    }
    while next <= last {
        traj.times.push(times[next]);
        traj.states.push(state.clone());
        next += 1;
    }
    Ok(traj)
}

/// Exact evolution of `initial` under `protocol`.
pub fn run(protocol: &Protocol, initial: &StateVector, samples: Option<usize>) -> Result<Trajectory> {
    if initial.dim() != protocol.dim() {
        return Err(Error::DimensionMismatch {
            expected: protocol.dim(),
            found: initial.dim(),
        });
    }
    run_segments(&compile(protocol)?, initial, samples)
}

/// Final state only.
pub fn evolve(protocol: &Protocol, initial: &StateVector) -> Result<StateVector> {
    Ok(run(protocol, initial, None)?.final_state().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cycle, Drive, LevelSystem, Pulse, Transition};
    use crate::numkernel::{cis, fidelity, I};
    use crate::propagator::{exact_pulse_propagator, free_evolution, Polarity, TwoLevelDriveParams};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(e: &[f64]) -> LevelSystem {
        LevelSystem::new(e.to_vec()).unwrap()
    }

    fn single(system: &LevelSystem, m: usize, n: usize, d: f64, frac: f64, l: u64, wait: f64) -> Cycle {
        let tr = Transition::new(m, n).unwrap();
        let t = TAU / tr.gap(system);
        let delta = frac * t;
        Cycle {
            drive: Drive::Single {
                pulse: Pulse {
                    transition: tr,
                    d,
                    delta1: 0.5 * (t - delta),
                    delta2: 0.5 * (t + delta),
                },
                repeats: l,
            },
            wait,
        }
    }

    #[test]
    fn empty_protocol_compiles_to_nothing() {
        let p = Protocol::new(sys(&[0.0, 1.0]), vec![]);
        assert!(compile(&p).unwrap().is_empty());
        let psi = StateVector::basis(2, 1);
        assert_eq!(evolve(&p, &psi).unwrap(), psi);
    }

    #[test]
    fn segment_layout() {
        let s = sys(&[0.0, 1.0, 3.0]);
        let cyc = single(&s, 2, 1, 5.0, 0.1, 1, 0.0);
        let p = Protocol::new(s.clone(), vec![cyc]);
        let segs = compile(&p).unwrap();
        let durs: Vec<f64> = segs.iter().map(|s| s.duration).collect();
        assert_eq!(durs.len(), 3);
        assert!((durs[0] - 0.45 * TAU).abs() < 1e-12 && (durs[1] - 0.55 * TAU).abs() < 1e-12);
        assert_eq!(durs[2], 0.0);

        let p = Protocol::new(
            s.clone(),
            vec![single(&s, 2, 1, 5.0, 0.1, 4, 1.0), single(&s, 3, 1, 5.0, 0.0, 2, 0.0)],
        );
        assert_eq!(compile(&p).unwrap().len(), 9 + 5);
    }

    #[test]
    fn dual_drive_has_both_couplings() {
        let s = sys(&[0.0, 1.0, 3.0, 4.0]);
        let p = Protocol::new(
            s,
            vec![Cycle {
                drive: Drive::Dual {
                    transitions: vec![Transition::new(2, 1).unwrap(), Transition::new(4, 3).unwrap()],
                    strengths: vec![7.0, 3.0],
                    delta1: PI,
                    delta2: PI,
                    repeats: 1,
                },
                wait: 0.0,
            }],
        );
        let segs = compile(&p).unwrap();
        let h = &segs[0].hamiltonian;
        assert_eq!(h[(0, 1)].re, 7.0);
        assert_eq!(h[(2, 3)].re, 3.0);
        assert_eq!(segs[1].hamiltonian[(2, 3)].re, -3.0);
    }

    #[test]
    fn free_evolution_only() {
        let s = sys(&[-1.0, 0.0, 1.0]);
        let p = Protocol::new(s.clone(), vec![single(&s, 2, 1, 0.0, 0.0, 1, FRAC_PI_2)]);
        // zero drive with symmetric pulse: full period of H_0 = identity up to phase
        let out = evolve(&p, &StateVector::basis(3, 0)).unwrap();
        assert!((fidelity(&out, &StateVector::basis(3, 0)).unwrap() - 1.0).abs() < 1e-12);
        let expected = cis(-(-1.0) * (TAU + FRAC_PI_2));
        assert!((out.amplitudes()[0] - expected).norm() < 1e-12);
        assert!((cis(FRAC_PI_2) - I).norm() < 1e-15);
    }

    #[test]
    fn matches_closed_form_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let s = sys(&[0.0, 1.3, 2.0, 4.1]);
            let d = rng.random_range(0.5..40.0);
            let l = rng.random_range(1..6);
            let wait = rng.random_range(0.0..3.0);
            let cyc = single(&s, 4, 2, d, rng.random_range(-0.8..0.8), l, wait);
            let Drive::Single { pulse, .. } = cyc.drive.clone() else { unreachable!() };
            let p = TwoLevelDriveParams::new(&s, pulse.transition, d).unwrap();
            let period = exact_pulse_propagator(&s, &p, Polarity::Negative, pulse.delta2)
                * exact_pulse_propagator(&s, &p, Polarity::Positive, pulse.delta1);
            let mut u = ComplexMatrix::identity(4, 4);
            for _ in 0..l {
                u = &period * u;
            }
            u = free_evolution(&s, wait) * u;
            let psi = StateVector::new(vec![
                crate::numkernel::c(0.5, 0.1),
                crate::numkernel::c(-0.3, 0.4),
                crate::numkernel::c(0.2, 0.0),
                crate::numkernel::c(0.0, -0.6),
            ])
            .normalized()
            .unwrap();
            let sim = evolve(&Protocol::new(s.clone(), vec![cyc]), &psi).unwrap();
            assert!(sim.max_abs_diff(&psi.apply(&u)) <= 1e-11);
        }
    }

    #[test]
    fn norm_conserved_over_many_segments() {
        let s = sys(&[0.0, 1.0, 3.0]);
        let p = Protocol::new(s.clone(), vec![single(&s, 3, 1, 2.0, 0.3, 5000, 0.2)]);
        let traj = run(&p, &StateVector::basis(3, 0), Some(50)).unwrap();
        assert_eq!(traj.states.len(), 50);
        for st in &traj.states {
            assert!((st.norm() - 1.0).abs() <= 1e-10);
        }
        assert!(traj.times.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn composition_and_shift_invariance() {
        let s = sys(&[0.0, 1.0, 3.0]);
        let c1 = single(&s, 2, 1, 3.0, 0.2, 2, 0.4);
        let c2 = single(&s, 3, 1, 6.0, -0.1, 3, 1.1);
        let psi = StateVector::basis(3, 0);
        let both = evolve(&Protocol::new(s.clone(), vec![c1.clone(), c2.clone()]), &psi).unwrap();
        let mid = evolve(&Protocol::new(s.clone(), vec![c1.clone()]), &psi).unwrap();
        let split = evolve(&Protocol::new(s.clone(), vec![c2.clone()]), &mid).unwrap();
        assert!(both.max_abs_diff(&split) <= 1e-10);

        let shifted = s.shifted(2.7);
        let sp = Protocol::new(shifted, vec![c1, c2]);
        let moved = evolve(&sp, &psi).unwrap();
        assert!((fidelity(&moved, &both).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn trajectory_samples_are_evenly_spaced() {
        let s = sys(&[0.0, 1.0, 3.0]);
        let d = 2.0;
        let cyc = single(&s, 2, 1, d, 0.2, 1, 1.5);
        let p = Protocol::new(s.clone(), vec![cyc.clone()]);
        let psi = StateVector::basis(3, 0);
        let traj = run(&p, &psi, Some(9)).unwrap();
        let total = p.total_duration();
        assert_eq!(traj.times.len(), 9);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), total);
        assert!(traj.final_state().max_abs_diff(&evolve(&p, &psi).unwrap()) <= 1e-14);

        let params = TwoLevelDriveParams::new(&s, Transition::new(2, 1).unwrap(), d).unwrap();
        let (delta1, _) = cyc.drive.durations();
        for (t, state) in traj.times.iter().zip(&traj.states).filter(|(t, _)| **t <= delta1) {
            let expect = psi.apply(&exact_pulse_propagator(&s, &params, Polarity::Positive, *t));
            assert!(state.max_abs_diff(&expect) <= 1e-12, "t = {t}");
        }
        let drive_end = total - cyc.wait;
        let after = evolve(&Protocol::new(s.clone(), vec![Cycle { wait: 0.0, ..cyc }]), &psi).unwrap();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            if *t >= drive_end {
                let expect = after.apply(&free_evolution(&s, t - drive_end));
                assert!(state.max_abs_diff(&expect) <= 1e-12, "t = {t}");
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = Protocol::new(sys(&[0.0, 1.0]), vec![]);
        assert!(matches!(
            run(&p, &StateVector::basis(3, 0), None),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

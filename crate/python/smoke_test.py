"""Smoke test for the pulseforge_py extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math

import pulseforge_py as pf


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    assert pf.classify([0.0, 1.0, 3.0, 4.0]) == "SystemII"
    assert pf.classify([0.0, 1.0, 2.0]) == "SystemIII"

    system = pf.LevelSystem([0.0, 1.0, 3.0, 4.0])
    assert system.dim == 4 and system.gaps() == [1.0, 2.0, 1.0]

    target = [0.5, 0.5j, -0.5, 0.5 * complex(math.cos(1.0), math.sin(1.0))]
    report = pf.synth(system, target)
    assert report.gap_class == "SystemII"
    assert report.analytic_fidelity > 1 - 1e-9, report
    assert report.exact_fidelity > 0.999, report

    protocol = report.protocol
    again = pf.verify(pf.Protocol.from_json(protocol.to_json()), target)
    assert again.exact_fidelity == report.exact_fidelity

    final = pf.simulate(protocol)
    assert close(pf.fidelity(final, target), report.exact_fidelity, 1e-12)

    times, states = protocol.trajectory(samples=21)
    assert len(times) == len(states) == 21
    assert close(times[-1], protocol.total_duration, 1e-12)

    two = pf.synth(pf.LevelSystem([0.0, 1.0]), [1 / math.sqrt(2), 1j / math.sqrt(2)])
    assert close(two.angles[0], math.pi / 4, 1e-10)

    ratios, infidelities, slope = pf.sweep(pf.LevelSystem([0.0, 1.0, 2.0]),
                                           [0.8, 0.36j, 0.48], [10.0, 100.0, 1000.0])
    assert all(a > b for a, b in zip(infidelities, infidelities[1:])), infidelities
    assert slope < -1.5

    try:
        pf.synth(pf.LevelSystem([0.0, 1.0, 2.0]), [0.0, 1.0, 0.0])
    except pf.PulseforgeError as e:
        assert "UnreachableTarget" in str(e)
    else:
        raise AssertionError("expected UnreachableTarget")

    json.loads(report.to_json())
    print("pulseforge_py smoke test passed")


if __name__ == "__main__":
    main()

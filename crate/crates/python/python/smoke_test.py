"""Smoke test for the zwm_sim extension module."""

import math

import zwm_sim


def main():
    p = zwm_sim.CavityParams.from_ratios(0.01, 0.1, omega_s=100.0, omega_p=250.0)
    assert abs(p.gamma - 0.01) < 1e-15
    assert abs(p.omega_i - 150.0) < 1e-12
    assert abs(p.finesse - math.pi / 0.01) < 1e-9

    assert zwm_sim.phase_mismatch_factor(0, p) == 1.0
    assert abs(abs(zwm_sim.cavity_lineshape(0.0, 0.01)) ** 2 - 4.0 / 0.01) < 1e-9

    for t in (0.0, 0.25, 0.5, 1.0):
        v = zwm_sim.visibility_from_transmission(t)
        assert abs(zwm_sim.invert_visibility(v) - t) < 1e-12
    try:
        zwm_sim.invert_visibility(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    half = zwm_sim.SampleModel.flat(0.5)
    rows = zwm_sim.visibility_table(p, half, (-2, 2))
    assert len(rows) == 5
    assert all(abs(r[3] - 0.8) < 1e-12 for r in rows)

    mixture = zwm_sim.SampleModel.lorentzian_mixture([(147.0, 1.5, 1.2), (150.4, 1.0, 0.8)])
    t = mixture.transmissivity(150.4)
    assert abs(t) < 1.0 and abs(abs(t) ** 2 + mixture.rear_reflectivity(150.4) ** 2 - 1.0) < 1e-12

    lo, hi, capped = zwm_sim.default_comb_range(p, 0.05)
    assert (lo, hi, capped) == (-62, 62, False)
    assert zwm_sim.good_cavity_deviation(p, half, (lo, hi)) < 0.05

    omega, full = zwm_sim.spectrum(p, half, (-1, 1), 98.5, 101.5, 3001)
    _, good = zwm_sim.spectrum(p, half, (-1, 1), 98.5, 101.5, 3001, fidelity="good_cavity")
    assert len(omega) == len(full) == 3001
    peak = max(full)
    assert max(abs(a - b) for a, b in zip(full, good)) < 0.05 * peak

    phases = [2 * math.pi * k / 20 for k in range(20)]
    sweep = zwm_sim.phase_sweep(p, half, (-2, 2), phases, (97.5, 102.5, 5), 100_000, seed=3)
    v, err = sweep.estimate_visibility(0)
    assert abs(v - 0.8) < 3 * err, (v, err)
    again = zwm_sim.phase_sweep(p, half, (-2, 2), phases, (97.5, 102.5, 5), 100_000, seed=3)
    assert again.counts == sweep.counts

    print(f"zwm_sim smoke test passed: V = {v:.4f} +/- {err:.4f}")


if __name__ == "__main__":
    main()

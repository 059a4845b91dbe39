"""Smoke test for the coherence_pmp_py extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/coherence_pmp_py-*.whl

then run ``python python/smoke_test.py``.
"""

import math

import coherence_pmp_py as cp


def main():
    model = cp.QutritModel()
    rho0 = cp.reference_state()

    c0 = cp.coherence(rho0)
    assert abs(c0 - 0.5515) < 5e-4, c0

    defect = model.unital_defect()
    assert [round(defect[i][i].real, 12) for i in range(3)] == [0.1, 0.001, -0.101]

    rate = model.lindblad_rhs(rho0, 0.0, 0.0)
    assert abs(sum(rate[i][i] for i in range(3))) < 1e-12

    free = model.simulate([0.0] * 1000, 20.0)
    ratio = free.coherence[-1] / free.coherence[0]
    assert abs(ratio - math.exp(-0.2)) < 2e-3, ratio

    phi, delta = model.phi_delta(rho0, 0.0)
    u = model.boundary_control(rho0, 0.0)
    assert abs(phi * u + delta) < 1e-12

    try:
        model.boundary_control([[0.5, 0, 0], [0, 0.3, 0], [0, 0, 0.2]], 0.0)
    except ValueError as err:
        assert "singular" in str(err).lower() or "phi" in str(err).lower(), err
    else:
        raise AssertionError("diagonal state should have no control direction")

    result = model.optimize(0.545, 0.553, tf=4.0, steps=100)
    assert result.converged, result
    assert all(0.545 - 1e-6 <= c <= 0.553 + 1e-6 for c in result.coherence)
    assert all(v == 0 for row in result.costates[-1] for v in row)
    assert len(result.controls) == 100 and len(result.mu) == 100

    print(f"C(rho0) = {c0:.6f}")
    print(f"free decay ratio = {ratio:.6f}")
    print(f"short optimisation: {result!r}")
    print("ok")


if __name__ == "__main__":
    main()

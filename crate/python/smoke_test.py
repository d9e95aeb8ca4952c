"""Smoke test for the perfodyn Python extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/perfodyn-*.whl
"""

import json
import math

import perfodyn


def close(a, b, tol=1e-9):
    return all(math.isclose(x, y, abs_tol=tol) for x, y in zip(a, b))


def main():
    p2 = [(0, 1)]
    assert close(perfodyn.expressed_opinions(2, p2, [0.5, 0.5], [0.0, 1.0], k=1), [0.5, 0.5])
    assert close(perfodyn.expressed_opinions(2, p2, [0.5, 0.5], [0.0, 1.0]), [1 / 3, 2 / 3])

    rep = perfodyn.stable_point(2, p2, [0.0, 1.0], [0.5, 0.5], [0.5, 0.5], k=1)
    assert close(rep["x_ps"], [0.5, 0.5]), rep
    assert rep["consensus_value"] is not None

    t3 = [(0, 1), (1, 2), (0, 2)]
    d = perfodyn.degroot_value(3, t3, [0.0, 0.5, 1.0], [0.2, 0.5, 0.8])
    assert math.isclose(d, 0.3, abs_tol=1e-12), d

    steer = perfodyn.steering(3, 0.5, 0.5, 0.5)
    dense = perfodyn.stable_point(
        3, t3, [0.0, 0.0, 0.0], [0.5] * 3, [0.5, 0.0, 0.5], policy="steer", target=0
    )
    assert close(steer["x_ps"], dense["x_ps"]), (steer, dense)

    try:
        perfodyn.stable_point(2, p2, [0.0, 1.0], [0.5, 0.5], [0.5, 0.5], policy="mean")
    except ValueError:
        pass
    else:
        raise AssertionError("mean policy without observed nodes should fail")

    cfg = {"network": {"generator": {"kind": "cycle", "n": 6}}, "t_max": 5, "seed": 2}
    bundle = json.loads(perfodyn.run_config(json.dumps(cfg)))
    assert bundle["replications"][0]["seed"] == 2

    print("perfodyn", perfodyn.__version__, "smoke test passed")


if __name__ == "__main__":
    main()

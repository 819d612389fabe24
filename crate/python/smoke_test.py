"""Smoke test for the nqdreg Python extension.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import math

import nqdreg_py as nq


def main():
    design = nq.DesignGrid.equispaced(200)
    assert len(design) == 200
    assert abs(design.mesh - 1 / 200) < 1e-15

    wm = nq.WeightMatrix.nearest_neighbor(design, [0.3, 0.5], 10)
    assert wm.n == 200 and wm.m == 2
    assert abs(sum(wm.row(0)) - 1.0) < 1e-15
    b3 = wm.check("B3")
    assert abs(b3["statistic"] - 0.1) < 1e-15, b3

    kernel = nq.Kernel("gaussian")
    assert abs(kernel(0.0) - 1 / math.sqrt(2 * math.pi)) < 1e-15
    assert nq.Kernel("signed_gaussian").abs_integral() > 1.5
    pc = nq.WeightMatrix.priestley_chao(design, [0.5], kernel, 200 ** -0.25)
    assert pc.check("A4", a=0.25)["condition_id"] == "A4"

    model = nq.ErrorModel("neg_ma1:0.6")
    eps = model.sample(50, 1)
    assert len(eps) == 50 and eps == model.sample(50, 1)
    nqd = model.check_nqd([(0, 1), (1, 2)], 20_000, 3)
    assert nqd["within_noise"], nqd["max_violation"]

    lemma = model.verify_lemma22([100], 2_000, 5)
    assert lemma["variance"]["pass"] and lemma["maximal"]["pass"]

    riemann = nq.verify_riemann_limits(kernel, [100, 1000, 10000], mode="signed", x=0.5)
    assert riemann["pass"], riemann

    est = nq.estimate("sine2pi", wm, model, 9)
    assert len(est) == 2

    report = nq.run_experiment(nq.reference_config_toml("T31"))
    stats = [row["statistic"] for row in report["rows"]]
    assert report["pass"] and stats[-1] < stats[0] / 4, stats

    try:
        nq.run_experiment(nq.reference_config_toml("T31").replace("p = 2.0", "p = 3.0"))
    except ValueError as e:
        assert "p must lie in (0,2]" in str(e)
    else:
        raise AssertionError("p = 3 accepted")

    print("nqdreg_py smoke test passed:", stats)


if __name__ == "__main__":
    main()

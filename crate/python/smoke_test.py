"""Smoke test for the `levin` extension module.

Build the module first:

    cargo build -p levin-python --features extension-module --release
    cp target/release/liblevin.so python/levin.so      # .dylib on macOS

then run `python3 python/smoke_test.py`.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import levin  # noqa: E402


def main():
    assert levin.champernowne_digits(10, 16) == "1234567891011121"
    assert levin.champernowne_digits(2, 10) == "1101110010"
    assert levin.champernowne_digit_at(10, 11) == "0"

    assert levin.star_discrepancy([0.5]) == 0.5
    grid = [k / 8 for k in range(8)]
    assert abs(levin.star_discrepancy(grid) - 1 / 8) < 1e-15
    assert abs(levin.discrepancy_2d([(0.5, 0.5)]) - 0.75) < 1e-15

    lemma1, lemma2, strict = levin.bounds(2.0, 16, 1)
    assert abs(lemma1 - 2 * 2 ** 1.5 * 4) < 1e-12
    assert abs(lemma2 - lemma1 * (3 + math.log(16)) ** 2) < 1e-9
    assert strict == lemma2

    sched = levin.Schedule.original()
    assert sched.n(5) == 30
    assert sched.ell(1) == 5 and sched.ell(2) == 7
    checks = {name: ok for name, ok, _ in sched.validate(40)}
    assert checks["sufficient"] and checks["necessary"] and not checks["concatenation"]

    s = levin.exp_sum(sched, 5, 1, "12345/2^20", 7, 0, 0)
    assert s == complex(sched.tau(5, 1), 0)

    quad = levin.Schedule.quadratic().with_sqrt_start(2, 256)
    con = levin.Construction(quad)
    con.run(12, threads=2)
    assert con.r == 13
    hist = con.history
    assert [h["r"] for h in hist] == list(range(5, 13))
    assert all(d < b for h in hist for d, b in zip(h["d_values"], h["bounds"]))

    _, digits = con.certified_digits(2)
    assert len(digits) >= quad.n(13) - 8

    again = levin.Construction.from_checkpoint(con.checkpoint())
    assert again.alpha == con.alpha

    try:
        con.report([2], [1024])
    except levin.PrecisionExhaustedError as e:
        assert "r_max" in str(e)
    else:
        raise AssertionError("expected insufficient precision")

    report = json.loads(con.report([2], [16, 64], baseline=True))
    assert len(report["rows"]) == 4
    assert all(0 < row["d_measured"] <= 1 for row in report["rows"])

    # a tighter threshold makes the search try several candidates
    tight = levin.Construction(levin.Schedule.original().with_sqrt_start(2, 256))
    tight.run(5, bound_mode="scaled:98/1000")
    assert tight.history[0]["candidates_tried"] > 1
    try:
        levin.Construction(sched).run(5, bound_mode="loose")
    except levin.LevinError:
        pass
    else:
        raise AssertionError("expected an unknown bound mode to be rejected")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()

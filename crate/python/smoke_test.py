"""Smoke test for the kpzlab extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import math
import sys

import kpzlab


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    ai, aip = kpzlab.airy(0.0)
    assert close(ai, 0.3550280538878172, 1e-13)
    assert close(aip, -0.2588194037928068, 1e-13)

    d = kpzlab.laplace_transform(1.0, 1.0)
    assert 0.0 < d < 1.0
    assert kpzlab.laplace_transform(0.1, 1.0) > d

    for order in range(3):
        m = kpzlab.nystrom_trace(1.0, 1.0, order)
        e = kpzlab.trace_exact(1.0, 1.0, order)
        assert close(m, e, 1e-6), (order, m, e)

    r = kpzlab.rate_report(1.0)
    assert close(r["phi"], 4.0 / 3.0, 1e-12)
    assert close(r["chernoff"], -4.0 / 3.0, 1e-8)
    assert close(r["crossover"], 1.0 / 12.0 - 1.0, 1e-12)

    assert kpzlab.airy_kernel_det(6.0) > 1.0 - 1e-6
    assert kpzlab.airy_kernel_det(-6.0) < 1e-3

    try:
        kpzlab.phi_plus(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("phi_plus(-1) should raise ValueError")

    prof = kpzlab.LaplaceProfile(1.0, n_max=2)
    m1 = prof.moment(1.0)
    assert close(m1, kpzlab.first_moment_oracle(1.0), 1e-6), m1
    log_a = kpzlab.log_leading_term(1.0, 1.0)
    assert math.isfinite(log_a)

    print("kpzlab", kpzlab.__version__, "smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())

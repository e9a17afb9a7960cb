"""Regenerate tests/data/f_survival_oracle.json by direct quadrature.

The F tail is integrated from its density with mpmath at 40 digits; for
d1 = 1 the two-sided Student t tail is integrated as an independent check.
Run once; the output is checked in and the tests read it as frozen data.
"""

import json
import os

import mpmath as mp

mp.mp.dps = 40

F_VALUES = [0.05, 0.7, 1.9, 4.5, 12.0]
DOFS = [(1, 1), (1, 4), (1, 30), (2, 3), (2, 17), (3, 9), (4, 2), (5, 40), (8, 8), (12, 150)]


def f_pdf(x, d1, d2):
    d1, d2 = mp.mpf(d1), mp.mpf(d2)
    return (mp.sqrt((d1 * x) ** d1 * d2 ** d2 / (d1 * x + d2) ** (d1 + d2))
            / (x * mp.beta(d1 / 2, d2 / 2)))


def t_pdf(x, nu):
    nu = mp.mpf(nu)
    return (1 + x * x / nu) ** (-(nu + 1) / 2) / (mp.sqrt(nu) * mp.beta(mp.mpf(1) / 2, nu / 2))


def main():
    rows = []
    for d1, d2 in DOFS:
        for f in F_VALUES:
            f = mp.mpf(f)
            p = mp.quad(lambda x: f_pdf(x, d1, d2), [f, f + 1, f + 10, f + 100, mp.inf])
            row = {"f": float(f), "d1": d1, "d2": d2, "p": float(p)}
            if d1 == 1:
                r = mp.sqrt(f)
                pt = 2 * mp.quad(lambda x: t_pdf(x, d2), [r, r + 1, r + 10, r + 100, mp.inf])
                assert abs(pt - p) < mp.mpf(10) ** -15 * p, (d1, d2, f, pt, p)
                row["p_t_tail"] = float(pt)
            rows.append(row)
    out = os.path.join(os.path.dirname(__file__), "..", "tests", "data", "f_survival_oracle.json")
    with open(out, "w") as fh:
        json.dump({"method": "mpmath.quad of the F density, 40 digits", "rows": rows}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()

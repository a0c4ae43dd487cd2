"""Oracle for the jump-magnitude CDF ``int_r^x (a(h/d) + a(-h/d)) |h|^(-1-beta) dh``.

mpmath tanh-sinh at 30 digits, split at exact (decimal) singular points and
kinks.  The total rate beyond ``x`` uses the incomplete gamma function for the
cosine coefficient and an mpmath Hurwitz fold for the singular example.
Run as a script to regenerate ``jump_cdf.json``.
"""
import json
import math
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30

CASES = {
    "cosine": dict(coef="smooth_cosine", amplitude="0.5", offset="1", delta="0.015625", beta="1"),
    "example1": dict(coef="example1", gamma="0.3", shift="0", delta="0.5", beta="1.2"),
    "example1_shifted": dict(coef="example1", gamma="0.6", shift="0.3", delta="0.25", beta="1"),
    "example1_truncated": dict(coef="example1", gamma="0.4", shift="0", delta="0.5", beta="1.5", R="2"),
}


def coefficient(c):
    if c["coef"] == "smooth_cosine":
        amp, off = mp.mpf(c["amplitude"]), mp.mpf(c["offset"])
        return (lambda y: off + amp * mp.cos(2 * mp.pi * y)), []
    g, s = mp.mpf(c["gamma"]), mp.mpf(c["shift"])

    def a(y):
        y = y - s
        v = abs(y - mp.nint(y))
        return v ** -g if v <= mp.mpf(1) / 4 else mp.mpf(4) ** g

    offs = [s, 1 - s, s + mp.mpf(1) / 4, s + mp.mpf(3) / 4, 1 - s - mp.mpf(1) / 4, 1 - s - mp.mpf(3) / 4]
    return a, [o % 1 for o in offs]


def evaluate(c):
    a, offs = coefficient(c)
    d, beta = mp.mpf(c["delta"]), mp.mpf(c["beta"])
    r = min(d, 1) / 8
    R = mp.mpf(c["R"]) if "R" in c else None
    H = R if R is not None else d * math.ceil(1 / d)
    f = lambda h: (a(h / d) + a(-h / d)) * h ** (-1 - beta)
    brk = sorted({d * (k + o) for k in range(int(H / d) + 2) for o in offs})
    xs = [r + (H - r) * mp.mpf(j) / 12 for j in range(1, 13)]
    cdf, acc, last = [], mp.mpf(0), r
    for x in xs:
        pts = [last] + [p for p in brk if last < p < x] + [x]
        acc += mp.quad(f, pts)
        cdf.append(acc)
        last = x
    tail = mp.mpf(0)
    if R is None and c["coef"] == "smooth_cosine":
        amp, off = mp.mpf(c["amplitude"]), mp.mpf(c["offset"])
        w = 2 * mp.pi / d
        osc = w ** beta * mp.re(mp.exp(-0.5j * mp.pi * beta) * mp.gammainc(-beta, -1j * w * H))
        tail = 2 * off * H ** -beta / beta + 2 * amp * osc
    elif R is None:
        K = int(H / d)
        per = lambda u: (a(u) + a(-u)) * mp.zeta(1 + beta, K + u)
        tail = d ** -beta * mp.quad(per, sorted({mp.mpf(0), mp.mpf(1), *offs}))
    return {"r": float(r), "H": float(H), "x": [float(x) for x in xs],
            "cdf": [mp.nstr(v, 20) for v in cdf], "rate": mp.nstr(acc + tail, 20)}


if __name__ == "__main__":
    out = {name: dict(c, **evaluate(c)) for name, c in CASES.items()}
    Path(__file__).with_suffix(".json").write_text(json.dumps(out, indent=1) + "\n")
    print(json.dumps({k: v["rate"] for k, v in out.items()}, indent=1))

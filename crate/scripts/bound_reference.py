"""Independent high-precision evaluation of the bound formulas.

Writes crates/core/tests/data/bound_reference.json, the frozen table the
acceptance suite compares against. Run from the repository root:

    python3 scripts/bound_reference.py
"""

import json
from pathlib import Path

from mpmath import mp, mpf, exp, log, sqrt, cbrt

mp.dps = 50

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/data/bound_reference.json"


def case(n, M, eta, p=1, m=1, m_prime=None, r0=1, gamma=(), phi_modulus=0, phi_sup_pow=0,
         m_l=1, m_u_p=1, e1=0, e2=0):
    return dict(n=n, M=M, eta=eta, p=p, m=m, m_prime=m_prime, r0=r0, gamma=list(gamma),
                phi_modulus=phi_modulus, phi_sup_pow=phi_sup_pow, m_l=m_l, m_u_p=m_u_p, e1=e1, e2=e2)


def gamma_at(c, l):
    g = c["gamma"]
    if not g:
        return mpf("0.5")
    return mpf(g[l - 1]) if l <= len(g) else mpf(g[-1])


def deltas(c):
    n, M, eta, r0 = mpf(c["n"]), mpf(c["M"]), mpf(c["eta"]), mpf(c["r0"])
    a = exp(-(1 - log(2)) * M)
    b = exp(M - r0 * n * eta - M * log(M) + M * log(r0 * n * eta))
    h1 = 1 / (n**2 * eta**4) + (n / (M * eta)) ** 2 * (a + b) ** 2
    h2 = (M / (n * eta)) ** (mpf(1) / c["m"]) + 1 / (n * eta) + n / M * (a + b)
    h3 = (n / (M * eta)) ** 2 * a
    return h1, h2, h3


def b_first(c):
    n, M, eta, p = mpf(c["n"]), mpf(c["M"]), mpf(c["eta"]), mpf(c["p"])
    alpha = p / (16 + 2 * p)
    zeta = p / (40 + 10 * p)
    t1 = max((M / (zeta * eta)) ** (20 / (8 + p)), 1) * max((M / eta) ** ((16 + 3 * p) / (16 + 2 * p)), 1)
    t1 = t1 / (alpha * sqrt(n))
    t2 = max((M / (zeta * eta)) ** (40 / (8 + p)), 1) / sqrt(n)
    return t1 + t2


def b3_like(c, dim):
    n, M, eta = mpf(c["n"]), mpf(c["M"]), mpf(c["eta"])
    h1, h2, h3 = deltas(c)
    return ((1 / eta) * (M / (n * eta)) ** (1 / mpf(2 * dim)) + sqrt(h1)
            + (sqrt(h2) + 1) / (eta * sqrt(M)) + sqrt(h3) + 1 / (eta**3 * cbrt(n)))


def covariate(c):
    n, M, eta, m = mpf(c["n"]), mpf(c["M"]), mpf(c["eta"]), c["m"]
    k = m // 2 + 1
    h1, _, _ = deltas(c)
    lead = M ** (mpf(k) / (2 * m)) * n ** (-mpf(k) / (2 * m) + mpf(1) / 4)
    reg = max([n ** (-gamma_at(c, l) / 2 - mpf(l) / (2 * m) + mpf(1) / 4) * M ** (mpf(l) / (2 * m))
               for l in range(1, k)], default=mpf(0))
    b2 = (eta ** (-mpf(k) / (2 * m)) + sqrt(h1)) * (lead + reg)
    return {"B1": b_first(c), "B2": b2, "B3": b3_like(c, m)}


def covariate_simplified(c):
    n, M, p, m = mpf(c["n"]), mpf(c["M"]), mpf(c["p"]), c["m"]
    k = m // 2 + 1
    reg = max([n ** (-gamma_at(c, l) / 2 - mpf(l) / (2 * m) + mpf(1) / 4) * M ** (mpf(l) / (2 * m))
               for l in range(1, k)], default=mpf(0))
    return {
        "B1'": M ** (40 / (8 + p)) / sqrt(n),
        "B2'": M ** (mpf(k) / (2 * m)) * n ** (-mpf(k) / (2 * m) + mpf(1) / 4) + reg,
        "B3'": (M / n) ** (1 / mpf(2 * m)) + 1 / sqrt(M) + 1 / cbrt(n),
    }


def rank(c):
    n, M, eta, m = mpf(c["n"]), mpf(c["M"]), mpf(c["eta"]), c["m"]
    mp_ = c["m_prime"] or m
    k = max(mp_ // 2, 1) + 1
    h1, _, _ = deltas(c)
    reg = max([n ** (-gamma_at(c, l) / 2 + mpf(1) / 4) * ((M / n) ** (mpf(l) / (2 * mp_)) + n ** (-mpf(l) / 4))
               for l in range(1, k)], default=mpf(0))
    inner = (M ** (mpf(k) / (2 * mp_)) * n ** (-mpf(k) / (2 * mp_) + mpf(1) / 4) + reg
             + n ** (-mpf(k) / 4 + mpf(1) / 4) + n ** (mpf(1) / 4) * sqrt(mpf(c["phi_modulus"])))
    b5 = (eta ** (-mpf(k) / (2 * mp_)) + sqrt(h1)) * inner
    extra = (n / M) ** (mpf(m) / mp_) * (n**2 / M**2 * mpf(c["phi_sup_pow"])) ** (mpf(1) / 4)
    return {"B4": b_first(c), "B5": b5, "B6": b3_like(c, mp_) + extra}


def cdf(c):
    n, M, p, m = mpf(c["n"]), mpf(c["M"]), mpf(c["p"]), c["m"]
    k = max(m // 2, 1) + 1
    reg = max([n ** (-gamma_at(c, l) / 2 + mpf(1) / 4) * ((M / n) ** (mpf(l) / (2 * m)) + n ** (-mpf(l) / 4))
               for l in range(1, k)], default=mpf(0))
    if m == 1:
        branch = M ** (-mpf(1) / 4)
    elif m == 2:
        branch = (1 / (M * n)) ** (mpf(1) / 6)
    else:
        branch = M ** (-mpf(3) / 2) * n ** ((3 - mpf(m)) / 2)
    return {
        "B4'": M ** (40 / (8 + p)) / sqrt(n),
        "B5'": M ** (mpf(k) / (2 * m)) * n ** (-mpf(k) / (2 * m) + mpf(1) / 4) + reg + n ** (-mpf(1) / 4),
        "B6'": (M / n) ** (1 / mpf(2 * m)) + 1 / sqrt(M) + branch,
    }


def bootstrap(c, target):
    n, eta = mpf(c["n"]), mpf(c["eta"])
    terms = covariate(c) if target == "covariate" else rank(c)
    err = mpf(c["e1"] if target == "covariate" else c["e2"])
    mu, ml = mpf(c["m_u_p"]), mpf(c["m_l"])
    L = max(ml - sqrt(mu) * n ** (-mpf(1) / 3) - 2 * err * (mu + (2 * mu) ** (mpf(1) / 4) * n ** (-mpf(5) / 12)), 0)
    g1, g2, g3 = list(terms.values())
    out = {
        "L": L,
        "variance_over_L": (1 + err**2) * g3 / L,
        "regression_error_over_L": (err / eta + 1 / (eta**2 * n ** (mpf(1) / 4))) / L,
    }
    out["total"] = g1 + g2 + out["variance_over_L"] + out["regression_error_over_L"]
    return out


def main():
    rows = []

    def add(mode, c, names, values):
        for name in names:
            rows.append({"mode": mode, "inputs": c, "term": name, "value": mp.nstr(values[name], 30)})

    c = case(100, 10, 0.5)
    h1, h2, h3 = deltas(c)
    add("delta", c, ["delta_h1", "delta_h2", "delta_h3"], {"delta_h1": h1, "delta_h2": h2, "delta_h3": h3})
    c = case(400, 3, 0.2, m=2, r0=0.5)
    h1, h2, h3 = deltas(c)
    add("delta", c, ["delta_h1"], {"delta_h1": h1})

    c = case(10_000, 8, 0.45)
    add("covariate-simplified", c, ["B1'", "B3'"], covariate_simplified(c))
    c = case(50_000, 5, 0.3, p=0.5, m=4, gamma=[0.3, 0.9])
    add("covariate-simplified", c, ["B2'"], covariate_simplified(c))

    c = case(10_000, 8, 0.45)
    add("covariate", c, ["B1", "B2", "B3"], covariate(c))
    c = case(2_000, 4, 0.25, p=0.5, m=3, gamma=[0.7])
    add("covariate", c, ["B1", "B2", "B3"], covariate(c))

    c = case(5_000, 6, 0.35, m=2, phi_modulus=1e-3, phi_sup_pow=1e-9)
    add("rank", c, ["B4", "B5", "B6"], rank(c))
    c = case(1_000, 2, 0.4, m=3, m_prime=1, gamma=[0.6], phi_modulus=2e-3, phi_sup_pow=1e-12)
    add("rank", c, ["B5", "B6"], rank(c))

    c = case(1_000_000, 16, 0.4)
    add("cdf", c, ["B5'", "B6'"], cdf(c))
    c = case(20_000, 9, 0.4, m=2)
    add("cdf", c, ["B6'"], cdf(c))
    c = case(20_000, 9, 0.4, m=5, gamma=[0.4, 0.6])
    add("cdf", c, ["B5'", "B6'"], cdf(c))

    c = case(1_000_000, 8, 0.45, e1=0.05, m_l=1.2, m_u_p=2)
    add("bootstrap", c, ["total"], bootstrap(c, "covariate"))
    c = case(30_000, 5, 0.3, m=2, e2=0.02, phi_modulus=1e-4, phi_sup_pow=1e-10)
    add("bootstrap-rank", c, ["total"], bootstrap(c, "rank"))

    assert len(rows) == 25, len(rows)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(rows, indent=1) + "\n")
    print(f"wrote {len(rows)} cases to {OUT}")


if __name__ == "__main__":
    main()

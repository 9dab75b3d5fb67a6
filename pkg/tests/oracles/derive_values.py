"""High-precision reference values frozen into the unit tests.

Run with ``python3 tests/oracles/derive_values.py``. Only mpmath is used, so
the numbers are independent of the package's float64 code paths.
"""

import mpmath as mp

mp.mp.dps = 50


def kl(q, p):
    q, p = mp.mpf(q), mp.mpf(p)
    out = mp.mpf(0)
    if q > 0:
        out += q * mp.log(q / p)
    if q < 1:
        out += (1 - q) * mp.log((1 - q) / (1 - p))
    return out


def kl_inv(q, c):
    q, c = mp.mpf(q), mp.mpf(c)
    lo, hi = q, mp.mpf(1)
    for _ in range(300):
        mid = (lo + hi) / 2
        if kl(q, mid) > c:
            hi = mid
        else:
            lo = mid
    return lo


def show(name, value):
    print(f"{name} = {mp.nstr(value, 20)}")


show("binary_kl(0.1, 0.3)", kl("0.1", "0.3"))
show("kl_inverse_upper(0.1, 0.2)", kl_inv("0.1", "0.2"))

post = [mp.mpf(x) for x in ("0.1", "0.2", "0.3", "0.15", "0.25")]
prior = [mp.mpf(x) for x in ("0.3", "0.1", "0.2", "0.25", "0.15")]
show("finite_kl(5 atoms)", mp.fsum(p * mp.log(p / r) for p, r in zip(post, prior)))

n, d, k = 100, mp.mpf("0.05"), mp.mpf(1)
show("mcallester(kl=1,n=100,d=.05)", mp.sqrt((k + mp.log((n + 2) / d)) / (2 * n - 1)))

n, k, e = 200, mp.mpf(2), mp.mpf("0.1")
show("pac_bayes_kl(emp=.1,kl=2,n=200)", kl_inv(e, (k + mp.log((n + 1) / d)) / n))

n, k, e = 1000, mp.mpf(1), mp.mpf("0.01")
c = (k + mp.log((n + 1) / d)) / n
show("localized(emp=.01,kl=1,n=1000)", mp.sqrt(2 * e * c) + 2 * c)

n, e = 100, mp.mpf("0.2")
B = mp.log(2 * mp.sqrt(n) / d) / (2 * n)
show("lambda_quadratic(emp=.2,kl=0,n=100)", (mp.sqrt(e + B) + mp.sqrt(B)) ** 2)

n, k, e, lam = 100, mp.mpf(1), mp.mpf("0.1"), mp.mpf(1)
budget = k + mp.log(1 / d)
show("catoni(emp=.1,kl=1,n=100,lam=1)", (1 - mp.exp(-lam * e - budget / n)) / (1 - mp.exp(-lam)))

# losses[h][z]; sample = (0, 2); gamma = 1
losses = [["0.2", "0.9", "0.5"], ["0.7", "0.1", "0.4"], ["0.5", "0.5", "1.0"]]
emp = [(mp.mpf(r[0]) + mp.mpf(r[2])) / 2 for r in losses]
z = mp.fsum(mp.exp(-x) for x in emp)
for h, x in enumerate(emp):
    show(f"gibbs_weight[{h}]", mp.exp(-x) / z)

n, g, k = 100, mp.mpf(10), mp.mpf(3)
log_xi = 2 * (1 + 2 * g / mp.sqrt(n)) + mp.log(1 + mp.sqrt(mp.e))
show("gibbs_prior(n=100,g=10,kl=3)", (k + log_xi + mp.log(1 / d)) / mp.sqrt(n))
show(
    "gibbs_dp(n=100,g=10,kl=3)",
    mp.sqrt(k / (2 * n))
    + g / n
    + (mp.log(4 / d) / 2) ** mp.mpf("0.25") * mp.sqrt(g) / mp.mpf(n) ** mp.mpf("0.75")
    + mp.sqrt(mp.log(4 * mp.sqrt(n) / d) / (2 * n)),
)

n, eps, k, e = 100, mp.mpf("0.02"), mp.mpf(2), mp.mpf("0.1")
budget = k + mp.log(4 * mp.sqrt(n) / d) + n * eps**2 / 2 + eps * mp.sqrt(n / mp.mpf(2) * mp.log(4 / d))
show("dp_kl(n=100,eps=.02,kl=2,emp=.1)", kl_inv(e, budget / n))

# d = 1 least squares KL: x = (0.5, -0.8, 0.3), y = (1.0, -0.4, 0.7), alpha = 0.2, gamma = 3, lam = 0.5
xs = [mp.mpf(v) for v in ("0.5", "-0.8", "0.3")]
ys = [mp.mpf(v) for v in ("1.0", "-0.4", "0.7")]
a, g, lam = mp.mpf("0.2"), mp.mpf(3), mp.mpf("0.5")
sh = mp.fsum(x * x for x in xs) / 3 + a
s_hat = mp.fsum(x * y for x, y in zip(xs, ys)) / 3
show("ls_kl_d1", (mp.log(sh / lam) + lam / sh - 1 + lam * g * (s_hat / sh) ** 2) / 2)

"""Dev-only: fit 3-component circular Gaussian mixtures to the analytic
exponential and de Vaucouleurs profiles on r/Re in [0, 8], print constants."""
import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.special import gammainc

# Half-light constants: gammainc(2n, b) = 0.5.
B1 = brentq(lambda b: gammainc(2.0, b) - 0.5, 1.0, 3.0, xtol=1e-15)
B4 = brentq(lambda b: gammainc(8.0, b) - 0.5, 5.0, 10.0, xtol=1e-14)
print("B1 =", repr(B1))
print("B4 =", repr(B4))


def h_exp(r):
    return B1 ** 2 / (2 * np.pi) * np.exp(-B1 * r)


def h_dev(r):
    c = B4 ** 8 / (8 * np.pi * 5040.0)
    return c * np.exp(-B4 * np.maximum(r, 0.0) ** 0.25)


def mixture(r, w, v):
    r = np.asarray(r)[:, None]
    return np.sum(w / (2 * np.pi * v) * np.exp(-(r ** 2) / (2 * v)), axis=1)


def fit(profile, v0):
    r = np.linspace(0.0, 8.0, 401)
    target = profile(r)

    def unpack(x):
        a = np.concatenate([x[:2], [0.0]])
        w = np.exp(a) / np.exp(a).sum()
        v = np.exp(x[2:])
        return w, v

    def resid(x):
        w, v = unpack(x)
        return mixture(r, w, v) - target

    x0 = np.concatenate([[0.0, 0.0], np.log(v0)])
    sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, max_nfev=20000)
    w, v = unpack(sol.x)
    order = np.argsort(v)
    w, v = w[order], v[order]
    rms = np.sqrt(np.mean(resid(sol.x) ** 2))
    rel = rms / np.sqrt(np.mean(target ** 2))
    return w, v, rms, rel


for name, prof, v0 in [
    ("EXPONENTIAL", h_exp, [0.12, 0.5, 1.5]),
    ("DE_VAUCOULEURS", h_dev, [0.005, 0.15, 2.5]),
]:
    w, v, rms, rel = fit(prof, v0)
    print(f"{name}: rms={rms:.3e} rel={rel:.3e} sum_w={w.sum()!r}")
    print(f"  weights = {list(map(repr, w))}")
    print(f"  vars    = {list(map(repr, v))}")

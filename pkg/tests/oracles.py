"""Closed-form references that share no code with the package."""

import math

import numpy as np


def phi_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def gaussian_imbalance(x, buyer, seller, hbar=1.0):
    """``D(x) - e^x S(x)`` for one Gaussian buyer and one Gaussian seller.

    ``buyer = (q0, sigma, d)``, ``seller = (q0, sigma, s)``. A real Gaussian
    amplitude of demand width sigma has a centered supply density of width
    ``hbar / (2 sigma)``.
    """
    qb, sb, d = buyer
    _, ss, s = seller
    sp = hbar / (2.0 * ss)
    return d * phi_cdf((x - qb) / sb) - math.exp(x) * s * phi_cdf(-x / sp)


def scan_root(g, lo=-12.0, hi=12.0, n=100_000):
    """First sign change of ``g`` on an ``n``-point scan; returns (root, step)."""
    x = np.linspace(lo, hi, n)
    v = np.array([g(t) for t in x])
    i = int(np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0])
    # linear interpolation inside the bracketing cell
    root = x[i] - v[i] * (x[i + 1] - x[i]) / (v[i + 1] - v[i])
    return float(root), float(x[1] - x[0])


def gaussian_wigner(p, q, q0, sigma, hbar=1.0):
    """Wigner function of a real Gaussian amplitude with demand density N(q0, sigma^2)."""
    return np.exp(-((q - q0) ** 2) / (2 * sigma ** 2) - 2 * sigma ** 2 * p ** 2 / hbar ** 2) / (math.pi * hbar)

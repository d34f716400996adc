"""Van Genuchten retention and permeability laws.

Heads are in meters, permeabilities in m/s. Every function accepts scalars or
numpy arrays and returns the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "DomainError",
    "MaterialParams",
    "SOIL_PRESETS",
    "soil",
    "theta_hat",
    "water_content",
    "permeability",
    "inv_permeability",
    "d_water_content",
    "d_inv_permeability",
    "lscheme_bound",
]

# derivative formulas use theta_hat <= 1 - SAT_CLAMP (the K' singularity at saturation)
SAT_CLAMP = 1e-12


class DomainError(ValueError):
    """Raised for non-finite pressure heads or invalid soil parameters."""


@dataclass(frozen=True)
class MaterialParams:
    """Van Genuchten parameters of a single soil.

    Parameters
    ----------
    theta_r, theta_s : float
        Residual and saturated volumetric water content.
    alpha : float
        Inverse air-entry length [1/m].
    m : float
        Shape exponent, strictly greater than one.
    k_s : float
        Saturated permeability [m/s].
    """

    theta_r: float
    theta_s: float
    alpha: float
    m: float
    k_s: float

    def __post_init__(self):
        if not (0.0 <= self.theta_r < self.theta_s <= 1.0):
            raise DomainError(
                f"need 0 <= theta_r < theta_s <= 1, got {self.theta_r}, {self.theta_s}")
        if not (self.alpha > 0 and self.m > 1 and self.k_s > 0):
            raise DomainError("need alpha > 0, m > 1 and k_s > 0")

    def to_dict(self) -> dict:
        return {"theta_r": self.theta_r, "theta_s": self.theta_s,
                "alpha": self.alpha, "m": self.m, "k_s": self.k_s}


SOIL_PRESETS = {
    "clay": MaterialParams(theta_r=0.04, theta_s=0.4, alpha=0.2, m=1.5, k_s=1e-6),
    "silt": MaterialParams(theta_r=0.08, theta_s=0.4, alpha=0.1, m=1.2, k_s=1e-8),
    "sand": MaterialParams(theta_r=0.0, theta_s=0.4, alpha=2.0, m=3.0, k_s=1e-4),
}


def soil(name: str) -> MaterialParams:
    try:
        return SOIL_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown soil {name!r}; choose from {sorted(SOIL_PRESETS)}") from None


def _checked(psi):
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise DomainError("pressure head must be finite")
    return psi


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def _suction_power(psi, p):
    # s = (-alpha [psi]_-)^m, zero on the saturated side
    return (-p.alpha * np.minimum(psi, 0.0)) ** p.m


def theta_hat(psi, p: MaterialParams):
    """Effective saturation in (0, 1]; identically 1 for ``psi >= 0``."""
    psi = _checked(psi)
    s = _suction_power(psi, p)
    return _out((1.0 + s) ** (-(p.m - 1.0) / p.m), psi)


def water_content(psi, p: MaterialParams):
    psi = _checked(psi)
    return _out(p.theta_r + theta_hat(psi, p) * (p.theta_s - p.theta_r), psi)


def _kr_parts(psi, p, clamp):
    s = _suction_power(psi, p)
    b = (p.m - 1.0) / p.m
    th = (1.0 + s) ** (-b)
    # 1 - th^(m/(m-1)) == s / (1 + s), without the cancellation
    v = s / (1.0 + s)
    with np.errstate(divide="ignore"):
        log_v = np.where(s > 0.0, -np.log1p(1.0 / np.where(s > 0.0, s, 1.0)), -np.inf)
    if clamp:
        th = np.minimum(th, 1.0 - SAT_CLAMP)
        v_min = 1.0 - (1.0 - SAT_CLAMP) ** (p.m / (p.m - 1.0))
        v = np.maximum(v, v_min)
        log_v = np.maximum(log_v, np.log(v_min))
    # f = 1 - v^b via expm1: v -> 1 in dry soil would otherwise cancel
    f = -np.expm1(b * log_v)
    return s, b, th, v, f


def permeability(psi, p: MaterialParams):
    """Mualem-Van Genuchten permeability ``K(psi)`` in m/s."""
    psi = _checked(psi)
    _, _, th, _, f = _kr_parts(psi, p, clamp=False)
    k = p.k_s * np.sqrt(th) * f ** 2
    # f underflows to 0 for very dry states; keep K strictly positive
    k = np.maximum(k, np.finfo(float).tiny)
    return _out(k, psi)


def inv_permeability(psi, p: MaterialParams):
    return _out(1.0 / np.asarray(permeability(psi, p)), np.asarray(psi))


def _d_theta_hat(psi, p):
    # d theta_hat / d psi = (m-1) alpha (-alpha psi)^(m-1) (1+s)^(-(2m-1)/m)
    neg = np.minimum(psi, 0.0)
    s = (-p.alpha * neg) ** p.m
    return (p.m - 1.0) * p.alpha * (-p.alpha * neg) ** (p.m - 1.0) \
        * (1.0 + s) ** (-(2.0 * p.m - 1.0) / p.m)


def d_water_content(psi, p: MaterialParams):
    """Specific moisture capacity ``d theta / d psi`` [1/m]."""
    psi = _checked(psi)
    return _out(_d_theta_hat(psi, p) * (p.theta_s - p.theta_r), psi)


def d_inv_permeability(psi, p: MaterialParams):
    """``d (1/K) / d psi`` [s/m^2], with the saturation clamp applied."""
    psi = _checked(psi)
    _, b, th, v, f = _kr_parts(psi, p, clamp=True)
    a = 1.0 / b
    # dK/dth = K_s [ f^2 / (2 sqrt(th)) + 2 sqrt(th) f v^(b-1) th^(a-1) ]
    dk_dth = p.k_s * (0.5 * f ** 2 / np.sqrt(th)
                      + 2.0 * np.sqrt(th) * f * v ** (b - 1.0) * th ** (a - 1.0))
    dk = dk_dth * _d_theta_hat(psi, p)
    k = np.maximum(p.k_s * np.sqrt(th) * f ** 2, np.finfo(float).tiny)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(dk > 0.0, -dk / k ** 2, 0.0)
    return _out(out, psi)


def lscheme_bound(p: MaterialParams, psi_min: float = -1e4, rtol: float = 1e-8) -> float:
    """Supremum of ``d_water_content`` over ``[psi_min, 0]``.

    A log-spaced scan locates the peak, then a bounded scalar search refines it.
    """
    grid = -np.logspace(np.log10(-psi_min), -8, 4001)
    vals = d_water_content(grid, p)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda x: -d_water_content(x, p), bounds=(lo, hi),
                          method="bounded",
                          options={"xatol": rtol * max(abs(lo), 1e-12)})
    return float(max(-res.fun, vals[i]))

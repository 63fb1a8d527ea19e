"""Isotropic linear elasticity: stiffness C, compliance D and kappa_E.

Symmetric tensors are handled either as (..., 3, 3) arrays or as Mandel
6-vectors ``(xx, yy, zz, sqrt2*yz, sqrt2*xz, sqrt2*xy)``, in which the
Frobenius product becomes the Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)
_MANDEL_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_MANDEL_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])


def to_mandel(t):
    t = np.asarray(t, dtype=float)
    return np.stack([t[..., i, j] for i, j in _MANDEL_PAIRS], axis=-1) * _MANDEL_SCALE


def from_mandel(v):
    v = np.asarray(v, dtype=float) / _MANDEL_SCALE
    out = np.empty(v.shape[:-1] + (3, 3))
    for m, (i, j) in enumerate(_MANDEL_PAIRS):
        out[..., i, j] = v[..., m]
        out[..., j, i] = v[..., m]
    return out


def symmetrize(t):
    return 0.5 * (t + np.swapaxes(t, -1, -2))


def trace(t):
    return np.trace(t, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class MaterialLaw:
    lam: float
    mu: float
    C6: np.ndarray = field(init=False, repr=False, compare=False)
    D6: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.mu > 0 or not 3 * self.lam + 2 * self.mu > 0:
            raise ValueError(
                f"inadmissible Lame parameters lambda={self.lam}, mu={self.mu}"
            )
        m = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
        C6 = 2 * self.mu * np.eye(6) + self.lam * np.outer(m, m)
        D6 = (np.eye(6) - self.lam / (3 * self.lam + 2 * self.mu) * np.outer(m, m)) / (
            2 * self.mu
        )
        object.__setattr__(self, "C6", C6)
        object.__setattr__(self, "D6", D6)

    def apply_C(self, e):
        """``2 mu e + lambda tr(e) I`` on (..., 3, 3) arrays."""
        e = np.asarray(e, dtype=float)
        return 2 * self.mu * e + self.lam * trace(e)[..., None, None] * np.eye(3)

    def apply_D(self, s):
        s = np.asarray(s, dtype=float)
        c = self.lam / (3 * self.lam + 2 * self.mu)
        return (s - c * trace(s)[..., None, None] * np.eye(3)) / (2 * self.mu)

    @property
    def kappa(self) -> float:
        return kappa(self)


def apply_C(law: MaterialLaw, e):
    return law.apply_C(e)


def apply_D(law: MaterialLaw, s):
    return law.apply_D(s)


def kappa(law: MaterialLaw) -> float:
    """Stabilization constant: half the trace of the 6x6 Mandel compliance.

    For isotropic materials this is ``(6 - 3 lam / (3 lam + 2 mu)) / (4 mu)``.
    """
    return 0.5 * float(np.trace(law.D6))

"""Hyperbolic geometry on H and D, and the modular group PSL2(Z)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel

REDUCE_MAXITER = 10_000


class ReductionError(RuntimeError):
    pass


def as_upper(z) -> np.ndarray:
    """Validate points of the upper half-plane; returns a complex array."""
    z = np.asarray(z, dtype=np.complex128)
    if not np.all(z.imag > 0):
        raise ValueError("points must satisfy Im z > 0")
    return z


def as_disk(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.complex128)
    if not np.all(np.abs(w) < 1):
        raise ValueError("points must satisfy |w| < 1")
    return w


@dataclass(frozen=True)
class ModularMatrix:
    """Element of PSL2(Z), stored with c > 0 or (c = 0, d > 0)."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        a, b, c, d = (int(v) for v in (self.a, self.b, self.c, self.d))
        if a * d - b * c != 1:
            raise ValueError(f"determinant of ({a},{b},{c},{d}) is not 1")
        if c < 0 or (c == 0 and d < 0):
            a, b, c, d = -a, -b, -c, -d
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    def __matmul__(self, other: "ModularMatrix") -> "ModularMatrix":
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = other.a, other.b, other.c, other.d
        return ModularMatrix(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def inverse(self) -> "ModularMatrix":
        return ModularMatrix(self.d, -self.b, -self.c, self.a)

    def act(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def j(self, z):
        return self.c * z + self.d

    def is_identity(self) -> bool:
        return (self.a, self.b, self.c, self.d) == (1, 0, 0, 1)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __str__(self) -> str:
        return f"{self.a},{self.b},{self.c},{self.d}"

    @classmethod
    def parse(cls, text: str) -> "ModularMatrix":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected 'a,b,c,d', got {text!r}")
        return cls(*(int(p) for p in parts))


IDENTITY = ModularMatrix(1, 0, 0, 1)
S = ModularMatrix(0, -1, 1, 0)
T = ModularMatrix(1, 1, 0, 1)


def T_power(n: int) -> ModularMatrix:
    return ModularMatrix(1, n, 0, 1)


def mobius_act(gamma: ModularMatrix, z):
    """Return (gamma z, j(gamma, z))."""
    z = as_upper(z)
    j = gamma.j(z)
    out = (gamma.a * z + gamma.b) / j
    if out.ndim == 0:
        return complex(out), complex(j)
    return out, j


def four_point(z, eta, zeta):
    """Cross-ratio [z, conj eta, eta, conj zeta] on H."""
    z, eta, zeta = (np.asarray(v, dtype=np.complex128) for v in (z, eta, zeta))
    return (z - np.conj(zeta)) * (eta - np.conj(eta)) / ((z - np.conj(eta)) * (eta - np.conj(zeta)))


def disk_four_point(z, eta, zeta):
    z, eta, zeta = (np.asarray(v, dtype=np.complex128) for v in (z, eta, zeta))
    return (1 - z * np.conj(zeta)) * (1 - eta * np.conj(eta)) / ((1 - z * np.conj(eta)) * (1 - eta * np.conj(zeta)))


def w1(z, eta):
    """4 Im z Im eta / |z - conj eta|^2, in (0, 1]."""
    z = np.asarray(z, dtype=np.complex128)
    eta = np.asarray(eta, dtype=np.complex128)
    return 4.0 * z.imag * eta.imag / np.abs(z - np.conj(eta)) ** 2


def disk_w1(u, v):
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    return (1 - np.abs(u) ** 2) * (1 - np.abs(v) ** 2) / np.abs(1 - u * np.conj(v)) ** 2


def coincidence_weight(z, eta, t: float):
    """Pairing weight w_t(z, eta) = (4 Im z Im eta / |z - conj eta|^2)^t."""
    if t <= 1:
        raise ValueError("t must exceed 1")
    return w1(z, eta) ** t


def cayley(z):
    z = np.asarray(z, dtype=np.complex128)
    return (z - 1j) / (z + 1j)


def cayley_inv(w):
    w = np.asarray(w, dtype=np.complex128)
    return 1j * (1 + w) / (1 - w)


def disk_from_center_H(center, u):
    """Mobius map D -> H sending 0 to ``center``."""
    return (center - np.conj(center) * u) / (1 - u)


def disk_to_center_H(center, z):
    return (z - center) / (z - np.conj(center))


def disk_from_center_D(center, u):
    """Disk automorphism sending 0 to ``center``."""
    return (u + center) / (1 + np.conj(center) * u)


def disk_to_center_D(center, z):
    return (z - center) / (1 - np.conj(center) * z)


def midpoint_H(z, zeta):
    """Hyperbolic midpoint of two points of H."""
    c = disk_to_center_H(z, zeta)
    r = np.abs(c)
    s = np.where(r > 0, r / (1 + np.sqrt(1 - r * r)), 0.0)
    u = np.where(r > 0, c / np.where(r > 0, r, 1.0) * s, 0.0)
    return disk_from_center_H(z, u)


def midpoint_D(z, zeta):
    c = disk_to_center_D(z, zeta)
    r = np.abs(c)
    s = np.where(r > 0, r / (1 + np.sqrt(1 - r * r)), 0.0)
    u = np.where(r > 0, c / np.where(r > 0, r, 1.0) * s, 0.0)
    return disk_from_center_D(z, u)


def reduce_points(z):
    """Vectorized reduction. Returns (z0, mats, ok) with gamma z = z0."""
    z = as_upper(z)
    flat = np.ascontiguousarray(z.ravel())
    z0, mats, ok = _accel.reduce_points(flat, REDUCE_MAXITER)
    return z0.reshape(z.shape), mats.reshape(z.shape + (4,)), ok.reshape(z.shape).astype(bool)


def reduce_to_F(z) -> tuple[complex, ModularMatrix]:
    """Return (z0, gamma) with gamma z = z0 in F."""
    z0, mats, ok = reduce_points(np.array([complex(z)]))
    if not ok[0]:
        raise ReductionError(f"reduction of {z} exceeded {REDUCE_MAXITER} steps")
    return complex(z0[0]), ModularMatrix(*mats[0].tolist())


def in_F(z, tol: float = 1e-12) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    return (np.abs(z.real) <= 0.5 + tol) & (np.abs(z) >= 1 - tol)


def random_modular(rng: np.random.Generator, length: int = 6) -> ModularMatrix:
    g = IDENTITY
    for _ in range(length):
        g = g @ (S if rng.random() < 0.5 else T_power(int(rng.integers(-3, 4))))
    return g

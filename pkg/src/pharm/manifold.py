"""Target manifolds, nearest-point projection and homotopy charges of loops.

Circle targets live in R^2, the flat torus is the product of two unit circles
in R^4 and Euclidean targets are unconstrained.  A homotopy class of a loop is
recorded by its winding vector; its length is lambda = 2*pi*|windings|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
PROJECTION_FLOOR = 1e-14
GAP_LIMIT = math.pi - 1e-9


class ProjectionError(ValueError):
    """Raised when a circle block is too close to the origin to be projected."""


class WindingError(ValueError):
    """Raised for loops whose winding cannot be read off reliably."""


@dataclass(frozen=True)
class TargetManifold:
    kind: str
    dim: int = 2

    def __post_init__(self):
        if self.kind not in ("circle", "torus", "euclidean"):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "euclidean" and self.dim < 1:
            raise ValueError("euclidean dimension must be positive")

    @property
    def ambient_dim(self) -> int:
        return {"circle": 2, "torus": 4}.get(self.kind, self.dim)

    @property
    def n_factors(self) -> int:
        """Number of circle factors, which is also the length of a winding vector."""
        return {"circle": 1, "torus": 2}.get(self.kind, 0)

    @property
    def systole(self) -> float:
        return math.inf if self.kind == "euclidean" else TWO_PI

    @property
    def name(self) -> str:
        return f"euclidean:{self.dim}" if self.kind == "euclidean" else self.kind

    def project(self, x):
        return project(self, x)

    def zero_charge(self) -> "HomotopyCharge":
        return HomotopyCharge((0,) * self.n_factors)


CIRCLE = TargetManifold("circle")
TORUS = TargetManifold("torus")


def euclidean(dim: int) -> TargetManifold:
    return TargetManifold("euclidean", int(dim))


def parse_target(spec: str) -> TargetManifold:
    """Parse ``"circle"``, ``"torus"`` or ``"euclidean:<dim>"``."""
    s = str(spec).strip().lower()
    if s == "circle":
        return CIRCLE
    if s == "torus":
        return TORUS
    if s.startswith("euclidean:"):
        try:
            dim = int(s.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad euclidean dimension in {spec!r}") from exc
        return euclidean(dim)
    raise ValueError(f"unknown target {spec!r}")


@dataclass(frozen=True, order=True)
class HomotopyCharge:
    windings: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "windings", tuple(int(w) for w in self.windings))

    @property
    def lam(self) -> float:
        return lambda_of(self)

    @property
    def l1(self) -> int:
        return sum(abs(w) for w in self.windings)

    def is_zero(self) -> bool:
        return all(w == 0 for w in self.windings)

    def __add__(self, other: "HomotopyCharge") -> "HomotopyCharge":
        if len(self.windings) != len(other.windings):
            raise ValueError("charges of different rank")
        return HomotopyCharge(tuple(a + b for a, b in zip(self.windings, other.windings)))

    def __neg__(self) -> "HomotopyCharge":
        return HomotopyCharge(tuple(-w for w in self.windings))

    def __str__(self) -> str:
        return "(" + ",".join(str(w) for w in self.windings) + ")"


def charge_sum(charges: Sequence[HomotopyCharge], rank: int) -> HomotopyCharge:
    total = HomotopyCharge((0,) * rank)
    for c in charges:
        total = total + c
    return total


def lambda_of(charge: HomotopyCharge) -> float:
    return TWO_PI * math.sqrt(sum(w * w for w in charge.windings))


def project(m: TargetManifold, x):
    """Nearest-point retraction onto ``m``; works on arrays of shape (..., ambient_dim)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.ambient_dim:
        raise ValueError(f"expected ambient dimension {m.ambient_dim}, got {x.shape[-1]}")
    if m.kind == "euclidean":
        return x.copy()
    blocks = x.reshape(x.shape[:-1] + (m.n_factors, 2))
    norms = np.sqrt(np.sum(blocks * blocks, axis=-1, keepdims=True))
    if np.any(norms < PROJECTION_FLOOR):
        raise ProjectionError("ambiguous projection")
    return (blocks / norms).reshape(x.shape)


def angle_increments(a, b):
    """Principal-branch angle from unit 2-vectors ``a`` to ``b`` (arrays (..., 2))."""
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
    return np.arctan2(cross, dot)


def loop_charge(m: TargetManifold, loop) -> HomotopyCharge:
    """Winding vector of a closed discrete loop.

    The loop is implicitly closed; a repeated first point at the end is ignored.
    Each consecutive pair must subtend an angle below pi in every circle factor.
    """
    pts = np.asarray(loop, dtype=float)
    if m.kind == "euclidean":
        return HomotopyCharge(())
    if pts.ndim != 2 or pts.shape[1] != m.ambient_dim:
        raise ValueError("loop must be an (n, ambient_dim) array")
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    nxt = np.roll(pts, -1, axis=0)
    windings = []
    for k in range(m.n_factors):
        inc = angle_increments(pts[:, 2 * k:2 * k + 2], nxt[:, 2 * k:2 * k + 2])
        if np.any(np.abs(inc) >= GAP_LIMIT):
            raise WindingError("under-resolved loop")
        turns = float(np.sum(inc)) / TWO_PI
        w = round(turns)
        if abs(turns - w) >= 0.25:
            raise WindingError("ambiguous winding")
        windings.append(int(w))
    return HomotopyCharge(tuple(windings))

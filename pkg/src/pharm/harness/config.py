"""Study configuration loaded from JSON.

Keys (all optional except where noted)::

    domain        "unit_disk" | "rectangle:<w>,<h>" | "annulus:<r_in>,<r_out>"
    resolution    inverse grid spacing 1/h (integer, default 128)
    target        "circle" | "torus" | "euclidean:<dim>"
    boundary      "degree:<d>" | "winding:<w1>,<w2>" | "constant" | "wave:<amp>,<k>"
    ladder        strictly increasing exponents in (1, 2)
    solver        solver options (max_iters, grad_tol, eps, ...)
    delta         positive radius budget for ball growth
    out           output directory
    seed          unsigned 64-bit integer
    perturbation  amplitude of seeded noise added to the initial field
    scan          {"resolution": 64, "rho": 0.1, "extent": 0.2, "step": 0.1}
    field         optional snapshot CSV used by ``energy`` and ``growballs``
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from ..field import DomainGrid, boundary_values, make_domain
from ..manifold import TargetManifold, parse_target
from ..solver import ContinuationLadder, SolverOptions


class ConfigError(ValueError):
    """Invalid or missing configuration; the CLI exits with status 3."""


DEFAULT_LADDER = (1.5, 1.7, 1.8, 1.9, 1.95)
DEFAULT_SOLVER = {"grad_tol": 2e-3}
DEFAULT_SCAN = {"resolution": 64, "rho": 0.1, "extent": 0.2, "step": 0.1}


@dataclass(frozen=True)
class StudyConfig:
    domain: str = "unit_disk"
    resolution: int = 128
    target: str = "circle"
    boundary: str = "degree:1"
    ladder: tuple = DEFAULT_LADDER
    solver: dict = dc_field(default_factory=lambda: dict(DEFAULT_SOLVER))
    delta: float = 0.5
    out: str = "out"
    seed: int = 0
    perturbation: float = 0.0
    scan: dict = dc_field(default_factory=lambda: dict(DEFAULT_SCAN))
    field: str | None = None

    def __post_init__(self):
        try:
            res = int(self.resolution)
        except (TypeError, ValueError) as exc:
            raise ConfigError("resolution must be an integer") from exc
        if res != self.resolution or res < 8:
            raise ConfigError("resolution must be an integer of at least 8")
        try:
            parse_target(self.target)
            make_domain(self.domain, 0.5)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        lad = tuple(float(p) for p in self.ladder)
        if not lad or any(not 1.0 < p < 2.0 for p in lad) or any(b <= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("ladder must be strictly increasing in (1, 2)")
        object.__setattr__(self, "ladder", lad)
        if not (isinstance(self.delta, (int, float)) and math.isfinite(self.delta) and self.delta > 0):
            raise ConfigError("delta must be positive")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.perturbation >= 0:
            raise ConfigError("perturbation must be nonnegative")
        try:
            SolverOptions.from_dict(self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver block: {exc}") from exc
        scan = dict(DEFAULT_SCAN)
        bad = set(self.scan or {}) - set(scan)
        if bad:
            raise ConfigError(f"unknown scan keys: {sorted(bad)}")
        scan.update(self.scan or {})
        if not (scan["rho"] > 0 and scan["step"] > 0 and scan["extent"] >= 0 and int(scan["resolution"]) >= 8):
            raise ConfigError("scan block has invalid values")
        object.__setattr__(self, "scan", scan)

    @property
    def h(self) -> float:
        return 1.0 / self.resolution

    def grid(self, resolution: int | None = None) -> DomainGrid:
        return make_domain(self.domain, 1.0 / (resolution or self.resolution))

    def manifold(self) -> TargetManifold:
        return parse_target(self.target)

    def boundary_data(self, grid: DomainGrid):
        try:
            return boundary_values(grid, self.manifold(), self.boundary)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_dict(self.solver)

    def continuation(self) -> ContinuationLadder:
        return ContinuationLadder(self.ladder, (self.solver_options(),))

    def with_overrides(self, **kw) -> "StudyConfig":
        d = self.as_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return StudyConfig(**d)

    def as_dict(self) -> dict:
        return {
            "domain": self.domain,
            "resolution": self.resolution,
            "target": self.target,
            "boundary": self.boundary,
            "ladder": list(self.ladder),
            "solver": dict(self.solver),
            "delta": self.delta,
            "out": self.out,
            "seed": self.seed,
            "perturbation": self.perturbation,
            "scan": dict(self.scan),
            "field": self.field,
        }


def load_config(path) -> StudyConfig:
    if path is None:
        raise ConfigError("no configuration given (use --config)")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"configuration file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = set(StudyConfig.__dataclass_fields__)
    bad = set(data) - known
    if bad:
        raise ConfigError(f"unknown configuration keys: {sorted(bad)}")
    try:
        return StudyConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

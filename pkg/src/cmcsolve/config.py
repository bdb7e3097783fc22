"""Run configuration: a flat key = value text file.

Schema (one `key = value` per line, '#' starts a comment, keys are
dot-namespaced, values are scalars or comma-separated pairs):

  model                 minkowski | euclidean
  omega.kind            ball | ellipse
  omega.center          x, y
  omega.radius          R                (ball)
  omega.semi_axes       a, b             (ellipse)
  omega_tilde.*         same as omega.*
  grid.n_rho            int >= 8
  grid.n_phi            even int >= 16
  solve.tol_residual    float            (default 1e-10)
  solve.max_newton      int              (default 40)
  solve.eps_convexity   float            (default 1e-8)
  solve.eps_space       float            (default 1e-6)
  homotopy.enabled      true | false     (default false)
  homotopy.steps        int              (default 12)
  homotopy.t_min        auto | float     (default auto)
  seed.strategy         radial | quadratic | file   (default radial)
  seed.path             path             (required for seed.strategy = file)
  output.dir            path             (default ".")

Unknown keys are rejected; all numeric fields are validated against their
admissible ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domains import Ball, ConvexDomain, Ellipse
from .errors import ConfigError
from .kernel import ModelKind
from .solver import SolveOptions

_KNOWN_KEYS = {
    "model",
    "omega.kind", "omega.center", "omega.radius", "omega.semi_axes",
    "omega_tilde.kind", "omega_tilde.center", "omega_tilde.radius",
    "omega_tilde.semi_axes",
    "grid.n_rho", "grid.n_phi",
    "solve.tol_residual", "solve.max_newton", "solve.eps_convexity",
    "solve.eps_space",
    "homotopy.enabled", "homotopy.steps", "homotopy.t_min",
    "seed.strategy", "seed.path",
    "output.dir",
}


@dataclass
class RunConfig:
    model: ModelKind
    omega: ConvexDomain
    omega_tilde: ConvexDomain
    n_rho: int
    n_phi: int
    options: SolveOptions
    homotopy_enabled: bool = False
    homotopy_steps: int = 12
    homotopy_t_min: float | None = None   # None = auto
    seed_strategy: str = "radial"
    seed_path: str | None = None
    output_dir: Path = field(default_factory=lambda: Path("."))


def _parse_lines(path) -> dict:
    entries = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _get_float(entries, key, default=None):
    if key not in entries:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(entries[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {entries[key]!r}") from exc


def _get_int(entries, key, default=None):
    v = _get_float(entries, key, default)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {v}")
    return int(v)


def _get_pair(entries, key):
    if key not in entries:
        raise ConfigError(f"missing required key {key!r}")
    parts = entries[key].split(",")
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected two comma-separated numbers")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{key}: not numeric: {entries[key]!r}") from exc


def _parse_domain(entries, prefix) -> ConvexDomain:
    kind = entries.get(f"{prefix}.kind")
    if kind is None:
        raise ConfigError(f"missing required key {prefix}.kind")
    center = _get_pair(entries, f"{prefix}.center")
    try:
        if kind == "ball":
            return Ball(center, _get_float(entries, f"{prefix}.radius"))
        if kind == "ellipse":
            return Ellipse(center, _get_pair(entries, f"{prefix}.semi_axes"))
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc
    raise ConfigError(f"{prefix}.kind: unknown domain kind {kind!r}")


def parse_config(path) -> RunConfig:
    entries = _parse_lines(path)

    model_name = entries.get("model")
    if model_name not in ("minkowski", "euclidean"):
        raise ConfigError(f"model must be minkowski or euclidean, got {model_name!r}")
    model = ModelKind(model_name)

    omega = _parse_domain(entries, "omega")
    omega_tilde = _parse_domain(entries, "omega_tilde")

    n_rho = _get_int(entries, "grid.n_rho")
    n_phi = _get_int(entries, "grid.n_phi")
    if n_rho < 8:
        raise ConfigError(f"grid.n_rho must be >= 8, got {n_rho}")
    if n_phi < 16 or n_phi % 2:
        raise ConfigError(f"grid.n_phi must be even and >= 16, got {n_phi}")

    try:
        options = SolveOptions(
            tol_residual=_get_float(entries, "solve.tol_residual", 1e-10),
            max_newton=_get_int(entries, "solve.max_newton", 40),
            eps_convexity=_get_float(entries, "solve.eps_convexity", 1e-8),
            eps_space=_get_float(entries, "solve.eps_space", 1e-6),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    hom_enabled = entries.get("homotopy.enabled", "false").lower()
    if hom_enabled not in ("true", "false"):
        raise ConfigError(f"homotopy.enabled must be true or false, got {hom_enabled!r}")
    t_min_raw = entries.get("homotopy.t_min", "auto")
    t_min = None if t_min_raw == "auto" else float(t_min_raw)
    if t_min is not None and not 0.0 < t_min <= 1.0:
        raise ConfigError(f"homotopy.t_min must lie in (0, 1], got {t_min}")
    steps = _get_int(entries, "homotopy.steps", 12)
    if steps < 1:
        raise ConfigError(f"homotopy.steps must be >= 1, got {steps}")

    strategy = entries.get("seed.strategy", "radial")
    if strategy not in ("radial", "quadratic", "file"):
        raise ConfigError(f"seed.strategy must be radial, quadratic or file, "
                          f"got {strategy!r}")
    seed_path = entries.get("seed.path")
    if strategy == "file" and seed_path is None:
        raise ConfigError("seed.strategy = file requires seed.path")

    if model is ModelKind.MINKOWSKI:
        # fail fast at parse time; ProblemSpec re-validates
        phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        rb = np.atleast_1d(omega_tilde.boundary_radius(phi))
        pts = omega_tilde.peak + rb[:, None] * np.stack([np.cos(phi), np.sin(phi)],
                                                        axis=-1)
        if float(np.max(np.linalg.norm(pts, axis=-1))) > 1.0 - options.eps_space:
            raise ConfigError("Minkowski model requires omega_tilde strictly "
                              "inside the unit ball")

    return RunConfig(model=model, omega=omega, omega_tilde=omega_tilde,
                     n_rho=n_rho, n_phi=n_phi, options=options,
                     homotopy_enabled=hom_enabled == "true",
                     homotopy_steps=steps, homotopy_t_min=t_min,
                     seed_strategy=strategy, seed_path=seed_path,
                     output_dir=Path(entries.get("output.dir", ".")))

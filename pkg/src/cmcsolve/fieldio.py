"""Field export and import.

A field is stored as a CSV of nodal data plus a JSON header.  CSV columns:

  rho_index, phi_index, x1, x2, u, du1, du2, d2u11, d2u12, d2u22

with '.' decimal separator, ',' field separator, and a mandatory header row;
the pole appears once as (0, 0).  Floats are written with repr (shortest
round-trip), so u survives the round trip bit-exactly.  The JSON header
carries c, the model tag, the resolutions, the dual flag, and the domain
descriptors needed to rebuild the grid.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .domains import domain_from_dict
from .errors import ConfigError
from .grid import SolutionField, build_grid
from .kernel import ModelKind

CSV_COLUMNS = ("rho_index", "phi_index", "x1", "x2", "u",
               "du1", "du2", "d2u11", "d2u12", "d2u22")


def header_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_field(field: SolutionField, csv_path, omega=None, omega_tilde=None) -> None:
    """Write the CSV table and its JSON header next to it."""
    grid = field.grid
    du, d2u = field.derivatives()
    rows = [(0, 0)] + [(i, j) for i in range(1, grid.n_rho + 1)
                       for j in range(grid.n_phi)]
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for k, (i, j) in enumerate(rows):
            vals = (grid.nodes[k, 0], grid.nodes[k, 1], field.u[k],
                    du[k, 0], du[k, 1], d2u[k, 0, 0], d2u[k, 0, 1], d2u[k, 1, 1])
            fh.write(f"{i},{j}," + ",".join(repr(float(v)) for v in vals) + "\n")
    header = {
        "c": field.c,
        "model": field.model.value,
        "n_rho": grid.n_rho,
        "n_phi": grid.n_phi,
        "dual": field.dual,
        "domain": grid.domain.to_dict(),
    }
    if omega is not None:
        header["omega"] = omega.to_dict()
    if omega_tilde is not None:
        header["omega_tilde"] = omega_tilde.to_dict()
    with open(header_path(csv_path), "w") as fh:
        json.dump(header, fh, indent=2)


def load_field(csv_path) -> SolutionField:
    """Rebuild the field from a CSV plus its JSON header."""
    hp = header_path(csv_path)
    if not Path(csv_path).exists() or not hp.exists():
        raise ConfigError(f"missing field file or header: {csv_path}")
    with open(hp) as fh:
        header = json.load(fh)
    for key in ("c", "model", "n_rho", "n_phi", "domain"):
        if key not in header:
            raise ConfigError(f"field header lacks required key {key!r}")
    domain = domain_from_dict(header["domain"])
    grid = build_grid(domain, int(header["n_rho"]), int(header["n_phi"]))

    u = np.empty(grid.n_nodes)
    seen = np.zeros(grid.n_nodes, dtype=bool)
    with open(csv_path) as fh:
        cols = fh.readline().strip().split(",")
        if tuple(cols) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV columns {cols}")
        for line in fh:
            parts = line.strip().split(",")
            i, j = int(parts[0]), int(parts[1])
            k = 0 if i == 0 else 1 + (i - 1) * grid.n_phi + j
            u[k] = float(parts[4])
            seen[k] = True
    if not np.all(seen):
        raise ConfigError(f"field file misses {int(np.sum(~seen))} nodes")
    return SolutionField(grid, u, float(header["c"]),
                         ModelKind(header["model"]), bool(header.get("dual", False)))

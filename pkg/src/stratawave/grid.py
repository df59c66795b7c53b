"""Truncated slitted-strip grid and the discrete height field living on it.

The computational domain is q in [0, L] (half domain, evenness wall at the
crest) or [-L, L], times p in [-1, 0] split at the interface streamline
p_hat.  The interface row is duplicated: the lower sub-grid ends at p_hat^-
and the upper sub-grid starts at p_hat^+, so one-sided limits are stored
separately and no stencil ever crosses the slit.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field as dc_field
from typing import Dict

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class SlitGrid:
    """Uniform-per-subinterval tensor grid on the slitted strip."""

    L: float
    nq: int
    np_minus: int          # nodes on [-1, p_hat], bottom and interface included
    np_plus: int           # nodes on [p_hat, 0], interface and top included
    p_hat: float
    symmetric: bool = True

    def __post_init__(self):
        if not (self.L > 0):
            raise GridError("L must be positive")
        if min(self.nq, self.np_minus, self.np_plus) < 8:
            raise GridError("grid sizes must be at least 8 nodes per direction")
        if not (-1.0 < self.p_hat < 0.0):
            raise GridError("p_hat must lie in (-1, 0)")

    @property
    def q(self) -> np.ndarray:
        if self.symmetric:
            return np.linspace(0.0, self.L, self.nq)
        return np.linspace(-self.L, self.L, self.nq)

    @property
    def p_lo(self) -> np.ndarray:
        return np.linspace(-1.0, self.p_hat, self.np_minus)

    @property
    def p_up(self) -> np.ndarray:
        return np.linspace(self.p_hat, 0.0, self.np_plus)

    @property
    def dq(self) -> float:
        q = self.q
        return float(q[1] - q[0])

    @property
    def dpm(self) -> float:
        return float((self.p_hat + 1.0) / (self.np_minus - 1))

    @property
    def dpp(self) -> float:
        return float(-self.p_hat / (self.np_plus - 1))

    @property
    def crest_index(self) -> int:
        return 0 if self.symmetric else self.nq // 2

    def refined(self, factor: int = 2) -> "SlitGrid":
        return SlitGrid(self.L, (self.nq - 1) * factor + 1,
                        (self.np_minus - 1) * factor + 1,
                        (self.np_plus - 1) * factor + 1,
                        self.p_hat, self.symmetric)


def default_half_length(epsilon: float, B1: float,
                        decay_lengths: float = 60.0) -> float:
    """Truncation length from the seed's exponential decay rate eps*sqrt(B1)."""
    rate = epsilon * np.sqrt(B1)
    return float(np.clip(decay_lengths / rate, 20.0, 400.0))


@dataclass
class HeightField:
    """Discrete streamline-height deviation w = h - H with its Froude number."""

    grid: SlitGrid
    F: float
    w_lo: np.ndarray       # (nq, np_minus), bottom row identically zero
    w_up: np.ndarray       # (nq, np_plus)
    meta: Dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.w_lo = np.asarray(self.w_lo, dtype=float)
        self.w_up = np.asarray(self.w_up, dtype=float)
        expect_lo = (self.grid.nq, self.grid.np_minus)
        expect_up = (self.grid.nq, self.grid.np_plus)
        if self.w_lo.shape != expect_lo or self.w_up.shape != expect_up:
            raise GridError(f"field shape {self.w_lo.shape}/{self.w_up.shape} "
                            f"does not match grid {expect_lo}/{expect_up}")

    def copy(self) -> "HeightField":
        return HeightField(self.grid, self.F, self.w_lo.copy(), self.w_up.copy(),
                           dict(self.meta))

    @property
    def v0(self) -> float:
        """Interface displacement at the crest column."""
        return float(self.w_up[self.grid.crest_index, 0])

    def interface_mismatch(self) -> float:
        """Max disagreement of the duplicated interface rows."""
        return float(np.max(np.abs(self.w_up[:, 0] - self.w_lo[:, -1])))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.w_lo)), np.max(np.abs(self.w_up))))

    # -- derivative samples (solver-order stencils) ---------------------
    def wp(self, side: str) -> np.ndarray:
        w, dp = (self.w_lo, self.grid.dpm) if side == "-" else (self.w_up, self.grid.dpp)
        out = np.empty_like(w)
        out[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2 * dp)
        out[:, 0] = (-3 * w[:, 0] + 4 * w[:, 1] - w[:, 2]) / (2 * dp)
        out[:, -1] = (3 * w[:, -1] - 4 * w[:, -2] + w[:, -3]) / (2 * dp)
        return out

    def wq(self, side: str) -> np.ndarray:
        w = self.w_lo if side == "-" else self.w_up
        dq = self.grid.dq
        out = np.empty_like(w)
        out[1:-1, :] = (w[2:, :] - w[:-2, :]) / (2 * dq)
        out[0, :] = (-3 * w[0, :] + 4 * w[1, :] - w[2, :]) / (2 * dq)
        out[-1, :] = (3 * w[-1, :] - 4 * w[-2, :] + w[-3, :]) / (2 * dq)
        return out

    # -- persistence -----------------------------------------------------
    def save(self, path, background_hash: str = ""):
        g = self.grid
        with open(path, "w") as fh:
            fh.write("# stratawave height field v1\n")
            fh.write(f"# background {background_hash}\n")
            fh.write(f"# F {self.F:.17g}\n")
            fh.write(f"# grid L {g.L:.17g} nq {g.nq} np_minus {g.np_minus} "
                     f"np_plus {g.np_plus} p_hat {g.p_hat:.17g} symmetric {int(g.symmetric)}\n")
            for key, val in sorted(self.meta.items()):
                fh.write(f"# meta {key} {val}\n")
            fh.write("# block lower: rows are q-columns, interface row duplicated below\n")
            np.savetxt(fh, self.w_lo, fmt="%.17g")
            fh.write("# block upper\n")
            np.savetxt(fh, self.w_up, fmt="%.17g")

    @classmethod
    def load(cls, path) -> "HeightField":
        header: Dict[str, str] = {}
        meta: Dict[str, str] = {}
        lower_lines: list = []
        upper_lines: list = []
        block = None
        with open(path) as fh:
            for line in fh:
                if line.startswith("# background"):
                    header["background"] = line.split(maxsplit=2)[-1].strip()
                elif line.startswith("# F "):
                    header["F"] = line.split()[-1]
                elif line.startswith("# grid "):
                    toks = line.split()[2:]
                    header.update(dict(zip(toks[::2], toks[1::2])))
                elif line.startswith("# meta "):
                    _, _, key, val = line.split(maxsplit=3)
                    meta[key] = val.strip()
                elif line.startswith("# block lower"):
                    block = lower_lines
                elif line.startswith("# block upper"):
                    block = upper_lines
                elif line.startswith("#"):
                    continue
                elif block is not None and line.strip():
                    block.append(line)
        grid = SlitGrid(L=float(header["L"]), nq=int(header["nq"]),
                        np_minus=int(header["np_minus"]), np_plus=int(header["np_plus"]),
                        p_hat=float(header["p_hat"]), symmetric=bool(int(header["symmetric"])))
        w_lo = np.loadtxt(io.StringIO("".join(lower_lines)))
        w_up = np.loadtxt(io.StringIO("".join(upper_lines)))
        meta["background"] = header.get("background", "")
        for key in ("epsilon", "predicted_v0"):
            if key in meta:
                meta[key] = float(meta[key])
        return cls(grid=grid, F=float(header["F"]), w_lo=w_lo, w_up=w_up, meta=meta)


def laminar_field(grid: SlitGrid, F: float) -> HeightField:
    return HeightField(grid=grid, F=float(F),
                       w_lo=np.zeros((grid.nq, grid.np_minus)),
                       w_up=np.zeros((grid.nq, grid.np_plus)),
                       meta={"seed_orientation": "laminar"})

"""Seeded synthetic instances: Gaussian basis and coefficients, Gaussian outliers."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class InstanceSpec:
    d: int = 100
    r: int = 5
    p: float = 0.5
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.r < self.d:
            raise ConfigError(f"need 1 <= r < d, got r={self.r}, d={self.d}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("outlier probability must lie in [0, 1]")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")


@dataclass(frozen=True)
class Instance:
    u: np.ndarray
    x: np.ndarray
    theta_true: np.ndarray
    outlier_mask: np.ndarray

    @property
    def inlier_mask(self) -> np.ndarray:
        return ~self.outlier_mask

    def write_truth(self, path) -> None:
        """Long-format CSV: ``quantity,index,value`` with 1-based indices."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "index", "value"])
            for k, t in enumerate(self.theta_true, start=1):
                w.writerow(["theta", k, repr(float(t))])
            for k, m in enumerate(self.outlier_mask, start=1):
                w.writerow(["outlier", k, int(m)])


def read_truth(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :meth:`Instance.write_truth`; returns ``(theta, outlier_mask)``."""
    theta, mask = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["index"]) - 1
            if row["quantity"] == "theta":
                theta[k] = float(row["value"])
            elif row["quantity"] == "outlier":
                mask[k] = bool(int(row["value"]))
    return (np.array([theta[k] for k in sorted(theta)]),
            np.array([mask[k] for k in sorted(mask)], dtype=bool))


def derive_seed(*parts) -> int:
    """Portable 64-bit seed from arbitrary key parts (SHA-256 of their repr)."""
    key = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def generate(spec: InstanceSpec) -> Instance:
    """Draw one instance with a PCG64 stream keyed by ``spec.seed``.

    Draw order is fixed (basis, coefficients, noise, outlier coin flips,
    outlier values) so equal seeds give bit-identical instances.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    d, r = spec.d, spec.r
    u = rng.standard_normal((d, r))
    theta = rng.standard_normal(r)
    noise = rng.standard_normal(d) * spec.sigma
    mask = rng.random(d) < spec.p
    outliers = rng.standard_normal(d)
    x = u @ theta + noise
    x[mask] = outliers[mask]
    return Instance(u, x, theta, mask)

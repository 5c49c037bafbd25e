"""Charge time series: CSV through pandas and raw field snapshots."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from tabulate import tabulate

logger = logging.getLogger("laxforge.series")


def _ensure_dir(path: str) -> None:
    d = os.path.dirname(path)
    if d and not os.path.exists(d):
        os.makedirs(d, exist_ok=True)


@dataclass
class ChargeSeries:
    """Q(t), Gamma(t) and |dQ/dt - Gamma| on a shared time axis.

    `flows` holds dQ/dt along the vector field; it is a cross-check and is not
    written to CSV."""
    times: np.ndarray
    charges: Dict[str, np.ndarray] = field(default_factory=dict)
    anomalies: Dict[str, np.ndarray] = field(default_factory=dict)
    residuals: Dict[str, np.ndarray] = field(default_factory=dict)
    flows: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for group in (self.charges, self.anomalies, self.residuals, self.flows):
            for name, values in group.items():
                if len(values) != n:
                    raise ValueError(f"series {name!r} has {len(values)} samples for {n} times")

    @property
    def names(self) -> List[str]:
        return list(self.charges)

    def drift(self, name: str) -> float:
        """max |Q(t) - Q(0)| / |Q(0)|."""
        Q = self.charges[name]
        ref = abs(Q[0]) if abs(Q[0]) > 0 else 1.0
        return float(np.max(np.abs(Q - Q[0])) / ref)

    def max_residual(self, name: str) -> float:
        res = self.residuals.get(name)
        return float(np.max(res)) if res is not None and len(res) else 0.0

    def max_anomaly(self, name: str) -> float:
        G = self.anomalies.get(name)
        return float(np.max(np.abs(G))) if G is not None and len(G) else 0.0

    def flow_mismatch(self, name: str) -> float:
        """max |flow derivative - Gamma|."""
        if name not in self.flows or name not in self.anomalies:
            raise KeyError(name)
        return float(np.max(np.abs(self.flows[name] - self.anomalies[name])))

    def to_frame(self) -> pd.DataFrame:
        cols: Dict[str, np.ndarray] = {"t": np.asarray(self.times, dtype=float)}
        for name in self.names:
            Q = np.asarray(self.charges[name], dtype=complex)
            cols[f"Re_Q_{name}"] = Q.real
            cols[f"Im_Q_{name}"] = Q.imag
            if name in self.anomalies:
                G = np.asarray(self.anomalies[name], dtype=complex)
                cols[f"Re_G_{name}"] = G.real
                cols[f"Im_G_{name}"] = G.imag
            if name in self.residuals:
                cols[f"res_{name}"] = np.asarray(self.residuals[name], dtype=float)
        return pd.DataFrame(cols)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "ChargeSeries":
        times = df["t"].to_numpy(dtype=float)
        charges, anomalies, residuals = {}, {}, {}
        for col in df.columns:
            if col.startswith("Re_Q_"):
                name = col[5:]
                charges[name] = df[col].to_numpy() + 1j * df[f"Im_Q_{name}"].to_numpy()
            elif col.startswith("Re_G_"):
                name = col[5:]
                anomalies[name] = df[col].to_numpy() + 1j * df[f"Im_G_{name}"].to_numpy()
            elif col.startswith("res_"):
                residuals[col[4:]] = df[col].to_numpy(dtype=float)
        return cls(times, charges, anomalies, residuals)

    def write_csv(self, path: str) -> str:
        _ensure_dir(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.info("wrote %d rows to %s", len(self.times), path)
        return path

    @classmethod
    def read_csv(cls, path: str) -> "ChargeSeries":
        return cls.from_frame(pd.read_csv(path))

    def summary(self) -> str:
        rows = []
        for name in self.names:
            Q = self.charges[name]
            rows.append([name, f"{Q[0]:.10g}", f"{Q[-1]:.10g}", f"{self.drift(name):.3e}",
                         f"{self.max_residual(name):.3e}" if name in self.residuals else "-"])
        return tabulate(rows, headers=["charge", "Q(t0)", "Q(t_end)", "drift", "max |dQ/dt - G|"])


def write_snapshot(path: str, N: int, length: float, t: float, q: np.ndarray, r: np.ndarray) -> str:
    """float64 header (N, L, t) then N interleaved complex128 pairs (q_k, r_k)."""
    if len(q) != N or len(r) != N:
        raise ValueError("snapshot arrays must have N samples")
    _ensure_dir(path)
    data = np.empty(2 * N, dtype="<c16")
    data[0::2], data[1::2] = q, r
    with open(path, "wb") as fh:
        np.asarray([N, length, t], dtype="<f8").tofile(fh)
        data.tofile(fh)
    return path


def read_snapshot(path: str) -> Tuple[int, float, float, np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype="<f8", count=3)
        if len(header) != 3:
            raise ValueError(f"{path}: truncated snapshot header")
        N = int(header[0])
        data = np.fromfile(fh, dtype="<c16", count=2 * N)
    if len(data) != 2 * N:
        raise ValueError(f"{path}: expected {2 * N} complex samples, found {len(data)}")
    return N, float(header[1]), float(header[2]), data[0::2].copy(), data[1::2].copy()

"""Per-iteration posterior records: the unit of persistence and analysis.

All three samplers emit the same schema so downstream comparison code is
symmetric: ``iter, theta_0..theta_m, x0, <mix>, x_future_1..x_future_T,
z_pred, n_star, d_star`` where the mix column is ``p`` (geometric
probability), ``c`` (DP concentration) or ``lambda`` (single precision)
depending on the sampler.  Run metadata travels in a JSON sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ChainTrace:
    sampler: str
    theta: np.ndarray  # (records, m+1)
    x0: np.ndarray  # (records,)
    mix: np.ndarray  # (records,)
    mix_name: str  # "p", "c" or "lambda"
    future: np.ndarray  # (records, T)
    z_pred: np.ndarray  # (records,)
    n_star: np.ndarray  # (records,)
    d_star: np.ndarray  # (records,)
    iters: np.ndarray  # (records,) 1-based iteration numbers
    iterations: int
    burn: int
    thin: int
    rejections: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = (self.iterations - self.burn) // self.thin
        if self.theta.shape[0] != expected:
            raise ValueError(
                f"trace holds {self.theta.shape[0]} records, expected {expected}"
            )

    @property
    def records(self) -> int:
        return int(self.theta.shape[0])

    @property
    def m(self) -> int:
        return int(self.theta.shape[1] - 1)

    @property
    def T(self) -> int:
        return int(self.future.shape[1])

    def theta_column(self, j: int) -> np.ndarray:
        return self.theta[:, j]

    def future_column(self, horizon: int) -> np.ndarray:
        """Samples of x_{n+horizon}, horizon 1-based."""
        if not 1 <= horizon <= self.T:
            raise ValueError(f"horizon must be in 1..{self.T}")
        return self.future[:, horizon - 1]

    # -- persistence --------------------------------------------------------

    def columns(self) -> list[str]:
        cols = ["iter"]
        cols += [f"theta_{j}" for j in range(self.theta.shape[1])]
        cols += ["x0", self.mix_name]
        cols += [f"x_future_{j + 1}" for j in range(self.T)]
        cols += ["z_pred", "n_star", "d_star"]
        return cols

    def to_csv(self, csv_path, meta_path=None) -> None:
        csv_path = Path(csv_path)
        data = np.column_stack(
            [
                self.iters,
                self.theta,
                self.x0,
                self.mix,
                self.future,
                self.z_pred,
                self.n_star,
                self.d_star,
            ]
        )
        header = ",".join(self.columns())
        np.savetxt(csv_path, data, delimiter=",", header=header, comments="", fmt="%.17g")

        meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
        payload = {
            "sampler": self.sampler,
            "mix_name": self.mix_name,
            "iterations": self.iterations,
            "burn": self.burn,
            "thin": self.thin,
            "rejections": self.rejections,
            **self.meta,
        }
        meta_path.write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def from_csv(cls, csv_path, meta_path=None) -> "ChainTrace":
        csv_path = Path(csv_path)
        with open(csv_path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        idx = {name: k for k, name in enumerate(header)}
        mix_name = next(n for n in ("p", "c", "lambda") if n in idx)
        theta_cols = [k for k, n in enumerate(header) if n.startswith("theta_")]
        future_cols = [k for k, n in enumerate(header) if n.startswith("x_future_")]

        meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        iterations = meta.get("iterations", data.shape[0])
        burn = meta.get("burn", 0)
        thin = meta.get("thin", 1)
        return cls(
            sampler=meta.get("sampler", "unknown"),
            theta=data[:, theta_cols],
            x0=data[:, idx["x0"]],
            mix=data[:, idx[mix_name]],
            mix_name=mix_name,
            future=data[:, future_cols] if future_cols else np.empty((data.shape[0], 0)),
            z_pred=data[:, idx["z_pred"]],
            n_star=data[:, idx["n_star"]].astype(int),
            d_star=data[:, idx["d_star"]].astype(int),
            iters=data[:, idx["iter"]].astype(int),
            iterations=iterations,
            burn=burn,
            thin=thin,
            rejections=meta.get("rejections", {}),
            meta={
                k: v
                for k, v in meta.items()
                if k
                not in {"sampler", "mix_name", "iterations", "burn", "thin", "rejections"}
            },
        )


class TraceRecorder:
    """Accumulates thinned post-burn records during a run."""

    def __init__(self, iterations: int, burn: int, thin: int, m: int, T: int):
        if not iterations > burn >= 0:
            raise ValueError("need iterations > burn >= 0")
        if thin < 1:
            raise ValueError("thin must be >= 1")
        self.iterations, self.burn, self.thin = iterations, burn, thin
        records = (iterations - burn) // thin
        self.theta = np.empty((records, m + 1))
        self.x0 = np.empty(records)
        self.mix = np.empty(records)
        self.future = np.empty((records, T))
        self.z_pred = np.empty(records)
        self.n_star = np.empty(records, dtype=np.int64)
        self.d_star = np.empty(records, dtype=np.int64)
        self.iters = np.empty(records, dtype=np.int64)
        self._k = 0

    def offer(self, it: int, theta, x0, mix, future, z_pred, n_star, d_star) -> None:
        """Store the state of 1-based iteration ``it`` if it lands on the grid."""
        if it <= self.burn or (it - self.burn) % self.thin != 0:
            return
        k = self._k
        self.theta[k] = theta
        self.x0[k] = x0
        self.mix[k] = mix
        self.future[k] = future
        self.z_pred[k] = z_pred
        self.n_star[k] = n_star
        self.d_star[k] = d_star
        self.iters[k] = it
        self._k += 1

    def finish(self, sampler: str, mix_name: str, rejections: dict, meta: dict) -> ChainTrace:
        assert self._k == self.theta.shape[0], "recorder not filled"
        return ChainTrace(
            sampler=sampler,
            theta=self.theta,
            x0=self.x0,
            mix=self.mix,
            mix_name=mix_name,
            future=self.future,
            z_pred=self.z_pred,
            n_star=self.n_star,
            d_star=self.d_star,
            iters=self.iters,
            iterations=self.iterations,
            burn=self.burn,
            thin=self.thin,
            rejections=rejections,
            meta=meta,
        )

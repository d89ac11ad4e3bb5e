"""
Row-stochastic weight matrices and the per-slot update laws.

States are ``n x m`` float arrays (one row per node); the bundled examples are
scalar (``m == 1``) but every operation uses the max-norm so vector states work
unchanged.
"""

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, Union

import numpy as np

from src.core.graph import Digraph

ROW_SUM_TOLERANCE = 1e-9

ArrayLike = Union[np.ndarray, Sequence]


class DynamicsError(ValueError):
    """Invalid weight matrix, state or parameter shapes."""
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WeightMatrix:
    """Row-stochastic ``n x n`` matrix ``A = (a_ij)`` with a positive diagonal."""
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DynamicsError(f"Weight matrix must be square and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DynamicsError("Weight matrix contains non-finite entries")
        if np.any(a < 0):
            i, j = np.argwhere(a < 0)[0]
            raise DynamicsError(f"Negative weight a[{i}][{j}] = {a[i, j]}")
        sums = a.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)
        if bad.size:
            i = int(bad[0])
            raise DynamicsError(f"Row {i} sums to {sums[i]!r}, not 1 within {ROW_SUM_TOLERANCE}")
        if np.any(np.diag(a) <= 0):
            i = int(np.flatnonzero(np.diag(a) <= 0)[0])
            raise DynamicsError(f"Diagonal weight a[{i}][{i}] must be positive")
        # Exact renormalization keeps the contraction invariants at machine precision.
        object.__setattr__(self, "a", _frozen(a / sums[:, None]))

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[float]]) -> "WeightMatrix":
        return cls(a=np.array([[float(v) for v in row] for row in rows], dtype=float))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def power(self, h: int) -> np.ndarray:
        """``A^h`` by repeated multiplication."""
        if h < 0:
            raise DynamicsError(f"Matrix power must be non-negative, got {h}")
        result = np.eye(self.n)
        for _ in range(h):
            result = result @ self.a
        return result


@dataclass(frozen=True)
class NetworkState:
    """Node states ``x_i(k)`` (one row each) at slot ``k``."""
    x: np.ndarray
    k: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DynamicsError(f"State must be n x m with n, m >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            i = int(np.argwhere(~np.isfinite(x))[0][0])
            raise DynamicsError(f"State of node {i} contains non-finite values")
        if self.k < 0:
            raise DynamicsError(f"Slot index must be non-negative, got {self.k}")
        object.__setattr__(self, "x", _frozen(x))

    @classmethod
    def of(cls, values: ArrayLike, k: int = 0) -> "NetworkState":
        return cls(x=np.asarray(values, dtype=float), k=k)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def scalar(self) -> np.ndarray:
        """Flattened view for scalar states."""
        return self.x[:, 0] if self.dim == 1 else self.x

    def shifted(self, c: float) -> "NetworkState":
        return NetworkState(x=self.x + c, k=self.k)


@dataclass(frozen=True)
class FjParams:
    """Coupling conditions ``omega_i`` and prejudices ``x_i(0)``."""
    omega: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0.reshape(-1, 1)
        if np.any((omega < 0) | (omega > 1)):
            raise DynamicsError("Every coupling condition omega_i must lie in [0, 1]")
        if x0.shape[0] != omega.shape[0]:
            raise DynamicsError(
                f"FJ parameters disagree: {omega.shape[0]} couplings, {x0.shape[0]} prejudices"
            )
        object.__setattr__(self, "omega", _frozen(omega))
        object.__setattr__(self, "x0", _frozen(x0))


def graph_of(w: WeightMatrix) -> Digraph:
    """Edge ``(i, j)`` for every off-diagonal ``a_ij > 0``."""
    rows, cols = np.nonzero(w.a)
    return Digraph.from_edges(w.n, ((int(i), int(j)) for i, j in zip(rows, cols) if i != j))


def _check_dims(w: WeightMatrix, s: NetworkState) -> None:
    if w.n != s.n:
        raise DynamicsError(f"Weight matrix is {w.n}x{w.n} but state has {s.n} nodes")


def consensus_step(w: WeightMatrix, s: NetworkState) -> NetworkState:
    _check_dims(w, s)
    return NetworkState(x=w.a @ s.x, k=s.k + 1)


def fj_step(w: WeightMatrix, s: NetworkState, p: FjParams) -> NetworkState:
    _check_dims(w, s)
    if p.omega.shape[0] != s.n or p.x0.shape != s.x.shape:
        raise DynamicsError(
            f"FJ parameters shaped {p.omega.shape}/{p.x0.shape} do not match state {s.x.shape}"
        )
    coupled = w.a @ s.x
    omega = p.omega[:, None]
    return NetworkState(x=omega * coupled + (1.0 - omega) * p.x0, k=s.k + 1)


def spread(s: NetworkState) -> float:
    """``d(k)``: largest pairwise max-norm difference of node states."""
    return float(np.max(s.x.max(axis=0) - s.x.min(axis=0)))


class UpdateLaw(Protocol):
    """Per-slot update ``x(k+1) = h(x(k))`` shared by every node."""
    name: str
    # Stopping guarantees hold for plain consensus only.
    guarantees_apply: bool

    def step(self, w: WeightMatrix, s: NetworkState) -> NetworkState:
        ...


class ConsensusLaw:
    name = "consensus"
    guarantees_apply = True

    def step(self, w: WeightMatrix, s: NetworkState) -> NetworkState:
        return consensus_step(w, s)

    def __repr__(self) -> str:
        return "ConsensusLaw()"


class FriedkinJohnsenLaw:
    name = "friedkin-johnsen"
    guarantees_apply = False

    def __init__(self, params: FjParams):
        self.params = params

    def step(self, w: WeightMatrix, s: NetworkState) -> NetworkState:
        return fj_step(w, s, self.params)

    def __repr__(self) -> str:
        return f"FriedkinJohnsenLaw(omega={self.params.omega.tolist()})"

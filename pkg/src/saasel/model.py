"""Dynamic-network data model.

A :class:`DynamicNetwork` is a continuous-time LTI system partitioned into N
nodes: each node i owns a slice of the state (n_x_i), of the input channels
(n_u_i) and of the output channels (n_y_i). Inputs and outputs are local to
their node, so B and C are block diagonal over the node partition; coupling
between nodes lives in A only.

A :class:`Selection` is the pair of binary N-tuples (pi, gamma) activating
per-node actuators and sensors. It expands to the diagonal masking matrices
Pi (inputs) and Gamma (outputs), and restricts B and C to the columns/rows
of the active channels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DimensionError, RankError
from .numerics import numerical_rank

__all__ = [
    "DynamicNetwork",
    "Selection",
    "SelectionMatrices",
    "LogisticConstraint",
    "selection_to_matrices",
    "cardinality",
    "logistic_satisfied",
    "reduced_bc",
]

_LOGISTIC_TOL = 1e-9


def _slices(dims: tuple[int, ...]) -> list[slice]:
    edges = np.concatenate([[0], np.cumsum(dims)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class DynamicNetwork:
    """Node-partitioned LTI system (A, B, C).

    Validated at construction: dimension bookkeeping, finiteness, the
    per-node block-diagonal structure of B and C, full column rank of B and
    full row rank of C.
    """

    node_count: int
    nx_i: tuple[int, ...]
    nu_i: tuple[int, ...]
    ny_i: tuple[int, ...]
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        N = self.node_count
        if N < 1:
            raise DimensionError("node_count must be >= 1")
        for name, dims in (("nx_i", self.nx_i), ("nu_i", self.nu_i), ("ny_i", self.ny_i)):
            if len(dims) != N or any(d < 0 for d in dims):
                raise DimensionError(f"{name} must list {N} nonnegative dims")
        object.__setattr__(self, "nx_i", tuple(int(d) for d in self.nx_i))
        object.__setattr__(self, "nu_i", tuple(int(d) for d in self.nu_i))
        object.__setattr__(self, "ny_i", tuple(int(d) for d in self.ny_i))
        for name in ("A", "B", "C"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        nx, nu, ny = self.n_x, self.n_u, self.n_y
        if self.A.shape != (nx, nx):
            raise DimensionError(f"A must be {(nx, nx)}, got {self.A.shape}")
        if self.B.shape != (nx, nu):
            raise DimensionError(f"B must be {(nx, nu)}, got {self.B.shape}")
        if self.C.shape != (ny, nx):
            raise DimensionError(f"C must be {(ny, nx)}, got {self.C.shape}")
        self._check_block_structure()
        if nu and numerical_rank(self.B) < nu:
            raise RankError("B must be full column rank")
        if ny and numerical_rank(self.C) < ny:
            raise RankError("C must be full row rank")

    def _check_block_structure(self):
        xs = _slices(self.nx_i)
        for i, us in enumerate(_slices(self.nu_i)):
            mask = np.ones(self.n_x, dtype=bool)
            mask[xs[i]] = False
            if np.any(self.B[mask, us] != 0.0):
                raise DimensionError(
                    f"B column block of node {i} has entries outside the node's state rows"
                )
        for i, ys in enumerate(_slices(self.ny_i)):
            mask = np.ones(self.n_x, dtype=bool)
            mask[xs[i]] = False
            if np.any(self.C[ys, mask] != 0.0):
                raise DimensionError(
                    f"C row block of node {i} has entries outside the node's state columns"
                )

    @property
    def n_x(self) -> int:
        return int(sum(self.nx_i))

    @property
    def n_u(self) -> int:
        return int(sum(self.nu_i))

    @property
    def n_y(self) -> int:
        return int(sum(self.ny_i))

    @cached_property
    def input_slices(self) -> tuple[slice, ...]:
        return tuple(_slices(self.nu_i))

    @cached_property
    def output_slices(self) -> tuple[slice, ...]:
        return tuple(_slices(self.ny_i))

    def input_channel_node(self, channel: int) -> int:
        """Node owning global input channel ``channel``."""
        return int(np.searchsorted(np.cumsum(self.nu_i), channel, side="right"))

    def output_channel_node(self, channel: int) -> int:
        """Node owning global output channel ``channel``."""
        return int(np.searchsorted(np.cumsum(self.ny_i), channel, side="right"))

    # -- serialization (documented model-file schema) -----------------------

    def to_json_dict(self) -> dict:
        return {
            "N": self.node_count,
            "nx_i": list(self.nx_i),
            "nu_i": list(self.nu_i),
            "ny_i": list(self.ny_i),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, data: dict) -> "DynamicNetwork":
        return cls(
            node_count=int(data["N"]),
            nx_i=tuple(data["nx_i"]),
            nu_i=tuple(data["nu_i"]),
            ny_i=tuple(data["ny_i"]),
            A=np.asarray(data["A"], dtype=float),
            B=np.asarray(data["B"], dtype=float),
            C=np.asarray(data["C"], dtype=float),
        )

    @classmethod
    def load(cls, path) -> "DynamicNetwork":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True, order=True)
class Selection:
    """Binary activation tuple S = (pi, gamma); pi masks actuators, gamma
    masks sensors, one bit per node."""

    pi: tuple[int, ...]
    gamma: tuple[int, ...]

    def __post_init__(self):
        if len(self.pi) != len(self.gamma):
            raise DimensionError("pi and gamma must have equal length")
        for bit in (*self.pi, *self.gamma):
            if bit not in (0, 1):
                raise DimensionError("selection entries must be 0 or 1")
        object.__setattr__(self, "pi", tuple(int(b) for b in self.pi))
        object.__setattr__(self, "gamma", tuple(int(b) for b in self.gamma))

    @property
    def node_count(self) -> int:
        return len(self.pi)

    @property
    def bits(self) -> tuple[int, ...]:
        """Serialization order (pi_1..pi_N, gamma_1..gamma_N)."""
        return self.pi + self.gamma

    def cardinality(self) -> int:
        return int(sum(self.bits))

    def bit_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def to_word(self) -> int:
        """Pack into an integer with bit position 1 (pi_1) most significant;
        within one cardinality class, descending word order equals ascending
        lexicographic order of the active-position lists."""
        word = 0
        width = 2 * self.node_count
        for k, b in enumerate(self.bits):
            if b:
                word |= 1 << (width - 1 - k)
        return word

    @classmethod
    def from_word(cls, word: int, node_count: int) -> "Selection":
        width = 2 * node_count
        bits = tuple((word >> (width - 1 - k)) & 1 for k in range(width))
        return cls(bits[:node_count], bits[node_count:])

    @classmethod
    def from_bits(cls, bits, node_count: int) -> "Selection":
        bits = tuple(int(b) for b in bits)
        if len(bits) != 2 * node_count:
            raise DimensionError(f"expected {2 * node_count} bits, got {len(bits)}")
        return cls(bits[:node_count], bits[node_count:])

    @classmethod
    def zeros(cls, node_count: int) -> "Selection":
        return cls((0,) * node_count, (0,) * node_count)

    @classmethod
    def ones(cls, node_count: int) -> "Selection":
        return cls((1,) * node_count, (1,) * node_count)

    def is_subset_of(self, other: "Selection") -> bool:
        """True iff every active entry of self is active in other."""
        w, v = self.to_word(), other.to_word()
        return (w | v) == v

    @classmethod
    def from_active(cls, node_count: int, actuators, sensors) -> "Selection":
        """Build from 1-based node indices of active actuators/sensors."""
        pi = [0] * node_count
        gamma = [0] * node_count
        for i in actuators:
            pi[i - 1] = 1
        for i in sensors:
            gamma[i - 1] = 1
        return cls(tuple(pi), tuple(gamma))


@dataclass(frozen=True)
class SelectionMatrices:
    """Diagonal binary masks: Pi (n_u x n_u) over input channels and Gamma
    (n_y x n_y) over output channels. Both are idempotent and symmetric."""

    Pi: np.ndarray
    Gamma: np.ndarray


def selection_to_matrices(s: Selection, net: DynamicNetwork) -> SelectionMatrices:
    """Expand per-node bits into the channel-level masks Pi and Gamma: node
    i's bit replicates over its n_u_i (resp. n_y_i) channels."""
    if s.node_count != net.node_count:
        raise DimensionError(
            f"selection has {s.node_count} nodes, network has {net.node_count}"
        )
    pi_diag = np.concatenate(
        [np.full(d, float(b)) for b, d in zip(s.pi, net.nu_i)]
    ) if net.n_u else np.zeros(0)
    gam_diag = np.concatenate(
        [np.full(d, float(b)) for b, d in zip(s.gamma, net.ny_i)]
    ) if net.n_y else np.zeros(0)
    return SelectionMatrices(np.diag(pi_diag), np.diag(gam_diag))


def cardinality(s: Selection) -> int:
    """Total number of activated sensors and actuators."""
    return s.cardinality()


@dataclass(frozen=True)
class LogisticConstraint:
    """Linear activation constraints ``Phi @ [pi; gamma] <= phi``.

    Rows may couple any entries of pi and gamma (budgets, forced on/off,
    cross-node requirements). An empty constraint (zero rows) is vacuous.
    """

    Phi: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if Phi.size == 0:
            Phi = Phi.reshape(0, Phi.shape[1] if Phi.ndim == 2 and Phi.shape[1] else 0)
        if Phi.shape[0] != phi.shape[0]:
            raise DimensionError(
                f"Phi has {Phi.shape[0]} rows but phi has {phi.shape[0]} entries"
            )
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "phi", phi)

    @property
    def num_rows(self) -> int:
        return self.Phi.shape[0]

    def node_count(self) -> int:
        if self.Phi.shape[1] % 2:
            raise DimensionError("Phi must have an even number of columns")
        return self.Phi.shape[1] // 2

    @classmethod
    def empty(cls, node_count: int) -> "LogisticConstraint":
        return cls(np.zeros((0, 2 * node_count)), np.zeros(0))

    @classmethod
    def minimum_counts(cls, node_count: int, min_actuators: int = 0,
                       min_sensors: int = 0) -> "LogisticConstraint":
        """At least ``min_actuators`` active actuators and ``min_sensors``
        active sensors, encoded as -sum(pi) <= -a, -sum(gamma) <= -s."""
        rows, rhs = [], []
        if min_actuators > 0:
            r = np.zeros(2 * node_count)
            r[:node_count] = -1.0
            rows.append(r)
            rhs.append(-float(min_actuators))
        if min_sensors > 0:
            r = np.zeros(2 * node_count)
            r[node_count:] = -1.0
            rows.append(r)
            rhs.append(-float(min_sensors))
        if not rows:
            return cls.empty(node_count)
        return cls(np.vstack(rows), np.asarray(rhs))

    @classmethod
    def cardinality_range(cls, node_count: int, low: int, high: int) -> "LogisticConstraint":
        """Require ``low <= H(S) <= high`` on the total activation count."""
        ones = np.ones(2 * node_count)
        return cls(np.vstack([-ones, ones]), np.array([-float(low), float(high)]))

    def to_json_dict(self) -> dict:
        return {"Phi": self.Phi.tolist(), "phi": self.phi.tolist()}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, data: dict) -> "LogisticConstraint":
        return cls(np.asarray(data["Phi"], dtype=float), np.asarray(data["phi"], dtype=float))

    @classmethod
    def load(cls, path) -> "LogisticConstraint":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def logistic_satisfied(s: Selection, lc: LogisticConstraint) -> bool:
    """True iff ``Phi @ [pi; gamma] <= phi`` holds elementwise."""
    if lc.num_rows == 0:
        return True
    if lc.Phi.shape[1] != 2 * s.node_count:
        raise DimensionError(
            f"constraint expects {lc.Phi.shape[1]} bits, selection has {2 * s.node_count}"
        )
    lhs = lc.Phi @ np.asarray(s.bits, dtype=float)
    return bool(np.all(lhs <= lc.phi + _LOGISTIC_TOL))


def reduced_bc(s: Selection, net: DynamicNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Columns of B for active actuator channels and rows of C for active
    sensor channels. Either may be empty (zero columns / zero rows)."""
    if s.node_count != net.node_count:
        raise DimensionError(
            f"selection has {s.node_count} nodes, network has {net.node_count}"
        )
    u_cols = [k for i, sl in enumerate(net.input_slices) if s.pi[i]
              for k in range(sl.start, sl.stop)]
    y_rows = [k for i, sl in enumerate(net.output_slices) if s.gamma[i]
              for k in range(sl.start, sl.stop)]
    B_q = net.B[:, u_cols] if u_cols else np.zeros((net.n_x, 0))
    C_q = net.C[y_rows, :] if y_rows else np.zeros((0, net.n_x))
    return B_q, C_q

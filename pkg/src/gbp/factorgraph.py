"""Loopy Gaussian belief propagation over a single factor graph.

A graph is owned by one robot. Factors that tie a local variable to a
variable held by another robot carry a `RemoteLink`; they only compute
messages for their local side, and the remote side of their inbox is filled
from the mailbox at round boundaries (see `src.sim.mailbox`).
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from src.gbp.errors import FactorEvaluationError, GaussianError, NonFiniteBelief
from src.gbp.gaussian import (
    CanonicalGaussian,
    marginalize,
    product,
    product_all,
    quotient,
)

logger = logging.getLogger(__name__)

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], np.ndarray]


# Messages

@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str
    payload: CanonicalGaussian

    def encode(self) -> bytes:
        return encode_payload(self.payload)

    @classmethod
    def decode(cls, sender: str, recipient: str, data: bytes) -> "Message":
        return cls(sender, recipient, decode_payload(data))


def encode_payload(g: CanonicalGaussian) -> bytes:
    """dim, eta, then Lambda row-major, all little-endian doubles."""
    flat = np.concatenate([[float(g.dim)], g.eta, g.lam.ravel()])
    return flat.astype("<f8").tobytes()


def decode_payload(data: bytes) -> CanonicalGaussian:
    flat = np.frombuffer(data, dtype="<f8")
    dim = int(flat[0])
    if flat.size != 1 + dim + dim * dim:
        raise GaussianError(f"corrupt payload: {flat.size} doubles for dim {dim}")
    return CanonicalGaussian(flat[1:1 + dim].copy(), flat[1 + dim:].reshape(dim, dim).copy())


# Nodes

@dataclass(frozen=True)
class RemoteLink:
    """The far end of an inter-robot factor."""
    peer: int
    var_id: str
    mirror_id: str  # the peer's matching factor, which consumes our outgoing message


class VariableNode:
    def __init__(self, var_id: str, dim: int, linearization_point: Optional[Sequence[float]] = None):
        self.id = var_id
        self.dim = dim
        self.belief = CanonicalGaussian.zeros(dim)
        self.inbox: dict[str, CanonicalGaussian] = {}
        self.factor_ids: list[str] = []
        self.active = True
        self.linearization_point = (
            np.zeros(dim) if linearization_point is None
            else np.asarray(linearization_point, dtype=float).copy()
        )
        self._mean: Optional[np.ndarray] = None
        self._mean_stale = True

    def mean(self) -> Optional[np.ndarray]:
        """Belief mean, or None while the belief is not informative."""
        if self._mean_stale:
            self._mean = self.belief.try_mean()
            self._mean_stale = False
        return self._mean

    def point(self) -> np.ndarray:
        m = self.mean()
        return self.linearization_point if m is None else m

    def set_belief(self, belief: CanonicalGaussian) -> None:
        self.belief = belief
        self._mean_stale = True

    def __repr__(self) -> str:
        return f"VariableNode({self.id!r}, dim={self.dim}, factors={len(self.factor_ids)})"


class FactorNode:
    def __init__(
        self,
        factor_id: str,
        neighbors: Sequence[str],
        dims: Sequence[int],
        h: Residual,
        jacobian: Jacobian,
        z: Sequence[float],
        lambda_s: np.ndarray,
        linearization_point: Optional[Sequence[float]] = None,
        linear: bool = False,
        kind: str = "factor",
        remote: Optional[RemoteLink] = None,
    ):
        if len(neighbors) != len(dims):
            raise ValueError("neighbors and dims must have the same length")
        self.id = factor_id
        self.kind = kind
        self.neighbors = list(neighbors)
        self.dims = [int(d) for d in dims]
        self.h = h
        self.jacobian = jacobian
        self.z = np.asarray(z, dtype=float).reshape(-1)
        self.lambda_s = np.atleast_2d(np.asarray(lambda_s, dtype=float))
        if self.lambda_s.shape != (self.z.size, self.z.size):
            raise ValueError(f"{factor_id}: lambda_s shape {self.lambda_s.shape} does not match z")
        total = sum(self.dims)
        self.linearization_point = (
            np.zeros(total) if linearization_point is None
            else np.asarray(linearization_point, dtype=float).copy()
        )
        self.linear = linear
        self.remote = remote
        self.active = True
        self.inbox: dict[str, CanonicalGaussian] = {
            v: CanonicalGaussian.zeros(d) for v, d in zip(self.neighbors, self.dims)
        }
        self.likelihood: Optional[CanonicalGaussian] = None
        self.absorbed: Optional[CanonicalGaussian] = None
        self.sent: dict[str, CanonicalGaussian] = {}
        # v_id -> (likelihood, other incoming, undamped message, degraded)
        self.cache: dict[str, tuple] = {}

        self.offsets: dict[str, slice] = {}
        start = 0
        for v, d in zip(self.neighbors, self.dims):
            self.offsets[v] = slice(start, start + d)
            start += d

    @property
    def local_neighbors(self) -> list[str]:
        if self.remote is None:
            return self.neighbors
        return [v for v in self.neighbors if v != self.remote.var_id]

    def residual(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.h(X), dtype=float).reshape(-1) - self.z

    def energy(self, X: Optional[np.ndarray] = None) -> float:
        r = self.residual(self.linearization_point if X is None else X)
        return 0.5 * float(r @ self.lambda_s @ r)

    def absorb(self, message: CanonicalGaussian) -> None:
        """Fold a message into this unary factor permanently."""
        if len(self.neighbors) != 1:
            raise ValueError(f"{self.id}: only unary factors can absorb messages")
        self.absorbed = message if self.absorbed is None else product(self.absorbed, message)
        if self.likelihood is not None:
            self.likelihood = product(self.likelihood, message)

    def __repr__(self) -> str:
        return f"FactorNode({self.id!r}, kind={self.kind}, neighbors={self.neighbors})"


# The four message-passing rules

def update_belief(v: VariableNode) -> CanonicalGaussian:
    belief = product_all(list(v.inbox.values()), v.dim)
    v.set_belief(belief)
    return belief


def variable_to_factor(v: VariableNode, f_id: str) -> Message:
    if f_id not in v.inbox and f_id not in v.factor_ids:
        raise KeyError(f"{f_id} is not a neighbor of {v.id}")
    excluded = v.inbox.get(f_id)
    payload = v.belief if excluded is None else quotient(v.belief, excluded)
    return Message(v.id, f_id, payload)


def linearize(f: FactorNode, X0: np.ndarray) -> CanonicalGaussian:
    X0 = np.asarray(X0, dtype=float).reshape(-1)
    h0 = np.asarray(f.h(X0), dtype=float).reshape(-1)
    J = np.atleast_2d(np.asarray(f.jacobian(X0), dtype=float))
    if not (np.all(np.isfinite(h0)) and np.all(np.isfinite(J))):
        raise FactorEvaluationError(f.id, "non-finite residual or Jacobian")
    if J.shape != (f.z.size, X0.size):
        raise FactorEvaluationError(f.id, f"jacobian shape {J.shape}, expected {(f.z.size, X0.size)}")

    JtL = J.T @ f.lambda_s
    lam = JtL @ J
    eta = JtL @ (J @ X0 + f.z - h0)
    likelihood = CanonicalGaussian(eta, lam)
    if f.absorbed is not None:
        likelihood = product(likelihood, f.absorbed)
    f.likelihood = likelihood
    f.linearization_point = X0.copy()
    return likelihood


def _same(a: CanonicalGaussian, b: CanonicalGaussian) -> bool:
    return a is b or (np.array_equal(a.eta, b.eta) and np.array_equal(a.lam, b.lam))


def _marginal_message(f: FactorNode, v_id: str, dim: int) -> tuple[CanonicalGaussian, bool]:
    """Likelihood times every other incoming message, marginalised onto v_id."""
    eta = f.likelihood.eta.copy()
    lam = f.likelihood.lam.copy()
    for other in f.neighbors:
        if other == v_id:
            continue
        sl = f.offsets[other]
        incoming = f.inbox[other]
        eta[sl] += incoming.eta
        lam[sl, sl] += incoming.lam
    keep = list(range(f.offsets[v_id].start, f.offsets[v_id].stop))
    try:
        return marginalize(CanonicalGaussian(eta, lam), keep), False
    except GaussianError:
        return CanonicalGaussian.zeros(dim), True


def factor_to_variable(
    f: FactorNode,
    v_id: str,
    damping: float = 0.0,
    diagnostics: Optional[Counter] = None,
) -> Message:
    if v_id not in f.offsets:
        raise KeyError(f"{v_id} is not a neighbor of {f.id}")
    dim = f.dims[f.neighbors.index(v_id)]
    if f.likelihood is None:
        return Message(f.id, v_id, CanonicalGaussian.zeros(dim))

    if len(f.neighbors) == 1:
        computed = f.likelihood
    elif f.likelihood.is_zero():
        # no coupling: the marginal on v_id is empty whatever the others say
        computed = CanonicalGaussian.zeros(dim)
    else:
        others = [f.inbox[other] for other in f.neighbors if other != v_id]
        cached = f.cache.get(v_id)
        if cached is not None and _same(cached[0], f.likelihood) and all(map(_same, cached[1], others)):
            computed, degraded = cached[2], cached[3]
        else:
            computed, degraded = _marginal_message(f, v_id, dim)
            f.cache[v_id] = (f.likelihood, others, computed, degraded)
        if degraded and diagnostics is not None:
            diagnostics["singular_marginalization"] += 1

    previous = f.sent.get(v_id)
    if damping > 0.0 and previous is not None:
        computed = CanonicalGaussian(
            (1.0 - damping) * computed.eta + damping * previous.eta,
            (1.0 - damping) * computed.lam + damping * previous.lam,
        )
    f.sent[v_id] = computed
    return Message(f.id, v_id, computed)


# Graph

class FactorGraph:
    def __init__(self, name: str, damping: float = 0.0):
        if not 0.0 <= damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {damping}")
        self.name = name
        self.damping = damping
        self.variables: dict[str, VariableNode] = {}
        self.factors: dict[str, FactorNode] = {}
        self.diagnostics: Counter = Counter()
        self.iterations = 0

    def add_variable(self, v: VariableNode) -> VariableNode:
        if v.id in self.variables:
            raise ValueError(f"duplicate variable {v.id} in {self.name}")
        self.variables[v.id] = v
        return v

    def add_factor(self, f: FactorNode) -> FactorNode:
        if f.id in self.factors:
            raise ValueError(f"duplicate factor {f.id} in {self.name}")
        local = f.local_neighbors
        missing = [v for v in local if v not in self.variables]
        if missing:
            raise KeyError(f"{f.id}: unknown variables {missing} in {self.name}")
        for v_id in local:
            v = self.variables[v_id]
            if v.dim != f.dims[f.neighbors.index(v_id)]:
                raise ValueError(f"{f.id}: dimension mismatch on {v_id}")
            v.factor_ids.append(f.id)
            v.inbox[f.id] = CanonicalGaussian.zeros(v.dim)
        self.factors[f.id] = f
        return f

    def remove_factor(self, f_id: str) -> FactorNode:
        f = self.factors.pop(f_id)
        for v_id in f.local_neighbors:
            v = self.variables[v_id]
            v.inbox.pop(f_id, None)
            v.factor_ids.remove(f_id)
            update_belief(v)
        return f

    def move_message(self, src_id: str, dst_id: str) -> FactorNode:
        """Remove `src_id` and credit its last messages to `dst_id` on the
        local variables they share, so no belief changes."""
        src = self.factors[src_id]
        dst = self.factors[dst_id]
        shared = [v_id for v_id in src.local_neighbors if v_id in dst.local_neighbors]
        carried = {v_id: self.variables[v_id].inbox[src_id] for v_id in shared}
        self.remove_factor(src_id)
        for v_id, msg in carried.items():
            v = self.variables[v_id]
            v.inbox[dst_id] = msg
            dst.sent[v_id] = msg
            update_belief(v)
        return src

    def replace_factor(self, f: FactorNode, prime: bool = False) -> FactorNode:
        """Swap in `f` under its id. With `prime`, a unary factor's message is
        delivered immediately so the belief reflects it before the next round."""
        if f.id in self.factors:
            self.remove_factor(f.id)
        self.add_factor(f)
        if prime and len(f.neighbors) == 1 and f.remote is None:
            v = self.variables[f.neighbors[0]]
            likelihood = linearize(f, f.linearization_point)
            v.inbox[f.id] = likelihood
            f.sent[v.id] = likelihood
            update_belief(v)
            f.inbox[v.id] = variable_to_factor(v, f.id).payload
        return f

    def inter_robot_factors(self) -> list[FactorNode]:
        return [f for f in self.factors.values() if f.remote is not None]

    def is_live(self, f: FactorNode) -> bool:
        if not f.active:
            return False
        if f.remote is None:
            return True
        return all(self.variables[v].active for v in f.local_neighbors)

    def stacked_point(self, f: FactorNode) -> np.ndarray:
        parts = []
        for v_id in f.neighbors:
            if v_id in self.variables and (f.remote is None or v_id != f.remote.var_id):
                parts.append(self.variables[v_id].point())
                continue
            remote_mean = f.inbox[v_id].try_mean()
            parts.append(f.linearization_point[f.offsets[v_id]] if remote_mean is None else remote_mean)
        return np.concatenate(parts)

    def energy(self) -> float:
        """Sum of factor energies evaluated at the current belief means."""
        return sum(f.energy(self.stacked_point(f)) for f in self.factors.values())

    def joint(self) -> tuple[np.ndarray, np.ndarray, dict[str, slice]]:
        """Dense linearised joint over local variables (for oracle checks)."""
        index: dict[str, slice] = {}
        start = 0
        for v in self.variables.values():
            index[v.id] = slice(start, start + v.dim)
            start += v.dim
        eta = np.zeros(start)
        lam = np.zeros((start, start))
        for f in self.factors.values():
            if f.remote is not None:
                raise ValueError(f"{f.id} links to another robot; joint is local-only")
            like = f.likelihood if f.likelihood is not None else linearize(f, self.stacked_point(f))
            for a in f.neighbors:
                eta[index[a]] += like.eta[f.offsets[a]]
                for b in f.neighbors:
                    lam[index[a], index[b]] += like.lam[f.offsets[a], f.offsets[b]]
        return eta, lam, index

    def dense_map(self) -> dict[str, np.ndarray]:
        eta, lam, index = self.joint()
        mu = np.linalg.solve(lam, eta)
        return {v_id: mu[sl] for v_id, sl in index.items()}

    def beliefs_consistent(self) -> bool:
        for v in self.variables.values():
            expected = product_all(list(v.inbox.values()), v.dim)
            if not (np.array_equal(expected.eta, v.belief.eta) and np.array_equal(expected.lam, v.belief.lam)):
                return False
        return True

    def __repr__(self) -> str:
        return f"FactorGraph({self.name!r}, variables={len(self.variables)}, factors={len(self.factors)})"


def is_settled(graph: FactorGraph, f: FactorNode) -> bool:
    """A linear unary factor whose likelihood already sits in its variable's
    inbox. Nothing it sends can change until it is replaced."""
    if len(f.neighbors) != 1 or f.remote is not None or not f.linear or f.likelihood is None:
        return False
    return graph.variables[f.neighbors[0]].inbox.get(f.id) is f.likelihood


def iterate(graph: FactorGraph, n: int) -> FactorGraph:
    """Run `n` synchronous rounds: relinearise, factor->variable,
    belief update, variable->factor.

    Settled unary factors are skipped, and only variables next to a factor
    that did work get their belief recomputed; the rest keep their state.
    """
    if n < 0:
        raise ValueError(f"iteration count must be non-negative, got {n}")
    for _ in range(n):
        live = [f for f in graph.factors.values() if graph.is_live(f) and not is_settled(graph, f)]

        for f in live:
            if f.linear and f.likelihood is not None:
                continue
            linearize(f, graph.stacked_point(f))

        touched: dict[str, VariableNode] = {}
        for f in live:
            for v_id in f.local_neighbors:
                msg = factor_to_variable(f, v_id, graph.damping, graph.diagnostics)
                v = graph.variables[v_id]
                v.inbox[f.id] = msg.payload
                touched[v_id] = v

        for v in touched.values():
            belief = update_belief(v)
            if not (np.all(np.isfinite(belief.eta)) and np.all(np.isfinite(belief.lam))):
                raise NonFiniteBelief(graph.name, v.id, graph.iterations)

        for f in live:
            for v_id in f.local_neighbors:
                f.inbox[v_id] = variable_to_factor(graph.variables[v_id], f.id).payload

        graph.iterations += 1

    if graph.diagnostics["singular_marginalization"]:
        logger.debug(
            "%s: %d degraded messages so far",
            graph.name, graph.diagnostics["singular_marginalization"],
        )
    return graph

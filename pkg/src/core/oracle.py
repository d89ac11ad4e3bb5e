"""
Ground-truth measurements a single node cannot make.

Consensus predicates, true consensus times, ergodicity coefficients and the
response-time bound, plus trace-level checks that return the list of violated
statements (empty when everything holds).
"""

from typing import Callable, List, Optional, Sequence
import logging
import math

import numpy as np

from src.core.detectors import local_consensus_test
from src.core.dynamics import ConsensusLaw, NetworkState, UpdateLaw, WeightMatrix, graph_of, spread
from src.core.graph import Digraph, diameter, is_strongly_connected
from src.core.models import ConsensusReport, ErgodicAnalysis, EventKind, TraceRecord

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 100000


class OracleError(ValueError):
    """Input error for an oracle operation."""
    pass


class ContractViolation(RuntimeError):
    """A documented guarantee failed, meaning a precondition was broken upstream."""
    pass


def is_global_eps(s: NetworkState, eps: float) -> bool:
    return spread(s) < eps


def is_uniform_local(s: NetworkState, g: Digraph, eps: float) -> bool:
    return all(local_consensus_test(i, s, g, eps) for i in g.nodes)


def lemma1_bound_check(s: NetworkState, g: Digraph, eps: float) -> bool:
    """Uniformly local eps-consensus implies global (eps * D)-consensus."""
    if not is_strongly_connected(g):
        raise OracleError("Uniform-to-global bound needs a strongly connected graph")
    if not is_uniform_local(s, g, eps):
        return True
    return is_global_eps(s, eps * diameter(g))


def ergodic_coefficient(a: np.ndarray) -> float:
    """``min_{i != j} sum_k min(a_ik, a_jk)``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise OracleError(f"Ergodic coefficient needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 2:
        raise OracleError("Ergodic coefficient needs at least two rows")
    overlap = np.minimum(a[:, None, :], a[None, :, :]).sum(axis=2)
    overlap[np.diag_indices(n)] = np.inf
    return float(overlap.min())


def min_ergodic_h(a: WeightMatrix, d_max: int) -> int:
    power = np.eye(a.n)
    for h in range(1, d_max + 1):
        power = power @ a.a
        if ergodic_coefficient(power) > 0:
            return h
    raise ContractViolation(f"No h <= {d_max} gives a positive ergodic coefficient")


def response_time_bound(a: WeightMatrix) -> ErgodicAnalysis:
    """
    Worst-case slots between global delta-consensus and the first local stop:
    ``h * ceil(ln D / -ln(1 - tau(A^h))) + D + 1`` (natural logarithm).
    """
    g = graph_of(a)
    if not is_strongly_connected(g):
        raise OracleError("Response-time bound needs a strongly connected graph")
    d = diameter(g)
    if a.n < 2:
        return ErgodicAnalysis(h=1, tau_h=1.0, diameter=d, bound=d + 1)
    h = min_ergodic_h(a, d)
    tau_h = ergodic_coefficient(a.power(h))
    if d == 1 or tau_h >= 1.0:
        contractions = 0
    else:
        contractions = math.ceil(math.log(d) / -math.log1p(-tau_h))
    bound = h * contractions + d + 1
    logger.debug(f"Response bound: D={d}, h={h}, tau={tau_h:.6g}, bound={bound}")
    return ErgodicAnalysis(h=h, tau_h=tau_h, diameter=d, bound=bound)


def first_slot(
    predicate: Callable[[NetworkState], bool],
    w: WeightMatrix,
    x0: NetworkState,
    k_max: int = DEFAULT_K_MAX,
    law: Optional[UpdateLaw] = None,
) -> Optional[int]:
    """First slot ``k <= k_max`` (absolute, starting at ``x0.k``) where ``predicate`` holds."""
    law = law or ConsensusLaw()
    s = x0
    while s.k <= k_max:
        if predicate(s):
            return s.k
        if s.k == k_max:
            break
        s = law.step(w, s)
    return None


def consensus_time(
    w: WeightMatrix,
    x0: NetworkState,
    eps: float,
    k_max: int = DEFAULT_K_MAX,
    law: Optional[UpdateLaw] = None,
) -> Optional[int]:
    """Slot the undisturbed dynamics first reach global eps-consensus, or None (NEVER)."""
    if k_max < 1:
        raise OracleError(f"k_max must be positive, got {k_max}")
    return first_slot(lambda s: is_global_eps(s, eps), w, x0, k_max, law)


def contraction_check(a: WeightMatrix, x0: NetworkState, j: int, slots: int = 50) -> bool:
    """``d(k + j) <= (1 - tau(A^j)) d(k)`` at every ``k < slots`` of the trajectory."""
    if j < 1:
        raise OracleError(f"Contraction horizon must be positive, got {j}")
    factor = 1.0 - (ergodic_coefficient(a.power(j)) if a.n > 1 else 1.0)
    spreads = []
    s = x0
    for _ in range(slots + j):
        spreads.append(spread(s))
        s = ConsensusLaw().step(a, s)
    spreads.append(spread(s))
    for k in range(slots):
        slack = 1e-12 * max(spreads[k], 1.0)
        if spreads[k + j] > factor * spreads[k] + slack:
            logger.warning(
                f"Contraction fails at k={k}: d(k+{j})={spreads[k + j]:.6g} > "
                f"{factor:.6g} * {spreads[k]:.6g}"
            )
            return False
    return True


def _state(record: TraceRecord) -> NetworkState:
    return NetworkState(x=record.x, k=record.k)


def _active_prefix(trace: Sequence[TraceRecord], include_firing: bool = False) -> List[TraceRecord]:
    """Records before any node fired or halted; the plain recurrences apply there."""
    prefix = []
    for record in trace:
        if any(record.stopped) or record.events:
            if include_firing:
                prefix.append(record)
            break
        prefix.append(record)
    return prefix


def check_soundness(trace: Sequence[TraceRecord], guarantee_level: float) -> List[str]:
    for record in trace:
        if record.events_of(EventKind.FIRED):
            if not is_global_eps(_state(record), guarantee_level):
                return [
                    f"slot {record.k}: first firing without global {guarantee_level:.6g}-consensus "
                    f"(spread {spread(_state(record)):.6g})"
                ]
            return []
    return []


def check_counter_bounds(trace: Sequence[TraceRecord], g: Digraph, eps: float) -> List[str]:
    """
    Slope bounds on y and z, the edge inequality and the uniform-local equivalence.

    The transition into the first firing slot is included: every z and the y of
    every node that did not fire still follow the recurrences there.
    """
    violations: List[str] = []
    prefix = _active_prefix(trace, include_firing=True)
    for prev, cur in zip(prefix, prefix[1:]):
        k = prev.k
        fired = set(cur.events_of(EventKind.FIRED))
        for i in g.nodes:
            if cur.y[i] > prev.y[i] + 1:
                violations.append(f"slot {k}: y_{i} grew by more than one")
            if cur.z[i] > prev.z[i] + 1:
                violations.append(f"slot {k}: z_{i} grew by more than one")
        for i, j in g.edges:
            if prev.y[j] < cur.z[i] - 1:
                violations.append(f"slot {k}: edge ({i},{j}) has y_{j}(k) < z_{i}(k+1) - 1")
        if fired:
            # Fired nodes may skip their y update; compare the rest node by node.
            for i in sorted(set(g.nodes) - fired):
                local = local_consensus_test(i, _state(prev), g, eps)
                if local != (cur.y[i] >= 1):
                    violations.append(f"slot {k}: local test of node {i} is {local} but y_{i}(k+1) = {cur.y[i]}")
            continue
        uniform = is_uniform_local(_state(prev), g, eps)
        all_positive = all(v >= 1 for v in cur.y)
        if uniform != all_positive:
            violations.append(
                f"slot {k}: uniform local consensus is {uniform} but min y(k+1) >= 1 is {all_positive}"
            )
    return violations


def check_attractiveness(trace: Sequence[TraceRecord], eps: float) -> List[str]:
    reached = None
    for record in _active_prefix(trace):
        holds = is_global_eps(_state(record), eps)
        if reached is not None and not holds:
            return [f"slot {record.k}: global {eps:.6g}-consensus lost after slot {reached}"]
        if holds and reached is None:
            reached = record.k
    return []


def check_liveness(report: ConsensusReport, d: int) -> List[str]:
    if report.global_eps_time is None:
        return []
    if report.first_stop_time is None:
        return [f"level {report.level:.6g}: consensus at {report.global_eps_time} but no node stopped"]
    if report.first_stop_time > report.global_eps_time + d + 2:
        return [
            f"level {report.level:.6g}: first stop {report.first_stop_time} later than "
            f"{report.global_eps_time} + {d} + 2"
        ]
    return []


def check_halt_latency(report: ConsensusReport, d: int) -> List[str]:
    latency = report.halt_latency
    if latency is not None and latency > d:
        return [f"level {report.level:.6g}: all nodes halted {latency} slots after the first (D={d})"]
    return []


def check_response_bound(report: ConsensusReport, analysis: ErgodicAnalysis) -> List[str]:
    response = report.response_time
    if response is not None and response > analysis.bound:
        return [f"level {report.level:.6g}: response time {response} exceeds bound {analysis.bound}"]
    return []

"""Greedy joint user and beam selection.

Three algorithms, all selecting exactly M users and M beams:

* ``algorithm1`` -- sequential: pick M users greedily by null-space
  projection power over the full beamspace, then pick M beams the same
  way for the fixed users.
* ``algorithm2`` -- simultaneous: each iteration adds one user together
  with one beam, scoring candidates by projection power on the partial
  channel restricted to the selected beams plus the candidate's strongest
  beam.  Up to the threshold m_bar = floor(K*N/(K+N)) only the strongest
  beam is probed (Case 1); beyond it the modulo-N neighbor offsets
  {0, +1, -1} are probed as well (Case 2).
* ``algorithm3`` -- identical control flow to algorithm2 with the
  projection score replaced by a cheap signal-to-interference ratio.

Tie-breaking is deterministic everywhere: the lowest user index wins,
then the lowest beam index.  A candidate whose probe beam is already
selected cannot grow the beam set and is therefore skipped for selection
(its score is still recorded in the trace).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channel import channel_array
from .errors import (
    DegenerateSelectionError,
    InvalidInputError,
    SelectionInfeasibleError,
)

RANK_TOL = 1e-10
SIR_ZERO_INTERFERENCE = 1e-12
DEFAULT_OFFSETS = (0, 1, -1)


@dataclass
class IterationRecord:
    """One greedy iteration: candidate scores and the chosen candidate."""

    stage: str  # "user", "beam" or "pair"
    scores: dict
    chosen: object
    metric: float
    skipped: list = field(default_factory=list)


@dataclass
class SelectionResult:
    """Selected user/beam indices in selection order, plus the trace."""

    users: list
    beams: list
    trace: list

    def to_record(self, algorithm, sum_rate=None, seed=None, include_trace=False):
        """JSON-ready record for the experiments store."""
        rec = {
            "users": [int(u) for u in self.users],
            "beams": [int(b) for b in self.beams],
            "sum_rate": None if sum_rate is None else float(sum_rate),
            "algorithm": algorithm,
            "seed": None if seed is None else int(seed),
        }
        if include_trace:
            rec["trace"] = [
                {
                    "stage": step.stage,
                    "scores": {_key_str(k): _json_num(v) for k, v in step.scores.items()},
                    "chosen": _key_json(step.chosen),
                    "metric": _json_num(step.metric),
                    "skipped": [_key_json(k) for k in step.skipped],
                }
                for step in self.trace
            ]
        return rec


def _key_str(key):
    if isinstance(key, tuple):
        return ",".join(str(int(k)) for k in key)
    return str(int(key))


def _key_json(key):
    if isinstance(key, tuple):
        return [int(k) for k in key]
    return int(key)


def _json_num(value):
    value = float(value)
    return value if math.isfinite(value) else repr(value)


def null_projector(rows) -> np.ndarray:
    """Orthogonal projector onto the null space of the row span.

    Returns I_d - rows^H (rows rows^H)^{-1} rows for an m x d input,
    computed through a Cholesky factorization of the m x m Gram matrix.
    """
    rows = np.asarray(rows, dtype=np.complex128)
    if rows.ndim == 1:
        rows = rows[None, :]
    m, d = rows.shape
    if m > d:
        raise InvalidInputError(f"projector needs m <= d, got shape {rows.shape}")
    gram = rows @ rows.conj().T
    try:
        cho = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateSelectionError(f"Gram matrix not positive definite: {exc}") from exc
    ell = np.abs(np.diagonal(cho[0]))
    # diag-ratio of the Cholesky factor tracks sigma_min/sigma_max of rows
    if ell.min() <= RANK_TOL * ell.max():
        raise DegenerateSelectionError("rows are numerically rank deficient")
    proj = np.eye(d, dtype=np.complex128)
    proj -= rows.conj().T @ scipy.linalg.cho_solve(cho, rows, check_finite=False)
    return proj


def projection_power(candidate, projector) -> float:
    """Squared norm of the projected candidate, as the quadratic form
    candidate @ projector @ candidate^H."""
    c = np.asarray(candidate).ravel()
    if projector.shape != (c.size, c.size):
        raise InvalidInputError(
            f"projector shape {projector.shape} does not match candidate length {c.size}"
        )
    val = np.real(np.dot(c @ projector, c.conj()))
    return max(float(val), 0.0)


def m_bar(K: int, N: int) -> int:
    """Strongest-beam collision threshold floor(K*N / (K+N))."""
    if K < 1 or N < 1:
        raise InvalidInputError(f"K and N must be positive, got K={K}, N={N}")
    return (K * N) // (K + N)


def strongest_beam(H, u: int) -> int:
    """Beam index with the largest |H[u, b]|^2 (lowest index on ties)."""
    data = channel_array(H)
    if not 0 <= u < data.shape[0]:
        raise InvalidInputError(f"user index {u} out of range for K={data.shape[0]}")
    return int(np.argmax(np.abs(data[u]) ** 2))


def neighbor_beam_set(selected_beams, b_star: int, i: int, N: int):
    """Union of the selected beams with the modulo-N shifted beam b*+i.

    When the shifted beam is already selected the set does not grow; the
    caller detects that by comparing lengths and skips the candidate.
    """
    if not 0 <= b_star < N:
        raise InvalidInputError(f"beam index {b_star} out of range for N={N}")
    shifted = (b_star + i) % N
    out = [int(b) for b in selected_beams]
    if shifted not in set(out):
        out.append(shifted)
    return out


def _check_dims(data, M):
    K, N = data.shape
    if M < 1 or M > K or M > N:
        raise InvalidInputError(f"M={M} must satisfy 1 <= M <= min(K={K}, N={N})")
    return K, N


def select_users(data, M: int):
    """Greedy user stage of the sequential algorithm (full beamspace).

    Returns (users, trace).  The first user maximizes row power; each
    later user maximizes the power of its row projected onto the null
    space of the already selected rows.
    """
    data = channel_array(data)
    K, N = _check_dims(data, M)
    row_power = np.sum(np.abs(data) ** 2, axis=1)
    first = int(np.argmax(row_power))
    users = [first]
    trace = [
        IterationRecord(
            stage="user",
            scores={u: float(row_power[u]) for u in range(K)},
            chosen=first,
            metric=float(row_power[first]),
        )
    ]
    chosen = {first}
    for _ in range(1, M):
        try:
            proj = null_projector(data[users, :])
        except DegenerateSelectionError as exc:
            raise SelectionInfeasibleError(f"selected user rows degenerate: {exc}") from exc
        scores = {}
        best_u, best_s = None, -np.inf
        for u in range(K):
            if u in chosen:
                continue
            s = projection_power(data[u], proj)
            scores[u] = s
            if s > best_s:
                best_u, best_s = u, s
        if best_u is None:
            raise SelectionInfeasibleError("no candidate users remain")
        users.append(best_u)
        chosen.add(best_u)
        trace.append(IterationRecord("user", scores, best_u, best_s))
    return users, trace


def select_beams(data, users, M: int):
    """Greedy beam stage of the sequential algorithm for fixed users."""
    data = channel_array(data)
    N = data.shape[1]
    sub = data[list(users), :]
    col_power = np.sum(np.abs(sub) ** 2, axis=0)
    first = int(np.argmax(col_power))
    beams = [first]
    trace = [
        IterationRecord(
            stage="beam",
            scores={b: float(col_power[b]) for b in range(N)},
            chosen=first,
            metric=float(col_power[first]),
        )
    ]
    chosen = {first}
    for _ in range(1, M):
        try:
            proj = null_projector(sub[:, beams].conj().T)
        except DegenerateSelectionError as exc:
            raise SelectionInfeasibleError(f"selected beam columns degenerate: {exc}") from exc
        scores = {}
        best_b, best_s = None, -np.inf
        for b in range(N):
            if b in chosen:
                continue
            s = projection_power(sub[:, b].conj(), proj)
            scores[b] = s
            if s > best_s:
                best_b, best_s = b, s
        if best_b is None:
            raise SelectionInfeasibleError("no candidate beams remain")
        beams.append(best_b)
        chosen.add(best_b)
        trace.append(IterationRecord("beam", scores, best_b, best_s))
    return beams, trace


def algorithm1(H, M: int, power=None) -> SelectionResult:
    """Sequential user-then-beam selection.

    ``power`` is accepted for signature parity with the rate evaluators;
    the greedy scores do not depend on it.
    """
    data = channel_array(H)
    _check_dims(data, M)
    users, trace_u = select_users(data, M)
    beams, trace_b = select_beams(data, users, M)
    return SelectionResult(users=users, beams=beams, trace=trace_u + trace_b)


def _projection_score(data, users, u, idx):
    # quadratic form h N h^H = |h|^2 - h Hs^H (Hs Hs^H)^{-1} Hs h^H,
    # via the per-iteration Cholesky of the Gram matrix (no projector
    # materialization); identical to projecting with null_projector
    sub = data[np.ix_(users, idx)]
    row = data[u, idx]
    gram = sub @ sub.conj().T
    try:
        cho = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateSelectionError(f"Gram matrix not positive definite: {exc}") from exc
    ell = np.abs(np.diagonal(cho[0]))
    if ell.min() <= RANK_TOL * ell.max():
        raise DegenerateSelectionError("selected rows are numerically rank deficient")
    w = sub @ row.conj()
    s = float(np.real(np.dot(row, row.conj()) - w.conj() @ scipy.linalg.cho_solve(cho, w, check_finite=False)))
    s = max(s, 0.0)
    return (s, 0.0), s


def _sir_score(data, users, u, idx):
    row = data[u, idx]
    num = float(np.real(np.dot(row, row.conj())))
    inter = row @ data[np.ix_(users, idx)].conj().T
    den = float(np.real(np.dot(inter, inter.conj())))
    if den <= SIR_ZERO_INTERFERENCE * num:
        # zero interference is the best case; rank by numerator among ties
        return (np.inf, num), np.inf
    gamma = num / den
    return (gamma, 0.0), gamma


def _simultaneous(data, M, score_fn, mbar=None, offsets=DEFAULT_OFFSETS):
    K, N = _check_dims(data, M)
    offsets = tuple(offsets)
    if not offsets or len(set(offsets)) != len(offsets) or any(i not in (-1, 0, 1) for i in offsets):
        raise InvalidInputError(f"offsets must be distinct values from {{0, +1, -1}}, got {offsets}")
    if mbar is None:
        mbar = m_bar(K, N)
    if mbar < 0:
        raise InvalidInputError(f"m_bar threshold must be >= 0, got {mbar}")

    mag2 = np.abs(data) ** 2
    strongest = np.argmax(mag2, axis=1)

    flat = int(np.argmax(mag2))
    u0, b0 = divmod(flat, N)
    users, beams = [u0], [b0]
    user_set, beam_set = {u0}, {b0}
    trace = [
        IterationRecord(
            stage="pair",
            scores={(u, int(strongest[u])): float(mag2[u, strongest[u]]) for u in range(K)},
            chosen=(u0, b0),
            metric=float(mag2[u0, b0]),
        )
    ]

    for it in range(1, M):
        case1 = it < min(M, mbar)
        if case1:
            cands = {(u, int(strongest[u])) for u in range(K) if u not in user_set}
        else:
            cands = {
                (u, (int(strongest[u]) + i) % N)
                for u in range(K)
                if u not in user_set
                for i in offsets
            }
        scores, skipped = {}, []
        best_key, best = None, None
        for u, b in sorted(cands):
            if b in beam_set:
                skipped.append((u, b))
                if case1:
                    # collapsed index set; scored for the trace only
                    try:
                        _, val = score_fn(data, users, u, list(beams))
                        scores[(u, b)] = val
                    except DegenerateSelectionError:
                        pass
                continue
            idx = beams + [b]
            try:
                key, val = score_fn(data, users, u, idx)
            except DegenerateSelectionError:
                skipped.append((u, b))
                continue
            scores[(u, b)] = val
            if best_key is None or key > best_key:
                best_key, best = key, (u, b)
        if best is None:
            raise SelectionInfeasibleError(
                f"iteration {it}: every candidate user/beam pair was skipped"
            )
        users.append(best[0])
        beams.append(best[1])
        user_set.add(best[0])
        beam_set.add(best[1])
        trace.append(IterationRecord("pair", scores, best, scores[best], skipped))
    return SelectionResult(users=users, beams=beams, trace=trace)


def algorithm2(H, M: int, power=None, mbar=None, offsets=DEFAULT_OFFSETS) -> SelectionResult:
    """Simultaneous selection scored by partial-channel null projection.

    ``mbar`` overrides the Case-1/Case-2 switch threshold (default
    floor(K*N/(K+N))); ``offsets`` sets the Case-2 neighbor-beam probes.
    """
    return _simultaneous(channel_array(H), M, _projection_score, mbar=mbar, offsets=offsets)


def algorithm3(H, M: int, power=None, mbar=None, offsets=DEFAULT_OFFSETS) -> SelectionResult:
    """Simultaneous selection scored by the SIR surrogate."""
    return _simultaneous(channel_array(H), M, _sir_score, mbar=mbar, offsets=offsets)

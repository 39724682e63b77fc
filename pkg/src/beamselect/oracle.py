"""Independent brute-force and statistical verifiers.

These routines deliberately avoid the production code paths they check:
determinants go through ``slogdet`` rather than the QR factors, greedy
scores are recomputed from Gram solves instead of explicit projectors,
and claims of the theory (monotonicity, collision probability, asymptotic
orthogonality) are measured empirically over seeded Monte Carlo trials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import dpc_rate, selection
from .channel import ChannelConfig, channel_array, generate_channel, to_beamspace, trial_seed
from .errors import DegenerateSelectionError, InvalidInputError, OracleBudgetError
from .selection import SelectionResult

DEFAULT_BUDGET = 10**6


@dataclass
class OracleReport:
    """Outcome of one verifier run."""

    claim_id: str
    instances: int
    pass_fraction: float
    worst_violation: float
    details: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "claim_id": self.claim_id,
            "instances": int(self.instances),
            "pass_fraction": float(self.pass_fraction),
            "worst_violation": float(self.worst_violation),
            "details": self.details,
        }


def _report(claim_id, flags, violations, details=None):
    n = len(flags)
    return OracleReport(
        claim_id=claim_id,
        instances=n,
        pass_fraction=(sum(flags) / n) if n else 0.0,
        worst_violation=max(violations, default=0.0),
        details=details or {},
    )


def exhaustive_select(H, M: int, power: float, budget: int = DEFAULT_BUDGET):
    """Enumerate every size-M user/beam subset pair; return the best.

    Returns (SelectionResult, optimal_rate).  Ties resolve to the
    lexicographically smallest index lists.  Refuses to run when
    C(K,M)*C(N,M) exceeds ``budget``.
    """
    data = channel_array(H)
    K, N = data.shape
    if M < 1 or M > K or M > N:
        raise InvalidInputError(f"M={M} must satisfy 1 <= M <= min(K={K}, N={N})")
    combos = math.comb(K, M) * math.comb(N, M)
    if combos > budget:
        raise OracleBudgetError(
            f"exhaustive search needs {combos} combinations, over the budget of {budget}"
        )
    best_rate, best_users, best_beams = -np.inf, None, None
    for users in itertools.combinations(range(K), M):
        for beams in itertools.combinations(range(N), M):
            try:
                rate = dpc_rate.dpc_sum_rate(data, users, beams, power).sum_rate
            except DegenerateSelectionError:
                continue
            if rate > best_rate:
                best_rate, best_users, best_beams = rate, users, beams
    if best_users is None:
        raise DegenerateSelectionError("every user/beam subset pair was degenerate")
    result = SelectionResult(users=list(best_users), beams=list(best_beams), trace=[])
    return result, float(best_rate)


def _random_beamspace(cfg: ChannelConfig, seed, trial):
    return to_beamspace(generate_channel(cfg, trial_seed(seed, trial))).data


def verify_user_monotonicity(trials, K, N, M_max, P, seed=0) -> OracleReport:
    """Lemma check: the DPC rate strictly grows when a greedy user is
    appended under the full beamspace, given all-active power loads.

    Instances where any water-filling load hits zero are excluded and
    counted in the details.
    """
    cfg = ChannelConfig(K=K, N=N)
    all_beams = range(N)
    flags, violations, excluded = [], [], 0
    for t in range(trials):
        h = _random_beamspace(cfg, seed, t)
        users, _ = selection.select_users(h, M_max)
        rates = []
        active = True
        for m in range(1, M_max + 1):
            rep = dpc_rate.dpc_sum_rate(h, users[:m], all_beams, P)
            if rep.allocation.active_set.size < m:
                active = False
                break
            rates.append(rep.sum_rate)
        if not active:
            excluded += 1
            continue
        diffs = np.diff(rates)
        flags.append(bool(np.all(diffs > -1e-9)))
        if diffs.size:
            violations.append(float(max(0.0, -diffs.min())))
    return _report(
        "lemma-user-monotonicity", flags, violations, {"excluded_inactive": excluded}
    )


def verify_beam_monotonicity(trials, K, N, M, P, seed=0, chain_length=6) -> OracleReport:
    """Lemma check: for fixed users and nested beam sets, det(Gamma) never
    decreases (to 1e-12 relative) and, at high power, neither does the
    DPC sum rate (to 1e-6)."""
    cfg = ChannelConfig(K=K, N=N)
    flags, violations = [], []
    det_fails = rate_fails = 0
    for t in range(trials):
        h = _random_beamspace(cfg, seed, t)
        rng = np.random.default_rng(trial_seed(seed ^ 0x5EED, t))
        users = rng.choice(K, size=M, replace=False)
        beam_order = rng.permutation(N)
        sizes = range(M, min(N, M + chain_length) + 1)
        logdets, rates = [], []
        for size in sizes:
            beams = beam_order[:size]
            sub = h[np.ix_(users, beams)]
            sign, logdet = np.linalg.slogdet(sub @ sub.conj().T)
            logdets.append(logdet if sign.real > 0 else -np.inf)
            rates.append(dpc_rate.dpc_sum_rate(h, users, beams, P).sum_rate)
        det_ok = bool(np.all(np.diff(logdets) >= np.log(1.0 - 1e-12)))
        rate_ok = bool(np.all(np.diff(rates) >= -1e-6))
        det_fails += not det_ok
        rate_fails += not rate_ok
        flags.append(det_ok and rate_ok)
        drops = -np.diff(rates)
        violations.append(float(max(0.0, drops.max())) if drops.size else 0.0)
    return _report(
        "lemma-beam-monotonicity",
        flags,
        violations,
        {"det_failures": det_fails, "rate_failures": rate_fails},
    )


def verify_qr_det_identity(trials, seed=0, dim_max=16) -> OracleReport:
    """Identity check: prod(r_u) equals sqrt(det(Gamma)) for the selected
    channel Gram matrix Gamma, compared in log space against slogdet."""
    rng = np.random.default_rng(seed)
    flags, violations = [], []
    for _ in range(trials):
        U = int(rng.integers(1, dim_max + 1))
        B = int(rng.integers(U, dim_max + 1))
        Hsel = rng.standard_normal((U, B)) + 1j * rng.standard_normal((U, B))
        r = dpc_rate.qr_positive_diag(Hsel.conj().T).diag
        sign, logdet = np.linalg.slogdet(Hsel @ Hsel.conj().T)
        rel = abs(np.exp(np.log(r).sum() - 0.5 * logdet) - 1.0)
        flags.append(bool(sign.real > 0 and rel < 1e-9))
        violations.append(float(rel))
    return _report("qr-det-identity", flags, violations)


def _greedy_users_gram(h, M):
    """Projection-greedy user selection via Gram solves (no N x N
    projector); independent re-derivation of the production user stage."""
    K = h.shape[0]
    users = [int(np.argmax(np.sum(np.abs(h) ** 2, axis=1)))]
    for _ in range(1, M):
        basis = h[users, :]
        gram = basis @ basis.conj().T
        cross = h @ basis.conj().T  # K x m
        sol = np.linalg.solve(gram, cross.conj().T)  # m x K
        proj_pow = np.sum(np.abs(h) ** 2, axis=1) - np.real(np.sum(cross.T * sol, axis=0))
        proj_pow[users] = -np.inf
        users.append(int(np.argmax(proj_pow)))
    return users


def verify_shared_beam_probability(K, N, M=None, trials=200, seed=0) -> OracleReport:
    """Collision-probability check behind the m_bar threshold.

    Selects users greedily by projection power (beam-agnostic, so
    collisions remain observable) and measures how often a newly selected
    user's strongest beam is already among the strongest beams of the
    users selected before it.  Details carry the per-selection frequency.
    """
    if M is None:
        M = selection.m_bar(K, N)
    if M > K:
        raise InvalidInputError(f"M={M} exceeds K={K}")
    cfg = ChannelConfig(K=K, N=N)
    flags, freqs = [], []
    collisions = selections = 0
    for t in range(trials):
        h = _random_beamspace(cfg, seed, t)
        strongest = np.argmax(np.abs(h) ** 2, axis=1)
        users = _greedy_users_gram(h, M) if M > 1 else [int(np.argmax(np.sum(np.abs(h) ** 2, axis=1)))]
        taken = {int(strongest[users[0]])}
        hit = 0
        for u in users[1:]:
            b = int(strongest[u])
            hit += b in taken
            taken.add(b)
        collisions += hit
        selections += max(M - 1, 0)
        flags.append(hit == 0)
        freqs.append(hit / max(M - 1, 1))
    frequency = collisions / selections if selections else 0.0
    return _report(
        "shared-beam-probability",
        flags,
        freqs,
        {"collision_frequency": frequency, "collisions": collisions, "selections": selections},
    )


def verify_asymptotic_orthogonality(N_list, K, trials=200, seed=0, M=8) -> OracleReport:
    """Trend check: the mean normalized cross-correlation between selected
    users' beamspace rows shrinks as the array grows.

    Users are picked by descending row power with distinct strongest
    beams, matching the regime in which the selected channel components
    become orthogonal.
    """
    N_list = list(N_list)
    means = []
    for N in N_list:
        cfg = ChannelConfig(K=K, N=N)
        m_eff = min(M, K)
        corr_sum, corr_cnt = 0.0, 0
        for t in range(trials):
            h = _random_beamspace(cfg, seed, t)
            power = np.sum(np.abs(h) ** 2, axis=1)
            strongest = np.argmax(np.abs(h) ** 2, axis=1)
            users, taken = [], set()
            for u in np.argsort(-power, kind="stable"):
                b = int(strongest[u])
                if b in taken:
                    continue
                users.append(int(u))
                taken.add(b)
                if len(users) == m_eff:
                    break
            rows = h[users]
            norms = np.linalg.norm(rows, axis=1)
            g = np.abs(rows @ rows.conj().T) / np.outer(norms, norms)
            iu = np.triu_indices(len(users), k=1)
            corr_sum += float(g[iu].sum())
            corr_cnt += iu[0].size
        means.append(corr_sum / corr_cnt if corr_cnt else 0.0)
    diffs = np.diff(means)
    flags = [bool(d < 0) for d in diffs]
    violations = [float(max(0.0, d)) for d in diffs]
    return _report(
        "asymptotic-orthogonality",
        flags if flags else [True],
        violations,
        {"N_list": N_list, "mean_cross_correlation": means},
    )

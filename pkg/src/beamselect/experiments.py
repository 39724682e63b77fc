"""Monte Carlo sweep engine: sum rate vs SNR / M / m_bar / offsets,
runtime measurement, and CSV/JSON persistence.

Trials draw their channels from counter-based substreams of the master
seed, so rate results are bit-identical regardless of the worker count
(capped by the BEAMSELECT_THREADS environment variable).  Runtime columns
are only filled by the runtime measurements, which always run
single-threaded; rate sweeps write 0.0 there so their output files stay
byte-reproducible.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import dpc_rate, oracle, selection
from .channel import (
    CONVENTIONS,
    PAPER_CONVENTION,
    ChannelConfig,
    generate_channel,
    to_beamspace,
    trial_seed,
)
from .errors import (
    DegenerateSelectionError,
    InvalidConfigError,
    SelectionInfeasibleError,
)

DEFAULT_SEED = 20230301
GAP_SNR_DB = 28.0

DESK_SCALE = {"N": 64, "K": 20, "M": 8, "trials": 500}
TABLE_SCALE = {"N": 256, "K": 40, "M": 16, "trials": 1000}

GREEDY_ALGORITHMS = ("alg1", "alg2", "alg3")
ALGORITHM_CHOICES = GREEDY_ALGORITHMS + ("upper_bound", "oracle")

OFFSET_SETS = {1: (0,), 2: (0, 1), 3: (0, 1, -1)}

CSV_COLUMNS = (
    "algorithm",
    "x_name",
    "x_value",
    "mean_sum_rate",
    "std_err",
    "mean_gap",
    "mean_runtime_s",
    "trials",
    "seed",
)


@dataclass
class ExperimentConfig:
    """Reproducible experiment description (desk-scale defaults)."""

    N: int = DESK_SCALE["N"]
    K: int = DESK_SCALE["K"]
    M: int = DESK_SCALE["M"]
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = DESK_SCALE["trials"]
    seed: int = DEFAULT_SEED
    algorithms: tuple = ("alg1", "alg2", "alg3", "upper_bound")
    rate_variant: str = dpc_rate.EQ5_CONSISTENT
    mbar_override: int | None = None
    offset_count: int = 3
    convention: str = PAPER_CONVENTION
    channel: ChannelConfig | None = None
    m_list: tuple | None = None
    mbar_list: tuple | None = None
    runs: int = 200
    warmup: int = 5
    oracle_budget: int = oracle.DEFAULT_BUDGET

    def __post_init__(self):
        if self.M > min(self.K, self.N) or self.M < 1:
            raise InvalidConfigError(
                f"M={self.M} must satisfy 1 <= M <= min(K={self.K}, N={self.N})"
            )
        if self.trials < 1:
            raise InvalidConfigError(f"trials must be >= 1, got {self.trials}")
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        if not all(math.isfinite(s) for s in self.snr_grid_db) or not self.snr_grid_db:
            raise InvalidConfigError("snr_grid_db must be a non-empty list of finite values")
        self.algorithms = tuple(self.algorithms)
        unknown = [a for a in self.algorithms if a not in ALGORITHM_CHOICES]
        if unknown:
            raise InvalidConfigError(f"unknown algorithms {unknown}; choose from {ALGORITHM_CHOICES}")
        if self.rate_variant not in dpc_rate.RATE_VARIANTS:
            raise InvalidConfigError(f"unknown rate_variant {self.rate_variant!r}")
        if self.offset_count not in OFFSET_SETS:
            raise InvalidConfigError(f"offset_count must be 1, 2 or 3, got {self.offset_count}")
        if self.convention not in CONVENTIONS:
            raise InvalidConfigError(f"unknown convention {self.convention!r}")
        if self.mbar_override is not None and self.mbar_override < 0:
            raise InvalidConfigError(f"mbar_override must be >= 0, got {self.mbar_override}")
        if self.channel is None:
            self.channel = ChannelConfig(K=self.K, N=self.N)
        elif (self.channel.K, self.channel.N) != (self.K, self.N):
            raise InvalidConfigError(
                f"channel config K={self.channel.K}, N={self.channel.N} "
                f"does not match experiment K={self.K}, N={self.N}"
            )
        if self.m_list is not None:
            self.m_list = tuple(int(m) for m in self.m_list)
        if self.mbar_list is not None:
            self.mbar_list = tuple(int(m) for m in self.mbar_list)
        if self.runs < 1 or self.warmup < 0:
            raise InvalidConfigError("runs must be >= 1 and warmup >= 0")

    @property
    def offsets(self):
        return OFFSET_SETS[self.offset_count]


@dataclass
class SweepRow:
    """One measured data point of a sweep."""

    algorithm: str
    x_name: str
    x_value: float
    mean_sum_rate: float
    std_err: float
    mean_gap: float
    mean_runtime_s: float
    trials: int
    seed: int


def thread_count() -> int:
    raw = os.environ.get("BEAMSELECT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidConfigError(f"BEAMSELECT_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map_trials(fn, trials):
    workers = thread_count()
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def _beamspace_trial(cfg: ExperimentConfig, t: int) -> np.ndarray:
    H = generate_channel(cfg.channel, trial_seed(cfg.seed, t))
    return to_beamspace(H, cfg.convention).data


def _select(alg, h, M, mbar=None, offsets=None):
    try:
        if alg == "alg1":
            return selection.algorithm1(h, M)
        kwargs = {}
        if mbar is not None:
            kwargs["mbar"] = mbar
        if offsets is not None:
            kwargs["offsets"] = offsets
        if alg == "alg2":
            return selection.algorithm2(h, M, **kwargs)
        return selection.algorithm3(h, M, **kwargs)
    except SelectionInfeasibleError:
        return None


def _rate(cfg, h, users, beams, power):
    try:
        return dpc_rate.dpc_sum_rate(h, users, beams, power, variant=cfg.rate_variant).sum_rate
    except DegenerateSelectionError:
        return None


def _mean_se(values):
    vals = [v for v in values if v is not None]
    n = len(vals)
    if n == 0:
        return math.nan, 0.0, 0
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se, n


def _row(cfg, algorithm, x_name, x_value, rates, bounds=None):
    mean, se, n = _mean_se(rates)
    mean_gap = math.nan
    if bounds is not None:
        gaps = [b - r for r, b in zip(rates, bounds) if r is not None and b is not None]
        mean_gap = float(np.mean(gaps)) if gaps else math.nan
    return SweepRow(
        algorithm=algorithm,
        x_name=x_name,
        x_value=float(x_value),
        mean_sum_rate=mean,
        std_err=se,
        mean_gap=mean_gap,
        mean_runtime_s=0.0,
        trials=n,
        seed=cfg.seed,
    )


def _check_oracle_budget(cfg, M):
    combos = math.comb(cfg.K, M) * math.comb(cfg.N, M)
    if combos > cfg.oracle_budget:
        raise oracle.OracleBudgetError(
            f"oracle needs {combos} combinations at K={cfg.K}, N={cfg.N}, M={M}, "
            f"over the budget of {cfg.oracle_budget}"
        )


def sweep_snr(cfg: ExperimentConfig):
    """Mean sum rate per algorithm at every SNR grid point.

    P = 10^(SNR_dB/10) since the noise power is one.  Infeasible trials
    are excluded per algorithm; the row's trials column shows how many
    survived.
    """
    greedy = [a for a in cfg.algorithms if a in GREEDY_ALGORITHMS]
    want_bound = "upper_bound" in cfg.algorithms
    want_oracle = "oracle" in cfg.algorithms
    if want_oracle:
        _check_oracle_budget(cfg, cfg.M)
    powers = [10.0 ** (s / 10.0) for s in cfg.snr_grid_db]

    def trial(t):
        h = _beamspace_trial(cfg, t)
        sels = {
            a: _select(a, h, cfg.M, mbar=cfg.mbar_override, offsets=cfg.offsets) for a in greedy
        }
        ub_users = selection.select_users(h, cfg.M)[0] if want_bound else None
        out = {a: [] for a in cfg.algorithms}
        for power in powers:
            bound = (
                _rate(cfg, h, ub_users, range(cfg.N), power) if want_bound else None
            )
            if want_bound:
                out["upper_bound"].append(bound)
            for a in greedy:
                sel = sels[a]
                out[a].append(None if sel is None else _rate(cfg, h, sel.users, sel.beams, power))
            if want_oracle:
                _, best = oracle.exhaustive_select(h, cfg.M, power, budget=cfg.oracle_budget)
                out["oracle"].append(best)
        return out

    results = _map_trials(trial, cfg.trials)
    rows = []
    for a in cfg.algorithms:
        for i, snr in enumerate(cfg.snr_grid_db):
            rates = [res[a][i] for res in results]
            bounds = [res["upper_bound"][i] for res in results] if want_bound else None
            rows.append(_row(cfg, a, "snr_db", snr, rates, bounds))
    return rows


def sweep_m(cfg: ExperimentConfig, m_list=None, snr_db=GAP_SNR_DB):
    """Gap to the upper bound versus the number of RF chains at 28 dB."""
    m_list = tuple(m_list or cfg.m_list or range(2, cfg.M + 1, 2))
    if any(m < 1 or m > min(cfg.K, cfg.N) for m in m_list):
        raise InvalidConfigError(f"m_list {m_list} out of range for K={cfg.K}, N={cfg.N}")
    greedy = [a for a in cfg.algorithms if a in GREEDY_ALGORITHMS]
    power = 10.0 ** (snr_db / 10.0)

    def trial(t):
        h = _beamspace_trial(cfg, t)
        out = {}
        for m in m_list:
            bound = _rate(cfg, h, selection.select_users(h, m)[0], range(cfg.N), power)
            per_alg = {}
            for a in greedy:
                sel = _select(a, h, m, mbar=cfg.mbar_override, offsets=cfg.offsets)
                per_alg[a] = None if sel is None else _rate(cfg, h, sel.users, sel.beams, power)
            out[m] = (bound, per_alg)
        return out

    results = _map_trials(trial, cfg.trials)
    rows = []
    for a in greedy:
        for m in m_list:
            rates = [res[m][1][a] for res in results]
            bounds = [res[m][0] for res in results]
            rows.append(_row(cfg, a, "M", m, rates, bounds))
    for m in m_list:
        bounds = [res[m][0] for res in results]
        rows.append(_row(cfg, "upper_bound", "M", m, bounds, bounds))
    return rows


def sweep_mbar(cfg: ExperimentConfig, mbar_list=None, snr_db=GAP_SNR_DB):
    """Gap to the bound for the simultaneous algorithm as the Case-1/2
    switch threshold is overridden below and above floor(K*N/(K+N)).

    Trials where any override is infeasible are dropped from all
    overrides so the comparison stays paired.
    """
    base = selection.m_bar(cfg.K, cfg.N)
    if mbar_list is None:
        mbar_list = cfg.mbar_list
    if mbar_list is None:
        lows = [base - d for d in (6, 4, 2, 0)]
        highs = [base + d for d in (2, 4, 6)]
        mbar_list = [m for m in lows + highs if 1 <= m <= cfg.M]
    mbar_list = tuple(mbar_list)
    power = 10.0 ** (snr_db / 10.0)

    def trial(t):
        h = _beamspace_trial(cfg, t)
        bound = _rate(cfg, h, selection.select_users(h, cfg.M)[0], range(cfg.N), power)
        rates = {}
        for mb in mbar_list:
            sel = _select("alg2", h, cfg.M, mbar=mb, offsets=cfg.offsets)
            rates[mb] = None if sel is None else _rate(cfg, h, sel.users, sel.beams, power)
        if bound is None or any(r is None for r in rates.values()):
            return None
        return bound, rates

    results = [res for res in _map_trials(trial, cfg.trials) if res is not None]
    rows = []
    for mb in mbar_list:
        rates = [res[1][mb] for res in results]
        bounds = [res[0] for res in results]
        rows.append(_row(cfg, "alg2", "mbar", mb, rates, bounds))
    return rows


def sweep_offsets(cfg: ExperimentConfig, snr_db=GAP_SNR_DB):
    """Mean sum rate with the Case-2 neighbor probes {0}, {0,+1}, {0,+1,-1}."""
    algs = [a for a in cfg.algorithms if a in ("alg2", "alg3")] or ["alg2"]
    power = 10.0 ** (snr_db / 10.0)

    def trial(t):
        h = _beamspace_trial(cfg, t)
        rates = {}
        for a in algs:
            for count, offsets in OFFSET_SETS.items():
                sel = _select(a, h, cfg.M, mbar=cfg.mbar_override, offsets=offsets)
                rates[(a, count)] = (
                    None if sel is None else _rate(cfg, h, sel.users, sel.beams, power)
                )
        if any(r is None for r in rates.values()):
            return None
        return rates

    results = [res for res in _map_trials(trial, cfg.trials) if res is not None]
    rows = []
    for a in algs:
        for count in sorted(OFFSET_SETS):
            rates = [res[(a, count)] for res in results]
            rows.append(_row(cfg, a, "offset_count", count, rates))
    return rows


def measure_runtime(cfg: ExperimentConfig, m_list=None):
    """Mean wall-clock seconds per selection invocation.

    Always single-threaded; channel generation and warm-up runs are
    excluded from the timed region.  Rate columns are NaN.
    """
    m_list = tuple(m_list or cfg.m_list or (cfg.M,))
    greedy = [a for a in cfg.algorithms if a in GREEDY_ALGORITHMS] or list(GREEDY_ALGORITHMS)
    rows = []
    for a in greedy:
        for m in m_list:
            channels = [_beamspace_trial(cfg, t) for t in range(cfg.warmup + cfg.runs)]
            for h in channels[: cfg.warmup]:
                _select(a, h, m, offsets=cfg.offsets)
            times = []
            for h in channels[cfg.warmup :]:
                start = time.perf_counter()
                _select(a, h, m, offsets=cfg.offsets)
                times.append(time.perf_counter() - start)
            mean = float(np.mean(times))
            se = float(np.std(times, ddof=1) / math.sqrt(len(times))) if len(times) > 1 else 0.0
            rows.append(
                SweepRow(
                    algorithm=a,
                    x_name="M",
                    x_value=float(m),
                    mean_sum_rate=math.nan,
                    std_err=se,
                    mean_gap=math.nan,
                    mean_runtime_s=mean,
                    trials=len(times),
                    seed=cfg.seed,
                )
            )
    return rows


def _probe_runtime(cfg, alg, m, runs):
    channels = [_beamspace_trial(cfg, t) for t in range(runs + 1)]
    _select(alg, channels[0], m, offsets=cfg.offsets)
    times = []
    for h in channels[1:]:
        start = time.perf_counter()
        _select(alg, h, m, offsets=cfg.offsets)
        times.append(time.perf_counter() - start)
    return float(np.mean(times))


def sweep_equal_complexity(cfg: ExperimentConfig, m_values=None, tolerance=0.25, snr_db=GAP_SNR_DB):
    """Rates of the three algorithms at per-algorithm M chosen so that the
    measured runtimes agree within ``tolerance``.

    The sequential algorithm anchors at cfg.M; the cheaper algorithms get
    the M >= cfg.M whose probe runtime lands closest to the anchor.  When
    the band cannot be met within M <= min(K, N) the closest M is used,
    which shows up in the reported runtimes.
    """
    probe_runs = max(10, min(cfg.runs, 30))
    if m_values is not None:
        m_values = tuple(int(m) for m in m_values)
        if len(m_values) != 3:
            raise InvalidConfigError("m_values needs one M per algorithm (three values)")
        chosen = dict(zip(GREEDY_ALGORITHMS, m_values))
    else:
        anchor = _probe_runtime(cfg, "alg1", cfg.M, probe_runs)
        chosen = {"alg1": cfg.M}
        for a in ("alg2", "alg3"):
            best_m, best_err = cfg.M, math.inf
            for m in range(cfg.M, min(cfg.K, cfg.N) + 1):
                rt = _probe_runtime(cfg, a, m, probe_runs)
                err = abs(rt - anchor)
                if err < best_err:
                    best_m, best_err = m, err
                if rt > anchor * (1.0 + tolerance):
                    break
            chosen[a] = best_m

    power = 10.0 ** (snr_db / 10.0)

    def trial(t):
        h = _beamspace_trial(cfg, t)
        out = {}
        for a in GREEDY_ALGORITHMS:
            sel = _select(a, h, chosen[a], offsets=cfg.offsets)
            out[a] = None if sel is None else _rate(cfg, h, sel.users, sel.beams, power)
        return out

    results = _map_trials(trial, cfg.trials)
    rows = []
    for a in GREEDY_ALGORITHMS:
        rates = [res[a] for res in results]
        row = _row(cfg, a, "M", chosen[a], rates)
        row.mean_runtime_s = _probe_runtime(cfg, a, chosen[a], probe_runs)
        rows.append(row)
    return rows


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    return out


def _flatten_config(cfg: ExperimentConfig):
    items = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "channel":
            for cf in fields(value):
                items.append((f"channel.{cf.name}", getattr(value, cf.name)))
        else:
            items.append((f.name, value))
    return items


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows, cfg: ExperimentConfig | None = None) -> str:
    """Serialize rows; UTF-8, LF, '.' decimal.  The config is echoed as
    leading '#' comment lines when given."""
    lines = []
    if cfg is not None:
        for key, value in _flatten_config(cfg):
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            lines.append(f"# {key} = {value}")
    lines.append(",".join(CSV_COLUMNS))
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.algorithm,
                    r.x_name,
                    repr(float(r.x_value)),
                    repr(float(r.mean_sum_rate)),
                    repr(float(r.std_err)),
                    repr(float(r.mean_gap)),
                    repr(float(r.mean_runtime_s)),
                    str(int(r.trials)),
                    str(int(r.seed)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str):
    """Parse rows_to_csv output back into SweepRow objects."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise InvalidConfigError("unrecognized CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise InvalidConfigError(f"malformed CSV row: {ln!r}")
        rows.append(
            SweepRow(
                algorithm=parts[0],
                x_name=parts[1],
                x_value=float(parts[2]),
                mean_sum_rate=float(parts[3]),
                std_err=float(parts[4]),
                mean_gap=float(parts[5]),
                mean_runtime_s=float(parts[6]),
                trials=int(parts[7]),
                seed=int(parts[8]),
            )
        )
    return rows


def rows_to_json(rows, cfg: ExperimentConfig) -> str:
    payload = {"config": config_to_dict(cfg), "rows": [asdict(r) for r in rows]}
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"

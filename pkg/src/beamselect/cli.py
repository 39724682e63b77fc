"""Command-line frontend.

Subcommands cover selection on a single channel draw, the Monte Carlo
sweeps, runtime measurement, the brute-force/statistical verifiers and
binary channel dumps.  Configuration comes from a flat key=value file
with [experiment] and [channel] section headers, optionally overridden on
the command line; unknown keys are rejected before any computation.

Exit codes: 0 success, 2 configuration error, 3 infeasible selection,
4 oracle budget refusal.  Output files are written atomically (temp file
plus rename) and machine-readable output goes only to files.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import tempfile

import numpy as np

from . import dpc_rate, experiments, oracle, selection
from .channel import (
    CONVENTIONS,
    PAPER_CONVENTION,
    UNITARY_CONVENTION,
    ChannelConfig,
    generate_channel,
    to_beamspace,
    trial_seed,
    write_channel_dump,
)
from .errors import (
    BeamselectError,
    InvalidConfigError,
    InvalidInputError,
    OracleBudgetError,
    SelectionInfeasibleError,
)
from .experiments import ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_BUDGET = 4


def _parse_int(text):
    return int(text)


def _parse_float(text):
    return float(text)


def _parse_str(text):
    return text


def _split_list(text):
    return [part for chunk in text.split(",") for part in chunk.split() if part]


def _parse_float_list(text):
    return tuple(float(v) for v in _split_list(text))


def _parse_int_list(text):
    return tuple(int(v) for v in _split_list(text))


def _parse_optional_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


def _parse_optional_int_list(text):
    return None if text.strip().lower() in ("", "none") else _parse_int_list(text)


def _parse_str_list(text):
    return tuple(_split_list(text))


# key -> (section, parser, help text with Table-II default where applicable)
CONFIG_KEYS = {
    "N": ("experiment", _parse_int, "antenna/beam count (Table II: 256; desk default 64)"),
    "K": ("experiment", _parse_int, "total user count (Table II: 40; desk default 20)"),
    "M": ("experiment", _parse_int, "RF chain count (Table II: 16; desk default 8)"),
    "snr_grid_db": ("experiment", _parse_float_list, "SNR grid in dB (Table II: 0..30)"),
    "trials": ("experiment", _parse_int, "Monte Carlo trials (Table II scale: >= 1000; desk 500)"),
    "seed": ("experiment", _parse_int, f"master seed (fixed default {experiments.DEFAULT_SEED})"),
    "algorithms": (
        "experiment",
        _parse_str_list,
        "algorithms to run: subset of alg1,alg2,alg3,upper_bound,oracle",
    ),
    "rate_variant": (
        "experiment",
        _parse_str,
        "water-filling gains: eq5_consistent (r^2, default) or paper_printed (r)",
    ),
    "mbar_override": ("experiment", _parse_optional_int, "Case-1/2 switch override (default: none)"),
    "offset_count": ("experiment", _parse_int, "Case-2 neighbor probes: 1, 2 or 3 (default 3)"),
    "convention": (
        "experiment",
        _parse_str,
        f"DFT scaling: {PAPER_CONVENTION} (default) or {UNITARY_CONVENTION}",
    ),
    "m_list": ("experiment", _parse_optional_int_list, "M values for sweep-m/runtime (default: auto)"),
    "mbar_list": ("experiment", _parse_optional_int_list, "override values for sweep-mbar (default: auto)"),
    "runs": ("experiment", _parse_int, "timed runs per point for runtime measurement (default 200)"),
    "warmup": ("experiment", _parse_int, "untimed warm-up runs before timing (default 5)"),
    "oracle_budget": ("experiment", _parse_int, "max user x beam subset combinations (default 1e6)"),
    "paths_per_user": ("channel", _parse_int, "paths per user (Table II: 3, one LoS + two NLoS)"),
    "los_power_db": ("channel", _parse_float, "LoS path power in dB (Table II: 0)"),
    "nlos_power_db": ("channel", _parse_float, "NLoS path power in dB (Table II: -10)"),
    "gain_model": ("channel", _parse_str, "path gain model: constant (default) or rayleigh"),
    "aod_limit_deg": ("channel", _parse_float, "AoD uniform on +-limit degrees (Table II: 90)"),
    "algorithm": ("select", _parse_str, "algorithm for the select subcommand (default alg2)"),
}

VERIFY_CLAIMS = ("qr-det", "user-mono", "beam-mono", "shared-beam", "asym-orth")


def _config_key_epilog():
    lines = ["configuration keys (config file sections [experiment]/[channel], or --overrides):"]
    for key, (section, _, help_text) in CONFIG_KEYS.items():
        lines.append(f"  {key:<16} [{section}] {help_text}")
    return "\n".join(lines)


def load_config(path=None, overrides=(), full=False, seed=None):
    """Resolve the experiment configuration.

    Precedence: desk-scale defaults (Table II scale with --full), then the
    config file, then --overrides key=value pairs, then --seed.
    Returns (ExperimentConfig, extras) where extras holds the
    subcommand-scoped keys such as ``algorithm``.
    """
    values = dict(experiments.TABLE_SCALE) if full else {}
    extras = {}

    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise InvalidConfigError(f"cannot parse config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in ("experiment", "channel"):
                raise InvalidConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                _apply_key(values, extras, key, raw, expect_section=section)

    for item in overrides:
        if "=" not in item:
            raise InvalidConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        _apply_key(values, extras, key.strip(), raw.strip())

    if seed is not None:
        values["seed"] = seed

    channel_kwargs = {k: values.pop(k) for k in list(values) if CONFIG_KEYS[k][0] == "channel"}
    try:
        cfg = ExperimentConfig(**values)
        if channel_kwargs:
            cfg = ExperimentConfig(
                **{**values, "channel": ChannelConfig(K=cfg.K, N=cfg.N, **channel_kwargs)}
            )
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from exc
    return cfg, extras


def _apply_key(values, extras, key, raw, expect_section=None):
    if key not in CONFIG_KEYS:
        raise InvalidConfigError(f"unknown configuration key {key!r}")
    section, parse, _ = CONFIG_KEYS[key]
    if expect_section is not None and section != expect_section:
        raise InvalidConfigError(f"key {key!r} belongs in section [{section}]")
    try:
        parsed = parse(raw)
    except ValueError as exc:
        raise InvalidConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    if section == "select":
        extras[key] = parsed
    else:
        values[key] = parsed


def _write_atomic(path, text):
    data = text.encode("utf-8") if isinstance(text, str) else text
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".beamselect-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _default_output(args, extension):
    if args.output:
        return args.output
    return f"{args.command.replace('-', '_')}.{extension}"


def _write_rows(cfg, rows, args):
    if args.format == "json":
        out = _default_output(args, "json")
        _write_atomic(out, experiments.rows_to_json(rows, cfg))
    else:
        out = _default_output(args, "csv")
        _write_atomic(out, experiments.rows_to_csv(rows, cfg))
    return out


def _print_row_summary(cfg, rows, out):
    shortfall = sum(max(cfg.trials - r.trials, 0) for r in rows)
    print(f"wrote {len(rows)} rows to {out}")
    if shortfall:
        print(f"infeasible/degenerate trial evaluations excluded: {shortfall}")


def _cmd_select(cfg, extras, args):
    algorithm = extras.get("algorithm", "alg2")
    if algorithm not in experiments.GREEDY_ALGORITHMS:
        raise InvalidConfigError(f"algorithm must be one of {experiments.GREEDY_ALGORITHMS}")
    h = to_beamspace(generate_channel(cfg.channel, trial_seed(cfg.seed, 0)), cfg.convention)
    if algorithm == "alg1":
        result = selection.algorithm1(h, cfg.M)
    elif algorithm == "alg2":
        result = selection.algorithm2(h, cfg.M, mbar=cfg.mbar_override, offsets=cfg.offsets)
    else:
        result = selection.algorithm3(h, cfg.M, mbar=cfg.mbar_override, offsets=cfg.offsets)
    snr = max(cfg.snr_grid_db)
    rate = dpc_rate.dpc_sum_rate(
        h, result.users, result.beams, 10.0 ** (snr / 10.0), variant=cfg.rate_variant
    ).sum_rate
    record = result.to_record(algorithm, sum_rate=rate, seed=cfg.seed, include_trace=args.trace)
    out = _default_output(args, "json")
    _write_atomic(out, json.dumps(record, indent=2) + "\n")
    print(
        f"{algorithm}: {len(result.users)} users / {len(result.beams)} beams, "
        f"sum rate {rate:.4f} bits/s/Hz at {snr:g} dB -> {out}"
    )
    return EXIT_OK


def _cmd_sweep_snr(cfg, extras, args):
    rows = experiments.sweep_snr(cfg)
    out = _write_rows(cfg, rows, args)
    _print_row_summary(cfg, rows, out)
    return EXIT_OK


def _cmd_sweep_m(cfg, extras, args):
    rows = experiments.sweep_m(cfg, m_list=args.m_list)
    out = _write_rows(cfg, rows, args)
    _print_row_summary(cfg, rows, out)
    return EXIT_OK


def _cmd_sweep_mbar(cfg, extras, args):
    rows = experiments.sweep_mbar(cfg, mbar_list=args.mbar_list)
    out = _write_rows(cfg, rows, args)
    _print_row_summary(cfg, rows, out)
    return EXIT_OK


def _cmd_sweep_offsets(cfg, extras, args):
    rows = experiments.sweep_offsets(cfg)
    out = _write_rows(cfg, rows, args)
    _print_row_summary(cfg, rows, out)
    return EXIT_OK


def _cmd_runtime(cfg, extras, args):
    rows = experiments.measure_runtime(cfg, m_list=args.m_list)
    out = _write_rows(cfg, rows, args)
    print(f"wrote {len(rows)} runtime rows to {out} (single-threaded)")
    return EXIT_OK


def _cmd_equal_complexity(cfg, extras, args):
    rows = experiments.sweep_equal_complexity(cfg, m_values=args.m_list)
    out = _write_rows(cfg, rows, args)
    for r in rows:
        print(
            f"{r.algorithm}: M={int(r.x_value)} rate={r.mean_sum_rate:.3f} "
            f"runtime={r.mean_runtime_s * 1e3:.2f} ms"
        )
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _cmd_verify(cfg, extras, args):
    trials = args.trials
    if args.claim == "qr-det":
        report = oracle.verify_qr_det_identity(trials, seed=cfg.seed)
    elif args.claim == "user-mono":
        report = oracle.verify_user_monotonicity(
            trials, K=cfg.K, N=cfg.N, M_max=cfg.M, P=1e3, seed=cfg.seed
        )
    elif args.claim == "beam-mono":
        report = oracle.verify_beam_monotonicity(
            trials, K=cfg.K, N=cfg.N, M=cfg.M, P=1e3, seed=cfg.seed
        )
    elif args.claim == "shared-beam":
        report = oracle.verify_shared_beam_probability(
            K=cfg.K, N=cfg.N, M=cfg.mbar_override, trials=trials, seed=cfg.seed
        )
    else:
        report = oracle.verify_asymptotic_orthogonality(
            N_list=(32, 128, 512), K=cfg.K, trials=trials, seed=cfg.seed
        )
    out = _default_output(args, "json")
    _write_atomic(out, json.dumps(report.to_json(), indent=2) + "\n")
    print(
        f"{report.claim_id}: pass_fraction={report.pass_fraction:.4f} "
        f"worst_violation={report.worst_violation:.3e} ({report.instances} instances) -> {out}"
    )
    return EXIT_OK


def _cmd_oracle_compare(cfg, extras, args):
    trials = args.trials
    power = 10.0 ** (max(cfg.snr_grid_db) / 10.0)
    records = []
    dominated = bound_ok = 0
    for t in range(trials):
        h = to_beamspace(generate_channel(cfg.channel, trial_seed(cfg.seed, t)), cfg.convention)
        _, best = oracle.exhaustive_select(h, cfg.M, power, budget=cfg.oracle_budget)
        bound = dpc_rate.upper_bound(h, cfg.M, power, variant=cfg.rate_variant)
        rates = {}
        for name in experiments.GREEDY_ALGORITHMS:
            if name == "alg1":
                sel = selection.algorithm1(h, cfg.M)
            elif name == "alg2":
                sel = selection.algorithm2(h, cfg.M, offsets=cfg.offsets)
            else:
                sel = selection.algorithm3(h, cfg.M, offsets=cfg.offsets)
            rates[name] = dpc_rate.dpc_sum_rate(
                h, sel.users, sel.beams, power, variant=cfg.rate_variant
            ).sum_rate
        dominated += all(best >= r - 1e-9 for r in rates.values())
        bound_ok += all(bound >= r - 1e-6 for r in rates.values())
        records.append({"trial": t, "optimum": best, "upper_bound": bound, **rates})
    payload = {
        "K": cfg.K,
        "N": cfg.N,
        "M": cfg.M,
        "snr_db": max(cfg.snr_grid_db),
        "trials": trials,
        "oracle_dominates_fraction": dominated / trials,
        "bound_dominates_fraction": bound_ok / trials,
        "records": records,
    }
    out = _default_output(args, "json")
    _write_atomic(out, json.dumps(payload, indent=2) + "\n")
    print(
        f"oracle dominates in {dominated}/{trials} trials, "
        f"bound dominates in {bound_ok}/{trials} -> {out}"
    )
    return EXIT_OK


def _cmd_gen_channel(cfg, extras, args):
    out = _default_output(args, "bsch")
    paths = []
    for t in range(args.count):
        H = generate_channel(cfg.channel, trial_seed(cfg.seed, t))
        if args.domain == "antenna":
            matrix, convention = H, None
        else:
            convention = PAPER_CONVENTION if args.domain == "paper" else UNITARY_CONVENTION
            matrix = to_beamspace(H, convention)
        path = out if args.count == 1 else _indexed_path(out, t)
        write_channel_dump(path, matrix, convention)
        paths.append(path)
    print(f"wrote {len(paths)} channel dump(s): {', '.join(paths)}")
    return EXIT_OK


def _indexed_path(path, index):
    root, ext = os.path.splitext(path)
    return f"{root}.{index:04d}{ext}"


COMMANDS = {
    "select": _cmd_select,
    "sweep-snr": _cmd_sweep_snr,
    "sweep-m": _cmd_sweep_m,
    "sweep-mbar": _cmd_sweep_mbar,
    "sweep-offsets": _cmd_sweep_offsets,
    "runtime": _cmd_runtime,
    "equal-complexity": _cmd_equal_complexity,
    "verify": _cmd_verify,
    "oracle-compare": _cmd_oracle_compare,
    "gen-channel": _cmd_gen_channel,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="beamselect",
        description="Joint user and beam selection simulator for the beamspace massive MIMO downlink",
        epilog=_config_key_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--config", default=None, help="key=value config file with section headers")
        p.add_argument(
            "--overrides",
            nargs="*",
            default=[],
            metavar="KEY=VALUE",
            help="config overrides applied after the file",
        )
        p.add_argument("--output", default=None, help="output file (default: <command>.<ext>)")
        p.add_argument(
            "--seed",
            default=None,
            help="master seed; an integer, or 'random' to opt out of the fixed default",
        )
        p.add_argument("--full", action="store_true", help="Table-II scale defaults (N=256, K=40)")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("select", help="run one algorithm on a single channel draw")
    common(p, fmt=False)
    p.add_argument("--trace", action="store_true", help="include the per-iteration trace")

    for name, help_text in [
        ("sweep-snr", "mean sum rate over the SNR grid"),
        ("sweep-offsets", "mean sum rate with 1, 2 or 3 neighbor-beam probes"),
    ]:
        p = sub.add_parser(name, help=help_text)
        common(p)

    p = sub.add_parser("sweep-m", help="gap to the upper bound versus M at 28 dB")
    common(p)
    p.add_argument("--m-list", type=_parse_int_list, default=None, help="comma-separated M values")

    p = sub.add_parser("sweep-mbar", help="gap to the bound versus the Case-1/2 threshold override")
    common(p)
    p.add_argument("--mbar-list", type=_parse_int_list, default=None, help="override values")

    p = sub.add_parser("runtime", help="single-threaded wall-clock per selection run")
    common(p)
    p.add_argument("--m-list", type=_parse_int_list, default=None, help="comma-separated M values")

    p = sub.add_parser("equal-complexity", help="rates at per-algorithm M with matched runtimes")
    common(p)
    p.add_argument(
        "--m-list", type=_parse_int_list, default=None, help="explicit M per algorithm (three values)"
    )

    p = sub.add_parser("verify", help="run one statistical/brute-force verifier")
    common(p, fmt=False)
    p.add_argument("--claim", choices=VERIFY_CLAIMS, required=True)
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("oracle-compare", help="exhaustive optimum vs greedy algorithms (small instances)")
    common(p, fmt=False)
    p.add_argument("--trials", type=int, default=200)

    p = sub.add_parser("gen-channel", help="write channel realizations in the binary dump format")
    common(p, fmt=False)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--domain", choices=("antenna", "paper", "unitary"), default="paper")

    return parser


def _resolve_seed(raw):
    if raw is None:
        return None
    if raw == "random":
        return int(np.random.SeedSequence().entropy % (2**63))
    try:
        return int(raw)
    except ValueError as exc:
        raise InvalidConfigError(f"--seed must be an integer or 'random', got {raw!r}") from exc


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, extras = load_config(
            path=args.config,
            overrides=args.overrides,
            full=args.full,
            seed=_resolve_seed(args.seed),
        )
        return COMMANDS[args.command](cfg, extras, args)
    except (InvalidConfigError, InvalidInputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SelectionInfeasibleError as exc:
        print(f"infeasible selection: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleBudgetError as exc:
        print(f"oracle budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except BeamselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

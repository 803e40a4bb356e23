"""Command-line front end.

Commands
--------
``capacity``     value of the game, of a fixed prior, or of a fixed attack
``bounds``       closed-form lower/upper bounds and the asymptote
``asymptotics``  Fisher-type integral, asymptotic capacity and profile tables
``sweep``        one solved row per ``(k, decoder)``
``oracle-check`` brute-force and cross-check reports

Exit status is 0 on success, 1 on invalid input and 2 when a solver did not
converge or a cross-check failed; in the last case the artifact is still
written and marked ``"converged": false`` (or ``"pass": false``).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .asymptotics import (
    asymptotic_report,
    normalized_payoff_table,
    profile_table,
)
from .core import (
    CollusionChannel,
    ContinuousPrior,
    DecoderKind,
    FiniteSpectrumPrior,
    interleaving_channel,
)
from .errors import FpgameError, InvalidPriorError, NonConvergenceError, SpecError
from .games import (
    DEFAULT_OPTIONS,
    SolverOptions,
    capacity_bounds,
    maximize_over_w,
    minimize_over_channel,
    solve_saddle,
)
from .payoff import expected_payoff
from .serialize import (
    channel_from_dict,
    channel_to_dict,
    csv_text,
    dumps,
    loads,
    prior_from_dict,
    prior_to_dict,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNCONVERGED = 2

COMMANDS = ("capacity", "bounds", "asymptotics", "sweep", "oracle-check")
SWEEP_COLUMNS = ("k", "decoder", "value", "lower", "upper", "asymptote", "gap", "iterations", "converged")
BOUNDS_COLUMNS = ("k", "decoder", "lower", "upper", "asymptote")
THREADS_ENV = "FPGAME_THREADS"


# ---------------------------------------------------------------------------
# specifications
# ---------------------------------------------------------------------------

_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _number(text: str, offset: int, whole: str) -> float:
    if not _NUMBER.match(text):
        raise SpecError(f"expected a number, found {text!r}", whole, offset)
    return float(text)


def _read_json(path_text: str, whole: str):
    path = Path(path_text)
    if not path_text:
        raise SpecError("missing file name after '@'", whole, 1)
    try:
        return loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SpecError(f"cannot read {path_text!r}: {exc.strerror}", whole, 1) from exc
    except ValueError as exc:
        raise SpecError(f"{path_text!r} is not valid JSON", whole, 1) from exc


def parse_prior(spec: str):
    """Prior from ``arcsine | beta:<float> | point:<float> | @<path>``.

    A JSON file may hold a prior (``{"support", "masses"}`` or
    ``{"kind", "theta"}``) or any object with a ``"prior"`` entry, such as
    the output of ``capacity``.

    Raises
    ------
    SpecError
        On a grammar error; the message carries the character position.
    InvalidPriorError
        If the parsed prior violates its invariants.
    """
    text = spec.strip()
    if text == "arcsine":
        return ContinuousPrior.arcsine()
    if text.startswith("@"):
        data = _read_json(text[1:], spec)
        if isinstance(data, dict) and "prior" in data:
            data = data["prior"]
        if not isinstance(data, dict):
            raise SpecError("JSON file does not hold a prior object", spec, 1)
        return prior_from_dict(data)
    head, sep, tail = text.partition(":")
    if not sep:
        raise SpecError("expected 'arcsine', 'beta:<θ>', 'point:<w>' or '@<path>'", spec, 0)
    offset = len(head) + 1
    if head == "beta":
        return ContinuousPrior.beta(_number(tail, offset, spec))
    if head == "point":
        w = _number(tail, offset, spec)
        if not 0.0 <= w <= 1.0:
            raise InvalidPriorError(f"point prior needs w in [0, 1], got {w!r}")
        return FiniteSpectrumPrior.point(w)
    raise SpecError(f"unknown prior kind {head!r}", spec, 0)


def parse_channel(spec: str, k: Optional[int]) -> CollusionChannel:
    """Channel from ``interleaving`` (needs ``k``) or ``@<path>``."""
    text = spec.strip()
    if text == "interleaving":
        if k is None:
            raise SpecError("the interleaving attack needs --k", spec, 0)
        return interleaving_channel(k)
    if text.startswith("@"):
        data = _read_json(text[1:], spec)
        if isinstance(data, dict) and "channel" in data:
            data = data["channel"]
        if not isinstance(data, dict) or "p" not in data:
            raise SpecError("JSON file does not hold a channel object", spec, 1)
        channel = channel_from_dict(data).require_feasible()
        if k is not None and channel.k != k:
            raise SpecError(f"channel file has k={channel.k}, but --k is {k}", spec, 1)
        return channel
    raise SpecError("expected 'interleaving', 'optimal' or '@<path>'", spec, 0)


def parse_k(text: str) -> tuple:
    """``"10"`` or an inclusive range ``"2:20"``."""
    m = re.fullmatch(r"\s*(\d+)\s*(?::\s*(\d+)\s*)?", text)
    if not m:
        raise SpecError("expected an integer or a range a:b", text, 0)
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) else lo
    if lo < 2:
        raise SpecError("k must be at least 2", text, m.start(1))
    if hi < lo:
        raise SpecError("empty k range", text, m.start(2))
    return tuple(range(lo, hi + 1))


def parse_decoders(text: str) -> tuple:
    if text == "both":
        return (DecoderKind.JOINT, DecoderKind.SIMPLE)
    try:
        return (DecoderKind.parse(text),)
    except FpgameError as exc:
        raise SpecError("decoder must be joint, simple or both", text, 0) from exc


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    ks: tuple = ()
    decoders: tuple = (DecoderKind.JOINT,)
    prior: str = "optimal"
    channel: str = "optimal"
    out: Optional[Path] = None
    format: Optional[str] = None
    tol: Optional[float] = None
    grid: Optional[int] = None
    table: str = "none"
    points: int = 101

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise SpecError(f"unknown command {self.command!r}", self.command, 0)
        if self.format not in (None, "csv", "json"):
            raise SpecError("format must be csv or json", str(self.format), 0)
        if self.tol is not None and not self.tol > 0.0:
            raise SpecError("--tol must be positive", str(self.tol), 0)
        if self.grid is not None and self.grid < 3:
            raise SpecError("--grid must be at least 3", str(self.grid), 0)

    def options(self) -> SolverOptions:
        opts = DEFAULT_OPTIONS
        if self.tol is not None:
            opts = opts.replace(tol=self.tol)
        if self.grid is not None:
            opts = opts.replace(w_grid=self.grid)
        return opts

    def output_format(self, default: str) -> str:
        if self.format is not None:
            return self.format
        if self.out is not None and self.out.suffix.lower() in (".csv", ".json"):
            return self.out.suffix.lower()[1:]
        return default


# ---------------------------------------------------------------------------
# workers (module level so that a process pool can pickle them)
# ---------------------------------------------------------------------------


def _capacity_record(k: int, decoder: DecoderKind, prior_spec: str, channel_spec: str, opts) -> dict:
    bounds = capacity_bounds(k, decoder)
    record = {"k": k, "decoder": decoder.value}
    fixed_prior = None if prior_spec == "optimal" else parse_prior(prior_spec)
    fixed_channel = None if channel_spec == "optimal" else parse_channel(channel_spec, k)
    converged = True
    if fixed_prior is None and fixed_channel is None:
        try:
            sol = solve_saddle(k, decoder, opts)
        except NonConvergenceError as exc:
            sol, converged = exc.best, False
        record.update(
            mode="saddle",
            value=sol.value,
            lower=sol.lower,
            upper=sol.upper,
            gap=sol.duality_gap,
            iterations=sol.iterations,
            prior=prior_to_dict(sol.prior),
            channel=channel_to_dict(sol.channel),
        )
    elif fixed_channel is None:
        try:
            sol = minimize_over_channel(fixed_prior, decoder, k, opts)
        except NonConvergenceError as exc:
            sol, converged = exc.best, False
        record.update(
            mode="min-over-channel",
            value=sol.value,
            lower=sol.lower_bound,
            upper=sol.value,
            gap=sol.gap,
            iterations=sol.iterations,
            prior=prior_to_dict(fixed_prior),
            channel=channel_to_dict(sol.channel),
        )
    elif fixed_prior is None:
        w, value = maximize_over_w(fixed_channel, decoder, (0.0, 1.0), opts.w_grid, opts.w_tol)
        record.update(
            mode="max-over-prior",
            value=value,
            lower=value,
            upper=value,
            gap=0.0,
            iterations=0,
            prior=prior_to_dict(FiniteSpectrumPrior.point(w)),
            channel=channel_to_dict(fixed_channel),
        )
    else:
        value = expected_payoff(fixed_prior, fixed_channel, decoder, opts.nodes)
        record.update(
            mode="fixed",
            value=value,
            lower=value,
            upper=value,
            gap=0.0,
            iterations=0,
            prior=prior_to_dict(fixed_prior),
            channel=channel_to_dict(fixed_channel),
        )
    record["asymptote"] = bounds.asymptote
    record["bound_lower"] = bounds.lower_arcsine
    record["bound_upper"] = bounds.upper_interleaving
    record["converged"] = converged
    return record


def _sweep_row(record: dict) -> tuple:
    return (
        record["k"],
        record["decoder"],
        record["value"],
        record["bound_lower"],
        record["bound_upper"],
        record["asymptote"],
        record["gap"],
        record["iterations"],
        record["converged"],
    )


def _workers(tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise SpecError(f"{THREADS_ENV} must be an integer", cap, 0) from exc
    return max(1, min(n, tasks))


def _solve_all(config: RunConfig) -> list:
    jobs = [(k, d) for k in config.ks for d in config.decoders]
    opts = config.options()
    # specifications are parsed up front so that bad input fails before any solve
    if config.prior != "optimal":
        parse_prior(config.prior)
    if config.channel != "optimal":
        parse_channel(config.channel, config.ks[0] if config.ks else None)
    args = [(k, d, config.prior, config.channel, opts) for k, d in jobs]
    workers = _workers(len(args))
    if workers == 1:
        return [_capacity_record(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so rows come back in k-order
        return list(pool.map(_capacity_record, *zip(*args)))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_capacity(config: RunConfig):
    ks = config.ks
    if not ks:
        if config.channel.startswith("@"):
            ks = (parse_channel(config.channel, None).k,)
        else:
            raise SpecError("capacity needs --k", "", 0)
        config = _replace(config, ks=ks)
    records = _solve_all(config)
    fmt = config.output_format("json")
    ok = all(r["converged"] for r in records)
    if fmt == "csv":
        return csv_text(SWEEP_COLUMNS, [_sweep_row(r) for r in records]), ok
    return dumps(records[0] if len(records) == 1 else records), ok


def _cmd_bounds(config: RunConfig):
    if not config.ks:
        raise SpecError("bounds needs --k", "", 0)
    reports = [capacity_bounds(k, d) for k in config.ks for d in config.decoders]
    if config.output_format("csv") == "json":
        return dumps([r.to_dict() for r in reports]), True
    rows = [(r.k, r.decoder.value, r.lower_arcsine, r.upper_interleaving, r.asymptote) for r in reports]
    return csv_text(BOUNDS_COLUMNS, rows), True


def _cmd_asymptotics(config: RunConfig):
    prior = parse_prior("arcsine" if config.prior == "optimal" else config.prior)
    if isinstance(prior, FiniteSpectrumPrior):
        raise SpecError("asymptotics needs a continuous prior", config.prior, 0)
    ks = config.ks or (100,)
    if config.table == "none":
        records = []
        for k in ks:
            rep = asymptotic_report(prior, k)
            records.append({"k": k, "prior": prior_to_dict(prior), **rep.to_dict()})
        if config.output_format("json") == "csv":
            rows = [(r["k"], r["fisher_integral"], r["asymptotic_capacity"]) for r in records]
            return csv_text(("k", "fisher_integral", "asymptotic_capacity"), rows), True
        return dumps(records[0] if len(records) == 1 else records), True
    if len(ks) != 1:
        raise SpecError("profile tables need a single k", ",".join(map(str, ks)), 0)
    k = ks[0]
    if config.table == "profile" and config.channel == "none":
        header, rows = profile_table(prior, None, config.points)
        converged = True
    else:
        if config.channel in ("optimal", "none"):
            try:
                sol = minimize_over_channel(prior, DecoderKind.JOINT, k, config.options())
                converged = True
            except NonConvergenceError as exc:
                sol, converged = exc.best, False
            channel = sol.channel
        else:
            channel, converged = parse_channel(config.channel, k), True
        if config.table == "profile":
            header, rows = profile_table(prior, channel)
        else:
            header, rows = normalized_payoff_table(prior, channel, config.points)
    if config.output_format("csv") == "json":
        return dumps({"header": list(header), "rows": rows, "converged": converged}), converged
    return csv_text(header, rows), converged


def _cmd_sweep(config: RunConfig):
    if not config.ks:
        raise SpecError("sweep needs --k", "", 0)
    records = _solve_all(config)
    ok = all(r["converged"] for r in records)
    if config.output_format("csv") == "json":
        return dumps(records), ok
    return csv_text(SWEEP_COLUMNS, [_sweep_row(r) for r in records]), ok


def _cmd_oracle(config: RunConfig):
    from .oracle import GRID_K, GridSpec, saddle_check

    ks = config.ks or (2, 3)
    bad = [k for k in ks if k not in GRID_K]
    if bad:
        raise SpecError(f"oracle-check supports k in {GRID_K}", ",".join(map(str, bad)), 0)
    spec = GridSpec(config.grid or 401, config.grid or 401)
    tol = config.tol if config.tol is not None else 1e-3
    reports = [saddle_check(k, d, spec, tol) for k in ks for d in config.decoders]
    ok = all(r.passed for r in reports)
    if config.output_format("json") == "csv":
        rows = [(r.operation, r.inputs["k"], r.inputs["decoder"], r.value, r.comparator, r.delta, r.passed) for r in reports]
        return csv_text(("operation", "k", "decoder", "value", "comparator", "delta", "pass"), rows), ok
    return dumps([r.to_dict() for r in reports]), ok


_HANDLERS = {
    "capacity": _cmd_capacity,
    "bounds": _cmd_bounds,
    "asymptotics": _cmd_asymptotics,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle,
}


def _replace(config: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(config, **changes)


def run(config: RunConfig, stdout=None) -> int:
    """Execute one command; writes to ``config.out`` or ``stdout``."""
    stdout = sys.stdout if stdout is None else stdout
    text, ok = _HANDLERS[config.command](config)
    if config.out is not None:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        with open(config.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK if ok else EXIT_UNCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpgame", description="Capacity games of binary fingerprinting codes."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--k", help="coalition size or inclusive range a:b")
        p.add_argument("--decoder", default="joint", help="joint, simple or both")
        p.add_argument(
            "--prior",
            default="optimal",
            help="optimal, arcsine, beta:<theta>, point:<w> or @<json file>",
        )
        p.add_argument(
            "--channel",
            default="optimal",
            help="optimal, interleaving or @<json file>"
            + ("; none tabulates the optimal profile alone" if name == "asymptotics" else ""),
        )
        p.add_argument("--out", type=Path, help="output file (default: standard output)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--tol", type=float, help="duality-gap target (oracle: agreement tolerance)")
        p.add_argument("--grid", type=int, help="bias grid size for best-response searches")
        if name == "asymptotics":
            p.add_argument(
                "--table",
                choices=("none", "profile", "payoff"),
                default="none",
                help="emit a profile or normalised-payoff table instead of the report",
            )
            p.add_argument("--points", type=int, default=101)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        ks=parse_k(ns.k) if ns.k else (),
        decoders=parse_decoders(ns.decoder),
        prior=ns.prior,
        channel=ns.channel,
        out=ns.out,
        format=ns.format,
        tol=ns.tol,
        grid=ns.grid,
        table=getattr(ns, "table", "none"),
        points=getattr(ns, "points", 101),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return run(config_from_args(ns))
    except (FpgameError, ValueError, OSError) as exc:
        print(f"fpgame: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


__all__ = [
    "RunConfig",
    "parse_prior",
    "parse_channel",
    "parse_k",
    "parse_decoders",
    "run",
    "build_parser",
    "main",
    "SWEEP_COLUMNS",
    "BOUNDS_COLUMNS",
]

"""``histent`` command-line interface.

Exit status: 0 on success, 1 on input errors (bad file, bad options), 2 when
a numerical invariant fails (normalization, sum rule, convergence).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from histent.entanglement import (
    density_from_history,
    no_signaling_check,
    sequence_probability,
    space_reduce,
    space_separability,
    time_reduce,
    time_separability,
)
from histent.errors import InputError, NumericalInvariantError
from histent.history import build_history_vector, is_consistent_set, marginal_check
from histent.io import CircuitFile, load_input

COMMANDS = ("amplitudes", "probs", "entropy", "consistency", "marginals", "separability", "nosignal", "report")


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)


@dataclass
class Result:
    status: str | None = None
    summary: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    status_only: bool = False
    failed: bool = False


def _text(x: Any) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        s = f"{x:.6f}"
        return "0.000000" if s == "-0.000000" else s
    return str(x)


def _exact(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _json_value(x: Any) -> Any:
    if isinstance(x, float):
        return float(f"{x:.17g}")
    return x


def render(result: Result, fmt: str) -> str:
    if fmt == "json":
        doc: dict[str, Any] = {}
        if result.status is not None:
            doc["status"] = result.status
        if result.summary:
            doc["summary"] = {k: _json_value(v) for k, v in result.summary.items()}
        for name, t in result.tables.items():
            doc[name] = [{c: _json_value(v) for c, v in zip(t.columns, row)} for row in t.rows]
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        sections = list(result.tables.items())
        if result.summary:
            sections.append(("summary", Table(["key", "value"], [[k, v] for k, v in result.summary.items()])))
        for name, t in sections:
            if len(sections) > 1:
                buf.write(f"# {name}\n")
            w.writerow(t.columns)
            for row in t.rows:
                w.writerow([_exact(v) for v in row])
        return buf.getvalue()
    lines = []
    if result.status is not None:
        lines.append(result.status)
    if not result.status_only:
        for k, v in result.summary.items():
            lines.append(f"{k}: {_text(v)}")
        for name, t in result.tables.items():
            lines.append(f"# {name}")
            lines.append("  ".join(t.columns))
            lines.extend("  ".join(_text(v) for v in row) for row in t.rows)
    return "\n".join(lines) + "\n"


def _h(h: Sequence[str]) -> str:
    return "|".join(h)


def _parse_times(raw: str | None) -> list[int] | None:
    if raw is None:
        return None
    try:
        times = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--times expects a comma-separated list of integers, got {raw!r}") from None
    if not times:
        raise InputError("--times is empty")
    return times


def _parse_params(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        try:
            if not sep or not key:
                raise ValueError
            out[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"--param expects key=value, got {item!r}") from None
    return out


def _parse_sweep(raw: str) -> tuple[str, np.ndarray]:
    """``k=a..b:n`` -> (k, n evenly spaced points from a to b)."""
    try:
        key, rest = raw.split("=", 1)
        span, n = rest.rsplit(":", 1)
        a, b = span.split("..")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"--sweep expects k=a..b:n, got {raw!r}") from None
    if n < 1:
        raise InputError("--sweep needs at least one point")
    return key.strip(), np.linspace(a, b, n)


def _density(hv):
    if hv.amplitudes is None:
        raise InputError("final measurement has rank > 1 outcomes; history density needs rank-1 final outcomes")
    return density_from_history(hv)


def _reduced(rho, cf: CircuitFile, args):
    if args.space:
        rho = space_reduce(rho, cf.partition(), args.space)
    times = _parse_times(args.times)
    if times:
        rho = time_reduce(rho, times)
    return rho


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_amplitudes(cf: CircuitFile, args) -> Result:
    hv = build_history_vector(cf.schedule(args.params))
    t = Table(["history", "re", "im", "probability"])
    for i, h in enumerate(hv.histories):
        if hv.amplitudes is None:
            t.rows.append([_h(h), "n/a", "n/a", float(hv.probabilities[i])])
        else:
            a = hv.amplitudes[i]
            t.rows.append([_h(h), float(a.real), float(a.imag), float(hv.probabilities[i])])
    return Result(summary={"histories": len(hv)}, tables={"amplitudes": t})


def cmd_probs(cf: CircuitFile, args) -> Result:
    hv = build_history_vector(cf.schedule(args.params))
    t = Table(["sequence", "probability"])
    if args.space or args.times:
        rho = _reduced(_density(hv), cf, args)
        for h in rho.basis:
            t.rows.append([_h(h), sequence_probability(rho, h)])
        summary = {"times": ",".join(map(str, rho.times))}
    else:
        t.rows = [[_h(h), float(p)] for h, p in zip(hv.histories, hv.probabilities)]
        summary = {"times": ",".join(map(str, hv.times))}
    summary["total"] = float(sum(r[1] for r in t.rows))
    return Result(summary=summary, tables={"probabilities": t})


def _entropy_at(cf: CircuitFile, args, params) -> float:
    rho = _reduced(_density(build_history_vector(cf.schedule(params))), cf, args)
    return rho.entropy()


def cmd_entropy(cf: CircuitFile, args) -> Result:
    if bool(args.space) == bool(args.times):
        raise InputError("entropy needs exactly one of --space or --times")
    if args.sweep:
        key, grid = _parse_sweep(args.sweep)
        t = Table([key, "entropy"])
        for x in grid:
            params = dict(args.params)
            params[key] = float(x)
            t.rows.append([float(x), _entropy_at(cf, args, params)])
        return Result(tables={"sweep": t})
    s = _entropy_at(cf, args, args.params)
    return Result(status=_text(s), tables={"entropy": Table(["entropy"], [[s]])}, status_only=True)


def cmd_consistency(cf: CircuitFile, args) -> Result:
    rep = is_consistent_set(cf.schedule(args.params))
    t = Table(["history", "other", "re", "abs"], [[_h(a), _h(b), re, ab] for a, b, re, ab in rep.violations])
    summary = {"max_re_offdiagonal": rep.max_real_offdiagonal, "max_abs_offdiagonal": rep.max_abs_offdiagonal}
    return Result(status="CONSISTENT" if rep.consistent else "INCONSISTENT", summary=summary, tables={"violations": t})


def cmd_marginals(cf: CircuitFile, args) -> Result:
    rep = marginal_check(cf.schedule(args.params), args.drop_last)
    last = Table(["sequence", "summed", "direct", "discrepancy"])
    last.rows = [[_h(r.history), r.summed, r.direct, r.discrepancy] for r in rep.last_time]
    inter = Table(["unmeasured_time", "sequence", "summed", "direct", "discrepancy"])
    summary: dict[str, Any] = {"last_time_max": rep.last_time_max}
    for t, rows in rep.intermediate.items():
        summary[f"intermediate_max_t{t}"] = rep.intermediate_max(t)
        inter.rows.extend([f"t{t}", _h(r.history), r.summed, r.direct, r.discrepancy] for r in rows)
    status = "LAST-TIME SUM RULE HOLDS" if rep.ok else "LAST-TIME SUM RULE VIOLATED"
    return Result(status=status, summary=summary, tables={"last_time": last, "intermediate": inter}, failed=not rep.ok)


def _bipartitions(times: Sequence[int]):
    first, rest = times[0], list(times[1:])
    for r in range(0, len(rest)):
        for combo in itertools.combinations(rest, r):
            j = [first, *combo]
            yield j, [t for t in times if t not in j]


def cmd_separability(cf: CircuitFile, args) -> Result:
    hv = build_history_vector(cf.schedule(args.params))
    if hv.amplitudes is None:
        raise InputError("separability needs rank-1 final outcomes")
    t = Table(["cut", "separable", "s2_over_s1"])
    if len(cf.factorization.factor_dims) > 1:
        part = cf.partition()
        res = space_separability(hv, part)
        t.rows.append([f"space A={','.join(map(str, part.a))}|B={','.join(map(str, part.b))}", res.separable, res.ratio])
    times = _parse_times(args.times)
    if times:
        splits = [(times, [x for x in hv.times if x not in times])]
    else:
        splits = list(_bipartitions(hv.times))
    for j, k in splits:
        res = time_separability(hv, (j, k))
        t.rows.append([f"time {','.join(map(str, j))}|{','.join(map(str, k))}", res.separable, res.ratio])
    return Result(tables={"separability": t})


def cmd_nosignal(cf: CircuitFile, args) -> Result:
    s = cf.schedule(args.params)
    rep = no_signaling_check(s, None, cf.partition())
    t = Table(["alice_sequence", "p_with_bob", "p_alice_only", "difference"])
    t.rows = [[_h(a), p, q, abs(p - q)] for a, p, q in rep.rows]
    summary = {"factorized": rep.factorized, "max_discrepancy": rep.max_discrepancy}
    return Result(status="SIGNALING" if rep.signaling else "NO-SIGNALING", summary=summary, tables={"alice": t})


def cmd_report(cf: CircuitFile, args) -> Result:
    s = cf.schedule(args.params)
    hv = build_history_vector(s)
    out = cmd_amplitudes(cf, args)
    rep = is_consistent_set(s, hv)
    summary: dict[str, Any] = {"histories": len(hv), "consistency": "CONSISTENT" if rep.consistent else "INCONSISTENT"}
    summary["max_re_offdiagonal"] = rep.max_real_offdiagonal
    if hv.amplitudes is not None:
        rho = density_from_history(hv)
        summary["S(rho)"] = rho.entropy()
        if len(cf.factorization.factor_dims) > 1:
            part = cf.partition()
            for side in ("A", "B"):
                summary[f"S(rho^{side})"] = space_reduce(rho, part, side).entropy()
        times = hv.times
        for r in range(1, len(times)):
            for keep in itertools.combinations(times, r):
                summary[f"S(rho^{{{','.join(map(str, keep))}}})"] = time_reduce(rho, keep).entropy()
    return Result(summary=summary, tables=out.tables)


HANDLERS: dict[str, Callable[[CircuitFile, argparse.Namespace], Result]] = {
    "amplitudes": cmd_amplitudes,
    "probs": cmd_probs,
    "entropy": cmd_entropy,
    "consistency": cmd_consistency,
    "marginals": cmd_marginals,
    "separability": cmd_separability,
    "nosignal": cmd_nosignal,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="histent", description="History-vector analysis of measured quantum circuits.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("input", metavar="INPUT", help="circuit JSON file or bundled fixture name")
    p.add_argument("--space", choices=("A", "B"), help="keep subsystem A or B")
    p.add_argument("--times", help="comma-separated time labels to keep")
    p.add_argument("--sweep", help="parameter sweep k=a..b:n (entropy only)")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="override a file parameter")
    p.add_argument("--drop-last", type=int, default=1, help="events removed for the last-time sum rule")
    p.add_argument("--format", choices=("text", "csv", "json"), default=None)
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    return p


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        args = build_parser().parse_args(argv)
        args.params = _parse_params(args.param)
        if args.sweep and args.command != "entropy":
            raise InputError("--sweep is only valid with the entropy command")
        fmt = args.format or ("csv" if args.sweep else "text")
        cf = load_input(args.input)
        result = HANDLERS[args.command](cf, args)
        text = render(result, fmt)
        if args.out:
            args.out.write_text(text)
        else:
            stdout.write(text)
        return 2 if result.failed else 0
    except InputError as exc:
        print(f"histent: error: {exc}", file=sys.stderr)
        return 1
    except NumericalInvariantError as exc:
        print(f"histent: numerical invariant failed: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

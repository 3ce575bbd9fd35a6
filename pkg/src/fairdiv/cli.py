"""Command line interface.

Subcommands: gen, check-instance, mnw, solve, verify, sweep,
certify-impossibility. All value comparisons are exact rational arithmetic;
outputs are deterministic unless --timing is requested.

Exit codes: 0 success, 2 malformed input or violated precondition,
3 enumeration capacity exceeded, 4 a guarantee or certificate check failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from fractions import Fraction

from .core import (
    Allocation,
    Bundle,
    CapacityError,
    Caps,
    Instance,
    IterationBoundError,
    MalformedInstanceError,
    caps_from_env,
    check_class,
    format_ratio,
    full_mask,
    iter_mask,
    mask_of,
    nash_product,
    parse_ratio,
)
from . import additive_alg, completion, instances, oracle, subadditive_alg, verify

ALGORITHMS = (
    "additive",
    "additive-complete",
    "additive-poly",
    "subadditive",
    "subadditive-complete",
)
SOLVE_ALGS = ("additive", "subadditive", "additive-poly")
CHECK_NAMES = ("efx", "ef1", "mnw", "separated", "mms", "pmms", "gmms")

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_CAPACITY = 3
EXIT_VIOLATION = 4


def _effective_caps(args) -> Caps:
    caps = caps_from_env()
    if getattr(args, "cap", None) is not None:
        if args.cap <= 0:
            raise MalformedInstanceError("--cap must be a positive integer")
        caps = dataclasses.replace(caps, enumeration=args.cap)
    return caps


def _emit(data, out_path: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_allocation(path: str, instance: Instance) -> Allocation:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInstanceError(f"allocation file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "bundles" not in data:
        raise MalformedInstanceError('allocation JSON must be an object with a "bundles" key')
    bundles = data["bundles"]
    if not isinstance(bundles, list) or len(bundles) != instance.n:
        raise MalformedInstanceError(f"expected a list of {instance.n} bundles")
    masks = []
    for row in bundles:
        if not isinstance(row, list) or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in row
        ):
            raise MalformedInstanceError("each bundle must be a list of item indices")
        if len(set(row)) != len(row):
            raise MalformedInstanceError("a bundle lists the same item twice")
        masks.append(mask_of(row))
    try:
        return Allocation.from_masks(masks, instance.m)
    except (ValueError, MalformedInstanceError) as exc:
        raise MalformedInstanceError(str(exc)) from exc


def _allocation_json(allocation: Allocation) -> list[list[int]]:
    return [sorted(bundle.items()) for bundle in allocation.bundles]


def _items(mask: int) -> list[int]:
    return list(iter_mask(mask))


# ---------------------------------------------------------------------------
# gen

def _cmd_gen(args) -> int:
    params: list[tuple[str, int | str]] = []
    if args.alpha is not None:
        params.append(("alpha", format_ratio(parse_ratio(args.alpha))))
    if args.eps is not None:
        params.append(("eps", format_ratio(parse_ratio(args.eps))))
    for name, value in (
        ("n", args.n),
        ("m", args.m),
        ("N", args.big_n),
        ("seed", args.seed),
        ("max_value", args.max_value),
        ("clauses", args.clauses),
        ("cap", args.budget),
    ):
        if value is not None:
            params.append((name, value))
    spec = instances.GeneratorSpec(args.family, tuple(params))
    instance = instances.generate(spec)
    data = instances.instance_to_dict(instance)
    data["generator"] = spec.to_dict()
    _emit(data, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-instance

def _cmd_check_instance(args) -> int:
    caps = _effective_caps(args)
    instance = instances.load_instance(args.instance, caps)
    report = check_class(instance)
    _emit(report.to_json_dict(), args.out)
    return EXIT_OK if report.ok else EXIT_MALFORMED


# ---------------------------------------------------------------------------
# mnw

def _cmd_mnw(args) -> int:
    caps = _effective_caps(args)
    instance = instances.load_instance(args.instance, caps)
    result = oracle.exact_mnw(instance, caps, method=args.method)
    _emit(result.to_json_dict(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

def _solve_trace_json(state) -> list[dict]:
    steps = []
    if isinstance(state, additive_alg.MatchState):
        for step in state.trace:
            steps.append(
                {
                    "branch": step.branch,
                    "agent": step.i_star,
                    "victim": step.j_star,
                    "item": step.g,
                    "removed": step.removed,
                    "sequence": list(step.sequence) if step.sequence else None,
                    "sequence_end": step.sequence_end,
                    "bundles": [_items(mask) for mask in step.z_masks],
                    "matches": list(step.matches),
                }
            )
    elif isinstance(state, subadditive_alg.SubState):
        for step in state.trace:
            steps.append(
                {
                    "case": step.case,
                    "agent": step.i,
                    "victim": step.j,
                    "seeker": step.k,
                    "item": step.g,
                    "chosen": _items(step.j_mask) if step.j_mask is not None else None,
                    "leftover": _items(step.r_mask) if step.r_mask is not None else None,
                    "seeker_set": _items(step.s_mask) if step.s_mask is not None else None,
                    "x": [_items(mask) for mask in step.x_masks],
                    "z": [_items(mask) for mask in step.z_masks],
                    "matches": [
                        None if entry is None
                        else ["white", entry[1]] if entry[0] == "white"
                        else ["blue", _items(entry[1])]
                        for entry in step.matches
                    ],
                    "deleted": _items(step.deleted_mask),
                    "potential": list(step.phi),
                }
            )
    return steps


def _cmd_solve(args) -> int:
    caps = _effective_caps(args)
    instance = instances.load_instance(args.instance, caps)
    alpha = parse_ratio(args.alpha)
    data: dict = {"algorithm": args.alg, "alpha": format_ratio(alpha), "complete": bool(args.complete)}
    reports: list[verify.GuaranteeReport] = []
    trace_state = None
    events: tuple = ()

    if args.alg == "additive":
        if args.complete:
            result = completion.pipeline_additive(instance, alpha, caps)
            final = result.allocation
            trace_state = result.state
            data["optimal_product"] = format_ratio(result.mnw.product)
            data["partial"] = _allocation_json(result.partial)
            events = result.events
            if args.verify_all:
                reports = list(result.reports)
        else:
            mnw = oracle.exact_mnw(instance, caps)
            final, trace_state = additive_alg.efx_matching(instance, mnw.allocation, alpha)
            data["optimal_product"] = format_ratio(mnw.product)
            if args.verify_all:
                reports = [
                    verify.is_alpha_efx(instance, final, alpha),
                    verify.is_beta_mnw(instance, final, 1 / (alpha + 1), mnw.product),
                    verify.is_gamma_separated(instance, final, alpha),
                ]
    elif args.alg == "subadditive":
        if args.complete:
            result = completion.pipeline_subadditive(instance, alpha, caps)
            final = result.allocation
            trace_state = result.state
            data["optimal_product"] = format_ratio(result.mnw.product)
            data["partial"] = _allocation_json(result.partial)
            data["swaps"] = [list(s) for s in result.swaps]
            events = result.events
            if args.verify_all:
                reports = list(result.reports)
        else:
            mnw = oracle.exact_mnw(instance, caps)
            final, trace_state = subadditive_alg.efx_matching(instance, mnw.allocation, alpha)
            data["optimal_product"] = format_ratio(mnw.product)
            if args.verify_all:
                reports = [
                    verify.is_alpha_efx(instance, final, alpha),
                    verify.is_beta_mnw(instance, final, 1 / (alpha + 1), mnw.product),
                ]
    else:  # additive-poly
        if args.x0 is not None:
            start = _load_allocation(args.x0, instance)
            if not start.complete:
                raise MalformedInstanceError("--x0 must be a complete allocation")
        else:
            start = oracle.exact_mnw(instance, caps).allocation
        beta = parse_ratio(args.beta) if args.beta is not None else Fraction(1)
        result = additive_alg.matching_with_restarts(instance, start, alpha, beta)
        final = result.allocation
        trace_state = result.state
        start_product = nash_product(instance, start)
        data["rounds"] = result.rounds
        data["branches"] = list(result.branches)
        data["start_product"] = format_ratio(start_product)
        efx_level = alpha
        if args.complete:
            pool_mask = full_mask(instance.m) & ~final.union_mask
            swapped = completion.singleton_swaps(instance, final, Bundle(pool_mask))
            completed = completion.envy_cycles(
                instance, swapped.allocation, swapped.unallocated
            )
            data["swaps"] = [list(s) for s in swapped.swaps]
            events = completed.events
            final = completed.allocation
            efx_level = min(alpha, Fraction(1, 2))
            data["efx_level"] = format_ratio(efx_level)
        if args.verify_all:
            reports = [
                verify.is_alpha_efx(instance, final, efx_level),
                verify.is_beta_mnw(instance, final, 1 / (alpha + 1), start_product),
            ]

    data["allocation"] = _allocation_json(final)
    data["unallocated"] = sorted(final.unallocated().items())
    data["achieved_product"] = format_ratio(nash_product(instance, final))
    if args.verify_all:
        data["reports"] = [report.to_json_dict() for report in reports]
        data["ok"] = all(report.passed for report in reports)
    if args.trace is not None:
        trace_data = {
            "steps": _solve_trace_json(trace_state) if trace_state is not None else [],
            "events": [list(event) for event in events],
        }
        _emit(trace_data, args.trace)
    _emit(data, args.out)
    if args.verify_all and not all(report.passed for report in reports):
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _cmd_verify(args) -> int:
    caps = _effective_caps(args)
    instance = instances.load_instance(args.instance, caps)
    allocation = _load_allocation(args.allocation, instance)
    names = [part.strip() for part in args.checks.split(",") if part.strip()]
    for name in names:
        if name not in CHECK_NAMES:
            raise MalformedInstanceError(
                f"unknown check {name!r}; valid names: {', '.join(CHECK_NAMES)}"
            )
    alpha = parse_ratio(args.alpha)
    reports = []
    for name in names:
        if name == "efx":
            reports.append(verify.is_alpha_efx(instance, allocation, alpha))
        elif name == "ef1":
            reports.append(verify.is_ef1(instance, allocation))
        elif name == "mnw":
            if args.beta is None:
                raise MalformedInstanceError("the mnw check needs --beta")
            beta = parse_ratio(args.beta)
            if args.reference_product is not None:
                reference = parse_ratio(args.reference_product)
            else:
                reference = oracle.exact_mnw(instance, caps).product
            reports.append(verify.is_beta_mnw(instance, allocation, beta, reference))
        elif name == "separated":
            if args.gamma is None:
                raise MalformedInstanceError("the separated check needs --gamma")
            reports.append(
                verify.is_gamma_separated(instance, allocation, parse_ratio(args.gamma))
            )
        elif name == "mms":
            reports.append(verify.is_alpha_mms(instance, allocation, alpha, caps))
        elif name == "pmms":
            reports.append(verify.is_alpha_pmms(instance, allocation, alpha, caps))
        elif name == "gmms":
            reports.append(verify.is_alpha_gmms(instance, allocation, alpha, caps))
    data = {
        "checks": [report.to_json_dict() for report in reports],
        "ok": all(report.passed for report in reports),
    }
    _emit(data, args.out)
    return EXIT_OK if data["ok"] else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# sweep

SWEEP_COLUMNS = (
    "instance_id",
    "family",
    "n",
    "m",
    "alpha",
    "algorithm",
    "efx",
    "ef1",
    "mnw_bound",
    "achieved_ratio",
    "achieved_ratio_float",
    "bound_ratio",
    "error",
)


def _sweep_instances(spec_data, caps) -> list[tuple[str, str, Instance]]:
    raw = spec_data.get("instances")
    if not isinstance(raw, list) or not raw:
        raise MalformedInstanceError('sweep spec needs a non-empty "instances" list')
    out = []
    for entry in raw:
        if isinstance(entry, str):
            instance = instances.load_instance(entry, caps)
            out.append((entry, "file", instance))
        elif isinstance(entry, dict) and "file" in entry:
            instance = instances.load_instance(entry["file"], caps)
            out.append((entry["file"], "file", instance))
        elif isinstance(entry, dict) and "family" in entry:
            spec = instances.GeneratorSpec.from_dict(entry)
            out.append((spec.instance_id(), spec.family, instances.generate(spec)))
        else:
            raise MalformedInstanceError(
                "each sweep instance must be a file path or a generator object"
            )
    return out


def _default_algorithms(instance: Instance) -> list[str]:
    if instance.declared_class == "additive":
        return ["additive", "additive-complete", "additive-poly"]
    if instance.declared_class == "subadditive":
        return ["subadditive", "subadditive-complete"]
    return []


def _sweep_row(instance: Instance, alpha: Fraction, algorithm: str, caps: Caps) -> dict:
    row = {
        "efx": "",
        "ef1": "",
        "mnw_bound": "",
        "achieved_ratio": "",
        "achieved_ratio_float": "",
        "bound_ratio": format_ratio((1 / (alpha + 1)) ** instance.n),
        "error": "",
    }
    try:
        if algorithm == "additive":
            mnw = oracle.exact_mnw(instance, caps)
            final, _ = additive_alg.efx_matching(instance, mnw.allocation, alpha)
            optimum = mnw.product
        elif algorithm == "additive-complete":
            result = completion.pipeline_additive(instance, alpha, caps)
            final, optimum = result.allocation, result.mnw.product
            row["ef1"] = result.reports[1].verdict
        elif algorithm == "additive-poly":
            mnw = oracle.exact_mnw(instance, caps)
            outcome = additive_alg.matching_with_restarts(
                instance, mnw.allocation, alpha, Fraction(1)
            )
            final, optimum = outcome.allocation, mnw.product
        elif algorithm == "subadditive":
            mnw = oracle.exact_mnw(instance, caps)
            final, _ = subadditive_alg.efx_matching(instance, mnw.allocation, alpha)
            optimum = mnw.product
        elif algorithm == "subadditive-complete":
            result = completion.pipeline_subadditive(instance, alpha, caps)
            final, optimum = result.allocation, result.mnw.product
        else:
            raise MalformedInstanceError(f"unknown algorithm {algorithm!r}")
    except (ValueError, MalformedInstanceError, CapacityError, IterationBoundError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    row["efx"] = verify.is_alpha_efx(instance, final, alpha).verdict
    row["mnw_bound"] = verify.is_beta_mnw(
        instance, final, 1 / (alpha + 1), optimum
    ).verdict
    achieved = nash_product(instance, final)
    if optimum > 0:
        ratio = achieved / optimum
        row["achieved_ratio"] = format_ratio(ratio)
        row["achieved_ratio_float"] = repr(float(ratio))
    return row


def _cmd_sweep(args) -> int:
    caps = _effective_caps(args)
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec_data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInstanceError(f"sweep spec is not valid JSON: {exc}") from exc
    if not isinstance(spec_data, dict):
        raise MalformedInstanceError("sweep spec must be a JSON object")
    loaded = _sweep_instances(spec_data, caps)
    alphas = spec_data.get("alphas", ["1/2"])
    if not isinstance(alphas, list) or not alphas:
        raise MalformedInstanceError('"alphas" must be a non-empty list')
    parsed_alphas = [parse_ratio(a) for a in alphas]
    algorithms = spec_data.get("algorithms")
    if algorithms is not None:
        if not isinstance(algorithms, list) or not all(
            a in ALGORITHMS for a in algorithms
        ):
            raise MalformedInstanceError(
                f'"algorithms" must be a list drawn from {ALGORITHMS}'
            )

    tasks = []
    for instance_id, family, instance in loaded:
        algs = algorithms if algorithms is not None else _default_algorithms(instance)
        for alpha in parsed_alphas:
            for algorithm in algs:
                tasks.append((instance_id, family, instance, alpha, algorithm))
    tasks.sort(key=lambda t: (t[0], t[3], t[4]))

    columns = list(SWEEP_COLUMNS)
    if args.timing:
        columns.append("wall_ms")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for instance_id, family, instance, alpha, algorithm in tasks:
            started = time.perf_counter()
            row = _sweep_row(instance, alpha, algorithm, caps)
            elapsed_ms = int((time.perf_counter() - started) * 1000)
            row.update(
                {
                    "instance_id": instance_id,
                    "family": family,
                    "n": instance.n,
                    "m": instance.m,
                    "alpha": format_ratio(alpha),
                    "algorithm": algorithm,
                }
            )
            if args.timing:
                row["wall_ms"] = elapsed_ms
            writer.writerow(row)
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify-impossibility

def _cmd_certify(args) -> int:
    caps = _effective_caps(args)
    params: list[tuple[str, int | str]] = []
    if args.family == "theorem4":
        if args.alpha is None or args.eps is None or args.n is None:
            raise MalformedInstanceError("theorem4 needs --alpha, --eps, and --n")
        params = [
            ("alpha", format_ratio(parse_ratio(args.alpha))),
            ("eps", format_ratio(parse_ratio(args.eps))),
            ("n", args.n),
        ]
    else:
        if args.big_n is None:
            raise MalformedInstanceError("theorem5 needs --N")
        params = [("N", args.big_n)]
    spec = instances.GeneratorSpec(args.family, tuple(params))
    certificate = oracle.certify_impossibility(spec, caps)
    _emit(certificate.to_json_dict(), args.out)
    return EXIT_OK if certificate.verified else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdiv",
        description=(
            "Allocate indivisible items with exact fairness and efficiency "
            "guarantees, and verify or refute those guarantees."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--cap", type=int, default=None,
                       help="override the enumeration capacity limit")
        p.add_argument("--out", default=None,
                       help="write the result to this file instead of stdout")

    p = sub.add_parser("gen", help="generate an instance as JSON")
    p.add_argument("--family", required=True, choices=instances.FAMILIES)
    p.add_argument("--n", type=int, default=None, help="number of agents")
    p.add_argument("--m", type=int, default=None, help="number of items")
    p.add_argument("--alpha", default=None, help="ratio, e.g. 1/2")
    p.add_argument("--eps", default=None, help="ratio, e.g. 1/100")
    p.add_argument("--N", dest="big_n", type=int, default=None,
                   help="perfect square size parameter")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-value", type=int, default=None)
    p.add_argument("--clauses", type=int, default=None)
    p.add_argument("--budget", type=int, default=None,
                   help="value cap for the budget_additive family")
    add_common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("check-instance", help="validate a declared valuation class")
    p.add_argument("instance")
    add_common(p)
    p.set_defaults(func=_cmd_check_instance)

    p = sub.add_parser("mnw", help="exact max-product allocation by enumeration")
    p.add_argument("instance")
    p.add_argument("--method", choices=oracle.MNW_METHODS, default="auto")
    add_common(p)
    p.set_defaults(func=_cmd_mnw)

    p = sub.add_parser("solve", help="run an allocation algorithm")
    p.add_argument("instance")
    p.add_argument("--alg", required=True, choices=SOLVE_ALGS)
    p.add_argument("--alpha", required=True, help="EFX strength, a ratio in [0, 1]")
    p.add_argument("--complete", action="store_true",
                   help="extend the partial result to a complete allocation")
    p.add_argument("--x0", default=None,
                   help="starting allocation JSON (additive-poly only)")
    p.add_argument("--beta", default=None,
                   help="claimed welfare ratio of --x0 (additive-poly only)")
    p.add_argument("--trace", default=None, help="write the iteration trace here")
    p.add_argument("--verify-all", action="store_true",
                   help="verify every guarantee the run claims; exit 4 on failure")
    add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="check guarantees of a given allocation")
    p.add_argument("instance")
    p.add_argument("--allocation", required=True, help="allocation JSON file")
    p.add_argument("--checks", default="efx,ef1",
                   help=f"comma list from {{{','.join(CHECK_NAMES)}}}")
    p.add_argument("--alpha", default="1", help="level for efx/mms/pmms/gmms")
    p.add_argument("--beta", default=None, help="level for the mnw check")
    p.add_argument("--reference-product", default=None,
                   help="reference product for the mnw check (default: exact optimum)")
    p.add_argument("--gamma", default=None, help="level for the separated check")
    add_common(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep", help="run an algorithm/alpha grid, write CSV")
    p.add_argument("--spec", required=True, help="sweep description JSON")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--timing", action="store_true",
                   help="add a wall_ms column (non-deterministic)")
    p.add_argument("--cap", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("certify-impossibility",
                       help="verify a trade-off gap on a hard instance family")
    p.add_argument("--family", required=True, choices=("theorem4", "theorem5"))
    p.add_argument("--alpha", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--N", dest="big_n", type=int, default=None)
    add_common(p)
    p.set_defaults(func=_cmd_certify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except IterationBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (MalformedInstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    raise SystemExit(main())

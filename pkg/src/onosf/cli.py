"""Command-line runner.

Every run prints a table (CSV or JSON) and echoes its effective
configuration: the argument vector needed to replay it plus every resolved
parameter and constant.  ``reproduce`` replays such a configuration.

Exit codes: 0 success, 1 internal error, 2 infeasible parameters or an
exceeded budget, 64 malformed arguments or configuration.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__
from .attacks import extraction_impossibility, greedy_coalition
from .boolfn import BooleanFunction, make_named_function, online_influences_fourier_batch
from .core import BudgetExceeded, ConfigError, InfeasibleError, default_budget, fmt12
from .pipelines import (
    CONSTRUCTIONS,
    PipelineConfig,
    general_uni_harness,
    param_report,
    run_pipeline,
    sliding_window_harness,
    xor_condenser_harness,
)
from .prims import (
    asymmetric_2ext,
    inner_product_2ext,
    lhl_extractor,
    search_object,
    verify_seeded_extractor,
    verify_two_source_extractor,
)
from .protocols import (
    CrowdingPlayerAdversary,
    FixedLeader,
    FixedMessageAdversary,
    composition_checks,
    estimate_leader_quality,
    run_protocol,
    two_stage_leader_election,
)
from .sources import CrowdingAdversary, RandomAdversary, SourceSpec, monte_carlo_bias, optimal_online_bias

EXIT_OK, EXIT_INTERNAL, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2, 64


class Parser(argparse.ArgumentParser):
    """Argument parser whose errors exit with the usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    status: int = EXIT_OK

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("row width does not match the header")


def _round12(v):
    if isinstance(v, dict):
        return {str(k): _round12(t) for k, t in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round12(t) for t in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return fmt12(f)
        return float(format(f, ".12g"))
    return v


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([fmt12(c) for c in r])
    return buf.getvalue()


def render_json(table: ResultTable, config: dict) -> str:
    doc = {
        "meta": {"tool": "onosf", "version": __version__, "command": " ".join(config["command"]), "seed": config["seed"]},
        "config": config,
        "columns": table.columns,
        "rows": [dict(zip(table.columns, r)) for r in table.rows],
        "summary": table.summary,
    }
    return json.dumps(_round12(doc), indent=2) + "\n"


# ---------------------------------------------------------------------------
# helpers


def _budget(args) -> int:
    return int(args.budget) if getattr(args, "budget", None) is not None else default_budget()


def require(args, name: str, need: int) -> None:
    have = _budget(args)
    if need > have:
        raise BudgetExceeded(f"budget '{name}' needs {need} but the limit is {have}")


def _function(args) -> BooleanFunction:
    text = args.fn
    try:
        return make_named_function(text, args.ell, args.seed, a=args.a, i=args.i, balanced=args.balanced)
    except ValueError as exc:
        if "unknown function name" not in str(exc):
            raise
    try:
        return BooleanFunction.from_hex(text, args.ell)
    except ValueError as exc:
        raise ConfigError(f"--fn is neither a known name nor a hex truth table: {exc}") from exc


def _int_list(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _kv(text: str | None) -> dict:
    """``k=v,k=v`` or a JSON object."""
    if not text:
        return {}
    text = text.strip()
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("expected a JSON object")
        return doc
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        v = v.strip()
        if v.startswith("[") or v.lower() in ("true", "false"):
            v = json.loads(v.lower() if v.lower() in ("true", "false") else v)
        out[k.strip()] = v
    return out


def _json_arg(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("expected a JSON object")
    return doc


def _fn_params(f: BooleanFunction) -> dict:
    return {"function": f.name, "ell": f.ell, "table_hex": f.to_hex()}


# ---------------------------------------------------------------------------
# boolfn / attack / sources


def cmd_boolfn_analyze(args) -> ResultTable:
    f = _function(args)
    require(args, "truth_table", (1 << f.ell) * max(1, f.ell))
    inf, oi = f.influences(), f.online_influences()
    oif = online_influences_fourier_batch(f.spectrum())[0]
    rows = [[i + 1, inf[i], oi[i], oif[i]] for i in range(f.ell)]
    rep = f.poincare_report()
    top_i, top = f.max_online_influence() if f.ell else (0, 0.0)
    summary = {
        "mean": f.mean(),
        "variance": rep.variance,
        "total_online_influence": rep.total_online_influence,
        "poincare_upper": rep.upper,
        "poincare_holds": rep.ok,
        "max_online_influence": {"i": top_i, "value": top},
    }
    return ResultTable(["i", "influence", "online_influence", "online_influence_fourier"], rows, summary, _fn_params(f))


def cmd_bias(args) -> ResultTable:
    f = _function(args)
    n = getattr(args, "n", 1) or 1
    if f.ell % n:
        raise ConfigError(f"function arity {f.ell} is not a multiple of the block width {n}")
    bad = frozenset(_int_list(args.bad))
    spec = SourceSpec(f.ell // n, n, bad)
    require(args, "truth_table", 1 << f.ell)
    rep = optimal_online_bias(f.table, spec)
    rows = [[" ".join(map(str, sorted(bad))), rep.max_e, rep.min_e, rep.uniform_e, rep.oi_b]]
    params = {**_fn_params(f), "blocks": spec.ell, "n": n, "bad_set": sorted(bad)}
    return ResultTable(["bad_set", "max_expectation", "min_expectation", "uniform_expectation", "online_bias"],
                       rows, {"direction": rep.direction}, params)


def cmd_sources_sample(args) -> ResultTable:
    f = _function(args)
    n = args.n
    if f.ell % n:
        raise ConfigError(f"function arity {f.ell} is not a multiple of the block width {n}")
    bad = frozenset(_int_list(args.bad))
    spec = SourceSpec(f.ell // n, n, bad)
    require(args, "trials", args.trials)
    if args.adversary == "optimal":
        adv = optimal_online_bias(f.table, spec).policy
    elif args.adversary == "crowd":
        adv = CrowdingAdversary()
    else:
        adv = RandomAdversary(args.seed)
    est = monte_carlo_bias(f.table, spec, adv, args.trials, args.seed)
    lo, hi = est.ci
    rows = [[est.trials, est.mean, est.baseline, est.bias, lo, hi]]
    params = {**_fn_params(f), "blocks": spec.ell, "n": n, "bad_set": sorted(bad), "adversary": args.adversary,
              "trials": args.trials}
    return ResultTable(["trials", "mean", "baseline", "bias", "ci_low", "ci_high"], rows, {}, params)


def cmd_attack_greedy(args) -> ResultTable:
    f = _function(args)
    require(args, "truth_table", (1 << f.ell) * f.ell)
    cert = greedy_coalition(f, args.beta)
    rows = []
    e = cert.alpha
    for s, (c, g, inc) in enumerate(zip(cert.coalition, cert.gains, cert.increments), start=1):
        e += inc
        rows.append([s, c, g, inc, e])
    summary = {
        "alpha": cert.alpha,
        "beta": cert.beta,
        "coalition": cert.coalition,
        "size": cert.size,
        "size_bound": cert.size_bound,
        "achieved_expectation": cert.achieved_expectation,
        "replayed_expectation": cert.replay(),
        "strategy": cert.strategy.to_json(),
    }
    return ResultTable(["step", "coordinate", "online_influence", "increment", "expectation"], rows, summary,
                       {**_fn_params(f), "beta": args.beta})


def cmd_attack_impossibility(args) -> ResultTable:
    f = _function(args)
    require(args, "truth_table", (1 << f.ell) * f.ell)
    res = extraction_impossibility(f, args.eps)
    c = res.certificate
    rows = [[" ".join(map(str, c.coalition)), c.size, res.claimed_size, res.bias, res.holds]]
    return ResultTable(["coalition", "size", "size_limit", "bias", "holds"], rows, {},
                       {**_fn_params(f), "eps": args.eps})


# ---------------------------------------------------------------------------
# prims


def _object(args):
    if args.object == "lhl":
        return lhl_extractor(args.n, args.m)
    if args.object == "inner_product":
        return inner_product_2ext(args.n, args.m)
    if args.object == "poly_eval":
        return asymmetric_2ext(args.d, args.n, args.m)
    raise ConfigError(f"unknown object {args.object!r}")


def _report_table(obj, rep, params) -> ResultTable:
    rows = [[rep.object_id, rep.property, rep.measured, rep.passed, rep.sources_checked]]
    return ResultTable(["object_id", "property", "measured", "passed", "sources_checked"], rows,
                       {"report": rep.to_json(), "object": obj.to_json()}, params)


def cmd_prims_verify(args) -> ResultTable:
    obj = _object(args)
    ks = [float(k) for k in args.k.split(",")]
    budget = _budget(args)
    if args.object == "lhl":
        rep = verify_seeded_extractor(obj, int(ks[0]), args.strong is not None, budget)
    else:
        k1, k2 = (ks + ks)[:2]
        rep = verify_two_source_extractor(obj, int(k1), int(k2), args.strong, budget)
    params = {"object": args.object, "n": args.n, "m": args.m, "d": args.d, "k": ks, "strong": args.strong,
              "budget": budget}
    return _report_table(obj, rep, params)


def cmd_prims_search(args) -> ResultTable:
    params = _json_arg(args.params)
    kparams = _json_arg(args.kparams)
    obj, rep = search_object(args.kind, params, kparams, args.eps, args.seed, args.tries, _budget(args))
    return _report_table(obj, rep, {"kind": args.kind, "params": params, "kparams": kparams, "eps": args.eps,
                                    "tries": args.tries})


# ---------------------------------------------------------------------------
# condense


_PRIM = {"type": ["object", "array"]}
PIPELINE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["construction", "ell", "n"],
    "properties": {
        "construction": {"enum": list(CONSTRUCTIONS)},
        "ell": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": ["integer", "null"], "minimum": 1},
        "d": {"type": ["integer", "null"], "minimum": 1},
        "e": {"type": ["integer", "null"], "minimum": 0},
        "n_v": {"type": ["integer", "null"], "minimum": 0},
        "n_y": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "eps": {"type": ["number", "null"], "minimum": 0, "exclusiveMaximum": 1},
        "eps_2ext": {"type": ["number", "null"], "minimum": 0, "exclusiveMaximum": 1},
        "eps_scond": {"type": ["number", "null"], "minimum": 0, "exclusiveMaximum": 1},
        "primitives": {"type": "object", "additionalProperties": _PRIM},
        "constants": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


def load_pipeline_config(path: str) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read pipeline config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, PIPELINE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"pipeline config {path}: {where}: {exc.message}") from exc
    try:
        return PipelineConfig.from_json(doc)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"pipeline config {path}: {exc}") from exc


def read_blocks(path: str, ell: int) -> list[list[int]]:
    """One sample per line: ``ell`` hex block values separated by spaces or commas."""
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise ConfigError(f"cannot read blocks file {path}: {exc}") from exc
    out = []
    for no, ln in enumerate(lines, start=1):
        if not ln or ln.startswith("#"):
            continue
        parts = ln.replace(",", " ").split()
        try:
            vals = [int(p, 16) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"{path}:{no}: malformed hex block") from exc
        if len(vals) != ell:
            raise ConfigError(f"{path}:{no}: expected {ell} blocks, got {len(vals)}")
        out.append(vals)
    return out


def cmd_condense_params(args) -> ResultTable:
    rep = param_report(args.theorem, _kv(args.inputs), _kv(args.constants))
    doc = rep.to_json()
    rows = [[k, v] for k, v in doc["values"].items()]
    status = EXIT_OK if rep.feasible else EXIT_INFEASIBLE
    summary = {"feasible": rep.feasible, "violated": doc["violated"], "notes": doc["notes"]}
    params = {"theorem": rep.theorem, "inputs": doc["inputs"], "constants": doc["constants"]}
    return ResultTable(["quantity", "value"], rows, summary, params, status)


def _hex_out(v, width_bits: int | None = None) -> str:
    if isinstance(v, (tuple, list)):
        return ":".join(format(int(t), "x") for t in v)
    return format(int(v), "x")


def cmd_condense_run(args) -> ResultTable:
    cfg = load_pipeline_config(args.config)
    if args.pipeline != cfg.construction:
        raise ConfigError(f"--pipeline {args.pipeline} does not match the config's {cfg.construction}")
    blocks = read_blocks(args.blocks, _block_count(cfg))
    require(args, "samples", len(blocks))
    mask = (1 << cfg.n) - 1
    rows = []
    for i, b in enumerate(blocks, start=1):
        if any(v > mask for v in b):
            raise ConfigError(f"sample {i}: block value wider than {cfg.n} bits")
        rows.append([i, " ".join(format(v, "x") for v in b), _hex_out(run_pipeline(b, cfg))])
    return ResultTable(["sample", "blocks", "output"], rows, {}, {"pipeline": cfg.to_json()})


def _block_count(cfg: PipelineConfig) -> int:
    return 2 * cfg.ell if cfg.construction == "two_uni" else cfg.ell


def cmd_condense_harness(args) -> ResultTable:
    cfg = load_pipeline_config(args.config)
    if args.pipeline != cfg.construction:
        raise ConfigError(f"--pipeline {args.pipeline} does not match the config's {cfg.construction}")
    require(args, "universe", 1 << (_block_count(cfg) * cfg.n))
    if cfg.construction == "xor":
        checks = xor_condenser_harness(cfg)
        rows = [[" ".join(map(str, c.bad_set)), c.label, c.eps, c.bound, c.certified, c.passed] for c in checks]
        cols = ["bad_set", "label", "eps", "bound", "certified", "passed"]
    elif cfg.construction == "general_uni":
        g = args.g if args.g is not None else cfg.ell
        checks = general_uni_harness(cfg, g, args.k_out, cfg.eps_scond or 0.0)
        rows = [[" ".join(map(str, c.bad_set)), c.label, c.eps, c.bound, c.certified, c.passed] for c in checks]
        cols = ["bad_set", "label", "eps", "bound", "certified", "passed"]
    elif cfg.construction == "sliding_window":
        rep = sliding_window_harness(cfg.primitives["two_ext"], cfg.ell, cfg.n, cfg.d, _budget(args))
        rows = [[" ".join(map(str, c.bad_set)), c.i, c.i_prev, c.distance, c.lemma_bound, c.sharp_bound,
                 c.leak_entropy, c.leak_bound, c.passed] for c in rep.checks]
        cols = ["bad_set", "i", "i_prev", "distance", "lemma_bound", "sharp_bound", "leak_entropy", "leak_bound",
                "passed"]
    else:
        raise ConfigError("the two_uni harness is driven from scripts, not the command line")
    passed = all(r[-1] for r in rows)
    return ResultTable(cols, rows, {"passed": passed}, {"pipeline": cfg.to_json()},
                       EXIT_OK if passed else EXIT_INTERNAL)


# ---------------------------------------------------------------------------
# protocol


def _election(args):
    return two_stage_leader_election(
        args.ell, args.variant, args.C0, args.C1, args.delta, args.threshold, args.final_stage
    )


def cmd_protocol_elect(args) -> ResultTable:
    require(args, "trials", args.trials)
    spec = _election(args)
    st = estimate_leader_quality(spec, args.adversary, args.delta, args.trials, args.seed, args.placement)
    rows = [[r["round"], r["survivors_mean"], r["survivors_min"], r["good_mean"], r["good_min"]] for r in st.rows()]
    lo, hi = st.ci
    summary = {
        "good_leader_frequency": st.good_leader_frequency,
        "ci_low": lo,
        "ci_high": hi,
        "histogram": st.histogram,
        "checks": st.checks,
    }
    return ResultTable(["round", "survivors_mean", "survivors_min", "good_mean", "good_min"], rows, summary,
                       st.config)


def cmd_protocol_run(args) -> ResultTable:
    spec = _election(args)
    bad = frozenset(_int_list(args.bad)) if args.bad else frozenset(range(1, int(args.delta * args.ell) + 1))
    if args.adversary == "crowd":
        adv = CrowdingPlayerAdversary(bad)
    else:
        adv = FixedMessageAdversary(bad, 0)
    run = run_protocol(spec, adv, args.seed)
    rows = []
    for i, msgs in enumerate(run.transcript, start=1):
        for j in sorted(msgs):
            rows.append([i, j, format(msgs[j], "x")])
    if args.transcript:
        with open(args.transcript, "w") as fh:
            fh.write("".join(line + "\n" for line in run.transcript_lines()))
    summary = {"leader": run.outcome, "leader_bad": run.outcome is None or run.outcome in bad,
               "survivors": run.survivors}
    return ResultTable(["round", "player", "message"], rows, summary,
                       {"protocol": spec.to_json(), "adversary": adv.to_json()})


def cmd_protocol_compose(args) -> ResultTable:
    if args.protocol == "fixed":
        spec = FixedLeader(args.ell)
    elif args.protocol == "index":
        spec = two_stage_leader_election(args.ell, threshold=args.ell)
    else:
        spec = two_stage_leader_election(args.ell, threshold=1, final_stage="first")
    require(args, "universe", 1 << (spec.ell * 2 * spec.n))
    checks = composition_checks(spec, 2)
    rows = [[" ".join(map(str, sorted(c.bad_blocks))), " ".join(map(str, sorted(c.bad_players))),
             c.extractor_error, c.bad_leader_probability, c.passed] for c in checks]
    passed = all(c.passed for c in checks)
    return ResultTable(["bad_blocks", "bad_players", "extractor_error", "bad_leader_probability", "passed"], rows,
                       {"passed": passed}, {"protocol": spec.to_json(), "rounds": 2},
                       EXIT_OK if passed else EXIT_INTERNAL)


# ---------------------------------------------------------------------------
# verify-all


def cmd_verify_all(args) -> ResultTable:
    from .verify import run_suite

    results = run_suite(args.budget)
    rows = [[r.name, r.passed, r.detail] for r in results]
    ok = all(r.passed for r in results)
    return ResultTable(["check", "passed", "detail"], rows, {"passed": ok}, {"suite": args.budget},
                       EXIT_OK if ok else EXIT_INTERNAL)


# ---------------------------------------------------------------------------
# parser


def _common(budget: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", choices=("csv", "json"), default="csv", help="output format")
    p.add_argument("--output", help="write the table here instead of stdout")
    p.add_argument("--config-out", help="write the effective configuration here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="accepted for compatibility; work is vectorised")
    if budget:
        p.add_argument("--budget", type=int, default=None, help="enumeration budget (overrides LAB_BUDGET)")
    return p


def _fn_args(p):
    p.add_argument("--fn", required=True, help="function name or hex truth table")
    p.add_argument("--ell", type=int)
    p.add_argument("--a", type=int)
    p.add_argument("--i", type=int, default=1)
    p.add_argument("--balanced", action="store_true")


def _election_args(p):
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--variant", choices=("one_bit", "multi_bit"), default="one_bit")
    p.add_argument("--C0", type=float, default=3.0)
    p.add_argument("--C1", type=float, default=1.5)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--final-stage", choices=("index", "first"), default="index")


def build_parser() -> Parser:
    common = _common()
    parser = Parser(prog="onosf", description="Online-adversary randomness toolkit")
    parser.add_argument("--version", action="version", version=f"onosf {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)
    sub.required = True

    def leaf(group, name, handler, parents=(common,), **kw):
        p = group.add_parser(name, parents=list(parents), **kw)
        p.set_defaults(handler=handler)
        return p

    g = sub.add_parser("boolfn").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    _fn_args(leaf(g, "analyze", cmd_boolfn_analyze))
    p = leaf(g, "bias", cmd_bias)
    _fn_args(p)
    p.add_argument("--bad", required=True)

    g = sub.add_parser("attack").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    p = leaf(g, "greedy", cmd_attack_greedy)
    _fn_args(p)
    p.add_argument("--beta", type=float, required=True)
    p = leaf(g, "impossibility", cmd_attack_impossibility)
    _fn_args(p)
    p.add_argument("--eps", type=float, required=True)

    g = sub.add_parser("sources").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    p = leaf(g, "bias", cmd_bias)
    _fn_args(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--bad", required=True)
    p = leaf(g, "sample", cmd_sources_sample)
    _fn_args(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--bad", default="")
    p.add_argument("--adversary", choices=("optimal", "crowd", "random"), default="optimal")
    p.add_argument("--trials", type=int, default=10_000)

    g = sub.add_parser("prims").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    p = leaf(g, "verify", cmd_prims_verify)
    p.add_argument("--object", choices=("lhl", "inner_product", "poly_eval"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", required=True, help="k, or k1,k2 for two-source objects")
    p.add_argument("--strong", choices=("x", "y"), default=None)
    p = leaf(g, "search", cmd_prims_search)
    p.add_argument("--kind", choices=("seeded_ext", "seeded_cond", "two_source_ext"), required=True)
    p.add_argument("--params", required=True, help="JSON object of widths")
    p.add_argument("--kparams", required=True, help="JSON object of entropies")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tries", type=int, default=2000)

    g = sub.add_parser("condense").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    p = leaf(g, "params", cmd_condense_params)
    p.add_argument("--theorem", required=True)
    p.add_argument("--inputs", default="")
    p.add_argument("--constants", default="")
    p = leaf(g, "run", cmd_condense_run)
    p.add_argument("--pipeline", choices=CONSTRUCTIONS, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--blocks", required=True)
    p = leaf(g, "harness", cmd_condense_harness)
    p.add_argument("--pipeline", choices=CONSTRUCTIONS, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--k-out", type=float, default=1.0)

    g = sub.add_parser("protocol").add_subparsers(dest="action", parser_class=Parser)
    g.required = True
    p = leaf(g, "elect", cmd_protocol_elect)
    _election_args(p)
    p.add_argument("--adversary", choices=("crowd", "honest"), default="crowd")
    p.add_argument("--placement", choices=("low", "random"), default="random")
    p.add_argument("--trials", type=int, default=100_000)
    p = leaf(g, "run", cmd_protocol_run)
    _election_args(p)
    p.add_argument("--bad", default=None, help="comma-separated bad players (default: the first delta*ell)")
    p.add_argument("--adversary", choices=("crowd", "fixed"), default="crowd")
    p.add_argument("--transcript", default=None, help="write JSON lines here")
    p = leaf(g, "compose", cmd_protocol_compose)
    p.add_argument("--ell", type=int, choices=(2, 3), required=True)
    p.add_argument("--protocol", choices=("fixed", "index", "lightest"), default="index")

    p = sub.add_parser("verify-all", parents=[_common(budget=False)])
    p.add_argument("--budget", choices=("small", "full"), default="small")
    p.set_defaults(handler=cmd_verify_all)

    p = sub.add_parser("reproduce")
    p.add_argument("config")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=None)
    return parser


_IO_OPTIONS = ("--output", "--config-out", "--transcript")


def _replay_argv(argv: list[str]) -> list[str]:
    """Arguments with output locations removed."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in _IO_OPTIONS:
            skip = True
            continue
        if any(a.startswith(o + "=") for o in _IO_OPTIONS):
            continue
        out.append(a)
    return out


@contextlib.contextmanager
def _budget_env(value):
    if value is None:
        yield
        return
    old = os.environ.get("LAB_BUDGET")
    os.environ["LAB_BUDGET"] = str(value)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("LAB_BUDGET", None)
        else:
            os.environ["LAB_BUDGET"] = old


def _reproduce(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {args.config}: {exc}") from exc
    cfg = doc.get("config", doc) if isinstance(doc, dict) else None
    if not isinstance(cfg, dict) or not isinstance(cfg.get("argv"), list):
        raise ConfigError("configuration has no argv to replay")
    if cfg.get("tool_version") != __version__:
        print(f"warning: configuration written by version {cfg.get('tool_version')}, running {__version__}",
              file=sys.stderr)
    argv = list(cfg["argv"])
    if args.budget is not None:
        argv += ["--budget", str(args.budget)]
    if args.output:
        argv += ["--output", args.output]
    return main(argv)


def _dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "reproduce":
        return _reproduce(args)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be positive")
    budget = args.budget if args.command != "verify-all" else None
    t0 = time.perf_counter()
    with _budget_env(budget):
        table = args.handler(args)
        effective_budget = default_budget()
    config = {
        "tool_version": __version__,
        "command": [args.command] + ([args.action] if getattr(args, "action", None) else []),
        "argv": _replay_argv(argv),
        "seed": args.seed,
        "threads": args.threads,
        "budget": args.budget if args.command == "verify-all" else effective_budget,
        "params": table.params,
    }
    text = render_json(table, config) if args.out == "json" else render_csv(table)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    cfg_text = json.dumps(_round12(config))
    if args.config_out:
        with open(args.config_out, "w") as fh:
            fh.write(cfg_text + "\n")
    elif args.out == "csv":
        print(f"effective config: {cfg_text}", file=sys.stderr)
    if args.out == "csv" and table.summary:
        print(f"summary: {json.dumps(_round12(table.summary))}", file=sys.stderr)
    print(f"wall time: {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return table.status


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _dispatch(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())

"""Command-line harness.

    saim solve --preset qkp-paper --instances 'data/*.json' --out results/
    saim validate [--checks tv,roundtrip,slack,concavity]
    saim generate --kind qkp --n 12 --density 0.5 --seed 7 --out data/
    saim oracle data/qkp_12_50_s7.json

``solve`` writes ``records.jsonl`` (one line per instance and replicate),
``traces/*.jsonl`` (one line per iteration), ``summary.json`` and
``timings.jsonl``.  Everything except the timings is a pure function of the
inputs, the seed, and the config.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from saim import __version__
from saim.instances import (
    ParseError,
    QkpInstance,
    dump_mkp_orlib,
    dump_qkp,
    generate_mkp,
    generate_qkp,
    load_file,
    to_json,
    to_problem,
    with_opt,
)
from saim.model import evaluate_f, prepare
from saim.oracle import MAX_ENUM_VARS, DimensionLimitError, exhaustive_solve
from saim.solver import (
    DUAL_BOUND_MAX_SPINS,
    PRESETS,
    InstanceStats,
    SaimConfig,
    dual_bound,
    run_penalty_baseline,
    run_saim,
    summarize,
)
from saim.validation import CHECKS

log = logging.getLogger("saim")

RESULT_FORMAT_VERSION = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    pass


def _config_from_args(args) -> SaimConfig:
    if args.preset is not None and args.preset not in PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS.get(args.preset, SaimConfig())
    overrides = {
        "runs": args.runs,
        "mcs_per_run": args.mcs,
        "beta_max": args.beta_max,
        "eta": args.eta,
        "alpha": args.alpha,
        "penalty": args.penalty,
        "seed": args.seed,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        cfg = replace(cfg, **overrides)
        if args.mode == "penalty":
            cfg = replace(cfg, eta=0.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _config_hash(cfg: SaimConfig, mode: str) -> str:
    payload = json.dumps({"mode": mode, **asdict(cfg)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _resolve_instances(pattern: str) -> list[tuple[str, object]]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise ConfigError(f"no instance files match {pattern!r}")
    out = []
    for path in paths:
        try:
            for inst in load_file(path):
                out.append((path, inst))
        except (OSError, ParseError, ValueError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
    return out


def _known_opt(inst) -> tuple[float | None, str | None]:
    if inst.opt is not None:
        return inst.opt, "instance"
    if inst.n <= MAX_ENUM_VARS:
        return exhaustive_solve(to_problem(inst)).value, "oracle"
    return None, None


def _round(value, digits=12):
    return None if value is None else float(round(value, digits))


def _solve_job(job: dict) -> dict:
    inst, cfg, mode = job["instance"], job["config"], job["mode"]
    problem, scale_obj, scale_con = prepare(to_problem(inst))
    run = run_penalty_baseline if mode == "penalty" else run_saim
    result = run(problem, cfg)
    opt, opt_source = job["opt"], job["opt_source"]
    best_acc, avg_acc = result.accuracy(opt) if opt is not None else (None, None)
    lower = None
    if problem.n_vars <= DUAL_BOUND_MAX_SPINS:
        lower = dual_bound(problem, result)[0] * scale_obj
    record = {
        "format_version": RESULT_FORMAT_VERSION,
        "config_hash": job["config_hash"],
        "instance": inst.name,
        "source": job["source"],
        "replicate": job["replicate"],
        "file_index": job["file_index"],
        "seed": cfg.seed,
        "stream": cfg.stream,
        "mode": mode,
        "config": asdict(cfg),
        "penalty": result.penalty,
        "n_items": problem.n_items,
        "n_spins": problem.n_vars,
        "scale_objective": scale_obj,
        "scale_constraints": scale_con,
        "opt": opt,
        "opt_source": opt_source,
        "found_feasible": result.found,
        "best_cost": _round(result.best_cost_original),
        "best_index": result.best_index,
        "best_x": None if result.best_x is None else result.best_x[: problem.n_items].tolist(),
        "best_accuracy": _round(best_acc),
        "avg_accuracy": _round(avg_acc),
        "feasibility": result.feasibility_ratio,
        "dual_bound": _round(lower),
        "total_sweeps": result.total_sweeps,
    }
    trace = [
        {
            "k": r.index,
            "feasible": r.feasible,
            "cost": _round(None if r.cost is None else r.cost * scale_obj),
            "sample_cost": _round(evaluate_f(problem, r.x) * scale_obj),
            "lambda": [float(v) for v in r.lam],
            "g": [_round(float(v)) for v in r.g],
        }
        for r in result.records
    ]
    timing = {"instance": inst.name, "replicate": job["replicate"], "wall_time_s": result.wall_time}
    return {"record": record, "trace": trace, "timing": timing}


def _trace_name(record: dict) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in record["instance"])
    # file index keeps names unique when two files carry the same instance name
    return f"{record['file_index']:04d}_{safe}__r{record['replicate']}.jsonl"


def cmd_solve(args) -> int:
    cfg = _config_from_args(args)
    if args.replicates < 1 or args.workers < 1:
        raise ConfigError("--replicates and --workers must be >= 1")
    chash = _config_hash(cfg, args.mode)
    instances = _resolve_instances(args.instances)
    out = Path(args.out)
    try:
        (out / "traces").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None

    jobs = []
    for index, (path, inst) in enumerate(instances):
        opt, source = _known_opt(inst)
        for rep in range(args.replicates):
            jobs.append({
                "instance": inst,
                "source": str(path),
                "replicate": rep,
                "config": replace(cfg, stream=rep),
                "mode": args.mode,
                "config_hash": chash,
                "opt": opt,
                "opt_source": source,
                "file_index": index,
            })

    log.info("%d jobs over %d instances, config %s", len(jobs), len(instances), chash)
    if args.workers == 1:
        outputs = [_solve_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outputs = list(pool.map(_solve_job, jobs))

    with open(out / "records.jsonl", "w") as fh:
        for o in outputs:
            fh.write(json.dumps(o["record"], sort_keys=True) + "\n")
    for o in outputs:
        with open(out / "traces" / _trace_name(o["record"]), "w") as fh:
            for line in o["trace"]:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    with open(out / "timings.jsonl", "w") as fh:
        for o in outputs:
            fh.write(json.dumps(o["timing"]) + "\n")

    stats = [
        InstanceStats(
            f"{o['record']['instance']}#r{o['record']['replicate']}",
            o["record"]["best_accuracy"],
            o["record"]["avg_accuracy"],
            o["record"]["feasibility"],
            o["record"]["best_cost"],
            o["record"]["opt"],
        )
        for o in outputs
    ]
    summary = {
        "format_version": RESULT_FORMAT_VERSION,
        "config_hash": chash,
        "mode": args.mode,
        "config": asdict(cfg),
        "replicates": args.replicates,
        **summarize(stats),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for o in outputs:
        r = o["record"]
        acc = "n/a" if r["best_accuracy"] is None else f"{r['best_accuracy']:.2f}%"
        print(f"{r['instance']} r{r['replicate']}: best={r['best_cost']} accuracy={acc} feasible={r['feasibility']:.1f}%")
    return 0


def cmd_validate(args) -> int:
    names = [c.strip() for c in args.checks.split(",") if c.strip()]
    if not names:
        raise ConfigError("empty check selection")
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    ok = True
    for name in names:
        result = CHECKS[name]()
        print(result.line())
        ok &= result.passed
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def _write_instance(inst, out: Path, fmt: str) -> Path:
    if fmt == "json":
        path, text = out / f"{inst.name}.json", to_json(inst)
    elif isinstance(inst, QkpInstance):
        path, text = out / f"{inst.name}.txt", dump_qkp(inst)
    else:
        path, text = out / f"{inst.name}.txt", dump_mkp_orlib([inst])
    path.write_text(text)
    return path


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        for k in range(args.count):
            seed = args.seed + k
            if args.kind == "qkp":
                inst = generate_qkp(args.n, args.density, seed)
            else:
                inst = generate_mkp(args.n, args.m, seed, tightness=args.tightness)
            if args.with_opt:
                if inst.n > MAX_ENUM_VARS:
                    raise ConfigError(f"--with-opt needs n <= {MAX_ENUM_VARS}")
                inst = with_opt(inst, exhaustive_solve(to_problem(inst)).value)
            print(_write_instance(inst, out, args.format))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return 0


def cmd_oracle(args) -> int:
    try:
        instances = load_file(args.instance)
    except (OSError, ParseError) as exc:
        raise ConfigError(f"cannot read {args.instance}: {exc}") from None
    for inst in instances:
        try:
            sol = exhaustive_solve(to_problem(inst))
        except DimensionLimitError:
            print(f"error: {inst.name} has {inst.n} variables; the oracle enumerates at most {MAX_ENUM_VARS}", file=sys.stderr)
            return EXIT_USAGE
        print(json.dumps({
            "instance": inst.name,
            "opt": sol.value,
            "state": sol.state.tolist(),
            "n_optimal": sol.n_optimal,
        }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saim", description="Self-adaptive Ising machine for constrained binary problems")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run SAIM or the penalty baseline over instance files")
    solve.add_argument("--preset", choices=sorted(PRESETS))
    solve.add_argument("--mode", choices=["saim", "penalty"], default="saim")
    solve.add_argument("--instances", required=True, help="glob of instance files")
    solve.add_argument("--runs", type=int)
    solve.add_argument("--mcs", type=int, help="sweeps per annealing run")
    solve.add_argument("--beta-max", type=float)
    solve.add_argument("--eta", type=float)
    solve.add_argument("--alpha", type=float)
    solve.add_argument("--penalty", type=float, help="explicit P, overrides alpha*d*N")
    solve.add_argument("--seed", type=int)
    solve.add_argument("--replicates", type=int, default=1)
    solve.add_argument("--workers", type=int, default=1)
    solve.add_argument("--out", required=True)
    solve.set_defaults(func=cmd_solve)

    validate = sub.add_parser("validate", help="run sampler and compilation self-checks")
    validate.add_argument("--checks", default=",".join(CHECKS))
    validate.set_defaults(func=cmd_validate)

    gen = sub.add_parser("generate", help="write random QKP/MKP instances")
    gen.add_argument("--kind", choices=["qkp", "mkp"], default="qkp")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--m", type=int, default=5)
    gen.add_argument("--tightness", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--format", choices=["json", "native"], default="json")
    gen.add_argument("--with-opt", action="store_true", help="store the exhaustive optimum (n <= 25)")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    oracle = sub.add_parser("oracle", help="exact optimum by enumeration")
    oracle.add_argument("instance")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

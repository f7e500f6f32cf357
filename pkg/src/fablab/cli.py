"""Command-line entry point: ``fablab verify-priors | fit | lab {dominance,selection}``.

Exit codes: 0 success, 1 user or validation error, 2 budget/resource error.
Every output file is written to a temporary sibling and renamed into place,
so a failed command never leaves partial output.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from . import lab
from .gmm_fab import FabConfig, fab_fit, model_to_json
from .partitions import BudgetExceeded
from .priors import PriorSpec
from .verify import normalizer_table, run_prior_identities

EXIT_OK, EXIT_USER, EXIT_BUDGET = 0, 1, 2
VERIFY_N_MAX = 8


class UserError(Exception):
    """Bad input from the user; maps to exit code 1."""


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv_matrix(path: str, header: bool = False) -> np.ndarray:
    """Parse a numeric CSV; errors name the 1-based row and column."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        for rownum, row in enumerate(reader, start=1):
            if header and rownum == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for colnum, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise UserError(f"{path}: row {rownum}, column {colnum}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise UserError(f"{path}: row {rownum}, column {colnum}: non-finite value {cell!r}")
                vals.append(v)
            if rows and len(vals) != len(rows[0]):
                raise UserError(f"{path}: row {rownum}: expected {len(rows[0])} columns, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise UserError(f"{path}: no data rows")
    return np.array(rows)


# ---------------------------------------------------------------- run config

_GEN_KEYS = {f.name for f in fields(lab.GenConfig)}
_FAB_KEYS = {f.name for f in fields(FabConfig)} - {"d", "seed"}
_TOP_KEYS = {"gen", "fab", "priors", "d_grid", "seeds", "replications", "k_max", "var_floor", "output", "max_workers"}


@dataclass
class RunConfig:
    gen: lab.GenConfig
    fab: FabConfig | None = None
    priors: list[PriorSpec] | None = None
    d_grid: list[float] | None = None
    seeds: list[int] | None = None
    replications: list[int] | None = None
    k_max: int | None = None
    var_floor: float | None = None
    output: str | None = None
    max_workers: int | None = None


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise UserError(f"{where}: expected a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise UserError(f"{where}: unknown key {unknown[0]!r}")


def _require(doc, key, what):
    if key not in doc:
        raise UserError(f"config: missing required key {key!r} for {what}")
    return doc[key]


def _list_of(doc, key, kind, what):
    val = _require(doc, key, what)
    if not isinstance(val, list) or not val:
        raise UserError(f"config: {key!r} must be a non-empty list")
    try:
        return [kind(v) for v in val]
    except (TypeError, ValueError):
        raise UserError(f"config: {key!r} has a non-{kind.__name__} entry") from None


def _prior_from_doc(doc, i) -> PriorSpec:
    _reject_unknown(doc, {"kind", "dc", "d"}, f"priors[{i}]")
    kind = doc.get("kind")
    try:
        if kind == "FIC":
            # dominance recomputes dc per replication; a placeholder keeps the spec valid
            return PriorSpec.fic(doc.get("dc", 2.0))
        return PriorSpec(kind, dc=doc.get("dc"), d=doc.get("d"))
    except (TypeError, ValueError) as exc:
        raise UserError(f"priors[{i}]: {exc}") from None


def parse_run_config(doc: dict, mode: str) -> RunConfig:
    """Validate a run-config document for ``mode`` in {"dominance", "selection"}."""
    _reject_unknown(doc, _TOP_KEYS, "config")
    gen_doc = _require(doc, "gen", mode)
    _reject_unknown(gen_doc, _GEN_KEYS, "gen")
    try:
        gen = lab.GenConfig(**gen_doc)
    except (TypeError, ValueError) as exc:
        raise UserError(f"gen: {exc}") from None
    cfg = RunConfig(gen=gen, output=doc.get("output"), var_floor=doc.get("var_floor"))
    if mode == "dominance":
        priors = _require(doc, "priors", mode)
        if not isinstance(priors, list) or not priors:
            raise UserError("config: 'priors' must be a non-empty list")
        cfg.priors = [_prior_from_doc(p, i) for i, p in enumerate(priors)]
        cfg.replications = _list_of(doc, "replications", int, mode)
        cfg.k_max = int(doc.get("k_max", gen.n))
        if any(r < 1 for r in cfg.replications):
            raise UserError("config: 'replications' must be positive")
    else:
        fab_doc = _require(doc, "fab", mode)
        _reject_unknown(fab_doc, _FAB_KEYS, "fab")
        try:
            cfg.fab = FabConfig(**fab_doc)
        except (TypeError, ValueError) as exc:
            raise UserError(f"fab: {exc}") from None
        cfg.d_grid = _list_of(doc, "d_grid", float, mode)
        cfg.seeds = _list_of(doc, "seeds", int, mode)
        cfg.max_workers = doc.get("max_workers")
    return cfg


def load_run_config(path: str, mode: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UserError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UserError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_run_config(doc, mode)


# ---------------------------------------------------------------- commands


def cmd_verify_priors(args) -> int:
    if args.n_max > VERIFY_N_MAX or args.n_max < 1 or args.k_max < 1:
        total = args.k_max ** args.n_max
        print(
            f"budget: verify-priors supports 1 <= n_max <= {VERIFY_N_MAX} "
            f"(n_max={args.n_max}, k_max={args.k_max} means {total} assignments per size)",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    results = run_prior_identities(args.n_max, args.k_max, budget=args.budget)
    print(f"{'identity':<24} {'instances':>10} {'max_abs_dev':>12} {'tol':>8}  status")
    ok = True
    for r in results:
        status = "info" if r.tol is None else ("PASS" if r.passed else "FAIL")
        tol = "-" if r.tol is None else f"{r.tol:.0e}"
        print(f"{r.name:<24} {r.instances:>10} {r.max_abs_dev:>12.3e} {tol:>8}  {status}")
        if r.tol is not None and not r.passed:
            ok = False
    print()
    print("fixed-K normalizer Z_K: sum over ordered count tuples vs sum over set partitions")
    print(f"{'n':>3} {'k':>3} {'compositions':>24} {'partitions':>24}")
    for n, k, comp, part in normalizer_table(args.n_max, args.k_max, budget=args.budget):
        print(f"{n:>3} {k:>3} {str(comp):>24} {str(part):>24}")
    return EXIT_OK if ok else EXIT_USER


def cmd_fit(args) -> int:
    x = read_csv_matrix(args.data, header=args.header)
    try:
        cfg = FabConfig(
            k_init=args.k_init,
            d=args.d,
            max_iters=args.max_iters,
            rel_tol=args.rel_tol,
            var_floor=args.var_floor,
            prune_threshold=args.prune_threshold,
            seed=args.seed,
            init=args.init,
        )
        if cfg.k_init > x.shape[0]:
            raise ValueError(f"--k-init {cfg.k_init} exceeds the {x.shape[0]} rows")
    except ValueError as exc:
        raise UserError(str(exc)) from None
    model, trace = fab_fit(x, cfg)
    atomic_write(args.out, model_to_json(model, cfg, trace))
    state = "converged" if trace.converged else "max_iters reached"
    print(f"k={model.k} objective={trace.final_objective!r} iterations={trace.iterations} ({state})")
    return EXIT_OK


def cmd_lab(args) -> int:
    cfg = load_run_config(args.config, args.experiment)
    out = args.out or cfg.output
    if not out:
        raise UserError("no output path: pass --out or set 'output' in the config")
    if args.experiment == "dominance":
        x, _ = lab.generate_gmm_data(cfg.gen)
        rows = lab.dominance_curve(x, cfg.replications, cfg.priors, cfg.k_max, var_floor=cfg.var_floor)
        atomic_write(out, lab.dominance_csv(rows))
        print(f"dominance: {len(rows)} rows ({len(cfg.replications)} replications x {len(cfg.priors)} priors) -> {out}")
    else:
        fab = cfg.fab
        rows = lab.selection_sweep(cfg.gen, cfg.d_grid, cfg.seeds, fab, max_workers=cfg.max_workers)
        atomic_write(out, lab.selection_csv(rows))
        errors = sum(r.status.startswith("error") for r in rows)
        means = ", ".join(f"d={d:g}: {m:.2f}" for d, m in lab.mean_selected_k(rows).items())
        print(f"selection: {len(rows)} rows, {errors} errors, mean selected k [{means}] -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fablab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-priors", help="check the CRP/FIC/GFIC identities exhaustively")
    v.add_argument("--n-max", type=int, default=7)
    v.add_argument("--k-max", type=int, default=4)
    v.add_argument("--budget", type=int, default=None, help="enumeration budget (default: $FABLAB_BUDGET or 1e7)")
    v.set_defaults(func=cmd_verify_priors)

    f = sub.add_parser("fit", help="fit a diagonal GMM by FAB-EM")
    f.add_argument("data", help="CSV file, one observation per row")
    f.add_argument("--k-init", type=int, required=True)
    f.add_argument("--d", type=float, default=0.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--max-iters", type=int, default=500)
    f.add_argument("--rel-tol", type=float, default=1e-6)
    f.add_argument("--var-floor", type=float, default=None)
    f.add_argument("--prune-threshold", type=float, default=None)
    f.add_argument("--init", default="random-responsibilities")
    f.add_argument("--header", action="store_true", help="skip the first CSV row")
    f.set_defaults(func=cmd_fit)

    lp = sub.add_parser("lab", help="run an experiment suite")
    lp.add_argument("experiment", choices=("dominance", "selection"))
    lp.add_argument("config", help="JSON run config")
    lp.add_argument("--out", default=None)
    lp.set_defaults(func=cmd_lab)
    return p



def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; the contract reserves 2 for budget errors
        return EXIT_OK if exc.code == 0 else EXIT_USER
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except BudgetExceeded as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MemoryError:
        print("budget: out of memory", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())

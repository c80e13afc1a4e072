"""Command-line entry point.

Subcommands: split, train, evaluate, analyze-balance, analyze-bias, analyze-iv.
Settings resolve as flags > ``--config`` file > built-in defaults; config
files hold ``key = value`` lines named like the long flags (``max-shot = 4``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .evaluation import evaluate
from .interactions import (chronological_split, load_interactions, load_split, save_split,
                           synthetic_powerlaw)
from .model import load_checkpoint, save_checkpoint
from .samplers import KINDS, SamplerConfig
from .trainer import TrainingConfig, norm_report, train
from .weights import DegreeWeights

DEFAULTS = {
    "sampler": "vins", "beta": 0.5, "kappa": 64, "max_shot": 4, "margin": 1.0,
    "dns_candidates": 10, "dim": 64, "lr": 1e-3, "lambda_": 1e-3, "epochs": 50,
    "seed": 0, "eval_every": 10, "init_scale": 0.1, "threads": 1,
    "holdout": 0.2, "min_degree": 10,
}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key = key.strip().lstrip("-").replace("-", "_")
        if key == "lambda":
            key = "lambda_"
        out[key] = value.strip()
    return out


def parse_synthetic(spec: str) -> dict:
    """``users=U items=I edges=E alpha=A [communities=C] [seed=S]``."""
    known = {"users": int, "items": int, "edges": int, "alpha": float,
             "communities": int, "affinity": float, "seed": int}
    out = {}
    for tok in spec.replace(",", " ").split():
        key, sep, value = tok.partition("=")
        if not sep or key not in known:
            raise UsageError(f"bad synthetic spec token {tok!r}")
        out[key] = known[key](value)
    missing = {"users", "items", "edges"} - out.keys()
    if missing:
        raise UsageError(f"synthetic spec missing {sorted(missing)}")
    return out


def synthetic_graph(spec: str):
    s = parse_synthetic(spec)
    return synthetic_powerlaw(s["users"], s["items"], s["edges"], s.get("alpha", 1.0),
                              n_communities=s.get("communities", 8),
                              affinity=s.get("affinity", 0.8), seed=s.get("seed", 0))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vins", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value file")
        sp.add_argument("--out", default="run", help="output directory")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("split", help="filter and chronologically split interactions")
    common(sp)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--input", help="user<TAB>item<TAB>timestamp file")
    src.add_argument("--synthetic", help="users=U items=I edges=E alpha=A")
    sp.add_argument("--min-degree", type=int)
    sp.add_argument("--holdout", type=float)

    def model_flags(sp):
        sp.add_argument("--data", help="directory written by `split`")
        sp.add_argument("--n", type=int, action="append", dest="cutoffs", help="top-N cutoff (repeatable)")
        sp.add_argument("--threads", type=int)

    sp = sub.add_parser("train", help="train matrix factorization with a negative sampler")
    common(sp)
    model_flags(sp)
    sp.add_argument("--sampler", choices=KINDS)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--kappa", type=int)
    sp.add_argument("--max-shot", type=int)
    sp.add_argument("--margin", type=float)
    sp.add_argument("--dns-candidates", type=int)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--lambda", type=float, dest="lambda_")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--eval-every", type=int)
    sp.add_argument("--init-scale", type=float)

    sp = sub.add_parser("evaluate", help="top-N metrics for a checkpoint")
    common(sp)
    model_flags(sp)
    sp.add_argument("--checkpoint", help="model checkpoint file")

    sp = sub.add_parser("analyze-balance", help="detailed balance of the reject kernel")
    common(sp)
    sp.add_argument("--items", type=int, help="number of items with random degrees")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--max-degree", type=int)

    sp = sub.add_parser("analyze-bias", help="bias of the one-draw rank estimate")
    common(sp)
    sp.add_argument("--zw", type=float, help="normalizer Z_w")
    sp.add_argument("--points", type=int)
    sp.add_argument("--samples", type=int, help="Monte Carlo draws per point (0 = closed form only)")

    sp = sub.add_parser("analyze-iv", help="max/min imbalance value against beta")
    common(sp)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--data", help="directory written by `split` (train graph is used)")
    src.add_argument("--input", help="interaction file")
    src.add_argument("--synthetic")
    sp.add_argument("--min-degree", type=int)
    sp.add_argument("--beta", type=float, action="append", dest="betas")
    return p


CMD_DEFAULTS = {
    "analyze-balance": {"items": 10, "trials": 1_000_000, "beta": 1.0, "max_degree": 100, "seed": 0},
    "analyze-bias": {"zw": 1000.0, "points": 1000, "samples": 0, "seed": 0},
}


def resolve(argv) -> argparse.Namespace:
    """Parse flags and fill unset values from the config file, then defaults."""
    args = build_parser().parse_args(argv)
    # first layer to supply a value wins
    layers = [read_config(args.config)] if args.config else []
    layers += [CMD_DEFAULTS.get(args.command, {}), DEFAULTS]
    for layer in layers:
        for key, value in layer.items():
            current = getattr(args, key, None)
            if current is None or key not in vars(args):
                setattr(args, key, value)
    return _coerce(args)


_TYPES = {"beta": float, "kappa": int, "max_shot": int, "margin": float, "dns_candidates": int,
          "dim": int, "lr": float, "lambda_": float, "epochs": int, "seed": int, "eval_every": int,
          "init_scale": float, "threads": int, "holdout": float, "min_degree": int, "items": int,
          "trials": int, "max_degree": int, "zw": float, "points": int, "samples": int}


def _coerce(args):
    # config-file values arrive as strings
    for key, typ in _TYPES.items():
        v = getattr(args, key, None)
        if isinstance(v, str):
            try:
                setattr(args, key, typ(v))
            except ValueError:
                raise UsageError(f"bad value for {key}: {v!r}") from None
    for key in ("cutoffs", "betas"):
        v = getattr(args, key, None)
        if isinstance(v, str):
            setattr(args, key, [float(x) if key == "betas" else int(x)
                                for x in v.replace(",", " ").split()])
    return args


def _out(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_split(args):
    if args.synthetic:
        graph = synthetic_graph(args.synthetic)
    elif args.input:
        graph = load_interactions(args.input, args.min_degree)
    else:
        raise UsageError("split needs --input or --synthetic")
    tr, te = chronological_split(graph, args.holdout)
    out = _out(args)
    save_split(tr, te, out)
    print(f"split: {graph.n_users} users, {graph.n_items} items, "
          f"{tr.edge_count} train / {te.edge_count} test edges -> {out}")


def _data(args):
    if not args.data:
        raise UsageError("--data is required")
    if not Path(args.data).is_dir():
        raise UsageError(f"data directory {args.data} not found")
    return load_split(args.data)


def training_config(args) -> TrainingConfig:
    sc = SamplerConfig(kind=args.sampler, beta=args.beta, kappa=args.kappa, max_shot=args.max_shot,
                       margin=args.margin, dns_candidates=args.dns_candidates)
    return TrainingConfig(epochs=args.epochs, learning_rate=args.lr, lambda_reg=args.lambda_,
                          dim=args.dim, seed=args.seed, sampler=sc, eval_every=args.eval_every,
                          init_scale=args.init_scale)


def cmd_train(args):
    tr, te = _data(args)
    try:
        cfg = training_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out(args)
    cutoffs = args.cutoffs or [10]

    def report(epoch, params, st):
        print(f"epoch {epoch:3d} loss {st.mean_loss:.5f} steps {st.mean_steps:.2f}±{st.std_steps:.2f} "
              f"violated {st.violated_fraction:.3f}")

    settings = {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "verbose")}
    settings["data"] = str(Path(args.data).resolve())
    (out / "run.json").write_text(json.dumps(settings, indent=1) + "\n")
    params, history, counters = train(tr, cfg, test_graph=te, cutoffs=cutoffs, out_dir=out, callback=report)
    save_checkpoint(params, out / "model.txt")
    table, rho = norm_report(params, tr)
    with open(out / "norms.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["item", "degree", "norm"])
        for i, (d, n) in enumerate(table):
            wr.writerow([i, int(d), f"{n:.10g}"])
    print(f"train: checkpoint {out / 'model.txt'}; spearman(degree, norm) = {rho:.4f}")


def cmd_evaluate(args):
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint {args.checkpoint} not found")
    if not args.data:
        # fall back to the data directory recorded by `train` next to the checkpoint
        run_file = Path(args.checkpoint).parent / "run.json"
        if run_file.is_file():
            args.data = json.loads(run_file.read_text()).get("data")
    tr, te = _data(args)
    params = load_checkpoint(args.checkpoint)
    if params.n_users != tr.n_users or params.n_items != tr.n_items:
        raise UsageError("checkpoint shape does not match the data")
    out = _out(args)
    with open(out / "metrics.jsonl", "a") as fh:
        for n in args.cutoffs or [10]:
            m = evaluate(params, tr, te, n, threads=args.threads)
            line = json.dumps({"epoch": None, **m.as_json()})
            fh.write(line + "\n")
            print(line)


def cmd_balance(args):
    if args.items < 2:
        raise UsageError("--items must be >= 2")
    rng = np.random.default_rng(args.seed)
    deg = rng.integers(1, args.max_degree + 1, size=args.items).astype(float)
    w = DegreeWeights.from_pi(deg ** args.beta, args.beta)
    try:
        rep = analysis.verify_detailed_balance(w, args.trials, rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out(args)
    with open(out / "balance.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n_items", "trials", "max_abs_flux_gap", "analytic_gap"])
        wr.writerow([rep.n_items, rep.trials, f"{rep.max_abs_flux_gap:.6g}", f"{rep.analytic_gap:.6g}"])
    print(f"balance: {rep.n_items} items, {rep.trials} trials/state, "
          f"max flux gap {rep.max_abs_flux_gap:.3g} (analytic {rep.analytic_gap:g})")


def cmd_bias(args):
    if args.zw < 1 or args.points < 1:
        raise UsageError("--zw and --points must be >= 1")
    rng = np.random.default_rng(args.seed)
    ranks = np.linspace(1, args.zw, args.points)
    out = _out(args)
    with open(out / "bias.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["r", "expected_estimate", "psi_ratio", "monte_carlo"])
        for pt in analysis.bias_curve(args.zw, ranks):
            mc = (analysis.rank_bias_expectation(pt.r, args.zw, "monte_carlo", args.samples, rng)
                  if args.samples else "")
            wr.writerow([f"{pt.r:.10g}", f"{pt.expected_estimate:.10g}", f"{pt.psi_ratio:.10g}",
                         f"{mc:.10g}" if mc != "" else ""])
    print(f"bias: {args.points} points over r in [1, {args.zw:g}] -> {out / 'bias.csv'}")


def cmd_iv(args):
    if args.data:
        graph, _ = load_split(args.data)
    elif args.input:
        graph = load_interactions(args.input, args.min_degree)
    elif args.synthetic:
        graph = synthetic_graph(args.synthetic)
    else:
        raise UsageError("analyze-iv needs --data, --input or --synthetic")
    betas = args.betas or [0.0, 0.25, 0.5, 0.75, 1.0]
    out = _out(args)
    with open(out / "iv.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["beta", "max_iv", "min_iv", "max_iv_item", "min_iv_item"])
        for beta, hi, lo, ih, il in analysis.iv_curve(graph, betas):
            wr.writerow([beta, f"{hi:.10g}", f"{lo:.10g}", ih, il])
            print(f"beta {beta:.2f}: max IV {hi:.4g} (item {ih}), min IV {lo:.4g} (item {il})")


COMMANDS = {"split": cmd_split, "train": cmd_train, "evaluate": cmd_evaluate,
            "analyze-balance": cmd_balance, "analyze-bias": cmd_bias, "analyze-iv": cmd_iv}


def run(argv=None) -> int:
    try:
        args = resolve(sys.argv[1:] if argv is None else argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vins: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"vins: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())

"""Command-line entry points for training, evaluation, and experiments.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import List, Optional

import numpy as np

from .config import (ConfigError, EXTRA_REWARD_MODES, FullConfig,
                     REWARD_KINDS, load_config)
from .metrics import (Discretizer, activation_stats, build_validation_set,
                      decompose_loss, entropy_metrics, evaluate_on_set,
                      load_validation_set, participation_stats, round_robin,
                      save_validation_set, total_activation)
from .trainer import load_world_model_params, run_training
from .trajlog import export_csv, read_trajectory
from .world_model import WorldModel

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def _build_parser() -> _Parser:
    p = _Parser(prog="playroom",
                description="Curious-infant playroom training and evaluation")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training run")
    t.add_argument("--config", help="YAML config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--reward", choices=REWARD_KINDS + EXTRA_REWARD_MODES)
    t.add_argument("--contingency-p", type=float, dest="contingency_p")
    t.add_argument("--episodes", type=int)
    t.add_argument("--out")
    t.add_argument("--progress", action="store_true",
                   help="print per-episode progress lines")

    for name, hlp in (("eval-entropy", "behavior entropy over a log"),
                      ("eval-activations", "branch activation/participation")):
        e = sub.add_parser(name, help=hlp)
        e.add_argument("--traj", required=True, help="episodes.traj path")
        e.add_argument("--config", help="YAML config file")
        e.add_argument("--window", type=int, default=0,
                       help="episodes per row (0: one row over the whole log)")
        e.add_argument("--out", help="CSV output path (default: stdout)")

    v = sub.add_parser("build-valset", help="sample a validation set")
    v.add_argument("--traj", required=True)
    v.add_argument("--out", required=True, help="output .npz path")
    v.add_argument("--config")
    v.add_argument("--segments", type=int, default=2000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--label", default="")

    r = sub.add_parser("round-robin", help="loss matrix of models x sets")
    r.add_argument("--checkpoint", action="append", required=True)
    r.add_argument("--valset", action="append", required=True)
    r.add_argument("--config")
    r.add_argument("--out", help="CSV output path (default: stdout)")

    d = sub.add_parser("decompose", help="per-component loss on a set")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--valset", required=True)
    d.add_argument("--config")
    d.add_argument("--out", help="CSV output path (default: stdout)")

    e1 = sub.add_parser("exp1", help="reward-kind comparison experiment")
    e1.add_argument("--out", required=True)
    e1.add_argument("--config")
    e1.add_argument("--episodes", type=int)
    e1.add_argument("--seeds", type=int, nargs="+", default=[0])
    e1.add_argument("--kinds", nargs="+")
    e1.add_argument("--segments", type=int, default=2000)

    e2 = sub.add_parser("exp2", help="contingency-level experiment")
    e2.add_argument("--out", required=True)
    e2.add_argument("--config")
    e2.add_argument("--episodes", type=int)
    e2.add_argument("--seeds", type=int, nargs="+", default=[0])
    e2.add_argument("--p-levels", type=float, nargs="+", dest="p_levels")
    e2.add_argument("--segments", type=int, default=2000)

    x = sub.add_parser("export-csv", help="lossless per-tick CSV of a log")
    x.add_argument("--traj", required=True)
    x.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="SVG chart from a CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--kind", choices=("line", "bar"), default="line")
    pl.add_argument("--x", help="x column (line) or label column (bar)")
    pl.add_argument("--y", nargs="+", required=True, help="value columns")
    pl.add_argument("--title")
    return p


def _load_cfg(args) -> FullConfig:
    overrides = {}
    for attr, key in (("seed", "run.seed"), ("reward", "run.reward"),
                      ("contingency_p", "run.contingency_p"),
                      ("episodes", "run.episodes"), ("out", "run.out_dir")):
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = val
    return load_config(getattr(args, "config", None), overrides)


def _emit_rows(rows: List[dict], out: Optional[str]) -> None:
    if not rows:
        return
    cols = list(rows[0].keys())
    f = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(f)
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{row[c]:.6g}" if isinstance(row[c], float)
                        else row[c] for c in cols])
    finally:
        if out:
            f.close()


def _windows(episodes, window: int):
    if window <= 0:
        yield episodes
        return
    for lo in range(0, len(episodes), window):
        chunk = episodes[lo:lo + window]
        if chunk:
            yield chunk


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    summary = run_training(cfg, progress=args.progress)
    print(f"run complete: {summary['episodes']} episodes, "
          f"{summary['env_steps']} env steps, out={summary['out_dir']}")
    return 0


def _cmd_eval_entropy(args) -> int:
    cfg = _load_cfg(args)
    episodes = read_trajectory(args.traj)
    disc = Discretizer(cfg.sim)
    rows = []
    for chunk in _windows(episodes, args.window):
        row = {"first_episode": chunk[0].episode_index,
               "episodes": len(chunk)}
        row.update(entropy_metrics(chunk, disc))
        rows.append(row)
    _emit_rows(rows, args.out)
    return 0


def _cmd_eval_activations(args) -> int:
    episodes = read_trajectory(args.traj)
    rows = []
    for chunk in _windows(episodes, args.window):
        row = {"first_episode": chunk[0].episode_index,
               "episodes": len(chunk)}
        row.update(activation_stats(chunk))
        row["act.total"] = total_activation(chunk)
        row.update(participation_stats(chunk))
        rows.append(row)
    _emit_rows(rows, args.out)
    return 0


def _cmd_build_valset(args) -> int:
    cfg = _load_cfg(args)
    episodes = read_trajectory(args.traj)
    vs = build_validation_set(
        episodes, cfg.world_model, np.random.default_rng(args.seed),
        n_segments=args.segments,
        provenance={"label": args.label, "source": args.traj,
                    "seed": args.seed})
    save_validation_set(args.out, vs)
    print(f"wrote {args.segments} segments to {args.out}")
    return 0


def _cmd_round_robin(args) -> int:
    cfg = _load_cfg(args)
    wm = WorldModel(cfg.world_model, np.random.default_rng(0))
    models = [(ck, load_world_model_params(ck)) for ck in args.checkpoint]
    sets = [(vs, load_validation_set(vs)) for vs in args.valset]
    rr = round_robin(wm, models, sets)
    rows = []
    for i, name in enumerate(rr["models"]):
        row = {"model": name}
        row.update({s: float(rr["matrix"][i, j])
                    for j, s in enumerate(rr["sets"])})
        rows.append(row)
    _emit_rows(rows, args.out)
    return 0


def _cmd_decompose(args) -> int:
    cfg = _load_cfg(args)
    wm = WorldModel(cfg.world_model, np.random.default_rng(0))
    params = load_world_model_params(args.checkpoint)
    vs = load_validation_set(args.valset)
    total, per_dim = evaluate_on_set(wm, vs, params=params)
    rows = [{"group": g, "loss": v}
            for g, v in decompose_loss(per_dim).items()]
    rows.append({"group": "mean_total_per_segment", "loss": total})
    _emit_rows(rows, args.out)
    return 0


def _cmd_exp1(args) -> int:
    from .experiments import EXP1_KINDS, run_experiment1
    cfg = _load_cfg(args)
    out = run_experiment1(cfg, args.out, kinds=tuple(args.kinds or EXP1_KINDS),
                          seeds=tuple(args.seeds),
                          valset_segments=args.segments)
    print(f"summary: {out['summary_csv']}\nmatrix: {out['matrix_csv']}")
    return 0


def _cmd_exp2(args) -> int:
    from .experiments import EXP2_P_LEVELS, run_experiment2
    cfg = _load_cfg(args)
    out = run_experiment2(cfg, args.out,
                          p_levels=tuple(args.p_levels or EXP2_P_LEVELS),
                          seeds=tuple(args.seeds),
                          valset_segments=args.segments)
    print(f"decomposition: {out['decomposition_csv']}")
    return 0


def _cmd_export_csv(args) -> int:
    n = export_csv(args.traj, args.out)
    print(f"wrote {n} rows to {args.out}")
    return 0


def _cmd_plot(args) -> int:
    from .plots import bar_chart, line_chart
    if args.kind == "line":
        if not args.x:
            print("error: --x is required for line charts", file=sys.stderr)
            return USAGE_EXIT
        line_chart(args.csv, args.x, args.y, args.out, title=args.title)
    else:
        if not args.x:
            print("error: --x (label column) is required for bar charts",
                  file=sys.stderr)
            return USAGE_EXIT
        bar_chart(args.csv, args.x, args.y, args.out, title=args.title)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval-entropy": _cmd_eval_entropy,
    "eval-activations": _cmd_eval_activations,
    "build-valset": _cmd_build_valset,
    "round-robin": _cmd_round_robin,
    "decompose": _cmd_decompose,
    "exp1": _cmd_exp1,
    "exp2": _cmd_exp2,
    "export-csv": _cmd_export_csv,
    "plot": _cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())

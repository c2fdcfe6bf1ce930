"""Command-line interface.

Exit codes: 0 on success, 1 for usage errors (bad flags or flag
combinations), 2 for failures while running (I/O, parse errors,
divergence).
"""

import argparse
import csv
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__, bench, dataio
from .kernels import AllSubsetsModel, FmModel, HofmModel, predict_batch
from .metrics import count_used, rmse, roc_auc, support_report
from .optim import TrainConfig, train
from .optim.train import resolve_config, select_epoch
from .penalty import Kind, RegularizerSpec
from .synthdata import SyntheticSpec, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

REG_NAMES = {"l2": Kind.L2SQ, "l1": Kind.L1, "l21": Kind.L21, "ti": Kind.TI, "cs": Kind.CS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_csv(path, rows, header):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _append_csv(path, rows, header):
    new = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore")
        if new:
            writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _manifest(args, command, out_dir, artifacts, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    man = {
        "command": command,
        "argv": ["sparsefm", command] + _argv_echo(args),
        "config": config,
        "artifacts": sorted(artifacts),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        man.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


def _argv_echo(args):
    out = []
    for k, v in sorted(vars(args).items()):
        if k in ("func", "command") or v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            out.append(flag)
        elif isinstance(v, list):
            out += [flag, ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)]
        else:
            out += [flag, repr(v) if isinstance(v, float) else str(v)]
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_gen(args):
    try:
        spec = SyntheticSpec(args.d_true, args.blocks, args.d_noise, args.n, args.corr, args.noise_std, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    task = generate(spec)
    dataio.save_libsvm(task.X, task.y, os.path.join(args.out, "data.libsvm"))
    dataio.save_dense_matrix(task.W_true, os.path.join(args.out, "w_true.txt"))
    _manifest(args, "gen", args.out, ["data.libsvm", "w_true.txt", "manifest.json"])
    print(f"wrote {spec.n_samples} x {spec.d} dataset to {args.out}")


def _train_config(args):
    kind = REG_NAMES[args.reg]
    spec = RegularizerSpec(kind, args.lw, args.lp, args.lpt)
    cfg = TrainConfig(loss=args.loss, spec=spec, k=args.k, max_epochs=args.epochs, tol=args.tol,
                      seed=args.seed, fit_linear=not args.no_linear, fit_bias=not args.no_bias,
                      time_budget=args.time_budget, order=args.order, init_std=args.init_std,
                      solver=args.solver, eta0=args.eta0, batch_size=args.batch_size)
    cfg = resolve_config(args.model_kind, cfg)
    select_epoch(args.model_kind, cfg)
    return cfg


def cmd_train(args):
    try:
        cfg = _train_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    X, y = dataio.load_libsvm(args.data, args.n_features)
    if args.loss == "logistic":
        y = dataio.classification_labels(y)
    if args.model_kind == "hofm" and not 2 <= args.order <= X.n_cols:
        raise UsageError(f"--order must satisfy 2 <= M <= d={X.n_cols}")
    os.makedirs(args.out, exist_ok=True)
    model, history = train(args.model_kind, X, y, cfg)
    hyper = {"model_kind": args.model_kind, "reg": args.reg, "kind": cfg.spec.kind.value, "loss": args.loss,
             "k": args.k, "order": args.order, "lambda_w": args.lw, "lambda_p": args.lp,
             "lambda_tilde": args.lpt, "tol": args.tol, "max_epochs": args.epochs, "seed": args.seed,
             "solver": args.solver}
    dataio.save_model(model, os.path.join(args.out, "model.json"), hyper)
    _write_csv(os.path.join(args.out, "history.csv"),
               [{"epoch": e, "objective": o, "seconds": s} for e, o, s in history],
               ["epoch", "objective", "seconds"])
    _manifest(args, "train", args.out, ["model.json", "history.csv", "manifest.json"],
              {"epochs_run": history[-1][0], "train_seconds": history[-1][2]})
    print(f"trained {args.model_kind}/{cfg.spec.kind.value} for {history[-1][0]} epochs, "
          f"objective {history[-1][1]:.6g}")


def _load_for_model(path, model, n_features):
    d = model.n_features if n_features is None else n_features
    return dataio.load_libsvm(path, d)


def cmd_predict(args):
    model = dataio.load_model(args.model)
    X, _ = _load_for_model(args.data, model, None)
    f = predict_batch(model, X)
    with open(args.out, "w", encoding="utf-8") as fh:
        for v in f:
            fh.write(repr(float(v)) + "\n")
    print(f"wrote {f.shape[0]} predictions to {args.out}")


def _factor(model):
    if isinstance(model, (FmModel, AllSubsetsModel)):
        return model.P
    if isinstance(model, HofmModel):
        return model.P_by_order[0]
    raise TypeError(type(model).__name__)


def cmd_eval(args):
    metrics = args.metrics or (["rmse", "counts"] + (["support"] if args.w_true else []))
    unknown = set(metrics) - {"rmse", "auc", "counts", "support"}
    if unknown:
        raise UsageError(f"unknown metrics: {', '.join(sorted(unknown))}")
    if "support" in metrics and not args.w_true:
        raise UsageError("metric 'support' needs --w-true")
    if ("rmse" in metrics or "auc" in metrics) and not args.data:
        raise UsageError("metrics 'rmse' and 'auc' need --data")
    model = dataio.load_model(args.model)
    out = {}
    if args.data:
        X, y = _load_for_model(args.data, model, None)
        f = predict_batch(model, X)
        if "rmse" in metrics:
            out["rmse"] = rmse(y, f)
        if "auc" in metrics:
            out["auc"] = roc_auc(dataio.classification_labels(y), f)
    P = _factor(model)
    if "counts" in metrics:
        n_int, n_feat = count_used(P)
        out["n_interactions"] = n_int
        out["n_features"] = n_feat
    if "support" in metrics:
        W = dataio.load_dense_matrix(args.w_true)
        if W.shape != (P.shape[0], P.shape[0]):
            raise ValueError(f"W_true is {W.shape} but the model has {P.shape[0]} features")
        rep = support_report(W, P)
        out.update(estimation_error=rep.estimation_error, f1=rep.f1, exact_recovery=rep.exact_recovery,
                   n_interactions=rep.n_pred_interactions, n_features=rep.n_pred_features)
    text = json.dumps(out, indent=1, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


RUN_HEADER = ["split", "setting", "n_samples", "dataset_seed", "method", "lam_p", "lam_tilde", "init_seed",
              "estimation_error", "f1", "exact_recovery", "n_interactions", "n_features", "epochs", "seconds"]
SUMMARY_HEADER = ["setting", "n_samples", "method", "selected_by", "lam_p", "lam_tilde", "runs",
                  "estimation_error", "f1", "exact_recovery", "n_interactions", "n_features", "seconds"]


def cmd_bench_recovery(args):
    methods = [m.upper() if m != "l2" else "FM" for m in args.reg_list]
    for m in methods:
        if m not in bench.METHOD_KINDS:
            raise UsageError(f"unknown method {m!r} in --reg-list")
    if args.n_datasets < 1 or args.n_val < 1 or args.seeds < 1:
        raise UsageError("--n-datasets, --n-val and --seeds must be positive")
    os.makedirs(args.out, exist_ok=True)
    runs_path = os.path.join(args.out, "runs.csv")
    if os.path.exists(runs_path):
        os.remove(runs_path)
    summary = []
    t0 = time.perf_counter()
    for n in args.n_list:
        res = bench.recovery_benchmark(
            args.setting, n, methods, n_val=args.n_val, val_seeds=args.val_seeds, n_test=args.n_datasets,
            n_seeds=args.seeds, lambda_grid=args.lambda_grid, fm_grid=args.fm_grid or bench.DEFAULT_FM_GRID,
            k=args.k, time_budget=args.time_budget, base_seed=args.seed, workers=args.workers,
            progress=lambda msg: print(f"[N={n}] {msg}", file=sys.stderr))
        _append_csv(runs_path, res.rows, RUN_HEADER)
        for r in res.summary:
            summary.append({"setting": args.setting, "n_samples": n, **r})
    _write_csv(os.path.join(args.out, "summary.csv"), summary, SUMMARY_HEADER)
    _manifest(args, "bench-recovery", args.out, ["runs.csv", "summary.csv", "manifest.json"],
              {"wall_seconds": time.perf_counter() - t0})
    for r in summary:
        print(f"N={r['n_samples']} {r['method']:>4} by {r['selected_by']:<16} "
              f"err={r['estimation_error']:.4f} f1={r['f1']:.4f} pssr={r['exact_recovery']:.3f}")


PROX_HEADER = ["d", "lam", "sigma", "algo", "trial", "seconds", "max_gap"]


def cmd_bench_prox(args):
    if args.trials < 0:
        raise UsageError("--trials must be non-negative")
    algos = ("sort", "rand") if args.algo == "both" else (args.algo,)
    os.makedirs(args.out, exist_ok=True)
    rows = bench.prox_timing(args.d_list, args.lambda_list, args.sigma_list, algos, args.trials, args.seed)
    _write_csv(os.path.join(args.out, "prox_timing.csv"), rows, PROX_HEADER)
    gaps = [r["max_gap"] for r in rows if "max_gap" in r]
    _manifest(args, "bench-prox", args.out, ["prox_timing.csv", "manifest.json"],
              {"max_gap": max(gaps) if gaps else None})
    for d in args.d_list:
        parts = []
        for a in algos:
            ts = [r["seconds"] for r in rows if r["d"] == d and r["algo"] == a]
            if ts:
                parts.append(f"{a}={np.mean(ts) * 1e6:.1f}us")
        if parts:
            print(f"d={d}: " + " ".join(parts))


SELECTION_HEADER = ["reg", "lam", "n_interactions", "n_features"]


def cmd_bench_selection(args):
    os.makedirs(args.out, exist_ok=True)
    rows = bench.prox_selection_curve(args.d, args.k, args.lambda_list, args.seed)
    _write_csv(os.path.join(args.out, "selection.csv"), rows, SELECTION_HEADER)
    _manifest(args, "bench-selection", args.out, ["selection.csv", "manifest.json"])
    for r in rows:
        print(f"{r['reg']:>4} lam={r['lam']:<10.6g} interactions={r['n_interactions']:<6} features={r['n_features']}")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="sparsefm", description="Sparse factorization machines.")
    p.add_argument("--version", action="version", version=f"sparsefm {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic support-recovery dataset")
    g.add_argument("--d-true", type=int, default=80)
    g.add_argument("--blocks", type=int, default=8)
    g.add_argument("--d-noise", type=int, default=20)
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--corr", type=float, default=0.2)
    g.add_argument("--noise-std", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model on a libsvm file")
    t.add_argument("--data", required=True)
    t.add_argument("--n-features", type=int)
    t.add_argument("--model-kind", choices=["fm", "hofm", "allsubsets"], default="fm")
    t.add_argument("--reg", choices=sorted(REG_NAMES), default="l2")
    t.add_argument("--loss", choices=["squared", "logistic"], default="squared")
    t.add_argument("--solver", choices=["cd", "sgd", "psgd"], default="cd")
    t.add_argument("--k", type=int, default=8)
    t.add_argument("--order", type=int, default=3, help="HOFM order M")
    t.add_argument("--lw", type=float, default=0.0, help="lambda_w")
    t.add_argument("--lp", type=float, default=0.0, help="lambda_p")
    t.add_argument("--lpt", type=float, default=0.0, help="sparsity strength lambda_tilde")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--tol", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--time-budget", type=float)
    t.add_argument("--init-std", type=float, default=0.01)
    t.add_argument("--eta0", type=float, default=0.01)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--no-linear", action="store_true")
    t.add_argument("--no-bias", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="write predictions of a saved model")
    pr.add_argument("--data", required=True)
    pr.add_argument("--model", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="evaluate a saved model")
    e.add_argument("--data")
    e.add_argument("--model", required=True)
    e.add_argument("--w-true")
    e.add_argument("--metrics", type=lambda s: [m for m in s.split(",") if m],
                   help="comma list of rmse, auc, counts, support")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench-recovery", help="synthetic support-recovery sweep")
    b.add_argument("--setting", choices=["interaction", "feature"], default="interaction")
    b.add_argument("--n-datasets", type=int, default=10, help="test datasets")
    b.add_argument("--n-val", type=int, default=5, help="validation datasets")
    b.add_argument("--val-seeds", type=int, default=1)
    b.add_argument("--n-list", type=_int_list, default=[200])
    b.add_argument("--seeds", type=int, default=10, help="initializations per test dataset")
    b.add_argument("--reg-list", type=lambda s: [m.strip().lower() for m in s.split(",") if m.strip()],
                   default=["ti", "cs", "l1", "l21", "fm"])
    b.add_argument("--lambda-grid", type=_float_list, default=list(bench.DEFAULT_LAMBDA_GRID))
    b.add_argument("--fm-grid", type=_float_list)
    b.add_argument("--k", type=int, default=30)
    b.add_argument("--time-budget", type=float, help="seconds per run (default N/50)")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench_recovery)

    x = sub.add_parser("bench-prox", help="time the sort and randomized squared-l1 proxes")
    x.add_argument("--d-list", type=_int_list, default=[2**e for e in range(3, 15)])
    x.add_argument("--lambda-list", type=_float_list, default=[1e-3, 1e-1, 1e1])
    x.add_argument("--sigma-list", type=_float_list, default=[1.0, 10.0])
    x.add_argument("--algo", choices=["sort", "rand", "both"], default="both")
    x.add_argument("--trials", type=int, default=100)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_bench_prox)

    s = sub.add_parser("bench-selection", help="used interactions/features after one prox step")
    s.add_argument("--d", type=int, default=200)
    s.add_argument("--k", type=int, default=30)
    s.add_argument("--lambda-list", type=_float_list, default=[2.0**e for e in range(-7, 8)])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_selection)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help / --version exit 0; parse errors already map to EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args.func(args)
    except UsageError as exc:
        print(f"sparsefm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, FloatingPointError, TypeError) as exc:
        print(f"sparsefm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

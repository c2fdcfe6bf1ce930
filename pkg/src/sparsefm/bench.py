"""Benchmark drivers: synthetic support recovery, the selection behaviour
of the proximal operators and proximal-operator timings.

Each driver returns plain lists of dicts (one per run) so that callers can
write CSVs or aggregate them again from disk.
"""

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import count_used, support_report
from .numcore import make_rng
from .optim import TrainConfig, train
from .penalty import Kind, RegularizerSpec
from .prox import prox_l1, prox_l21_rows, prox_sq_l1_columns, prox_sq_l1_rand, prox_sq_l1_sort, prox_sq_l21
from .synthdata import SyntheticSpec, generate

METHOD_KINDS = {"TI": Kind.TI, "CS": Kind.CS, "L1": Kind.L1, "L21": Kind.L21, "FM": Kind.L2SQ}

DEFAULT_LAMBDA_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2)
# the plain FM has only lambda_p, so it gets a finer grid
DEFAULT_FM_GRID = tuple(10.0 ** (-3 + i * 7 / 24) for i in range(25))

METRICS = ("estimation_error", "f1", "exact_recovery")
_LOWER_IS_BETTER = {"estimation_error": True, "f1": False, "exact_recovery": False}


def setting_spec(setting, n_samples, seed):
    if setting == "interaction":
        return SyntheticSpec.interaction_setting(n_samples, seed)
    if setting == "feature":
        return SyntheticSpec.feature_setting(n_samples, seed)
    raise ValueError(f"unknown setting {setting!r}; expected 'interaction' or 'feature'")


def fit_recovery(task, method, lam_p, lam_tilde, seed, k=30, time_budget=None, tol=1e-3,
                 max_epochs=100000):
    """Train one synthetic-benchmark model: squared loss, no linear term,
    no bias. Returns (P, n_epochs, seconds)."""
    kind = METHOD_KINDS[method]
    spec = RegularizerSpec(kind, 0.0, lam_p, 0.0 if kind is Kind.L2SQ else lam_tilde)
    cfg = TrainConfig(spec=spec, k=k, max_epochs=max_epochs, tol=tol, seed=seed, fit_linear=False,
                      fit_bias=False, time_budget=time_budget, record_objective=False)
    model, history = train("fm", task.X, task.y, cfg)
    return model.P, history[-1][0], history[-1][2]


@dataclass(frozen=True)
class _Cell:
    setting: str
    n_samples: int
    dataset_seed: int
    method: str
    lam_p: float
    lam_tilde: float
    init_seed: int
    k: int
    time_budget: float
    split: str


def _run_cell(cell):
    task = generate(setting_spec(cell.setting, cell.n_samples, cell.dataset_seed))
    P, n_epochs, seconds = fit_recovery(task, cell.method, cell.lam_p, cell.lam_tilde, cell.init_seed,
                                        k=cell.k, time_budget=cell.time_budget)
    rep = support_report(task.W_true, P)
    return {
        "split": cell.split, "setting": cell.setting, "n_samples": cell.n_samples,
        "dataset_seed": cell.dataset_seed, "method": cell.method, "lam_p": cell.lam_p,
        "lam_tilde": cell.lam_tilde, "init_seed": cell.init_seed,
        "estimation_error": rep.estimation_error, "f1": rep.f1,
        "exact_recovery": int(rep.exact_recovery), "n_interactions": rep.n_pred_interactions,
        "n_features": rep.n_pred_features, "epochs": n_epochs, "seconds": seconds,
    }


def _map(cells, workers):
    if workers <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells, chunksize=4))


def method_grid(method, lambda_grid, fm_grid):
    if method == "FM":
        return [(lp, 0.0) for lp in fm_grid]
    return list(itertools.product(lambda_grid, lambda_grid))


def select_hyperparameters(rows, metric):
    """Best (lam_p, lam_tilde) per method by the mean of ``metric``.

    Ties go to the first grid point in row order.
    """
    groups = {}
    for r in rows:
        groups.setdefault(r["method"], {}).setdefault((r["lam_p"], r["lam_tilde"]), []).append(r[metric])
    sign = 1.0 if _LOWER_IS_BETTER[metric] else -1.0
    best = {}
    for method, cells in groups.items():
        key = min(cells, key=lambda lam: sign * float(np.mean(cells[lam])))
        best[method] = key
    return best


def summarize(rows, selections):
    """Mean of every metric on the test rows at each method's per-metric
    selection. Returns one dict per (method, selected-by metric)."""
    out = []
    test = [r for r in rows if r["split"] == "test"]
    for metric, chosen in selections.items():
        for method, (lp, lt) in sorted(chosen.items()):
            sel = [r for r in test if r["method"] == method and r["lam_p"] == lp and r["lam_tilde"] == lt]
            if not sel:
                continue
            row = {"method": method, "selected_by": metric, "lam_p": lp, "lam_tilde": lt, "runs": len(sel)}
            for m in METRICS + ("n_interactions", "n_features", "seconds"):
                row[m] = float(np.mean([r[m] for r in sel]))
            out.append(row)
    return out


@dataclass
class RecoveryResult:
    rows: list = field(default_factory=list)
    selections: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)

    def score(self, method, metric):
        """Test mean of ``metric`` at the hyperparameters tuned for it."""
        for r in self.summary:
            if r["method"] == method and r["selected_by"] == metric:
                return r[metric]
        raise KeyError((method, metric))


def recovery_benchmark(setting="interaction", n_samples=200, methods=("TI", "CS", "L1", "L21", "FM"),
                       n_val=5, val_seeds=1, n_test=10, n_seeds=10, lambda_grid=DEFAULT_LAMBDA_GRID,
                       fm_grid=DEFAULT_FM_GRID, k=30, time_budget=None, base_seed=0, workers=1,
                       progress=None, metrics=METRICS):
    """Tune on ``n_val`` validation datasets, then evaluate on ``n_test``
    test datasets x ``n_seeds`` initializations.

    Hyperparameters are chosen per method and per metric on the validation
    runs; only the selections for ``metrics`` are run on the test datasets.
    ``time_budget`` defaults to N/50 seconds per run.
    """
    if time_budget is None:
        time_budget = n_samples / 50.0
    methods = list(methods)
    for m in methods:
        if m not in METHOD_KINDS:
            raise ValueError(f"unknown method {m!r}")
    val_cells = [
        _Cell(setting, n_samples, base_seed + i, m, lp, lt, s, k, time_budget, "val")
        for m in methods for lp, lt in method_grid(m, lambda_grid, fm_grid)
        for i in range(n_val) for s in range(val_seeds)
    ]
    rows = _map(val_cells, workers)
    if progress:
        progress(f"validation: {len(rows)} runs")
    for metric in metrics:
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
    selections = {metric: select_hyperparameters(rows, metric) for metric in metrics}
    wanted = sorted({(m, lam) for chosen in selections.values() for m, lam in chosen.items()})
    test_cells = [
        _Cell(setting, n_samples, base_seed + 100000 + i, m, lp, lt, s, k, time_budget, "test")
        for m, (lp, lt) in wanted for i in range(n_test) for s in range(n_seeds)
    ]
    rows += _map(test_cells, workers)
    if progress:
        progress(f"test: {len(test_cells)} runs")
    return RecoveryResult(rows, selections, summarize(rows, selections))


# --------------------------------------------------------------------------
# proximal operators
# --------------------------------------------------------------------------

SELECTION_PROXES = {
    "TI": lambda P, lam: prox_sq_l1_columns(P, lam),
    "CS": lambda P, lam: prox_sq_l21(P, lam),
    "L1": prox_l1,
    "L21": prox_l21_rows,
}


def prox_selection_curve(d=200, k=30, lambdas=None, seed=0, regs=("TI", "CS", "L1", "L21")):
    """Used interactions / features of Q Q^T with Q = prox(P) for a fixed
    P ~ N(0, 1), over a sweep of strengths."""
    if lambdas is None:
        lambdas = [2.0**e for e in range(-7, 8)]
    P = make_rng(seed).standard_normal((d, k))
    rows = []
    for reg in regs:
        for lam in lambdas:
            n_int, n_feat = count_used(SELECTION_PROXES[reg](P, lam))
            rows.append({"reg": reg, "lam": lam, "n_interactions": n_int, "n_features": n_feat})
    return rows


def prox_timing(d_list=None, lambdas=(1e-3, 1e-1, 1e1), sigmas=(1.0, 10.0), algos=("sort", "rand"),
                trials=100, seed=0):
    """Wall time of the sort and randomized squared-l1 proxes on
    N(0, sigma^2) vectors; every trial also checks that both agree."""
    if d_list is None:
        d_list = [2**e for e in range(3, 15)]
    rng = make_rng(seed)
    fns = {"sort": lambda p, lam: prox_sq_l1_sort(p, lam),
           "rand": lambda p, lam: prox_sq_l1_rand(p, lam, rng)}
    warm = np.ones(8)
    for a in algos:
        fns[a](warm, 0.1)
    rows = []
    for d, lam, sigma in itertools.product(d_list, lambdas, sigmas):
        for t in range(trials):
            p = sigma * rng.standard_normal(d)
            outs = {}
            for a in algos:
                t0 = time.perf_counter()
                outs[a] = fns[a](p, lam).output
                dt = time.perf_counter() - t0
                rows.append({"d": d, "lam": lam, "sigma": sigma, "algo": a, "trial": t, "seconds": dt})
            if len(outs) == 2:
                gap = float(np.max(np.abs(outs["sort"] - outs["rand"]), initial=0.0))
                for r in rows[-2:]:
                    r["max_gap"] = gap
    return rows

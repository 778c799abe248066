"""Experiment runner: trains the recommendation GNNs, runs the transfer /
perturbation / split sweeps, verifies the theory invariants on synthetic
graphs, and regenerates the demonstration figures as CSV (plus PNG when
matplotlib is available).

Exit codes: 0 success, 1 invariant failure, 2 configuration or IO error.
"""

import argparse
import hashlib
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .filters import graph_convolution, spectral_norm
from .gnn import (
    TrainConfig,
    forward,
    init_model,
    load_checkpoint,
    objective,
    objective_gradients,
    save_checkpoint,
    save_trace_csv,
    train,
)
from .graphs import (
    build_gso,
    permute_gso,
    permute_signal,
    random_weighted_graph,
)
from .movielens import build_task, load_ratings, rmse, save_split_manifest
from .perturbation import random_relative_perturbation, solve_relative_error
from .spectral import eigendecompose, frequency_response, gft
from .stability import (
    design_il_taps,
    discriminability_tradeoff_demo,
    empirical_filter_distance_sweep,
    frequency_mixing_demo,
)

PAPER_FEATURES = 64
PAPER_TAPS = 5


def _header_lines(args, extra=()):
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return [f"graphstab {__version__}", f"config: {json.dumps(echo, default=str)}",
            *extra]


def _write_csv(path, header_lines, columns, rows):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _evaluate(model, gso, samples):
    preds = [forward(model, gso, x).prediction for x, _ in samples]
    labels = [y for _, y in samples]
    return rmse(preds, labels)


def _train_one_split(ratings, args, split_seed, mu, out: Path):
    task = build_task(ratings, target_item_id=args.movie_id,
                      train_fraction=args.train_fraction, seed=split_seed)
    model = init_model(split_seed, [1, args.features], [args.taps], ["relu"],
                       task.target_index)
    config = TrainConfig(mu=mu, epochs=args.epochs, rng_seed=split_seed)
    trained, trace = train(model, task.gso, task.train, config)
    test_rmse = _evaluate(trained, task.gso, task.test) if task.test else float("nan")
    tag = f"mu{mu}_split{split_seed}"
    save_checkpoint(out / f"checkpoint_{tag}.json", trained, config)
    save_trace_csv(trace, out / f"trace_{tag}.csv")
    save_split_manifest(task, out / f"split_{split_seed}.csv")
    return task, trained, test_rmse


def _manifest_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ratings = load_ratings(args.data)
    rows = []
    summary = {"movie_id": args.movie_id, "train_fraction": args.train_fraction,
               "epochs": args.epochs, "features": args.features,
               "taps": args.taps, "seeds": list(args.seeds), "mus": {}}
    for mu in args.mu:
        per_split = []
        for split_seed in args.seeds:
            _, _, test_rmse = _train_one_split(ratings, args, split_seed, mu, out)
            rows.append((mu, split_seed, test_rmse))
            per_split.append(test_rmse)
        mean = statistics.fmean(per_split)
        std = statistics.stdev(per_split) if len(per_split) > 1 else 0.0
        summary["mus"][str(mu)] = {"rmse_per_split": per_split,
                                   "rmse_mean": mean, "rmse_std": std}
        print(f"mu={mu}: test RMSE {mean:.4f} (+-{std:.4f}) "
              f"over {len(per_split)} splits")
    hashes = [f"split manifest {s}: "
              f"{_manifest_hash(out / f'split_{s}.csv')}" for s in args.seeds]
    _write_csv(out / "rmse.csv", _header_lines(args, hashes),
               ["mu", "split_seed", "test_rmse"], rows)
    (out / "train_summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def cmd_transfer(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = Path(args.checkpoints)
    summary = json.loads((ckpt_dir / "train_summary.json").read_text())
    ratings = load_ratings(args.data)
    movie_ids = args.movie_ids or _most_rated(ratings, summary["movie_id"], 5)
    rows = []
    for mu_key, stats in summary["mus"].items():
        baseline = stats["rmse_mean"]
        for movie_id in movie_ids:
            per_split = []
            for split_seed in summary["seeds"]:
                task = build_task(ratings, target_item_id=movie_id,
                                  train_fraction=summary["train_fraction"],
                                  seed=split_seed)
                model, _ = load_checkpoint(
                    ckpt_dir / f"checkpoint_mu{mu_key}_split{split_seed}.json"
                )
                model.node = task.target_index
                per_split.append(_evaluate(model, task.gso, task.test))
            mean = statistics.fmean(per_split)
            std = statistics.stdev(per_split) if len(per_split) > 1 else 0.0
            degradation = 100.0 * (mean - baseline) / baseline
            rows.append((mu_key, movie_id, mean, std, degradation))
            print(f"mu={mu_key} movie {movie_id}: RMSE {mean:.4f} "
                  f"(+-{std:.4f}), degradation {degradation:+.1f}%")
    _write_csv(out / "transfer.csv", _header_lines(args),
               ["mu", "movie_id", "rmse_mean", "rmse_std",
                "degradation_percent"], rows)
    return 0


def _most_rated(ratings, exclude_item_id, count):
    counts = (ratings.matrix > 0).sum(axis=0)
    order = np.argsort(-counts, kind="stable")
    ids = [ratings.movie_ids[i] for i in order
           if ratings.movie_ids[i] != exclude_item_id]
    return ids[:count]


def cmd_perturb_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = Path(args.checkpoints)
    summary = json.loads((ckpt_dir / "train_summary.json").read_text())
    ratings = load_ratings(args.data)
    rows = []
    for mu_key in summary["mus"]:
        for split_seed in summary["seeds"]:
            task = build_task(ratings, target_item_id=summary["movie_id"],
                              train_fraction=summary["train_fraction"],
                              seed=split_seed)
            model, _ = load_checkpoint(
                ckpt_dir / f"checkpoint_mu{mu_key}_split{split_seed}.json"
            )
            base = _evaluate(model, task.gso, task.test)
            for eps in args.epsilon:
                for draw in range(args.draws):
                    spec = random_relative_perturbation(
                        task.gso, eps, seed=1000 * split_seed + draw
                    )
                    perturbed = _evaluate(model, spec.perturbed, task.test)
                    rows.append((mu_key, split_seed, eps, draw,
                                 base, perturbed, perturbed - base))
    _write_csv(out / "perturb_sweep.csv", _header_lines(args),
               ["mu", "split_seed", "epsilon", "draw", "rmse_base",
                "rmse_perturbed", "rmse_difference"], rows)
    _print_sweep_summary(rows)
    return 0


def _print_sweep_summary(rows):
    by_mu_eps = {}
    for mu, _, eps, _, _, _, diff in rows:
        by_mu_eps.setdefault((mu, eps), []).append(diff)
    for (mu, eps), diffs in sorted(by_mu_eps.items()):
        print(f"mu={mu} eps={eps}: mean RMSE difference "
              f"{statistics.fmean(diffs):+.4f}")


def cmd_split_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = Path(args.checkpoints)
    summary = json.loads((ckpt_dir / "train_summary.json").read_text())
    ratings = load_ratings(args.data)
    rows = []
    for mu_key in summary["mus"]:
        for split_seed in summary["seeds"]:
            model, _ = load_checkpoint(
                ckpt_dir / f"checkpoint_mu{mu_key}_split{split_seed}.json"
            )
            trained_task = build_task(
                ratings, target_item_id=summary["movie_id"],
                train_fraction=summary["train_fraction"], seed=split_seed
            )
            base = _evaluate(model, trained_task.gso, trained_task.test)
            for ratio in args.splits:
                task = build_task(ratings, target_item_id=summary["movie_id"],
                                  train_fraction=ratio, seed=split_seed)
                model.node = task.target_index
                perturbed = _evaluate(model, task.gso, task.test)
                rows.append((mu_key, split_seed, ratio, base, perturbed,
                             perturbed - base))
    _write_csv(out / "split_sweep.csv", _header_lines(args),
               ["mu", "split_seed", "train_fraction", "rmse_base",
                "rmse_at_ratio", "rmse_difference"], rows)
    return 0


# --- verify ------------------------------------------------------------------

def _check(name, residual, tolerance):
    return (name, residual, tolerance, residual <= tolerance)


def invariant_suite(quick: bool = False, seed: int = 0,
                    fault_scale: float = 1.0):
    """Residuals-vs-tolerance table for the theory invariants on synthetic
    graphs. fault_scale != 1 perturbs one analytic gradient (test hook)."""
    rng = np.random.default_rng(seed)
    checks = []
    draws = 10 if quick else 40
    max_n = 12 if quick else 25

    # permutation equivariance of filters and GNNs
    res_filter, res_gnn = 0.0, 0.0
    for _ in range(draws):
        n = int(rng.integers(5, max_n + 1))
        S = build_gso(random_weighted_graph(n, int(rng.integers(2**31))))
        x = rng.standard_normal(n)
        perm = rng.permutation(n)
        h = rng.standard_normal(4)
        y = graph_convolution(S, h, x)
        y_perm = graph_convolution(permute_gso(S, perm), h,
                                   permute_signal(x, perm))
        res_filter = max(res_filter,
                         np.linalg.norm(y_perm - permute_signal(y, perm))
                         / max(np.linalg.norm(y), 1e-300))
        model = init_model(int(rng.integers(2**31)), [1, 3, 2], [3, 3],
                           ["relu", "tanh"], node=0)
        fa = forward(model, S, x).features
        fb = forward(model, permute_gso(S, perm),
                     permute_signal(x, perm)).features
        res_gnn = max(res_gnn,
                      np.linalg.norm(fb - permute_signal(fa, perm))
                      / max(np.linalg.norm(fa), 1e-300))
    checks.append(_check("filter permutation equivariance", res_filter, 1e-9))
    checks.append(_check("gnn permutation equivariance", res_gnn, 1e-9))

    # spectral identities
    res_recon, res_parseval = 0.0, 0.0
    for _ in range(draws):
        n = int(rng.integers(5, max_n + 1))
        S = build_gso(random_weighted_graph(n, int(rng.integers(2**31))))
        eig = eigendecompose(S)
        V, lam = eig.eigenvectors, eig.eigenvalues
        recon = V @ np.diag(lam) @ V.T
        res_recon = max(res_recon, spectral_norm(recon - S.matrix)
                        / max(spectral_norm(S.matrix), 1e-300))
        x = rng.standard_normal(n)
        res_parseval = max(res_parseval,
                           abs(np.linalg.norm(gft(V, x)) - np.linalg.norm(x)))
    checks.append(_check("eigendecomposition reconstruction", res_recon, 1e-10))
    checks.append(_check("gft parseval", res_parseval, 1e-10))

    # gradient check against finite differences
    from .gnn import _parameters

    model = init_model(seed, [1, 3], [4], ["tanh"], node=2)
    S = build_gso(random_weighted_graph(8, seed))
    samples = [(rng.standard_normal(8), float(rng.normal())) for _ in range(3)]
    config = TrainConfig(mu=0.3, lambda_interval=(-2.0, 2.0), grid_size=201)
    grads = objective_gradients(model, S, samples, config)
    grads[0].flat[0] *= fault_scale
    params = _parameters(model)
    res_grad = 0.0
    step = 1e-5
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = objective(model, S, samples, config)
            p[idx] = orig - step
            down = objective(model, S, samples, config)
            p[idx] = orig
            fd = (up - down) / (2 * step)
            res_grad = max(res_grad, abs(g[idx] - fd) / max(abs(fd), 1e-4))
    checks.append(_check("analytic vs finite-difference gradients",
                         res_grad, 1e-4))

    # perturbation round trip
    res_round = 0.0
    for _ in range(draws):
        n = int(rng.integers(5, max_n + 1))
        S = build_gso(random_weighted_graph(n, int(rng.integers(2**31))))
        spec = random_relative_perturbation(S, 0.05, int(rng.integers(2**31)))
        E = solve_relative_error(S, spec.perturbed)
        res_round = max(res_round, spectral_norm(E - spec.error))
    checks.append(_check("error-matrix round trip", res_round, 1e-8))

    # bound sweep on a 20-node graph
    S = build_gso(random_weighted_graph(12 if quick else 20, seed))
    lam = np.linalg.eigvalsh(S.matrix)
    h = design_il_taps((1.2 * lam[0], 1.2 * lam[-1]), K=5, c_target=1.0)
    eps_list = [0.02, 0.05, 0.1]
    seeds = list(range(3 if quick else 5))
    reports = empirical_filter_distance_sweep(S, h, "relative", eps_list, seeds)
    worst = max((r.measured - r.bound) / max(r.bound, 1e-300) for r in reports)
    checks.append(_check("filter stability bound slack", max(worst, 0.0), 0.0))
    return checks


def cmd_verify(args) -> int:
    fault = 1.01 if args.inject_fault else 1.0
    checks = invariant_suite(quick=args.quick, seed=args.seed,
                             fault_scale=fault)
    width = max(len(name) for name, *_ in checks)
    failed = False
    for name, residual, tol, ok in checks:
        status = "pass" if ok else "FAIL"
        print(f"{name:<{width}}  residual {residual:.3e}  "
              f"tolerance {tol:.0e}  {status}")
        failed |= not ok
    if failed:
        print(f"verification FAILED (seed {args.seed})")
        return 1
    print("all invariants satisfied")
    return 0


# --- demo --------------------------------------------------------------------

def cmd_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    S = build_gso(random_weighted_graph(10, args.seed))
    lam = eigendecompose(S).eigenvalues
    eps = 0.1
    header = _header_lines(args, [f"seed: {args.seed}"])

    # panel 1: IL response with original and dilated eigenvalues
    interval = (1.3 * lam[0], 1.3 * lam[-1])
    h = design_il_taps(interval, K=5, c_target=1.0)
    grid = np.linspace(*interval, 400)
    _write_csv(out / "il_response.csv", header, ["lambda", "response"],
               list(zip(grid, frequency_response(h, grid))))
    _write_csv(out / "eigenvalues.csv", header,
               ["index", "lambda", "lambda_dilated"],
               [(i, v, (1 + eps) * v) for i, v in enumerate(lam)])

    # panel 2: sharp vs IL filter under dilation
    report = discriminability_tradeoff_demo(S, eps, seed=args.seed,
                                            train_epochs=150)
    _write_csv(out / "tradeoff.csv", header,
               ["filter", "margin_original", "margin_dilated"],
               [("sharp", report.sharp_margin_original,
                 report.sharp_margin_dilated),
                ("integral_lipschitz", report.il_margin_original,
                 report.il_margin_dilated),
                ("gnn", report.gnn_margin_original,
                 report.gnn_margin_dilated)])

    # panel 3: frequency mixing spectrum
    for activation in ("relu", "linear"):
        mix = frequency_mixing_demo(S, activation)
        _write_csv(out / f"mixing_{activation}.csv", header,
                   ["coefficient", "magnitude"],
                   list(enumerate(mix.magnitudes)))

    _render_plots(out, lam, eps, grid, h)
    print(f"demo outputs written to {out}")
    return 0


def _render_plots(out: Path, lam, eps, grid, h) -> None:
    # images are best effort; the CSVs are the contract
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(grid, frequency_response(h, grid), "k-", label="IL response")
    ax.stem(lam, np.abs(frequency_response(h, lam)), linefmt="b-",
            markerfmt="bo", basefmt=" ", label="eigenvalues")
    ax.stem((1 + eps) * lam, np.abs(frequency_response(h, (1 + eps) * lam)),
            linefmt="r-", markerfmt="rx", basefmt=" ",
            label="dilated eigenvalues")
    ax.set_xlabel("lambda")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "il_response.png", dpi=120)
    plt.close(fig)


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphstab",
        description="stability experiments for graph filters and GNNs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train the recommendation GNNs")
    p.add_argument("--data", required=True, help="path to u.data")
    p.add_argument("--movie-id", type=int, default=50)
    p.add_argument("--mu", type=float, nargs="+", default=[0.0, 0.5])
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)),
                   help="one training split realization per seed")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--features", type=int, default=PAPER_FEATURES)
    p.add_argument("--taps", type=int, default=PAPER_TAPS)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="evaluate trained models on other movies")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoints", required=True,
                   help="output directory of a previous train run")
    p.add_argument("--movie-ids", type=int, nargs="*", default=None)
    add_common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("perturb-sweep",
                       help="evaluate under synthetic GSO perturbations")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--epsilon", type=float, nargs="+",
                   default=[0.01, 0.02, 0.05, 0.1])
    p.add_argument("--draws", type=int, default=10)
    add_common(p)
    p.set_defaults(func=cmd_perturb_sweep)

    p = sub.add_parser("split-sweep",
                       help="evaluate under changed train/test ratios")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--splits", type=float, nargs="+",
                   default=[0.5, 0.6, 0.7, 0.8, 0.9])
    add_common(p)
    p.set_defaults(func=cmd_split_sweep)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--inject-fault", action="store_true",
                   help="test hook: corrupt one gradient by 1%")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="regenerate the demonstration figures")
    add_common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands cover the full workflow: synthesize data, train a model, rank
test queries, score rankings, sweep the basis count, inspect the pair
spectrum, and run the leave-one-query-out stability experiment.  Output
files are tab-separated with '#'-prefixed header lines that echo the seed
and configuration, so every artifact is reproducible from its own header.

Exit codes: 0 success, 2 usage or data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from math import sqrt

import numpy as np

from .core import HyperParams
from .data import (
    SynthSpec,
    generate_all_pairs,
    parse_letor,
    serialize_letor,
    standardize,
    synth_generate,
)
from .errors import ConeRankError, InvalidInputError, NumericalError
from .metrics import MEAN_NDCG_CUTOFFS, evaluate
from .model import ConeModel, load_model, save_model
from .ranker import rank_dataset
from .solver import TrainConfig, train
from .stability import loqo_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _name(path) -> str:
    """Basename for output headers: reruns elsewhere stay byte-identical."""
    return os.path.basename(str(path))


def _read_dataset(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_letor(fh)


def _write_letor_with_header(dataset, path, header: str) -> None:
    # a '#'-leading line parses as an empty data line, so readers skip it
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for line in serialize_letor(dataset):
            fh.write(line + "\n")


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=10, help="number of basis vectors (default 10)")
    p.add_argument("--alpha", type=float, default=1.0, help="normalization offset (default 1)")
    p.add_argument("--rho", type=float, default=None, help="normalization scale (default sqrt(N))")
    p.add_argument("--c", type=float, default=None, help="column norm cap (default 2*rho)")
    p.add_argument("--mu", type=float, default=None, help="learning rate (default per variant)")
    p.add_argument(
        "--variant",
        choices=("sg", "eg", "eg-approx"),
        default="sg",
        help="inner update rule (default sg)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200, help="max outer epochs (default 200)")
    p.add_argument("--tol", type=float, default=1e-5, help="outer relative risk tolerance")
    p.add_argument("--inner-iters", type=int, default=100, help="max inner iterations per pair")
    p.add_argument("--inner-tol", type=float, default=1e-8, help="inner relative objective tolerance")
    p.add_argument("--full-batch", action="store_true", help="exact inner solver, line-searched steps")


def _config_from_args(args, n_features: int) -> TrainConfig:
    rho = args.rho if args.rho is not None else sqrt(n_features)
    c = args.c if args.c is not None else 2.0 * rho
    variant = args.variant.replace("-", "_")
    mu_sg, mu_eg = 0.001, 0.005
    if args.mu is not None:
        if variant == "sg":
            mu_sg = args.mu
        else:
            mu_eg = args.mu
    hyper = HyperParams(K=args.k, alpha=args.alpha, rho=rho, c=c, mu_sg=mu_sg, mu_eg=mu_eg)
    return TrainConfig(
        hyper=hyper,
        variant=variant,
        max_outer_epochs=args.epochs,
        max_inner_iters=args.inner_iters,
        outer_tol=args.tol,
        inner_tol=args.inner_tol,
        seed=args.seed,
        full_batch=args.full_batch,
    )


def _config_header(config: TrainConfig) -> str:
    h = config.hyper
    return (
        f"# seed={config.seed} variant={config.variant} K={h.K}"
        f" alpha={_fmt(h.alpha)} rho={_fmt(h.rho)} c={_fmt(h.c)} mu={_fmt(config.mu)}"
        f" epochs={config.max_outer_epochs} outer_tol={_fmt(config.outer_tol)}"
        f" inner_iters={config.max_inner_iters} inner_tol={_fmt(config.inner_tol)}"
        f" full_batch={int(config.full_batch)}"
    )


def cmd_train(args) -> int:
    dataset = _read_dataset(args.train_file)
    n_features = dataset[0].features.shape[1]
    config = _config_from_args(args, n_features)
    model, report = train(dataset, config)
    save_model(model, args.model_out)
    trace_path = args.trace_out or args.model_out + ".trace.tsv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write("# conerank train trace\n")
        fh.write(_config_header(config) + "\n")
        fh.write(
            f"# converged={int(report.converged)} epochs_run={report.epochs_run}"
            f" proper={int(report.proper)} proper_ratio={_fmt(report.proper_ratio)}\n"
        )
        fh.write("# epoch\trisk\n")
        for epoch, risk in report.risk_trace:
            fh.write(f"{epoch}\t{_fmt(risk)}\n")
    print(
        f"trained K={config.hyper.K} on {len(dataset)} queries:"
        f" risk {_fmt(report.risk_trace[0][1])} -> {_fmt(report.risk_trace[-1][1])}"
        f" in {report.epochs_run} epochs ({'converged' if report.converged else 'epoch limit'})"
    )
    return EXIT_OK


def cmd_rank(args) -> int:
    model = load_model(args.model)
    dataset = _read_dataset(args.test_file)
    n_features = dataset[0].features.shape[1]
    if n_features != model.basis.N:
        raise InvalidInputError(
            f"data dimension {n_features} != model dimension {model.basis.N}"
        )
    results = rank_dataset(model, dataset)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# conerank rank\n")
        fh.write(f"# model={_name(args.model)} test_file={_name(args.test_file)}\n")
        fh.write("# qid\trank\tdoc_index\tvotes\n")
        for group in dataset:
            result = results[group.query_id]
            for rank, doc in enumerate(result.ordered_doc_indices, start=1):
                fh.write(f"{group.query_id}\t{rank}\t{doc}\t{result.votes[doc]}\n")
    print(f"ranked {len(dataset)} queries -> {args.output}")
    return EXIT_OK


def read_rankings(path) -> dict[str, list[int]]:
    """Read a cmd_rank output file back into per-query document orders."""
    rankings: dict[str, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InvalidInputError(f"{path}:{lineno}: expected 4 tab-separated fields")
            qid, rank_s, doc_s, _votes = parts
            try:
                rank, doc = int(rank_s), int(doc_s)
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: malformed rank row") from None
            rows = rankings.setdefault(qid, [])
            if rank != len(rows) + 1:
                raise InvalidInputError(f"{path}:{lineno}: ranks out of order for query {qid}")
            rows.append(doc)
    if not rankings:
        raise InvalidInputError(f"{path}: no ranking rows found")
    return rankings


def _parse_cutoffs(text: str | None) -> tuple[int, ...]:
    if not text:
        return MEAN_NDCG_CUTOFFS
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        return MEAN_NDCG_CUTOFFS
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise InvalidInputError(f"bad cutoff list {text!r}") from None


def cmd_eval(args) -> int:
    rankings = read_rankings(args.rankings)
    dataset = _read_dataset(args.labels)
    cutoffs = _parse_cutoffs(args.cutoffs)
    report = evaluate(rankings, dataset, cutoffs)
    header_cells = ["qid", "ap"] + [f"ndcg@{k}" for k in cutoffs] + ["mean_ndcg"]
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# conerank eval\n")
        fh.write(f"# rankings={_name(args.rankings)} labels={_name(args.labels)}"
                 f" cutoffs={','.join(str(k) for k in cutoffs)}\n")
        fh.write("# " + "\t".join(header_cells) + "\n")
        summary = ["ALL", _fmt(report.map)]
        summary += [_fmt(report.ndcg_at[k]) for k in cutoffs]
        summary.append(_fmt(report.mean_ndcg))
        fh.write("\t".join(summary) + "\n")
        for q in report.per_query:
            row = [q.query_id, _fmt(q.average_precision)]
            row += [_fmt(q.ndcg_at[k]) for k in cutoffs]
            row.append(_fmt(q.mean_ndcg))
            fh.write("\t".join(row) + "\n")
    print(f"MAP {report.map:.4f}  mean NDCG {report.mean_ndcg:.4f}  ({len(report.per_query)} queries)")
    return EXIT_OK


def cmd_synth(args) -> int:
    total = args.queries + args.holdout_queries
    spec = SynthSpec(
        N=args.n,
        K_true=args.k_true,
        num_queries=total,
        docs_per_query=args.docs_per_query,
        noise_std=args.noise_std,
        seed=args.seed,
    )
    dataset, truth = synth_generate(spec)
    header = (
        f"# conerank synth n={spec.N} k_true={spec.K_true} queries={total}"
        f" docs_per_query={spec.docs_per_query} noise_std={_fmt(spec.noise_std)}"
        f" seed={spec.seed}"
    )
    _write_letor_with_header(dataset[: args.queries], args.train_out, header)
    if args.holdout_queries > 0:
        if not args.holdout_out:
            raise InvalidInputError("--holdout-out is required with --holdout-queries")
        _write_letor_with_header(dataset[args.queries :], args.holdout_out, header)
    if args.truth_out:
        from .data import FeatureStats

        hyper = HyperParams.defaults(args.n, K=args.k_true)
        stats = FeatureStats(np.zeros(args.n), np.ones(args.n))
        save_model(ConeModel(basis=truth, stats=stats, hyper=hyper), args.truth_out)
    print(f"wrote {args.queries} queries to {args.train_out}"
          + (f", {args.holdout_queries} to {args.holdout_out}" if args.holdout_queries else ""))
    return EXIT_OK


def cmd_stability(args) -> int:
    dataset = _read_dataset(args.train_file)
    n_features = dataset[0].features.shape[1]
    config = _config_from_args(args, n_features)
    report = loqo_experiment(dataset, config, epsilon=args.epsilon)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# conerank stability\n")
        fh.write(_config_header(config) + "\n")
        fh.write(
            f"# beta_hat={_fmt(report.beta_hat)} s_max={_fmt(report.s_max)}"
            f" bound={_fmt(report.bound)} gamma_hat={_fmt(report.gamma_hat)}"
            f" holds={int(report.holds)}\n"
        )
        fh.write(
            f"# risk={_fmt(report.risk_full)} epsilon={_fmt(report.epsilon)}"
            f" generalization_rhs={_fmt(report.generalization_rhs)}\n"
        )
        fh.write("# fold\tqid\tbasis_shift\tmax_loss_deviation\n")
        for fold in report.per_fold:
            fh.write(
                f"{fold.index}\t{fold.query_id}\t{_fmt(fold.basis_shift)}"
                f"\t{_fmt(fold.max_loss_deviation)}\n"
            )
    print(
        f"beta_hat {_fmt(report.beta_hat)} <= bound {_fmt(report.bound)}: "
        + ("holds" if report.holds else "VIOLATED")
    )
    print(
        f"risk {_fmt(report.risk_full)}, expected-risk bound {_fmt(report.generalization_rhs)}"
        f" at confidence {1.0 - report.epsilon:g} (reporting only)"
    )
    return EXIT_OK


def cmd_spectrum(args) -> int:
    dataset = _read_dataset(args.train_file)
    n_features = dataset[0].features.shape[1]
    alpha = args.alpha
    rho = args.rho if args.rho is not None else sqrt(n_features)
    standardized, _ = standardize(dataset)
    groups = generate_all_pairs(standardized, alpha, rho)
    Z = [s.z for g in groups for s in g]
    if not Z:
        raise InvalidInputError("no ordered pairs in the dataset")
    Zm = np.stack(Z, axis=0)
    second_moment = Zm.T @ Zm / Zm.shape[0]
    eigvals = np.linalg.eigvalsh(second_moment)[::-1]
    eigvals = np.maximum(eigvals, 0.0)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# conerank spectrum\n")
        fh.write(f"# train_file={_name(args.train_file)} pairs={Zm.shape[0]}"
                 f" alpha={_fmt(alpha)} rho={_fmt(rho)}\n")
        fh.write("# rank\teigenvalue\n")
        for i, val in enumerate(eigvals, start=1):
            fh.write(f"{i}\t{_fmt(val)}\n")
    print(f"wrote {eigvals.size} eigenvalues to {args.output}")
    return EXIT_OK


def cmd_sweep_k(args) -> int:
    train_set = _read_dataset(args.train_file)
    test_set = _read_dataset(args.test_file)
    try:
        k_values = [int(k) for k in args.k_list.split(",") if k.strip()]
    except ValueError:
        raise InvalidInputError(f"bad K list {args.k_list!r}") from None
    if not k_values:
        raise InvalidInputError("empty K list")
    cutoffs = _parse_cutoffs(args.cutoffs)
    rows = []
    for k in k_values:
        args.k = k
        config = _config_from_args(args, train_set[0].features.shape[1])
        model, _ = train(train_set, config)
        rankings = {
            qid: result.ordered_doc_indices.tolist()
            for qid, result in rank_dataset(model, test_set).items()
        }
        report = evaluate(rankings, test_set, cutoffs)
        rows.append((k, report))
        print(f"K={k}: MAP {report.map:.4f}  mean NDCG {report.mean_ndcg:.4f}")
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# conerank sweep-k\n")
        fh.write(f"# train_file={_name(args.train_file)} test_file={_name(args.test_file)}"
                 f" seed={args.seed} variant={args.variant}\n")
        fh.write("# K\tmap\t" + "\t".join(f"ndcg@{k}" for k in cutoffs) + "\tmean_ndcg\n")
        for k, report in rows:
            cells = [str(k), _fmt(report.map)]
            cells += [_fmt(report.ndcg_at[c]) for c in cutoffs]
            cells.append(_fmt(report.mean_ndcg))
            fh.write("\t".join(cells) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conerank",
        description="Pairwise learning-to-rank via polyhedral cone learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on a qid-format file")
    p.add_argument("--train-file", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace-out", default=None, help="risk trace path (default <model>.trace.tsv)")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank the queries of a test file")
    p.add_argument("--model", required=True)
    p.add_argument("--test-file", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="score a rankings file against labels")
    p.add_argument("--rankings", required=True, help="output of the rank command")
    p.add_argument("--labels", required=True, help="qid-format file with relevance labels")
    p.add_argument("--cutoffs", default=None, help="comma-separated NDCG cutoffs (default 1..10)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate planted-cone synthetic data")
    p.add_argument("--n", type=int, required=True, help="feature dimension")
    p.add_argument("--k-true", type=int, required=True, help="hidden basis size")
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--docs-per-query", type=int, default=10)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--holdout-queries", type=int, default=0)
    p.add_argument("--holdout-out", default=None)
    p.add_argument("--truth-out", default=None, help="write the hidden basis as a model file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stability", help="leave-one-query-out stability experiment")
    p.add_argument("--train-file", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epsilon", type=float, default=0.05, help="confidence level for reporting")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("spectrum", help="eigenvalues of the pair-difference second moment")
    p.add_argument("--train-file", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep-k", help="train and evaluate across a list of basis counts")
    p.add_argument("--train-file", required=True)
    p.add_argument("--test-file", required=True)
    p.add_argument("--k-list", required=True, help="comma-separated basis counts")
    p.add_argument("--cutoffs", default=None)
    p.add_argument("--output", required=True)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_sweep_k)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"conerank: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConeRankError, OSError) as exc:
        print(f"conerank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``cepfda {train,classify,simulate,baseline,gait}``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage or
input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import dataio
from .baselines import (
    DEFAULT_ALPHAS,
    GroupSpectrumTemplate,
    classify_information,
    smoothed_spectra,
    tune_chernoff_alpha,
)
from .cepstral import _label_key, _stack_epochs, cepstral_matrix, corpus_from_epochs, max_truncation
from .discriminant import classify, fit, leave_one_out, select_L_cv
from .errors import (
    CepfdaError,
    DegenerateSpectrumError,
    IllConditionedError,
)
from .simulation import (
    METHODS,
    ExperimentConfig,
    study_group_specs,
    run_experiment,
    study_settings,
)
from .spectral import EstimatorConfig

log = logging.getLogger("cepfda")


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _range(text):
    vals = _float_list(text)
    if len(vals) != 2 or vals[0] > vals[1]:
        raise argparse.ArgumentTypeError(f"expected LO,HI with LO <= HI, got {text!r}")
    return tuple(vals)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _span(text):
    if text == "auto":
        return text
    v = _positive_int(text)
    if v % 2 == 0:
        raise argparse.ArgumentTypeError(f"span must be odd, got {v}")
    return v


def _add_estimator_flags(p):
    g = p.add_argument_group("log-spectrum estimator")
    g.add_argument("--estimator", choices=("multitaper", "direct", "smoothed"),
                   default="multitaper", help="log-spectrum estimator (default: multitaper)")
    g.add_argument("--tapers", type=_positive_int, default=7,
                   help="number of sine tapers for the multitaper estimator (default: 7)")
    g.add_argument("--span", type=_span, default="auto",
                   help="modified Daniell span for the smoothed estimator, odd or 'auto' (GCV)")
    g.add_argument("--scale-by-n", action="store_true",
                   help="include the 1/N periodogram factor (shifts c_0 only)")


def _estimator(args) -> EstimatorConfig:
    return EstimatorConfig(args.estimator, args.tapers, args.span, args.scale_by_n)


def _estimator_from_meta(meta) -> EstimatorConfig:
    e = meta.get("estimator", {})
    return EstimatorConfig(e.get("kind", "multitaper"), e.get("tapers", 7),
                           e.get("span", "auto"), e.get("scale_by_n", False))


def _read_epochs(path, require_labels=False):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    epochs = dataio.read_corpus(path)
    if not epochs:
        raise UsageError(f"corpus {path} is empty")
    if require_labels and any(e.group is None for e in epochs):
        raise UsageError(f"corpus {path} contains unlabelled epochs")
    return epochs


def _confusion(truth, pred) -> str:
    groups = sorted(set(truth) | set(pred), key=_label_key)
    counts = Counter(zip(truth, pred))
    w = max(8, *(len(str(g)) for g in groups)) + 1
    lines = ["true\\pred".ljust(w) + "".join(str(g).rjust(w) for g in groups)]
    for t in groups:
        lines.append(str(t).ljust(w) + "".join(str(counts[(t, p)]).rjust(w) for p in groups))
    return "\n".join(lines)


def cmd_train(args) -> int:
    epochs = _read_epochs(args.corpus, require_labels=True)
    est = _estimator(args)
    N = epochs[0].N
    cv = None
    if args.L is not None:
        L = args.L
        if L > max_truncation(N):
            raise UsageError(f"--L {L} exceeds floor(N/2)+1 = {max_truncation(N)}")
    else:
        grid = args.cv_grid or list(range(2, 9))
        log.info("stage cv: leave-one-out over L in %s", grid)
        cv = select_L_cv(epochs, est, grid, args.priors)
        L = cv.best_L
    corpus = corpus_from_epochs(epochs, est, L)
    model = fit(corpus, args.priors)
    model.meta["estimator"] = {"kind": est.kind, "tapers": est.tapers,
                               "span": est.span, "scale_by_n": est.scale_by_n}
    if cv is not None:
        model.meta["cv"] = {"candidates": list(cv.candidates), "errors": list(cv.errors)}
    dataio.save_model(model, args.out)

    print(f"L* = {L}")
    if cv is not None:
        print("cv errors: " + ", ".join(f"L={c}: {'NA' if e is None else e}"
                                        for c, e in zip(cv.candidates, cv.errors)))
    print("eigenvalues: " + (" ".join(f"{t:.6g}" for t in model.eigenvalues) or "(none)"))
    print(f"Q = {model.Q}")
    print("group counts: " + ", ".join(f"{g}={c}" for g, c in zip(model.groups, model.counts)))
    if args.plot_dir:
        d = Path(args.plot_dir)
        d.mkdir(parents=True, exist_ok=True)
        fig = not args.no_figures
        if model.Q >= 1:
            dataio.emit_plot_data(model, "weight-functions", d / "weight-functions.tsv",
                                  G=args.grid, figure=fig)
            dataio.emit_plot_data(model, "discriminant-scatter", d / "discriminant-scatter.tsv",
                                  corpus=corpus, figure=fig)
        if cv is not None:
            dataio.emit_plot_data(cv, "cv-curve", d / "cv-curve.tsv", figure=fig)
        dataio.emit_plot_data(epochs, "log-spectra", d / "log-spectra.tsv",
                              estimator=est, figure=fig)
    return 0


def cmd_classify(args) -> int:
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    model = dataio.load_model(args.model)
    epochs = _read_epochs(args.corpus, require_labels=args.loo)
    N = epochs[0].N
    if model.L > max_truncation(N):
        raise UsageError(f"model uses L={model.L} but the corpus length N={N} "
                         f"allows at most {max_truncation(N)}")
    est = _estimator_from_meta(model.meta)
    C = cepstral_matrix(est.log_spectra(_stack_epochs(epochs)), model.L)

    rows = []
    if args.loo:
        corpus = corpus_from_epochs(epochs, est, model.L)
        preds = leave_one_out(corpus, None)
        for e, p in zip(epochs, preds):
            rows.append([e.id, p])
        header = ["epoch_id", "predicted"]
    else:
        header = (["epoch_id", "predicted"] + [f"d{q + 1}" for q in range(model.Q)]
                  + [f"objective_{g}" for g in model.groups])
        preds = []
        for e, c in zip(epochs, C):
            r = classify(model, c)
            preds.append(r.predicted)
            rows.append([e.id, r.predicted, *r.scores, *r.objectives])
    if args.out:
        dataio.atomic_write(args.out, dataio._tsv(header, rows))
    else:
        sys.stdout.write(dataio._tsv(header, rows))

    truth = [e.group for e in epochs]
    if all(g is not None for g in truth):
        # labels read from files are strings; compare on that footing
        truth = [str(g) for g in truth]
        preds = [str(p) for p in preds]
        correct = sum(t == p for t, p in zip(truth, preds))
        mode = "leave-one-out" if args.loo else "resubstitution" if args.resubstitution else "accuracy"
        print(f"{mode}: {correct}/{len(truth)} correct ({100.0 * correct / len(truth):.1f}%)")
        print(_confusion(truth, preds))
    return 0


def _progress(done, total):
    if done == total or done % max(1, total // 10) == 0:
        log.info("rep %d/%d", done, total)


def cmd_simulate(args) -> int:
    if args.identical_groups:
        specs = (study_group_specs(args.sigma2)[0],) * 3
    else:
        specs = study_group_specs(args.sigma2)
    settings = ([(s2, nj, N) for s2, nj, N in study_settings()] if args.full_grid
                else [(args.sigma2, args.nj, args.N)])
    reports = []
    for s2, nj, N in settings:
        if args.full_grid:
            specs = study_group_specs(s2)
        config = ExperimentConfig(
            group_specs=specs, n_per_group=nj, N=N, reps=args.reps,
            test_per_group=args.test_per_group, seed=args.seed, methods=tuple(args.methods),
            tapers=args.tapers, L_grid=tuple(args.L_grid), alphas=tuple(args.alphas))
        report = run_experiment(config, workers=args.workers, progress=_progress)
        print(report.table_row())
        reports.append(report)
    if args.out:
        out = Path(args.out)
        if len(reports) == 1:
            dataio.save_report(reports[0], out)
        else:
            out.mkdir(parents=True, exist_ok=True)
            for r in reports:
                c = r.config
                s2 = c.group_specs[0].sigma2
                dataio.save_report(r, out / f"report_s{s2[0]:g}-{s2[1]:g}_n{c.n_per_group}_N{c.N}.json")
    if args.plot_dir:
        d = Path(args.plot_dir)
        d.mkdir(parents=True, exist_ok=True)
        for k, r in enumerate(reports):
            name = "rates.tsv" if len(reports) == 1 else f"rates_{k:02d}.tsv"
            dataio.emit_plot_data(r, "rates", d / name, figure=not args.no_figures)
    return 0


def cmd_baseline(args) -> int:
    train = _read_epochs(args.train, require_labels=True)
    test = _read_epochs(args.test)
    if train[0].N != test[0].N:
        raise UsageError(f"train length {train[0].N} differs from test length {test[0].N}")
    F_train = smoothed_spectra(_stack_epochs(train), args.span)
    labels = [e.group for e in train]
    groups = sorted(set(labels), key=_label_key)
    N = train[0].N
    templates = [GroupSpectrumTemplate(
        g, F_train[[i for i, lab in enumerate(labels) if lab == g]].mean(axis=0), N,
        labels.count(g)) for g in groups]
    alpha = args.alpha
    if args.measure == "chernoff" and args.tune:
        alpha = tune_chernoff_alpha(F_train, labels, args.alphas)
        print(f"tuned alpha = {alpha:g}")
    F_test = smoothed_spectra(_stack_epochs(test), args.span)
    preds = [classify_information(f[: N // 2 + 1], templates, args.measure, alpha)
             for f in F_test]
    rows = [[e.id, p] for e, p in zip(test, preds)]
    if args.out:
        dataio.atomic_write(args.out, dataio._tsv(["epoch_id", "predicted"], rows))
    truth = [e.group for e in test]
    if all(g is not None for g in truth):
        correct = sum(str(t) == str(p) for t, p in zip(truth, preds))
        print(f"{args.measure}: {correct}/{len(truth)} correct "
              f"({100.0 * correct / len(truth):.1f}%)")
        print(_confusion([str(t) for t in truth], [str(p) for p in preds]))
    else:
        sys.stdout.write(dataio._tsv(["epoch_id", "predicted"], rows))
    return 0


def cmd_gait(args) -> int:
    src = Path(args.directory)
    if not src.is_dir():
        raise UsageError(f"gait directory not found: {src}")
    records = dataio.read_gait_directory(src, pattern=args.pattern)
    epochs = []
    for rec in records:
        try:
            epochs.append(dataio.gait_preprocess(rec, window=args.window, n_sd=args.n_sd))
        except CepfdaError as exc:
            log.warning("skipping %s: %s", rec.id, exc)
    dataio.write_corpus(epochs, args.out)
    counts = Counter(e.group for e in epochs)
    print(f"{len(epochs)} epochs of N={epochs[0].N if epochs else 0}: "
          + ", ".join(f"{g}={counts[g]}" for g in sorted(counts, key=_label_key)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cepfda", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a cepstral discriminant model to a labelled corpus")
    t.add_argument("corpus", help="labelled corpus file (epoch_id, group, t, value)")
    _add_estimator_flags(t)
    sel = t.add_mutually_exclusive_group()
    sel.add_argument("--L", type=_positive_int, help="fixed number of cepstral coefficients")
    sel.add_argument("--cv-grid", type=_int_list,
                     help="candidate L values for leave-one-out selection (default 2..8)")
    t.add_argument("--priors", type=_float_list,
                   help="group priors in sorted group order (default: sample proportions)")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--plot-dir", help="directory for plot tables and figures")
    t.add_argument("--grid", type=_positive_int, default=256,
                   help="frequency grid size for weight functions (default: 256)")
    t.add_argument("--no-figures", action="store_true", help="write plot tables only")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="classify a corpus with a saved model")
    c.add_argument("model", help="model file written by 'train'")
    c.add_argument("corpus", help="corpus file; labels optional")
    c.add_argument("--out", help="predictions file (default: stdout)")
    c.add_argument("--loo", action="store_true",
                   help="leave-one-out mode: refit at the model's L without each epoch")
    c.add_argument("--resubstitution", action="store_true",
                   help="label the accuracy line as resubstitution (corpus is the training set)")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simulate", help="Monte Carlo study on conditional AR(2) groups")
    s.add_argument("--sigma2", type=_range, default=(0.3, 3.0),
                   help="innovation variance range LO,HI (default: 0.3,3)")
    s.add_argument("--nj", type=_positive_int, default=50, help="training series per group")
    s.add_argument("--N", type=_positive_int, default=500, help="series length")
    s.add_argument("--reps", type=_positive_int, default=100, help="Monte Carlo replicates")
    s.add_argument("--test-per-group", type=_positive_int, default=50)
    s.add_argument("--seed", type=int, default=20240101)
    s.add_argument("--methods", type=lambda v: v.split(","), default=list(METHODS),
                   help="comma-separated subset of " + ",".join(METHODS))
    s.add_argument("--tapers", type=_positive_int, default=7)
    s.add_argument("--L-grid", type=_int_list, default=list(range(2, 9)))
    s.add_argument("--alphas", type=_float_list, default=list(DEFAULT_ALPHAS))
    s.add_argument("--identical-groups", action="store_true",
                   help="give every group the first group's parameters (chance-level check)")
    s.add_argument("--full-grid", action="store_true",
                   help="run all 27 settings (long); --out is then a directory")
    s.add_argument("--workers", type=_positive_int,
                   help="worker processes (default: $CEPFDA_THREADS or 1)")
    s.add_argument("--out", help="report file (JSON)")
    s.add_argument("--plot-dir", help="directory for the rates table and figure")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("baseline", help="Kullback-Leibler / Chernoff template classifier")
    b.add_argument("train", help="labelled training corpus")
    b.add_argument("test", help="test corpus; labels optional")
    b.add_argument("--measure", choices=("kl", "chernoff"), default="kl")
    tune = b.add_mutually_exclusive_group()
    tune.add_argument("--alpha", type=float, default=0.5, help="Chernoff alpha (default 0.5)")
    tune.add_argument("--tune", action="store_true", help="choose alpha by leave-one-out")
    b.add_argument("--alphas", type=_float_list, default=list(DEFAULT_ALPHAS))
    b.add_argument("--span", type=_span, default="auto")
    b.add_argument("--out", help="predictions file")
    b.set_defaults(func=cmd_baseline)

    g = sub.add_parser("gait", help="preprocess local stride-interval files into a corpus")
    g.add_argument("directory", help="directory of stride files (time, interval per line)")
    g.add_argument("--pattern", default="*.ts")
    g.add_argument("--window", type=_positive_int, default=11, help="running-median width")
    g.add_argument("--n-sd", type=float, default=3.0, help="outlier threshold in SDs")
    g.add_argument("--out", required=True, help="corpus file to write")
    g.set_defaults(func=cmd_gait)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        return args.func(args)
    except (IllConditionedError, DegenerateSpectrumError, np.linalg.LinAlgError) as exc:
        print(f"cepfda {stage}: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, CepfdaError, OSError) as exc:
        print(f"cepfda {stage}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

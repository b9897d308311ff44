"""Command-line interface: ``ordinal-aa <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import evaluation, io, solvers, synthetic
from .exceptions import OrdinalAAError

logger = logging.getLogger("ordinal_aa")


def _stamp(args, **extra):
    out = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key not in ("command", "func", "verbose"):
            out[key] = value
    out.update(extra)
    return out


def _fit_config(args, K=None):
    return solvers.FitConfig(
        K=args.k if K is None else K,
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        early_stop_patience=args.patience,
        early_stop_rel_tol=args.rel_tol,
        warm_start_aa_epochs=args.warm_start,
        restarts=args.restarts,
        seed=args.seed,
        nan_reinit_limit=args.nan_reinit_limit,
        n_jobs=args.jobs,
    )


def _add_fit_options(parser, with_k=True):
    if with_k:
        parser.add_argument("--k", type=int, required=True, help="number of archetypes")
    parser.add_argument("--restarts", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=None, help="learning rate (method default if omitted)")
    parser.add_argument("--max-epochs", type=int, default=5000)
    parser.add_argument("--patience", type=int, default=50)
    parser.add_argument("--rel-tol", type=float, default=1e-6)
    parser.add_argument("--warm-start", type=int, default=25, help="AA epochs before ordinal fitting")
    parser.add_argument("--nan-reinit-limit", type=int, default=5)
    parser.add_argument("--jobs", type=int, default=None, help=f"parallel restarts (default ${solvers.THREADS_ENV} or 1)")


def cmd_synth(args):
    cfg = synthetic.SynthConfig(
        N=args.n,
        M=args.m,
        K_true=args.k,
        p=args.p,
        response_bias=args.bias,
        sigma_gt=args.sigma,
        dirichlet_alpha=args.dirichlet_alpha,
        bias_spread=args.bias_spread,
        seed=args.seed,
    )
    data = synthetic.generate(cfg)
    out = Path(args.out)
    io.save_csv(out, data.X)
    truth = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    io.save_ground_truth(truth, data)
    print(f"wrote {out} ({data.X.n_respondents} respondents x {data.X.n_questions} questions, p={data.X.p})")
    print(f"wrote {truth}")


def cmd_fit(args):
    X = io.load_csv(args.data)
    model = solvers.fit(args.method, X, _fit_config(args))
    io.save_model(model, args.out_model)
    if args.out_trace:
        rows = [{"epoch": i, "loss": float(v)} for i, v in enumerate(model.loss_trace)]
        io.write_table(args.out_trace, rows, _stamp(args, restart=model.restart_index), columns=["epoch", "loss"])
    pred = evaluation.predict_matrix(model, X)
    rmse = evaluation.rmse(pred[X.mask], X.values[X.mask])
    print(f"method={model.method} K={model.K} restart={model.restart_index} "
          f"loss={model.final_loss!r} ({model.loss_kind}) epochs={model.epochs_run} rmse={rmse:.6g}")


def cmd_sweep(args):
    X = io.load_csv(args.data)
    if args.k_min < 1 or args.k_max < args.k_min:
        raise OrdinalAAError("need 1 <= k-min <= k-max")
    plan = evaluation.CorruptionPlan.build(X, args.fraction, args.seed) if args.fraction else None
    report = evaluation.stability_sweep(
        X, args.method, range(args.k_min, args.k_max + 1), _fit_config(args, K=args.k_min), corruption=plan
    )
    io.write_table(args.out_report, report.rows(), _stamp(args))
    for k, loss in zip(report.ks, report.best_losses()):
        print(f"K={k} best_loss={loss!r} nmi_stability={report.stability[k]:.4f}")


def cmd_corrupt_eval(args):
    X = io.load_csv(args.data)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    plan = evaluation.CorruptionPlan.build(X, args.fraction, args.seed)
    result = evaluation.corruption_experiment(X, plan, methods, _fit_config(args))
    io.write_table(args.out_report, result.rows(), _stamp(args))
    for row in result.rows():
        print(f"{row['method']}: rmse={row['rmse']:.6g} ({row['status']})")


def cmd_export_archetypes(args):
    model = io.load_model(args.model)
    X = io.load_csv(args.data)
    ids = io.read_dataset(args.data)[1]
    prof = evaluation.archetype_profiles(model, X)
    rows = []
    for m, qid in enumerate(ids):
        row = {"question": qid}
        for k in range(model.K):
            row[f"archetype_{k + 1}"] = float(prof.values[m, k])
            row[f"archetype_{k + 1}_response"] = float(prof.ordinal[m, k])
        rows.append(row)
    io.write_table(args.out, rows, _stamp(args, method=model.method, K=model.K))
    print(f"wrote {len(rows)} question profiles for {model.K} archetypes to {args.out}")


def cmd_export_bias(args):
    model = io.load_model(args.model)
    if model.method == "OAA":
        alpha = model.boundary.alpha
        rows = [{"level": j + 1, "alpha": float(a), "alpha_unit": float(u)}
                for j, (a, u) in enumerate(zip(alpha, evaluation.unit_scale_alpha(model)))]
        io.write_table(args.out, rows, _stamp(args, method=model.method))
    else:
        summary = evaluation.response_bias_summary(model, normalized=args.unit_scale)
        io.write_table(args.out, summary.rows(), _stamp(args, method=model.method))
        if args.out_subjects:
            rows = [{"respondent": n, "level": j + 1, "alpha": float(a)}
                    for n, vec in enumerate(summary.alpha) for j, a in enumerate(vec)]
            io.write_table(args.out_subjects, rows, _stamp(args, method=model.method))
    print(f"wrote {args.out}")


def cmd_nmi(args):
    a = io.load_model(args.model_a)
    b = io.load_model(args.model_b)
    print(repr(evaluation.nmi(a.S.constrained, b.S.constrained)))


def build_parser():
    parser = argparse.ArgumentParser(prog="ordinal-aa", description="Archetypal analysis for ordinal survey data")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--n", type=int, default=1000, help="respondents")
    p.add_argument("--m", type=int, default=20, help="questions")
    p.add_argument("--k", type=int, default=3, help="true archetypes")
    p.add_argument("--p", type=int, default=5, help="scale levels")
    p.add_argument("--bias", action="store_true", help="per-respondent boundaries")
    p.add_argument("--sigma", type=float, default=0.1, help="latent noise scale")
    p.add_argument("--dirichlet-alpha", type=float, default=0.5)
    p.add_argument("--bias-spread", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="ground-truth sidecar (default <out>.truth.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit one model")
    p.add_argument("--method", type=str.upper, choices=solvers.METHODS, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-trace", default=None)
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="loss and NMI stability across K")
    p.add_argument("--method", type=str.upper, choices=solvers.METHODS, required=True)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--fraction", type=float, default=None, help="also run the corruption experiment per K")
    _add_fit_options(p, with_k=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("corrupt-eval", help="RMSE on corrupted entries")
    p.add_argument("--methods", default="aa,tsaa,oaa,rboaa")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--data", required=True)
    p.add_argument("--out-report", required=True)
    _add_fit_options(p)
    p.set_defaults(func=cmd_corrupt_eval)

    p = sub.add_parser("export-archetypes", help="per-question archetype profiles")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_archetypes)

    p = sub.add_parser("export-bias", help="per-level distribution of learned category midpoints")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-subjects", default=None, help="long table of every respondent's midpoints")
    p.add_argument("--unit-scale", action="store_true", help="midpoints on each respondent's [0, 1] scale")
    p.set_defaults(func=cmd_export_bias)

    p = sub.add_parser("nmi", help="NMI between the weight matrices of two models")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.set_defaults(func=cmd_nmi)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OrdinalAAError, OSError, ValueError) as exc:
        print(f"ordinal-aa {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 ok, 1 input error, 2 solver did not converge, 3 a verification
check failed.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from typing import List, Optional, Sequence

import numpy as np

from . import expansion, learn, sparse, verify
from .fileio import (
    InputError,
    load_config,
    load_model,
    read_csv,
    save_model,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _fmt(v: float) -> str:
    return "%.17g" % v


def parse_schedule(text: str) -> tuple:
    """``"1,2,4"`` or ``"1:16"`` (inclusive range) or a mix, e.g. ``"1:4,8,16"``."""
    out: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                lo, hi = part.split(":", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise InputError(f"--schedule: cannot read {part!r}") from None
    if not out:
        raise InputError("--schedule: empty")
    return tuple(out)


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _config(args):
    cfg = load_config(args.config)
    schedule = parse_schedule(args.schedule) if getattr(args, "schedule", None) else None
    return cfg.with_overrides(schedule=schedule, seed=getattr(args, "seed", None))


def cmd_train(args) -> int:
    cfg = _config(args)
    if not cfg.train.loss.differentiable:
        raise InputError("hinge loss is for reporting only; train with smoothed-hinge")
    data = read_csv(args.data, target=args.target)
    if data.dim != cfg.family.dim:
        raise InputError(f"{args.data}: {data.dim} feature columns, kernel has dimension {cfg.family.dim}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg.schedule == (1,):
            models = [learn.solve(cfg.family, data.points, data.targets, cfg.train)]
        else:
            models = learn.homotopy(cfg.family, data.points, data.targets, cfg.train)
    for w in caught:
        if issubclass(w.category, learn.IllConditionedWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    if len(models) > 1:
        for m, model in zip(cfg.schedule, models):
            print(f"stage m={m} p={_fmt(model.p)} risk={_fmt(model.risk)} "
                  f"iterations={model.iterations} converged={model.converged}")
    model = models[-1]
    save_model(args.out, model, cfg.schedule, cfg.train)
    print(f"risk={_fmt(model.risk)}")
    print(f"norm={_fmt(model.norm)}")
    print(f"iterations={model.iterations}")
    ok = all(m.converged for m in models)
    if not ok:
        print("warning: solver did not reach tolerance; best iterate saved", file=sys.stderr)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _features(args, dim: int) -> tuple:
    """Points for prediction plus targets when the file carries them."""
    raw = read_csv(args.data, has_target=False, allow_duplicates=True)
    if args.target is not None or raw.dim == dim + 1:
        data = read_csv(args.data, target=args.target, allow_duplicates=True)
        if data.dim != dim:
            raise InputError(f"{args.data}: {data.dim} feature columns, model has dimension {dim}")
        return data.points, data.targets
    if raw.dim != dim:
        raise InputError(f"{args.data}: {raw.dim} columns, model has dimension {dim}")
    return raw.points, None


def cmd_predict(args) -> int:
    model, _ = load_model(args.model)
    X, _ = _features(args, model.family.dim)
    scores = np.atleast_1d(learn.predict(model, X))
    lines = ["score,label" if args.classify else "score"]
    for s in scores:
        row = _fmt(s)
        if args.classify:
            row += ",%d" % (1 if s >= 0 else -1)
        lines.append(row)
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    X, Y = _features(args, model.family.dim)
    if Y is None:
        raise InputError(f"{args.data}: evaluation needs a target column")
    scores = np.atleast_1d(learn.predict(model, X))
    loss = model.loss
    mean_loss = float(np.mean(loss.value(Y, scores)))
    rows = [("n", str(Y.size)), (f"loss[{loss.kind}]", _fmt(mean_loss)),
            ("regularized_risk", _fmt(mean_loss + model.reg.value(model.norm)))]
    if np.all(np.isin(Y, (-1.0, 1.0))):
        hinge = learn.Loss("hinge")
        rows.append(("loss[hinge]", _fmt(float(np.mean(hinge.value(Y, scores))))))
        labels = np.where(scores >= 0, 1.0, -1.0)
        rows.append(("error_rate", _fmt(float(np.mean(labels != Y)))))
    _write("".join(f"{k},{v}\n" for k, v in rows), args.out)
    return EXIT_OK


def cmd_kernel(args) -> int:
    cfg = load_config(args.config)
    fam = cfg.family
    order = args.order
    if order < 1:
        raise InputError("--order must be a positive integer")
    raw = read_csv(args.data, has_target=False, allow_duplicates=True)
    need = 2 * order * fam.dim
    if raw.dim != need:
        raise InputError(f"{args.data}: expected {need} columns (x and {2 * order - 1} points "
                         f"of dimension {fam.dim}), found {raw.dim}")
    if args.closed_form and (order != 1 or not fam.has_closed_form):
        raise InputError("--closed-form needs --order 1 and a family with a closed form")
    lines = ["value"]
    for row in raw.points:
        pts = row.reshape(2 * order, fam.dim)
        if order == 1:
            v = expansion.kernel_eval(fam, pts[0], pts[1], closed_form=args.closed_form)
        else:
            v = expansion.kstar_eval(fam, pts[0], pts[1:])
        lines.append(_fmt(v))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_sparse(args) -> int:
    cfg = _config(args)
    data = read_csv(args.data, target=args.target)
    fam = cfg.family
    if data.dim != fam.dim:
        raise InputError(f"{args.data}: {data.dim} feature columns, kernel has dimension {fam.dim}")
    sp = cfg.sparse
    problem = sparse.build_design(fam, data.points, data.targets, cfg.train.reg.sigma,
                                  sp["weighting"])
    ista_cfg = sparse.IstaConfig(step=sp.get("step"), tol=float(sp["tol"]),
                                 max_iters=int(sp["max_iters"]),
                                 accelerated=bool(sp["accelerated"]), seed=cfg.train.seed)
    res = sparse.ista_solve(problem, ista_cfg)
    a = res.xi / np.sqrt(problem.lam)
    idx = fam.enumeration.indices
    lines = ["n,index,xi,a"]
    for n in np.flatnonzero(res.xi):
        lines.append(f"{n},{'-'.join(str(int(i)) for i in idx[n])},{_fmt(res.xi[n])},{_fmt(a[n])}")
    if args.out is not None:
        _write("\n".join(lines) + "\n", args.out)
    print(f"objective={_fmt(res.objective)}")
    print(f"iterations={res.iterations}")
    print(f"nonzeros={np.count_nonzero(res.xi)}")
    print(f"subgradient_residual={_fmt(res.residual)}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    cfg = _config(args)
    results = verify.run_checks(cfg)
    print(verify.format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pnorm-rkbs",
                                 description="Kernel learning in p-norm spaces of expansion coefficients.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write a model file")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target")
    p.add_argument("--schedule", help="homotopy stages m, e.g. 1:16 or 1,2,4")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="scores (and labels) for the points of a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--target")
    p.add_argument("--classify", action="store_true", help="add sign labels; a score of 0 maps to +1")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="risk of a model on held-out data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--target")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kernel", help="evaluate K or K^{*(2m-1)} row by row")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--order", type=int, default=1, help="m; rows hold x followed by 2m-1 points")
    p.add_argument("--closed-form", action="store_true")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("sparse", help="weighted-l1 least squares by ISTA/FISTA")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--target")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sparse)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, expansion.DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``hivqcnn VERB [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data, harness, nqe, presets

log = logging.getLogger("hivqcnn")


def _config(args) -> harness.HarnessConfig:
    cfg = harness.load_config(args.config)
    if getattr(args, "seeds", None) is not None:
        cfg.set("run.seeds", args.seeds)
    if getattr(args, "jobs", None) is not None:
        cfg.set("run.jobs", args.jobs)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise harness.HarnessError(f"--set expects KEY=VAL, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v.strip())
    return cfg


def _snapshot(args) -> data.DatasetSnapshot:
    if not args.snapshot:
        raise harness.HarnessError("--snapshot is required (create one with `hivqcnn preprocess`)")
    return data.DatasetSnapshot.load(args.snapshot)


def _condition(args, cfg) -> harness.ExperimentCondition:
    if not args.condition:
        raise harness.HarnessError("--condition is required (e.g. NQE-11 or PCA-3)")
    found = harness.enumerate_conditions(cfg, args.arm, {"id": args.condition})
    if not found:
        raise harness.HarnessError(f"unknown condition {args.condition!r}")
    return found[0]


def _out(args, default: str) -> Path:
    return Path(args.out or default)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = _config(args)
    if args.synthetic:
        snap = data.synthetic_snapshot(int(cfg["data.synthetic_per_class"]), int(cfg["data.balance_seed"]))
    else:
        snap = data.build_snapshot(args.data_dir, int(cfg["data.balance_seed"]))
    path = snap.save(_out(args, "out/snapshot.json"))
    print(f"origin={snap.origin} " + " ".join(f"{k}={v}" for k, v in snap.counts.items()))
    if snap.conflicts:
        print(f"label conflicts resolved by first occurrence: {snap.conflicts}")
    print(f"snapshot written to {path}")
    return 0


def cmd_train_nqe(args) -> int:
    cfg = _config(args)
    snap = _snapshot(args)
    cond = _condition(args, cfg)
    if cond.arm != "NQE":
        raise harness.HarnessError(f"{cond.id} uses PCA features and has no front-end")
    out = _out(args, "out/nqe")
    seed = args.seed
    fe = harness.train_front_end(snap, cfg, cond.n_qubits, cond.embedding, args.arm, seed, cache_dir=out)
    key = presets.nqe_key(cond.n_qubits, cond.embedding)
    path = fe.net.save(out / f"{key}-{args.arm}-s{seed}.net.json")
    td = fe.trace_distance
    print(f"{key} ({args.arm}, seed {seed}): train D {td['train_before']:.4f} -> {td['train_after']:.4f}, "
          f"test D {td['test_before']:.4f} -> {td['test_after']:.4f}")
    print(f"network written to {path}")
    return 0


def cmd_train_qcnn(args) -> int:
    cfg = _config(args)
    snap = _snapshot(args)
    cond = _condition(args, cfg)
    out = _out(args, "out/qcnn")
    sr, res = harness.run_seed_full(cond, args.seed, snap, cfg, cache_dir=out / "nqe-cache")
    stem = out / f"{cond.id}-{args.arm}-s{args.seed}"
    res.save(stem.with_suffix(".params.json"))
    res.write_history(stem.with_suffix(".history.csv"))
    print(f"{cond.id} ({args.arm}, seed {args.seed}): test accuracy {sr.accuracy:.4f}, "
          f"train linear loss {sr.linear_loss_final:.4f} (Helstrom bound {sr.helstrom_bound:.4f})")
    print(f"parameters written to {stem.with_suffix('.params.json')}")
    return 0


def _finish(rows, args, cfg, default) -> int:
    paths = harness.write_reports(rows, _out(args, default), cfg)
    print(harness.rows_to_markdown(rows, cfg), end="")
    print("reports: " + ", ".join(str(p) for p in paths.values()))
    bad = [s for r in rows for s in r.seeds if s.error]
    violated = [s for r in rows for s in r.seeds if not s.error and (not s.helstrom_ok or s.contractive_ok is False)]
    for s in bad:
        print(f"FAILED {s.condition_id} seed {s.seed}: {s.error}", file=sys.stderr)
    for s in violated:
        print(f"CHECK VIOLATED {s.condition_id} seed {s.seed}", file=sys.stderr)
    return 1 if bad or violated else 0


def cmd_run(args) -> int:
    cfg = _config(args)
    snap = _snapshot(args)
    cond = _condition(args, cfg)
    out = _out(args, f"out/{cond.id}-{args.arm}")
    row = harness.run_condition(cond, snap, cfg, cache_dir=out / "nqe-cache")
    return _finish([row], args, cfg, str(out))


def cmd_run_matrix(args) -> int:
    cfg = _config(args)
    snap = _snapshot(args)
    filters = harness.parse_filters(args.filter or [])
    arms = harness.NOISE_ARMS if args.arm == "both" else (args.arm,)
    conds = [c for arm in arms for c in harness.enumerate_conditions(cfg, arm, filters)]
    if not conds:
        raise harness.HarnessError("the filters select no conditions")
    out = _out(args, "out/matrix")
    rows = harness.run_matrix(conds, snap, cfg, jobs=int(cfg["run.jobs"]), cache_dir=out / "nqe-cache")
    code = _finish(rows, args, cfg, str(out))
    if args.baselines:
        specs = [b for b in presets.BASELINES
                 if not b.skipped and (not filters.get("qubits") or str(b.n_qubits) in filters["qubits"].split(","))]
        brows = harness.run_baselines(specs, snap, cfg)
        (out / "baselines.csv").write_text(harness.baselines_to_csv(brows))
        print(f"baselines: {out / 'baselines.csv'}")
    return code


def cmd_report(args) -> int:
    cfg = _config(args)
    src = Path(args.results)
    try:
        rows = harness.rows_from_json(src.read_text())
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as e:
        raise harness.HarnessError(f"cannot read results from {src}: {e}") from None
    paths = harness.write_reports(rows, _out(args, str(src.parent)), cfg)
    print(harness.rows_to_markdown(rows, cfg), end="")
    print("reports: " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all
    return 0 if run_all(verbose=not args.quiet) else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hivqcnn", description="QCNN with neural quantum embedding on HIV cleavage data")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, snapshot=True, condition=False, arms=harness.NOISE_ARMS):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VAL", help="override one config key")
        sp.add_argument("--out", help="output file or directory")
        if snapshot:
            sp.add_argument("--snapshot", help="dataset snapshot from `preprocess`")
            sp.add_argument("--arm", choices=arms, default="noiseless")
            sp.add_argument("--seeds", type=int, help="number of seeds (0..N-1)")
        if condition:
            sp.add_argument("--condition", help="condition id, e.g. NQE-11 or PCA-3")

    sp = sub.add_parser("preprocess", help="build a dataset snapshot")
    common(sp, snapshot=False)
    sp.add_argument("--data-dir", help=f"directory with the four source files (default ${data.DATA_ENV})")
    sp.add_argument("--synthetic", action="store_true", help="write a labelled synthetic stand-in instead")
    sp.set_defaults(fn=cmd_preprocess)

    for name, fn, text in (("train-nqe", cmd_train_nqe, "train the NQE front-end of one condition"),
                           ("train-qcnn", cmd_train_qcnn, "train the QCNN of one condition for one seed")):
        sp = sub.add_parser(name, help=text)
        common(sp, condition=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("run", help="run one condition over all seeds")
    common(sp, condition=True)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("run-matrix", help="run the condition matrix")
    common(sp, arms=(*harness.NOISE_ARMS, "both"))
    sp.add_argument("--filter", action="append", metavar="KEY=VAL",
                    help=f"subset by {', '.join(harness.FILTER_KEYS)}; comma-separate alternatives")
    sp.add_argument("--jobs", type=int, help="parallel worker processes")
    sp.add_argument("--baselines", action="store_true", help="also run the classical counterparts")
    sp.set_defaults(fn=cmd_run_matrix)

    sp = sub.add_parser("report", help="rebuild CSV/JSON/Markdown from a results.json")
    common(sp, snapshot=False)
    sp.add_argument("results")
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("selftest", help="run the quick invariant suites")
    sp.add_argument("-q", "--quiet", action="store_true")
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (harness.HarnessError, data.DataError, nqe.NQEError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

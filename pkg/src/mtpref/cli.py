"""Command-line entry point: ``mtpref <subcommand> [flags]``.

Exit codes: 0 success, 1 I/O error, 2 validation/schema error, 3 numerical
failure. Diagnostics go to stderr; stdout carries summary lines only.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import calibration, ingest, metaeval, pairs, synth, trainer
from .errors import ConfigError, MtprefError, NumericalError, SchemaError
from .scorer import DEFAULT_DIM, init_params, load_params, save_params, score_instances
from .seeding import derive_seed

log = logging.getLogger("mtpref")


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            out[key.strip()] = value.strip()
    return out


def _parse_scale_map(text, what):
    out = {}
    if not text:
        return out
    for item in text.split(","):
        name, sep, value = item.partition("=")
        if not sep or name.strip() not in ingest.SCALE_RANGES:
            raise ConfigError(f"bad {what} entry {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad {what} value {value!r}") from None
    return out


def _write_rows(rows, path, fmt):
    if fmt == "csv":
        ingest.write_report(rows, path)
    else:
        ingest.write_jsonl(
            ({"lang_pair": lp, "statistic": s, "value": v, "p_value": p} for lp, s, v, p in rows), path
        )


def cmd_pairs(args):
    thresholds = pairs.parse_thresholds(args.thresholds)
    margin_scale = _parse_scale_map(args.margin_scale, "margin scale")
    instances, ratings = ingest.load_ratings(args.ratings, args.input_format)
    skipped = pairs.count_unrated(instances, ratings)
    built = pairs.build_pairs(instances, ratings, thresholds, margin_scale)
    out = args.out or "pairs.jsonl"
    pairs.write_pairs(built, out)
    if not built:
        print("warning: no pairs cleared the thresholds", file=sys.stderr)
    print(f"pairs: {len(built)}")
    print(f"skipped: {skipped}")
    return 0


def _train_config(args):
    values = read_config(args.config) if args.config else {}
    if args.ablation:
        values.update({k: str(v) for k, v in trainer.ABLATIONS[args.ablation].items()})
    flags = {
        "seed": args.seed,
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "lam": args.lam,
        "optimizer": args.optimizer,
        "max_steps": args.max_steps,
        "hidden": args.hidden,
        "dim": args.dim,
    }
    values.update({k: str(v) for k, v in flags.items() if v is not None})
    return trainer.TrainConfig.from_mapping(values)


def cmd_train(args):
    config = _train_config(args)
    loaded = pairs.load_pairs(args.pairs)
    out_model = args.out_model or args.out or "model.json"
    if config.epochs == 0 or config.max_steps == 0:
        params, history = init_params(config.seed, config.dim, config.hidden), trainer.TrainHistory()
    else:
        if not loaded:
            raise SchemaError(f"{args.pairs}: no pairs")
        batch = trainer.featurize_pairs(loaded, config.dim)
        params, history = trainer.train(batch, config)
    save_params(params, out_model)
    if args.out_history:
        history.to_csv(args.out_history)
    if args.plot_dir and history:
        from .plots import history_figure

        Path(args.plot_dir).mkdir(parents=True, exist_ok=True)
        history_figure(history, Path(args.plot_dir) / "history.png")
    print(f"steps: {len(history)}")
    if history:
        last = history[-1]
        print(f"final: bt={last.bt:.6g} reg={last.reg:.6g} total={last.total:.6g}")
        print(f"reward: mean={last.reward_mean:.6g} std={last.reward_std:.6g}")
    return 0


def cmd_score(args):
    if args.tau is not None and not args.tau > 0:
        raise ConfigError("--tau must be > 0")
    params = load_params(args.model)
    if params.dim <= 6:
        raise SchemaError(f"model D={params.dim} is too small for the feature extractor")
    instances = ingest.load_instances(args.instances, args.input_format)
    if not instances:
        raise SchemaError(f"{args.instances}: no instances")
    rewards = score_instances(params, instances)
    calibrated = None
    if args.calibrate or args.tau is not None:
        pools = [i.lang_pair if args.pool == "lang_pair" else "global" for i in instances]
        calibrated, results = calibration.calibrate_pools(rewards, pools, args.bins, tau=args.tau)
        cal_path = args.out_calibration or str(Path(args.out or "scores.jsonl").with_suffix(".calibration.json"))
        calibration.write_calibration(results, cal_path)
        for pool, res in sorted(results.items()):
            print(f"calibration {pool}: tau={res.tau:.6g} entropy={res.entropy:.6g}")
        if args.plot_dir:
            from .plots import calibration_figure

            Path(args.plot_dir).mkdir(parents=True, exist_ok=True)
            for pool, res in sorted(results.items()):
                mask = np.array([p == pool for p in pools])
                calibration_figure(rewards[mask], res, Path(args.plot_dir) / f"calibration_{pool}.png", pool)
    ingest.write_scores(instances, rewards, args.out or "scores.jsonl", calibrated)
    print(f"scored: {len(instances)}")
    return 0


def _metric_maps(path, field):
    out = {}
    for rec in ingest.load_scores(path):
        if field not in rec:
            raise SchemaError(f"{path}: record {rec['segment_id']}/{rec['system_id']} has no {field!r}")
        out.setdefault(rec["lang_pair"], {})[(rec["segment_id"], rec["system_id"])] = float(rec[field])
    return out


def cmd_eval(args):
    metric = _metric_maps(args.scores, args.field)
    other = _metric_maps(args.perm_both, args.field) if args.perm_both else None
    human = ingest.load_human(args.human)
    rows = []
    any_overlap = False
    for lp in sorted(set(metric) & set(human)):
        sm = ingest.ScoreMatrix.from_records(lp, metric[lp], human[lp])
        if sm.comparable.sum() == 0:
            continue
        any_overlap = True
        sm_b = None
        if other is not None:
            if lp not in other:
                raise SchemaError(f"--perm-both file has no scores for {lp}")
            sm_b = ingest.ScoreMatrix.from_records(lp, other[lp], human[lp])
            if sm_b.systems != sm.systems or sm_b.segments != sm.segments:
                raise SchemaError(f"--perm-both scores for {lp} cover different keys")
        seed = derive_seed(args.seed, "eval", lp)
        if args.level in ("system", "both") and len(sm.systems) >= 2:
            acc = metaeval.system_pairwise_accuracy(sm)
            p = None
            if sm_b is not None:
                p = metaeval.perm_both(
                    sm.metric.T, sm_b.metric.T, sm.human.T, metaeval.system_accuracy_items,
                    args.iterations, derive_seed(seed, "system"), args.workers,
                )
            rows.append((lp, "system_acc", acc, p))
            if args.spa:
                spa = metaeval.soft_pairwise_accuracy(sm, args.iterations, derive_seed(seed, "spa"), args.workers)
                rows.append((lp, "spa", spa, None))
            if args.plot_dir:
                from .plots import system_scores_figure

                Path(args.plot_dir).mkdir(parents=True, exist_ok=True)
                m, h = metaeval.system_scores(sm)
                system_scores_figure(m, h, sm.systems, Path(args.plot_dir) / f"systems_{lp}.png", lp)
        if args.level in ("segment", "both"):
            seg_pairs = metaeval.segment_pairs(sm)
            if len(seg_pairs):
                acc, eps = metaeval.tie_calibrated_accuracy(seg_pairs)
                p = None
                if sm_b is not None:
                    p = metaeval.perm_both(
                        sm.metric.T, sm_b.metric.T, sm.human.T, metaeval.segment_accuracy_items(eps.epsilon),
                        args.iterations, derive_seed(seed, "segment"), args.workers,
                    )
                rows.append((lp, "segment_acc_eq", acc, p))
                rows.append((lp, "segment_epsilon", eps.epsilon, None))
    if not any_overlap:
        raise SchemaError("scores and human ratings share no (segment, system) keys")
    _write_rows(rows, args.out or "report.csv", args.format)
    for lp, stat, value, p in rows:
        tail = "" if p is None else f" p={p:.4g}"
        print(f"{lp} {stat} {value:.6g}{tail}")
    return 0


def _load_aces_items(path):
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                items.append(
                    metaeval.AcesItem(rec["phenomenon"], float(rec["good_score"]), float(rec["incorrect_score"]))
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"bad ACES record ({exc})", lineno) from None
            except MtprefError as exc:
                raise SchemaError(str(exc), lineno) from None
    return items


def _parse_taus(text):
    out = {}
    for item in text.split(","):
        name, sep, value = item.partition("=")
        if not sep or name.strip() not in metaeval.ACES_WEIGHTS:
            raise SchemaError(f"bad tau entry {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise SchemaError(f"bad tau value {value!r}") from None
    return out


def cmd_aces(args):
    if bool(args.items) == bool(args.taus):
        raise ConfigError("give exactly one of --items or --taus")
    taus = metaeval.aces_by_category(_load_aces_items(args.items)) if args.items else _parse_taus(args.taus)
    composite = metaeval.aces_composite(taus)
    out = args.out or "aces.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "weight", "tau"])
        for p in metaeval.PHENOMENA:
            writer.writerow([p, metaeval.ACES_WEIGHTS[p], repr(float(taus[p]))])
        writer.writerow(["ACES", "", repr(composite)])
    print(f"ACES: {composite:.6g}")
    return 0


def cmd_synth(args):
    spec = synth.SynthSpec(
        kind=args.kind,
        size=args.size,
        noise=args.noise,
        seed=args.seed,
        n_systems=args.n_systems,
        margin_scale=args.margin_scale,
    )
    spec.validate()
    data = synth.gen(spec)
    out = args.out or f"{args.kind}.jsonl"
    if args.kind == "separable_pairs":
        pairs.write_pairs(data, out)
    elif args.kind in ("skewed_rewards", "centered_rewards"):
        ingest.write_jsonl(({"reward": float(r)} for r in data), out)
    elif args.kind == "score_matrix":
        recs = []
        for i, sys_id in enumerate(data.systems):
            for j, seg in enumerate(data.segments):
                recs.append(
                    {
                        "segment_id": seg,
                        "system_id": sys_id,
                        "lang_pair": data.lang_pair,
                        "reward": float(data.metric[i, j]),
                        "human": float(data.human[i, j]),
                    }
                )
        ingest.write_jsonl(recs, out)
    else:
        ingest.write_ratings(*data, out)
    print(f"wrote {args.kind} to {out}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master random seed (default 0)")
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--out", help="output path")
    common.add_argument("--format", choices=("jsonl", "csv"), default="csv", help="report format for eval")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="mtpref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pairs", parents=[common], help="build preference pairs from ratings")
    p.add_argument("--ratings", required=True, help="instance/rating file")
    p.add_argument("--input-format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--thresholds", default="DA=25,MQM=0.1", help="per-scale rating gap, e.g. DA=25,MQM=0.1")
    p.add_argument("--margin-scale", default="", help="per-scale margin multiplier, e.g. DA=0.01")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", parents=[common], help="train a scorer on preference pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--ablation", choices=tuple(trainer.ABLATIONS), help="preset for reg/margin switches")
    p.add_argument("--out-model")
    p.add_argument("--out-history", help="per-step CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--dim", type=int, help=f"feature dimension (default {DEFAULT_DIM})")
    p.add_argument("--hidden", type=int)
    p.add_argument("--plot-dir", help="write training figures here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common], help="score instances, optionally calibrated")
    p.add_argument("--model", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--input-format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--calibrate", action="store_true", help="entropy-guided sigmoid calibration")
    p.add_argument("--tau", type=float, help="fixed temperature (implies --calibrate)")
    p.add_argument("--pool", choices=("lang_pair", "global"), default="lang_pair", help="calibration pool")
    p.add_argument("--bins", type=int, default=calibration.DEFAULT_BINS)
    p.add_argument("--out-calibration", help="calibration JSON path")
    p.add_argument("--plot-dir", help="write calibration figures here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", parents=[common], help="meta-evaluate scores against human ratings")
    p.add_argument("--scores", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--level", choices=("system", "segment", "both"), default="both")
    p.add_argument("--field", choices=("reward", "calibrated"), default="reward")
    p.add_argument("--spa", action="store_true", help="also report soft pairwise accuracy")
    p.add_argument("--perm-both", help="second score file for Perm-Both p-values")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot-dir", help="write system scatter plots here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("aces", parents=[common], help="ACES tau-like scores and composite")
    p.add_argument("--items", help="JSONL of {phenomenon, good_score, incorrect_score}")
    p.add_argument("--taus", help="direct per-category taus, e.g. addition=0.75,...")
    p.set_defaults(func=cmd_aces)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--kind", choices=synth.KINDS, required=True)
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--n-systems", type=int, default=4)
    p.add_argument("--margin-scale", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "train" and args.seed is None:
        # train lets a config file supply the seed
        args.seed = 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}; offending pairs: {', '.join(exc.pair_ids) or 'n/a'}", file=sys.stderr)
        return 3
    except MtprefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

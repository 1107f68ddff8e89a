"""Command line surface.

Subcommands wire the library into reproducible batch runs:

    gen        synthesize a labeled corpus and write train/test files
    transform  apply semantics-preserving transforms to a corpus file
    train      fit a detector (original | conventional | zigzag)
    eval       score a model file against a corpus file, bucket by transform
    compare    check the robustness ordering across report files

Every run writes a resolved-config JSON next to its primary output so
any artifact can be regenerated from the file sitting beside it.  The
seed resolution order is: ZZ_SEED environment variable, then --seed,
then a config-file `seed` entry, then 0.

Exit codes: 0 success, 2 usage error, 3 data error, 4 training divergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import CorpusError, augment_corpus, generate_synthetic, load_corpus, save_corpus
from .encoding import EncodingError, default_length
from .evaluation import EvaluationError, compare_reports, evaluate_detector, load_report
from .fragments import GRANULARITIES, extract_corpus_fragments
from .nn.kernels import KernelError
from .nn.model import ModelError, load_model, model_fingerprint, save_model
from .nn.optim import TrainingDiverged
from .training import TrainConfig, TrainingError, save_trace, train_original, train_zigzag
from .transforms import TransformError, resolve_kinds

log = logging.getLogger("zigzag")

_INT_KEYS = {
    "seed", "count", "beta", "e1", "e2", "e3", "batch_size",
    "emb_dim", "feature_dim", "head_hidden", "rnn_hidden", "length",
}
_FLOAT_KEYS = {"vuln", "delta", "lr", "tau_disc", "tau_loss"}
_STR_KEYS = {"ct", "mode", "granularity", "encoder", "optimizer", "mine_with"}
_CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

_TRAIN_KEYS = (
    "delta", "beta", "e1", "e2", "e3", "batch_size", "lr",
    "tau_disc", "tau_loss", "optimizer", "mine_with",
)
_MODEL_KEYS = ("encoder", "emb_dim", "feature_dim", "head_hidden", "rnn_hidden")


class UsageError(Exception):
    pass


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    return values


def _resolve_seed(args, config: dict) -> int:
    env = os.environ.get("ZZ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"ZZ_SEED must be an integer, got {env!r}")
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in config:
        return config["seed"]
    return 0


def _load_run_config(args) -> dict:
    if getattr(args, "config", None):
        return _parse_config_file(args.config)
    return {}


def _pick(args, config: dict, key: str, fallback):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return config.get(key, fallback)


def _write_resolved(primary_output, payload: dict) -> None:
    path = Path(str(primary_output) + ".config.json")
    payload = {"tool_version": __version__, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _split_corpus(programs):
    """A corpus file holds originals and variants side by side; variant ids
    carry a ::kind suffix."""
    originals = [p for p in programs if "::" not in p.id]
    buckets: dict[str, list] = {}
    for p in programs:
        if "::" in p.id:
            kind = p.id.rsplit("::", 1)[1]
            buckets.setdefault(kind, []).append(p)
    return originals, buckets


# ---- subcommands -------------------------------------------------------------


def cmd_gen(args) -> None:
    config = _load_run_config(args)
    seed = _resolve_seed(args, config)
    count = _pick(args, config, "count", None)
    vuln = _pick(args, config, "vuln", 0.4)
    if count is None:
        raise UsageError("gen requires --count (or a config file with count=)")
    if not 0.0 < vuln < 1.0:
        raise UsageError(f"--vuln must be strictly between 0 and 1, got {vuln}")
    corpus = generate_synthetic(count, vulnerable_fraction=vuln, seed=seed)
    train = [p for p in corpus if p.split == "train"]
    test = [p for p in corpus if p.split == "test"]
    save_corpus(args.out_train, train)
    save_corpus(args.out_test, test)
    _write_resolved(args.out_train, {
        "command": "gen",
        "count": count,
        "vuln": vuln,
        "seed": seed,
        "out_train": str(args.out_train),
        "out_test": str(args.out_test),
        "train_programs": len(train),
        "test_programs": len(test),
    })
    log.info("wrote %d train and %d test programs", len(train), len(test))


def cmd_transform(args) -> None:
    config = _load_run_config(args)
    seed = _resolve_seed(args, config)
    selector = _pick(args, config, "ct", None)
    if selector is None:
        raise UsageError("transform requires --ct (or a config file with ct=)")
    try:
        kinds = resolve_kinds(selector)
    except TransformError as exc:
        raise UsageError(str(exc))
    corpus = load_corpus(args.input)
    augmented = augment_corpus(corpus, kinds, seed)
    if args.variants_only:
        augmented = [p for p in augmented if "::" in p.id]
    save_corpus(args.out, augmented)
    variants = sum(1 for p in augmented if "::" in p.id)
    _write_resolved(args.out, {
        "command": "transform",
        "input": str(args.input),
        "out": str(args.out),
        "ct": selector,
        "kinds": list(kinds),
        "seed": seed,
        "variants_only": bool(args.variants_only),
        "programs": len(augmented),
        "variants": variants,
    })
    log.info("wrote %d programs (%d variants)", len(augmented), variants)


def _train_configs(args, config: dict, seed: int) -> tuple[TrainConfig, dict, str]:
    overrides = {k: config[k] for k in _TRAIN_KEYS if k in config}
    tc = TrainConfig(seed=seed, **overrides)
    try:
        tc.validate()
    except TrainingError as exc:
        raise UsageError(str(exc))
    granularity = _pick(args, config, "granularity", "function")
    if granularity not in GRANULARITIES:
        raise UsageError(f"unknown granularity {granularity!r}")
    mc = {k: config[k] for k in _MODEL_KEYS if k in config}
    mc["granularity"] = granularity
    mc["length"] = config.get("length", default_length(granularity))
    mc["delta"] = tc.delta
    return tc, mc, granularity


def cmd_train(args) -> None:
    config = _load_run_config(args)
    seed = _resolve_seed(args, config)
    tc, mc, granularity = _train_configs(args, config, seed)

    corpus = load_corpus(args.data)
    originals, buckets = _split_corpus(corpus)
    variants = [p for bucket in buckets.values() for p in bucket]
    clean = [f for f in extract_corpus_fragments(originals, granularity) if f.split == "train"]
    varied = [f for f in extract_corpus_fragments(variants, granularity) if f.split == "train"]
    val_fragments = None
    if args.val_data:
        val_fragments = extract_corpus_fragments(load_corpus(args.val_data), granularity)

    if args.mode == "original":
        if varied:
            log.warning("original mode ignores %d transformed variants", len(varied))
        outcome = train_original(clean, model_config=mc, train_config=tc, val_fragments=val_fragments)
    elif args.mode == "conventional":
        if not varied:
            log.warning("conventional mode without variants is identical to original mode")
        outcome = train_original(clean + varied, model_config=mc, train_config=tc, val_fragments=val_fragments)
    else:
        outcome = train_zigzag(clean, varied, model_config=mc, train_config=tc, val_fragments=val_fragments)

    save_model(outcome.model, args.out_model)
    save_trace(args.out_trace, outcome.trace)
    _write_resolved(args.out_model, {
        "command": "train",
        "mode": args.mode,
        "data": str(args.data),
        "val_data": str(args.val_data) if args.val_data else None,
        "out_model": str(args.out_model),
        "out_trace": str(args.out_trace),
        "seed": seed,
        "train_config": {k: getattr(tc, k) for k in (
            "delta", "beta", "e1", "e2", "e3", "batch_size", "lr",
            "tau_disc", "tau_loss", "optimizer", "mine_with", "seed",
        )},
        "model_config": outcome.model.config,
        "clean_fragments": len(clean),
        "variant_fragments": len(varied),
        "rounds_run": outcome.rounds_run,
        "stopped_early": outcome.stopped_early,
        "model_fingerprint": model_fingerprint(outcome.model),
    })
    log.info("trained %s model -> %s", args.mode, args.out_model)


def cmd_eval(args) -> None:
    model = load_model(args.model)
    corpus = load_corpus(args.corpus)
    originals, buckets = _split_corpus(corpus)
    if not originals:
        raise CorpusError(f"{args.corpus} holds no untransformed programs")
    report = evaluate_detector(model, originals, buckets)
    report.save(args.out)
    _write_resolved(args.out, {
        "command": "eval",
        "model": str(args.model),
        "corpus": str(args.corpus),
        "out": str(args.out),
        "granularity": report.granularity,
        "corpus_digest": report.corpus_digest,
        "model_digest": report.model_digest,
    })
    print(report.to_text())


def cmd_compare(args) -> None:
    if args.names:
        names = [part.strip() for part in args.names.split(",")]
    else:
        names = [Path(p).stem for p in args.reports]
    reports = [load_report(path) for path in args.reports]
    result = compare_reports(reports, names)
    for name, f1 in zip(result["names"], result["f1"]):
        print(f"{name}: Total F1 = {f1}")
    print(f"ordered (weakest first): {'yes' if result['ordered'] else 'no'}")


# ---- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zigzag", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a labeled corpus")
    p.add_argument("--count", type=int)
    p.add_argument("--vuln", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("transform", help="apply transforms to a corpus file")
    p.add_argument("input")
    p.add_argument("--ct", help="ct name, comma list, 'all', or md0..md5")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--variants-only", action="store_true")
    p.set_defaults(handler=cmd_transform)

    p = sub.add_parser("train", help="fit a detector")
    p.add_argument("--mode", choices=("original", "conventional", "zigzag"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--val-data")
    p.add_argument("--granularity", choices=tuple(GRANULARITIES))
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-trace", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score a model against a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("compare", help="check the robustness ordering of reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--names", help="comma-separated labels, one per report")
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except (
        CorpusError,
        EncodingError,
        EvaluationError,
        KernelError,
        ModelError,
        TrainingError,
        TransformError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

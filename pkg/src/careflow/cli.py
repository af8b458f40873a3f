"""careflow command line interface.

Composable subcommands over file interfaces (CSV event logs, PNML nets,
npz weight files, JSON reports), plus `careflow run` which chains
validate -> filter -> split -> discover -> estimate-decay -> enhance ->
train -> evaluate -> explain into one output directory.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import os
import sys
import time

from . import decay, discovery, explain, metrics, model, petrinet, synth
from .eventlog import (
    LogFormatError,
    filter_cohort,
    parse_event_log,
    split_cohort,
    write_event_log,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


def _log(msg):
    print(f"careflow: {msg}")


def load_config(path, overrides=None):
    """Plain key=value config file; later CLI overrides win."""
    cfg = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path} does not exist")
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                cfg[key.strip()] = value.strip()
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    return cfg


def _cfg_get(cfg, key, cast, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        return cast(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} has bad value {cfg[key]!r}") from None


def _open_log(events_path, demo_path):
    for p in (events_path, demo_path):
        if not p or not os.path.exists(p):
            raise ConfigError(f"input file {p!r} does not exist")
    with open(events_path) as ef, open(demo_path) as df:
        return parse_event_log(ef, df)


def _write_split_part(log, out_dir, name):
    events = os.path.join(out_dir, f"{name}_events.csv")
    demo = os.path.join(out_dir, f"{name}_demographics.csv")
    with open(events, "w") as ef, open(demo, "w") as df:
        write_event_log(log, ef, df)
    return events, demo


def _train_config_from(cfg, seed):
    return model.TrainConfig(
        epochs=_cfg_get(cfg, "epochs", int, 350),
        batch_size=_cfg_get(cfg, "batch_size", int, 50),
        learning_rate=_cfg_get(cfg, "learning_rate", float, 5e-4),
        dropout=_cfg_get(cfg, "dropout", float, 0.5),
        rmsprop_decay=_cfg_get(cfg, "rmsprop_decay", float, 0.9),
        rmsprop_epsilon=_cfg_get(cfg, "rmsprop_epsilon", float, 1e-8),
        seed=seed,
        class_weighting=_cfg_get(cfg, "class_weighting", lambda v: v.lower() == "true", False),
    )


# ---------------------------------------------------------------------------
# Subcommand implementations.

def cmd_validate(args):
    log = _open_log(args.events, args.demo)
    _log(f"valid: {len(log)} traces, {len(log.vocabulary)} distinct events")
    return EXIT_OK


def cmd_synth(args):
    cfg = synth.CohortConfig(
        n_patients=args.n,
        seed=args.seed,
        death_rate=args.death_rate,
        signal_strength=args.signal,
        violations=args.violations,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    events = os.path.join(args.out_dir, "events.csv")
    demo = os.path.join(args.out_dir, "demographics.csv")
    with open(events, "w") as ef, open(demo, "w") as df:
        log = synth.generate(cfg, ef, df)
    _log(f"synth: wrote {len(log)} traces to {args.out_dir}")
    return EXIT_OK


def cmd_split(args):
    log = _open_log(args.events, args.demo)
    parts = split_cohort(log, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, part in (
        ("train", parts.train), ("validation", parts.validation), ("test", parts.test)
    ):
        _write_split_part(part, args.out_dir, name)
        _log(f"split: {name} {len(part)} traces")
    return EXIT_OK


def cmd_discover(args):
    log = _open_log(args.events, args.demo)
    net = discovery.discover(log, args.threshold)
    with open(args.out, "w") as fh:
        fh.write(petrinet.to_pnml(net))
    _log(
        f"discover: {len(net.places)} places, "
        f"{len(net.label_to_transition)} visible transitions -> {args.out}"
    )
    return EXIT_OK


def cmd_export_dot(args):
    with open(args.net) as fh:
        net = petrinet.parse_pnml(fh)
    with open(args.out, "w") as fh:
        fh.write(petrinet.to_dot(net, net.initial_marking))
    _log(f"export-dot: wrote {args.out}")
    return EXIT_OK


def cmd_enhance(args):
    with open(args.net) as fh:
        net = petrinet.parse_pnml(fh)
    log = _open_log(args.events, args.demo)
    if args.params_in:
        with open(args.params_in) as fh:
            params = decay.DecayParams.from_json(json.load(fh)["decay_params"])
    else:
        params = decay.estimate_decay_params(net, log)
    dataset = decay.build_dataset(net, params, log, args.cutoff_hours)
    meta_path = args.meta or args.out.rsplit(".", 1)[0] + ".meta.json"
    with open(args.out, "w") as cf, open(meta_path, "w") as mf:
        decay.write_dataset(dataset, params, cf, mf, args.cutoff_hours)
    _log(f"enhance: {len(dataset)} rows x {dataset.samples.shape[1] + 6} features -> {args.out}")
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config)
    train_cfg = _train_config_from(cfg, args.seed)
    with open(args.data) as fh:
        train_ds = decay.read_dataset(fh)
    with open(args.val) as fh:
        val_ds = decay.read_dataset(fh)
    weights, history = model.train(train_ds, val_ds, train_cfg)
    weights.save(args.out)
    best = max(history, key=lambda h: (h["val_auc"], -h["epoch"]))
    _log(
        f"train: {len(history) - 1} epochs, best val AUC "
        f"{best['val_auc']:.4f} at epoch {best['epoch']} -> {args.out}"
    )
    return EXIT_OK


def cmd_evaluate(args):
    weights = model.NetworkWeights.load(args.weights)
    with open(args.data) as fh:
        dataset = decay.read_dataset(fh)
    scores = model.predict_proba(weights, dataset)
    report = metrics.evaluate(scores, dataset.labels, args.level, args.threshold)
    with open(args.out, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    _log(
        f"evaluate: AUC {report.auc:.4f} "
        f"[{report.ci_low:.4f}, {report.ci_high:.4f}] -> {args.out}"
    )
    return EXIT_OK


def cmd_explain(args):
    weights = model.NetworkWeights.load(args.weights)
    with open(args.data) as fh:
        dataset = decay.read_dataset(fh)
    with open(args.groups) as fh:
        groups = {k: list(map(int, v)) for k, v in json.load(fh).items()}
    attribution = explain.shapley_groups(weights, dataset, groups)
    with open(args.out, "w") as fh:
        json.dump(attribution.to_json(), fh, indent=2)
        fh.write("\n")
    ranking = explain.rank_groups(attribution)
    _log(f"explain: ranking {' > '.join(ranking)} -> {args.out}")
    return EXIT_OK


def run_pipeline(cfg):
    """Full pipeline into cfg['out_dir']; returns the evaluation report dict."""
    out_dir = _cfg_get(cfg, "out_dir", str, required=True)
    seed = _cfg_get(cfg, "seed", int, 7)
    cutoff_hours = _cfg_get(cfg, "cutoff_hours", float, 24.0)
    edge_threshold = _cfg_get(cfg, "edge_threshold", float, 0.0)
    ci_level = _cfg_get(cfg, "ci_level", float, 0.95)
    threshold = _cfg_get(cfg, "threshold", float, 0.5)
    events_path = _cfg_get(cfg, "events", str, required=True)
    demo_path = _cfg_get(cfg, "demographics", str, required=True)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved"), "w") as fh:
        for key in sorted(cfg):
            fh.write(f"{key}={cfg[key]}\n")

    t0 = time.time()
    log = _open_log(events_path, demo_path)
    _log(f"validate: {len(log)} traces, {len(log.vocabulary)} events")

    log = filter_cohort(log, cutoff_hours)
    _log(f"filter: {len(log)} traces retained")

    parts = split_cohort(log, seed)
    _log(
        f"split: train {len(parts.train)} / validation {len(parts.validation)}"
        f" / test {len(parts.test)}"
    )

    net = discovery.discover(parts.train, edge_threshold)
    with open(os.path.join(out_dir, "net.pnml"), "w") as fh:
        fh.write(petrinet.to_pnml(net))
    with open(os.path.join(out_dir, "net.dot"), "w") as fh:
        fh.write(petrinet.to_dot(net))
    _log(
        f"discover: {len(net.places)} places, "
        f"{len(net.label_to_transition)} visible transitions"
    )

    params = decay.estimate_decay_params(net, parts.train)
    _log(f"estimate-decay: rates for {len(params.places)} places")

    datasets = {}
    for name, part in (
        ("train", parts.train), ("validation", parts.validation), ("test", parts.test)
    ):
        ds = decay.build_dataset(net, params, part, cutoff_hours)
        datasets[name] = ds
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w") as cf, open(
            os.path.join(out_dir, f"{name}.meta.json"), "w"
        ) as mf:
            decay.write_dataset(ds, params, cf, mf, cutoff_hours)
        _log(f"enhance: {name} {len(ds)} rows")

    train_cfg = _train_config_from(cfg, seed)
    weights, history = model.train(datasets["train"], datasets["validation"], train_cfg)
    weights.save(os.path.join(out_dir, "weights.npz"))
    best = max(history, key=lambda h: (h["val_auc"], -h["epoch"]))
    _log(f"train: best val AUC {best['val_auc']:.4f} at epoch {best['epoch']}")

    scores = model.predict_proba(weights, datasets["test"])
    report = metrics.evaluate(scores, datasets["test"].labels, ci_level, threshold)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    _log(f"evaluate: test AUC {report.auc:.4f} [{report.ci_low:.4f}, {report.ci_high:.4f}]")

    provenance = {p: discovery.place_event(p) for p in net.places}
    groups = explain.assign_groups(net.places, provenance)
    with open(os.path.join(out_dir, "groups.json"), "w") as fh:
        json.dump(groups, fh, indent=2)
        fh.write("\n")
    attribution = explain.shapley_groups(
        weights,
        datasets["test"],
        groups,
        baseline=_training_baseline(datasets["train"]),
    )
    with open(os.path.join(out_dir, "shap.json"), "w") as fh:
        json.dump(attribution.to_json(), fh, indent=2)
        fh.write("\n")
    _log(f"explain: ranking {' > '.join(explain.rank_groups(attribution))}")
    _log(f"run: finished in {time.time() - t0:.1f}s, artifacts in {out_dir}")
    return report.to_json()


def _training_baseline(train_ds):
    import numpy as np

    return np.concatenate(
        [train_ds.samples.mean(axis=0), train_ds.demographics.mean(axis=0)]
    )


def cmd_run(args):
    overrides = {
        "out_dir": args.out_dir,
        "seed": str(args.seed) if args.seed is not None else None,
    }
    cfg = load_config(args.config, overrides)
    run_pipeline(cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="careflow",
        description="Careflow mortality prediction pipeline over patient event logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate an event log")
    p.add_argument("--events", required=True)
    p.add_argument("--demo", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--n", type=int, default=1017)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--signal", type=float, default=2.0)
    p.add_argument("--death-rate", type=float, default=0.17)
    p.add_argument("--violations", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="67/33 then 80/20 cohort split")
    p.add_argument("--events", required=True)
    p.add_argument("--demo", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("discover", help="mine a workflow net from a log")
    p.add_argument("--events", required=True)
    p.add_argument("--demo", required=True)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("export-dot", help="render a PNML net as DOT")
    p.add_argument("--net", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("enhance", help="build a timed-state-sample dataset")
    p.add_argument("--net", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--demo", required=True)
    p.add_argument("--cutoff-hours", type=float, default=24.0)
    p.add_argument("--out", required=True)
    p.add_argument("--meta")
    p.add_argument("--params-in", help="reuse decay params from a sidecar file")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("train", help="train the two-branch classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AUC with DeLong CI and confusion counts")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="exact grouped Shapley attribution")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("run", help="full pipeline from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"careflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LogFormatError, ValueError, KeyError, OSError) as exc:
        print(f"careflow: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, FloatingPointError, OverflowError) as exc:
        print(f"careflow: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

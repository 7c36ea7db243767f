"""Command line: gen-dataset, train, predict, layouts, baseline, eval.

Settings come from flags, then the JSON config (``--config`` or ``$CIRCFID_CONFIG``),
then built-in defaults. Exit codes: 0 ok, 2 config, 3 input format, 4 numerical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from .baseline import ErrorMap, estimate_fidelity
from .dataset import DatasetConfig, _atomic_write, build_dataset, load_records
from .devices import load_device
from .errors import CircfidError, ConfigError, InputFormatError
from .layout import CouplingMap, builtin_coupling_map, rank_layouts
from .pipeline import (
    EVAL_COLUMNS, FidelityPredictor, evaluate, prepare_circuit, read_circuit, reference_rmses, rmse, train_predictor,
)
from .transpile import Layout

ENV_CONFIG = "CIRCFID_CONFIG"

log = logging.getLogger("circfid")

MODEL_KEYS = ("embed_dim", "lstm_units", "dense_sizes", "shared_embedding", "batch_size", "learning_rate",
              "epochs", "patience", "bucket", "clip_norm", "forget_bias")


def _load_config(path) -> dict:
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _pick(flag, section: dict, key: str, default=None):
    if flag is not None:
        return flag
    return section.get(key, default)


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return sec


def _seed(args, cfg):
    return int(_pick(args.seed, cfg, "seed", 0))


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row[c] is None else (f"{row[c]:.6f}" if isinstance(row[c], float) else row[c])
                    for c in columns])
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def cmd_gen_dataset(args, cfg):
    sec = dict(_section(cfg, "dataset"))
    overrides = {
        "device": args.device or cfg.get("device"),
        "n_records": args.n_records,
        "seed": args.seed if args.seed is not None else cfg.get("seed"),
        "noise_multiplier": args.multiplier,
        "depth_cutoff": args.depth_cutoff,
        "shots": args.shots,
    }
    sec.update({k: v for k, v in overrides.items() if v is not None})
    dcfg = DatasetConfig.from_dict(sec)
    out = args.out or cfg.get("paths", {}).get("dataset")
    if not out:
        raise ConfigError("gen-dataset needs --out or paths.dataset in the config")
    stats = build_dataset(dcfg, out, args.stats)
    print(f"wrote {stats['n_retained']} of {stats['n_generated']} records to {out}")


def cmd_train(args, cfg):
    sec = _section(cfg, "train")
    paths = cfg.get("paths", {})
    dataset = args.dataset or paths.get("dataset")
    out = args.out or paths.get("model")
    if not dataset or not out:
        raise ConfigError("train needs --dataset and --out (or paths.dataset / paths.model)")
    records = load_records(dataset)
    if not records:
        raise InputFormatError(f"dataset {dataset} is empty")
    device = load_device(_pick(args.device, cfg, "device", records[0]["device"]))
    flags = {"epochs": args.epochs, "batch_size": args.batch_size, "learning_rate": args.lr,
             "patience": args.patience, "embed_dim": args.embed_dim, "lstm_units": args.lstm_units}
    params = {k: sec[k] for k in MODEL_KEYS if k in sec}
    params.update({k: v for k, v in flags.items() if v is not None})
    if "dense_sizes" in params:
        params["dense_sizes"] = tuple(params["dense_sizes"])
    unknown = set(sec) - set(MODEL_KEYS) - {"max_steps", "split"}
    if unknown:
        raise ConfigError(f"unknown train config keys {sorted(unknown)}")
    max_steps = int(_pick(args.max_steps, sec, "max_steps", 500))
    ratios = tuple(sec.get("split", (0.7, 0.2, 0.1)))
    predictor, parts = train_predictor(records, device.width, params, max_steps, ratios, seed=_seed(args, cfg))
    predictor.save(out)
    (c_te, y_te) = parts[2]
    report = {
        "n_train": len(parts[0][1]),
        "n_val": len(parts[1][1]),
        "n_test": len(y_te),
        "test_rmse": rmse(predictor.predict(c_te), y_te),
        **reference_rmses(parts),
        "history": predictor.regressor.history_.to_dict(),
    }
    text = json.dumps(report, indent=1) + "\n"
    if args.report:
        _atomic_write(args.report, text)
    print(f"saved {out}; test RMSE {report['test_rmse']:.4f} over {report['n_test']} circuits")


def _placed(paths, width, layout_path=None):
    layout = None
    if layout_path:
        layout, lw = Layout.load(layout_path)
        if lw is not None and lw != width:
            raise ConfigError(f"layout is for a {lw}-qubit device, not {width}")
    return [(Path(p).stem, prepare_circuit(read_circuit(p), width, layout)) for p in paths]


def cmd_predict(args, cfg):
    model = args.model or cfg.get("paths", {}).get("model")
    if not model:
        raise ConfigError("predict needs --model")
    predictor = FidelityPredictor.load(model)
    named = _placed(args.circuits, predictor.tokenizer.device_width, args.layout)
    preds = predictor.predict([c for _, c in named])
    for path, p in zip(args.circuits, preds):
        print(f"{path},{p:.6f}")


def _coupling(spec) -> CouplingMap:
    if Path(spec).is_file():
        return CouplingMap.load(spec)
    try:
        return builtin_coupling_map(spec)
    except InputFormatError:
        raise ConfigError(f"unknown coupling map {spec!r}") from None


def _error_map(args, cfg, default_device="nairobi"):
    path = getattr(args, "error_map", None) or cfg.get("paths", {}).get("error_map")
    if path:
        return ErrorMap.load(path)
    return load_device(args.device or default_device).calibration()


def cmd_layouts(args, cfg):
    cm = _coupling(_pick(args.map, cfg, "device", "nairobi"))
    c = read_circuit(args.circuit)
    scorer_name = args.scorer
    if scorer_name == "model":
        predictor = FidelityPredictor.load(args.model or cfg.get("paths", {}).get("model"))
        if predictor.tokenizer.device_width != cm.n_qubits:
            raise ConfigError("model lanes do not match the coupling map width")

        def scorer(circuits):
            return predictor.predict([prepare_circuit(x, cm.n_qubits) for x in circuits])
    elif scorer_name == "baseline":
        em = _error_map(args, cfg, args.device or cfg.get("device") or cm.name)

        def scorer(circuits):
            return [estimate_fidelity(prepare_circuit(x, cm.n_qubits), em) for x in circuits]
    else:
        def scorer(circuits):
            return [0.0] * len(circuits)
    ranked = rank_layouts(c, cm, scorer)
    rows = [{"rank": i + 1, "layout": " ".join(str(q) for q in lay.as_tuple()), "score": float(s)}
            for i, (lay, s) in enumerate(ranked)]
    _emit(_csv(rows, ("rank", "layout", "score")), args.out)


def cmd_baseline(args, cfg):
    em = _error_map(args, cfg, cfg.get("device", "nairobi"))
    width = len(em.eps_ro)
    for path in args.circuits:
        c = prepare_circuit(read_circuit(path), width) if args.transpile else read_circuit(path)
        print(f"{path},{estimate_fidelity(c, em):.6f}")


def cmd_eval(args, cfg):
    sec = _section(cfg, "eval")
    device = load_device(_pick(args.device, cfg, "device", "nairobi"))
    nm = device.noise.scaled(float(_pick(args.multiplier, sec, "multiplier", 1.0)))
    em = ErrorMap.load(args.error_map) if args.error_map else device.calibration()
    model = args.model or cfg.get("paths", {}).get("model")
    predictor = FidelityPredictor.load(model) if model else None
    if predictor is not None and predictor.tokenizer.device_width != device.width:
        raise ConfigError("model lanes do not match the device width")
    trials = int(_pick(args.trials, sec, "trials", 50))
    shots = int(_pick(args.shots, sec, "shots", 1024))
    if trials < 1 or shots < 1:
        raise ConfigError("trials and shots must be positive")
    named = _placed(args.circuits, device.width, args.layout)
    rows = evaluate(named, nm, em, predictor, trials, shots, _seed(args, cfg))
    _emit(_csv(rows, EVAL_COLUMNS), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="circfid", description=__doc__.splitlines()[0])
    p.add_argument("--config", help=f"JSON config (default: ${ENV_CONFIG})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-dataset", help="generate a labeled RB dataset")
    g.add_argument("--out")
    g.add_argument("--stats")
    g.add_argument("--device")
    g.add_argument("--n-records", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--multiplier", type=float)
    g.add_argument("--depth-cutoff", type=int)
    g.add_argument("--shots", type=int)
    g.set_defaults(func=cmd_gen_dataset)

    t = sub.add_parser("train", help="train the LSTM predictor on a dataset")
    t.add_argument("--dataset")
    t.add_argument("--out")
    t.add_argument("--report", help="write split sizes, test RMSE and loss history as JSON")
    t.add_argument("--device")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--patience", type=int)
    t.add_argument("--embed-dim", type=int)
    t.add_argument("--lstm-units", type=int)
    t.add_argument("--max-steps", type=int)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="print one predicted fidelity per circuit")
    pr.add_argument("circuits", nargs="+")
    pr.add_argument("--model")
    pr.add_argument("--layout")
    pr.set_defaults(func=cmd_predict)

    la = sub.add_parser("layouts", help="rank every embedding of a circuit on a coupling map")
    la.add_argument("circuit")
    la.add_argument("--map", help="built-in name or coupling-map JSON")
    la.add_argument("--scorer", choices=("model", "baseline", "none"), default="baseline")
    la.add_argument("--model")
    la.add_argument("--device")
    la.add_argument("--error-map")
    la.add_argument("--out")
    la.set_defaults(func=cmd_layouts)

    b = sub.add_parser("baseline", help="gate-error-product fidelity estimate")
    b.add_argument("circuits", nargs="+")
    b.add_argument("--device")
    b.add_argument("--error-map")
    b.add_argument("--no-transpile", dest="transpile", action="store_false")
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("eval", help="measured vs predicted fidelity report (CSV)")
    e.add_argument("circuits", nargs="+")
    e.add_argument("--model")
    e.add_argument("--device")
    e.add_argument("--error-map")
    e.add_argument("--layout")
    e.add_argument("--multiplier", type=float)
    e.add_argument("--trials", type=int)
    e.add_argument("--shots", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _load_config(args.config)
        args.func(args, cfg)
    except CircfidError as exc:
        print(f"circfid: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"circfid: error: invalid input: {exc}", file=sys.stderr)
        return InputFormatError.exit_code
    except FloatingPointError as exc:
        print(f"circfid: error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"circfid: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands cover the full pipeline: simulate sensors for an input table,
fit sensor parameters from calibration data, generate the three benchmark
datasets, train the image decoder, run the supervised sanity check, evaluate
encodings with the identifiability metrics, and fetch published archives.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import pandas as pd

from . import dataset_io, fetch, images, metrics, nnet, scm, supervised, temporal
from .exceptions import LightTunnelError
from .inputs import FACTOR_COLUMNS, quantize_frame
from .sensors import DEFAULT_PARAMS, fit_params, params_from_json, params_to_json, simulate_frame


class _UsageError(Exception):
    def __init__(self, message, parser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message, self)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lighttunnel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate",
                       help="simulate sensor readings for an input CSV")
    p.add_argument("--inputs", required=True, help="CSV with the input columns")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--params", help="sensor parameter JSON (default: example set)")
    p.add_argument("--quantize", action="store_true",
                   help="quantize inputs to device resolution first")
    p.add_argument("--device-faithful", action="store_true",
                   help="round and clip readings to hardware integer ranges")

    p = sub.add_parser("fit-params",
                       help="fit sensor parameters from a calibration CSV")
    p.add_argument("--calibration", required=True)
    p.add_argument("--out", help="write fitted parameters to this JSON file")
    p.add_argument("--d1", type=float, default=100.0)
    p.add_argument("--d2", type=float, default=200.0)
    p.add_argument("--d3", type=float, default=300.0)

    p = sub.add_parser("gen", help="generate a benchmark dataset")
    p.add_argument("kind", choices=("ccrl", "multiview", "citris"))
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="generator spec JSON document")
    p.add_argument("--image-model", choices=("analytic", "decoder", "none"),
                   default="analytic")
    p.add_argument("--decoder", help="decoder weight file for --image-model decoder")
    p.add_argument("--quantize", action="store_true",
                   help="quantize factors to device resolution before sensing")
    p.add_argument("--n-per-env", type=int, help="rows per environment (ccrl/multiview)")
    p.add_argument("--n-steps", type=int, help="sequence length (citris)")
    p.add_argument("--n-eval", type=int, help="iid eval rows (citris)")

    p = sub.add_parser("train-decoder",
                       help="train the image decoder")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset directory with images")
    src.add_argument("--analytic", type=int, metavar="N",
                     help="train on N analytic image pairs instead")
    p.add_argument("--split", default="train")
    p.add_argument("--limit", type=int, default=10000,
                   help="cap on training rows loaded from --data")
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--hidden", default="4096,4096",
                   help="comma-separated hidden layer widths")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("supervised-check",
                       help="factor-recovery sanity check on image data")
    p.add_argument("--data", required=True, help="dataset directory with images")
    p.add_argument("--split", default="train")
    p.add_argument("--n-train", type=int, default=5000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--epochs", type=int, default=supervised.SUPERVISED_TRAIN_DEFAULTS.epochs)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="evaluate encodings")
    esub = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)

    e = esub.add_parser("mcc")
    e.add_argument("--truth", required=True, help="ground-truth factor CSV")
    e.add_argument("--learned", required=True, help="learned encoding CSV")
    e.add_argument("--json", help="write the full report here")

    e = esub.add_parser("shd")
    e.add_argument("--true-graph", required=True, help="binary adjacency CSV, no header")
    e.add_argument("--est-graph", required=True,
                   help="adjacency CSV, no header; continuous with --match-edges")
    e.add_argument("--match-edges", action="store_true",
                   help="threshold the estimate to the true edge count first")
    e.add_argument("--json", help="write the full report here")

    e = esub.add_parser("block-r2")
    e.add_argument("--encodings-a", required=True)
    e.add_argument("--encodings-b", required=True)
    e.add_argument("--factors", required=True)
    e.add_argument("--content", help="comma-separated encoding column indices")
    e.add_argument("--readout", choices=("rff", "mlp"), default="rff")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--json", help="write the full report here")

    e = esub.add_parser("grouped")
    e.add_argument("--latents", required=True)
    e.add_argument("--factors", required=True)
    e.add_argument("--groups", required=True,
                   help="JSON file mapping factor names (and optional 'na') "
                        "to latent column indices")
    e.add_argument("--readout", choices=("rff", "mlp"), default="rff")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--json", help="write the full report here")

    p = sub.add_parser("fetch", help="download a published archive")
    p.add_argument("--name", required=True)
    p.add_argument("--cache", help="cache directory override")
    return parser


def _load_params(path):
    if not path:
        return DEFAULT_PARAMS
    with open(path) as fh:
        return params_from_json(fh.read())


def _load_decoder(args):
    if args.image_model != "decoder":
        return None
    if not args.decoder:
        raise _UsageError("--image-model decoder requires --decoder", _build_parser())
    with open(args.decoder, "rb") as fh:
        return images.decoder_from_bytes(fh.read())


def _emit(report: dict, path, headline: str):
    print(headline)
    if path:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _cmd_simulate(args) -> int:
    frame = pd.read_csv(args.inputs, float_precision="round_trip")
    if args.quantize:
        frame = quantize_frame(frame)
    readings = simulate_frame(frame, _load_params(args.params),
                              device_faithful=args.device_faithful)
    pd.concat([frame, readings], axis=1).to_csv(args.out, index=False,
                                                float_format="%.17g")
    print(f"wrote {len(frame)} rows to {args.out}")
    return 0


def _cmd_fit_params(args) -> int:
    table = pd.read_csv(args.calibration, float_precision="round_trip")
    params, rms = fit_params(table, d1=args.d1, d2=args.d2, d3=args.d3)
    text = params_to_json(params)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(json.dumps({"residual_rms": rms}, indent=2, sort_keys=True))
    return 0


def _requantize(ds):
    """Quantize factors to device resolution, then refresh the readings."""
    from .inputs import SENSOR_COLUMNS
    from .scm import _attach_observations

    splits = {}
    for name, frame in ds.splits.items():
        frame = quantize_frame(frame).drop(columns=list(SENSOR_COLUMNS))
        splits[name] = _attach_observations(frame, ds.sensor_params)
    return ds.replace(splits=splits)


def _cmd_gen(args) -> int:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    if args.seed is not None:
        doc["seed"] = args.seed
    decoder = _load_decoder(args)
    if args.kind == "citris":
        if args.n_steps:
            doc["n_steps"] = args.n_steps
        if args.n_eval is not None:
            doc["n_eval"] = args.n_eval
        spec = temporal.temporal_spec_from_doc(doc)
        ds = temporal.build_citris_dataset(spec, image_model=args.image_model,
                                           decoder=decoder)
    else:
        if args.n_per_env:
            doc["n_per_env"] = args.n_per_env
        spec = scm.scm_spec_from_doc(doc)
        build = scm.build_ccrl_dataset if args.kind == "ccrl" else scm.build_multiview_dataset
        ds = build(spec, image_model=args.image_model, decoder=decoder)
    if args.quantize:
        ds = _requantize(ds)
    dataset_io.write_dataset(ds, args.out)
    rows = sum(len(f) for f in ds.splits.values())
    print(f"wrote {args.kind} dataset ({rows} rows) to {args.out}")
    return 0


def _cmd_train_decoder(args) -> int:
    hidden = tuple(int(w) for w in args.hidden.split(",") if w)
    cfg = nnet.TrainConfig(lr=args.lr, weight_decay=args.weight_decay,
                           epochs=args.epochs, batch_size=args.batch_size,
                           seed=args.seed)
    if args.data:
        ds = dataset_io.read_dataset(args.data)
        frame = ds.splits[args.split].iloc[:args.limit]
        pixels = dataset_io.load_images(args.data, frame)
    else:
        factors = temporal.sample_uniform_factors(args.analytic, args.seed)
        frame = pd.DataFrame(factors, columns=list(FACTOR_COLUMNS))
        pixels = images.analytic_frame(frame)
    net, history = images.train_decoder(frame, pixels,
                                        spec=images.DecoderSpec(hidden=hidden),
                                        cfg=cfg)
    with open(args.out, "wb") as fh:
        fh.write(images.decoder_to_bytes(net))
    last = history[-1] if history else float("nan")
    print(f"trained decoder on {len(frame)} pairs; final loss {last:.3e}; "
          f"weights at {args.out}")
    return 0


def _cmd_supervised_check(args) -> int:
    ds = dataset_io.read_dataset(args.data)
    frame = ds.splits[args.split].reset_index(drop=True)
    need = args.n_train + args.n_test
    from . import _rng
    order = _rng.stream(args.seed, _rng.TAG_SELECT).permutation(len(frame))[:need]
    pixels = dataset_io.load_images(args.data, frame, indices=order)
    cfg = nnet.TrainConfig(lr=supervised.SUPERVISED_TRAIN_DEFAULTS.lr,
                           weight_decay=supervised.SUPERVISED_TRAIN_DEFAULTS.weight_decay,
                           epochs=args.epochs,
                           batch_size=supervised.SUPERVISED_TRAIN_DEFAULTS.batch_size,
                           seed=args.seed)
    result = supervised.supervised_check(pixels, frame.iloc[order],
                                         n_train=args.n_train, n_test=args.n_test,
                                         cfg=cfg, seed=args.seed)
    report = {"r2": result.r2, "r2_per_factor": result.r2_per_factor}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _read_matrix(path):
    return pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=float)


def _cmd_eval(args) -> int:
    if args.metric == "mcc":
        truth = pd.read_csv(args.truth, float_precision="round_trip")
        learned = pd.read_csv(args.learned, float_precision="round_trip")
        score, perm = metrics.mcc(truth, learned)
        # Headline rounds away sub-sample-noise digits; the JSON report
        # keeps the full float.
        _emit({"mcc": score, "permutation": list(perm),
               "correlations": metrics.correlation_matrix(truth, learned)
                                      .to_dict(orient="index")},
              args.json, repr(round(score, 12)))
    elif args.metric == "shd":
        A = _read_matrix(args.true_graph)
        est = _read_matrix(args.est_graph)
        if args.match_edges:
            est = metrics.threshold_to_match(est, int(np.count_nonzero(A)))
        value = metrics.shd(A.astype(int), est.astype(int))
        _emit({"shd": value, "edges_true": int(np.count_nonzero(A)),
               "edges_estimated": int(np.count_nonzero(est))},
              args.json, str(value))
    elif args.metric == "block-r2":
        enc = {"a": pd.read_csv(args.encodings_a, float_precision="round_trip").to_numpy(dtype=float),
               "b": pd.read_csv(args.encodings_b, float_precision="round_trip").to_numpy(dtype=float)}
        factors = pd.read_csv(args.factors, float_precision="round_trip")
        content = [int(i) for i in args.content.split(",")] if args.content else None
        scores = metrics.block_r2(enc, factors, ("a", "b"), content=content,
                                  readout=args.readout, seed=args.seed)
        _emit({"block_r2": scores}, args.json,
              json.dumps(scores, indent=2, sort_keys=True))
    else:
        latents = pd.read_csv(args.latents, float_precision="round_trip")
        factors = pd.read_csv(args.factors, float_precision="round_trip")
        with open(args.groups) as fh:
            groups = {k: list(v) for k, v in json.load(fh).items()}
        out = metrics.grouped_corr_matrices(latents, factors, groups,
                                            readout=args.readout, seed=args.seed)
        report = {"r2": out.r2.to_dict(orient="index"),
                  "r2_display": out.r2_display.to_dict(orient="index"),
                  "spearman": out.spearman.to_dict(orient="index"),
                  "r2_diag": out.r2_diag, "r2_sep": out.r2_sep,
                  "spearman_diag": out.spearman_diag,
                  "spearman_sep": out.spearman_sep}
        _emit(report, args.json, json.dumps(
            {"r2_diag": out.r2_diag, "r2_sep": out.r2_sep,
             "spearman_diag": out.spearman_diag, "spearman_sep": out.spearman_sep},
            indent=2, sort_keys=True))
    return 0


def _cmd_fetch(args) -> int:
    path = fetch.fetch_remote(args.name, cache=args.cache)
    print(path)
    return 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "fit-params": _cmd_fit_params,
    "gen": _cmd_gen,
    "train-decoder": _cmd_train_decoder,
    "supervised-check": _cmd_supervised_check,
    "eval": _cmd_eval,
    "fetch": _cmd_fetch,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        exc.parser.print_usage(sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LightTunnelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

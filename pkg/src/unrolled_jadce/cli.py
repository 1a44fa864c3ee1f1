"""Command-line entry point: ``jadce {synth,train,eval,theory,weights}``.

Output files
------------
``synth``    ``OUT/dataset/`` container (manifest + little-endian float64 blobs)
``train``    ``OUT/ckpt-<arch>/`` container and ``OUT/train-log-<arch>.csv`` with
             columns ``stage,layer,phase,step,loss,train_loss,val_nmse,final``
``eval``     ``OUT/results.csv`` (one row per method and iterate, columns
             ``method,layer_or_iter,nmse_db,snr_db,seed,n_devices,
             detection_error_prob,miss_count,false_alarm_count``) and
             ``OUT/results-wide.csv`` (``snr_db,seed`` then one NMSE column per
             method and layer ``k >= 1``)
``theory``   ``OUT/theory-<mode>-<arch>.json``
``weights``  ``OUT/weights/weight-<method>-<hash>/`` container

Every run also writes the resolved configuration to ``OUT/config.json``.
The thread count of the BLAS backend is read from ``JADCE_THREADS``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import container, nets
from .coherence_weights import cached_weight, save_weight
from .config import BASELINES, load_config, parse_assignment
from .experiments import (
    LOG_COLUMNS,
    LONG_COLUMNS,
    DimensionMismatch,
    coupling_report,
    evaluate_dataset,
    evaluate_device_sweep,
    oracle_report,
    resolve_method,
    train_arch,
    wide_table,
    write_csv,
)
from .signal_model import load_dataset, synth_dataset
from .theory import SparsityConditionError

THREADS_ENV = "JADCE_THREADS"
log = logging.getLogger("unrolled_jadce")


def _global_flags(p: argparse.ArgumentParser) -> None:
    sup = argparse.SUPPRESS
    p.add_argument("--config", default=sup, help="JSON config file")
    p.add_argument("--preset", default=sup, help="desk, paper-small or paper-large")
    p.add_argument("--seed", type=int, default=sup, help="master seed (u64)")
    p.add_argument("--out", default=sup, help="output directory")
    p.add_argument("--set", action="append", default=sup, metavar="KEY=VALUE",
                   help="override any config key; VALUE is parsed as JSON")
    p.add_argument("-v", "--verbose", action="store_true", default=sup)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jadce", description=__doc__.split("\n")[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common)

    sub.add_parser("synth", parents=[common], help="draw and store a dataset")

    p = sub.add_parser("train", parents=[common], help="layer-wise training")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--arch", action="append", help="architecture(s); default from config")

    p = sub.add_parser("eval", parents=[common], help="per-layer NMSE and detection")
    p.add_argument("--data", help="dataset directory (not needed for a device sweep)")
    p.add_argument("--method", action="append",
                   help="ista_gs, nesterov_gs, init:<arch> or a checkpoint dir")
    p.add_argument("--sweep", choices=["none", "snr", "devices"], default="none")
    p.add_argument("--values", type=float, nargs="+", help="sweep points")

    p = sub.add_parser("theory", parents=[common], help="coupling and error-bound checks")
    p.add_argument("--mode", choices=["coupling", "oracle"], required=True)
    p.add_argument("--checkpoint", help="lista_gs checkpoint (coupling mode)")
    p.add_argument("--data", help="dataset whose preamble is used (oracle mode)")
    p.add_argument("--arch", default="lista_gscp", choices=["lista_gscp", "alista_gs"])
    p.add_argument("--sparsity", type=int, default=2, help="nonzero lifted rows s")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0, help="noise Frobenius norm")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--weight-method", default="minimax", choices=["pgd", "minimax"])

    p = sub.add_parser("weights", parents=[common], help="precompute a coherence weight")
    p.add_argument("--data", help="dataset directory; otherwise synthesized from config")
    p.add_argument("--method", default=None, choices=["pgd", "minimax"])
    return parser


def _resolve_config(args):
    overrides = dict(parse_assignment(a) for a in getattr(args, "set", []) or [])
    if hasattr(args, "seed"):
        overrides["seed"] = args.seed
    if hasattr(args, "out"):
        overrides["out"] = args.out
    return load_config(getattr(args, "config", None), getattr(args, "preset", None), overrides)


def _dataset_for(args, cfg):
    if getattr(args, "data", None):
        return load_dataset(args.data)
    return synth_dataset(cfg.dataset_config())


def cmd_synth(args, cfg, out: Path) -> None:
    path = out / "dataset"
    synth_dataset(cfg.dataset_config(), path)
    print(path / container.MANIFEST)


def cmd_train(args, cfg, out: Path) -> None:
    ds = load_dataset(args.data)
    for arch in args.arch or cfg.archs:
        log_path = out / f"train-log-{arch}.csv"
        try:
            result = train_arch(cfg, ds, arch)
        except nets.TrainingDiverged as err:
            write_csv(log_path, LOG_COLUMNS, err.log_rows)
            raise
        write_csv(log_path, LOG_COLUMNS, result.log_rows)
        ckpt = nets.save_checkpoint(result, out / f"ckpt-{arch}", extra={"name": arch})
        print(ckpt / container.MANIFEST)
        print(log_path)


def cmd_eval(args, cfg, out: Path) -> None:
    methods = [resolve_method(m, cfg) for m in (args.method or list(BASELINES))]
    if args.sweep == "devices":
        values = args.values or cfg.device_sweep
        if not values:
            raise ValueError("device sweep needs --values or device_sweep in the config")
        rows = evaluate_device_sweep(methods, cfg, [int(v) for v in values])
    else:
        if not args.data:
            raise ValueError("--data is required unless --sweep devices")
        ds = load_dataset(args.data)
        values = None
        if args.sweep == "snr":
            values = args.values or cfg.snr_sweep
            if not values:
                raise ValueError("SNR sweep needs --values or snr_sweep in the config")
        rows = evaluate_dataset(methods, ds, cfg, values)
    if not rows:
        raise ValueError("no method matched the requested problem sizes")
    print(write_csv(out / "results.csv", LONG_COLUMNS, rows))
    header, table = wide_table(rows)
    print(write_csv(out / "results-wide.csv", header, table))


def cmd_theory(args, cfg, out: Path) -> None:
    if args.mode == "coupling":
        if not args.checkpoint:
            raise ValueError("coupling mode needs --checkpoint")
        params, meta = nets.load_checkpoint(args.checkpoint)
        ds = _dataset_for(args, cfg)
        if ds.s_tilde.shape != (meta["l_lifted"], meta["n_lifted"]):
            raise DimensionMismatch("checkpoint and preamble sizes differ")
        report = coupling_report(params, ds.s_tilde)
    else:
        ds = _dataset_for(args, cfg)
        report = oracle_report(args.arch, ds.s_tilde, ds.config.m, cfg.k_layers,
                               args.sparsity, args.beta, args.sigma, args.batch, cfg.seed,
                               args.weight_method)
    path = out / f"theory-{args.mode}-{report.arch}.json"
    path.write_text(report.to_json() + "\n")
    print(path)


def cmd_weights(args, cfg, out: Path) -> None:
    ds = _dataset_for(args, cfg)
    method = args.method or cfg.weight_method
    cw = cached_weight(ds.s_tilde, method)
    path = save_weight(cw, ds.s_tilde, out / "weights")
    print(path / container.MANIFEST)
    print(f"mu_tilde={cw.mu_tilde_estimate:.6f} constraint_violation={cw.constraint_violation:.3e}")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "theory": cmd_theory,
    "weights": cmd_weights,
}


def _threads() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.to_json() + "\n")
        with threadpool_limits(limits=_threads()):
            COMMANDS[args.command](args, cfg, out)
    except (ValueError, KeyError, FileNotFoundError, container.ContainerError,
            nets.TrainingDiverged, SparsityConditionError) as err:
        print(f"jadce {args.command}: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Final-layer NMSE and detection error versus SNR for trained networks and baselines.

Networks are trained once at the configured SNR and evaluated on test sets
re-drawn at every sweep point.
"""

from _common import parser, setup

from unrolled_jadce import nets
from unrolled_jadce.experiments import (
    LONG_COLUMNS,
    evaluate_dataset,
    resolve_method,
    train_arch,
    wide_table,
    write_csv,
)
from unrolled_jadce.signal_model import synth_dataset


def main():
    p = parser(__doc__.splitlines()[0])
    p.add_argument("--snr", type=float, nargs="+", default=[0, 5, 10, 15, 20, 25, 30])
    args = p.parse_args()
    cfg, out = setup(args)
    ds = synth_dataset(cfg.dataset_config())
    methods = [resolve_method(b, cfg) for b in ("ista_gs", "nesterov_gs")]
    for arch in cfg.archs:
        nets.save_checkpoint(train_arch(cfg, ds, arch), out / f"ckpt-{arch}",
                             extra={"name": arch})
        methods.append(resolve_method(str(out / f"ckpt-{arch}"), cfg))
    rows = evaluate_dataset(methods, ds, cfg, args.snr)
    print(write_csv(out / "snr-sweep.csv", LONG_COLUMNS, rows))
    header, table = wide_table(rows)
    print(write_csv(out / "snr-sweep-wide.csv", header, table))


if __name__ == "__main__":
    main()

"""Per-layer test NMSE of the three trained networks against ISTA-GS and FISTA.

    python scripts/nmse_vs_layers.py --preset desk --set k_layers=12 --out results/layers
"""

from _common import dump, parser, setup

from unrolled_jadce import nets
from unrolled_jadce.experiments import (
    LONG_COLUMNS,
    LOG_COLUMNS,
    evaluate_dataset,
    resolve_method,
    train_arch,
    wide_table,
    write_csv,
)
from unrolled_jadce.signal_model import synth_dataset


def main():
    args = parser(__doc__.splitlines()[0]).parse_args()
    cfg, out = setup(args)
    ds = synth_dataset(cfg.dataset_config(), out / "dataset")
    methods = [resolve_method(b, cfg) for b in ("ista_gs", "nesterov_gs")]
    for arch in cfg.archs:
        result = train_arch(cfg, ds, arch)
        write_csv(out / f"train-log-{arch}.csv", LOG_COLUMNS, result.log_rows)
        nets.save_checkpoint(result, out / f"ckpt-{arch}", extra={"name": arch})
        methods.append(resolve_method(str(out / f"ckpt-{arch}"), cfg))
    rows = evaluate_dataset(methods, ds, cfg)
    print(write_csv(out / "results.csv", LONG_COLUMNS, rows))
    header, table = wide_table(rows)
    print(write_csv(out / "results-wide.csv", header, table))
    dump(out / "final_nmse.json", {r["method"]: r["nmse_db"] for r in rows
                                   if r["layer_or_iter"] == cfg.k_layers})


if __name__ == "__main__":
    main()

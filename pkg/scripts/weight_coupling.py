"""Coupling residual and threshold per layer of a layer-wise trained LISTA-GS."""

from _common import dump, parser, setup

from unrolled_jadce.experiments import LOG_COLUMNS, coupling_report, train_arch, write_csv
from unrolled_jadce.signal_model import synth_dataset


def main():
    args = parser(__doc__).parse_args()
    cfg, out = setup(args, archs=["lista_gs"])
    ds = synth_dataset(cfg.dataset_config())
    result = train_arch(cfg, ds, "lista_gs")
    write_csv(out / "train-log-lista_gs.csv", LOG_COLUMNS, result.log_rows)
    report = coupling_report(result.params, ds.s_tilde)
    (out / "coupling.json").write_text(report.to_json() + "\n")
    rows = [{"layer": k + 1, "residual": r, "theta": t}
            for k, (r, t) in enumerate(zip(report.coupling_residuals, report.thresholds))]
    print(write_csv(out / "coupling.csv", ["layer", "residual", "theta"], rows))
    dump(out / "coupling_summary.json", {"first": rows[0], "last": rows[-1]})


if __name__ == "__main__":
    main()

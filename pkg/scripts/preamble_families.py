"""Final-layer NMSE of trained networks and ISTA-GS for each preamble family."""

from _common import parser, setup

from unrolled_jadce import nets
from unrolled_jadce.experiments import train_arch, write_csv
from unrolled_jadce.metrics import nmse
from unrolled_jadce.signal_model import synth_dataset
from unrolled_jadce.solvers import ista_gs


def main():
    args = parser(__doc__).parse_args()
    cfg, out = setup(args)
    rows = []
    for kind in ("gaussian", "binary", "zadoff_chu"):
        ds = synth_dataset(cfg.dataset_config(preamble_kind=kind))
        s, y, x = ds.s_tilde, ds.test.y_tilde, ds.test.x_tilde
        row = {"preamble": kind, "ista_gs": nmse(ista_gs(y, s, cfg.lam, cfg.iters).final, x)}
        for arch in cfg.archs:
            row[arch] = nmse(nets.forward(train_arch(cfg, ds, arch).params, s, y).final, x)
        rows.append(row)
        print(row)
    print(write_csv(out / "preambles.csv", ["preamble", "ista_gs", *cfg.archs], rows))


if __name__ == "__main__":
    main()

"""Trained networks versus ISTA-GS on preambles of increasing condition number.

ISTA-GS is run twice per preamble: with its own step size and with the step
computed for the kappa = 2 preamble of the same seed.
"""

from _common import parser, setup

from unrolled_jadce import nets
from unrolled_jadce.experiments import train_arch, write_csv
from unrolled_jadce.metrics import nmse
from unrolled_jadce.operators import spectral_norm_sq
from unrolled_jadce.signal_model import synth_dataset
from unrolled_jadce.solvers import ista_gs


def main():
    p = parser(__doc__.splitlines()[0])
    p.add_argument("--kappa", type=float, nargs="+", default=[2, 5, 10, 15])
    args = p.parse_args()
    cfg, out = setup(args)
    step2 = 1.0 / spectral_norm_sq(synth_dataset(cfg.dataset_config(
        condition_number=2.0, p_train=1, n_test=1)).s_tilde)
    rows = []
    for kappa in args.kappa:
        ds = synth_dataset(cfg.dataset_config(condition_number=kappa))
        s, y, x = ds.s_tilde, ds.test.y_tilde, ds.test.x_tilde
        row = {"kappa": kappa,
               "ista_own_step": nmse(ista_gs(y, s, cfg.lam, cfg.iters).final, x),
               "ista_kappa2_step": nmse(ista_gs(y, s, cfg.lam, cfg.iters, step=step2).final, x)}
        for arch in cfg.archs:
            params = train_arch(cfg, ds, arch).params
            row[arch] = nmse(nets.forward(params, s, y).final, x)
        rows.append(row)
        print(row)
    cols = ["kappa", "ista_own_step", "ista_kappa2_step", *cfg.archs]
    print(write_csv(out / "ill-conditioned.csv", cols, rows))


if __name__ == "__main__":
    main()

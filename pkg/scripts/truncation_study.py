"""Corner deltas of truncated reverse-Cholesky factors for generated d=1 instances."""

import argparse
import csv
import os
from dataclasses import dataclass, fields

from uppertri.core import Window
from uppertri.infop import gen_upper, geometric_schedule, truncation_study


@dataclass
class Config:
    instances: int = 12
    max_n: int = 256
    compare_n: int = 7
    seed: int = 1
    out: str = "results/truncation.csv"


def run(cfg: Config):
    os.makedirs(os.path.dirname(cfg.out) or ".", exist_ok=True)
    schedule = geometric_schedule(8, cfg.max_n)
    with open(cfg.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["instance", "band", "c", "support", "n", "delta", "residual"])
        for k in range(cfg.instances):
            band, c, support = 1 + k % 4, 1 + k % 2, 16 + 8 * k
            inst = gen_upper(1, c, support, band, seed=cfg.seed + k)
            rep = truncation_study(inst.Q, schedule, Window(1, cfg.compare_n))
            for n, d, r in rep.rows():
                wr.writerow([k, band, c, support, n, repr(d), repr(r)])
            print(f"instance {k:2d} band {band} c {c} support {support:3d}: "
                  f"last delta {rep.deltas[-1]:.1e}, converged {rep.converged}")
    print("wrote", cfg.out)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(Config):
        p.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    run(Config(**vars(p.parse_args())))


if __name__ == "__main__":
    main()

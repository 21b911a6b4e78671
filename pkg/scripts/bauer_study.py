"""Bauer readout against the Fejer-Riesz factor for a few symbols; writes one CSV per symbol."""

import argparse
import os
from dataclasses import dataclass, fields

import numpy as np

from uppertri.toeplitz import Symbol, bauer_factor, fejer_riesz, write_convergence_csv

SYMBOLS = {
    "half": [1, 0.5],
    "two": [2, 1],
    "quad": [1, 0.3, 0.1],
    "boundary": [1, 1],
}


@dataclass
class Config:
    n: int = 512
    out_dir: str = "results/bauer"


def run(cfg: Config):
    os.makedirs(cfg.out_dir, exist_ok=True)
    for name, a in SYMBOLS.items():
        sym = Symbol.from_analytic(a)
        res = bauer_factor(sym, n=cfg.n)
        ref = fejer_riesz(sym, root_tol=1e-4)
        path = os.path.join(cfg.out_dir, f"{name}.csv")
        write_convergence_csv(path, [(s.n, s.delta, s.residual) for s in res.steps])
        gap = np.abs(res.coeffs - ref.coeffs).max()
        print(f"{name:9s} final delta {res.final_delta:.2e}  |bauer - fejer-riesz| {gap:.2e}  -> {path}")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    for f in fields(Config):
        p.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    run(Config(**vars(p.parse_args())))


if __name__ == "__main__":
    main()

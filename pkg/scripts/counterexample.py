"""Pattern-infeasible 4x4 instance: certificate, local-search oracle, augmented factor.

    python scripts/counterexample.py --trials 2000
"""

import argparse
from dataclasses import asdict, dataclass, fields

import numpy as np

from uppertri.core import Window, pattern_nest_tensor
from uppertri.factor import (
    counterexample_matrix,
    hotel_factor,
    nest_tensor_pattern_for,
    poset_feasibility,
    reverse_cholesky,
    verify_factor,
)


@dataclass
class Config:
    trials: int = 2000
    seed: int = 0
    iters: int = 40


def search(Q, mask, cfg):
    # local import: the oracle lives with the tests and needs scipy
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
    from oracles import pattern_factor_search
    return pattern_factor_search(Q, mask, cfg.trials, cfg.seed, cfg.iters)[0]


def run(cfg: Config):
    Q, _ = counterexample_matrix()
    w = Window(2, 1)
    pat = pattern_nest_tensor(2, w)
    rep = poset_feasibility(Q, pat)
    print("window order:", w.indices())
    print("reverse Cholesky factor:\n", np.real_if_close(reverse_cholesky(Q).factor))
    print("feasible:", rep.feasible, "certificate:", rep.certificate, rep.certificate_indices)
    print(f"best residual over {cfg.trials} local searches: {search(Q, pat.mask(), cfg):.3e}")
    B = hotel_factor(Q, w, 4)
    chk = verify_factor(B.factor, Q, nest_tensor_pattern_for(B.factor, w), tol=1e-12)
    print("augmented columns:", B.col_indices[4:])
    print(f"augmented factor residual {B.residual_fro:.1e}, admissible: {chk.ok}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in fields(Config):
        p.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    run(Config(**vars(p.parse_args())))


if __name__ == "__main__":
    main()

"""CRLB sweep for the Gamma-Cox (negative binomial) scattering model.

theta=1, xi_t=10, p=3; sweeps kappa and reports the bounds on rho, theta
and xi_t.
"""

import argparse
from pathlib import Path

from spherescatter.cli import main


def run(out: Path, mc: int, seed: int, threads: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    main(["crlb", "--family", "negbin", "--rho", "0.99", "--theta", "1", "--xi-t", "10",
          "--sweep", "kappa=20,35,50,75,100,150,200", "--mc-samples", str(mc), "--seed", str(seed),
          "--threads", str(threads), "--out", str(out / "negbin_kappa.csv")])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/crlb"))
    ap.add_argument("--mc-samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    a = ap.parse_args()
    run(a.out, a.mc_samples, a.seed, a.threads)

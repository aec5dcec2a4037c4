"""CRLB sweeps for the Poisson scattering model (p=3).

Two sweeps: over kappa at several lambda_t, and over lambda_t at rho=0.99,
each with the exact and asymptotic likelihood backends.
"""

import argparse
from pathlib import Path

from spherescatter.cli import main


def run(out: Path, mc: int, seed: int, threads: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    mcargs = ["--mc-samples", str(mc), "--seed", str(seed), "--threads", str(threads), "--backend", "both"]
    for lam in (2, 5, 10, 20):
        main(["crlb", "--family", "poisson", "--rho", "0.99", "--lambda-t", str(lam),
              "--sweep", "kappa=20,35,50,75,100,150,200", *mcargs, "--out", str(out / f"poisson_kappa_lt{lam}.csv")])
    main(["crlb", "--family", "poisson", "--rho", "0.99", "--lambda-t", "10",
          "--sweep", "lambda_t=1,2,5,10,15,20,30", *mcargs, "--out", str(out / "poisson_lambda_rho0.99.csv")])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/crlb"))
    ap.add_argument("--mc-samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    a = ap.parse_args()
    run(a.out, a.mc_samples, a.seed, a.threads)

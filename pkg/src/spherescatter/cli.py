"""Command-line front end: CSV/JSON tables for moments, pdfs, samples and CRLB sweeps.

Exit codes: 0 ok, 2 configuration error, 3 series non-convergence,
4 Monte-Carlo failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, vmf
from .estimate import (
    FisherEstimationError,
    LikelihoodError,
    ModelFamily,
    crlb_curve,
    negbin_family,
    poisson_family,
    single_step_family,
)
from .scatter import (
    AsymptoticValidityWarning,
    Fixed,
    NegativeBinomial,
    Poisson,
    ScatteringModel,
    asymptotic_mixture,
    continuous_coefficients,
    equivalent_concentration,
    sample_process,
)
from .specfun import DomainError
from .walk import SeriesNotConverged, cosine_quantiles, directional_pdf, projection_factor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SERIES = 3
EXIT_MC = 4

log = logging.getLogger("spherescatter")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(message)
        self.field = field_name


@dataclass
class ModelSpec:
    """Step law plus counting law. ``kind`` is walk (fixed n steps), poisson or negbin."""

    kind: str
    p: int
    kappa: float
    n: int | None = None
    lambda_t: float | None = None
    theta: float | None = None
    xi_t: float | None = None

    def build(self) -> ScatteringModel:
        if self.kind == "walk":
            counting = Fixed(self.n)
        elif self.kind == "poisson":
            counting = Poisson(self.lambda_t)
        else:
            counting = NegativeBinomial.from_gamma_cox(self.xi_t, self.theta)
        return ScatteringModel(self.p, counting, kappa=self.kappa)


@dataclass
class RunConfig:
    command: str
    model: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


# --- validation -------------------------------------------------------------


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def _resolve_kappa(args, required: bool = True) -> float | None:
    kappa, rho = args.kappa, args.rho
    if kappa is None and rho is None:
        _require(not required, "kappa", "give --kappa or --rho")
        return None
    _require(kappa is None or rho is None, "kappa", "give only one of --kappa and --rho")
    if rho is not None:
        _require(0.0 < rho < 1.0, "rho", "--rho must lie in (0, 1)")
        return vmf.concentration_from_rho(args.p, rho)
    _require(math.isfinite(kappa) and kappa > 0, "kappa", "--kappa must be > 0")
    return float(kappa)


def _check_common(args) -> None:
    _require(args.p >= 2, "p", "--p must be an integer >= 2")
    if getattr(args, "tol", None) is not None:
        _require(args.tol > 0, "tol", "--tol must be > 0")
    if getattr(args, "lmax", None) is not None:
        _require(args.lmax >= 0, "lmax", "--lmax must be >= 0")
    if getattr(args, "threads", None) is not None:
        _require(args.threads >= 1, "threads", "--threads must be >= 1")


def _model_spec(args) -> ModelSpec:
    _check_common(args)
    kappa = _resolve_kappa(args)
    kind = args.model
    if kind is None:
        if args.lambda_t is not None:
            kind = "poisson"
        elif args.theta is not None or args.xi_t is not None:
            kind = "negbin"
        else:
            kind = "walk"
    if kind == "walk":
        n = 1 if args.n is None else args.n
        _require(n >= 1, "n", "--n must be >= 1")
        return ModelSpec("walk", args.p, kappa, n=n)
    if kind == "poisson":
        _require(args.lambda_t is not None, "lambda_t", "poisson model needs --lambda-t")
        _require(args.lambda_t > 0, "lambda_t", "--lambda-t must be > 0")
        return ModelSpec("poisson", args.p, kappa, lambda_t=args.lambda_t)
    _require(args.theta is not None and args.theta > 0, "theta", "negbin model needs --theta > 0")
    _require(args.xi_t is not None and args.xi_t > 0, "xi_t", "negbin model needs --xi-t > 0")
    return ModelSpec("negbin", args.p, kappa, theta=args.theta, xi_t=args.xi_t)


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    """``name=v1,v2,...`` or ``name=start:stop:count`` (inclusive linspace)."""
    if "=" not in text:
        raise ConfigError("sweep", "expected name=values")
    name, spec = text.split("=", 1)
    name = name.strip().replace("-", "_")
    try:
        if ":" in spec:
            a, b, k = spec.split(":")
            vals = np.linspace(float(a), float(b), int(k)).tolist()
        else:
            vals = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError("sweep", f"cannot parse sweep values: {exc}") from None
    if not vals:
        raise ConfigError("sweep", "empty sweep")
    return name, vals


# --- output -----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def render_csv(cfg: RunConfig, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# sphere-scatter {__version__} config={cfg.to_json()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def render_json(cfg: RunConfig, columns, rows, extra: dict | None = None) -> str:
    doc = {
        "version": __version__,
        "config": asdict(cfg),
        "columns": list(columns),
        "rows": [_jsonable(list(r)) for r in rows],
    }
    if extra:
        doc["diagnostics"] = _jsonable(extra)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _emit(args, cfg: RunConfig, columns, rows, sidecar: dict | None = None) -> None:
    if args.format == "json":
        text = render_json(cfg, columns, rows, sidecar)
    else:
        text = render_csv(cfg, columns, rows)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text)
    if sidecar is not None and args.format == "csv":
        side = {"version": __version__, "config": asdict(cfg), **_jsonable(sidecar)}
        out.with_suffix(".json").write_text(json.dumps(side, sort_keys=True, indent=1) + "\n")


def _streams(seed: int, workers: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(workers)]


def _draw(m: ScatteringModel, count: int, seed: int, workers: int) -> tuple[np.ndarray, np.ndarray]:
    sizes = [count // workers + (1 if i < count % workers else 0) for i in range(workers)]
    t_parts, n_parts = [], []
    for size, rng in zip(sizes, _streams(seed, workers)):
        if size:
            x, n = sample_process(m, size, rng)
            t_parts.append(np.clip(x @ m.mu.coords, -1.0, 1.0))
            n_parts.append(n)
    return np.concatenate(t_parts), np.concatenate(n_parts)


# --- commands ---------------------------------------------------------------


def cmd_fourier(args) -> int:
    _check_common(args)
    kappa = _resolve_kappa(args)
    n = 1 if args.n is None else args.n
    _require(n >= 1, "n", "--n must be >= 1")
    lmax = 10 if args.lmax is None else args.lmax
    cfg = RunConfig("fourier", {"p": args.p, "kappa": kappa, "n": n}, {"lmax": lmax})
    f = vmf.fourier_coefficients(args.p, kappa, lmax)
    k_eq = float(equivalent_concentration(kappa, n))
    ft = vmf.fourier_coefficients(args.p, k_eq, lmax)
    rows = [(ell, f[ell], f[ell] ** n, ft[ell]) for ell in range(lmax + 1)]
    _emit(args, cfg, ["ell", "fhat", "fhat_n", "ftilde_n"], rows, None)
    return EXIT_OK


def _pdf_table(spec: ModelSpec, t: np.ndarray, backend: str, tol: float, lmax: int | None):
    m = spec.build()
    cols, data = ["t"], [t]
    diag: dict = {"P0": m.p0}
    if backend in ("exact", "both"):
        h, _ = continuous_coefficients(m)
        kw = {"tol": tol} if lmax is None else {"tol": tol, "max_order": lmax}
        g = directional_pdf(h, t, **kw)
        cols.append("density")
        data.append(projection_factor(spec.p, t) * g)
    if backend in ("asymptotic", "both"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", AsymptoticValidityWarning)
            mix = asymptotic_mixture(m)
        diag["asymptotic_warning"] = "; ".join(str(w.message) for w in caught)
        diag["mixture_components"] = int(mix.n.size)
        cols.append("density_asym")
        data.append(mix.projected_density(t))
    if backend == "both":
        a, b = data[1], data[2]
        diag["max_gap_over_peak"] = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return m, cols, data, diag


def cmd_pdf(args, command: str = "pdf") -> int:
    spec = _model_spec(args)
    _require(args.grid >= 2, "grid", "--grid must be >= 2")
    _require(-1.0 <= args.t_min < args.t_max <= 1.0, "t_min", "need -1 <= --t-min < --t-max <= 1")
    backend = "both" if command == "compare-asymptotic" else args.backend
    opts = {"grid": args.grid, "t_min": args.t_min, "t_max": args.t_max, "backend": backend,
            "tol": args.tol, "lmax": args.lmax}
    if command == "compare-asymptotic":
        _require(args.count >= 2, "count", "--count must be >= 2")
        opts.update({"count": args.count, "seed": args.seed, "threads": args.threads,
                     "qq_points": args.qq_points})
    cfg = RunConfig(command, asdict(spec), opts)
    t = np.linspace(args.t_min, args.t_max, args.grid)
    m, cols, data, diag = _pdf_table(spec, t, backend, args.tol, args.lmax)
    rows = list(zip(*data))
    if command == "compare-asymptotic":
        qq_rows, r2 = _qq(m, args.count, args.seed, args.threads, args.qq_points)
        diag["qq_r2"] = r2
        _emit(args, cfg, cols, rows, diag)
        qq_cols = ["prob", "empirical", "asymptotic"]
        if args.format == "json":
            text = render_json(cfg, qq_cols, qq_rows, {"qq_r2": r2})
        else:
            text = render_csv(cfg, qq_cols, qq_rows)
        if args.out is None:
            sys.stdout.write(text)
        else:
            out = Path(args.out)
            out.with_name(out.stem + ".qq" + out.suffix).write_text(text)
        return EXIT_OK
    _emit(args, cfg, cols, rows, diag)
    return EXIT_OK


def qq_data(m: ScatteringModel, t_sample: np.ndarray, n_events: np.ndarray, points: int):
    """Empirical vs asymptotic-mixture quantiles of the scattered cosines, and R^2."""
    ts = t_sample[n_events > 0]
    if ts.size < 2:
        raise FisherEstimationError("too few scattered draws for a qq comparison")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AsymptoticValidityWarning)
        mix = asymptotic_mixture(m)
    prob = (np.arange(points) + 0.5) / points
    emp = np.quantile(ts, prob)
    asym = cosine_quantiles(mix.density, m.p, prob)
    r2 = float(np.corrcoef(emp, asym)[0, 1] ** 2)
    return prob, emp, asym, r2


def _qq(m, count, seed, threads, points):
    t, n = _draw(m, count, seed, threads)
    prob, emp, asym, r2 = qq_data(m, t, n, points)
    return list(zip(prob, emp, asym)), r2


def cmd_sample(args) -> int:
    spec = _model_spec(args)
    _require(args.count >= 1, "count", "--count must be >= 1")
    cfg = RunConfig("sample", asdict(spec), {"count": args.count, "seed": args.seed, "threads": args.threads})
    m = spec.build()
    t, n = _draw(m, args.count, args.seed, args.threads)
    diag = {"P0": m.p0, "direct_fraction": float(np.mean(n == 0)), "mean_cosine": float(np.mean(t))}
    _emit(args, cfg, ["cosine", "n_events"], zip(t, n), diag)
    return EXIT_OK


def _family(args) -> ModelFamily:
    _check_common(args)
    _require(args.mc_samples >= 10_000, "mc_samples", "--mc-samples must be >= 10000")
    kind = args.family
    rho = args.rho
    if rho is None:
        kappa = _resolve_kappa(args, required=False)
        rho = 0.99 if kappa is None else vmf.mean_resultant_length(args.p, kappa)
    elif args.kappa is not None:
        raise ConfigError("kappa", "give only one of --kappa and --rho")
    _require(0.0 < rho < 1.0, "rho", "--rho must lie in (0, 1)")
    if kind == "poisson":
        lt = 10.0 if args.lambda_t is None else args.lambda_t
        _require(lt > 0, "lambda_t", "--lambda-t must be > 0")
        return poisson_family(args.p, rho, lt)
    if kind == "negbin":
        theta = 1.0 if args.theta is None else args.theta
        xi_t = 10.0 if args.xi_t is None else args.xi_t
        _require(theta > 0, "theta", "--theta must be > 0")
        _require(xi_t > 0, "xi_t", "--xi-t must be > 0")
        return negbin_family(args.p, rho, theta, xi_t)
    return single_step_family(args.p, rho=rho)


def cmd_crlb(args) -> int:
    fam = _family(args)
    name, values = _parse_sweep(args.sweep)
    allowed = set(fam.names) | ({"kappa"} if "rho" in fam.names else set())
    _require(name in allowed, "sweep", f"cannot sweep {name!r}; choose from {sorted(allowed)}")
    for v in values:
        _require(v > 0 and (name != "rho" or v < 1), "sweep", f"sweep value {v} outside the domain of {name}")
    backends = ["exact", "asymptotic"] if args.backend == "both" else [args.backend]
    cfg = RunConfig(
        "crlb",
        {"family": fam.kind, "p": fam.p, **fam.as_dict()},
        {"sweep": name, "values": values, "mc_samples": args.mc_samples, "seed": args.seed,
         "threads": args.threads, "backend": args.backend},
    )
    rows_all: list[dict] = []
    for be in backends:
        rows_all.extend(crlb_curve(fam, name, values, args.mc_samples, args.seed, be, args.threads))
    cols = [name, "backend"]
    for pname in fam.names:
        cols += [f"crlb_{pname}", f"crlb_{pname}_se"]
    cols.append("error")
    rows = [[r.get(c, math.nan) for c in cols] for r in rows_all]
    _emit(args, cfg, cols, rows, None)
    if all(r["error"] for r in rows_all):
        return EXIT_MC
    return EXIT_OK


# --- argument parsing -------------------------------------------------------


def _add_model_flags(sp: argparse.ArgumentParser, with_counts: bool = True) -> None:
    sp.add_argument("--p", type=int, default=3, help="ambient dimension (sphere S^{p-1})")
    sp.add_argument("--kappa", type=float, help="vMF step concentration")
    sp.add_argument("--rho", type=float, help="step mean resultant length, alternative to --kappa")
    sp.add_argument("--n", type=int, help="number of walk steps")
    if with_counts:
        sp.add_argument("--model", choices=["walk", "poisson", "negbin"],
                        help="default: inferred from the flags given")
        sp.add_argument("--lambda-t", dest="lambda_t", type=float, help="Poisson mean count")
        sp.add_argument("--theta", type=float, help="Gamma-Cox rate")
        sp.add_argument("--xi-t", dest="xi_t", type=float, help="Gamma-Cox shape")


def _add_io_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", help="output file (default stdout)")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sphere-scatter", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fourier", help="Legendre moments of a vMF step, its n-fold walk and the equivalent vMF")
    _add_model_flags(sp, with_counts=False)
    sp.add_argument("--lmax", type=int, help="highest order (default 10)")
    _add_io_flags(sp)

    helps = {
        "pdf": "projected pdf of the cosine on a grid",
        "compare-asymptotic": "exact vs asymptotic pdf plus a qq table of simulated cosines",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _add_model_flags(sp)
        sp.add_argument("--grid", type=int, default=201, help="number of t points")
        sp.add_argument("--t-min", dest="t_min", type=float, default=-1.0)
        sp.add_argument("--t-max", dest="t_max", type=float, default=1.0)
        sp.add_argument("--tol", type=float, default=1e-8, help="series truncation tolerance")
        sp.add_argument("--lmax", type=int, help="maximum series order")
        if name == "pdf":
            sp.add_argument("--backend", choices=["exact", "asymptotic", "both"], default="exact")
        else:
            sp.add_argument("--count", type=int, default=100_000, help="samples for the qq table")
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--threads", type=int, default=1)
            sp.add_argument("--qq-points", dest="qq_points", type=int, default=1000)
        _add_io_flags(sp)

    sp = sub.add_parser("sample", help="draw cosines and event counts")
    _add_model_flags(sp)
    sp.add_argument("--count", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    _add_io_flags(sp)

    sp = sub.add_parser("crlb", help="Monte-Carlo CRLB sweep")
    sp.add_argument("--family", choices=["poisson", "negbin", "single"], default="poisson")
    _add_model_flags(sp)
    sp.add_argument("--sweep", default="kappa=20,50,100,200",
                    help="name=v1,v2,... or name=start:stop:count")
    sp.add_argument("--mc-samples", dest="mc_samples", type=int, default=20_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--backend", choices=["exact", "asymptotic", "both"], default="exact")
    _add_io_flags(sp)
    return ap


def _setup_logging() -> None:
    level = os.environ.get("SPHERE_SCATTER_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _fail(code: int, kind: str, message: str, field_name: str | None = None) -> int:
    err = {"error": kind, "message": message}
    if field_name is not None:
        err["field"] = field_name
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    handlers = {
        "fourier": cmd_fourier,
        "pdf": cmd_pdf,
        "compare-asymptotic": lambda a: cmd_pdf(a, "compare-asymptotic"),
        "sample": cmd_sample,
        "crlb": cmd_crlb,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.field)
    except DomainError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), "model")
    except SeriesNotConverged as exc:
        return _fail(EXIT_SERIES, "series", f"{exc} (order {exc.order}, tail {exc.tail:.3g})")
    except (FisherEstimationError, LikelihoodError) as exc:
        return _fail(EXIT_MC, "monte-carlo", str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: ``bnpqueue {simulate,infer,transforms,experiment}``.

Exit codes: 0 on success, 1 on runtime or numeric errors, 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .arrival_inference import bayes_lambda, bvm_lambda, update_gamma
from .asymptotics import bvm_experiment, consistency_experiment
from .config import RunConfig
from .exceptions import BnpQueueError, ConfigurationError, UnsupportedDataError
from .gridcdf import GridCdf
from .queue_core import SampleData, TransformSet, simulate_mg1
from .rng import MAX_SEED, make_rng
from .transforms import build_transforms, stability_probability, z_grid

FORMAT_VERSION = "1"
KINDS = ("consistency", "bvm-cdf", "bvm-lst", "bvm-mean", "bvm-w", "bvm-lambda")
_BVM_FUNCTIONAL = {"bvm-cdf": "cdf", "bvm-lst": "lst", "bvm-mean": "mean", "bvm-w": "waiting_lst"}


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (u64)")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")

    p = argparse.ArgumentParser(prog="bnpqueue", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"bnpqueue {__version__} (file format {FORMAT_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate M/G/1 data")
    s.add_argument("--n", type=int, default=100)

    s = sub.add_parser("infer", parents=[common], help="posterior summaries from data")
    s.add_argument("--data", type=Path, help="a,s,censored CSV (default OUT/data.csv)")
    s.add_argument("--draws", type=int, help="Monte Carlo draws for P(rho < 1)")

    s = sub.add_parser("transforms", parents=[common], help="transform table from a posterior")
    s.add_argument("--posterior", type=Path, help="posterior JSON (default OUT/posterior.json)")

    s = sub.add_parser("experiment", parents=[common], help="consistency and BvM experiments")
    s.add_argument("--kind", required=True, choices=KINDS)
    s.add_argument("--n", type=int)
    s.add_argument("--draws", type=int)
    return p


def cmd_simulate(cfg: RunConfig, n: int, seed: int, out: Path) -> Path:
    if n < 0:
        raise ConfigurationError("--n must be nonnegative")
    data = simulate_mg1(cfg.truth, n, seed)
    return _write(out / "data.csv", data.to_csv())


def cmd_infer(cfg: RunConfig, data_path: Path, seed: int, out: Path, draws: int | None = None) -> Path:
    try:
        text = data_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnsupportedDataError(f"cannot read {data_path}: {exc}") from None
    data = SampleData.from_csv(text)
    lam_post = update_gamma(cfg.prior.gamma(), data)
    bs_post = cfg.prior.beta_stacy(cfg.truth).update(data)
    T = build_transforms(lam_post, bs_post, trunc_M=cfg.prior.M_bound)
    G = bs_post.bayes_cdf()
    k = draws if draws is not None else cfg.k
    stab = stability_probability(lam_post, bs_post, k, seed)
    summary = {
        "n": data.n,
        "lambda_hat": bayes_lambda(lam_post),
        "mu_hat": T.mu_hat,
        "rho_hat": T.rho,
        "gamma_posterior": lam_post.to_dict(),
        "p_stable": stab.p_stable,
        "se": stab.se,
        "k": stab.k,
        "bound": cfg.prior.M_bound,
        "G_hat": G.to_dict(),
    }
    _write(out / "G_hat.csv", G.to_csv())
    return _write(out / "posterior.json", _dump_json(summary))


def cmd_transforms(cfg: RunConfig, posterior_path: Path, out: Path) -> Path:
    try:
        post = json.loads(posterior_path.read_text(encoding="utf-8"))
        G = GridCdf.from_dict(post["G_hat"])
        lam, mu, rho = float(post["lambda_hat"]), float(post["mu_hat"]), float(post["rho_hat"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UnsupportedDataError(f"cannot read posterior {posterior_path}: {exc}") from None
    if post.get("bound") is not None:
        G = G.restrict(float(post["bound"]))
    T = TransformSet(lam, G.lst, rho, mu, bound=post.get("bound"), mu_hat=mu)
    z = np.asarray(cfg.z_grid, dtype=float) if cfg.z_grid is not None else z_grid()
    return _write(out / "transforms.csv", T.to_csv(z))


def cmd_experiment(cfg: RunConfig, kind: str, seed: int, out: Path,
                   n: int | None = None, draws: int | None = None) -> Path:
    n = cfg.n if n is None else n
    draws = cfg.draws if draws is None else draws
    if kind == "consistency":
        seeds = [int(make_rng(seed, "consistency", s).integers(2**63)) for s in cfg.seeds]
        table = consistency_experiment(cfg.truth, cfg.prior, cfg.n_list, seeds, z=cfg.z_grid)
        return _write(out / "consistency.csv", table.to_csv())
    if kind == "bvm-lambda":
        rep = bvm_lambda(cfg.truth.lambda0, n, draws, seed, cfg.prior.gamma())
        return _write(out / "bvm_lambda.json", rep.to_json() + "\n")
    functional = _BVM_FUNCTIONAL[kind]
    grid = cfg.w_grid if functional == "waiting_lst" else cfg.grid
    rep = bvm_experiment(cfg.truth, cfg.prior, n, draws, seed, grid, functional, cfg.time_change)
    return _write(out / f"bvm_{functional}.json", _dump_json(rep.to_dict()))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        out = args.out if args.out is not None else cfg.out_dir
        if args.command == "simulate":
            path = cmd_simulate(cfg, args.n, args.seed, out)
        elif args.command == "infer":
            path = cmd_infer(cfg, args.data or out / "data.csv", args.seed, out, args.draws)
        elif args.command == "transforms":
            path = cmd_transforms(cfg, args.posterior or out / "posterior.json", out)
        else:
            path = cmd_experiment(cfg, args.kind, args.seed, out, args.n, args.draws)
    except ConfigurationError as exc:
        print(f"bnpqueue: configuration error: {exc}", file=sys.stderr)
        return 2
    except (BnpQueueError, ArithmeticError, ValueError, OSError) as exc:
        print(f"bnpqueue: error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

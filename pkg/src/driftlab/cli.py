"""driftlab command-line interface.

Subcommands: run, simulate, stats, fit, sample, invariant, poisson,
study {rate,bvm,invariant,coverage}, describe.  Exit codes: 0 success,
2 configuration/schema errors, 3 numerical failures, 4 I/O errors; the
failing stage is named on stderr.
"""

import argparse
import os
import sys

import numpy as np

from . import artifacts, elliptic, posterior as post_mod, uq
from .basis import PriorSpec, build_basis
from .config import dump_config, load_config
from .errors import (ArtifactError, ConfigurationError, NumericalError,
                     ShapeError, StatisticsError)
from .likelihood import sufficient_stats
from .presets import drift_preset
from .sde import simulate


def _drift_from_config(cfg):
    model = cfg["model"]
    spec = model["drift"]
    if isinstance(spec, str):
        spec = {"preset": spec, "params": {}, "coefficients": None}
    if spec.get("coefficients"):
        return artifacts.read_field(spec["coefficients"])
    b, _ = drift_preset(spec.get("preset") or "zero", model["d"],
                        **(spec.get("params") or {}))
    return b


def _basis_from_config(cfg):
    bs = cfg["basis"]
    J = bs["J"]
    if J is None:
        J = PriorSpec.from_horizon(cfg["discretization"]["T"], bs["a"],
                                   cfg["model"]["d"], bs["alpha"]).J
    spec = build_basis(bs["family"], J, cfg["model"]["d"],
                       S=None if bs["family"] == "haar" else bs["S"])
    prior = PriorSpec(alpha=bs["alpha"], a=bs["a"], J=J, d=cfg["model"]["d"])
    return spec, prior


def _study_config(cfg):
    st = cfg["study"]
    model = cfg["model"]
    drift = model["drift"]
    if isinstance(drift, str):
        drift = {"preset": drift, "params": {}}
    horizons = st["horizons"] or [cfg["discretization"]["T"]]
    return uq.StudyConfig(
        d=model["d"], drift=drift.get("preset") or "zero",
        drift_params=drift.get("params") or {},
        a=cfg["basis"]["a"], alpha=cfg["basis"]["alpha"], J=cfg["basis"]["J"],
        family=cfg["basis"]["family"], S=cfg["basis"]["S"],
        horizons=tuple(float(t) for t in horizons),
        replications=st["replications"], seed=cfg["discretization"]["seed"],
        delta=cfg["discretization"]["delta"], K=cfg["solver"]["K"],
        x0=tuple(model["x0"]))


_NAMED_FUNCTIONALS = {
    "cos1": lambda p: np.cos(2 * np.pi * p[:, 0]),
    "sin1": lambda p: np.sin(2 * np.pi * p[:, 0]),
    "cos2": lambda p: np.cos(4 * np.pi * p[:, 0]),
    "box": lambda p: (p[:, 0] < 0.5).astype(float),
}


def _rhs_field(spec_str, K, d):
    kind, _, rest = spec_str.partition(":")
    if kind != "cos":
        raise ConfigurationError(f"unsupported rhs spec {spec_str!r}; use cos:FREQ[:AXIS]")
    parts = rest.split(":") if rest else ["1"]
    freq = int(parts[0])
    axis = int(parts[1]) if len(parts) > 1 else 0
    return elliptic.field_from_callable(
        lambda p: np.cos(2 * np.pi * freq * p[:, axis]), K, d)


def _cmd_simulate(args):
    cfg = load_config(args.config)
    b = _drift_from_config(cfg)
    disc = cfg["discretization"]
    seed = args.seed if args.seed is not None else disc["seed"]
    path = simulate(b, np.asarray(cfg["model"]["x0"], dtype=float),
                    disc["T"], disc["delta"], seed)
    artifacts.write_path(path, args.out)
    print(f"wrote {args.out}: {artifacts.describe(args.out)}")
    return 0


def _cmd_stats(args):
    path = artifacts.read_path(args.path)
    cfg = load_config(args.basis)
    cfg["model"]["d"] = path.d
    cfg["discretization"]["T"] = path.T
    spec, _ = _basis_from_config(cfg)
    stats = sufficient_stats(path, spec,
                             path_hash=artifacts.file_digest(args.path).hex())
    artifacts.write_stats(stats, args.out,
                          path_digest=artifacts.file_digest(args.path))
    print(f"wrote {args.out}: {artifacts.describe(args.out)}")
    return 0


def _cmd_fit(args):
    cfg = load_config(args.prior)
    stats = artifacts.read_stats(args.stats)
    bs = cfg["basis"]
    prior = PriorSpec(alpha=bs["alpha"], a=bs["a"], J=stats.spec.J, d=stats.spec.d)
    post = post_mod.fit(stats, prior,
                        stats_hash=artifacts.file_digest(args.stats).hex())
    artifacts.write_posterior(post, args.out,
                              stats_digest=artifacts.file_digest(args.stats))
    print(f"wrote {args.out}: {artifacts.describe(args.out)}")
    return 0


def _cmd_sample(args):
    post = artifacts.read_posterior(args.post)
    draws = post_mod.sample(post, args.n, seed=args.seed)
    artifacts.write_draws(draws, args.out,
                          post_digest=artifacts.file_digest(args.post))
    print(f"wrote {args.out}: {artifacts.describe(args.out)}")
    return 0


def _cmd_invariant(args):
    if args.drift.endswith((".yaml", ".yml")):
        cfg = load_config(args.drift)
        b = _drift_from_config(cfg)
        d = cfg["model"]["d"]
    else:
        b = artifacts.read_field(args.drift)
        d = b.spec.d
    mu = elliptic.invariant_measure(b, K=args.K, d=d)
    artifacts.write_fourier(mu.density, args.out)
    print(f"wrote {args.out}: {artifacts.describe(args.out)} "
          f"min_grid={mu.min_grid_value:.6g}")
    return 0


def _cmd_poisson(args):
    if args.drift.endswith((".yaml", ".yml")):
        cfg = load_config(args.drift)
        b = _drift_from_config(cfg)
        d = cfg["model"]["d"]
    else:
        b = artifacts.read_field(args.drift)
        d = b.spec.d
    f = _rhs_field(args.rhs, args.K, d)
    mu = elliptic.invariant_measure(b, K=args.K, d=d)
    fbar = elliptic.inner_l2(f, elliptic._mu_field(mu, args.K))
    cen = f.coeffs.copy()
    cen[(args.K,) * d] -= fbar
    u = elliptic.solve_poisson(b, elliptic.FourierField(d, args.K, cen), mu)
    artifacts.write_fourier(u, args.out)
    print(f"wrote {args.out}: {artifacts.describe(args.out)}")
    return 0


def _cmd_study(args):
    cfg = load_config(args.config)
    cfg["study"]["kind"] = args.kind
    scfg = _study_config(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    funcs = [_NAMED_FUNCTIONALS[name] for name in cfg["study"]["functionals"]]
    if args.kind == "rate":
        report = uq.rate_study(scfg, norm=cfg["study"]["norm"],
                               threads=args.threads)
    elif args.kind == "bvm":
        report = uq.bvm_check(scfg, funcs[0])
    elif args.kind == "invariant":
        report = uq.invariant_clt_check(scfg, funcs[0],
                                        n_draws=cfg["study"]["draws"])
    elif args.kind == "coverage":
        report = uq.coverage_study(scfg, funcs, threads=args.threads)
    else:
        raise ConfigurationError(f"unknown study kind {args.kind!r}")
    csv_path = os.path.join(args.out_dir, f"{args.kind}.csv")
    report.write_csv(csv_path)
    summary_path = os.path.join(args.out_dir, f"{args.kind}_summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(report.summary_text() + "\n")
    dump_config(cfg, os.path.join(args.out_dir, "resolved.config"))
    print(report.summary_text())
    return 0


def _cmd_describe(args):
    digests = {}
    stored = []  # (artifact, upstream-kind, stored hash)
    for fname in args.artifacts:
        print(artifacts.describe(fname))
        with open(fname, "rb") as fh:
            magic = fh.read(8)
        digests[artifacts.file_digest(fname).hex()] = (fname, magic)
        if magic == artifacts.MAGIC_STAT:
            stored.append((fname, artifacts.MAGIC_PATH,
                           artifacts.read_stats(fname).path_hash))
        elif magic == artifacts.MAGIC_POST:
            stored.append((fname, artifacts.MAGIC_STAT,
                           artifacts.read_posterior(fname).stats_hash))
    # verify whatever parts of the chain are present
    for fname, want_magic, ref in stored:
        if ref == "00" * 32:
            continue
        if ref in digests:
            print(f"chain ok: {fname} <- {digests[ref][0]}")
        elif any(magic == want_magic for _, magic in digests.values()):
            print(f"chain MISMATCH: {fname} references {ref[:16]}..., "
                  f"not among the given artifacts", file=sys.stderr)
            return 2
    return 0


def _cmd_run(args):
    cfg = load_config(args.config)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "reports"), exist_ok=True)
    dump_config(cfg, os.path.join(out, "resolved.config"))

    stage = "simulate"
    try:
        b = _drift_from_config(cfg)
        disc = cfg["discretization"]
        seed = args.seed if args.seed is not None else disc["seed"]
        path = simulate(b, np.asarray(cfg["model"]["x0"], dtype=float),
                        disc["T"], disc["delta"], seed)
        path_file = os.path.join(out, "path.bin")
        artifacts.write_path(path, path_file)

        stage = "stats"
        spec, prior = _basis_from_config(cfg)
        stats = sufficient_stats(path, spec,
                                 path_hash=artifacts.file_digest(path_file).hex())
        stats_file = os.path.join(out, "stats.bin")
        artifacts.write_stats(stats, stats_file,
                              path_digest=artifacts.file_digest(path_file))

        stage = "fit"
        post = post_mod.fit(stats, prior,
                            stats_hash=artifacts.file_digest(stats_file).hex())
        post_file = os.path.join(out, "post.bin")
        artifacts.write_posterior(post, post_file,
                                  stats_digest=artifacts.file_digest(stats_file))

        if cfg["study"]["kind"] is not None:
            stage = f"study:{cfg['study']['kind']}"
            scfg = _study_config(cfg)
            funcs = [_NAMED_FUNCTIONALS[n] for n in cfg["study"]["functionals"]]
            kind = cfg["study"]["kind"]
            if kind == "rate":
                report = uq.rate_study(scfg, norm=cfg["study"]["norm"])
            elif kind == "bvm":
                report = uq.bvm_check(scfg, funcs[0])
            elif kind == "invariant":
                report = uq.invariant_clt_check(scfg, funcs[0],
                                                n_draws=cfg["study"]["draws"])
            else:
                report = uq.coverage_study(scfg, funcs)
            report.write_csv(os.path.join(out, "reports", f"{kind}.csv"))
            with open(os.path.join(out, "reports", f"{kind}_summary.txt"), "w") as fh:
                fh.write(report.summary_text() + "\n")
    except Exception:
        print(f"pipeline failed in stage: {stage}", file=sys.stderr)
        raise
    for f in ("path.bin", "stats.bin", "post.bin"):
        print(f"{f}: {artifacts.describe(os.path.join(out, f))}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="driftlab", description=__doc__)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for replication loops (reductions stay ordered)")
    p.add_argument("--deterministic", action="store_true", default=True,
                   help="force ordered reductions (always on in this implementation)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="full pipeline: simulate -> stats -> fit [-> study]")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=_cmd_run)

    s = sub.add_parser("simulate", help="simulate a diffusion path")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=_cmd_simulate)

    s = sub.add_parser("stats", help="sufficient statistics of a stored path")
    s.add_argument("--path", required=True)
    s.add_argument("--basis", "--config", dest="basis", required=True,
                   help="config document carrying the basis block")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_stats)

    s = sub.add_parser("fit", help="Gaussian posterior from stored statistics")
    s.add_argument("--stats", required=True)
    s.add_argument("--prior", "--config", dest="prior", required=True,
                   help="config document carrying the prior block")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_fit)

    s = sub.add_parser("sample", help="draw posterior coefficient samples")
    s.add_argument("--post", required=True)
    s.add_argument("-n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="draws.bin")
    s.set_defaults(fn=_cmd_sample)

    s = sub.add_parser("invariant", help="stationary density of a drift")
    s.add_argument("--drift", required=True, help="coefficient artifact or config")
    s.add_argument("-K", type=int, default=32)
    s.add_argument("--out", default="invariant.bin")
    s.set_defaults(fn=_cmd_invariant)

    s = sub.add_parser("poisson", help="solve the generator Poisson equation")
    s.add_argument("--drift", required=True)
    s.add_argument("--rhs", required=True, help="cos:FREQ[:AXIS]")
    s.add_argument("-K", type=int, default=32)
    s.add_argument("--out", default="poisson.bin")
    s.set_defaults(fn=_cmd_poisson)

    s = sub.add_parser("study", help="simulation study")
    s.add_argument("kind", choices=["rate", "bvm", "invariant", "coverage"])
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(fn=_cmd_study)

    s = sub.add_parser("describe", help="summarize binary artifacts")
    s.add_argument("artifacts", nargs="+")
    s.set_defaults(fn=_cmd_describe)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, ShapeError, ArtifactError, StatisticsError) as exc:
        print(f"driftlab {args.command}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"driftlab {args.command}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"driftlab {args.command}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 numerical failure (a check or solve did not meet
its tolerance), 2 input error.  ``VARBW_LOG=debug|info`` raises log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as vio
from .errors import InputError, NumericalError, ToyRequiresSingleJump, VarBWError, ZeroFunction
from .kernels import ToyModelParams, kernel_matrix, kernel_toy, pw_projection, sinc
from .profile import BandwidthProfile, load_profile, propagate_coefficients
from .quadrature import QuadratureConfig
from .signret import SignRetrievalConfig, sign_retrieve
from .spectral import (
    GridFunction,
    SpectralCutoff,
    breakpoint_grid,
    edge_energy_fraction,
    synthesize_grid,
)

log = logging.getLogger("varbw")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2
KERNEL_TOL = {0: 1e-8, 1: 1e-6}
CONFIG_ALIASES = {"lambda": "lam", "quad-order": "quad_order", "zero-tol": "zero_tol",
                  "pattern-ratio": "pattern_ratio"}


@dataclass(frozen=True)
class RunConfig:
    profile: str | None = None
    lam: float = 4.0
    nodes: int = 48
    quad_order: int = 10
    window: float = 40.0
    dx: float = 0.02
    zero_tol: float | None = None
    confidence: float = 1.5
    pattern_ratio: float = 10.0
    seed: int | None = None
    out: str = "."

    def __post_init__(self):
        for name in ("lam", "nodes", "quad_order", "window", "dx", "confidence", "pattern_ratio"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise InputError(f"config value {name} must be positive, got {v!r}")
        if self.zero_tol is not None and not self.zero_tol >= 0:
            raise InputError(f"zero_tol must be >= 0, got {self.zero_tol!r}")

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> "RunConfig":
        base = {}
        if getattr(args, "config", None):
            try:
                base = json.loads(Path(args.config).read_text())
            except OSError as exc:
                raise InputError(f"{args.config}: cannot read ({exc.strerror})") from None
            except json.JSONDecodeError as exc:
                raise InputError(f"{args.config}:{exc.lineno}: invalid JSON: {exc.msg}") from None
            if not isinstance(base, dict):
                raise InputError(f"{args.config}: expected a JSON object")
            base = {CONFIG_ALIASES.get(k, k): v for k, v in base.items()}
            known = {f.name for f in fields(cls)}
            extra = sorted(set(base) - known)
            if extra:
                raise InputError(f"{args.config}: unknown config keys {extra}")
        cfg = cls(**base)
        overrides = {f.name: getattr(args, f.name) for f in fields(cls)
                     if getattr(args, f.name, None) is not None}
        return replace(cfg, **overrides)

    def load_profile(self) -> BandwidthProfile:
        if not self.profile:
            raise InputError("--profile is required for this command")
        return load_profile(self.profile)

    @property
    def cutoff(self) -> SpectralCutoff:
        return SpectralCutoff(self.lam)

    @property
    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(order=self.quad_order)

    def out_path(self, name: str) -> Path:
        return Path(self.out) / name


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON file with run configuration (flags override it)")
    g.add_argument("--profile", help="bandwidth profile JSON")
    g.add_argument("--lambda", dest="lam", type=float, help="spectral cutoff Lambda (default 4)")
    g.add_argument("--nodes", type=int, help="density nodes on (0, sqrt(Lambda)] (default 48)")
    g.add_argument("--quad-order", dest="quad_order", type=int, help="Gauss-Legendre nodes per panel (default 10)")
    g.add_argument("--window", type=float, help="half-width of the sample window (default 40)")
    g.add_argument("--dx", type=float, help="sample spacing (default 0.02)")
    g.add_argument("--seed", type=int, help="RNG seed")
    g.add_argument("--out", help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varbw",
        description="Band-limited spaces with piecewise-constant bandwidth: synthesis, kernels, sign retrieval.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    prof = sub.add_parser("profile", help="profile utilities")
    prof_sub = prof.add_subparsers(dest="action", required=True)
    pv = prof_sub.add_parser("validate", help="check a profile file and print a summary")
    _common(pv)

    sp = sub.add_parser("synth", help="synthesize a function from a spectral density CSV")
    _common(sp)
    sp.add_argument("--density", required=True, help="CSV zeta,re_gminus,im_gminus,re_gplus,im_gplus")
    sp.add_argument("--grid", help="output grid lo:hi:n (default: breakpoint-aligned window)")
    sp.add_argument("--real", action="store_true", help="write the real part as x,value")

    kp = sub.add_parser("kernel", help="reproducing kernel on a grid")
    _common(kp)
    kp.add_argument("--mode", choices=("toy", "generic"), default="generic")
    kp.add_argument("--x-grid", default="-5:5:21", help="lo:hi:n or comma list; write --x-grid=-5:5:21 when lo is negative")
    kp.add_argument("--y-grid", default=None, help="default: same as --x-grid")

    pp = sub.add_parser("project", help="project a sampled function onto the space (or onto PW_c with --c)")
    _common(pp)
    pp.add_argument("--input", required=True, help="CSV x,value or x,re,im")
    pp.add_argument("--c", type=float, help="classical band limit: apply the sinc projection instead")

    rp = sub.add_parser("signret", help="recover a real member from its magnitude")
    _common(rp)
    rp.add_argument("--magnitude", required=True, help="CSV x,m on a breakpoint-aligned grid")
    rp.add_argument("--zero-tol", dest="zero_tol", type=float, help="absolute zero tolerance")
    rp.add_argument("--confidence", type=float, help="stitch confidence threshold (default 1.5)")
    rp.add_argument("--pattern-ratio", dest="pattern_ratio", type=float, help="required winner margin (default 10)")
    rp.add_argument("--strict", action="store_true", help="fail on ambiguous zero crossings instead of branching")

    st = sub.add_parser("selftest", help="run the seeded acceptance checks")
    _common(st)
    st.add_argument("--only", help="comma list of criteria, e.g. K1,S3")

    ex = sub.add_parser("experiment", help="exploratory experiments (not part of acceptance)")
    ex_sub = ex.add_subparsers(dest="action", required=True)
    sw = ex_sub.add_parser("sampling-sweep", help="sign-retrieval success against sample spacing")
    _common(sw)
    sw.add_argument("--spacings", default="0.02,0.05,0.1,0.2,0.4")
    sw.add_argument("--trials", type=int, default=5)
    sw.add_argument("--jumps", type=int, default=2)
    return parser


# --- commands ----------------------------------------------------------------

def cmd_profile_validate(cfg: RunConfig, args) -> int:
    prof = cfg.load_profile()
    summary = {
        "n_jumps": prof.n_jumps,
        "breakpoints": prof.breakpoints.tolist(),
        "values": prof.values.tolist(),
        "band_limits": cfg.cutoff.band_limit(prof).tolist(),
        "lambda": cfg.lam,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args) -> int:
    prof = cfg.load_profile()
    table = propagate_coefficients(prof)
    density = vio.read_density(args.density)
    if args.grid:
        x = vio.parse_axis(args.grid)
        grid = GridFunction(x, np.zeros(len(x)))
    else:
        grid = breakpoint_grid(prof, cfg.window, cfg.dx)
    f = synthesize_grid(prof, table, cfg.cutoff, density, grid, cfg.quad, real=args.real)
    vio.write_grid_function(cfg.out_path("synth.csv"), f)
    vio.write_json(cfg.out_path("synth.json"), {
        "command": "synth",
        "n_jumps": prof.n_jumps,
        "lambda": cfg.lam,
        "points": len(f.x),
        "density_nodes": len(density.zeta),
        "real": bool(args.real),
        "l2_norm": f.norm(),
        "edge_energy_fraction": edge_energy_fraction(f),
    })
    return EXIT_OK


def cmd_kernel(cfg: RunConfig, args) -> int:
    prof = cfg.load_profile()
    cut = cfg.cutoff
    x = vio.parse_axis(args.x_grid)
    y = vio.parse_axis(args.y_grid) if args.y_grid else x
    closed = None
    if prof.n_jumps == 1:
        closed = kernel_toy(ToyModelParams.from_profile(prof, cut), x[:, None], y[None, :])
    elif prof.n_jumps == 0:
        c = cut.zeta_max * prof.q[0]
        closed = c / np.pi * sinc(c * (x[:, None] - y[None, :]))
    if args.mode == "toy" and prof.n_jumps != 1:
        raise ToyRequiresSingleJump(f"toy kernel needs exactly one jump, profile has {prof.n_jumps}")
    km = kernel_matrix(prof, propagate_coefficients(prof), cut, x, y, cfg.quad)
    values = closed if args.mode == "toy" else km.values
    vio.write_kernel(cfg.out_path("kernel.csv"), x, y, values)
    side = {"command": "kernel", "mode": args.mode, "n_jumps": prof.n_jumps, "lambda": cfg.lam,
            "shape": [len(x), len(y)], "imag_max": km.imag_max}
    status = EXIT_OK
    if closed is not None:
        err = float(np.max(np.abs(km.values - closed)) / np.max(np.abs(closed)))
        tol = KERNEL_TOL[prof.n_jumps]
        side.update({"closed_form": "single-jump" if prof.n_jumps else "sinc",
                     "max_rel_diff_generic_vs_closed_form": err, "tolerance": tol})
        if err > tol:
            status = EXIT_NUMERICAL
    vio.write_json(cfg.out_path("kernel.json"), side)
    return status


def cmd_project(cfg: RunConfig, args) -> int:
    f = vio.read_grid_function(args.input)
    if len(f.x) < 2:
        raise InputError(f"{args.input}: need at least two samples")
    if args.c is not None:
        out = f.with_values(pw_projection(args.c, f, f.x))
        space = {"space": "classical", "c": args.c}
    else:
        prof = cfg.load_profile()
        km = kernel_matrix(prof, propagate_coefficients(prof), cfg.cutoff, f.x, f.x, cfg.quad)
        vals = km.values @ (f.trapezoid_weights() * f.values)
        out = f.with_values(vals)
        space = {"space": "variable", "n_jumps": prof.n_jumps, "lambda": cfg.lam}
    vio.write_grid_function(cfg.out_path("project.csv"), out)
    diff = f.with_values(f.values - out.values)
    vio.write_json(cfg.out_path("project.json"), {
        "command": "project", **space, "input_norm": f.norm(), "projection_norm": out.norm(),
        "relative_defect": diff.norm() / f.norm() if f.norm() else 0.0})
    return EXIT_OK


def cmd_signret(cfg: RunConfig, args) -> int:
    prof = cfg.load_profile()
    m = vio.read_magnitude(args.magnitude)
    sr_cfg = SignRetrievalConfig(zero_tol=cfg.zero_tol, confidence=cfg.confidence,
                                 pattern_ratio=cfg.pattern_ratio, zeta_nodes=cfg.nodes, quad=cfg.quad,
                                 strict=args.strict)
    res = sign_retrieve(prof, cfg.cutoff, m, sr_cfg)
    vio.write_grid_function(cfg.out_path("signret.csv"), res.f, value_name="f")
    vio.write_json(cfg.out_path("signret.json"), {"command": "signret", **res.diagnostics})
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, args) -> int:
    from .acceptance import AcceptanceConfig, run_acceptance

    acfg = AcceptanceConfig(lam=cfg.lam, window=cfg.window, dx=cfg.dx)
    if cfg.seed is not None:
        acfg = replace(acfg, seed=cfg.seed)
    names = [n.strip() for n in args.only.split(",")] if args.only else None
    try:
        results = run_acceptance(names, acfg)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    for r in results:
        print(r.line(), flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


def cmd_sampling_sweep(cfg: RunConfig, args) -> int:
    from .synthetic import random_density, random_profile

    if cfg.seed is None:
        raise InputError("experiment sampling-sweep needs --seed")
    spacings = vio.parse_axis(args.spacings)
    if np.any(spacings <= 0) or args.trials < 1 or args.jumps < 0:
        raise InputError("spacings and trials must be positive, jumps >= 0")
    cut = cfg.cutoff
    rows = []
    for h in spacings:
        ok, ratios = 0, []
        for t in range(args.trials):
            rng = np.random.default_rng([cfg.seed, t])
            prof = random_profile(rng, args.jumps)
            table = propagate_coefficients(prof)
            d = random_density(rng, cut, n_nodes=cfg.nodes, plus_only=True)
            f = synthesize_grid(prof, table, cut, d, breakpoint_grid(prof, cfg.window, float(h)), cfg.quad, real=True)
            try:
                res = sign_retrieve(prof, cut, f.with_values(np.abs(f.values)),
                                    SignRetrievalConfig(zeta_nodes=cfg.nodes, quad=cfg.quad))
            except (NumericalError, InputError) as exc:
                log.info("spacing %g trial %d: %s", h, t, exc)
                ratios.append(0.0)
                continue
            err = min(np.max(np.abs(res.f.values - s * f.values)) for s in (1, -1)) / np.max(np.abs(f.values))
            ok += bool(err <= 1e-6)
            ratios.append(res.diagnostics["winner_ratio"])
        rows.append((h, args.trials, ok, float(np.median(ratios))))
        log.info("spacing %g: %d/%d recovered", h, ok, args.trials)
    cols = list(zip(*rows))
    vio.write_table(cfg.out_path("sampling_sweep.csv"), ("dx", "trials", "recovered", "median_ratio"), cols)
    return EXIT_OK


COMMANDS = {
    ("profile", "validate"): cmd_profile_validate,
    ("synth", None): cmd_synth,
    ("kernel", None): cmd_kernel,
    ("project", None): cmd_project,
    ("signret", None): cmd_signret,
    ("selftest", None): cmd_selftest,
    ("experiment", "sampling-sweep"): cmd_sampling_sweep,
}


def _setup_logging() -> None:
    level = os.environ.get("VARBW_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        cfg = RunConfig.from_sources(args)
        log.debug("config %s", asdict(cfg))
        return handler(cfg, args)
    except ZeroFunction as exc:
        print(f"varbw: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, IndexError) as exc:
        print(f"varbw: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, VarBWError) as exc:
        print(f"varbw: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

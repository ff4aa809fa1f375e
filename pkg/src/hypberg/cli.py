"""Command-line interface: every certification and computation as a
subcommand with machine-readable CSV or JSON output.

Exit codes: 0 all checks pass, 1 check failure, 2 usage/config error.
Option precedence: command-line flags > config file (flat key=value,
keys match flag names) > built-in defaults. The environment variable
HYPBERG_OUTPUT_DIR supplies the default output directory for bare
output filenames; nothing else is read from the environment.

Output files are byte-identical across runs for a fixed configuration
(including the seed); wall-clock timing is therefore reported on stderr
and written as null into files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bounds, concentration, geometry, specfun, wavelet, weights
from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import HypbergError
from .geometry import MobiusMap
from .weights import WeightParams

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

_CERTIFY_TARGETS = ("weight-ode", "theta-ode", "merk", "claim", "euler", "gamma-identity", "all")


@dataclass
class RunConfig:
    n: int = 3
    alpha: float = 2.0
    seed: int = DEFAULT_CONFIG.mc_seed
    samples: int = DEFAULT_CONFIG.mc_samples
    trials: int = 200
    tolerance_scale: float = 1.0
    fmt: str = "csv"
    output: Optional[str] = None

    def numerics(self) -> NumericsConfig:
        return NumericsConfig(mc_seed=self.seed, mc_samples=self.samples)


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.16e}"


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_vals: dict = {}
    if args.config:
        file_vals = _load_config_file(args.config)
    convert = {
        "n": int,
        "alpha": float,
        "seed": int,
        "samples": int,
        "trials": int,
        "tolerance_scale": float,
        "format": str,
        "output": str,
    }
    for key, conv in convert.items():
        attr = "fmt" if key == "format" else key
        if key in file_vals:
            setattr(cfg, attr, conv(file_vals[key]))
        cli_val = getattr(args, attr, None)
        if cli_val is not None:
            setattr(cfg, attr, cli_val)
    if cfg.fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {cfg.fmt!r}")
    return cfg


def _emit(cfg: RunConfig, command: str, header: list[str], rows: list[list],
          failures: list[str], elapsed: float) -> None:
    """Write the report in the requested format to stdout or a file."""
    dest = cfg.output
    if dest is not None and not os.path.isabs(dest) and os.sep not in dest:
        out_dir = os.environ.get("HYPBERG_OUTPUT_DIR", "")
        if out_dir:
            dest = os.path.join(out_dir, dest)
    to_file = dest is not None
    if cfg.fmt == "csv":
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "config": {
                "command": command,
                "n": cfg.n,
                "alpha": cfg.alpha,
                "seed": cfg.seed,
                "samples": cfg.samples,
                "format": cfg.fmt,
            },
            "results": [dict(zip(header, row)) for row in rows],
            "failures": failures,
            "timing": None if to_file else {"seconds": round(elapsed, 3)},
        }
        text = json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n"
    if to_file:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {dest}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    print(f"[{command}] {elapsed:.2f}s, {len(failures)} failure(s)", file=sys.stderr)


def _parse_grid(spec: str) -> np.ndarray:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:stop:step or a single value")
        start, stop, step = map(float, parts)
        return np.arange(start, stop + 1e-12, step)
    return np.array([float(spec)])


def _phi_closed_form(n: int, r: float) -> Optional[float]:
    if n == 2:
        return 1.0 - r * r
    if n == 3:
        if r == 0.0:
            return 1.0
        if r == 1.0:
            return 0.0
        return math.e**2 * ((1.0 - r) / (1.0 + r)) ** ((1.0 + r * r) / r)
    if n == 4:
        return math.exp(-1.5 * r * r) * (1.0 - r * r) ** 3
    return None


def cmd_phi(cfg: RunConfig, grid: np.ndarray) -> tuple[list, list, list]:
    header = ["r", "phi", "closed_form", "abs_diff"]
    rows = []
    failures = []
    for r in grid:
        r = float(r)
        val = float(weights.phi(cfg.n, r))
        closed = _phi_closed_form(cfg.n, r)
        diff = abs(val - closed) if closed is not None else math.nan
        rows.append([r, val, closed if closed is not None else math.nan, diff])
        if closed is not None and diff > 1e-10 * max(abs(closed), 1e-30):
            failures.append(f"phi({cfg.n}, {r}) differs from closed form by {diff:.3e}")
    return header, rows, failures


def cmd_theta(cfg: RunConfig, grid: np.ndarray) -> tuple[list, list, list]:
    params = WeightParams.create(cfg.n, cfg.alpha)
    header = ["s", "v", "theta"]
    rows = []
    for s in grid:
        s = float(s)
        rows.append([s, geometry.radius_from_volume(cfg.n, s), bounds.theta_direct(params, s)])
    return header, rows, []


def _certify_one(which: str, cfg: RunConfig) -> list:
    n, alpha = cfg.n, cfg.alpha
    scale = cfg.tolerance_scale
    if which == "weight-ode":
        rep = weights.certify_weight_ode(n, np.linspace(0.05, 0.9, 60))
        return [which, n, alpha, rep.max_residual, rep.tolerance * scale,
                rep.max_residual < rep.tolerance * scale]
    if which == "theta-ode":
        params = WeightParams.create(n, alpha)
        profile = bounds.ThetaProfile(params)
        rep = bounds.certify_theta_ode(profile, np.geomspace(0.1, 50.0, 40))
        return [which, n, alpha, rep.max_residual, rep.tolerance * scale,
                rep.max_residual < rep.tolerance * scale]
    if which == "merk":
        rep = bounds.certify_merk(n, np.linspace(0.05, 0.9, 40))
        return [which, n, alpha, rep.max_residual, rep.tolerance * scale,
                rep.max_residual < rep.tolerance * scale]
    if which == "claim":
        rep = bounds.certify_claim(n, np.geomspace(0.1, 50.0, 40))
        return [which, n, alpha, rep.max_residual, rep.tolerance * scale,
                rep.max_residual < rep.tolerance * scale]
    if which == "euler":
        worst = 0.0
        for (a, b, c) in ((1.0, 2.0 - n / 2.0, 1.0 + n / 2.0), (n / 2.0, float(n), (n + 2) / 2.0)):
            for x in np.linspace(0.0, 0.9, 19):
                lhs = specfun.hyp2f1(a, b, c, float(x))
                rhs = specfun.hyp2f1_via_euler(a, b, c, float(x))
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-30))
        tol = 1e-10 * scale
        return [which, n, alpha, worst, tol, worst < tol]
    if which == "gamma-identity":
        worst = 0.0
        for m in range(0, 21):
            for nn in range(3, 11):
                lhs = 2.0 * specfun.gamma(m + nn - 1.0) / (
                    (2 * m + nn) * specfun.gamma(1.0 + m) * specfun.gamma(nn - 2.0)
                ) + 2.0 * specfun.gamma(m + nn - 1.0) / (
                    specfun.gamma(1.0 + m) * specfun.gamma(nn - 1.0)
                )
                rhs = 4.0 * specfun.gamma(m + nn + 0.0) / (
                    (2 * m + nn) * specfun.gamma(1.0 + m) * specfun.gamma(nn - 1.0)
                )
                worst = max(worst, abs(lhs - rhs) / abs(rhs))
        tol = 1e-10 * scale
        return [which, n, alpha, worst, tol, worst < tol]
    raise ValueError(f"unknown certification {which!r}")


def cmd_certify(cfg: RunConfig, which: str) -> tuple[list, list, list]:
    header = ["check", "n", "alpha", "max_residual", "tolerance", "passed"]
    targets = [t for t in _CERTIFY_TARGETS if t != "all"] if which == "all" else [which]
    rows = [_certify_one(t, cfg) for t in targets]
    failures = [f"{row[0]} residual {row[3]:.3e} >= tolerance {row[4]:.1e}"
                for row in rows if not row[5]]
    return header, rows, failures


def _parse_f_spec(spec: str, params: WeightParams) -> concentration.TestFunction:
    kind, _, rest = spec.partition(":")
    n = params.n
    if kind == "one":
        return concentration.One()
    if kind == "extremizer":
        coords = np.array([float(v) for v in rest.split(",")])
        if coords.size != n:
            raise ValueError(f"extremizer center needs {n} coordinates")
        return concentration.Extremizer(MobiusMap.translation(coords), params)
    if kind == "exph":
        lam = float(rest)
        zeta = np.zeros(n)
        zeta[0] = 1.0
        return concentration.ExpHarmonic(lam, zeta)
    raise ValueError(f"unknown test function {spec!r}")


def _parse_omega_spec(spec: str, params: WeightParams) -> concentration.DomainSpec:
    kind, _, rest = spec.partition(":")
    opts = dict(kv.split("=") for kv in rest.split(";") if kv)
    n = params.n
    if kind == "ball":
        return concentration.CenteredBall(n, float(opts["s"]))
    if kind == "mball":
        coords = np.array([float(v) for v in opts["a"].split(",")])
        return concentration.MobiusBall(MobiusMap.translation(coords), float(opts["s"]))
    if kind == "cap":
        return concentration.half_space_cap(float(opts["c"]))
    raise ValueError(f"unknown domain {spec!r}")


def cmd_concentrate(cfg: RunConfig, f_spec: str, omega_spec: str) -> tuple[list, list, list]:
    params = WeightParams.create(cfg.n, cfg.alpha)
    f = _parse_f_spec(f_spec, params)
    omega = _parse_omega_spec(omega_spec, params)
    res = concentration.concentration_quotient(f, omega, params, cfg.numerics())
    header = ["f", "omega", "quotient", "stderr", "s_used", "s_err", "method"]
    rows = [[f_spec, omega_spec, res.value, res.stderr, res.s_used, res.s_err, res.method]]
    return header, rows, []


def cmd_fuzz(cfg: RunConfig) -> tuple[list, list, list]:
    params = WeightParams.create(cfg.n, cfg.alpha)
    rep = concentration.fuzz_main_inequality(
        cfg.trials, params, cfg.numerics(), seed=cfg.seed
    )
    header = ["trial", "f", "omega", "s_used", "quotient", "stderr", "bound", "deficit", "violated"]
    rows = [
        [t.index, t.f_label, t.omega_label, t.s_used, t.quotient, t.stderr, t.bound,
         t.deficit, t.violated]
        for t in rep.trials
    ]
    failures = [f"trial {t.index} violates the bound by {-t.deficit:.3e}"
                for t in rep.trials if t.violated]
    return header, rows, failures


def cmd_wavelet(cfg: RunConfig, what: str) -> tuple[list, list, list]:
    n = cfg.n
    failures = []
    if what == "witness":
        header = ["n", "y1", "t", "fd_value", "fd_error", "analytic_value", "certified"]
        rep = wavelet.negativity_scan(n)
        rows = [[n, rep.y1, rep.t, rep.fd_value, rep.fd_error, rep.analytic_value, rep.certified]]
        if n >= 2 and not rep.certified:
            failures.append(f"no certified witness for n={n}")
        return header, rows, failures
    if what == "ode":
        header = ["n", "window", "r", "relative_residual", "passed"]
        rows = []
        spec = wavelet.WindowSpec(n, beta=n / 2.0 + 1.0)
        for window in ("K", "I"):
            for r in np.geomspace(0.1, 8.0, 12):
                res = wavelet.ode_residual(spec, window, float(r))
                ok = res.relative < 1e-8
                rows.append([n, window, float(r), res.relative, ok])
                if not ok:
                    failures.append(f"{window}-window ODE residual {res.relative:.2e} at r={r:.3f}")
        return header, rows, failures
    if what == "limits":
        header = ["n", "quantity", "value_at_t", "limit", "rel_error", "passed"]
        rows = []
        t = 1e-3
        y1 = 0.7
        p0 = wavelet.p_n_zero(n)
        u, _, uyy, ut, utt = wavelet.u_partials(n, y1, t)
        checks = [
            ("lap_y", float(uyy), 2.0 * p0 * p0 * math.cos(y1)),
            ("dt", float(ut), 0.0),
        ]
        if n > 2:
            checks.append(
                ("dtt", float(utt), 10.0 * p0 * wavelet.p_n_second_zero(n) * (1.0 - math.cos(y1)))
            )
        elif n == 2:
            checks.append(("dtt_minus_dt_over_t", float(utt - ut / t),
                           10.0 * p0 * (1.0 - math.cos(y1))))
        for name, val, lim in checks:
            scale = max(abs(lim), abs(u))
            rel = abs(val - lim) / scale
            ok = rel < 5e-2
            rows.append([n, name, val, lim, rel, ok])
            if not ok:
                failures.append(f"limit {name} off by {rel:.3f} relative")
        return header, rows, failures
    raise ValueError(f"unknown wavelet action {what!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--n", type=int, help="dimension (default 3)")
    common.add_argument("--alpha", type=float, help="weight exponent (default 2.0)")
    common.add_argument("--seed", type=int, help="Monte Carlo master seed")
    common.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    common.add_argument("--trials", type=int, help="fuzz trial count (default 200)")
    common.add_argument("--tolerance-scale", dest="tolerance_scale", type=float,
                        help="multiply all certification tolerances (default 1)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), help="output format")
    common.add_argument("--output", help="output path (bare names land in HYPBERG_OUTPUT_DIR)")

    parser = argparse.ArgumentParser(
        prog="hypberg",
        description="Certified computations for concentration bounds on the hyperbolic ball.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_phi = sub.add_parser("phi", parents=[common],
                           help="tabulate the radial weight against closed forms")
    p_phi.add_argument("--grid", required=True, help="r grid start:stop:step or one value")

    p_theta = sub.add_parser("theta", parents=[common], help="tabulate the sharp bound theta(s)")
    p_theta.add_argument("--grid", required=True, help="s grid start:stop:step or one value")

    p_cert = sub.add_parser("certify", parents=[common],
                            help="run a certification (exit 1 on failure)")
    p_cert.add_argument("which", choices=_CERTIFY_TARGETS)

    p_conc = sub.add_parser("concentrate", parents=[common],
                            help="evaluate a concentration quotient")
    p_conc.add_argument("--f", required=True, dest="f_spec",
                        help="one | extremizer:a1,..,an | exph:lambda")
    p_conc.add_argument("--omega", required=True, dest="omega_spec",
                        help="ball:s=V | mball:s=V;a=a1,..,an | cap:c=C")

    sub.add_parser("fuzz", parents=[common], help="randomized stress test of the main bound")

    p_wav = sub.add_parser("wavelet", parents=[common], help="wavelet-window diagnostics")
    p_wav.add_argument("what", choices=("witness", "ode", "limits"))
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors already
        return int(exc.code) if exc.code else EXIT_OK
    try:
        cfg = _resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        if args.command == "phi":
            header, rows, failures = cmd_phi(cfg, _parse_grid(args.grid))
        elif args.command == "theta":
            header, rows, failures = cmd_theta(cfg, _parse_grid(args.grid))
        elif args.command == "certify":
            header, rows, failures = cmd_certify(cfg, args.which)
        elif args.command == "concentrate":
            header, rows, failures = cmd_concentrate(cfg, args.f_spec, args.omega_spec)
        elif args.command == "fuzz":
            header, rows, failures = cmd_fuzz(cfg)
        elif args.command == "wavelet":
            header, rows, failures = cmd_wavelet(cfg, args.what)
        else:  # pragma: no cover
            raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypbergError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    elapsed = time.perf_counter() - start
    _emit(cfg, args.command, header, rows, failures, elapsed)
    return EXIT_CHECK_FAILED if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

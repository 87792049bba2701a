"""Command-line front end.

Subcommands ``plan``, ``sweep``, ``ratefit``, ``pointwise`` and ``constants``
each read a flat config file and write a CSV report whose ``# config:``
comment lines reproduce the resolved configuration.

Exit codes: 0 success, 2 configuration or input error, 3 numerical
failure, 4 failed rate check (``ratefit --check``).
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

from .config import (
    ExperimentConfig,
    build_model,
    build_plan,
    build_profile,
    build_scheme,
    extract_embedded_config,
    load_config,
    scheme_kind,
)
from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalFailureError,
    ResourceLimitError,
    UnsupportedError,
)
from .processes import integrated_g, roughness_grad, roughness_hess
from .risk import KINDS, RiskConfig, mc_mise, pointwise_variance_scaled
from .sampling import HighFrequency, delta_star
from .theory import (
    bandwidth,
    c_gamma0,
    fit_rate,
    optimal_c,
    slack_constant_C,
    target_slope,
    tn_rate_class,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

# acceptance windows for fitted MISE slopes, keyed by (estimator, dim)
SLOPE_WINDOWS = {
    ("histogram", 1): (-0.78, -0.56),
    ("frequency_polygon", 1): (-0.92, -0.68),
    ("histogram", 2): (-0.62, -0.38),
}
DEFAULT_SLOPE_HALFWIDTH = 0.12

log = logging.getLogger("sampledens")


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def slope_window(kind: str, dim: int) -> tuple[float, float]:
    if (kind, dim) in SLOPE_WINDOWS:
        return SLOPE_WINDOWS[(kind, dim)]
    t = target_slope(kind, dim)
    return t - DEFAULT_SLOPE_HALFWIDTH, t + DEFAULT_SLOPE_HALFWIDTH


def _estimator(cfg: ExperimentConfig) -> str:
    return cfg.get_str("estimator", "histogram", choices=KINDS)


def _roughness(cfg: ExperimentConfig, kind: str, model=None) -> float | None:
    if "roughness" in cfg:
        return cfg.get_float("roughness")
    if model is None:
        if "process" not in cfg:
            return None
        model = build_model(cfg)
    return roughness_grad(model) if kind == "histogram" else roughness_hess(model)


def _resolve_c(cfg: ExperimentConfig, kind: str, dim: int, model=None) -> float:
    raw = cfg.get_str("c")
    if raw == "optimal":
        rough = _roughness(cfg, kind, model)
        if rough is None:
            raise ConfigError("c = optimal needs 'roughness' or a 'process'", cfg.lines.get("c"))
        return optimal_c(kind, dim, rough, cfg.get_float("C", 0.0))
    return cfg.get_float("c")


def _report(cfg: ExperimentConfig, command: str, header: list[str], rows: list[list],
            footer: list[str] = ()) -> str:
    out = [f"# sampledens {command}"]
    out += cfg.embedded_lines()
    out.append(",".join(header))
    out += [",".join(fmt(v) if not isinstance(v, str) else v for v in row) for row in rows]
    out += list(footer)
    return "\n".join(out) + "\n"


def write_output(text: str, out: str | None) -> None:
    """Write to ``out`` atomically (temp file + rename) or to stdout."""
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_plan(cfg: ExperimentConfig) -> str:
    gamma0 = cfg.get_float("gamma0")
    dim = cfg.get_int("dim")
    n = cfg.get_int("n")
    kind = _estimator(cfg)
    c = _resolve_c(cfg, kind, dim)
    h = bandwidth(kind, c, n, dim)
    plan = build_plan(cfg, gamma0, dim, h, n)
    dstar = delta_star(plan)
    rate = tn_rate_class(gamma0, dim)
    rough = _roughness(cfg, kind)
    copt = optimal_c(kind, dim, rough, cfg.get_float("C", 0.0)) if rough else math.nan
    header = ["n", "h", "delta_star", "T_star", "rate_exponent", "rate_log", "optimal_c"]
    return _report(cfg, "plan", header, [[n, h, dstar, n * dstar, rate.exponent, rate.log_factor, copt]])


def _seed(cfg: ExperimentConfig) -> int:
    seed = cfg.get_int("seed")
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", cfg.lines.get("seed"))
    return seed


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[list]:
    model = build_model(cfg)
    kind = _estimator(cfg)
    ns = cfg.get_int_list("n_list")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n_list must be strictly increasing", cfg.lines.get("n_list"))
    c = _resolve_c(cfg, kind, model.dim, model)
    reps = cfg.get_int("replications")
    seed = _seed(cfg)
    quad_order = cfg.get_int("quad_order", 5)
    width = cfg.get_float("domain_width", 8.0)
    scheme_kind(cfg)
    rows = []
    for n in ns:
        h = bandwidth(kind, c, n, model.dim)
        scheme = build_scheme(cfg, model, h, n)
        log.info("sweep n=%d h=%.6g scheme=%s", n, h, scheme)
        rep = mc_mise(RiskConfig(model, scheme, kind, n, h, reps, seed,
                                 domain=model.default_domain(width), quad_order=quad_order,
                                 threads=threads))
        rows.append([n, rep.mise, rep.mise_stderr, rep.isb_exact, rep.iv_mc])
    return rows


def cmd_sweep(cfg: ExperimentConfig, threads: int = 1) -> str:
    rows = run_sweep(cfg, threads)
    return _report(cfg, "sweep", ["n", "mise", "stderr", "isb", "iv"], rows)


def read_sweep_csv(text: str) -> list[tuple[int, float, float]]:
    """Rows ``(n, mise, stderr)`` from a sweep or rate-fit CSV."""
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells
            if "n" not in header or "mise" not in header:
                raise InvalidInputError(f"row {lineno}: header must contain 'n' and 'mise' columns")
            continue
        if len(cells) != len(header):
            raise InvalidInputError(f"row {lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            n = int(cells[header.index("n")])
            mise = float(cells[header.index("mise")])
            err = float(cells[header.index("stderr")]) if "stderr" in header else math.nan
        except ValueError as exc:
            raise InvalidInputError(f"row {lineno}: {exc}") from None
        rows.append((n, mise, err))
    if header is None:
        raise InvalidInputError("no CSV header found")
    return rows


def cmd_ratefit(text: str, kind: str | None = None, dim: int | None = None) -> tuple[str, bool]:
    """Fit the log-log slope of a sweep CSV; returns the report and the pass flag."""
    rows = read_sweep_csv(text)
    embedded = extract_embedded_config(text)
    if kind is None:
        kind = embedded.values.get("estimator", "histogram")
    if dim is None:
        dim = int(embedded.values.get("dim", 1))
    fit = fit_rate([(n, m) for n, m, _ in rows], [e for _, _, e in rows])
    target = target_slope(kind, dim)
    lo, hi = slope_window(kind, dim)
    passed = lo <= fit.slope <= hi
    out = io.StringIO()
    out.write("# sampledens ratefit\n")
    for k, v in embedded.values.items():
        out.write(f"# config: {k} = {v}\n")
    fit.write_csv(out)
    out.write(f"# target={fmt(target)} window=[{fmt(lo)},{fmt(hi)}] estimator={kind} dim={dim}\n")
    out.write(f"# result={'pass' if passed else 'fail'}\n")
    return out.getvalue(), passed


def cmd_pointwise(cfg: ExperimentConfig, x: float, threads: int = 1) -> str:
    if scheme_kind(cfg) != "highfreq":
        raise InvalidInputError(
            "pointwise needs scheme = highfreq: the limit T_n Var(f_hat(x)) -> 2 int_0^inf g_u(x,x) du "
            "holds for high-frequency sampling with delta_n = o(h^d)"
        )
    model = build_model(cfg)
    kind = _estimator(cfg)
    n = cfg.get_int("n")
    c = _resolve_c(cfg, kind, model.dim, model) if "c" in cfg else 1.0
    h = bandwidth(kind, c, n, model.dim)
    if "delta_n" in cfg:
        beta = None
        scheme = HighFrequency(cfg.get_float("delta_n"))
    else:
        beta = cfg.get_float("beta", 2.0)
        scheme = HighFrequency(h**beta)
    rc = RiskConfig(model, scheme, kind, n, h, cfg.get_int("replications"), _seed(cfg), threads=threads)
    value = pointwise_variance_scaled(rc, x, beta=beta)
    limit = 2 * integrated_g(model, x)
    delta_n = h**beta if beta is not None else scheme.delta_n
    ratio = value / limit if limit > 0 else math.nan
    header = ["x", "n", "h", "delta_n", "T_n", "scaled_variance", "limit", "ratio"]
    return _report(cfg, "pointwise", header, [[x, n, h, delta_n, n * delta_n, value, limit, ratio]])


def cmd_constants(cfg: ExperimentConfig) -> str:
    profile = build_profile(cfg)
    rows = []
    if "scheme" in cfg and scheme_kind(cfg) != "highfreq":
        rows.append(["C", slack_constant_C(build_scheme(cfg), profile)])
    if "gamma0" in cfg:
        gamma0 = cfg.get_float("gamma0")
        branch = "d1" if gamma0 < 1 else "d2" if gamma0 == 1 else "d3"
        rows.append(["C_gamma0", c_gamma0(profile, gamma0, **{branch: cfg.get_float(branch, 1.0)})])
    kind = _estimator(cfg)
    rough = _roughness(cfg, kind)
    if rough:
        dim = cfg.get_int("dim", 1)
        for name, const in list(rows):
            rows.append([f"optimal_c[{name}]", optimal_c(kind, dim, rough, const)])
        rows.append(["optimal_c[iid]", optimal_c(kind, dim, rough, 0.0)])
    if not rows:
        raise ConfigError("constants needs 'scheme' (renewal/jittered) and/or 'gamma0'")
    return _report(cfg, "constants", ["quantity", "value"], rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sampledens", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="bandwidth, delta*, T* and rate class")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo MISE over an n grid")
    p = sub.add_parser("ratefit", parents=[common], help="log-log slope of a sweep CSV")
    p.add_argument("csv", help="CSV written by 'sweep'")
    p.add_argument("--estimator", choices=KINDS)
    p.add_argument("--dim", type=int)
    p.add_argument("--check", action="store_true", help="exit 4 when the slope is outside its window")
    p = sub.add_parser("pointwise", parents=[common], help="scaled pointwise variance vs its limit")
    p.add_argument("--x", type=float, help="evaluation point (overrides the config)")
    sub.add_parser("constants", parents=[common], help="C, C_gamma0 and optimal c for a profile")
    return parser


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "ratefit":
            text = Path(args.csv).read_text()
            report, passed = cmd_ratefit(text, args.estimator, args.dim)
            write_output(report, args.out)
            return EXIT_CHECK if args.check and not passed else EXIT_OK
        cfg = _load(args)
        if args.command == "plan":
            report = cmd_plan(cfg)
        elif args.command == "sweep":
            report = cmd_sweep(cfg, args.threads)
        elif args.command == "pointwise":
            x = args.x if args.x is not None else cfg.get_float("x", 0.0)
            cfg.resolved["x"] = fmt(x)
            report = cmd_pointwise(cfg, x, args.threads)
        else:
            report = cmd_constants(cfg)
        write_output(report, args.out or cfg.values.get("out"))
        return EXIT_OK
    except (ConfigError, InvalidInputError, UnsupportedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailureError, ResourceLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

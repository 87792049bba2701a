"""Flat ``key = value`` experiment configuration files.

Lines starting with ``#`` and blank lines are ignored. Every value read
through the typed getters (including defaults) is recorded, so a report can
embed the fully resolved configuration and be re-run from it.
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import ConfigError
from .processes import OUModel, ProcessModel, SmoothGaussianModel
from .sampling import HighFrequency, Jittered, Renewal, SamplePlan, SamplingScheme, delta_star
from .theory import MixingProfile

KNOWN_KEYS = {
    # process
    "process", "theta", "sigma", "dim", "ell",
    # sampling
    "scheme", "r", "delta", "jitter", "delta_n", "d1", "d2", "d3", "gamma0", "beta",
    # estimator and bandwidth
    "estimator", "c", "C", "roughness", "origin",
    # experiment
    "n", "n_list", "replications", "seed", "quad_order", "domain_width", "x", "threads", "out",
    # mixing profile
    "u0", "u1", "a0", "rho", "h0", "norm_k", "norm_phi", "f_sup", "pi_sup_on_band", "pi_tail",
}

EMBED_PREFIX = "# config: "
_MISSING = object()


class ExperimentConfig:
    def __init__(self, values: dict[str, str] | None = None, lines: dict[str, int] | None = None):
        self.values = dict(values or {})
        self.lines = dict(lines or {})
        self.resolved: dict[str, str] = {}

    def __contains__(self, key):
        return key in self.values

    def set(self, key: str, value) -> None:
        self.values[key] = str(value)
        self.lines.pop(key, None)

    def _raw(self, key, default):
        if key in self.values:
            return self.values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required key '{key}'")
        return default

    def _convert(self, key, raw, conv, what):
        try:
            return conv(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"key '{key}': expected {what}, got {raw!r}", self.lines.get(key)) from None

    def get_str(self, key, default=_MISSING, choices=None) -> str:
        raw = self._raw(key, default)
        if raw is not None:
            raw = str(raw).strip()
            if choices is not None and raw not in choices:
                raise ConfigError(f"key '{key}': expected one of {', '.join(choices)}, got {raw!r}",
                                  self.lines.get(key))
            self.resolved[key] = raw
        return raw

    def get_float(self, key, default=_MISSING) -> float | None:
        raw = self._raw(key, default)
        if raw is None:
            return None
        value = self._convert(key, raw, float, "a number")
        if not math.isfinite(value):
            raise ConfigError(f"key '{key}': must be finite", self.lines.get(key))
        self.resolved[key] = _fmt(value)
        return value

    def get_int(self, key, default=_MISSING) -> int | None:
        raw = self._raw(key, default)
        if raw is None:
            return None
        value = self._convert(key, raw, _parse_int, "an integer")
        self.resolved[key] = str(value)
        return value

    def get_int_list(self, key) -> list[int]:
        raw = self._raw(key, _MISSING)
        value = self._convert(key, raw, lambda s: [_parse_int(t) for t in s.split(",") if t.strip()],
                              "a comma-separated list of integers")
        self.resolved[key] = ",".join(str(v) for v in value)
        return value

    def embedded_lines(self) -> list[str]:
        return [f"{EMBED_PREFIX}{k} = {v}" for k, v in self.resolved.items()]


def _parse_int(s) -> int:
    s = str(s).strip()
    if "**" in s:
        base, exp = s.split("**", 1)
        return int(base) ** int(exp)
    try:
        return int(s)
    except ValueError:
        f = float(s)
        if f != int(f):
            raise
        return int(f)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def parse_config(text: str) -> ExperimentConfig:
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if "#" in value:
            value = value.split("#", 1)[0].strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key '{key}'", lineno)
        if key in values:
            raise ConfigError(f"duplicate key '{key}' (first set on line {lines[key]})", lineno)
        if not value:
            raise ConfigError(f"key '{key}' has an empty value", lineno)
        values[key], lines[key] = value, lineno
    return ExperimentConfig(values, lines)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def extract_embedded_config(text: str) -> ExperimentConfig:
    """Recover the configuration embedded in a report's comment lines."""
    body = [line[len(EMBED_PREFIX):] for line in text.splitlines() if line.startswith(EMBED_PREFIX)]
    return parse_config("\n".join(body))


def build_model(cfg: ExperimentConfig) -> ProcessModel:
    kind = cfg.get_str("process", choices=("ou", "smooth"))
    try:
        if kind == "ou":
            return OUModel(dim=cfg.get_int("dim", 1), theta=cfg.get_float("theta", 1.0),
                           sigma=cfg.get_float("sigma", math.sqrt(2.0)))
        if "dim" in cfg and cfg.get_int("dim") != 1:
            raise ConfigError("the smooth process is one-dimensional", cfg.lines.get("dim"))
        return SmoothGaussianModel(ell=cfg.get_float("ell", 1.0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def scheme_kind(cfg: ExperimentConfig) -> str:
    return cfg.get_str("scheme", choices=("renewal", "jittered", "highfreq"))


def build_plan(cfg: ExperimentConfig, gamma0: float, dim: int, h: float, n: int) -> SamplePlan:
    return SamplePlan(gamma0=gamma0, dim=dim, h_n=h, n=n, d1=cfg.get_float("d1", 1.0),
                      d2=cfg.get_float("d2", 1.0), d3=cfg.get_float("d3", 1.0))


def build_scheme(cfg: ExperimentConfig, model: ProcessModel | None = None, h: float | None = None,
                 n: int = 1) -> SamplingScheme:
    """Sampling scheme; a high-frequency step defaults to ``delta_star`` for ``h``."""
    kind = scheme_kind(cfg)
    try:
        if kind == "renewal":
            return Renewal(cfg.get_int("r", 1), cfg.get_float("delta"))
        if kind == "jittered":
            return Jittered(cfg.get_float("delta"), cfg.get_str("jitter", "uniform"))
        if "delta_n" in cfg:
            return HighFrequency(cfg.get_float("delta_n"))
        if h is None or model is None:
            raise ConfigError("highfreq scheme needs 'delta_n' or a bandwidth rule to derive it")
        gamma0 = cfg.get_float("gamma0", model.gamma0)
        return HighFrequency(delta_star(build_plan(cfg, gamma0, model.dim, h, n)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def build_profile(cfg: ExperimentConfig) -> MixingProfile:
    fields = {}
    for name in ("a0", "rho", "h0", "norm_k", "norm_phi", "f_sup", "pi_sup_on_band", "pi_tail"):
        if name in cfg:
            fields[name] = cfg.get_float(name)
    try:
        return MixingProfile(u0=cfg.get_float("u0"), u1=cfg.get_float("u1"), **fields)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

"""Exact integrated squared bias and Monte Carlo MISE / integrated variance."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .estimators import (
    BinnedDensity,
    FrequencyPolygonEstimate,
    PanelQuadrature,
    as_box,
    fit_frequency_polygon,
    fit_histogram,
    l2_distance_sq,
)
from .grid import Partition
from .processes import ProcessModel
from .sampling import HighFrequency, SamplingScheme, draw_times

KINDS = ("histogram", "frequency_polygon")


def check_kind(kind: str, dim: int = 1) -> str:
    if kind not in KINDS:
        raise InvalidInputError(f"estimator must be one of {KINDS}, got {kind!r}")
    if kind == "frequency_polygon" and dim != 1:
        raise InvalidInputError("frequency polygons need dim = 1")
    return kind


def replication_seed(base_seed: int, rep: int) -> int:
    return int(base_seed) ^ int(rep)


def stream_seed(seed: int, stream: int) -> int:
    """Independent child seed for one random stream (0 = times, 1 = path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream,))
    return int(ss.generate_state(1, np.uint64)[0])


def expected_histogram(model: ProcessModel, partition: Partition, domain) -> BinnedDensity:
    """Exact ``E f_hat`` of a histogram: heights ``P(X in bin j) / h^d``.

    Covers every bin meeting ``domain`` plus one neighbour on each side so the
    interpolated frequency polygon is exact on the whole domain.
    """
    lo, hi = as_box(domain, partition.dim)
    h = partition.bin_width
    spans, probs = [], []
    for k, span in enumerate(partition.index_span(lo, hi)):
        span = np.arange(span[0] - 1, span[-1] + 2, dtype=np.int64)
        left = partition.origin[k] + span * h
        spans.append(span)
        probs.append(model.axis_interval_prob(k, left, left + h))
    keys = np.stack([g.ravel() for g in np.meshgrid(*spans, indexing="ij")], axis=1)
    p = np.prod(np.stack([g.ravel() for g in np.meshgrid(*probs, indexing="ij")], axis=1), axis=1)
    return BinnedDensity(partition, keys, p / partition.volume)


def _wrap(kind: str, base: BinnedDensity):
    return FrequencyPolygonEstimate(base) if kind == "frequency_polygon" else base


def exact_isb(
    kind: str,
    model: ProcessModel,
    partition: Partition,
    domain=None,
    quad_order: int = 5,
) -> float:
    """``int (E f_hat - f)^2`` with ``E f_hat`` built from exact bin probabilities."""
    check_kind(kind, partition.dim)
    if domain is None:
        domain = model.default_domain()
    mean = _wrap(kind, expected_histogram(model, partition, domain))
    return l2_distance_sq(mean, model.pdf, domain, quad_order)


@dataclass
class RiskConfig:
    model: ProcessModel
    scheme: SamplingScheme
    kind: str
    n: int
    h: float
    replications: int
    base_seed: int
    domain: tuple | None = None
    quad_order: int = 5
    origin: object = None
    threads: int = 1

    def __post_init__(self):
        check_kind(self.kind, self.model.dim)
        if self.replications < 2:
            raise InvalidInputError("at least two replications are needed")
        if self.n < 2:
            raise InvalidInputError("n must be at least 2")
        if not self.h > 0:
            raise InvalidInputError("bin width must be positive")
        if self.base_seed < 0:
            raise InvalidInputError("base_seed must be a nonnegative integer")
        if self.domain is None:
            self.domain = self.model.default_domain()

    @property
    def partition(self) -> Partition:
        return Partition(self.model.dim, self.h, self.origin)


@dataclass
class RiskReport:
    mise: float
    mise_stderr: float
    isb_exact: float
    iv_mc: float
    l2: np.ndarray = field(repr=False)
    iv_terms: np.ndarray = field(repr=False)
    seeds: list[int] = field(repr=False)

    def write_csv(self, stream: TextIO, per_replication: bool = True) -> None:
        fmt = lambda v: format(float(v), ".17g")  # noqa: E731
        stream.write("mise,mise_stderr,isb_exact,iv_mc,replications\n")
        stream.write(
            f"{fmt(self.mise)},{fmt(self.mise_stderr)},{fmt(self.isb_exact)},{fmt(self.iv_mc)},{len(self.l2)}\n"
        )
        if per_replication:
            stream.write("rep,seed,l2,iv_term\n")
            for rep, (seed, l2, iv) in enumerate(zip(self.seeds, self.l2, self.iv_terms)):
                stream.write(f"{rep},{seed},{fmt(l2)},{fmt(iv)}\n")

    def to_csv(self, per_replication: bool = True) -> str:
        buf = io.StringIO()
        self.write_csv(buf, per_replication)
        return buf.getvalue()


class _Experiment:
    """Quantities shared by all replications of one configuration."""

    def __init__(self, cfg: RiskConfig):
        self.cfg = cfg
        self.partition = cfg.partition
        self.lo, self.hi = as_box(cfg.domain, cfg.model.dim)
        mean = _wrap(cfg.kind, expected_histogram(cfg.model, self.partition, cfg.domain))
        self.quad = PanelQuadrature(mean.panel_partition, cfg.domain, cfg.quad_order)
        self.f_nodes = cfg.model.pdf(self.quad.nodes)
        self.mean_nodes = mean(self.quad.nodes)
        self.isb = max(self.quad.integrate((self.mean_nodes - self.f_nodes) ** 2), 0.0)

    def samples(self, rep: int) -> np.ndarray:
        cfg = self.cfg
        seed = replication_seed(cfg.base_seed, rep)
        times = draw_times(cfg.scheme, cfg.n, stream_seed(seed, 0))
        return cfg.model.sample_at(times[1:], stream_seed(seed, 1))

    def run(self, rep: int) -> tuple[float, float]:
        cfg = self.cfg
        try:
            x = self.samples(rep)
            outside = np.any((x < self.lo) | (x > self.hi), axis=1)
            if np.any(outside):
                raise NumericalFailureError(
                    f"{int(outside.sum())} samples fall outside the integration domain "
                    f"[{self.lo.tolist()}, {self.hi.tolist()}]"
                )
            fit = fit_histogram if cfg.kind == "histogram" else fit_frequency_polygon
            est = fit(self.partition, x)
            values = est(self.quad.nodes)
        except Exception as exc:
            seed = replication_seed(cfg.base_seed, rep)
            raise type(exc)(f"replication {rep} (n={cfg.n}, seed={seed}): {exc}") from exc
        l2 = self.quad.integrate((values - self.f_nodes) ** 2)
        iv = self.quad.integrate((values - self.mean_nodes) ** 2)
        return max(l2, 0.0), max(iv, 0.0)


def mc_mise(cfg: RiskConfig) -> RiskReport:
    """Monte Carlo MISE over ``cfg.replications`` independent runs.

    Replication ``r`` uses seed ``base_seed ^ r``; results are collected in
    replication order whatever the thread count.
    """
    exp = _Experiment(cfg)
    reps = range(cfg.replications)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(exp.run, reps))
    else:
        results = [exp.run(r) for r in reps]
    l2 = np.array([r[0] for r in results])
    iv = np.array([r[1] for r in results])
    return RiskReport(
        mise=float(l2.mean()),
        mise_stderr=float(l2.std(ddof=1) / np.sqrt(len(l2))),
        isb_exact=exp.isb,
        iv_mc=float(iv.mean()),
        l2=l2,
        iv_terms=iv,
        seeds=[replication_seed(cfg.base_seed, r) for r in reps],
    )


def _estimate_at(kind: str, partition: Partition, samples: np.ndarray, x: float) -> float:
    """Value of the fitted estimator at ``x`` using only the bins it depends on."""
    idx = partition.bin_indices(samples)[:, 0]
    n = len(idx)
    if kind == "histogram":
        j = np.array([partition.bin_of(x)[0]])
    else:
        j0 = partition.shifted(partition.bin_width / 2).bin_of(x)[0]
        j = np.array([j0, j0 + 1])
    counts = np.array([np.count_nonzero(idx == jj) for jj in j])
    keep = counts > 0
    heights = counts[keep] / (n * partition.volume)
    base = BinnedDensity(partition, j[keep].reshape(-1, 1), heights)
    return float(_wrap(kind, base)(x)[0])


def pointwise_variance_scaled(cfg: RiskConfig, x: float, beta: float | None = None) -> float:
    """``T_n`` times the Monte Carlo variance of the estimate at ``x``.

    Needs high-frequency sampling. With ``beta`` the step is replaced by
    ``h ** beta``, which must shrink faster than ``h^d``.
    """
    if not isinstance(cfg.scheme, HighFrequency):
        raise InvalidInputError(
            "the pointwise variance limit T_n Var(f_hat(x)) -> 2 int_0^inf g_u(x,x) du "
            "requires high-frequency sampling with delta_n = o(h^d)"
        )
    if cfg.model.dim != 1:
        raise InvalidInputError("pointwise variance scaling is implemented for dim = 1")
    scheme = cfg.scheme
    if beta is not None:
        if beta <= cfg.model.dim:
            raise InvalidInputError(f"beta must exceed d={cfg.model.dim} so that delta_n = o(h^d)")
        scheme = HighFrequency(cfg.h**beta)
    partition = cfg.partition
    times = draw_times(scheme, cfg.n, 0)
    span = times[-1]

    def one(rep: int) -> float:
        seed = replication_seed(cfg.base_seed, rep)
        path = cfg.model.sample_at(times[1:], stream_seed(seed, 1))
        return _estimate_at(cfg.kind, partition, path, x)

    reps = range(cfg.replications)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            values = np.array(list(pool.map(one, reps)))
    else:
        values = np.array([one(r) for r in reps])
    return float(span * values.var(ddof=1))

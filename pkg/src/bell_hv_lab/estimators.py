"""Correlators, marginals, CHSH combinations and chain statistics, exact or Monte Carlo.

Monte Carlo estimates carry two-sided Hoeffding half-widths.  For a mean of
``n`` variables with range 2 (outcomes and products of outcomes are +-1)
the half-width at confidence ``c`` is ``2 * sqrt(ln(2 / (1 - c)) / (2 n))``.

Every random quantity is drawn from a named substream of the run seed, so a
given link or CHSH term always sees the same random numbers no matter how
the work is ordered or partitioned.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .geometry import ChainSpec, angle_between
from .models import JointDistribution, Source, axis, exact_joint, sample_counts

THREADS_ENV = "BELL_HV_LAB_THREADS"
ORIENTATION_TOL = 1e-12  # links this close to zero correlation carry no orientation


def stream(seed: int, *names: Any) -> np.random.Generator:
    """Deterministic generator for the substream ``names`` of ``seed``."""
    key = "/".join(str(n) for n in names).encode()
    digest = hashlib.sha256(key).digest()
    spawn_key = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _pmap(fn: Callable, items: Sequence) -> list:
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def hoeffding_half_width(n: int, confidence: float, value_range: float = 2.0) -> float:
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence!r}")
    if n < 1:
        raise ValueError("need at least one sample")
    return value_range * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


@dataclass(frozen=True)
class MonteCarlo:
    """Monte Carlo evaluation mode; ``None`` stands for exact evaluation."""

    n_samples: int
    seed: int
    confidence: float = 0.99

    def __post_init__(self) -> None:
        if isinstance(self.n_samples, bool) or int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not 0 < self.confidence < 1:
            raise ValueError(f"confidence must lie in (0, 1), got {self.confidence!r}")

    def to_json(self) -> dict[str, Any]:
        return {"kind": "mc", "n_samples": self.n_samples, "seed": self.seed, "confidence": self.confidence}


Mode = MonteCarlo | None


@dataclass(frozen=True)
class CorrelatorEstimate:
    value: float
    n_samples: int = 0
    half_width: float = 0.0
    confidence: float = 1.0

    @property
    def lower(self) -> float:
        return self.value - self.half_width

    @property
    def upper(self) -> float:
        return self.value + self.half_width

    def to_json(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "n_samples": self.n_samples,
            "half_width": self.half_width,
            "confidence": self.confidence,
        }


def correlator(d: JointDistribution) -> float:
    """``p(A = B) - p(A != B)``."""
    return d.p_pp + d.p_mm - d.p_pm - d.p_mp


def marginals(d: JointDistribution) -> tuple[float, float]:
    """``(<A>, <B>)``."""
    return d.p_pp + d.p_pm - d.p_mp - d.p_mm, d.p_pp + d.p_mp - d.p_pm - d.p_mm


@dataclass(frozen=True)
class JointEstimate:
    joint: JointDistribution
    correlator: CorrelatorEstimate
    mean_a: CorrelatorEstimate
    mean_b: CorrelatorEstimate


def exact_estimate(source: Source, I, J) -> JointEstimate:
    d = exact_joint(source, I, J)
    ma, mb = marginals(d)
    return JointEstimate(d, CorrelatorEstimate(correlator(d)), CorrelatorEstimate(ma), CorrelatorEstimate(mb))


def mc_joint(
    source: Source,
    I,
    J,
    n_samples: int,
    confidence: float,
    rng: np.random.Generator,
) -> JointEstimate:
    """Empirical joint distribution of ``n_samples`` pairs with Hoeffding bands on each mean."""
    counts = sample_counts(source, I, J, n_samples, rng)
    d = JointDistribution.from_counts(counts)
    hw = hoeffding_half_width(n_samples, confidence)
    ma, mb = marginals(d)
    return JointEstimate(
        d,
        CorrelatorEstimate(correlator(d), n_samples, hw, confidence),
        CorrelatorEstimate(ma, n_samples, hw, confidence),
        CorrelatorEstimate(mb, n_samples, hw, confidence),
    )


def estimate(source: Source, I, J, mode: Mode, *substream: Any, confidence: float | None = None) -> JointEstimate:
    """Exact estimate, or a Monte Carlo one drawn from ``stream(mode.seed, *substream)``."""
    if mode is None:
        return exact_estimate(source, I, J)
    conf = mode.confidence if confidence is None else confidence
    return mc_joint(source, I, J, mode.n_samples, conf, stream(mode.seed, *substream))


# CHSH

CHSH_TERMS = ("IJ", "I'J", "IJ'", "I'J'")


def _check_sign_pattern(sign_pattern: Sequence[int]) -> tuple[int, ...]:
    signs = tuple(int(s) for s in sign_pattern)
    if len(signs) != 4 or any(s not in (1, -1) for s in signs):
        raise ValueError(f"sign pattern must be four entries of +1/-1, got {sign_pattern!r}")
    if signs.count(-1) != 1:
        raise ValueError(f"sign pattern must carry exactly one minus sign, got {sign_pattern!r}")
    return signs


@dataclass(frozen=True)
class ChshEstimate:
    """``sum_k sign_k <A B>_k`` over the pairs (I,J), (I',J), (I,J'), (I',J')."""

    terms: tuple[CorrelatorEstimate, ...]
    sign_pattern: tuple[int, ...]
    s_value: float
    angles: tuple[float, ...] = ()

    @property
    def half_width(self) -> float:
        return sum(t.half_width for t in self.terms)

    def to_json(self) -> dict[str, Any]:
        return {
            "s_value": self.s_value,
            "half_width": self.half_width,
            "sign_pattern": list(self.sign_pattern),
            "terms": [
                dict(t.to_json(), pair=name, sign=s, angle_rad=ang)
                for name, t, s, ang in zip(CHSH_TERMS, self.terms, self.sign_pattern, self.angles)
            ],
        }


def chsh(
    source: Source,
    settings: Sequence[Any],
    mode: Mode = None,
    sign_pattern: Sequence[int] = (1, 1, 1, -1),
    confidence: float | None = None,
) -> ChshEstimate:
    """CHSH combination for ``settings = (I, I', J, J')``.

    Each term is evaluated on its own setting pair, so no measurement
    independence is assumed.
    """
    signs = _check_sign_pattern(sign_pattern)
    I, Ip, J, Jp = settings
    pairs = [(I, J), (Ip, J), (I, Jp), (Ip, Jp)]
    terms = tuple(
        estimate(source, a, b, mode, "chsh", k, confidence=confidence).correlator for k, (a, b) in enumerate(pairs)
    )
    s = math.fsum(sg * t.value for sg, t in zip(signs, terms))
    angles = tuple(angle_between(axis(a), axis(b)) for a, b in pairs)
    return ChshEstimate(terms, signs, s, angles)


# Chains


@dataclass(frozen=True)
class ChainStats:
    chain: ChainSpec
    link_correlations: tuple[float, ...]
    half_widths: tuple[float, ...]
    orientation: str  # "correlated" or "anticorrelated"
    delta_hat: float
    mixed_orientation: bool
    confidence: float = 1.0
    n_per_link: int = 0

    @property
    def mean_correlation(self) -> float:
        return math.fsum(self.link_correlations) / len(self.link_correlations)

    @property
    def max_half_width(self) -> float:
        return max(self.half_widths)

    @property
    def link_slacks(self) -> tuple[float, ...]:
        """Per-link ``(1 - s * corr) / 2`` with ``s`` the chain orientation sign."""
        s = 1 if self.orientation == "correlated" else -1
        return tuple((1 - s * c) / 2 for c in self.link_correlations)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.chain.n,
            "start_rad": self.chain.start.angle,
            "orientation": self.orientation,
            "mixed_orientation": self.mixed_orientation,
            "delta_hat": self.delta_hat,
            "mean_correlation": self.mean_correlation,
            "max_half_width": self.max_half_width,
            "confidence": self.confidence,
            "n_per_link": self.n_per_link,
            "links": self.rows(),
        }

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "link_index": link.index,
                "side_pair": link.side_pair,
                "angle_rad": link.angle,
                "correlation": c,
                "half_width": hw,
            }
            for link, c, hw in zip(self.chain.links, self.link_correlations, self.half_widths)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["link_index", "side_pair", "angle_rad", "correlation", "half_width"], lineterminator="\n"
        )
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def chain_stats(source: Source, chain: ChainSpec, mode: Mode = None, confidence: float | None = None) -> ChainStats:
    """Per-link correlations along ``chain`` and the inferred average slack.

    The closing link is measured on ``(A_0, B_{n-1})`` and its correlation
    negated.  ``delta_hat = (1 - s * mean)/2`` where ``s`` is the sign of the
    mean link correlation.
    """

    def one(link):
        est = estimate(source, link.alice_measured, link.bob, mode, "chain", link.index, confidence=confidence)
        return link.sign * est.correlator.value, est.correlator.half_width

    results = _pmap(one, chain.links)
    corrs = tuple(c for c, _ in results)
    hws = tuple(h for _, h in results)
    mean = math.fsum(corrs) / len(corrs)
    s = 1 if mean >= 0 else -1
    mixed = any(c * s < -ORIENTATION_TOL for c in corrs)
    delta = max(0.0, (1 - s * mean) / 2)
    conf = 1.0 if mode is None else (mode.confidence if confidence is None else confidence)
    return ChainStats(
        chain=chain,
        link_correlations=corrs,
        half_widths=hws,
        orientation="correlated" if s > 0 else "anticorrelated",
        delta_hat=delta,
        mixed_orientation=mixed,
        confidence=conf,
        n_per_link=0 if mode is None else mode.n_samples,
    )


def marginal_estimate(source: Source, I, J, side: str = "A", mode: Mode = None, confidence: float | None = None):
    """``<A>`` (or ``<B>``) under the setting pair ``(I, J)``."""
    est = estimate(source, I, J, mode, "marginal", side, confidence=confidence)
    if side == "A":
        return est.mean_a
    if side == "B":
        return est.mean_b
    raise ValueError("side must be 'A' or 'B'")


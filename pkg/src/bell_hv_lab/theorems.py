"""Quantitative equiprobability and signalling bounds, and certification of the 16-pair layout.

* ``thm0prime_bound`` -- largest marginal compatible with PI and MI on a
  chain whose links have average slack ``delta``: ``2 n delta``.
* ``thm1prime_detect`` -- operational version: a marginal above that bound
  means Alice or Bob can signal.
* ``lemma1_split`` / ``lemma2_bound`` -- sub-distribution witnesses.
* ``thm2_certify`` -- everything above assembled on the 12-link chain plus
  its four CHSH pairs.
"""
from __future__ import annotations

import math
from collections.abc import Hashable
from dataclasses import dataclass, field
from typing import Any, Sequence

from .estimators import (
    ChainStats,
    ChshEstimate,
    CorrelatorEstimate,
    Mode,
    chain_stats,
    chsh,
    marginal_estimate,
)
from .geometry import Direction, Theorem2PrimeLayout, build_chain
from .models import (
    JointValueLambda,
    Source,
    TrivialLambda,
    WhartonLambda,
    axis,
    exact_joint,
    oi_violation,
)

SIGNALLING = "signalling"
NO_VIOLATION = "no_violation"
INCONCLUSIVE = "inconclusive"
CERTIFIED = "signalling_certified"
NOT_MET = "premises_not_met"
OI_TOL = 1e-12


class OIViolationError(ValueError):
    """The model violates outcome independence at the hidden level."""


class LemmaViolation(RuntimeError):
    """No sign-split witness although the CHSH value exceeds ``4 * epsilon``."""


def thm0prime_bound(n: int, delta: float) -> float:
    """Maximal ``|<A>|`` allowed by PI and MI on an ``n``-chain with average slack ``delta``."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    return 2 * n * delta


def quantum_chain_slack(n: int, theta: float = math.pi) -> float:
    """Link slack of the maximally entangled state on an ``n``-chain spanning ``theta``."""
    return math.sin(theta / (4 * n)) ** 2


def thm1prime_detect(stats: ChainStats, marginal: CorrelatorEstimate, n: int | None = None) -> str:
    """Classify a marginal against the chain bound, with sampling margins on both sides."""
    if stats.mixed_orientation:
        raise ValueError("chain links are not uniformly correlated or anticorrelated")
    n = stats.chain.n if n is None else n
    margin = stats.max_half_width
    m = abs(marginal.value)
    if m - marginal.half_width > thm0prime_bound(n, stats.delta_hat + margin):
        return SIGNALLING
    if m + marginal.half_width <= thm0prime_bound(n, max(0.0, stats.delta_hat - margin)):
        return NO_VIOLATION
    return INCONCLUSIVE


@dataclass(frozen=True)
class EquiprobabilityCheck:
    stats: ChainStats
    marginal: CorrelatorEstimate
    bound: float
    verdict: str

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.stats.chain.n,
            "chain": self.stats.to_json(),
            "marginal": self.marginal.to_json(),
            "bound": self.bound,
            "verdict": self.verdict,
        }


def equiprobability_check(source: Source, n: int, start: Direction | float = 0.0, mode: Mode = None) -> EquiprobabilityCheck:
    """Chain statistics and the ``A_0`` marginal (measured against ``B_0``) for one chain."""
    chain = build_chain(n, start)
    stats = chain_stats(source, chain, mode)
    first = chain.links[0]
    m = marginal_estimate(source, first.alice_measured, first.bob, "A", mode)
    return EquiprobabilityCheck(stats, m, thm0prime_bound(n, stats.delta_hat), thm1prime_detect(stats, m))


# Sub-distributions


def describe_hidden(lam: Hashable) -> str:
    if isinstance(lam, WhartonLambda):
        return lam.tag or f"spins({lam.alice_spin.angle:.6f},{lam.bob_spin.angle:.6f})"
    if isinstance(lam, JointValueLambda):
        o = lam.outcome
        return f"({'+' if o.a > 0 else '-'},{'+' if o.b > 0 else '-'})"
    if isinstance(lam, TrivialLambda):
        return "trivial"
    if isinstance(lam, tuple) and len(lam) == 2:
        return f"{lam[0]}:{describe_hidden(lam[1])}"
    return repr(lam)


@dataclass(frozen=True)
class SubDistribution:
    """``parent = weight * support + (1 - weight) * complement`` for one setting pair."""

    weight: float
    support: dict[Hashable, float]
    parent: dict[Hashable, float]
    complement: dict[Hashable, float]

    @classmethod
    def from_selection(cls, parent: dict[Hashable, float], selected: set) -> "SubDistribution":
        weight = min(1.0, math.fsum(w for lam, w in parent.items() if lam in selected))
        if weight <= 0:
            raise ValueError("sub-distribution must have positive weight")
        rest = 1.0 - weight
        sub = {lam: w / weight for lam, w in parent.items() if lam in selected}
        comp = {lam: w / rest for lam, w in parent.items() if lam not in selected} if rest > 0 else {}
        return cls(weight, sub, dict(parent), comp)

    def reconstruction_error(self) -> float:
        """Largest pointwise gap between the recombined and the parent distribution."""
        return max(
            abs(self.weight * self.support.get(lam, 0.0) + (1 - self.weight) * self.complement.get(lam, 0.0) - p)
            for lam, p in self.parent.items()
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "weight": self.weight,
            "support": {describe_hidden(k): v for k, v in self.support.items()},
            "complement": {describe_hidden(k): v for k, v in self.complement.items()},
        }


@dataclass(frozen=True)
class Lemma1Witness:
    pair_index: int
    pair: tuple[Any, Any]
    side: str
    sub: SubDistribution
    sub_marginal: float
    chsh_value: float

    def to_json(self) -> dict[str, Any]:
        return {
            "pair_index": self.pair_index,
            "pair_angles_rad": [axis(self.pair[0]).angle, axis(self.pair[1]).angle],
            "side": self.side,
            "sub_marginal": self.sub_marginal,
            "chsh_value": self.chsh_value,
            "sub_distribution": self.sub.to_json(),
        }


def sign_split(source: Source, I, J, side: str = "A") -> tuple[SubDistribution, float]:
    """Split ``sigma(I, J)`` by the sign of the hidden-level marginal and keep the heavier part.

    Returns the sub-distribution and its marginal on ``side``.  Ties go to
    the non-negative part.
    """
    parent = source.sigma(I, J)
    values = {}
    for lam in parent:
        d = source.outcome_dist(lam, I, J)
        if side == "A":
            values[lam] = d.p_pp + d.p_pm - d.p_mp - d.p_mm
        elif side == "B":
            values[lam] = d.p_pp + d.p_mp - d.p_pm - d.p_mm
        else:
            raise ValueError("side must be 'A' or 'B'")
    nonneg = {lam for lam, v in values.items() if v >= 0}
    alpha = math.fsum(parent[lam] for lam in nonneg)
    chosen = nonneg if alpha >= 0.5 else set(parent) - nonneg
    sub = SubDistribution.from_selection(parent, chosen)
    m = math.fsum(w * values[lam] for lam, w in sub.support.items())
    return sub, m


def lemma1_split(
    source: Source,
    settings: Sequence[Any],
    epsilon: float,
    side: str | None = None,
    sign_pattern: Sequence[int] = (1, 1, 1, -1),
) -> Lemma1Witness | None:
    """Search the four CHSH setting pairs for a sign-split sub-distribution with ``|marginal| > epsilon``.

    ``settings = (I, I', J, J')``.  Searches side A then side B unless
    ``side`` is given.  Returns ``None`` only when the exact CHSH value does
    not exceed ``4 * epsilon``; otherwise a missing witness raises
    :class:`LemmaViolation`.
    """
    I, Ip, J, Jp = settings
    pairs = [(I, J), (Ip, J), (I, Jp), (Ip, Jp)]
    worst = oi_violation(source, pairs)
    if worst > OI_TOL:
        raise OIViolationError(
            f"outcome independence fails at the hidden level (max |<AB> - <A><B>| = {worst:.3g}); "
            "sub-distribution witnesses need OI"
        )
    s_value = chsh(source, settings, None, sign_pattern).s_value
    for sd in (side,) if side else ("A", "B"):
        for k, (a, b) in enumerate(pairs):
            sub, m = sign_split(source, a, b, sd)
            if abs(m) > epsilon:
                return Lemma1Witness(k, (a, b), sd, sub, m, s_value)
    if abs(s_value) > 4 * epsilon:
        raise LemmaViolation(f"|CHSH| = {abs(s_value):.6g} > 4*epsilon = {4 * epsilon:.6g} but no witness found")
    return None


def lemma2_bound(gamma: float, alpha: float) -> float:
    """Least ``|<A B>|`` in a sub-distribution of weight ``alpha`` when the parent has ``|<A B>| >= 1 - 2 gamma``."""
    if not gamma >= 0:
        raise ValueError(f"gamma must be >= 0, got {gamma!r}")
    if not 0 < alpha <= 1:
        raise ValueError(f"sub-distribution weight must lie in (0, 1], got {alpha!r}")
    return 1 - 2 * gamma / alpha


# Certification of the 16-pair layout


@dataclass(frozen=True)
class CertificationReport:
    n: int
    epsilon_hat: float
    gamma_hat: float
    condition_met: bool
    ratio: float | None
    chsh: ChshEstimate
    chain: ChainStats
    oi_holds: bool
    witness: Lemma1Witness | None
    witness_epsilon: float
    lemma2_min_correlation: float | None
    preparable_subensembles: bool
    verdict: str
    mode: Mode = None
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "epsilon_hat": self.epsilon_hat,
            "gamma_hat": self.gamma_hat,
            "threshold_4n_gamma": 4 * self.n * self.gamma_hat,
            "ratio": self.ratio,
            "condition_met": self.condition_met,
            "chsh": self.chsh.to_json(),
            "chain": self.chain.to_json(),
            "oi_holds": self.oi_holds,
            "witness_epsilon": self.witness_epsilon,
            "witness": None if self.witness is None else self.witness.to_json(),
            "lemma2_min_correlation": self.lemma2_min_correlation,
            "preparable_subensembles": self.preparable_subensembles,
            "verdict": self.verdict,
            "mode": {"kind": "exact"} if self.mode is None else self.mode.to_json(),
            "notes": list(self.notes),
        }


SIGN_PATTERNS = ((1, 1, 1, -1), (1, 1, -1, 1), (1, -1, 1, 1), (-1, 1, 1, 1))


def thm2_certify(source: Source, layout: Theorem2PrimeLayout, mode: Mode = None) -> CertificationReport:
    """Check the chain-plus-CHSH premises on ``layout`` and attach a sub-distribution witness.

    In Monte Carlo mode the 16 estimated correlators share the declared
    confidence through a union bound; ``gamma_hat`` is raised and
    ``epsilon_hat`` lowered by their half-widths.
    """
    n = layout.chain.n
    n_quantities = len(layout.chain.links) + len(layout.chsh_pairs)
    conf = None if mode is None else 1 - (1 - mode.confidence) / n_quantities
    notes = []

    stats = chain_stats(source, layout.chain, mode, conf)
    gamma_margin = 0.0 if mode is None else stats.max_half_width
    gamma_hat = stats.delta_hat + gamma_margin

    settings = layout.chsh_settings()
    base = chsh(source, settings, mode, SIGN_PATTERNS[0], conf)
    best = max(
        (
            ChshEstimate(base.terms, sp, math.fsum(s * t.value for s, t in zip(sp, base.terms)), base.angles)
            for sp in SIGN_PATTERNS
        ),
        key=lambda c: abs(c.s_value),
    )
    epsilon_hat = (abs(best.s_value) - best.half_width) / 4

    threshold = 4 * n * gamma_hat
    condition_met = (not stats.mixed_orientation) and epsilon_hat >= threshold
    if stats.mixed_orientation:
        notes.append("chain links mix correlated and anticorrelated signs")
    ratio = epsilon_hat / threshold if threshold > 0 else None

    pairs = [(link.alice_measured, link.bob) for link in layout.chain.links]
    I, Ip, J, Jp = settings
    pairs += [(I, J), (Ip, J), (I, Jp), (Ip, Jp)]
    oi_ok = oi_violation(source, pairs) <= OI_TOL if source.finite_support else False

    witness = None
    lemma2_min = None
    if condition_met and not oi_ok:
        notes.append("outcome independence fails at the hidden level; no sub-distribution witness attached")
    elif condition_met:
        witness = lemma1_split(source, settings, threshold, sign_pattern=best.sign_pattern)
        if witness is None:
            notes.append("exact CHSH value does not exceed 16 n gamma_hat; no witness")
        else:
            lemma2_min = lemma2_bound(gamma_hat, witness.sub.weight)
    if not source.preparable_subensembles:
        notes.append("the model gives no operational handle on sub-ensembles of this source")

    verdict = CERTIFIED if condition_met and witness is not None else NOT_MET
    return CertificationReport(
        n=n,
        epsilon_hat=epsilon_hat,
        gamma_hat=gamma_hat,
        condition_met=condition_met,
        ratio=ratio,
        chsh=best,
        chain=stats,
        oi_holds=oi_ok,
        witness=witness,
        witness_epsilon=threshold,
        lemma2_min_correlation=lemma2_min,
        preparable_subensembles=bool(source.preparable_subensembles),
        verdict=verdict,
        mode=mode,
        notes=tuple(notes),
    )


def exact_marginal(source: Source, I, J, side: str = "A") -> float:
    d = exact_joint(source, I, J)
    return d.p_pp + d.p_pm - d.p_mp - d.p_mm if side == "A" else d.p_pp + d.p_mp - d.p_pm - d.p_mm


__all__ = [
    "CERTIFIED",
    "INCONCLUSIVE",
    "NOT_MET",
    "NO_VIOLATION",
    "SIGNALLING",
    "CertificationReport",
    "EquiprobabilityCheck",
    "Lemma1Witness",
    "LemmaViolation",
    "OIViolationError",
    "SubDistribution",
    "equiprobability_check",
    "exact_marginal",
    "lemma1_split",
    "lemma2_bound",
    "quantum_chain_slack",
    "sign_split",
    "thm0prime_bound",
    "thm1prime_detect",
    "thm2_certify",
]

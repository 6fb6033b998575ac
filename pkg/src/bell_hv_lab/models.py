"""Hidden-variables models of a two-wing spin experiment.

Every source ``K`` exposes the hidden-state distribution ``sigma(I, J)`` (a
finite mapping from hidden state to weight) and the conditional outcome
distribution ``outcome_dist(lam, I, J)``.  Keeping the two apart is what
lets outcome independence, parameter independence and measurement
independence be checked directly at the hidden level.

Built-in sources:

``QuantumCorrelated``
    The maximally entangled coplanar state as a trivial hidden-variables
    model (one hidden state, the state itself).
``ToyMI``
    Hidden state = the joint outcome pair, distributed with the quantum
    probabilities of the measured pair of axes; outcomes are read off
    deterministically.
``SchulmanSingle``
    One particle measured along A then along B; B agrees with A with
    Schulman's anomalous-rotation probability.
``WhartonPair``
    Two particles whose hidden spins are (anti)parallel to one of the four
    tagged axes +A, +B, -A, -B; each hidden spin is revealed through a
    Schulman rotation onto its own measured axis.
"""
from __future__ import annotations

import math
from collections.abc import Hashable, Mapping
from dataclasses import dataclass, field
from typing import Any, ClassVar, Sequence

import numpy as np

from .geometry import Direction, angle_between

NORM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-9
WHARTON_TAGS = ("Aplus", "Bplus", "Aminus", "Bminus")
SPIN_RELATIONS = ("parallel", "antiparallel")


class ModelError(ValueError):
    """Invalid model parameters or arguments outside a model's domain."""


class UnsupportedModelError(ModelError):
    """The source cannot be evaluated exactly (no finite hidden support)."""


@dataclass(frozen=True)
class OutcomePair:
    a: int
    b: int

    def __post_init__(self) -> None:
        if self.a not in (1, -1) or self.b not in (1, -1):
            raise ModelError(f"outcomes must be +1 or -1, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities of (a, b) = (+,+), (+,-), (-,+), (-,-)."""

    p_pp: float
    p_pm: float
    p_mp: float
    p_mm: float

    def __post_init__(self) -> None:
        probs = self.as_array()
        if not np.all(np.isfinite(probs)) or np.any(probs < -NORM_TOL):
            raise ModelError(f"negative or non-finite probability in {tuple(probs)}")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ModelError(f"joint distribution sums to {probs.sum()!r}, not 1")

    @classmethod
    def from_array(cls, p: Sequence[float]) -> "JointDistribution":
        p = np.asarray(p, dtype=float)
        return cls(float(p[0]), float(p[1]), float(p[2]), float(p[3]))

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "JointDistribution":
        counts = np.asarray(counts, dtype=float)
        return cls.from_array(counts / counts.sum())

    @classmethod
    def product(cls, mean_a: float, mean_b: float) -> "JointDistribution":
        pa, pb = (1 + mean_a) / 2, (1 + mean_b) / 2
        return cls(pa * pb, pa * (1 - pb), (1 - pa) * pb, (1 - pa) * (1 - pb))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_pp, self.p_pm, self.p_mp, self.p_mm], dtype=float)

    def prob(self, a: int, b: int) -> float:
        return {(1, 1): self.p_pp, (1, -1): self.p_pm, (-1, 1): self.p_mp, (-1, -1): self.p_mm}[(a, b)]

    def mix(self, other: "JointDistribution", weight: float) -> "JointDistribution":
        """``weight * self + (1 - weight) * other``."""
        return JointDistribution.from_array(weight * self.as_array() + (1 - weight) * other.as_array())

    def to_json(self) -> dict[str, float]:
        return {"p_pp": self.p_pp, "p_pm": self.p_pm, "p_mp": self.p_mp, "p_mm": self.p_mm}


def _point_mass(a: int, b: int) -> JointDistribution:
    p = [0.0, 0.0, 0.0, 0.0]
    p[(0 if a == 1 else 2) + (0 if b == 1 else 1)] = 1.0
    return JointDistribution.from_array(p)


@dataclass(frozen=True)
class Setting:
    """A measurement context; built-in models only look at the axis."""

    direction: Direction
    context_label: str = ""


def axis(x: Setting | Direction | float) -> Direction:
    if isinstance(x, Setting):
        return x.direction
    if isinstance(x, Direction):
        return x
    return Direction(x)


def _check_angle(theta: float) -> float:
    theta = float(theta)
    if not (0.0 <= theta <= math.pi):
        raise ModelError(f"angle must lie in [0, pi], got {theta!r}")
    return theta


def quantum_joint(theta: float, correlation_sign: int = 1) -> JointDistribution:
    """Joint outcome distribution of the maximally entangled coplanar state at relative angle ``theta``."""
    theta = _check_angle(theta)
    if correlation_sign not in (1, -1):
        raise ModelError("correlation_sign must be +1 or -1")
    same = math.cos(theta / 2) ** 2 / 2
    diff = math.sin(theta / 2) ** 2 / 2
    if correlation_sign == 1:
        return JointDistribution(same, diff, diff, same)
    return JointDistribution(diff, same, same, diff)


# Schulman anomalous-rotation weights


def schulman_weight(alpha: float | np.ndarray, gamma_s: float) -> float | np.ndarray:
    """Unnormalised probability ``1 / (alpha**2 + gamma_s**2)`` of a net rotation ``alpha``."""
    if not gamma_s > 0:
        raise ModelError(f"Schulman width must be positive, got {gamma_s!r}")
    return 1.0 / (np.square(alpha) + gamma_s * gamma_s)


def schulman_ratio(theta: float, gamma_s: float, method: str = "closed_form", truncation: int = 100_000) -> float:
    """Relative probability of rotating by ``theta`` versus ``pi + theta``.

    ``method="truncated"`` sums the weights over windings ``n = -N..N``;
    ``method="closed_form"`` uses the resummed expression in terms of
    ``tanh(gamma_s/2)**2``.
    """
    if not gamma_s > 0:
        raise ModelError(f"Schulman width must be positive, got {gamma_s!r}")
    if method == "closed_form":
        t = math.tanh(gamma_s / 2) ** 2
        c, s = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
        return (c + s * t) / (s + c * t)
    if method == "truncated":
        if isinstance(truncation, bool) or int(truncation) != truncation or truncation < 1:
            raise ModelError(f"truncation must be a positive integer, got {truncation!r}")
        n = np.arange(-int(truncation), int(truncation) + 1, dtype=float)
        winding = 2 * math.pi * n
        # all terms positive, so numpy's pairwise sum is accurate to a few ulps
        num = float(np.sum(schulman_weight(winding + theta, gamma_s)))
        den = float(np.sum(schulman_weight(winding + math.pi + theta, gamma_s)))
        return num / den
    raise ModelError(f"unknown method {method!r}")


def schulman_single_probs(theta: float, gamma_s: float) -> tuple[float, float]:
    """``(p_same, p_flip)`` for a hidden spin at angle ``theta`` from the measured axis.

    Equal to ``(r/(1+r), 1/(1+r))`` with ``r`` the closed-form ratio; written
    so that ``gamma_s == 0`` returns ``(cos^2(theta/2), sin^2(theta/2))``
    exactly.
    """
    theta = _check_angle(theta)
    if gamma_s < 0 or not math.isfinite(gamma_s):
        raise ModelError(f"Schulman width must be >= 0, got {gamma_s!r}")
    c, s = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
    if gamma_s == 0:
        return c, s
    t = math.tanh(gamma_s / 2) ** 2
    return (c + s * t) / (1 + t), (s + c * t) / (1 + t)


# Hidden states


@dataclass(frozen=True)
class TrivialLambda:
    """The single hidden state of a model whose only 'hidden variable' is the quantum state."""


@dataclass(frozen=True)
class JointValueLambda:
    outcome: OutcomePair


@dataclass(frozen=True)
class WhartonLambda:
    """Hidden spin directions of the two particles.

    Identity is physical: two tags that produce the same pair of spins (e.g.
    ``Aplus`` and ``Bplus`` when the axes coincide) are the same state.
    """

    alice_spin: Direction
    bob_spin: Direction
    tag: str = field(default="", compare=False)


# Sources


class Source:
    """A preparation context ``K``: hidden-state distribution plus conditional outcomes."""

    model: ClassVar[str] = "custom"
    finite_support: ClassVar[bool] = True
    # Whether the theory lets Charlie prepare sub-ensembles of this source.
    preparable_subensembles: ClassVar[bool] = False

    def sigma(self, I, J) -> dict[Hashable, float]:
        raise UnsupportedModelError(f"{type(self).__name__} does not expose a finite hidden support")

    def outcome_dist(self, lam: Hashable, I, J) -> JointDistribution:
        raise NotImplementedError

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class QuantumCorrelated(Source):
    correlation_sign: int = 1

    model: ClassVar[str] = "quantum_correlated"

    def __post_init__(self) -> None:
        if self.correlation_sign not in (1, -1):
            raise ModelError("correlation_sign must be +1 or -1")

    def sigma(self, I, J) -> dict[Hashable, float]:
        return {TrivialLambda(): 1.0}

    def outcome_dist(self, lam, I, J) -> JointDistribution:
        return quantum_joint(angle_between(axis(I), axis(J)), self.correlation_sign)

    def to_json(self) -> dict[str, Any]:
        return {"model": self.model, "correlation_sign": self.correlation_sign}


@dataclass(frozen=True)
class ToyMI(Source):
    correlation_sign: int = 1

    model: ClassVar[str] = "toy_mi"

    def __post_init__(self) -> None:
        if self.correlation_sign not in (1, -1):
            raise ModelError("correlation_sign must be +1 or -1")

    def sigma(self, I, J) -> dict[Hashable, float]:
        q = quantum_joint(angle_between(axis(I), axis(J)), self.correlation_sign)
        return {JointValueLambda(OutcomePair(a, b)): q.prob(a, b) for a in (1, -1) for b in (1, -1)}

    def outcome_dist(self, lam: JointValueLambda, I, J) -> JointDistribution:
        return _point_mass(lam.outcome.a, lam.outcome.b)

    def to_json(self) -> dict[str, Any]:
        return {"model": self.model, "correlation_sign": self.correlation_sign}


@dataclass(frozen=True)
class SchulmanSingle(Source):
    """Sequential A-then-B measurement of one particle; A is pre-selected uniformly."""

    gamma_s: float = 0.0
    truncation: int = 100_000

    model: ClassVar[str] = "schulman_single"

    def __post_init__(self) -> None:
        if not (self.gamma_s >= 0 and math.isfinite(self.gamma_s)):
            raise ModelError(f"gamma_s must be >= 0, got {self.gamma_s!r}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ModelError("truncation must be a positive integer")

    def sigma(self, I, J) -> dict[Hashable, float]:
        return {TrivialLambda(): 1.0}

    def outcome_dist(self, lam, I, J) -> JointDistribution:
        same, flip = schulman_single_probs(angle_between(axis(I), axis(J)), self.gamma_s)
        return JointDistribution(same / 2, flip / 2, flip / 2, same / 2)

    def to_json(self) -> dict[str, Any]:
        return {"model": self.model, "gamma_s": self.gamma_s, "truncation": self.truncation}


@dataclass(frozen=True)
class WhartonPair(Source):
    """Wharton's two-particle retrocausal model.

    ``weights`` are the source probabilities of the tags
    ``(Aplus, Bplus, Aminus, Bminus)``.  Negligible-weight histories in which
    both hidden spins rotate are dropped.
    """

    weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    spin_relation: str = "parallel"
    gamma_s: float = 0.0
    truncation: int = 100_000

    model: ClassVar[str] = "wharton_pair"
    preparable_subensembles: ClassVar[bool] = True

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if len(w) != 4:
            raise ModelError("Wharton source needs exactly four weights")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ModelError(f"Wharton weights must be non-negative, got {w}")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ModelError(f"Wharton weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", tuple(x / total for x in w))
        if self.spin_relation not in SPIN_RELATIONS:
            raise ModelError(f"spin_relation must be one of {SPIN_RELATIONS}")
        if not (self.gamma_s >= 0 and math.isfinite(self.gamma_s)):
            raise ModelError(f"gamma_s must be >= 0, got {self.gamma_s!r}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ModelError("truncation must be a positive integer")

    @classmethod
    def homogeneous(cls, tag: str = "Aplus", **kwargs) -> "WhartonPair":
        w = [0.0] * 4
        w[WHARTON_TAGS.index(tag)] = 1.0
        return cls(weights=tuple(w), **kwargs)

    @classmethod
    def born_family(cls, a: float, **kwargs) -> "WhartonPair":
        """Weights ``(a, 1/2 - a, a, 1/2 - a)``: the sources that reproduce Born marginals."""
        if not 0 <= a <= 0.5:
            raise ModelError("Born-family parameter must lie in [0, 1/2]")
        return cls(weights=(a, 0.5 - a, a, 0.5 - a), **kwargs)

    def is_born_family(self, tol: float = 1e-12) -> bool:
        w_ap, w_bp, w_am, w_bm = self.weights
        return abs(w_ap - w_am) <= tol and abs(w_bp - w_bm) <= tol and abs(w_ap + w_bm - 0.5) <= tol

    def hidden_state(self, tag: str, I, J) -> WhartonLambda:
        a, b = axis(I), axis(J)
        tagged = {"Aplus": a, "Bplus": b, "Aminus": a.opposite(), "Bminus": b.opposite()}[tag]
        partner = tagged if self.spin_relation == "parallel" else tagged.opposite()
        if tag.startswith("A"):
            return WhartonLambda(tagged, partner, tag)
        return WhartonLambda(partner, tagged, tag)

    def sigma(self, I, J) -> dict[Hashable, float]:
        out: dict[Hashable, float] = {}
        for tag, w in zip(WHARTON_TAGS, self.weights):
            if w > 0:
                lam = self.hidden_state(tag, I, J)
                out[lam] = out.get(lam, 0.0) + w
        return out

    def outcome_dist(self, lam: WhartonLambda, I, J) -> JointDistribution:
        # Each hidden spin is revealed on its own axis only: PI and OI hold by construction.
        pa, _ = schulman_single_probs(angle_between(lam.alice_spin, axis(I)), self.gamma_s)
        pb, _ = schulman_single_probs(angle_between(lam.bob_spin, axis(J)), self.gamma_s)
        return JointDistribution(pa * pb, pa * (1 - pb), (1 - pa) * pb, (1 - pa) * (1 - pb))

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "weights": list(self.weights),
            "spin_relation": self.spin_relation,
            "gamma_s": self.gamma_s,
            "truncation": self.truncation,
        }


@dataclass(frozen=True)
class MixedSource(Source):
    """``weight * first + (1 - weight) * second``, mixed pointwise for every (I, J).

    Hidden states are tagged with the component they come from.
    """

    weight: float
    first: Source
    second: Source

    model: ClassVar[str] = "mixture"

    def __post_init__(self) -> None:
        if not 0 <= self.weight <= 1:
            raise ModelError("mixture weight must lie in [0, 1]")

    @property
    def preparable_subensembles(self) -> bool:  # type: ignore[override]
        return self.first.preparable_subensembles and self.second.preparable_subensembles

    def sigma(self, I, J) -> dict[Hashable, float]:
        out: dict[Hashable, float] = {}
        for k, (w, src) in enumerate(((self.weight, self.first), (1 - self.weight, self.second))):
            if w > 0:
                for lam, p in src.sigma(I, J).items():
                    out[(k, lam)] = w * p
        return out

    def outcome_dist(self, lam, I, J) -> JointDistribution:
        k, inner = lam
        return (self.first, self.second)[k].outcome_dist(inner, I, J)

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "weight": self.weight,
            "components": [self.first.to_json(), self.second.to_json()],
        }


def mix_sources(weight: float, first: Source, second: Source) -> Source:
    """Mixture of two sources; two compatible Wharton sources mix into a Wharton source."""
    if (
        isinstance(first, WhartonPair)
        and isinstance(second, WhartonPair)
        and (first.spin_relation, first.gamma_s) == (second.spin_relation, second.gamma_s)
    ):
        w = weight * np.array(first.weights) + (1 - weight) * np.array(second.weights)
        return WhartonPair(tuple(w), first.spin_relation, first.gamma_s, first.truncation)
    return MixedSource(weight, first, second)


_MODELS = {
    "quantum_correlated": QuantumCorrelated,
    "toy_mi": ToyMI,
    "schulman_single": SchulmanSingle,
    "wharton_pair": WhartonPair,
}


def source_from_json(doc: Mapping[str, Any]) -> Source:
    """Build a source from its JSON description, rejecting missing or stray fields."""
    model = doc.get("model")
    if model == "mixture":
        first, second = doc["components"]
        return MixedSource(float(doc["weight"]), source_from_json(first), source_from_json(second))
    if model not in _MODELS:
        raise ModelError(f"unknown model {model!r}")
    if model in ("quantum_correlated", "toy_mi"):
        sign = doc.get("correlation_sign", 1)
        if sign not in (1, -1):
            raise ModelError("correlation_sign must be +1 or -1")
        return _MODELS[model](correlation_sign=int(sign))
    if model == "schulman_single":
        return SchulmanSingle(gamma_s=float(doc.get("gamma_s", 0.0)), truncation=int(doc.get("truncation", 100_000)))
    if "weights" not in doc:
        raise ModelError("wharton_pair source requires 'weights'")
    return WhartonPair(
        weights=tuple(float(x) for x in doc["weights"]),
        spin_relation=doc.get("spin_relation", "parallel"),
        gamma_s=float(doc.get("gamma_s", 0.0)),
        truncation=int(doc.get("truncation", 100_000)),
    )


# Exact evaluation and sampling


def exact_joint(source: Source, I, J) -> JointDistribution:
    """``sum_lam sigma(lam) * p_lam`` over the finite hidden support."""
    if isinstance(source, QuantumCorrelated):
        return quantum_joint(angle_between(axis(I), axis(J)), source.correlation_sign)
    if not source.finite_support:
        raise UnsupportedModelError(f"{type(source).__name__} has no exact evaluation")
    total = np.zeros(4)
    for lam, w in source.sigma(I, J).items():
        total += w * source.outcome_dist(lam, I, J).as_array()
    return JointDistribution.from_array(total)


def _support(source: Source, I, J) -> tuple[list[Hashable], np.ndarray]:
    sig = source.sigma(I, J)
    lams = list(sig)
    w = np.array([sig[lam] for lam in lams], dtype=float)
    return lams, w / w.sum()


def sample_pairs(source: Source, I, J, size: int, rng: np.random.Generator, first: str = "a"):
    """Two-stage sampling: hidden state, then outcomes one side after the other.

    Returns ``(hidden_states, a, b)`` where ``hidden_states`` indexes into the
    support list returned as the fourth element.  ``first`` selects which
    side's outcome is drawn first; the other is drawn conditionally.
    """
    lams, w = _support(source, I, J)
    idx = rng.choice(len(lams), size=size, p=w)
    tables = np.array([source.outcome_dist(lam, I, J).as_array().reshape(2, 2) for lam in lams])
    u1, u2 = rng.random(size), rng.random(size)
    t = tables[idx]  # [k, a_index, b_index], index 0 is +1
    if first == "a":
        p_a_plus = t[:, 0, :].sum(axis=1)
        a_idx = (u1 >= p_a_plus).astype(int)
        row = t[np.arange(size), a_idx, :]
        b_idx = (u2 * row.sum(axis=1) >= row[:, 0]).astype(int)
    elif first == "b":
        p_b_plus = t[:, :, 0].sum(axis=1)
        b_idx = (u1 >= p_b_plus).astype(int)
        col = t[np.arange(size), :, b_idx]
        a_idx = (u2 * col.sum(axis=1) >= col[:, 0]).astype(int)
    else:
        raise ValueError("first must be 'a' or 'b'")
    return idx, 1 - 2 * a_idx, 1 - 2 * b_idx, lams


def sample_pair(source: Source, I, J, rng: np.random.Generator) -> OutcomePair:
    _, a, b, _ = sample_pairs(source, I, J, 1, rng)
    return OutcomePair(int(a[0]), int(b[0]))


def sample_counts(source: Source, I, J, n: int, rng: np.random.Generator) -> np.ndarray:
    """Outcome counts ``[n_pp, n_pm, n_mp, n_mm]`` of ``n`` two-stage samples.

    Draws hidden-state counts from the source multinomial, then outcome
    counts per hidden state; distributed exactly like tallying
    :func:`sample_pairs` but independent of ``n`` in cost.
    """
    lams, w = _support(source, I, J)
    lam_counts = rng.multinomial(n, w)
    counts = np.zeros(4, dtype=np.int64)
    for lam, k in zip(lams, lam_counts):
        if k:
            p = np.clip(source.outcome_dist(lam, I, J).as_array(), 0.0, None)
            counts += rng.multinomial(k, p / p.sum())
    return counts


# Hidden-level predicates


def _marginals(d: JointDistribution) -> tuple[float, float]:
    return d.p_pp + d.p_pm - d.p_mp - d.p_mm, d.p_pp + d.p_mp - d.p_pm - d.p_mm


def oi_violation(source: Source, pairs: Sequence[tuple[Any, Any]]) -> float:
    """Largest ``|<AB>_lam - <A>_lam <B>_lam|`` over the supports of the given setting pairs."""
    worst = 0.0
    for I, J in pairs:
        for lam in source.sigma(I, J):
            d = source.outcome_dist(lam, I, J)
            ma, mb = _marginals(d)
            corr = d.p_pp + d.p_mm - d.p_pm - d.p_mp
            worst = max(worst, abs(corr - ma * mb))
    return worst


def oi_holds(source: Source, pairs: Sequence[tuple[Any, Any]], tol: float = NORM_TOL) -> bool:
    return oi_violation(source, pairs) <= tol


def pi_holds(source: Source, alice_axes: Sequence[Any], bob_axes: Sequence[Any], tol: float = NORM_TOL) -> bool:
    """Each side's marginal given lam ignores the distant setting, for every lam in any support."""
    lams = {lam for I in alice_axes for J in bob_axes for lam in source.sigma(I, J)}
    for lam in lams:
        for I in alice_axes:
            means = [_marginals(source.outcome_dist(lam, I, J))[0] for J in bob_axes]
            if max(means) - min(means) > tol:
                return False
        for J in bob_axes:
            means = [_marginals(source.outcome_dist(lam, I, J))[1] for I in alice_axes]
            if max(means) - min(means) > tol:
                return False
    return True


def mi_holds(source: Source, pairs: Sequence[tuple[Any, Any]], tol: float = NORM_TOL) -> bool:
    """True when sigma is the same distribution for every listed setting pair."""
    sigmas = [source.sigma(I, J) for I, J in pairs]
    ref = sigmas[0]
    for sig in sigmas[1:]:
        for lam in set(ref) | set(sig):
            if abs(ref.get(lam, 0.0) - sig.get(lam, 0.0)) > tol:
                return False
    return True

"""Bit transmission through a setting-dependent source.

Alice encodes each bit in her choice between two measurement directions;
Bob, whose setting is fixed, decodes from the mean of his own outcomes over
``N`` pairs.  With mean separation ``delta`` between the two encodings and a
midpoint threshold, Hoeffding gives a per-bit error of at most
``exp(-N delta**2 / 8)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .estimators import stream
from .geometry import Direction
from .models import Source, exact_joint, sample_pairs

CHANNEL_TOL = 1e-12


class NoChannelError(ValueError):
    """Bob's marginal does not depend on Alice's setting: nothing to decode."""


def expected_bob_marginal(source: Source, alice_dir: Direction, bob_dir: Direction) -> float:
    d = exact_joint(source, alice_dir, bob_dir)
    return d.p_pp + d.p_mp - d.p_pm - d.p_mm


@dataclass(frozen=True)
class ProtocolConfig:
    source: Source
    alice_settings: tuple[Direction, Direction] = (Direction(0.0), Direction(math.pi / 2))
    bob_setting: Direction = Direction(0.0)
    pairs_per_bit: int = 200
    decode_threshold: float | None = None
    confidence: float = 0.99

    def __post_init__(self) -> None:
        if isinstance(self.pairs_per_bit, bool) or int(self.pairs_per_bit) != self.pairs_per_bit or self.pairs_per_bit < 1:
            raise ValueError(f"pairs_per_bit must be a positive integer, got {self.pairs_per_bit!r}")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")

    def expected_marginals(self) -> tuple[float, float]:
        return tuple(expected_bob_marginal(self.source, a, self.bob_setting) for a in self.alice_settings)

    def separation(self) -> float:
        m0, m1 = self.expected_marginals()
        return abs(m1 - m0)

    def threshold(self) -> float:
        """Decision threshold, checked to lie strictly between the two expected means."""
        m0, m1 = self.expected_marginals()
        if abs(m1 - m0) <= CHANNEL_TOL:
            raise NoChannelError(
                f"Bob's expected marginal is {m0:.6g} for both of Alice's settings; "
                "this source carries no channel"
            )
        t = (m0 + m1) / 2 if self.decode_threshold is None else self.decode_threshold
        if not min(m0, m1) < t < max(m0, m1):
            raise ValueError(f"threshold {t} is not strictly between {m0} and {m1}")
        return t

    def swapped(self) -> "ProtocolConfig":
        return ProtocolConfig(
            self.source,
            (self.alice_settings[1], self.alice_settings[0]),
            self.bob_setting,
            self.pairs_per_bit,
            self.decode_threshold,
            self.confidence,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "source": self.source.to_json(),
            "alice_settings_rad": [d.angle for d in self.alice_settings],
            "bob_setting_rad": self.bob_setting.angle,
            "pairs_per_bit": self.pairs_per_bit,
            "decode_threshold": self.decode_threshold,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class SignalReport:
    sent_bits: str
    decoded_bits: str
    ber: float
    hoeffding_ber_bound: float
    separation: float
    threshold: float
    bob_means: tuple[float, ...]
    seed: int

    @property
    def errors(self) -> int:
        return sum(s != d for s, d in zip(self.sent_bits, self.decoded_bits))

    def to_json(self) -> dict[str, Any]:
        return {
            "sent_bits": self.sent_bits,
            "decoded_bits": self.decoded_bits,
            "errors": self.errors,
            "ber": self.ber,
            "hoeffding_ber_bound": self.hoeffding_ber_bound,
            "separation": self.separation,
            "threshold": self.threshold,
            "bob_means": list(self.bob_means),
            "seed": self.seed,
        }


def _as_bits(bits: str | Sequence[int]) -> str:
    s = bits if isinstance(bits, str) else "".join(str(int(b)) for b in bits)
    if set(s) - {"0", "1"}:
        raise ValueError("bits must be a string or sequence of 0/1")
    return s


def random_bits(n: int, rng: np.random.Generator) -> str:
    return "".join(map(str, rng.integers(0, 2, size=n)))


def run_protocol(config: ProtocolConfig, bits: str | Sequence[int], seed: int) -> SignalReport:
    """Send ``bits``; bit ``k`` uses substream ``("bit", k)`` regardless of its value."""
    sent = _as_bits(bits)
    threshold = config.threshold()
    m0, m1 = config.expected_marginals()
    delta = abs(m1 - m0)
    one_is_high = m1 > m0
    means = []
    decoded = []
    for k, bit in enumerate(sent):
        alice = config.alice_settings[int(bit)]
        _, _, b, _ = sample_pairs(config.source, alice, config.bob_setting, config.pairs_per_bit, stream(seed, "bit", k))
        mean = float(b.mean())
        means.append(mean)
        decoded.append("1" if (mean > threshold) == one_is_high else "0")
    decoded_s = "".join(decoded)
    errors = sum(s != d for s, d in zip(sent, decoded_s))
    return SignalReport(
        sent_bits=sent,
        decoded_bits=decoded_s,
        ber=errors / len(sent) if sent else 0.0,
        hoeffding_ber_bound=math.exp(-config.pairs_per_bit * delta**2 / 8),
        separation=delta,
        threshold=threshold,
        bob_means=tuple(means),
        seed=seed,
    )


@dataclass(frozen=True)
class SweepRow:
    N: int
    trial: int
    ber_empirical: float
    ber_bound: float


def channel_sweep(
    template: ProtocolConfig,
    n_values: Sequence[int],
    trials: int,
    seed: int,
    bits_per_trial: int = 64,
) -> list[SweepRow]:
    """BER against pairs-per-bit; trial ``t`` at ``N`` depends only on ``(seed, N, t)``."""
    template.threshold()  # reject channel-less templates up front
    rows = []
    for n in n_values:
        cfg = ProtocolConfig(
            template.source,
            template.alice_settings,
            template.bob_setting,
            int(n),
            template.decode_threshold,
            template.confidence,
        )
        for t in range(trials):
            bits = random_bits(bits_per_trial, stream(seed, "sweep", n, t, "bits"))
            trial_seed = int(stream(seed, "sweep", n, t, "seed").integers(0, 2**63))
            rep = run_protocol(cfg, bits, trial_seed)
            rows.append(SweepRow(int(n), t, rep.ber, rep.hoeffding_ber_bound))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "trial", "ber_empirical", "ber_bound"])
    for r in rows:
        w.writerow([r.N, r.trial, repr(r.ber_empirical), repr(r.ber_bound)])
    return buf.getvalue()

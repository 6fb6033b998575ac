"""Coplanar measurement directions and the chains connecting a direction to its opposite.

A direction is a planar angle. Chains alternate between Alice's and Bob's
side, stepping by ``pi / (2n)`` so that ``2n`` links carry ``A_0`` to
``A_n = -A_0``.  Physically only ``A_0 .. A_{n-1}`` and ``B_0 .. B_{n-1}``
are ever measured: the closing link ``(B_{n-1}, A_n)`` is realised as a
measurement of ``(A_0, B_{n-1})`` whose correlation is negated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class Direction:
    """A spin axis in the measurement plane, ``angle`` reduced to [0, 2*pi)."""

    angle: float

    def __post_init__(self) -> None:
        a = float(self.angle)
        if not math.isfinite(a):
            raise ValueError(f"direction angle must be finite, got {self.angle!r}")
        a = math.fmod(a, TWO_PI)
        if a < 0.0:
            a += TWO_PI
        if a >= TWO_PI:  # fmod of values just below a multiple of 2*pi
            a = 0.0
        object.__setattr__(self, "angle", a)

    def opposite(self) -> "Direction":
        return Direction(self.angle + math.pi)

    def rotated(self, phi: float) -> "Direction":
        return Direction(self.angle + phi)


def angle_between(a: Direction, b: Direction) -> float:
    """Unsigned angle in [0, pi] between the orientations of two axes."""
    d = abs(a.angle - b.angle)
    return min(d, TWO_PI - d)


def same_direction(a: Direction, b: Direction, tol: float = ANGLE_TOL) -> bool:
    return angle_between(a, b) <= tol


@dataclass(frozen=True)
class ChainNode:
    side: str  # "A" or "B"
    index: int
    direction: Direction

    @property
    def name(self) -> str:
        return f"{self.side}{self.index}"


@dataclass(frozen=True)
class ChainLink:
    """One measured pair of the chain.

    ``alice``/``bob`` are the logical chain directions; ``alice_measured`` is
    what Alice actually sets, and ``sign`` is -1 when the logical direction is
    the opposite of the measured one (the closing link).
    """

    index: int
    first: ChainNode
    second: ChainNode
    alice: Direction
    bob: Direction
    alice_measured: Direction
    sign: int = 1

    @property
    def side_pair(self) -> str:
        return f"{self.first.name}-{self.second.name}"

    @property
    def angle(self) -> float:
        return angle_between(self.alice, self.bob)


@dataclass(frozen=True)
class ChainSpec:
    n: int
    start: Direction
    directions: tuple[ChainNode, ...]
    links: tuple[ChainLink, ...]

    @property
    def step(self) -> float:
        return math.pi / (2 * self.n)

    def node(self, name: str) -> ChainNode:
        for node in self.directions:
            if node.name == name:
                return node
        raise KeyError(name)

    def validate(self, tol: float = ANGLE_TOL) -> None:
        """Raise ``ValueError`` unless every chain invariant holds."""
        n = self.n
        if len(self.directions) != 2 * n + 1 or len(self.links) != 2 * n:
            raise ValueError("chain must have 2n+1 directions and 2n links")
        for k, (u, v) in enumerate(zip(self.directions, self.directions[1:])):
            if u.side == v.side:
                raise ValueError(f"directions {k} and {k + 1} are on the same side")
            if abs(angle_between(u.direction, v.direction) - self.step) > tol:
                raise ValueError(f"link {k} does not subtend pi/(2n)")
        if not same_direction(self.directions[-1].direction, self.directions[0].direction.opposite(), tol):
            raise ValueError("last direction must be opposite to the first")
        for link in self.links:
            if abs(link.angle - self.step) > tol:
                raise ValueError(f"link {link.index} does not subtend pi/(2n)")

    def rotated(self, phi: float) -> "ChainSpec":
        return build_chain(self.n, self.start.rotated(phi))

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "directions": [
                {"side": d.side, "index": d.index, "angle_rad": d.direction.angle} for d in self.directions
            ],
        }


def build_chain(n: int, start: Direction | float = 0.0) -> ChainSpec:
    """Chain ``A_0, B_0, A_1, ..., B_{n-1}, A_n`` stepping by ``pi/(2n)`` from ``start``."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"chain half-count n must be a positive integer, got {n!r}")
    n = int(n)
    if not isinstance(start, Direction):
        start = Direction(start)
    step = math.pi / (2 * n)

    nodes = []
    for k in range(2 * n + 1):
        side = "A" if k % 2 == 0 else "B"
        if k == 2 * n:
            d = start.opposite()  # exact, avoids accumulating 2n float steps
        else:
            d = Direction(start.angle + k * step)
        nodes.append(ChainNode(side, k // 2, d))

    links = []
    for k in range(2 * n):
        u, v = nodes[k], nodes[k + 1]
        a_node, b_node = (u, v) if u.side == "A" else (v, u)
        closing = a_node.index == n
        links.append(
            ChainLink(
                index=k,
                first=u,
                second=v,
                alice=a_node.direction,
                bob=b_node.direction,
                alice_measured=start if closing else a_node.direction,
                sign=-1 if closing else 1,
            )
        )
    chain = ChainSpec(n=n, start=start, directions=tuple(nodes), links=tuple(links))
    chain.validate()
    return chain


@dataclass(frozen=True)
class Theorem2PrimeLayout:
    """The 12-direction chain (n=6) plus the four CHSH pairs drawn from it.

    The CHSH pairs are ``(A0,B1), (A0,B4), (A3,B1), (A3,B4)``: the directions
    ``A0, B1, A3, B4`` sit at successive angles of pi/4.
    """

    chain: ChainSpec
    chsh_pairs: tuple[tuple[str, str], ...] = field(
        default=(("A0", "B1"), ("A0", "B4"), ("A3", "B1"), ("A3", "B4"))
    )

    @property
    def start(self) -> Direction:
        return self.chain.start

    def direction(self, name: str) -> Direction:
        return self.chain.node(name).direction

    def chsh_settings(self) -> tuple[Direction, Direction, Direction, Direction]:
        """``(I, I', J, J')`` = ``(A0, A3, B1, B4)``."""
        return (self.direction("A0"), self.direction("A3"), self.direction("B1"), self.direction("B4"))

    def chsh_pair_directions(self) -> list[tuple[Direction, Direction]]:
        return [(self.direction(a), self.direction(b)) for a, b in self.chsh_pairs]

    def measured_pairs(self) -> list[tuple[Direction, Direction]]:
        """All 16 physically measured (Alice, Bob) pairs: 12 chain links then 4 CHSH pairs."""
        pairs = [(link.alice_measured, link.bob) for link in self.chain.links]
        return pairs + self.chsh_pair_directions()

    def rotated(self, phi: float) -> "Theorem2PrimeLayout":
        return Theorem2PrimeLayout(self.chain.rotated(phi), self.chsh_pairs)

    def to_json(self) -> dict[str, Any]:
        doc = self.chain.to_json()
        doc["chsh_pairs"] = [list(p) for p in self.chsh_pairs]
        return doc


def build_theorem2prime_layout(start: Direction | float = 0.0) -> Theorem2PrimeLayout:
    return Theorem2PrimeLayout(build_chain(6, start))

"""Hidden-variable models, Bell-type bounds and signalling checks for spin-1/2 pairs."""

__version__ = "0.1.0"

from .geometry import Direction, angle_between, build_chain, build_theorem2prime_layout  # noqa: E402
from .models import (  # noqa: E402
    JointDistribution,
    MixedSource,
    QuantumCorrelated,
    SchulmanSingle,
    ToyMI,
    WhartonPair,
    exact_joint,
    mix_sources,
    schulman_ratio,
    source_from_json,
)
from .estimators import MonteCarlo, chain_stats, chsh, hoeffding_half_width  # noqa: E402
from .theorems import (  # noqa: E402
    equiprobability_check,
    lemma1_split,
    lemma2_bound,
    thm0prime_bound,
    thm1prime_detect,
    thm2_certify,
)
from .signalling import ProtocolConfig, run_protocol  # noqa: E402

__all__ = [
    "Direction", "angle_between", "build_chain", "build_theorem2prime_layout",
    "JointDistribution", "MixedSource", "QuantumCorrelated", "SchulmanSingle", "ToyMI", "WhartonPair",
    "exact_joint", "mix_sources", "schulman_ratio", "source_from_json",
    "MonteCarlo", "chain_stats", "chsh", "hoeffding_half_width",
    "equiprobability_check", "lemma1_split", "lemma2_bound", "thm0prime_bound", "thm1prime_detect", "thm2_certify",
    "ProtocolConfig", "run_protocol",
]

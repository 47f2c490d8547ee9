"""Parameter bundles for the search algorithms (TETRAD-style defaults)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

SEPSET = "sepset"
CONSERVATIVE = "conservative"
MAXP = "maxp"


@dataclass(frozen=True)
class PcParams:
    alpha: float = 0.01
    depth: int = -1  # -1 = unlimited conditioning-set size
    stable: bool = False
    collider_rule: str = SEPSET
    maxp_heuristic: bool = True
    maxp_depth: int = 3
    test_kind: str = "g2"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.depth < -1:
            raise ValueError("depth must be >= -1")
        if self.collider_rule not in (SEPSET, CONSERVATIVE, MAXP):
            raise ValueError(f"unknown collider rule {self.collider_rule!r}")


@dataclass(frozen=True)
class FciParams:
    alpha: float = 0.01
    depth: int = -1
    max_discriminating_path: int = -1  # -1 = unlimited
    complete_rule_set: bool = False
    conservative: bool = False
    test_kind: str = "g2"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.depth < -1 or self.max_discriminating_path < -1:
            raise ValueError("depth parameters must be >= -1")


@dataclass(frozen=True)
class FgesParams:
    sample_prior: float = 1.0
    structure_prior: float = 1.0
    penalty_discount: float = 1.0
    faithfulness_speedup: bool = False
    max_degree_or_edges: int = 100
    score_kind: str = "bdeu"

    def __post_init__(self):
        if min(self.sample_prior, self.structure_prior, self.penalty_discount) <= 0:
            raise ValueError("score priors must be positive")
        if self.score_kind not in ("bdeu", "bic"):
            raise ValueError(f"unknown score kind {self.score_kind!r}")


# The paper's named variants map onto PcParams like so.
PC_PRESETS: dict[str, PcParams] = {
    "pc": PcParams(),
    "cpc": PcParams(collider_rule=CONSERVATIVE),
    "pc-stable": PcParams(stable=True),
    "cpc-stable": PcParams(stable=True, collider_rule=CONSERVATIVE),
    "pc-max": PcParams(collider_rule=MAXP),
}


def preset(name: str, **overrides) -> PcParams:
    base = PC_PRESETS[name]
    return replace(base, **overrides) if overrides else base

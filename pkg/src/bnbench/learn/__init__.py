"""Structure-learning algorithms: constraint-based (FAS, the PC family,
the FCI family), score-based (FGES, IMaGES-BDeu) and hybrid (GFCI)."""

from .fas import fas
from .fci import fci, gfci, possible_d_sep
from .fges import fges, fges_with_score, images_bdeu
from .params import (
    CONSERVATIVE,
    MAXP,
    PC_PRESETS,
    SEPSET,
    FciParams,
    FgesParams,
    PcParams,
    preset,
)
from .pc import pc

__all__ = [
    "fas",
    "pc",
    "fges",
    "fges_with_score",
    "images_bdeu",
    "fci",
    "gfci",
    "possible_d_sep",
    "PcParams",
    "FciParams",
    "FgesParams",
    "PC_PRESETS",
    "preset",
    "SEPSET",
    "CONSERVATIVE",
    "MAXP",
]

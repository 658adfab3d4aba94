"""How the N copies of the state are shared between the protocol's measurements."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class SplitPolicy:
    """Fraction per stage-1 FSM (two of them) and for the adapted stage-2 FSM."""

    name: str
    stage1: Fraction
    stage2: Fraction

    def __post_init__(self):
        if 2 * self.stage1 + self.stage2 != 1:
            raise ValueError(f"split {self.name}: 2*f1 + f2 must equal 1")

    @property
    def fractions(self) -> tuple[float, float]:
        return float(self.stage1), float(self.stage2)

    def allocate(self, n_shots: int) -> tuple[int, int]:
        """Shots per stage-1 FSM and for stage 2; the flooring remainder goes to stage 2."""
        per_fsm = int(self.stage1 * n_shots)
        return per_fsm, n_shots - 2 * per_fsm

    def stage1_gmb_factor(self) -> Fraction:
        """Prefactor of (d-1)/N in the stage-1 Gill-Massar bound (2 for the 2/4 split)."""
        return 1 / (2 * self.stage1)


SPLITS = {
    "2/3": SplitPolicy("TwoThirds", Fraction(1, 3), Fraction(1, 3)),
    "2/4": SplitPolicy("TwoFourths", Fraction(1, 4), Fraction(1, 2)),
    "2/5": SplitPolicy("TwoFifths", Fraction(1, 5), Fraction(3, 5)),
}
TWO_THIRDS = SPLITS["2/3"]
TWO_FOURTHS = SPLITS["2/4"]
TWO_FIFTHS = SPLITS["2/5"]


def get_split(key) -> SplitPolicy:
    """Look up a split by "2/4" style key or policy name."""
    if isinstance(key, SplitPolicy):
        return key
    if key in SPLITS:
        return SPLITS[key]
    for policy in SPLITS.values():
        if policy.name == key:
            return policy
    raise ValueError(f"unknown split {key!r}; expected one of {sorted(SPLITS)}")

"""Threshold policies: multiscale, constant, log-linear and calibrated."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

MODES = ("multiscale", "constant", "theorem2", "calibrated")


@dataclass(frozen=True)
class ThresholdPolicy:
    """How the critical value for a window pair is chosen.

    ``multiscale``  sqrt(2 log(e T / min(k, l))) + c
    ``constant``    sqrt(2 log T) + c
    ``theorem2``    a * log T
    ``calibrated``  ``table[(k, l)]`` when a table is present, else ``c``
    """

    mode: str
    c: float = 0.0
    a: float | None = None
    table: dict | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown threshold mode {self.mode!r}; choose from {MODES}")
        if self.mode == "theorem2" and self.a is None:
            raise ValueError("theorem2 thresholds need the slope a")
        if self.table is not None:
            object.__setattr__(
                self, "table", {(int(k), int(l)): float(v) for (k, l), v in self.table.items()}
            )

    def base(self, k: int, l: int, T: int) -> float:
        """Threshold with ``c = 0``; the part that does not get calibrated."""
        if self.mode == "multiscale":
            return math.sqrt(2.0 * math.log(math.e * T / min(k, l)))
        if self.mode == "constant":
            return math.sqrt(2.0 * math.log(T))
        return 0.0

    def lam(self, k: int, l: int, T: int) -> float:
        if self.mode == "theorem2":
            return self.a * math.log(T)
        if self.mode == "calibrated" and self.table is not None:
            try:
                return self.table[(k, l)]
            except KeyError:
                raise KeyError(f"window pair ({k}, {l}) missing from calibrated table") from None
        return self.base(k, l, T) + self.c

    def reverse_level(self, T: int) -> float:
        """Single stopping level for reverse segmentation."""
        if self.mode == "multiscale":
            raise ValueError("reverse segmentation needs a single level; multiscale is local-only")
        if self.mode == "calibrated" and self.table is not None:
            raise ValueError("a per-pair table cannot drive reverse segmentation")
        return self.lam(1, 1, T)

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "c": self.c, "a": self.a}
        if self.table is not None:
            out["table"] = [[k, l, v] for (k, l), v in sorted(self.table.items())]
        out.update(self.meta)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdPolicy":
        d = dict(d)
        mode = d.pop("mode")
        c = float(d.pop("c", 0.0) or 0.0)
        a = d.pop("a", None)
        table = d.pop("table", None)
        if table is not None:
            table = {(k, l): v for k, l, v in table}
        return cls(mode, c, None if a is None else float(a), table, d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ThresholdPolicy":
        return cls.from_dict(json.loads(Path(path).read_text()))


def lam(policy: ThresholdPolicy, w, T: int) -> float:
    """Threshold for window pair ``w = (k, l)`` at sequence length ``T``."""
    k, l = w
    return policy.lam(int(k), int(l), int(T))

"""Per-parameter and overall sparsity of a store."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from .reparam import MASK_SUFFIX, ParameterStore


@dataclass
class ParamSparsity:
    name: str
    shape: List[int]
    dtype: str
    pruned: bool
    zeros: int
    numel: int

    @property
    def sparsity(self) -> float:
        return self.zeros / self.numel if self.numel else 0.0


@dataclass
class SparsityReport:
    entries: List[ParamSparsity] = field(default_factory=list)

    @property
    def zeros(self) -> int:
        return sum(e.zeros for e in self.entries)

    @property
    def numel(self) -> int:
        return sum(e.numel for e in self.entries)

    @property
    def global_sparsity(self) -> float:
        return self.zeros / self.numel if self.numel else 0.0

    def __getitem__(self, name: str) -> ParamSparsity:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "parameters": [dict(asdict(e), sparsity=e.sparsity) for e in self.entries],
            "zeros": self.zeros,
            "numel": self.numel,
            "global_sparsity": self.global_sparsity,
        }

    def format(self) -> str:
        width = max([len(e.name) for e in self.entries] + [9])
        lines = [f"{'parameter':<{width}}  {'shape':<18} {'pruned':<6} {'zeros':>10} {'sparsity':>9}"]
        for e in self.entries:
            shape = "x".join(map(str, e.shape))
            lines.append(
                f"{e.name:<{width}}  {shape:<18} {'yes' if e.pruned else 'no':<6} "
                f"{e.zeros:>10} {e.sparsity:>9.4f}"
            )
        lines.append(f"{'total':<{width}}  {'':<18} {'':<6} {self.zeros:>10} {self.global_sparsity:>9.4f}")
        return "\n".join(lines)


def sparsity_report(store: ParameterStore) -> SparsityReport:
    """Sparsity from the mask for pruned parameters, from exact zeros otherwise."""
    report = SparsityReport()
    for name in store.names():
        pruned = name in store.hooks
        t = store.buffers[name + MASK_SUFFIX] if pruned else store.params[name]
        report.entries.append(ParamSparsity(
            name=name,
            shape=[int(d) for d in t.shape],
            dtype=str(t.dtype),
            pruned=pruned,
            zeros=int(np.count_nonzero(t == 0)),
            numel=int(t.size),
        ))
    return report

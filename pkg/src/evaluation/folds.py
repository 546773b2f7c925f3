"""
Cross-validation folds over scans
Seeded shuffle followed by round-robin assignment, so fold sizes differ by at
most one and the split is reproducible from the seed.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from src.utils.exceptions import DataError


@dataclass(frozen=True)
class FoldSplit:
    n_folds: int
    assignments: Dict[str, int]
    seed: int

    def folds(self) -> List[List[str]]:
        grouped: List[List[str]] = [[] for _ in range(self.n_folds)]
        for scan_id in sorted(self.assignments):
            grouped[self.assignments[scan_id]].append(scan_id)
        return grouped

    def test_scans(self, fold: int) -> List[str]:
        if not 0 <= fold < self.n_folds:
            raise DataError(f"Fold {fold} outside [0, {self.n_folds})")
        return self.folds()[fold]

    def train_scans(self, fold: int) -> List[str]:
        test = set(self.test_scans(fold))
        return [scan for scan in sorted(self.assignments) if scan not in test]

    def to_dict(self) -> Dict[str, object]:
        return {"n_folds": self.n_folds, "seed": self.seed, "folds": self.folds()}


def make_folds(scan_ids: Sequence[str], n_folds: int, seed: int) -> FoldSplit:
    scans = sorted(scan_ids)
    if len(set(scans)) != len(scans):
        raise DataError("Scan ids passed to make_folds must be unique")
    if n_folds < 1:
        raise DataError(f"n_folds must be >= 1, got {n_folds}")
    if n_folds > len(scans):
        raise DataError(f"Cannot split {len(scans)} scans into {n_folds} folds")

    order = np.random.default_rng(seed).permutation(len(scans))
    assignments = {scans[int(index)]: position % n_folds for position, index in enumerate(order)}
    return FoldSplit(n_folds=n_folds, assignments=assignments, seed=seed)

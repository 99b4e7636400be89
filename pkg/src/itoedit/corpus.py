"""Deterministic edit corpora over the scene mixture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import EditTruth
from .scene import Condition, SceneMixture, render_scene, sample_scene

EDIT_KINDS = ("position", "class", "any")


@dataclass(frozen=True)
class CorpusItem:
    index: int
    truth: EditTruth
    image_seed: int

    @property
    def cond_o(self) -> Condition:
        return Condition(self.truth.orig_class, self.truth.orig_pos)

    @property
    def cond_edit(self) -> Condition:
        return Condition(self.truth.target_class, self.truth.target_pos)

    def image(self, mix: SceneMixture, sample: bool = True) -> np.ndarray:
        """Input image: a draw from the source component, or its mean when ``sample`` is False."""
        t = self.truth
        if not sample:
            return render_scene(t.orig_class, t.orig_pos, mix.canvas)
        return sample_scene(t.orig_class, t.orig_pos, mix, np.random.default_rng(self.image_seed))


def edit_pairs(mix: SceneMixture, kind: str = "any") -> list[EditTruth]:
    """All non-identity (class, position) -> (class', position') edits of a kind, in a fixed order."""
    if kind not in EDIT_KINDS:
        raise ValueError(f"unknown edit kind {kind!r}; expected one of {EDIT_KINDS}")
    labels = [mix.label(j) for j in range(mix.n_components)]
    pairs = []
    for c, p in labels:
        for c2, p2 in labels:
            if (c, p) == (c2, p2):
                continue
            if kind == "position" and c2 != c:
                continue
            if kind == "class" and p2 != p:
                continue
            pairs.append(EditTruth(c, p, c2, p2))
    return pairs


def build_corpus(mix: SceneMixture, size: int, kind: str = "any", seed: int = 0) -> list[CorpusItem]:
    """Seeded subsample of ``size`` edit pairs, each with its own image seed."""
    pairs = edit_pairs(mix, kind)
    if size < 1:
        raise ValueError("corpus size must be positive")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pairs), size=min(size, len(pairs)), replace=False)
    image_seeds = rng.integers(0, 2**31 - 1, size=len(idx))
    return [CorpusItem(i, pairs[j], int(s)) for i, (j, s) in enumerate(zip(idx, image_seeds))]

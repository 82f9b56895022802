"""Grow a manifest to per-class target counts with augmented clips."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..audio import Manifest, ManifestEntry, Provenance, write_wav
from ..errors import PlanningError
from .transforms import ProceduralConfig, augment_clip, procedural_clip

log = logging.getLogger(__name__)

DEFAULT_TARGETS = (4050, 4050, 5850)


def clip_rng(seed: int, label: int, k: int) -> np.random.Generator:
    """Independent stream per generated clip, so clips can be produced in any order."""
    return np.random.default_rng([seed, label, k])


def plan(manifest: Manifest, targets) -> list:
    """Number of clips to generate per class."""
    counts = manifest.counts()
    if len(targets) != 3:
        raise PlanningError(f"need three class targets, got {len(targets)}")
    needed = []
    for label, (have, want) in enumerate(zip(counts, targets)):
        if want < have:
            raise PlanningError(f"class {label}: target {want} is below the current count {have}")
        if want > have and have == 0:
            raise PlanningError(f"class {label}: no clips to augment from")
        needed.append(want - have)
    return needed


def plan_and_augment(
    manifest: Manifest,
    targets,
    seed: int,
    out_dir,
    audiomentation_ratio: float = 0.5,
    procedural: ProceduralConfig = ProceduralConfig(),
) -> Manifest:
    """Write ``target - current`` augmented WAVs per class into ``out_dir``.

    Sources are visited round-robin over each class's non-augmented clips. Each new
    clip is an audiomentation with probability ``audiomentation_ratio``, otherwise a
    procedural time-varying low-pass variant. Returns the merged manifest rooted at
    ``out_dir``.
    """
    if not 0.0 <= audiomentation_ratio <= 1.0:
        raise ValueError("audiomentation_ratio must lie in [0, 1]")
    needed = plan(manifest, targets)
    out_dir = Path(out_dir)
    if not any(needed):
        return manifest

    out_dir.mkdir(parents=True, exist_ok=True)
    merged = manifest.rebased(out_dir)
    entries = list(merged.entries)
    taken = {e.path for e in entries}
    for label, n_new in enumerate(needed):
        sources = [e for e in merged.entries if e.label == label and e.provenance != Provenance.AUGMENTED]
        if not sources:
            sources = [e for e in merged.entries if e.label == label]
        per_source = {}
        loaded = {}
        for k in range(n_new):
            src = sources[k % len(sources)]
            if src.path not in loaded:
                loaded[src.path] = merged.load(src)
            clip = loaded[src.path]
            sid = src.source_id or Path(src.path).stem
            idx = per_source.get(sid, 0)
            while f"{sid}_aug{idx}.wav" in taken:
                idx += 1
            per_source[sid] = idx + 1

            rng = clip_rng(seed, label, k)
            if rng.random() < audiomentation_ratio:
                new = augment_clip(clip, rng)
            else:
                new = procedural_clip(clip, rng, procedural)
            name = f"{sid}_aug{idx}.wav"
            taken.add(name)
            write_wav(new.signal, out_dir / name)
            entries.append(ManifestEntry(name, label, Provenance.AUGMENTED, sid))
        log.info("class %d: generated %d clips from %d sources", label, n_new, len(sources))
    return Manifest(entries, out_dir)

"""Per-class outlier screening on feature-vector norms."""
import logging

import numpy as np

log = logging.getLogger(__name__)


def outlier_filter(features, labels, threshold: float = 3.0, min_keep: float = 0.5) -> np.ndarray:
    """Boolean keep-mask over clips.

    Within each class a clip is dropped when the z-score of its feature L2 norm
    exceeds ``threshold`` in magnitude. Classes with fewer than three clips or
    zero norm variance are left alone, and no class loses more than
    ``1 - min_keep`` of its clips (the most extreme are dropped first).
    """
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    norms = np.linalg.norm(X.reshape(len(X), -1), axis=1)
    keep = np.ones(len(X), dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 3:
            log.warning("class %s has %d clips; outlier screening skipped", c, idx.size)
            continue
        v = norms[idx]
        std = v.std()
        if std == 0:
            continue
        z = np.abs(v - v.mean()) / std
        flagged = idx[z > threshold]
        limit = idx.size - int(np.ceil(min_keep * idx.size))
        if flagged.size > limit:
            flagged = idx[np.argsort(-z, kind="stable")[:limit]]
        keep[flagged] = False
    return keep

"""Initial spatial-model construction.

Two initializers are provided: a direction-clustering one that builds
time-frequency masks from the observations, and a seeded random one used as
a deterministic fixture and fallback. Neither is part of the equivalence
claims; both engines are always handed the same initial model.
"""

import numpy as np

from .modelops import power_floor
from .types import SpatialModel

# Ridge added to unit-trace mask covariances to keep them safely definite.
MASK_COV_RIDGE = 1e-2

_KMEANS_ITERS = 50


def init_random(y, seed):
    """Seeded random spatial model.

    Covariances are ``A A^H + I`` with complex Gaussian ``A`` (one draw per
    source, shared across bins); powers are the per-point mixture power
    split evenly between the sources.
    """
    data = np.asarray(y if isinstance(y, np.ndarray) else y.data)
    n_frames, n_bins, n_chan = data.shape
    rng = np.random.default_rng(seed)
    S = np.empty((2, n_bins, n_chan, n_chan), dtype=np.complex128)
    for j in range(2):
        A = rng.standard_normal((n_chan, n_chan)) + 1j * rng.standard_normal(
            (n_chan, n_chan)
        )
        S[j] = (A @ A.conj().T + np.eye(n_chan))[None, :, :]
    power = np.sum(np.abs(data) ** 2, axis=-1) / (2 * n_chan)
    floor = power_floor(data)
    v = np.maximum(np.stack([power, power]), floor[None, None, :])
    return SpatialModel(v=v, S=S, v_floor=floor)


def _two_means(z, weights):
    """Deterministic 2-means over complex feature vectors.

    Returns boolean labels (True = cluster 0). Centroid seeds are the
    highest-weight frame and the frame farthest from it.
    """
    n = z.shape[0]
    c0 = z[int(np.argmax(weights))]
    d0 = np.sum(np.abs(z - c0) ** 2, axis=1)
    c1 = z[int(np.argmax(d0))]
    labels = np.zeros(n, dtype=bool)
    for _ in range(_KMEANS_ITERS):
        d0 = np.sum(np.abs(z - c0) ** 2, axis=1)
        d1 = np.sum(np.abs(z - c1) ** 2, axis=1)
        new = d0 <= d1
        if not new.any() or new.all():
            # re-seed the empty cluster with the worst-fit frame
            far = int(np.argmax(np.where(new, d0, d1)))
            new = new.copy()
            new[far] = not new[far]
        if (new == labels).all():
            break
        labels = new
        c0 = z[labels].mean(axis=0)
        c1 = z[~labels].mean(axis=0)
    return labels


def init_from_masks(y):
    """Cluster frames by spatial direction per bin and build the model.

    Per bin the unit-normalized, phase-aligned observation vectors are split
    into two groups by 2-means; each group's weighted outer-product average
    becomes a unit-trace covariance (plus ridge), and the group masks set
    the initial powers. Cluster labels are aligned across bins by
    correlating mask time-profiles against a global profile grown from the
    strongest bin. Falls back to :func:`init_random` when there are fewer
    frames than twice the channel count.
    """
    data = np.asarray(y if isinstance(y, np.ndarray) else y.data)
    n_frames, n_bins, n_chan = data.shape
    if n_frames < 2 * n_chan:
        return init_random(y, seed=0)

    frame_power = np.sum(np.abs(data) ** 2, axis=-1)  # (N, F)
    masks = np.empty((n_frames, n_bins), dtype=bool)
    S = np.empty((2, n_bins, n_chan, n_chan), dtype=np.complex128)
    eye = np.eye(n_chan)

    for f in range(n_bins):
        w = data[:, f, :]
        norms = np.sqrt(frame_power[:, f])
        z = w / np.maximum(norms, 1e-300)[:, None]
        ref = int(np.argmax(np.sum(np.abs(w) ** 2, axis=0)))
        ref_val = z[:, ref]
        phase = np.where(np.abs(ref_val) > 0, ref_val / np.maximum(np.abs(ref_val), 1e-300), 1.0)
        z = z * np.conj(phase)[:, None]
        masks[:, f] = _two_means(z, frame_power[:, f])

        for j, sel in enumerate((masks[:, f], ~masks[:, f])):
            if sel.any():
                cov = np.einsum("na,nb->ab", w[sel], w[sel].conj()) / sel.sum()
            else:
                cov = eye.astype(complex)
            tr = np.real(np.trace(cov))
            cov = cov / tr if tr > 0 else eye / n_chan
            S[j, f] = cov + MASK_COV_RIDGE * eye

    # Align labels across bins by correlating centered binary mask time
    # profiles against a running global profile (binary, not power-weighted,
    # so single loud frames cannot hijack the alignment). The profile is
    # seeded from the strongest bin, grown in decreasing power order, then
    # refined with full sweeps until stable.
    diff = masks.astype(float)
    diff = diff - diff.mean(axis=0, keepdims=True)
    order = np.argsort(-frame_power.sum(axis=0))
    flip = np.zeros(n_bins, dtype=bool)
    g = diff[:, order[0]].copy()
    for f in order[1:]:
        if diff[:, f] @ g < 0:
            flip[f] = True
        g = g + (-diff[:, f] if flip[f] else diff[:, f])
    for _ in range(5):
        changed = False
        g = np.where(flip[None, :], -diff, diff).sum(axis=1)
        for f in order:
            d = -diff[:, f] if flip[f] else diff[:, f]
            if d @ (g - d) < 0:
                flip[f] = ~flip[f]
                g = g - 2.0 * d
                changed = True
        if not changed:
            break
    swap = np.flatnonzero(flip)
    masks[:, swap] = ~masks[:, swap]
    S[:, swap] = S[::-1, swap]

    floor = power_floor(data)
    point_power = frame_power / n_chan
    v = np.stack([masks * point_power, (~masks) * point_power])
    v = np.maximum(v, floor[None, None, :])
    return SpatialModel(v=v, S=S, v_floor=floor)

"""Global speaker clustering of per-chunk embeddings.

Two stages, both operating on vectors in the PLDA scoring space:

1. Agglomerative clustering (:func:`ahc`): start from singletons and keep
   merging the pair of clusters with the highest average pairwise PLDA
   log-likelihood ratio, while that best value stays at or above the
   threshold.  This fixes the number of speakers.

2. HMM refinement (:func:`vbx_refine`): treat the chronologically ordered
   embeddings as an HMM over speakers with a sticky self-loop, model each
   speaker's mean as a latent Gaussian under the PLDA priors, and run
   variational inference.  Responsibilities come from forward-backward,
   speaker posteriors from closed-form Gaussian updates; the two acoustic
   scaling factors Fa and Fb temper the likelihood and the prior.  The
   evidence lower bound is tracked every iteration and must not decrease.

:func:`assign` wraps both and maps the flat unit labels back onto the
(chunk, slot) grid, writing the INACTIVE sentinel (-2) wherever a slot has
no speech or no usable embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig
from .embedding import EmbeddingSet
from .plda import PldaModel, pairwise_llr, project

INACTIVE = -2  # assignment sentinel for slots with nothing to cluster


@dataclass(frozen=True)
class VbxState:
    """Final variational state of the HMM refinement."""

    gamma: np.ndarray  # (units, speakers) responsibilities, rows sum to 1
    speaker_means: np.ndarray  # (speakers, lda_dim) posterior means, PLDA space
    speaker_covs: np.ndarray  # (speakers, lda_dim) posterior variance diagonals
    elbo_trace: tuple[float, ...]  # one value per iteration, non-decreasing


@dataclass(frozen=True)
class ClusterAssignment:
    """Global speaker id per (chunk, slot); INACTIVE where nothing to label."""

    labels: np.ndarray  # (chunks, slots) int, values in {INACTIVE} | [0, n_clusters)
    n_clusters: int


def ahc(embeddings: np.ndarray, model: PldaModel, threshold: float) -> np.ndarray:
    """Average-linkage agglomerative clustering on PLDA similarities.

    ``embeddings`` are (n, lda_dim) vectors already in the scoring space.
    Returns (n,) integer labels, contiguous from 0, numbered by each
    cluster's first member.  Merging stops when the best average pair
    similarity drops below ``threshold``.
    """
    y = np.asarray(embeddings, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"embeddings must be (n, dim), got {y.shape}")
    n = y.shape[0]
    if n == 0:
        raise ValueError("cannot cluster zero embeddings")
    if n == 1:
        return np.zeros(1, dtype=np.int64)

    sim = pairwise_llr(y, model)
    np.fill_diagonal(sim, -np.inf)
    sizes = np.ones(n)
    members: list[list[int] | None] = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)

    while active.sum() >= 2:
        masked = np.where(active[:, None] & active[None, :], sim, -np.inf)
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        if masked[i, j] < threshold:
            break
        i, j = (int(min(i, j)), int(max(i, j)))
        # average-linkage update: size-weighted mean of pairwise similarities
        for k in range(n):
            if active[k] and k != i and k != j:
                sim[i, k] = sim[k, i] = (
                    sizes[i] * sim[i, k] + sizes[j] * sim[j, k]
                ) / (sizes[i] + sizes[j])
        sizes[i] += sizes[j]
        members[i].extend(members[j])  # type: ignore[union-attr]
        members[j] = None
        active[j] = False
        sim[j, :] = sim[:, j] = -np.inf

    labels = np.empty(n, dtype=np.int64)
    next_label = 0
    for group in members:
        if group is None:
            continue
        for idx in group:
            labels[idx] = next_label
        next_label += 1
    # renumber by first occurrence so label 0 is the earliest unit's cluster
    order: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in order:
            order[int(lab)] = len(order)
    return np.asarray([order[int(lab)] for lab in labels], dtype=np.int64)


@dataclass(frozen=True)
class VbxResult:
    labels: np.ndarray  # (units,) refined speaker index per unit
    state: VbxState


def _forward_backward(
    log_emission: np.ndarray, loop_p: float
) -> tuple[np.ndarray, float]:
    """Posterior state marginals and log evidence of a sticky-uniform HMM.

    Transitions: stay with probability ``loop_p``, otherwise move uniformly
    to one of the other states.  Initial distribution is uniform.  Scaled
    (normalized) recursions keep everything in float range.
    """
    n, s = log_emission.shape
    if s == 1:
        return np.ones((n, 1)), float(np.sum(log_emission))
    trans = np.full((s, s), (1.0 - loop_p) / (s - 1))
    np.fill_diagonal(trans, loop_p)

    shift = log_emission.max(axis=1, keepdims=True)
    b = np.exp(log_emission - shift)  # emissions, row-rescaled

    alpha = np.zeros((n, s))
    scale = np.zeros(n)
    a = b[0] / s
    scale[0] = a.sum()
    alpha[0] = a / scale[0]
    for t in range(1, n):
        a = b[t] * (alpha[t - 1] @ trans)
        scale[t] = a.sum()
        alpha[t] = a / scale[t]

    beta = np.zeros((n, s))
    beta[-1] = 1.0
    for t in range(n - 2, -1, -1):
        beta[t] = (trans @ (b[t + 1] * beta[t + 1])) / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    log_evidence = float(np.sum(np.log(scale)) + np.sum(shift))
    return gamma, log_evidence


def vbx_refine(
    embeddings: np.ndarray,
    init_labels: np.ndarray,
    model: PldaModel,
    cfg: PipelineConfig,
) -> VbxResult:
    """Refine an initial clustering with a variational Bayes HMM.

    ``embeddings`` must be ordered chronologically; ``init_labels`` give the
    starting speaker of each unit (e.g. from :func:`ahc`).  Each iteration
    updates the Gaussian speaker posteriors from the current
    responsibilities, rescores every unit against every speaker, reruns
    forward-backward, and appends the evidence lower bound to the trace.
    Speakers whose total responsibility falls below 1e-3 are dropped.
    Stops early when the ELBO improves by less than 1e-6 (relative).

    Raises
    ------
    FloatingPointError
        If the ELBO turns non-finite, reporting the iteration index.
    """
    y = np.asarray(embeddings, dtype=np.float64)
    init = np.asarray(init_labels, dtype=np.int64)
    if y.ndim != 2 or y.shape[1] != model.lda_dim:
        raise ValueError(f"embeddings must be (n, {model.lda_dim}), got {y.shape}")
    if init.shape != (y.shape[0],):
        raise ValueError("init_labels must have one entry per embedding")
    n = y.shape[0]
    n_speakers = int(init.max()) + 1 if n else 0
    if n == 0:
        raise ValueError("cannot refine zero embeddings")

    fa, fb = cfg.vbx_fa, cfg.vbx_fb
    # whiten so the within-speaker covariance is identity; the between-
    # speaker covariance becomes phi = phi_across / phi_within
    x = y / np.sqrt(model.phi_within)
    phi = model.phi_across / model.phi_within
    d = x.shape[1]
    g_const = -0.5 * (np.sum(x**2, axis=1) + d * np.log(2.0 * np.pi))  # (n,)
    rho = x * np.sqrt(phi)  # (n, d)

    gamma = np.zeros((n, n_speakers))
    gamma[np.arange(n), init] = 1.0

    elbo_trace: list[float] = []
    alpha_means = np.zeros((n_speakers, d))
    inv_l = np.ones((n_speakers, d))

    for it in range(cfg.vbx_max_iters):
        # speaker posterior update (latent mean y_s per speaker)
        occupancy = gamma.sum(axis=0)  # (speakers,)
        first_moment = gamma.T @ x  # (speakers, d)
        inv_l = 1.0 / (1.0 + (fa / fb) * occupancy[:, None] * phi[None, :])
        alpha_means = (fa / fb) * inv_l * (np.sqrt(phi)[None, :] * first_moment)

        # expected per-speaker log-densities, tempered by Fa
        penalty = 0.5 * np.sum(phi[None, :] * (inv_l + alpha_means**2), axis=1)
        log_emission = fa * (g_const[:, None] + rho @ alpha_means.T - penalty[None, :])

        gamma, log_evidence = _forward_backward(log_emission, cfg.vbx_loop_p)

        # minus Fb-weighted KL(q(y_s) || N(0, I)) per speaker
        kl_terms = 0.5 * np.sum(np.log(inv_l) - inv_l - alpha_means**2 + 1.0, axis=1)
        elbo = log_evidence + fb * float(np.sum(kl_terms))
        if not np.isfinite(elbo):
            raise FloatingPointError(f"ELBO became non-finite at iteration {it}")
        elbo_trace.append(elbo)

        # retire speakers that explain (essentially) no units
        occupancy = gamma.sum(axis=0)
        keep = occupancy >= 1e-3
        dropped = not keep.all()
        if dropped:
            gamma = gamma[:, keep]
            gamma = gamma / gamma.sum(axis=1, keepdims=True)
            alpha_means = alpha_means[keep]
            inv_l = inv_l[keep]
        if (
            not dropped
            and len(elbo_trace) >= 2
            and elbo_trace[-1] - elbo_trace[-2] < 1e-6 * abs(elbo_trace[-2])
        ):
            break

    labels = np.argmax(gamma, axis=1).astype(np.int64)
    state = VbxState(
        gamma=gamma,
        speaker_means=np.sqrt(model.phi_within * phi) * alpha_means,
        speaker_covs=(model.phi_within * phi) * inv_l,
        elbo_trace=tuple(elbo_trace),
    )
    return VbxResult(labels=labels, state=state)


@dataclass(frozen=True)
class ClusteringBackend:
    """Bundle of everything needed to turn embeddings into global ids."""

    model: PldaModel
    cfg: PipelineConfig
    refine: bool = True  # set False to stop after AHC


def assign(
    embeddings: EmbeddingSet,
    multilabel: np.ndarray,
    backend: ClusteringBackend,
    already_projected: bool = False,
) -> tuple[ClusterAssignment, VbxState | None]:
    """Cluster every usable (chunk, slot) and label the grid.

    A slot is usable when it has at least one active frame in ``multilabel``
    and a valid embedding.  Unusable slots receive INACTIVE.  Units are
    ordered by (chunk, slot), i.e. chronologically, before clustering, and
    final global ids are renumbered by first appearance in that order.
    """
    act = np.asarray(multilabel)
    n_chunks, _, n_slots = act.shape
    if embeddings.valid.shape != (n_chunks, n_slots):
        raise ValueError("embedding grid does not match activity grid")

    units: list[tuple[int, int]] = []
    for c in range(n_chunks):
        for s in range(n_slots):
            if act[c, :, s].sum() >= 1 and embeddings.valid[c, s]:
                units.append((c, s))

    labels_grid = np.full((n_chunks, n_slots), INACTIVE, dtype=np.int64)
    if not units:
        return ClusterAssignment(labels=labels_grid, n_clusters=0), None

    raw = np.stack([embeddings.vectors[c, s] for c, s in units])
    vecs = raw if already_projected else project(raw, backend.model)

    init = ahc(vecs, backend.model, backend.cfg.ahc_threshold)
    state: VbxState | None = None
    if backend.refine:
        result = vbx_refine(vecs, init, backend.model, backend.cfg)
        flat = result.labels
        state = result.state
    else:
        flat = init

    order: dict[int, int] = {}
    for lab in flat:
        if int(lab) not in order:
            order[int(lab)] = len(order)
    for (c, s), lab in zip(units, flat):
        labels_grid[c, s] = order[int(lab)]
    return ClusterAssignment(labels=labels_grid, n_clusters=len(order)), state

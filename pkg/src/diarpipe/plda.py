"""Two-covariance PLDA: scoring backend for speaker clustering.

The model lives in a simultaneously diagonalized basis, so both covariances
are diagonal vectors and all scoring is a closed form per dimension:

- ``phi_across``: between-speaker variances (how far apart speaker means sit)
- ``phi_within``: within-speaker variances (how much one speaker wobbles)

A projected vector y decomposes as y = m + n with m ~ N(0, diag(phi_across))
drawn once per speaker and n ~ N(0, diag(phi_within)) per observation.  The
log-likelihood ratio of "same speaker" vs "different speakers" for a pair is
the sum over dimensions of a 2x2 Gaussian comparison.

Raw embeddings enter this space through :func:`project`: subtract the model
mean, multiply by the LDA matrix, length-normalize, then divide by
sqrt(phi_within).  Generated models (:func:`make_synthetic_model`) calibrate
phi_across and phi_within so vectors produced by the synthetic embedder land
exactly in the space the scoring formulas assume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PldaModel:
    mean: np.ndarray  # (lda_dim,) offset in the projected space
    lda: np.ndarray  # (embedding_dim, lda_dim) projection, full column rank
    phi_across: np.ndarray  # (lda_dim,) between-speaker variances, >= 0
    phi_within: np.ndarray  # (lda_dim,) within-speaker variances, > 0

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        lda = np.asarray(self.lda, dtype=np.float64)
        across = np.asarray(self.phi_across, dtype=np.float64)
        within = np.asarray(self.phi_within, dtype=np.float64)
        if lda.ndim != 2:
            raise ValueError("lda must be a 2-D matrix (embedding_dim, lda_dim)")
        d = lda.shape[1]
        for name, vec in (("mean", mean), ("phi_across", across), ("phi_within", within)):
            if vec.shape != (d,):
                raise ValueError(f"{name} must have shape ({d},), got {vec.shape}")
        for name, arr in (("mean", mean), ("lda", lda), ("phi_across", across), ("phi_within", within)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        if (across < 0).any():
            raise ValueError("phi_across must be non-negative")
        if (within <= 0).any():
            raise ValueError("phi_within must be strictly positive")
        if np.linalg.matrix_rank(lda) < d:
            raise ValueError("lda must have full column rank")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "lda", lda)
        object.__setattr__(self, "phi_across", across)
        object.__setattr__(self, "phi_within", within)

    @property
    def embedding_dim(self) -> int:
        return self.lda.shape[0]

    @property
    def lda_dim(self) -> int:
        return self.lda.shape[1]


def project(x: np.ndarray, model: PldaModel) -> np.ndarray:
    """Map raw embeddings into the model's scoring space.

    Steps, in order: multiply by the LDA matrix and subtract the model mean
    (the mean is stored in the projected space), length-normalize to the
    unit sphere, divide by sqrt(phi_within).  Accepts a single vector
    (embedding_dim,) or a matrix (n, embedding_dim).

    A vector that lands exactly on the mean has no direction; it is returned
    as all zeros rather than dividing by zero.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    mat = x[None, :] if single else x
    if mat.shape[1] != model.embedding_dim:
        raise ValueError(
            f"expected embeddings of dim {model.embedding_dim}, got {mat.shape[1]}"
        )
    y = mat @ model.lda - model.mean
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    y = y / safe / np.sqrt(model.phi_within)
    return y[0] if single else y


def _llr_coefficients(model: PldaModel) -> tuple[float, np.ndarray, np.ndarray]:
    """Per-dimension constants of the pair LLR quadratic form.

    llr(a, b) = c0 - p . (a^2 + b^2) + q . (a * b)
    """
    total = model.phi_across + model.phi_within
    rho = model.phi_across / total
    one_minus_rho2 = 1.0 - rho**2
    c0 = float(-0.5 * np.sum(np.log(one_minus_rho2)))
    p = rho**2 / (2.0 * total * one_minus_rho2)
    q = rho / (total * one_minus_rho2)
    return c0, p, q


def llr_score(a: np.ndarray, b: np.ndarray, model: PldaModel) -> float:
    """Same-vs-different speaker log-likelihood ratio for one pair.

    Both vectors must already be in the model's scoring space.  Symmetric in
    its arguments; identically zero when phi_across is zero (the two
    hypotheses then coincide).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (model.lda_dim,) or b.shape != (model.lda_dim,):
        raise ValueError(f"expected vectors of dim {model.lda_dim}")
    c0, p, q = _llr_coefficients(model)
    return float(c0 - np.sum(p * (a**2 + b**2)) + np.sum(q * a * b))


def pairwise_llr(y: np.ndarray, model: PldaModel) -> np.ndarray:
    """Symmetric (n, n) matrix of pair LLRs for rows of ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != model.lda_dim:
        raise ValueError(f"expected (n, {model.lda_dim}) vectors, got {y.shape}")
    c0, p, q = _llr_coefficients(model)
    quad = (y**2) @ p  # (n,)
    cross = (y * q) @ y.T  # (n, n)
    return c0 - quad[:, None] - quad[None, :] + cross


# --- synthetic models and sampling ------------------------------------------


def make_synthetic_model(
    embedding_dim: int = 256,
    lda_dim: int = 128,
    separation: float = 100.0,
    seed: int = 0,
) -> PldaModel:
    """Build a self-consistent random model for synthetic pipelines.

    The LDA matrix has orthonormal columns (so lifting a projected vector to
    embedding space and projecting back is lossless).  The variances satisfy
    1 / phi_within = lda_dim * (phi_across + phi_within), which makes the
    length-normalized, whitened projection of a synthetic embedding carry
    per-dimension variance phi_across + phi_within, split between speaker
    and noise in the stored proportions; scoring therefore sees data on the
    scale its covariances describe.  ``separation`` is the ratio
    phi_across / phi_within.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    if lda_dim > embedding_dim:
        raise ValueError("lda_dim cannot exceed embedding_dim")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((embedding_dim, lda_dim))
    q, _ = np.linalg.qr(raw)
    within = np.full(lda_dim, 1.0 / np.sqrt(lda_dim * (separation + 1.0)))
    across = separation * within
    return PldaModel(mean=np.zeros(lda_dim), lda=q, phi_across=across, phi_within=within)


@dataclass(frozen=True)
class PldaGenerator:
    """Seeded sampler of speakers and observations under a PldaModel.

    Speaker means are deterministic functions of (seed, speaker index), so
    any consumer asking for speaker ``k`` gets the same mean regardless of
    call order.
    """

    model: PldaModel
    seed: int = 0

    def speaker_mean(self, speaker_index: int) -> np.ndarray:
        """Mean of speaker ``speaker_index`` in the projected space."""
        rng = np.random.default_rng((self.seed, 0, speaker_index))
        return rng.standard_normal(self.model.lda_dim) * np.sqrt(self.model.phi_across)

    def observation(self, speaker_index: int, stream: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        """One observation of a speaker; ``stream`` names the noise draw.

        ``scale`` multiplies the within-speaker standard deviation (used to
        shrink noise when an embedding pools many frames).
        """
        rng = np.random.default_rng((self.seed, 1) + tuple(stream))
        noise = rng.standard_normal(self.model.lda_dim) * np.sqrt(self.model.phi_within)
        return self.speaker_mean(speaker_index) + scale * noise


def sample_speakers_and_embeddings(
    gen: PldaGenerator, n_speakers: int, per_speaker: list[int] | int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw labeled vectors in the scoring space for clustering tests.

    Returns (vectors, labels) with vectors (sum(per_speaker), lda_dim) and
    integer labels aligned to rows.  Rows are interleaved round-robin across
    speakers so consecutive rows usually change speaker, which is the hard
    case for sequential models.
    """
    if isinstance(per_speaker, int):
        per_speaker = [per_speaker] * n_speakers
    if len(per_speaker) != n_speakers:
        raise ValueError("per_speaker must have one count per speaker")
    order: list[tuple[int, int]] = []
    for draw in range(max(per_speaker, default=0)):
        for spk in range(n_speakers):
            if draw < per_speaker[spk]:
                order.append((spk, draw))
    vectors = np.stack([gen.observation(spk, (spk, draw)) for spk, draw in order])
    labels = np.asarray([spk for spk, _ in order], dtype=np.int64)
    return vectors, labels


# --- model files -------------------------------------------------------------
#
# Self-describing text format:
#
#     plda v1
#     embedding_dim 256
#     lda_dim 128
#     mean <lda_dim floats>
#     phi_across <lda_dim floats>
#     phi_within <lda_dim floats>
#     lda <lda_dim floats>          one line per embedding dimension
#     ...


def write_model(path: str, model: PldaModel) -> None:
    def fmt(vec: np.ndarray) -> str:
        return " ".join(f"{v:.17g}" for v in vec)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("plda v1\n")
        fh.write(f"embedding_dim {model.embedding_dim}\n")
        fh.write(f"lda_dim {model.lda_dim}\n")
        fh.write(f"mean {fmt(model.mean)}\n")
        fh.write(f"phi_across {fmt(model.phi_across)}\n")
        fh.write(f"phi_within {fmt(model.phi_within)}\n")
        for row in model.lda:
            fh.write(f"lda {fmt(row)}\n")


def read_model(path: str) -> PldaModel:
    """Read a model file written by :func:`write_model`.

    Raises ValueError on version mismatch, wrong dimensions or non-finite
    values (via PldaModel validation).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != "plda v1":
        raise ValueError(f"{path}: not a 'plda v1' model file")

    fields: dict[str, list[str]] = {}
    lda_rows: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "lda":
            lda_rows.append(np.asarray([float(v) for v in rest.split()], dtype=np.float64))
        elif key in ("embedding_dim", "lda_dim", "mean", "phi_across", "phi_within"):
            fields[key] = rest.split()
        else:
            raise ValueError(f"{path}:{lineno}: unknown field {key!r}")
    try:
        emb_dim = int(fields["embedding_dim"][0])
        lda_dim = int(fields["lda_dim"][0])
        mean = np.asarray([float(v) for v in fields["mean"]])
        across = np.asarray([float(v) for v in fields["phi_across"]])
        within = np.asarray([float(v) for v in fields["phi_within"]])
    except (KeyError, IndexError, ValueError) as exc:
        raise ValueError(f"{path}: missing or malformed header field ({exc})")
    if len(lda_rows) != emb_dim or any(row.shape != (lda_dim,) for row in lda_rows):
        raise ValueError(
            f"{path}: expected {emb_dim} lda rows of {lda_dim} values, got {len(lda_rows)}"
        )
    lda = np.stack(lda_rows)
    return PldaModel(mean=mean, lda=lda, phi_across=across, phi_within=within)

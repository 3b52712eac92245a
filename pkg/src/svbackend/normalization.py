"""Adaptive score normalization and its trainable extension.

AS-Norm standardizes a trial score with the mean/std of the top-K cohort
scores from each trial side:

    S_as = 1/2 * ((S - mean_e) / std_e + (S - mean_t) / std_t)

TAS-Norm recalibrates those cohort statistics through four learned
scalars and a sigmoid before normalizing:

    S_tas = 1/2 * ( (S - sig(w_mean*mean_e + b_mean)) / sig(w_std*std_e + b_std)
                  + (S - sig(w_mean*mean_t + b_mean)) / sig(w_std*std_t + b_std) )

The four scalars are trained by mini-batch gradient descent on the
class-balanced binary cross-entropy of sig(S_tas - t_batch) against
trial labels, where t_batch is the batch's EER threshold, held constant
inside the gradient.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from . import core, metrics
from .errors import DataError, DegenerateInputError
from .store_io import EmbeddingStore, ScoreFile

PROB_CLAMP = 1e-12  # keeps log() finite on separable batches


@dataclass(frozen=True)
class CohortStats:
    """Mean/std of an utterance's (or speaker's) top-K cohort scores."""

    mean: float
    std: float

    def __iter__(self):  # unpack as (mean, std)
        return iter((self.mean, self.std))


def cohort_stats(embedding, cohort: EmbeddingStore, top_k: int) -> CohortStats:
    """Score one embedding against the whole cohort, keep the top_k
    highest cosine scores, return their mean and population std."""
    v = core.as_vector(embedding)
    if top_k < 2:
        raise ValueError(f"top_k must be >= 2, got {top_k}")
    if len(cohort) < top_k:
        raise DegenerateInputError(
            f"cohort of {len(cohort)} entries is smaller than top_k={top_k}"
        )
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateInputError("zero-norm embedding has no cohort scores")
    scores = core.unit_rows(cohort.vectors) @ (v / norm)
    top = np.partition(scores, len(scores) - top_k)[len(scores) - top_k:]
    top.sort()  # fixed summation order: stats invariant to cohort ordering
    mean = float(np.mean(top))
    std = float(np.std(top))  # population
    if std == 0.0:
        raise DegenerateInputError("degenerate cohort: top-k scores have zero spread")
    return CohortStats(mean, std)


def cohort_stats_table(store: EmbeddingStore, cohort: EmbeddingStore, top_k: int):
    """Cohort stats for every entry of a store, as id -> (mean, std)."""
    return {
        utt: tuple(cohort_stats(store.get(utt), cohort, top_k))
        for utt in store.ids
    }


def as_norm(score, enroll, test) -> float:
    """Eq.-style adaptive normalization; enroll/test are (mean, std)."""
    mean_e, std_e = enroll
    mean_t, std_t = test
    if std_e <= 0 or std_t <= 0:
        raise DegenerateInputError("cohort std must be positive")
    return 0.5 * ((score - mean_e) / std_e + (score - mean_t) / std_t)


# ---------------------------------------------------------------------------
# TAS-Norm

@dataclass
class TasNormParams:
    """The four trained scalars recalibrating cohort means and stds."""

    w_mean: float = 0.0
    b_mean: float = 0.0
    w_std: float = 0.0
    b_std: float = 0.0

    KEYS = ("w_mean", "b_mean", "w_std", "b_std")

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_array()):
            raise ValueError("TAS-Norm parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_mean, self.b_mean, self.w_std, self.b_std])

    @classmethod
    def from_array(cls, theta):
        return cls(*(float(v) for v in theta))

    def as_model_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.KEYS}

    @classmethod
    def from_model_dict(cls, model):
        missing = [k for k in cls.KEYS if k not in model]
        extra = [k for k in model if k not in cls.KEYS]
        if missing or extra:
            raise DataError(
                f"TAS-Norm params file needs exactly keys {list(cls.KEYS)}; "
                f"missing {missing}, unexpected {extra}"
            )
        return cls(**{k: model[k] for k in cls.KEYS})


def tas_calibrated(params: TasNormParams, mean, std):
    """Sigmoid-calibrated (mean, std) used by Eq.-style TAS scoring and
    as QMF features. Works elementwise on arrays."""
    cal_mean = sigmoid(params.w_mean * np.asarray(mean) + params.b_mean)
    cal_std = sigmoid(params.w_std * np.asarray(std) + params.b_std)
    return cal_mean, cal_std


def tas_norm(score, enroll, test, params: TasNormParams) -> float:
    """Trainable adaptive normalization of one score."""
    mean_e, std_e = enroll
    mean_t, std_t = test
    ce, de = tas_calibrated(params, mean_e, std_e)
    ct, dt = tas_calibrated(params, mean_t, std_t)
    return 0.5 * ((score - ce) / de + (score - ct) / dt)


def _tas_norm_batch(theta, scores, mean_e, std_e, mean_t, std_t):
    wm, bm, ws, bs = theta
    ce = sigmoid(wm * mean_e + bm)
    de = sigmoid(ws * std_e + bs)
    ct = sigmoid(wm * mean_t + bm)
    dt = sigmoid(ws * std_t + bs)
    s_tas = 0.5 * ((scores - ce) / de + (scores - ct) / dt)
    return s_tas, (ce, de, ct, dt)


def tas_train_loss(theta, scores, mean_e, std_e, mean_t, std_t, labels, threshold):
    """Class-balanced NLL of sig(S_tas - threshold) against {0,1} labels,
    plus its analytic gradient w.r.t. the four scalars.

    Each class contributes half the loss regardless of the
    imposter:target ratio. With plain per-trial averaging the imbalance
    pushes an unbounded shift/scale direction through the re-centered
    threshold (the threshold term only cancels at a rate-balanced
    operating point), and training runs off to saturated sigmoids.

    threshold enters as a constant (stop-gradient); probabilities are
    clamped to [1e-12, 1 - 1e-12] inside the logs only.
    """
    s_tas, (ce, de, ct, dt) = _tas_norm_batch(
        theta, scores, mean_e, std_e, mean_t, std_t
    )
    y = labels.astype(np.float64)
    n_target = y.sum()
    n_nontarget = y.size - n_target
    if n_target == 0 or n_nontarget == 0:
        raise DegenerateInputError("loss needs both trial classes")
    weights = np.where(labels, 0.5 / n_target, 0.5 / n_nontarget)
    p = sigmoid(s_tas - threshold)
    p_safe = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    nll = -float(
        np.sum(weights * (y * np.log(p_safe) + (1.0 - y) * np.log1p(-p_safe)))
    )

    g = weights * (p - y)  # dNLL/dz per trial, z = S_tas - threshold
    dce = ce * (1.0 - ce)
    dct = ct * (1.0 - ct)
    dde = de * (1.0 - de)
    ddt = dt * (1.0 - dt)
    # dS_tas/d(cal mean) = -1/(2 cal_std); dS_tas/d(cal std) = -(S - cal mean)/(2 cal_std^2)
    d_wm = np.sum(g * (-dce * mean_e / (2.0 * de) - dct * mean_t / (2.0 * dt)))
    d_bm = np.sum(g * (-dce / (2.0 * de) - dct / (2.0 * dt)))
    d_ws = np.sum(
        g
        * (
            -(scores - ce) * dde * std_e / (2.0 * de * de)
            - (scores - ct) * ddt * std_t / (2.0 * dt * dt)
        )
    )
    d_bs = np.sum(
        g
        * (
            -(scores - ce) * dde / (2.0 * de * de)
            - (scores - ct) * ddt / (2.0 * dt * dt)
        )
    )
    return nll, np.array([d_wm, d_bm, d_ws, d_bs])


@dataclass
class TasNormTrainConfig:
    batch_size: int = 256
    steps: int = 2000
    learning_rate: float = 1e-2
    seed: int = 0
    # gradient-norm clip: near sigmoid saturation the std-calibration
    # gradient scales like 1/sigma and unclipped fixed-step descent
    # overshoots into non-finite parameters
    grad_clip: float = 1.0
    # fixture-generation metadata only: the test-side crop range in seconds
    test_crop_range: tuple[float, float] = (1.0, 1.8)

    def __post_init__(self):
        if self.batch_size < 2 or self.steps < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size >= 2, steps >= 1, learning_rate > 0 required")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive (or None to disable)")


def batch_threshold(scores, labels) -> float:
    """The in-batch decision threshold: the EER threshold of the current
    scores. Subtracting it centers sigmoid outputs near 0.5 per batch."""
    return metrics.eer(scores, labels)[1]


def tas_norm_train(
    scores, mean_e, std_e, mean_t, std_t, labels, config: TasNormTrainConfig
) -> TasNormParams:
    """Mini-batch gradient descent over the four scalars, from zeros.

    Deterministic given (data, config.seed). Batches are drawn without
    replacement per step and redrawn until both classes are present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mean_e = np.asarray(mean_e, dtype=np.float64)
    std_e = np.asarray(std_e, dtype=np.float64)
    mean_t = np.asarray(mean_t, dtype=np.float64)
    std_t = np.asarray(std_t, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n = scores.size
    if n == 0:
        raise DegenerateInputError("no trials to train on")
    n_target = int(labels.sum())
    if n_target == 0 or n_target == n:
        raise DegenerateInputError("TAS-Norm training needs both trial classes")

    rng = np.random.default_rng(config.seed)
    theta = np.zeros(4)
    full = np.arange(n)
    for _ in range(config.steps):
        if n <= config.batch_size:
            idx = full
        else:
            for _attempt in range(1000):
                idx = rng.choice(n, size=config.batch_size, replace=False)
                hits = int(labels[idx].sum())
                if 0 < hits < config.batch_size:
                    break
            else:
                raise DegenerateInputError(
                    "could not draw a mini-batch containing both classes"
                )
        s_tas, _ = _tas_norm_batch(
            theta, scores[idx], mean_e[idx], std_e[idx], mean_t[idx], std_t[idx]
        )
        t_batch = batch_threshold(s_tas, labels[idx])
        _, grad = tas_train_loss(
            theta,
            scores[idx],
            mean_e[idx],
            std_e[idx],
            mean_t[idx],
            std_t[idx],
            labels[idx],
            t_batch,
        )
        if config.grad_clip is not None:
            norm = float(np.linalg.norm(grad))
            if norm > config.grad_clip:
                grad = grad * (config.grad_clip / norm)
        theta = theta - config.learning_rate * grad
    return TasNormParams.from_array(theta)


def as_norm_scores(score_file, enroll_stats, test_stats):
    """AS-Norm applied to a whole score file; order preserved."""
    s, mean_e, std_e, mean_t, std_t = stats_arrays(score_file, enroll_stats, test_stats)
    if np.any(std_e <= 0) or np.any(std_t <= 0):
        raise DegenerateInputError("cohort std must be positive")
    normed = 0.5 * ((s - mean_e) / std_e + (s - mean_t) / std_t)
    return ScoreFile(
        [(e, t, float(v)) for (e, t, _), v in zip(score_file, normed)]
    )


def tas_norm_scores(score_file, enroll_stats, test_stats, params: TasNormParams):
    """TAS-Norm applied to a whole score file; order preserved."""
    s, mean_e, std_e, mean_t, std_t = stats_arrays(score_file, enroll_stats, test_stats)
    normed, _ = _tas_norm_batch(params.as_array(), s, mean_e, std_e, mean_t, std_t)
    return ScoreFile(
        [(e, t, float(v)) for (e, t, _), v in zip(score_file, normed)]
    )


def stats_arrays(score_file, enroll_stats, test_stats):
    """Align per-side cohort stats tables with a score file.

    Returns (scores, mean_e, std_e, mean_t, std_t) arrays in score order.
    """
    n = len(score_file)
    scores = np.empty(n)
    mean_e = np.empty(n)
    std_e = np.empty(n)
    mean_t = np.empty(n)
    std_t = np.empty(n)
    for i, (enroll_id, test_id, score) in enumerate(score_file):
        if enroll_id not in enroll_stats:
            raise DataError(f"no enrollment cohort stats for {enroll_id!r}")
        if test_id not in test_stats:
            raise DataError(f"no test cohort stats for {test_id!r}")
        scores[i] = score
        mean_e[i], std_e[i] = enroll_stats[enroll_id]
        mean_t[i], std_t[i] = test_stats[test_id]
    return scores, mean_e, std_e, mean_t, std_t

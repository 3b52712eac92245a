"""Detection metrics: step ROC, interpolated EER, minimum detection cost.

Decisions are deterministic: a trial is accepted iff score >= threshold,
and thresholds sit exactly at the distinct score values plus one
reject-everything point. All error rates are integer counts divided by
class sizes, so they are invariant under any strictly increasing
transform of the scores.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError


@dataclass(frozen=True)
class DcfParams:
    """Detection cost parameters: miss cost, false-alarm cost, target prior."""

    c_miss: float
    c_fa: float
    p_target: float

    def __post_init__(self):
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be positive")
        if not 0.0 < self.p_target < 1.0:
            raise ValueError("p_target must be in (0, 1)")


# Challenge operating points: Day favours catching targets, Night favours
# rejecting imposters.
DAY = DcfParams(c_miss=1.0, c_fa=20.0, p_target=0.8)
NIGHT = DcfParams(c_miss=10.0, c_fa=100.0, p_target=0.01)


def _check_classes(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    n_target = int(labels.sum())
    if n_target == 0 or n_target == labels.size:
        raise DegenerateInputError(
            "metrics need both target and nontarget trials"
        )
    return scores, labels


def roc(scores, labels):
    """Step ROC over every distinct score.

    Returns (thresholds, p_miss, p_fa), parallel arrays ordered by
    increasing threshold. The last point is the reject-everything
    operating point at threshold +inf. p_miss is nondecreasing and
    p_fa nonincreasing along the arrays.
    """
    scores, labels = _check_classes(scores, labels)
    tgt = np.sort(scores[labels])
    non = np.sort(scores[~labels])
    thresholds = np.unique(scores)
    # accept iff score >= t: misses are targets strictly below t,
    # false alarms are nontargets at or above t
    p_miss = np.searchsorted(tgt, thresholds, side="left") / tgt.size
    p_fa = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    thresholds = np.append(thresholds, np.inf)
    p_miss = np.append(p_miss, 1.0)
    p_fa = np.append(p_fa, 0.0)
    return thresholds, p_miss, p_fa


def eer(scores, labels) -> tuple[float, float]:
    """Equal error rate and its threshold.

    The ROC is piecewise between operating points; the EER is read off by
    linear interpolation between the adjacent points where p_miss - p_fa
    changes sign. If the sign change lands exactly on a point, that
    point's rate and threshold are returned.
    """
    thresholds, p_miss, p_fa = roc(scores, labels)
    diff = p_miss - p_fa
    # diff starts at -1 (accept all) and ends at +1 (reject all), and is
    # nondecreasing, so the first nonnegative entry exists at k >= 1
    k = int(np.argmax(diff >= 0.0))
    if diff[k] == 0.0:
        return float(p_miss[k]), float(thresholds[k])
    m1, m2 = p_miss[k - 1], p_miss[k]
    f1, f2 = p_fa[k - 1], p_fa[k]
    alpha = (f1 - m1) / ((m2 - m1) - (f2 - f1))
    value = float(m1 + alpha * (m2 - m1))
    if np.isinf(thresholds[k]):
        # crossing inside the final segment has no finite upper threshold;
        # report the last real operating point
        return value, float(thresholds[k - 1])
    threshold = float(thresholds[k - 1] + alpha * (thresholds[k] - thresholds[k - 1]))
    return value, threshold


def min_dcf(scores, labels, params: DcfParams, normalize=True) -> tuple[float, float]:
    """Minimum detection cost over all operating points, and its threshold.

    cost(t) = c_miss * p_target * p_miss(t) + c_fa * (1 - p_target) * p_fa(t)

    With normalize=True (default) the cost is divided by the best
    uninformed system, min(c_miss * p_target, c_fa * (1 - p_target)).
    Ties resolve to the lowest threshold.
    """
    thresholds, p_miss, p_fa = roc(scores, labels)
    cost = (
        params.c_miss * params.p_target * p_miss
        + params.c_fa * (1.0 - params.p_target) * p_fa
    )
    if normalize:
        cost = cost / min(
            params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target)
        )
    i = int(np.argmin(cost))  # first minimum == lowest threshold
    return float(cost[i]), float(thresholds[i])


def dcf_c(scores, labels, normalize=True) -> float:
    """Mean of the Day and Night minimum detection costs."""
    day, _ = min_dcf(scores, labels, DAY, normalize=normalize)
    night, _ = min_dcf(scores, labels, NIGHT, normalize=normalize)
    return (day + night) / 2.0

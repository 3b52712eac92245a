"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here recounts from first principles with plain Python loops;
none of it shares code with the library implementations it checks.
"""


def brute_points(scores, labels):
    """O(n^2) threshold sweep: direct recount at every distinct score and
    at one reject-everything point."""
    targets = [s for s, y in zip(scores, labels) if y]
    nons = [s for s, y in zip(scores, labels) if not y]
    thresholds = sorted(set(scores)) + [float("inf")]
    points = []
    for t in thresholds:
        miss = sum(1 for s in targets if s < t) / len(targets)
        fa = sum(1 for s in nons if s >= t) / len(nons)
        points.append((t, miss, fa))
    return points


def brute_min_dcf(scores, labels, params, normalize=True):
    best_cost, best_t = None, None
    for t, miss, fa in brute_points(scores, labels):
        cost = params.c_miss * params.p_target * miss + params.c_fa * (
            1.0 - params.p_target
        ) * fa
        if normalize:
            cost = cost / min(
                params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target)
            )
        if best_cost is None or cost < best_cost:
            best_cost, best_t = cost, t
    return best_cost, best_t


def brute_eer(scores, labels):
    points = brute_points(scores, labels)
    for k in range(1, len(points)):
        t2, m2, f2 = points[k]
        if m2 - f2 >= 0.0:
            if m2 - f2 == 0.0:
                return m2, t2
            t1, m1, f1 = points[k - 1]
            alpha = (f1 - m1) / ((m2 - m1) - (f2 - f1))
            value = m1 + alpha * (m2 - m1)
            if t2 == float("inf"):
                return value, t1
            return value, t1 + alpha * (t2 - t1)
    raise AssertionError("no miss/false-alarm crossing found")

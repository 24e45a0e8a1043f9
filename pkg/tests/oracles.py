"""Brute-force references written independently of the library code."""
import itertools


def sqdist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def brute_fps(points, k, start=0):
    """Greedy farthest-point order; ties go to the smallest index."""
    chosen = [start]
    while len(chosen) < k:
        best, best_d = None, None
        for j, p in enumerate(points):
            if j in chosen:
                continue
            d = min(sqdist(p, points[c]) for c in chosen)
            if best_d is None or d > best_d:
                best, best_d = j, d
        chosen.append(best)
    return chosen


def brute_ball(points, center, radius, k):
    hits = [j for j, p in enumerate(points) if sqdist(p, center) <= radius * radius]
    return hits[:k]


def brute_coverage(points, chosen):
    return max(min(sqdist(p, points[c]) for c in chosen) for p in points)


def dense_fps(points, k, start=0):
    """Non-incremental greedy FPS over a full distance matrix (numpy)."""
    import numpy as np

    pts = np.asarray(points, dtype=np.float64)
    d = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    chosen = [start]
    while len(chosen) < k:
        score = d[:, chosen].min(axis=1)
        score[chosen] = -1.0
        chosen.append(int(np.flatnonzero(score == score.max())[0]))
    return chosen


def dense_ball(points, center, radius, k):
    import numpy as np

    d = ((np.asarray(points) - np.asarray(center)) ** 2).sum(-1)
    return [int(i) for i in np.flatnonzero(d <= radius * radius)[:k]]

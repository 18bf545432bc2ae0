"""Dimensions of free nilpotent Lie algebras."""

from .errors import PreconditionError

__all__ = ["mobius", "free_lie_layer_dim", "free_nilpotent_rank"]


def mobius(n):
    result, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    return -result if m > 1 else result


def free_lie_layer_dim(n1, j):
    """Dimension of degree-``j`` part of the free Lie algebra on ``n1`` generators (Witt)."""
    if n1 < 1 or j < 1:
        raise PreconditionError("n1 and j must be positive")
    total = sum(mobius(d) * n1 ** (j // d) for d in range(1, j + 1) if j % d == 0)
    return total // j


def free_nilpotent_rank(n1, k):
    """Rank of the free step-``k`` nilpotent Lie algebra on ``n1`` generators.

    This is the sum of the layer dimensions of degrees 1..k; e.g. 3 for
    ``(2, 2)`` and 5 for ``(2, 3)``.  The second layer alone has dimension
    ``n1 (n1 - 1) / 2`` (:func:`free_lie_layer_dim`).
    """
    if k < 1:
        raise PreconditionError("k must be positive")
    return sum(free_lie_layer_dim(n1, j) for j in range(1, k + 1))

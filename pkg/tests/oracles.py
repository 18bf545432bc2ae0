"""Independent oracles shared by the test modules."""


def hall_basis(generators, degree):
    """Hall words (nested pairs) of length ``<= degree`` on ``generators``."""
    by_len = {1: list(generators)}
    order = list(generators)

    def length(w):
        return 1 if not isinstance(w, tuple) else length(w[0]) + length(w[1])

    for n in range(2, degree + 1):
        new = []
        for k in range(1, n):
            for u in by_len[k]:
                for v in by_len[n - k]:
                    # Hall conditions with order by length then creation
                    if not order.index(u) > order.index(v):
                        continue
                    if isinstance(u, tuple) and order.index(u[1]) > order.index(v):
                        continue
                    new.append((u, v))
        by_len[n] = new
        order.extend(new)
    return [w for n in range(1, degree + 1) for w in by_len[n]]

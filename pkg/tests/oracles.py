"""Reference models written independently of the package internals."""

from itertools import product


def reversal_prediction(values):
    """Expected heap around reversing the list built by ``build_list``.

    The builder allocates the last node first, so node ``i`` lives in block
    ``k - i``.  Returns ``(initial, final, head)`` where the heaps map
    ``(block, offset)`` to a plain Python value: an int, or a ``(block, 0)``
    pair for a link, or ``None`` for null.
    """
    k = len(values)
    block = {i: k - i for i in range(k)}
    initial, final = {}, {}
    for i, v in enumerate(values):
        initial[(block[i], 0)] = v
        final[(block[i], 0)] = v
        initial[(block[i], 1)] = (block[i + 1], 0) if i + 1 < k else None
        final[(block[i], 1)] = (block[i - 1], 0) if i > 0 else None
    head = (block[k - 1], 0) if k else None
    return initial, final, head


def plain(v):
    """Package value to the plain form used by :func:`reversal_prediction`."""
    if hasattr(v, "block"):
        return None if v.block == 0 else (v.block, v.offset)
    if hasattr(v, "n"):
        return v.n
    return v


def plain_word(w):
    if isinstance(w, int):
        return None if w == 0 else w
    return (w.block, w.offset)


# -- set-based separation logic over a fixed finite universe -----------------


def all_heaps(locations, pool):
    """Every partial map from ``locations`` to ``pool`` as a frozenset of items."""
    out = []
    for choice in product([None, *pool], repeat=len(locations)):
        out.append(frozenset((loc, v) for loc, v in zip(locations, choice) if v is not None))
    return out


def disjoint(h1, h2):
    return not ({k for k, _ in h1} & {k for k, _ in h2})


def set_star(P, Q):
    return {h1 | h2 for h1 in P for h2 in Q if disjoint(h1, h2)}


def set_wand(universe, Q, R):
    return {h for h in universe
            if all(h | g in R for g in Q if disjoint(h, g))}

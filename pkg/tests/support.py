"""Shared fixtures data: distinct manifolds of the builtin scenarios."""

from functools import lru_cache

from dgvf.scenario import builtin_names, load_scenario


@lru_cache(maxsize=None)
def builtin_manifolds():
    """``(label, manifold, scenario)`` for each distinct manifold in every builtin."""
    out = []
    for name in builtin_names():
        sc = load_scenario(name)
        seen = set()
        for i, m in enumerate(sc.manifolds):
            key = ("target" if m.realtime else tuple(m.f.strings()), tuple(m.g.strings()))
            if key not in seen:
                seen.add(key)
                out.append((f"{name}/robot{i + 1}", m, sc))
    return tuple(out)

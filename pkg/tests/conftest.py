import numpy as np
import pytest

from cone_bvp.problem import spec_from_dict
from cone_bvp.quadrature import GridFunction, grid_nodes


def make_spec(**overrides):
    """Unit-weight p=2 spec; keyword overrides go straight into the problem mapping."""
    d = {"n": 1, "phi_exponent": 2, "weight_p": "1", "weight_q": "1"}
    d.update({k.replace("lam", "lambda"): v for k, v in overrides.items()})
    if "f" not in d and "h" not in d:
        d["f"] = ["8"]
    return spec_from_dict(d)


def grid_funcs(*rows):
    return [GridFunction(np.asarray(r, dtype=float)) for r in rows]


def bump(N, level=1.0):
    t = grid_nodes(N)
    return GridFunction(level * 4 * t * (1 - t))


@pytest.fixture
def superlinear():
    return make_spec(h=["1"], g=["u1^2"])


@pytest.fixture
def constant8():
    return make_spec(f=["8"])


def random_spec(rng, n=None, separable=False):
    """Random valid spec: positive p, nondecreasing q, strictly positive forcing."""
    n = n or int(rng.integers(1, 4))
    expo = float(rng.uniform(1.3, 4.0))
    a, b, c = rng.uniform(0.5, 2.0, 3)
    weight_p = f"{a:.6f}+{b:.6f}*sin({c * 3:.6f}*t)^2"
    weight_q = f"{rng.uniform(0.5, 2):.6f}+{rng.uniform(0, 2):.6f}*t^{rng.integers(1, 4)}"
    if separable:
        h = [f"{rng.uniform(0.2, 2):.6f}+{rng.uniform(0, 2):.6f}*t^2" for _ in range(n)]
        g = [f"u{k + 1}^{rng.uniform(0.5, 2.5):.6f}+{rng.uniform(0.1, 1):.6f}" for k in range(n)]
        return make_spec(n=n, phi_exponent=expo, weight_p=weight_p, weight_q=weight_q, h=h, g=g)
    f = []
    for k in range(n):
        j = int(rng.integers(1, n + 1))
        f.append(f"{rng.uniform(0.1, 3):.6f}+{rng.uniform(0, 5):.6f}*t"
                 f"+{rng.uniform(0, 2):.6f}*u{j}^{rng.uniform(0.5, 2):.6f}")
    return make_spec(n=n, phi_exponent=expo, weight_p=weight_p, weight_q=weight_q, f=f)


def random_cone_member(rng, cone, n):
    """Nonnegative combination of cone members: the floor profile and window-peaked tents."""
    from cone_bvp.cone import floor_profile, in_cone

    t = grid_nodes(cone.inv_p.N)
    pieces = [floor_profile(cone)]
    for peak in rng.uniform(0.3, 0.7, 6):
        tent = np.minimum(t / peak, (1 - t) / (1 - peak))
        if in_cone([GridFunction(tent)], cone).member:
            pieces.append(tent)
    rows = []
    for _ in range(n):
        weights = rng.uniform(0, 1, len(pieces)) * (rng.random(len(pieces)) < 0.7)
        weights[0] += 1e-3
        rows.append(10 ** rng.uniform(-2, 2) * (weights @ np.array(pieces)))
    return [GridFunction(r) for r in rows]

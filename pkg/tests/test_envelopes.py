import numpy as np
import pytest

from convenv.envelopes import (ALPHA_STAR, BETA_STAR, EXAMPLES, _alpha_eq, _beta_eq, exact_u,
                               get_example, lower_hull_values, oracle_envelope, sample_domain,
                               solve_alpha_star, solve_beta_star)
from convenv.geometry import UnitDisk, square


def half_sq(p):
    return 0.5 * (p ** 2).sum(axis=1)


def test_roots():
    a, b = solve_alpha_star(), solve_beta_star()
    assert abs(a - 0.6290) <= 5e-4 and 0.5 < a < 0.75 and abs(_alpha_eq(a)) <= 1e-10
    assert abs(b - 0.2580) <= 5e-4 and 0 < b < 0.5 and abs(_beta_eq(b)) <= 1e-10


def test_exact_values():
    assert exact_u("ex3", [0.5, -0.5])[0] == pytest.approx(-1.0)
    assert exact_u("ex4", [1.0, 1.0])[0] == pytest.approx(1.0, abs=1e-10)
    # flat part of the first envelope takes the minimum of the data
    assert exact_u("ex1", [0.4, 0.0])[0] == -1.0
    assert exact_u("ex2", [0.1, 0.1])[0] == 0.0


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_exact_envelope_below_data_and_continuous(name, rng):
    ex = get_example(name)
    p = rng.uniform(-1, 1, (20000, 2))
    if isinstance(ex.domain, UnitDisk):
        p = p[np.hypot(*p.T) <= 1]
    u, f = ex.u_exact(p), ex.f(p)
    assert np.all(u <= f + 1e-12)
    q = p + rng.normal(scale=1e-7, size=p.shape)
    ok = np.abs(q).max(axis=1) <= 1 if not isinstance(ex.domain, UnitDisk) else np.hypot(*q.T) <= 1
    assert np.abs(ex.u_exact(q[ok]) - u[ok]).max() <= 2 * ex.lip_u * 1e-6


def test_exact_envelope_convex_along_random_chords(rng):
    for ex in EXAMPLES.values():
        a = rng.uniform(-0.7, 0.7, (5000, 2))
        b = rng.uniform(-0.7, 0.7, (5000, 2))
        mid = ex.u_exact(0.5 * (a + b))
        assert np.all(mid <= 0.5 * (ex.u_exact(a) + ex.u_exact(b)) + 1e-12)


def test_unknown_example():
    with pytest.raises(KeyError):
        get_example("ex9")


def test_sampling_domain():
    pts, on_b, spacing = sample_domain(UnitDisk(), 33)
    assert np.allclose(np.hypot(*pts[on_b].T), 1.0)
    assert np.all(np.hypot(*pts.T) <= 1 + 1e-12)
    with pytest.raises(ValueError):
        sample_domain(square(), 4)


@pytest.mark.parametrize("dom", [UnitDisk(), square()], ids=["disk", "square"])
def test_oracle_convex_fixed_point(dom):
    env = oracle_envelope(half_sq, dom, 65)
    assert np.abs(env.values - env.f).max() <= 1e-10


def test_oracle_concave_cone():
    env = oracle_envelope(lambda p: -np.hypot(*p.T), UnitDisk(), 65)
    assert np.abs(env.values + 1).max() <= 2 * env.spacing


def test_oracle_affine_data():
    vals = lower_hull_values(np.random.default_rng(1).uniform(-1, 1, (50, 2)) * [1, 0] + [0, 0.5],
                             np.linspace(0, 1, 50))
    assert np.all(np.isfinite(vals))


def test_oracle_properties(rng):
    ex = get_example("ex2")
    env = oracle_envelope(ex.f, ex.domain, 65)
    assert np.all(env.values <= env.f + 1e-12)
    again = lower_hull_values(env.points, env.values)
    assert np.abs(again - env.values).max() <= 1e-10
    # convexity: collinear sample triples along grid rows
    pts = env.points[~env.on_boundary]
    vals = env.values[~env.on_boundary]
    key = {tuple(np.round(p / env.spacing).astype(int)): v for p, v in zip(pts, vals)}
    checked = 0
    for (i, j), v in list(key.items())[:5000]:
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            a, b = key.get((i - di, j - dj)), key.get((i + di, j + dj))
            if a is not None and b is not None:
                assert v <= 0.5 * (a + b) + 1e-12
                checked += 1
    assert checked >= 1000


def test_oracle_csv(tmp_path):
    env = oracle_envelope(get_example("ex3").f, square(), 9)
    env.to_csv(tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "x,y,f,u_oracle" and len(lines) == 82

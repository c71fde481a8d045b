"""Shared random-problem generators for the solver and geometry tests."""

import numpy as np

import relent as R


def random_space(rng, n):
    return R.FiniteSpace([f"x{i}" for i in range(n)], rng.uniform(0.5, 1.5, n))


def random_density(rng, space, floor=0.15):
    v = rng.uniform(floor, 1.0, space.size)
    return R.Density(space, v / (v @ space.mu))


def random_features(rng, space, m=1):
    while True:
        vals = rng.uniform(0.0, 1.0, (m, space.size))
        if np.all(np.ptp(vals, axis=1) > 0.25):
            return R.FeatureSet(space, vals)


def random_problem(rng, n, kind, q, m=1, mix=0.6):
    """Prior, features, and a feasible MomentSpec.

    Targets are a convex mix of the moments of a random strictly positive
    density and the prior's own moments, keeping them safely reachable.
    """
    space = random_space(rng, n)
    r = random_density(rng, space)
    u = random_features(rng, space, m)
    p0 = random_density(rng, space)
    t_p = R.constraint_moments(u, p0, kind, q)
    t_r = R.constraint_moments(u, r, kind, q)
    targets = mix * t_p + (1.0 - mix) * t_r
    return r, u, R.MomentSpec(kind, targets, R.QIndex(q))


def feasible_classical_l(rng, r, u, targets):
    """A density satisfying the classical constraints but distinct from the solve.

    Projecting a different random prior onto the same constraint set gives
    a feasible point to solver precision.
    """
    other = random_density(rng, r.space)
    return R.solve_classical(other, u, R.MomentSpec.classical(targets)).posterior

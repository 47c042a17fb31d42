"""The 24 noiseless BBOB test functions with seeded instance transformations.

Function bodies follow the public BBOB definitions (Hansen et al., "Real-parameter
black-box optimization benchmarking 2009: noiseless functions definitions").
Instances are generated with a simplified scheme: a random shift ``x_opt`` in
``[-4, 4]^d``, a random offset ``f_opt`` in ``[-100, 100]`` and orthogonal
matrices ``R``, ``Q`` drawn by QR of a Gaussian matrix. Every function is
shifted so that ``x_opt`` is its global minimiser with value ``f_opt``.

All functions are minimised over the box ``[-5, 5]^d``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProblemInstance",
    "make_instance",
    "evaluate",
    "evaluate_batch",
    "instance_catalog",
    "catalog_to_json",
    "FUNCTION_NAMES",
    "ROTATED_FUNCTIONS",
    "LOWER_BOUND",
    "UPPER_BOUND",
]

LOWER_BOUND = -5.0
UPPER_BOUND = 5.0

FUNCTION_NAMES = {
    1: "sphere",
    2: "ellipsoid",
    3: "rastrigin",
    4: "buche_rastrigin",
    5: "linear_slope",
    6: "attractive_sector",
    7: "step_ellipsoid",
    8: "rosenbrock",
    9: "rosenbrock_rotated",
    10: "ellipsoid_rotated",
    11: "discus",
    12: "bent_cigar",
    13: "sharp_ridge",
    14: "different_powers",
    15: "rastrigin_rotated",
    16: "weierstrass",
    17: "schaffers_f7",
    18: "schaffers_f7_ill",
    19: "griewank_rosenbrock",
    20: "schwefel",
    21: "gallagher_101",
    22: "gallagher_21",
    23: "katsuura",
    24: "lunacek",
}

# functions 1-5 are separable and 8 is the unrotated Rosenbrock
ROTATED_FUNCTIONS = frozenset(range(6, 25)) - {8}

_SCHWEFEL_OPT = 4.2096874633


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One (function, dimension, instance) triple with its transformation.

    ``rotation`` and ``rotation_q`` are the BBOB matrices ``R`` and ``Q``; both
    are the identity for unrotated functions. ``peaks`` and ``peak_conditioning``
    are only populated for the Gallagher functions (21, 22).
    """

    function_id: int
    dimension: int
    instance_id: int
    x_opt: np.ndarray
    f_opt: float
    rotation: np.ndarray
    rotation_q: np.ndarray
    rng_seed: int
    peaks: np.ndarray | None = field(default=None, repr=False)
    peak_conditioning: np.ndarray | None = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return FUNCTION_NAMES[self.function_id]

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def to_dict(self) -> dict:
        return {
            "function_id": self.function_id,
            "dimension": self.dimension,
            "instance_id": self.instance_id,
            "rng_seed": self.rng_seed,
            "x_opt": self.x_opt.tolist(),
            "f_opt": self.f_opt,
        }


def _orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    # sign fix makes the draw Haar-distributed
    return q * np.sign(np.diag(r))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def make_instance(
    function_id: int, dimension: int = 10, instance_id: int = 1, seed: int = 0
) -> ProblemInstance:
    """Build the deterministic instance for ``(function_id, dimension, instance_id, seed)``.

    Raises
    ------
    ValueError
        If ``function_id`` is outside 1..24 or ``dimension < 2``.
    """
    if not isinstance(function_id, (int, np.integer)) or not 1 <= function_id <= 24:
        raise ValueError(f"function_id must be in 1..24, got {function_id!r}")
    if not isinstance(dimension, (int, np.integer)) or dimension < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {dimension!r}")
    if not isinstance(instance_id, (int, np.integer)):
        raise ValueError("instance_id must be an integer")
    if seed < 0:
        raise ValueError("seed must be unsigned")
    function_id, dimension, instance_id = int(function_id), int(dimension), int(instance_id)
    rng = np.random.default_rng(
        np.random.SeedSequence([int(seed), function_id, dimension, instance_id & (2**63 - 1)])
    )
    d = dimension
    x_opt = rng.uniform(-4.0, 4.0, d)
    f_opt = float(np.round(rng.uniform(-100.0, 100.0), 2))
    if function_id in ROTATED_FUNCTIONS:
        R, Q = _orthogonal(rng, d), _orthogonal(rng, d)
    else:
        R, Q = np.eye(d), np.eye(d)

    signs = np.where(x_opt >= 0, 1.0, -1.0)
    if function_id == 5:
        x_opt = 4.0 * signs
    elif function_id in (8, 9, 19):
        x_opt = 0.75 * x_opt
    elif function_id == 20:
        x_opt = 0.5 * _SCHWEFEL_OPT * signs
    elif function_id == 22:
        x_opt = 0.98 * x_opt
    elif function_id == 24:
        x_opt = 1.25 * signs

    peaks = conditioning = None
    if function_id in (21, 22):
        peaks, conditioning = _gallagher_peaks(rng, function_id, x_opt)

    return ProblemInstance(
        function_id=function_id,
        dimension=d,
        instance_id=instance_id,
        x_opt=_frozen(x_opt),
        f_opt=f_opt,
        rotation=_frozen(R),
        rotation_q=_frozen(Q),
        rng_seed=int(seed),
        peaks=None if peaks is None else _frozen(peaks),
        peak_conditioning=None if conditioning is None else _frozen(conditioning),
    )


def _gallagher_peaks(rng, function_id, x_opt):
    d = x_opt.shape[0]
    n_peaks, first_alpha, box = (101, 1000.0, 5.0) if function_id == 21 else (21, 1000.0**2, 4.9)
    alphas = np.power(1000.0, 2.0 * np.arange(n_peaks - 1) / (n_peaks - 2))
    alphas = np.concatenate([[first_alpha], rng.permutation(alphas)])
    exps = np.arange(d) / (2.0 * (d - 1))
    cond = np.empty((n_peaks, d))
    for i, a in enumerate(alphas):
        cond[i] = rng.permutation(np.power(a, exps)) / a**0.25
    peaks = rng.uniform(-box, box, (n_peaks, d))
    peaks[0] = x_opt
    return peaks, cond


# ---------------------------------------------------------------------------
# transformations (rows of X are points)


def _t_osz(x):
    xhat = np.log(np.abs(x), where=x != 0, out=np.zeros_like(x))
    c1 = np.where(x > 0, 10.0, 5.5)
    c2 = np.where(x > 0, 7.9, 3.1)
    return np.sign(x) * np.exp(xhat + 0.049 * (np.sin(c1 * xhat) + np.sin(c2 * xhat)))


def _t_asy(x, beta):
    d = x.shape[-1]
    ramp = np.arange(d) / (d - 1)
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    out = np.where(pos, np.power(safe, 1.0 + beta * ramp * np.sqrt(safe)), x)
    return out


def _lambda_diag(alpha, d):
    return np.power(alpha, np.arange(d) / (2.0 * (d - 1)))


def _f_pen(x):
    return np.sum(np.maximum(0.0, np.abs(x) - 5.0) ** 2, axis=-1)


def _rot(X, M):
    # broadcast reduction instead of BLAS so a row's result does not depend on batch size
    return (X[..., None, :] * M).sum(axis=-1)


# ---------------------------------------------------------------------------
# raw function bodies: f(X, inst) -> values without f_opt


def _sphere(X, p):
    return np.sum((X - p.x_opt) ** 2, axis=1)


def _ellipsoid(X, p):
    d = p.dimension
    z = _t_osz(X - p.x_opt)
    return np.sum(np.power(10.0, 6.0 * np.arange(d) / (d - 1)) * z**2, axis=1)


def _rastrigin_body(z):
    d = z.shape[1]
    return 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + np.sum(z**2, axis=1)


def _rastrigin(X, p):
    z = _lambda_diag(10.0, p.dimension) * _t_asy(_t_osz(X - p.x_opt), 0.2)
    return _rastrigin_body(z)


def _buche_rastrigin(X, p):
    d = p.dimension
    z = _t_osz(X - p.x_opt)
    s = np.power(10.0, np.arange(d) / (2.0 * (d - 1)))
    odd = (np.arange(d) % 2 == 0)  # 1-based odd coordinates
    s = np.where((z > 0) & odd, 10.0 * s, s)
    return _rastrigin_body(s * z) + 100.0 * _f_pen(X)


def _linear_slope(X, p):
    d = p.dimension
    s = np.sign(p.x_opt) * np.power(10.0, np.arange(d) / (d - 1))
    z = np.where(X * p.x_opt < p.x_opt**2, X, p.x_opt)
    return np.sum(np.abs(s * p.x_opt) - s * z, axis=1)


def _attractive_sector(X, p):
    d = p.dimension
    z = _rot(_lambda_diag(10.0, d) * _rot(X - p.x_opt, p.rotation), p.rotation_q)
    s = np.where(z * p.x_opt > 0, 100.0, 1.0)
    return np.power(_t_osz(np.sum((s * z) ** 2, axis=1)), 0.9)


def _step_ellipsoid(X, p):
    d = p.dimension
    zhat = _lambda_diag(10.0, d) * _rot(X - p.x_opt, p.rotation)
    ztil = np.where(np.abs(zhat) > 0.5, np.floor(0.5 + zhat), np.floor(0.5 + 10.0 * zhat) / 10.0)
    z = _rot(ztil, p.rotation_q)
    body = np.sum(np.power(10.0, 2.0 * np.arange(d) / (d - 1)) * z**2, axis=1)
    return 0.1 * np.maximum(np.abs(zhat[:, 0]) / 1e4, body) + _f_pen(X)


def _rosenbrock_body(z):
    return np.sum(100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2, axis=1)


def _rosenbrock(X, p):
    c = max(1.0, np.sqrt(p.dimension) / 8.0)
    return _rosenbrock_body(c * (X - p.x_opt) + 1.0)


def _rosenbrock_rotated(X, p):
    c = max(1.0, np.sqrt(p.dimension) / 8.0)
    return _rosenbrock_body(c * _rot(X - p.x_opt, p.rotation) + 1.0)


def _ellipsoid_rotated(X, p):
    d = p.dimension
    z = _t_osz(_rot(X - p.x_opt, p.rotation))
    return np.sum(np.power(10.0, 6.0 * np.arange(d) / (d - 1)) * z**2, axis=1)


def _discus(X, p):
    z = _t_osz(_rot(X - p.x_opt, p.rotation))
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def _bent_cigar(X, p):
    z = _rot(_t_asy(_rot(X - p.x_opt, p.rotation), 0.5), p.rotation)
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _sharp_ridge(X, p):
    d = p.dimension
    z = _rot(_lambda_diag(10.0, d) * _rot(X - p.x_opt, p.rotation), p.rotation_q)
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))


def _different_powers(X, p):
    d = p.dimension
    z = _rot(X - p.x_opt, p.rotation)
    return np.sqrt(np.sum(np.power(np.abs(z), 2.0 + 4.0 * np.arange(d) / (d - 1)), axis=1))


def _rastrigin_rotated(X, p):
    d = p.dimension
    z = _t_asy(_t_osz(_rot(X - p.x_opt, p.rotation)), 0.2)
    z = _rot(_lambda_diag(10.0, d) * _rot(z, p.rotation_q), p.rotation)
    return _rastrigin_body(z)


_WEIER_K = np.arange(12)
_WEIER_A = 0.5**_WEIER_K
_WEIER_B = 3.0**_WEIER_K
_WEIER_F0 = float(np.sum(_WEIER_A * np.cos(np.pi * _WEIER_B)))


def _weierstrass(X, p):
    d = p.dimension
    z = _t_osz(_rot(X - p.x_opt, p.rotation))
    z = _rot(_lambda_diag(0.01, d) * _rot(z, p.rotation_q), p.rotation)
    terms = _WEIER_A * np.cos(2 * np.pi * _WEIER_B * (z[..., None] + 0.5))
    # subtract the per-coordinate optimum value before summing to keep f(x_opt) exact
    inner = np.sum(np.sum(terms, axis=2) - _WEIER_F0, axis=1) / d
    return 10.0 * inner**3 + 10.0 / d * _f_pen(X)


def _schaffers(X, p, cond):
    d = p.dimension
    z = _t_asy(_rot(X - p.x_opt, p.rotation), 0.5)
    z = _lambda_diag(cond, d) * _rot(z, p.rotation_q)
    s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    body = np.sum(np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * np.power(s, 0.2)) ** 2, axis=1)
    return (body / (d - 1)) ** 2 + 10.0 * _f_pen(X)


def _griewank_rosenbrock(X, p):
    d = p.dimension
    c = max(1.0, np.sqrt(d) / 8.0)
    z = c * _rot(X - p.x_opt, p.rotation) + 1.0
    s = 100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2
    return 10.0 / (d - 1) * np.sum(s / 4000.0 - np.cos(s), axis=1) + 10.0


def _schwefel_term(z):
    return z * np.sin(np.sqrt(np.abs(z)))


_SCHWEFEL_CONST = float(_schwefel_term(np.array(100.0 * _SCHWEFEL_OPT)) / 100.0)


def _schwefel(X, p):
    d = p.dimension
    signs = np.sign(p.x_opt)
    two_abs = 2.0 * np.abs(p.x_opt)
    xhat = 2.0 * signs * X
    zhat = xhat.copy()
    zhat[:, 1:] += 0.25 * (xhat[:, :-1] - two_abs[:-1])
    z = 100.0 * (_lambda_diag(10.0, d) * (zhat - two_abs) + two_abs)
    return -np.sum(_schwefel_term(z), axis=1) / (100.0 * d) + _SCHWEFEL_CONST + 100.0 * _f_pen(
        z / 100.0
    )


def _gallagher(X, p):
    d = p.dimension
    R = p.rotation
    w = np.concatenate([[10.0], 1.1 + 8.0 * np.arange(p.peaks.shape[0] - 1) / (p.peaks.shape[0] - 2)])
    # (n, peaks, d) in the rotated frame
    diff = _rot(X[:, None, :] - p.peaks[None, :, :], R)
    quad = np.sum(diff**2 * p.peak_conditioning[None, :, :], axis=2)
    best = np.max(w * np.exp(-quad / (2.0 * d)), axis=1)
    return _t_osz(10.0 - best) ** 2 + _f_pen(X)


_KATSUURA_POW = 2.0 ** np.arange(1, 33)


def _katsuura(X, p):
    d = p.dimension
    z = _rot(_lambda_diag(100.0, d) * _rot(X - p.x_opt, p.rotation), p.rotation_q)
    scaled = z[..., None] * _KATSUURA_POW
    inner = np.sum(np.abs(scaled - np.round(scaled)) / _KATSUURA_POW, axis=2)
    factors = np.power(1.0 + np.arange(1, d + 1) * inner, 10.0 / d**1.2)
    return 10.0 / d**2 * np.prod(factors, axis=1) - 10.0 / d**2 + _f_pen(X)


def _lunacek(X, p):
    d = p.dimension
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((mu0**2 - 1.0) / s)
    xhat = 2.0 * np.sign(p.x_opt) * X
    z = _rot(_lambda_diag(100.0, d) * _rot(xhat - mu0, p.rotation), p.rotation_q)
    s1 = np.sum((xhat - mu0) ** 2, axis=1)
    s2 = d + s * np.sum((xhat - mu1) ** 2, axis=1)
    return np.minimum(s1, s2) + 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + 1e4 * _f_pen(X)


_BODIES = {
    1: _sphere,
    2: _ellipsoid,
    3: _rastrigin,
    4: _buche_rastrigin,
    5: _linear_slope,
    6: _attractive_sector,
    7: _step_ellipsoid,
    8: _rosenbrock,
    9: _rosenbrock_rotated,
    10: _ellipsoid_rotated,
    11: _discus,
    12: _bent_cigar,
    13: _sharp_ridge,
    14: _different_powers,
    15: _rastrigin_rotated,
    16: _weierstrass,
    17: lambda X, p: _schaffers(X, p, 10.0),
    18: lambda X, p: _schaffers(X, p, 1000.0),
    19: _griewank_rosenbrock,
    20: _schwefel,
    21: _gallagher,
    22: _gallagher,
    23: _katsuura,
    24: _lunacek,
}


def evaluate_batch(instance: ProblemInstance, X) -> np.ndarray:
    """Evaluate every row of ``X`` (shape ``(n, d)``); returns ``n`` values."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != instance.dimension:
        raise ValueError(
            f"expected points of dimension {instance.dimension}, got array of shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("points must have finite coordinates")
    return _BODIES[instance.function_id](X, instance) + instance.f_opt


def evaluate(instance: ProblemInstance, x) -> float:
    """Objective value of a single point ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    return float(evaluate_batch(instance, x[None, :])[0])


def instance_catalog(instances) -> list[dict]:
    return [inst.to_dict() for inst in instances]


def catalog_to_json(instances) -> str:
    """JSON catalog of instances for reproducibility audits."""
    return json.dumps(instance_catalog(instances), indent=1)

"""Two-parameter Mittag-Leffler functions and derived kernels.

Evaluates the scalar and matrix series

    E_{alpha,beta}(z) = sum_{k>=0} z^k / Gamma(k*alpha + beta),

the alpha-exponential matrix  t^(alpha-1) E_{alpha,alpha}(A t^alpha)  that
plays the role of the matrix exponential in fractional variation-of-constants
formulas, the fractional sine/cosine series of rotation-type systems, and the
pointwise inverse kernel g(t) = t^(1-alpha) E_{alpha,alpha}(A t^alpha)^(-1).

Scalar series are summed in compensated double-double arithmetic because the
alternating terms at strongly negative arguments can exceed the limit by many
orders of magnitude (e.g. the terms of E_{1,1}(-10) peak near 2.8e3 while the
sum is 4.5e-5); plain double summation would lose up to eight digits there.
Matrix series are summed in ordinary doubles, which is adequate at desk scale
(series argument max-norms up to roughly 20).

All functions are pure; the only shared state is an append-only table of
reciprocal-gamma values, so concurrent callers are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rgamma as _rgamma

from . import _ddarith as dd
from .errors import DomainError, InvalidParams, NonConvergence, SingularKernel

__all__ = [
    "MLParams",
    "SeriesPolicy",
    "DEFAULT_POLICY",
    "ml_scalar",
    "ml_matrix",
    "ml_matrix_batch",
    "alpha_exp",
    "state_transition",
    "frac_sin",
    "frac_cos",
    "cl_truncation",
    "inverse_kernel",
]


@dataclass(frozen=True)
class MLParams:
    """Order pair (alpha, beta) of the two-parameter Mittag-Leffler function.

    Both parameters must be positive for the defining series to make sense.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0) or not (self.beta > 0.0):
            raise InvalidParams(
                f"Mittag-Leffler parameters must be positive, got "
                f"alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(frozen=True)
class SeriesPolicy:
    """Truncation control for all series evaluations.

    Summation stops once the next term's magnitude (max-norm for matrices)
    drops below ``rel_tol`` times the partial sum's magnitude, or below
    ``rel_tol`` absolutely while the partial sum is zero.  ``NonConvergence``
    is raised if that never happens within ``max_terms`` terms.
    """

    rel_tol: float = 1e-14
    max_terms: int = 500

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise InvalidParams(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 1:
            raise InvalidParams(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_POLICY = SeriesPolicy()

# reciprocal-gamma tables for the double-double scalar path, keyed by
# (alpha, beta); each value is an append-only list indexed by the term k
_RGAMMA_DD: dict = {}


def _rgamma_dd_table(alpha: float, beta: float, upto: int):
    table = _RGAMMA_DD.setdefault((alpha, beta), [])
    while len(table) <= upto:
        k = len(table)
        ka = dd.two_prod(float(k), alpha)
        table.append(dd.rgamma(dd.add(ka, (beta, 0.0))))
    return table


def ml_scalar(params: MLParams, z: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Evaluate E_{alpha,beta}(z) by direct series summation.

    Intended for desk-scale arguments; far outside that range the stopping
    rule cannot fire within ``policy.max_terms`` and ``NonConvergence`` is
    raised (asymptotic large-argument algorithms are out of scope).
    """
    z = float(z)
    table = _rgamma_dd_table(params.alpha, params.beta, policy.max_terms)
    total = table[0]
    zp = (1.0, 0.0)
    zdd = (z, 0.0)
    for k in range(1, policy.max_terms + 1):
        zp = dd.mul(zp, zdd)
        if not np.isfinite(zp[0]):
            raise NonConvergence(
                f"E_{{{params.alpha},{params.beta}}}({z}): series terms overflow"
            )
        term = dd.mul(zp, table[k])
        ref = abs(dd.to_float(total))
        mag = abs(dd.to_float(term))
        if (ref > 0.0 and mag < policy.rel_tol * ref) or (ref == 0.0 and mag < policy.rel_tol):
            return dd.to_float(total)
        total = dd.add(total, term)
    raise NonConvergence(
        f"E_{{{params.alpha},{params.beta}}}({z}): no convergence in "
        f"{policy.max_terms} terms"
    )


def ml_matrix(params: MLParams, M: np.ndarray, policy: SeriesPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Evaluate the matrix series E_{alpha,beta}(M) = sum_k M^k / Gamma(k*alpha+beta).

    The scalar argument is absorbed into ``M`` (pass ``A * t**alpha`` to get
    E_{alpha,beta}(A t^alpha)).
    """
    M = _as_square(M)
    n = M.shape[0]
    total = np.zeros((n, n))
    P = np.eye(n)
    for k in range(policy.max_terms + 1):
        term = P * _rgamma(k * params.alpha + params.beta)
        tnorm = np.abs(term).max()
        ref = np.abs(total).max()
        if (ref > 0.0 and tnorm < policy.rel_tol * ref) or (ref == 0.0 and k > 0 and tnorm < policy.rel_tol):
            return total
        total += term
        P = P @ M
        if not np.isfinite(P).all():
            raise NonConvergence("ml_matrix: series terms overflow")
    raise NonConvergence(f"ml_matrix: no convergence in {policy.max_terms} terms")


def ml_matrix_batch(
    A: np.ndarray,
    alpha: float,
    beta: float,
    s: np.ndarray,
    policy: SeriesPolicy = DEFAULT_POLICY,
) -> np.ndarray:
    """E_{alpha,beta}(A s^alpha) for a whole array of scale factors s >= 0.

    Returns an array of shape ``s.shape + A.shape``.  Shared truncation: the
    series stops when the next term is negligible across every s, which keeps
    the result a smooth function of s.  This is the workhorse behind
    trajectory kernels and Gramian integrands.
    """
    A = _as_square(A)
    s = np.asarray(s, float)
    if (s < 0).any():
        raise DomainError("ml_matrix_batch requires s >= 0")
    n = A.shape[0]
    out = np.zeros(s.shape + (n, n))
    P = np.eye(n)
    spow = np.ones_like(s)
    sa = s**alpha
    ref = 0.0
    for k in range(policy.max_terms + 1):
        term = np.multiply.outer(spow * _rgamma(k * alpha + beta), P)
        tnorm = np.abs(term).max()
        if ref > 0.0 and tnorm < policy.rel_tol * ref:
            return out
        out += term
        ref = max(ref, np.abs(out).max())
        P = P @ A
        spow = spow * sa
        if not (np.isfinite(P).all() and np.isfinite(spow).all()):
            raise NonConvergence("ml_matrix_batch: series terms overflow")
        if np.abs(P).max() == 0.0:
            return out  # nilpotent: series is exact
    raise NonConvergence(f"ml_matrix_batch: no convergence in {policy.max_terms} terms")


def alpha_exp(
    A: np.ndarray, alpha: float, t: float, policy: SeriesPolicy = DEFAULT_POLICY
) -> np.ndarray:
    """The alpha-exponential matrix  t^(alpha-1) E_{alpha,alpha}(A t^alpha).

    Singular at t = 0 for alpha < 1 (the prefactor blows up); at alpha = 1 it
    is the classical matrix exponential and t = 0 returns the identity.
    """
    A = _as_square(A)
    _check_order(alpha)
    if t < 0.0 or (t == 0.0 and alpha < 1.0):
        raise DomainError(f"alpha_exp undefined at t={t} for alpha={alpha}")
    if t == 0.0:
        return np.eye(A.shape[0])
    return t ** (alpha - 1.0) * ml_matrix(MLParams(alpha, alpha), A * t**alpha, policy)


def state_transition(
    A: np.ndarray, alpha: float, t: float, policy: SeriesPolicy = DEFAULT_POLICY
) -> np.ndarray:
    """E_{alpha,1}(A t^alpha): maps an initial state to the free response at t.

    Equals the identity exactly at t = 0.
    """
    A = _as_square(A)
    _check_order(alpha)
    if t < 0.0:
        raise DomainError(f"state_transition requires t >= 0, got {t}")
    return ml_matrix(MLParams(alpha, 1.0), A * t**alpha, policy)


def frac_sin(alpha: float, t: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Fractional sine sum_k (-1)^k t^(2(k+1)alpha-1) / Gamma(2(k+1)alpha).

    Equals t^(2 alpha - 1) E_{2 alpha, 2 alpha}(-t^(2 alpha)); reduces to
    exp(-t) at alpha = 1/2 and to sin(t) at alpha = 1.
    """
    _check_order(alpha)
    if t <= 0.0:
        raise DomainError(f"frac_sin requires t > 0, got {t}")
    z = t ** (2.0 * alpha)
    return t ** (2.0 * alpha - 1.0) * ml_scalar(MLParams(2.0 * alpha, 2.0 * alpha), -z, policy)


def frac_cos(alpha: float, t: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Fractional cosine sum_k (-1)^k t^((2k+1)alpha-1) / Gamma((2k+1)alpha).

    Equals t^(alpha-1) E_{2 alpha, alpha}(-t^(2 alpha)); behaves like
    1/sqrt(pi t) for small t at alpha = 1/2 and reduces to cos(t) at alpha = 1.
    """
    _check_order(alpha)
    if t <= 0.0:
        raise DomainError(f"frac_cos requires t > 0, got {t}")
    z = t ** (2.0 * alpha)
    return t ** (alpha - 1.0) * ml_scalar(MLParams(2.0 * alpha, alpha), -z, policy)


def cl_truncation(L: int, t: float) -> float:
    """L-term truncation c_L(t) = (pi t)^(-1/2) (1 - sum_{k=1}^L 2^k t^(2k-1) / prod_{i<=k}(2i-1)).

    Literal transcription of the printed truncation of the alpha = 1/2
    fractional cosine.  Note the printed general term does not match the
    exact series beyond k = 1 (the exact expansion carries t^k with
    alternating signs, not t^(2k-1) with fixed sign); this routine exists
    only to reproduce the published truncation-energy table and must not be
    used as a cosine approximation.
    """
    if L < 1:
        raise DomainError(f"cl_truncation requires L >= 1, got {L}")
    if t <= 0.0:
        raise DomainError(f"cl_truncation requires t > 0, got {t}")
    acc = 1.0
    prod = 1.0
    for k in range(1, L + 1):
        prod *= 2 * k - 1
        acc -= 2.0**k * t ** (2 * k - 1) / prod
    return acc / np.sqrt(np.pi * t)


def inverse_kernel(
    A: np.ndarray,
    alpha: float,
    t: float,
    policy: SeriesPolicy = DEFAULT_POLICY,
    rcond_threshold: float = 1e-12,
) -> np.ndarray:
    """The unique g(t) = t^(1-alpha) E_{alpha,alpha}(A t^alpha)^(-1) with
    alpha_exp(A, alpha, t) @ g(t) = I for t > 0.

    Raises ``SingularKernel`` when the Mittag-Leffler matrix is numerically
    singular at t (its one-norm reciprocal condition estimate falls below
    ``rcond_threshold``); existence pointwise does not guarantee good
    conditioning at every t.
    """
    A = _as_square(A)
    _check_order(alpha)
    if t <= 0.0:
        raise DomainError(f"inverse_kernel requires t > 0, got {t}")
    E = ml_matrix(MLParams(alpha, alpha), A * t**alpha, policy)
    try:
        Einv = np.linalg.inv(E)
    except np.linalg.LinAlgError as exc:
        raise SingularKernel(f"Mittag-Leffler matrix singular at t={t}") from exc
    rcond = 1.0 / (_norm1(E) * _norm1(Einv))
    if rcond < rcond_threshold:
        raise SingularKernel(
            f"Mittag-Leffler matrix ill-conditioned at t={t} (rcond~{rcond:.2e})"
        )
    return t ** (1.0 - alpha) * Einv


def _norm1(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=0).max())


def _as_square(M: np.ndarray) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParams(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise InvalidParams("matrix entries must be finite")
    return M


def _check_order(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise InvalidParams(f"order must lie in (0, 1], got {alpha}")

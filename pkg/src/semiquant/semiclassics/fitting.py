"""Least-squares extraction of asymptotic coefficients from p-sweeps."""
from dataclasses import dataclass

import numpy as np


class IllConditionedFitError(np.linalg.LinAlgError):
    """The oscillatory design matrix is (numerically) rank deficient."""


@dataclass(frozen=True)
class ModelTerm:
    """Basis function ``p^alpha e^{-2 pi i p lam} p^{-r}``."""

    alpha: float = 0.0
    lam: float = 0.0
    r: int = 0
    label: str = ""

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return p ** (self.alpha - self.r) * np.exp(-2j * np.pi * p * self.lam)


@dataclass
class ExpansionFit:
    """Result of :func:`fit_expansion`."""

    ps: np.ndarray
    values: np.ndarray
    terms: list
    coeffs: np.ndarray
    residual: float
    condition: float

    def coefficient(self, label):
        for term, c in zip(self.terms, self.coeffs):
            if term.label == label:
                return complex(c)
        raise KeyError(label)

    def model(self, p):
        return sum(c * term(p) for term, c in zip(self.terms, self.coeffs))

    def csv_rows(self):
        for j, (term, c) in enumerate(zip(self.terms, self.coeffs)):
            yield {"term_id": term.label or str(j), "alpha": term.alpha - term.r,
                   "lambda": term.lam, "coeff_re": float(np.real(c)),
                   "coeff_im": float(np.imag(c)), "residual": self.residual}


def fit_expansion(ps, values, terms, cond_max=1e10, min_ratio=2.0):
    """Complex linear least squares of ``values(p)`` on the model ``terms``.

    The design matrix is column-normalized before its condition number is
    checked, so plain power scaling does not count as rank deficiency.

    Raises
    ------
    ValueError
        If there are fewer than ``min_ratio`` times as many samples as terms.
    IllConditionedFitError
        If the normalized design matrix has condition above ``cond_max``.
    """
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=complex)
    need = int(np.ceil(min_ratio * len(terms)))
    if len(ps) < need:
        raise ValueError(f"need at least {need} samples for {len(terms)} terms")
    A = np.column_stack([term(ps) for term in terms])
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise IllConditionedFitError("a model term vanishes on the p-grid")
    An = A / scale
    cond = float(np.linalg.cond(An))
    if not np.isfinite(cond) or cond > cond_max:
        raise IllConditionedFitError(f"design matrix condition {cond:.3e} above {cond_max:.1e}")
    sol, *_ = np.linalg.lstsq(An, values, rcond=None)
    coeffs = sol / scale
    resid = float(np.linalg.norm(A @ coeffs - values) / max(np.linalg.norm(values), 1e-300))
    return ExpansionFit(ps, values, list(terms), coeffs, resid, cond)


@dataclass
class Extrapolation:
    """Limit of ``v(p) = a_0 + a_1/p + ...`` with an error estimate."""

    limit: complex
    error: float
    residual: float
    coeffs: np.ndarray


def richardson(ps, values, order=3):
    """Polynomial extrapolation in ``1/p`` (``order`` correction terms).

    The error estimate is the change of the limit when the model order is
    lowered by one.  At least ``order + 2`` samples are required.
    """
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=complex)

    def fit(k):
        terms = [ModelTerm(r=r) for r in range(k + 1)]
        return fit_expansion(ps, values, terms, cond_max=1e14,
                             min_ratio=(order + 2) / (order + 1))

    hi = fit(order)
    lo = fit(max(order - 1, 0))
    return Extrapolation(complex(hi.coeffs[0]), float(abs(hi.coeffs[0] - lo.coeffs[0])),
                         hi.residual, hi.coeffs)


def decay_exponent(ps, values, floor=0.0):
    """Least-squares slope of ``log|v|`` against ``log p``.

    Values at or below ``floor`` are clamped to it (round-off plateaus only
    make the fitted exponent less negative, never more).
    """
    ps = np.asarray(ps, dtype=float)
    v = np.maximum(np.abs(np.asarray(values)), max(floor, 1e-300))
    slope = np.polyfit(np.log(ps), np.log(v), 1)[0]
    return float(slope)

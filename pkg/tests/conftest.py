import numpy as np
import pytest

from seqoed import casestudy


@pytest.fixture(scope="session")
def model():
    return casestudy.case_study_model()


@pytest.fixture(scope="session")
def noise():
    return casestudy.measurement_noise()


@pytest.fixture(scope="session")
def theta_tot():
    return casestudy.THETA_TOT.as_array()


@pytest.fixture(scope="session")
def tot_data():
    return casestudy.stage_dataset("tot")


def draw_feasible_thetas(model, rng, count, l=0.5, P=2e5):
    """Uniform draws over the parameter box for which the bubble point solves."""
    out = []
    lo, hi = model.param_lower, model.param_upper
    while len(out) < count:
        theta = lo + rng.random(5) * (hi - lo)
        try:
            model.predict((l, P), theta)
        except Exception:
            continue
        out.append(theta)
    return out


def _fraction_matrix(terms):
    """Exact affine combination sum_k c_k M_k of float matrices as Fractions.

    Binary floats convert to rationals without loss, so both the input
    matrices and the combination are represented exactly -- a
    finite-difference oracle built on top of this sees no assembly roundoff
    no matter how ill conditioned the matrices are.
    """
    from fractions import Fraction

    first = terms[0][1]
    n = len(first)
    out = [[Fraction(0) for _ in range(n)] for _ in range(n)]
    for coeff, M in terms:
        c = Fraction(coeff) if not isinstance(coeff, float) else Fraction(coeff)
        for i in range(n):
            row = M[i]
            for j in range(n):
                out[i][j] += c * Fraction(float(row[j]))
    return out


def exact_logdet(M) -> float:
    """Log-determinant through exact rational Gaussian elimination."""
    from fractions import Fraction
    from math import log

    a = M if isinstance(M, list) else [[Fraction(float(v)) for v in row] for row in M]
    a = [list(row) for row in a]
    n = len(a)
    sign = 1
    for k in range(n):
        pivot_row = max(range(k, n), key=lambda r: abs(a[r][k]))
        if a[pivot_row][k] == 0:
            return float("-inf")
        if pivot_row != k:
            a[k], a[pivot_row] = a[pivot_row], a[k]
            sign = -sign
        for r in range(k + 1, n):
            factor = a[r][k] / a[k][k]
            a[r] = [x - factor * y for x, y in zip(a[r], a[k])]
    out = 0.0
    for k in range(n):
        piv = a[k][k]
        if piv < 0:
            sign = -sign
            piv = -piv
        out += log(piv.numerator) - log(piv.denominator)
    if sign < 0:
        return float("nan")
    return out


def exact_trace_inverse(M) -> float:
    """Trace of the inverse through exact rational elimination (solve for
    each unit vector and sum the diagonal entries of the solutions)."""
    from fractions import Fraction

    a = M if isinstance(M, list) else [[Fraction(float(v)) for v in row] for row in M]
    a = [list(row) for row in a]
    n = len(a)
    # exact LU-free Gauss-Jordan on [A | I]
    aug = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for k in range(n):
        pivot_row = max(range(k, n), key=lambda r: abs(aug[r][k]))
        if aug[pivot_row][k] == 0:
            return float("inf")
        aug[k], aug[pivot_row] = aug[pivot_row], aug[k]
        piv = aug[k][k]
        aug[k] = [x / piv for x in aug[k]]
        for r in range(n):
            if r != k and aug[r][k] != 0:
                factor = aug[r][k]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[k])]
    return float(sum(aug[i][n + i] for i in range(n)))

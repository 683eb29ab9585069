"""
Numerically stable scalar kernels.

All functions are vectorised over numpy arrays and accept Python scalars.
"""

import numpy as np

SOFTPLUS_BRANCH = 30.0
LN2 = float(np.log(2.0))

# e^-700 is still a normal double; used as the floor for log-domain products
LOG_FLOOR = -700.0


def softplus(z):
    """ln(1 + e^z); identity above the branch point"""
    z = np.asarray(z, dtype=np.float64)
    small = np.log1p(np.exp(np.minimum(z, SOFTPLUS_BRANCH)))
    return np.where(z > SOFTPLUS_BRANCH, z, small)


def log_sigmoid(z):
    """ln psi(z) = -softplus(-z)"""
    return -softplus(-np.asarray(z, dtype=np.float64))


def sigmoid(z):
    """psi(z) = (1 + tanh(z/2)) / 2, exactly 1/2 at z = 0"""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logit(p):
    """phi(p) = ln(p / (1 - p))"""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide='ignore'):
        return np.log(p) - np.log1p(-p)


def log1mexp(x):
    """ln(1 - e^x) for x <= 0, -inf at x = 0"""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(x > -LN2, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def truncated_log_of_log(log_z, lambda_eps):
    """ln(max(z, eps)) given ln z; passes through when lambda_eps is None"""
    if lambda_eps is None:
        return log_z
    return np.maximum(log_z, np.log(lambda_eps))

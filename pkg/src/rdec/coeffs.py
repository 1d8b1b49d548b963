"""Subtimestep nodes and deferred-correction quadrature coefficients."""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


class NodeFamily(str, Enum):
    """Distribution of the subtimesteps inside the reference interval [0, 1]."""

    EQUISPACED = "equispaced"
    GAUSS_LOBATTO = "gausslobatto"


@dataclass(frozen=True)
class CoefficientSet:
    """Nodes and weights of one DeC order on the unit reference interval.

    Attributes:
        M: Number of subintervals
        family: Node family the nodes were generated from
        nodes: M+1 increasing nodes, nodes[0] = 0 and nodes[M] = 1
        theta: (M, M+1) matrix, row m-1 holds the weights theta_r^m
        beta: M explicit Euler weights, beta[m-1] = nodes[m]
    """

    M: int
    family: NodeFamily
    nodes: np.ndarray
    theta: np.ndarray
    beta: np.ndarray

    @property
    def last_row(self) -> np.ndarray:
        """Weights theta_r^M of the full step."""
        return self.theta[-1]


def make_nodes(M: int, family: NodeFamily = NodeFamily.EQUISPACED) -> np.ndarray:
    """
    Build M+1 subtimestep nodes on [0, 1].

    Gauss-Lobatto nodes are the roots of the derivative of the Legendre
    polynomial of degree M, mapped to [0, 1], plus both endpoints.

    Raises:
        CoefficientError: If M < 1 or the nodes are not strictly increasing
    """
    if int(M) != M or M < 1:
        raise CoefficientError(f"Number of subintervals must be >= 1, got {M}")
    M = int(M)
    family = NodeFamily(family)

    if family is NodeFamily.EQUISPACED:
        nodes = np.linspace(0.0, 1.0, M + 1)
    else:
        interior = legendre.Legendre.basis(M).deriv().roots() if M > 1 else np.empty(0)
        interior = np.sort(np.real(interior))
        nodes = np.concatenate(([-1.0], interior, [1.0]))
        nodes = 0.5 * (nodes + 1.0)
        # symmetric about 1/2
        nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
        nodes[0], nodes[-1] = 0.0, 1.0

    if np.any(np.diff(nodes) <= 0.0):
        raise CoefficientError(f"Nodes are not strictly increasing: {nodes}")
    return nodes


def lagrange_basis(nodes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on `nodes` at `points`, shape (len(points), len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    n = len(nodes)
    values = np.ones((len(points), n))
    for r in range(n):
        for j in range(n):
            if j != r:
                values[:, r] *= (points - nodes[j]) / (nodes[r] - nodes[j])
    return values


def lagrange_basis_derivative(nodes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """First derivatives of the Lagrange basis on `nodes` at `points`."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    n = len(nodes)
    derivs = np.zeros((len(points), n))
    for r in range(n):
        for k in range(n):
            if k == r:
                continue
            term = np.full(len(points), 1.0 / (nodes[r] - nodes[k]))
            for j in range(n):
                if j != r and j != k:
                    term *= (points - nodes[j]) / (nodes[r] - nodes[j])
            derivs[:, r] += term
    return derivs


def equispaced_theta(M: int) -> np.ndarray:
    """theta on the nodes m/M, integrated in exact rational arithmetic."""
    nodes = [Fraction(m, M) for m in range(M + 1)]
    theta = np.zeros((M, M + 1))
    for r in range(M + 1):
        # monomial coefficients of phi_r, lowest degree first
        poly = [Fraction(1)]
        for j in range(M + 1):
            if j == r:
                continue
            scale = nodes[r] - nodes[j]
            shifted = [Fraction(0)] + poly
            for k, c in enumerate(poly):
                shifted[k] -= nodes[j] * c
            poly = [c / scale for c in shifted]
        for m in range(1, M + 1):
            upper = nodes[m]
            integral = sum(c * upper ** (k + 1) / (k + 1) for k, c in enumerate(poly))
            theta[m - 1, r] = float(integral)
    return theta


@lru_cache(maxsize=None)
def make_coefficients(M: int, family: NodeFamily = NodeFamily.EQUISPACED) -> CoefficientSet:
    """
    Compute theta_r^m = int_0^{nodes[m]} phi_r(s) ds for the Lagrange basis phi_r.

    Equispaced weights are exact rationals rounded once. Gauss-Lobatto
    weights use a Gauss-Legendre rule exact to degree 2M+1, so the
    integration of the degree-M basis is exact up to round-off.

    Args:
        M: Number of subintervals (order M+1 with K = M+1 corrections)
        family: Node family

    Returns:
        Read-only CoefficientSet
    """
    family = NodeFamily(family)
    nodes = make_nodes(M, family)
    if family is NodeFamily.EQUISPACED:
        theta = equispaced_theta(M)
    else:
        gauss_x, gauss_w = legendre.leggauss(M + 1)
        theta = np.zeros((M, M + 1))
        for m in range(1, M + 1):
            upper = nodes[m]
            points = 0.5 * upper * (gauss_x + 1.0)
            weights = 0.5 * upper * gauss_w
            theta[m - 1] = weights @ lagrange_basis(nodes, points)

    beta = nodes[1:].copy()
    for array in (nodes, theta, beta):
        array.flags.writeable = False
    return CoefficientSet(M=M, family=family, nodes=nodes, theta=theta, beta=beta)


class CoefficientError(ValueError):
    """Raised when a node distribution or coefficient set cannot be built."""
    pass

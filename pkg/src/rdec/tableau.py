"""Explicit Butcher tableaux, the DeC-to-RK conversion and the Shu-Osher form."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .coeffs import NodeFamily, make_coefficients


@dataclass(frozen=True)
class ButcherTableau:
    """
    An explicit Runge-Kutta method.

    Attributes:
        A: (s, s) strictly lower triangular stage matrix
        b: s quadrature weights, summing to one
        c: s stage nodes, c[i] = sum_j A[i, j]
        name: Label used in output files
        order: Nominal order of accuracy
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""
    order: Optional[int] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = len(b)
        if A.shape != (s, s) or c.shape != (s,):
            raise TableauError(f"Inconsistent tableau shapes: A{A.shape}, b({s},), c{c.shape}")
        if np.any(np.triu(A) != 0.0):
            raise TableauError("Stage matrix is not strictly lower triangular")
        scale = max(1.0, float(np.max(np.abs(A))))
        if abs(b.sum() - 1.0) > 1e-12 * max(1.0, float(np.abs(b).sum())):
            raise TableauError(f"Weights sum to {b.sum()!r}, expected 1")
        if np.max(np.abs(A.sum(axis=1) - c), initial=0.0) > 1e-12 * scale:
            raise TableauError("Stage nodes do not match the row sums of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class ShuOsherForm:
    """
    Shu-Osher representation of an explicit RK method.

    u_0 = y_n, u_i = sum_k alpha[i, k] u_k + dt sum_k beta[i, k] f(u_k) for i = 1..s,
    and y_{n+1} = u_s. Both arrays have shape (s+1, s).
    """

    alpha: np.ndarray
    beta: np.ndarray
    name: str = ""

    @property
    def stages(self) -> int:
        return self.alpha.shape[1]


@dataclass
class RkStage:
    """Stage values and derivatives of one RK step."""

    stages: np.ndarray
    derivatives: np.ndarray
    y_next: np.ndarray = field(repr=False)


def _from_fractions(A, b, name: str, order: int) -> ButcherTableau:
    A = np.array([[float(x) for x in row] for row in A])
    b = np.array([float(x) for x in b])
    return ButcherTableau(A=A, b=b, c=A.sum(axis=1), name=name, order=order)


def ssprk22() -> ButcherTableau:
    """Two-stage second-order SSP method (Heun)."""
    return _from_fractions([[0, 0], [1, 0]], [Fraction(1, 2), Fraction(1, 2)], "SSPRK22", 2)


def ssprk33() -> ButcherTableau:
    """Three-stage third-order SSP method."""
    q = Fraction(1, 4)
    return _from_fractions(
        [[0, 0, 0], [1, 0, 0], [q, q, 0]],
        [Fraction(1, 6), Fraction(1, 6), Fraction(2, 3)],
        "SSPRK33",
        3,
    )


def rk44() -> ButcherTableau:
    """Classical four-stage fourth-order method."""
    h = Fraction(1, 2)
    return _from_fractions(
        [[0, 0, 0, 0], [h, 0, 0, 0], [0, h, 0, 0], [0, 0, 1, 0]],
        [Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6)],
        "RK44",
        4,
    )


NAMED_TABLEAUX: dict[str, Callable[[], ButcherTableau]] = {
    "ssprk22": ssprk22,
    "ssprk33": ssprk33,
    "rk44": rk44,
}


def named_tableau(name: str) -> ButcherTableau:
    """
    Look up one of the reference methods by name (case-insensitive).

    Raises:
        TableauError: If the name is unknown
    """
    try:
        return NAMED_TABLEAUX[name.lower()]()
    except KeyError:
        known = ", ".join(sorted(NAMED_TABLEAUX))
        raise TableauError(f"Unknown Runge-Kutta method '{name}' (known: {known})") from None


def dec_to_butcher(
    M: int, K: Optional[int] = None, family: NodeFamily = NodeFamily.EQUISPACED
) -> ButcherTableau:
    """
    Rewrite a DeC method as an explicit RK method with 1 + M(K-1) stages.

    Stage 0 is y_n. Stages of the first block are the explicit Euler
    predictions at the subtimesteps; block k >= 2 applies theta^m to
    stage 0 and to the stages of block k-1. The final correction only
    updates the last subtimestep, which gives the weights b.

    Args:
        M: Number of subintervals
        K: Number of corrections, defaults to M+1
        family: Node family

    Returns:
        ButcherTableau of order min(K, M+1)

    Raises:
        TableauError: If K < 1
    """
    K = M + 1 if K is None else K
    if K < 1:
        raise TableauError(f"Number of corrections must be >= 1, got {K}")
    coeffs = make_coefficients(M, family)
    name = f"DeC{min(K, M + 1)}"

    if K == 1:
        return ButcherTableau(A=np.zeros((1, 1)), b=np.ones(1), c=np.zeros(1), name=name, order=1)

    s = 1 + M * (K - 1)
    A = np.zeros((s, s))
    # block 1: explicit Euler to each subtimestep
    A[1 : M + 1, 0] = coeffs.beta
    for k in range(2, K):
        rows = slice(1 + (k - 1) * M, 1 + k * M)
        prev = slice(1 + (k - 2) * M, 1 + (k - 1) * M)
        A[rows, 0] = coeffs.theta[:, 0]
        A[rows, prev] = coeffs.theta[:, 1:]

    b = np.zeros(s)
    b[0] = coeffs.last_row[0]
    b[s - M :] = coeffs.last_row[1:]
    c = np.concatenate(([0.0], np.tile(coeffs.nodes[1:], K - 1)))
    return ButcherTableau(A=A, b=b, c=c, name=name, order=min(K, M + 1))


def to_shu_osher(tableau: ButcherTableau) -> ShuOsherForm:
    """
    Shu-Osher form with alpha = [0; 1 0 ... 0] and beta = [A; b].

    Rows 1..s of alpha put all weight on u_0 = y_n, so every stage reads
    u_i = y_n + dt sum_k beta[i, k] f(u_k).
    """
    s = tableau.stages
    alpha = np.zeros((s + 1, s))
    alpha[1:, 0] = 1.0
    beta = np.vstack((tableau.A, tableau.b))
    return ShuOsherForm(alpha=alpha, beta=beta, name=tableau.name)


def rk_step(
    tableau: ButcherTableau,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    y: np.ndarray,
    dt: float,
) -> RkStage:
    """
    Advance one explicit RK step and keep the stages.

    Returns:
        RkStage with the (s, dim) stage values, their derivatives and y_{n+1}
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = tableau.stages
    stages = np.empty((s, y.size))
    derivs = np.empty((s, y.size))
    for i in range(s):
        stages[i] = y + dt * (tableau.A[i, :i] @ derivs[:i]) if i else y
        derivs[i] = rhs(t + tableau.c[i] * dt, stages[i])
    y_next = y + dt * (tableau.b @ derivs)
    return RkStage(stages=stages, derivatives=derivs, y_next=y_next)


def shu_osher_step(
    form: ShuOsherForm,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    y: np.ndarray,
    dt: float,
    c: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Advance one step written in Shu-Osher form; `c` gives the stage times."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = form.stages
    c = np.zeros(s) if c is None else np.asarray(c, dtype=float)
    u = np.empty((s + 1, y.size))
    f = np.empty((s, y.size))
    u[0] = y
    for i in range(1, s + 1):
        f[i - 1] = rhs(t + c[i - 1] * dt, u[i - 1])
        u[i] = form.alpha[i, :i] @ u[:i] + dt * (form.beta[i, :i] @ f[:i])
    return u[s]


def format_tableau(tableau: ButcherTableau, digits: int = 6) -> str:
    """Render c | A over b as aligned text."""
    width = digits + 7
    fmt = f"{{:>{width}.{digits}g}}"
    lines = [f"{tableau.name} ({tableau.stages} stages)"]
    for i in range(tableau.stages):
        row = "".join(fmt.format(x) for x in tableau.A[i])
        lines.append(f"{fmt.format(tableau.c[i])} |{row}")
    lines.append(" " * width + "-+" + "-" * (width * tableau.stages))
    lines.append(" " * width + " |" + "".join(fmt.format(x) for x in tableau.b))
    return "\n".join(lines)


class TableauError(ValueError):
    """Raised for malformed or unknown Butcher tableaux."""
    pass

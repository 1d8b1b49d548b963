"""
Residual distribution on periodic 1D meshes with Gauss-Lobatto Lagrange elements.

DOFs are shared at element interfaces and the two ends of [0, 2] are
identified, so a mesh of n_elem elements of degree p carries n_elem*p
unknowns. Element residuals are Galerkin residuals, optionally made
entropy conservative by a correction term, plus an optional jump
stabilization on the derivative at the interfaces.

With `lumped_mass` the mesh uses cubature elements: quadrature collocated
at the Gauss-Lobatto DOFs makes the mass matrix equal to its lumped
diagonal D. The consistent mass matrix is the alternative.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from .coeffs import (
    NodeFamily,
    lagrange_basis,
    lagrange_basis_derivative,
    make_coefficients,
    make_nodes,
)
from .dec import DecConfig, RelaxationMode, march
from .debug import log_debug
from .models import Trajectory
from .relax import EPS, GammaResult, RelaxationError, gamma_energy_from_direction

# Degeneracy threshold of the entropy correction
CORRECTION_EPS = 1e-24

# Bound on dt times the largest jump-term eigenvalue, inside the real
# stability interval of every DeC order
JUMP_STABILITY = 1.8

# Largest system solved densely for the jump stiffness
DENSE_EIG_LIMIT = 2048


class CorrectionMode(str, Enum):
    NONE = "none"
    CONSERVATIVE = "conservative"
    CONSERVATIVE_PLUS_JUMP = "conservative+jump"


class RdRelaxation(str, Enum):
    """
    Target of the RD relaxation.

    CONSERVATIVE keeps the W-norm, DISSIPATIVE follows the semidiscrete
    production and APPENDIX solves the global quadratic built from the
    mass-lumping split of the last update.
    """

    CONSERVATIVE = "conservative"
    DISSIPATIVE = "dissipative"
    APPENDIX = "appendix"


@dataclass(frozen=True)
class RdMesh:
    """
    Uniform periodic mesh of [x0, x0 + length].

    Attributes:
        n_elem: Number of elements
        p: Polynomial degree
        h: Element size
        vertices: n_elem+1 element boundaries
        ref_nodes: p+1 Gauss-Lobatto nodes on [0, 1]
        connectivity: (n_elem, p+1) global DOF indices
        dof_coords: Coordinates of the n_elem*p DOFs
    """

    n_elem: int
    p: int
    length: float = 2.0
    x0: float = 0.0
    h: float = field(init=False)
    vertices: np.ndarray = field(init=False, repr=False)
    ref_nodes: np.ndarray = field(init=False, repr=False)
    connectivity: np.ndarray = field(init=False, repr=False)
    dof_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_elem < 2 or self.p < 1:
            raise RdError(f"Need at least 2 elements and p >= 1, got {self.n_elem} and {self.p}")
        h = self.length / self.n_elem
        vertices = self.x0 + h * np.arange(self.n_elem + 1)
        ref_nodes = make_nodes(self.p, NodeFamily.GAUSS_LOBATTO)
        n_dofs = self.n_elem * self.p
        connectivity = (self.p * np.arange(self.n_elem)[:, None] + np.arange(self.p + 1)) % n_dofs
        coords = (vertices[:-1, None] + h * ref_nodes[None, :-1]).ravel()
        for name, value in (
            ("h", h),
            ("vertices", vertices),
            ("ref_nodes", ref_nodes),
            ("connectivity", connectivity),
            ("dof_coords", coords),
        ):
            object.__setattr__(self, name, value)

    @property
    def n_dofs(self) -> int:
        return self.n_elem * self.p


@dataclass(frozen=True)
class RdOperatorSet:
    """
    Discrete operators of one mesh.

    Attributes:
        mass: Consistent mass matrix (or diag(lumped) when lumped_mass is set)
        lumped: Lumped mass D_ii = integral of phi_i, all positive
        quad_order: Exactness degree of the element quadrature
        quad_points: Reference quadrature points on [0, 1]
        quad_weights: Reference quadrature weights (sum 1)
        basis: (n_quad, p+1) basis values at the quadrature points
        dbasis: (n_quad, p+1) physical basis derivatives at the quadrature points
        dbasis_left: Physical basis derivatives at the left element end
        dbasis_right: Physical basis derivatives at the right element end
        scatter: Sparse (n_dofs, n_elem*(p+1)) assembly operator
        jump: Sparse (n_elem, n_dofs) map from U to the interface derivative jumps
        lumped_mass: Whether mass was replaced by its lumped diagonal
    """

    mass: sparse.csr_matrix = field(repr=False)
    lumped: np.ndarray = field(repr=False)
    quad_order: int
    quad_points: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    dbasis: np.ndarray = field(repr=False)
    dbasis_left: np.ndarray = field(repr=False)
    dbasis_right: np.ndarray = field(repr=False)
    scatter: sparse.csr_matrix = field(repr=False)
    jump: sparse.csr_matrix = field(repr=False)
    lumped_mass: bool = False

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """<a, b>_D."""
        return float(np.dot(self.lumped * a, b))

    @property
    def weight(self):
        """
        Energy weight W of the relaxation.

        D for cubature elements. With the consistent mass matrix the
        Galerkin residual conserves 1/2 U^T M U, so W = M.
        """
        return self.lumped if self.lumped_mass else self.mass

    def energy(self, u: np.ndarray) -> float:
        """1/2 |u|_W^2."""
        u = np.asarray(u, dtype=float)
        wu = self.lumped * u if self.lumped_mass else self.mass @ u
        return 0.5 * float(np.dot(u, wu))


@dataclass(frozen=True)
class RdResidualConfig:
    """
    Scalar conservation law u_t + F(u)_x = 0 with an entropy pair.

    Attributes:
        flux: F(u)
        flux_derivative: F'(u)
        entropy: eta(u)
        entropy_variable: v(u) = eta'(u)
        entropy_flux: g(u) with g' = v F'
        correction: Entropy correction applied to the element residuals
        nu: Jump stabilization coefficient
        name: Label
    """

    flux: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    flux_derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    entropy: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    entropy_variable: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    entropy_flux: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    correction: CorrectionMode = CorrectionMode.NONE
    nu: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "correction", CorrectionMode(self.correction))
        if not self.nu >= 0.0:
            raise RdError(f"Jump coefficient must be nonnegative, got {self.nu}")
        if self.correction is CorrectionMode.CONSERVATIVE_PLUS_JUMP and self.nu == 0.0:
            raise RdError("conservative+jump correction needs nu > 0")

    def entropy_pair_defect(self, samples: np.ndarray, step: float = 1e-6) -> float:
        """max |g'(u) - v(u) F'(u)| at the samples, g' by central differences."""
        u = np.asarray(samples, dtype=float)
        dg = (self.entropy_flux(u + step) - self.entropy_flux(u - step)) / (2.0 * step)
        return float(np.max(np.abs(dg - self.entropy_variable(u) * self.flux_derivative(u))))


def linear_transport_config(
    a: float = 1.0, correction: CorrectionMode = CorrectionMode.CONSERVATIVE, nu: float = 0.0
) -> RdResidualConfig:
    """u_t + a u_x = 0 with the square entropy."""
    return RdResidualConfig(
        flux=lambda u: a * u,
        flux_derivative=lambda u: a * np.ones_like(u),
        entropy=lambda u: 0.5 * u * u,
        entropy_variable=lambda u: u,
        entropy_flux=lambda u: 0.5 * a * u * u,
        correction=correction,
        nu=nu,
        name=f"transport(a={a:g})",
    )


def burgers_config(
    correction: CorrectionMode = CorrectionMode.CONSERVATIVE, nu: float = 0.0
) -> RdResidualConfig:
    """Burgers u_t + (u^2/2)_x = 0 with the square entropy."""
    return RdResidualConfig(
        flux=lambda u: 0.5 * u * u,
        flux_derivative=lambda u: u,
        entropy=lambda u: 0.5 * u * u,
        entropy_variable=lambda u: u,
        entropy_flux=lambda u: u * u * u / 3.0,
        correction=correction,
        nu=nu,
        name="burgers",
    )


def build_operators(
    mesh: RdMesh, lumped_mass: bool = False, quad_points: Optional[int] = None
) -> RdOperatorSet:
    """
    Assemble mass matrices, reference basis tables and assembly operators.

    The element quadrature is Gauss-Legendre with p+2 points by default,
    exact to degree 2p+3, so the mass matrix is the consistent one.
    lumped_mass selects cubature elements, where M = D.

    Raises:
        RdError: If the quadrature cannot integrate the mass matrix exactly
    """
    p = mesh.p
    nq = p + 2 if quad_points is None else quad_points
    if 2 * nq - 1 < 2 * p:
        raise RdError(f"{nq} quadrature points cannot integrate the degree {p} mass matrix")
    xg, wg = legendre.leggauss(nq)
    xq, wq = 0.5 * (xg + 1.0), 0.5 * wg

    nodes = mesh.ref_nodes
    basis = lagrange_basis(nodes, xq)
    dbasis = lagrange_basis_derivative(nodes, xq) / mesh.h
    ends = lagrange_basis_derivative(nodes, np.array([0.0, 1.0])) / mesh.h

    local_mass = mesh.h * (basis.T * wq) @ basis
    local_lumped = mesh.h * (wq @ basis)

    conn = mesh.connectivity
    n = mesh.n_dofs
    rows = np.repeat(conn, p + 1, axis=1).ravel()
    cols = np.tile(conn, (1, p + 1)).ravel()
    values = np.tile(local_mass.ravel(), mesh.n_elem)
    mass = sparse.coo_matrix((values, (rows, cols)), shape=(n, n)).tocsr()

    lumped = np.zeros(n)
    np.add.at(lumped, conn, np.broadcast_to(local_lumped, conn.shape))
    if np.any(lumped <= 0.0):
        raise RdError("Lumped mass has nonpositive entries")
    if lumped_mass:
        mass = sparse.diags(lumped).tocsr()

    scatter = sparse.coo_matrix(
        (np.ones(conn.size), (conn.ravel(), np.arange(conn.size))), shape=(n, conn.size)
    ).tocsr()

    # interface e sits at the left end of element e; the left side is element e-1
    left_elem = np.roll(np.arange(mesh.n_elem), 1)
    jump_rows = np.repeat(np.arange(mesh.n_elem), 2 * (p + 1))
    jump_cols = np.concatenate((conn[left_elem], conn), axis=1).ravel()
    jump_vals = np.tile(np.concatenate((ends[1], -ends[0])), mesh.n_elem)
    jump = sparse.coo_matrix((jump_vals, (jump_rows, jump_cols)), shape=(mesh.n_elem, n)).tocsr()

    return RdOperatorSet(
        mass=mass,
        lumped=lumped,
        quad_order=2 * nq - 1,
        quad_points=xq,
        quad_weights=wq,
        basis=basis,
        dbasis=dbasis,
        dbasis_left=ends[0],
        dbasis_right=ends[1],
        scatter=scatter,
        jump=jump,
        lumped_mass=lumped_mass,
    )


def entropy_correction_terms(
    residuals: np.ndarray, v_values: np.ndarray, boundary_entropy_flux: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Correction r = alpha (V - mean V) per element and the entropy defect E.

    Works on a single element (1D arrays, scalar flux, scalar E) or on
    stacked elements (rows). E = boundary flux - sum_sigma V_sigma Phi_sigma.

    Raises:
        DegenerateElementError: If V is constant on an element while E is not zero
    """
    phi = np.atleast_2d(np.asarray(residuals, dtype=float))
    v = np.atleast_2d(np.asarray(v_values, dtype=float))
    flux = np.atleast_1d(np.asarray(boundary_entropy_flux, dtype=float))
    if phi.shape != v.shape or phi.shape[1] < 2:
        raise RdError(f"Residuals {phi.shape} and entropy variables {v.shape} do not match")

    defect = flux - np.sum(v * phi, axis=1)
    dv = v - v.mean(axis=1, keepdims=True)
    spread = np.sum(dv * dv, axis=1)
    degenerate = spread <= CORRECTION_EPS * (1.0 + np.max(v * v, axis=1))

    scale = np.abs(flux) + np.sum(np.abs(v * phi), axis=1)
    bad = degenerate & (np.abs(defect) > 1e-10 * (1.0 + scale))
    if np.any(bad):
        elem = int(np.flatnonzero(bad)[0])
        raise DegenerateElementError(
            f"Element {elem} has constant entropy variables but entropy defect {defect[elem]:.3e}"
        )

    alpha = np.where(degenerate, 0.0, defect / np.where(degenerate, 1.0, spread))
    r = alpha[:, None] * dv
    if np.ndim(residuals) == 1:
        return r[0], float(defect[0])
    return r, defect


def entropy_correct(
    residuals: np.ndarray, v_values: np.ndarray, boundary_entropy_flux: np.ndarray
) -> np.ndarray:
    """
    Add the entropy correction to element residuals.

    The result keeps sum_sigma Phi_sigma and satisfies
    sum_sigma V_sigma Phi_sigma = boundary entropy flux on every element.
    """
    r, _ = entropy_correction_terms(residuals, v_values, boundary_entropy_flux)
    return np.asarray(residuals, dtype=float) + r


def element_values(mesh: RdMesh, u: np.ndarray) -> np.ndarray:
    """DOF values gathered per element, shape (n_elem, p+1)."""
    return np.asarray(u, dtype=float)[mesh.connectivity]


def assemble_space_residual(
    mesh: RdMesh, ops: RdOperatorSet, cfg: RdResidualConfig, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Assemble the space residual Phi(u).

    Element residuals are written in the integrated-by-parts form
    phi_s(1) F(u_R) - phi_s(0) F(u_L) - int phi_s' F(u), so that their sum
    is exactly the flux difference across the element for any quadrature.

    Returns:
        (phi, element_residuals): the assembled residual per DOF including
        the jump term, and the (n_elem, p+1) element residuals without it

    Raises:
        RdError: If u is not finite
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_dofs,):
        raise RdError(f"State has shape {u.shape}, expected ({mesh.n_dofs},)")
    if not np.all(np.isfinite(u)):
        raise RdError("Non-finite state in residual assembly")

    ue = element_values(mesh, u)
    uq = ue @ ops.basis.T
    fq = cfg.flux(uq)
    elem = -mesh.h * (fq * ops.quad_weights) @ ops.dbasis
    f_left, f_right = cfg.flux(ue[:, 0]), cfg.flux(ue[:, -1])
    elem[:, 0] -= f_left
    elem[:, -1] += f_right

    if cfg.correction is not CorrectionMode.NONE:
        v = cfg.entropy_variable(ue)
        g_diff = cfg.entropy_flux(ue[:, -1]) - cfg.entropy_flux(ue[:, 0])
        elem = entropy_correct(elem, v, g_diff)

    phi = ops.scatter @ elem.ravel()
    if cfg.nu > 0.0:
        phi = phi + jump_term(mesh, ops, cfg.nu, u)
    return phi, elem


def jump_term(mesh: RdMesh, ops: RdOperatorSet, nu: float, u: np.ndarray) -> np.ndarray:
    """Psi = nu h^2 sum_e [phi']_e [u']_e, assembled per DOF."""
    return nu * mesh.h**2 * (ops.jump.T @ (ops.jump @ u))


def default_jump_coefficient(p: int) -> float:
    """
    nu used by the transport experiments.

    Even degrees need the jump term to damp the mode that alternates
    between vertex and interior DOFs; linear elements only need a little.
    """
    return 0.01 if p == 1 else 0.1


def jump_stiffness(mesh: RdMesh, ops: RdOperatorSet, nu: float) -> float:
    """Largest eigenvalue of D^-1 nu h^2 J^T J, the stiff part of the jump term."""
    if nu <= 0.0:
        return 0.0
    scale = 1.0 / np.sqrt(ops.lumped)
    scaled_jump = ops.jump @ sparse.diags(scale)
    stiff = nu * mesh.h**2 * (scaled_jump.T @ scaled_jump)
    n = mesh.n_dofs
    if n <= DENSE_EIG_LIMIT:
        top = linalg.eigvalsh(stiff.toarray(), subset_by_index=[n - 1, n - 1])
    else:
        top = sparse_linalg.eigsh(stiff.tocsc(), k=1, which="LA", return_eigenvectors=False)
    return float(top[0])


@dataclass
class RdStepResult:
    """
    Outcome of one DeC-RD step.

    Attributes:
        U: State at the end of the step
        gamma: Relaxation coefficient (1 when relaxation is off)
        increment: Unrelaxed increment Delta U
        defects: Max-norm defect of the high-order operator before the first
            and after every full correction sweep, when recorded
        gamma_result: Details of the relaxation solve, if any
    """

    U: np.ndarray
    gamma: float
    increment: np.ndarray = field(repr=False)
    defects: list[float] = field(default_factory=list)
    gamma_result: Optional[GammaResult] = None


def _l2_defect(ops, theta, dt, U0, stages, residuals) -> float:
    mismatch = ops.mass @ (stages[1:] - U0).T + dt * (theta @ residuals).T
    return float(np.max(np.abs(mismatch)))


def rd_dec_step(
    mesh: RdMesh,
    ops: RdOperatorSet,
    cfg: RdResidualConfig,
    dec_cfg: DecConfig,
    U0: np.ndarray,
    dt: float,
    variant: RdRelaxation = RdRelaxation.CONSERVATIVE,
    record_defects: bool = False,
) -> RdStepResult:
    """
    One mass-matrix-free DeC step of the RD semidiscretization.

    Every correction applies
    U^{l,(k)} = U^{l,(k-1)} - D^-1 [M (U^{l,(k-1)} - U^0) + dt sum_r theta_r^l Phi(U^{r,(k-1)})]
    to all subtimesteps, except the last correction which only updates U^M.

    Args:
        mesh: The mesh
        ops: Operators of the mesh
        cfg: Flux, entropy and stabilization
        dec_cfg: DeC settings; relaxation_mode selects whether gamma is applied
        U0: DOF values at the start of the step
        dt: Time step
        variant: Relaxation target
        record_defects: Keep the high-order operator defect of every sweep

    Raises:
        RdError: If dt is not positive or gamma is not positive
    """
    if not dt > 0.0:
        raise RdError(f"Time step must be positive, got {dt}")
    coeffs = make_coefficients(dec_cfg.M, dec_cfg.family)
    theta = coeffs.theta
    dinv = 1.0 / ops.lumped
    U0 = np.asarray(U0, dtype=float)

    def space(U: np.ndarray) -> np.ndarray:
        return assemble_space_residual(mesh, ops, cfg, U)[0]

    stages = np.tile(U0, (dec_cfg.M + 1, 1))
    residuals = np.tile(space(U0), (dec_cfg.M + 1, 1))
    defects = [_l2_defect(ops, theta, dt, U0, stages, residuals)] if record_defects else []

    for _ in range(1, dec_cfg.K):
        mass_part = (ops.mass @ (stages[1:] - U0).T).T
        stages[1:] = stages[1:] - dinv * (mass_part + dt * (theta @ residuals))
        for m in range(1, dec_cfg.M + 1):
            residuals[m] = space(stages[m])
        if record_defects:
            defects.append(_l2_defect(ops, theta, dt, U0, stages, residuals))

    lumping = (stages[-1] - U0) - dinv * (ops.mass @ (stages[-1] - U0))
    explicit = -dt * dinv * (coeffs.last_row @ residuals)
    increment = lumping + explicit

    if dec_cfg.relaxation_mode is RelaxationMode.NONE:
        return RdStepResult(U=U0 + increment, gamma=1.0, increment=increment, defects=defects)

    variant = RdRelaxation(variant)
    if variant is RdRelaxation.APPENDIX:
        terms = appendix_terms(ops, U0, stages[-1], explicit)
        result = rd_gamma_appendix(*terms)
        U_end = U0 + lumping + result.gamma * explicit
    else:
        estimate = 0.0
        if variant is RdRelaxation.DISSIPATIVE:
            # <V(U^r), D^-1 Phi(U^r)>_W for the square entropy
            estimate = dt * float(coeffs.last_row @ np.einsum("ij,ij->i", stages, residuals))
        result = rd_gamma(U0, increment, estimate, ops.weight)
        U_end = U0 + result.gamma * increment

    if not result.gamma > 0.0:
        raise RdError(f"Non-positive relaxation coefficient {result.gamma}")
    return RdStepResult(
        U=U_end, gamma=result.gamma, increment=increment, defects=defects, gamma_result=result
    )


def rd_gamma(U0: np.ndarray, dU: np.ndarray, estimate: float, weight) -> GammaResult:
    """
    Energy relaxation in the W-weighted inner product.

    weight is the diagonal D as a vector, or the consistent mass matrix.
    """
    try:
        return gamma_energy_from_direction(U0, dU, estimate, weight=weight)
    except RelaxationError as e:
        raise RdError(f"RD relaxation failed: {e}") from e


def appendix_terms(
    ops: RdOperatorSet, U0: np.ndarray, UM: np.ndarray, C: np.ndarray
) -> tuple[float, float, float]:
    """
    Scalars of |A + B + gamma C|_W^2 = |U0|_W^2 as D + gamma E + gamma^2 C^2 = 0.

    A = D^-1 M U0 and B = U^M - D^-1 M U^M split the mass-lumping part of the
    update, C is the explicit residual part.
    """
    dinv = 1.0 / ops.lumped
    A = dinv * (ops.mass @ U0)
    B = UM - dinv * (ops.mass @ UM)
    AB = A + B
    D_term = ops.inner(AB, AB) - ops.inner(U0, U0)
    E_term = 2.0 * ops.inner(AB, C)
    Csq_term = ops.inner(C, C)
    return D_term, E_term, Csq_term


def rd_gamma_appendix(D_term: float, E_term: float, Csq_term: float) -> GammaResult:
    """
    Positive root closest to 1 of D + gamma E + gamma^2 C^2 = 0.

    Raises:
        NoPositiveRootError: If no positive real root exists
    """
    if Csq_term <= EPS:
        if E_term == 0.0:
            raise NoPositiveRootError("Linear relaxation equation with vanishing slope")
        gamma = -D_term / E_term
        if not gamma > 0.0:
            raise NoPositiveRootError(f"Linear relaxation root {gamma} is not positive")
        return GammaResult(gamma=gamma)

    disc = E_term * E_term - 4.0 * Csq_term * D_term
    if disc < 0.0:
        raise NoPositiveRootError(
            f"Relaxation quadratic has no real root (discriminant {disc:.3e})"
        )
    q = -0.5 * (E_term + np.copysign(np.sqrt(disc), E_term))
    roots = [q / Csq_term]
    if q != 0.0:
        roots.append(D_term / q)
    positive = [g for g in roots if g > 0.0]
    if not positive:
        raise NoPositiveRootError(f"Relaxation quadratic has no positive root: {roots}")
    return GammaResult(gamma=float(min(positive, key=lambda g: abs(g - 1.0))))


def interpolate(mesh: RdMesh, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolation of fn at the DOFs."""
    return np.asarray(fn(mesh.dof_coords), dtype=float)


def l2_error(
    mesh: RdMesh, ops: RdOperatorSet, U: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]
) -> float:
    """L2 norm of u_h - fn by element quadrature."""
    uq = element_values(mesh, U) @ ops.basis.T
    xq = mesh.vertices[:-1, None] + mesh.h * ops.quad_points[None, :]
    err = uq - fn(xq)
    return float(np.sqrt(mesh.h * np.sum((err * err) @ ops.quad_weights)))


def rd_time_step(
    mesh: RdMesh,
    cfl: float,
    speed: float = 1.0,
    ops: Optional[RdOperatorSet] = None,
    nu: float = 0.0,
) -> float:
    """
    dt = cfl h / (p |speed|).

    With operators and nu > 0 the step is also capped at
    JUMP_STABILITY / jump_stiffness, which binds for higher degrees.
    """
    if not cfl > 0.0 or speed == 0.0:
        raise RdError(f"Cannot derive a time step from cfl={cfl} and speed={speed}")
    dt = cfl * mesh.h / (mesh.p * abs(speed))
    if ops is not None and nu > 0.0:
        dt = min(dt, JUMP_STABILITY / jump_stiffness(mesh, ops, nu))
    return dt


def rd_integrate(
    mesh: RdMesh,
    ops: RdOperatorSet,
    cfg: RdResidualConfig,
    dec_cfg: DecConfig,
    U0: np.ndarray,
    dt: float,
    t_final: float,
    t0: float = 0.0,
    variant: RdRelaxation = RdRelaxation.CONSERVATIVE,
    progress: bool = False,
) -> Trajectory:
    """
    Integrate the RD semidiscretization to t_final.

    The trajectory records eta = 1/2 |U|_W^2. Time advances like the ODE
    integrator: by gamma*dt with relaxation, by dt otherwise.
    """
    log_debug(
        f"RD run: {cfg.name} p={mesh.p} n_elem={mesh.n_elem} dt={dt:.6g} method={dec_cfg.label}"
    )

    def step(t: float, U: np.ndarray, h: float) -> tuple[np.ndarray, float]:
        result = rd_dec_step(mesh, ops, cfg, dec_cfg, U, h, variant=variant)
        return result.U, result.gamma

    return march(
        step,
        ops.energy,
        dec_cfg.relaxation_mode,
        t0,
        U0,
        dt,
        t_final,
        label=f"{dec_cfg.label} p={mesh.p} n={mesh.n_elem}",
        progress=progress,
    )


class RdError(Exception):
    """Raised for invalid meshes, states or RD steps."""
    pass


class DegenerateElementError(RdError):
    """Raised when an element cannot carry the entropy correction."""
    pass


class NoPositiveRootError(RdError):
    """Raised when the global relaxation quadratic has no positive root."""
    pass

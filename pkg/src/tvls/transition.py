"""Transition matrices of the linear matrix differential equation.

For a (possibly time-varying) coefficient matrix A, the transition matrix
Psi(s, s0) solves

    d/ds Psi(s, s0) = A(s) Psi(s, s0),      Psi(s0, s0) = I.

Three routes are provided: an iterated-integral series whose terms are
accumulated by nested Simpson quadrature on a shared grid, a classical
fixed-step fourth-order Runge-Kutta integrator, and an exact matrix
exponential of the integrated coefficient for families whose values
commute.  Interior breakpoints of the coefficient (step or piecewise
families) split the integration so each smooth piece is treated exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, PreconditionError
from .model import sup_norm
from .quadrature import cumulative_simpson, nudge_off_break, piece_nodes, split_interval

__all__ = [
    "TransitionMatrix",
    "CommutativityReport",
    "peano_baker",
    "ode_transition",
    "commutative_transition",
    "check_commutativity",
    "matrix_exp",
    "expm_2x2",
]


@dataclass
class TransitionMatrix:
    """Computed transition matrix plus provenance of the computation."""

    value: np.ndarray
    method: str
    error_estimate: float
    terms_or_steps: int


@dataclass
class CommutativityReport:
    """Result of sampling commutators of a matrix family over a window."""

    passes: bool
    max_violation: float
    interval: tuple
    grid_points: int
    tol: float


# ---------------------------------------------------------------------------
# Matrix exponential

_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exp(D):
    """Matrix exponential by scaling-and-squaring with a degree-13 Pade step."""
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise PreconditionError("matrix_exp expects a square matrix")
    n = D.shape[0]
    norm = float(np.abs(D).sum(axis=0).max()) if n else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / _THETA13))) if norm > _THETA13 else 0)
    A = D / (2.0**squarings)
    b = _PADE13
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        R = R @ R
    return R


def expm_2x2(D):
    """Closed-form exponential of a 2x2 matrix via its eigenvalues.

    With eigenvalues lam != mu the exponential is
    (mu e^lam - lam e^mu)/(mu - lam) I + (e^mu - e^lam)/(mu - lam) D;
    nearly confluent eigenvalues use the limit e^lam ((1 - lam) I + D).
    """
    D = np.asarray(D)
    if D.shape != (2, 2):
        raise PreconditionError("expm_2x2 expects a 2x2 matrix")
    tr = D[0, 0] + D[1, 1]
    det = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
    disc = np.lib.scimath.sqrt(0.25 * tr * tr - det)
    lam = 0.5 * tr + disc
    mu = 0.5 * tr - disc
    ident = np.eye(2)
    if abs(mu - lam) < 1e-8 * (1.0 + abs(lam)):
        out = np.exp(lam) * ((1.0 - lam) * ident + D)
    else:
        elam, emu = np.exp(lam), np.exp(mu)
        out = ((mu * elam - lam * emu) * ident + (emu - elam) * D) / (mu - lam)
    if not np.iscomplexobj(D) and np.abs(out.imag).max() < 1e-12 * (1.0 + np.abs(out.real).max()):
        out = out.real
    return out


# ---------------------------------------------------------------------------
# Shared grid construction

def _norm_estimate(A, s0, s):
    if s == s0:
        return 1.0
    return max(1.0, sup_norm(A, s0, s))


def _quad_pieces(A, s0, s, max_h):
    """Per-piece uniform node grids with evaluation points nudged off jumps.

    Returns a list of (nodes, eval_points) pairs covering [s0, s]; the
    first evaluation point of a piece is shifted just past a breakpoint so
    right-limits are used when integrating forward across a jump.
    """
    breaks = set(A.breakpoints)
    pieces = []
    for lo, hi in split_interval(s0, s, breaks):
        nodes = piece_nodes(lo, hi, max_h)
        ev = nodes.copy()
        if lo in breaks:
            ev[0] = nudge_off_break(lo)
        pieces.append((nodes, ev))
    return pieces


def _identity_result(A, method):
    p = A.shape[0]
    return TransitionMatrix(np.eye(p), method, 0.0, 0)


# ---------------------------------------------------------------------------
# Iterated-integral series

def peano_baker(A, s0, s, tol=1e-12, max_terms=64):
    """Transition matrix by the iterated-integral series.

    Terms I_0 = identity, I_{n+1}(s) = int_{s0}^{s} A(tau) I_n(tau) dtau
    are evaluated on a shared Simpson grid (panel width well under the
    0.05 / max(1, sup ||A||) stiffness cap, since the half-panel cumulative
    rule is one degree weaker than full-panel Simpson) and summed until the
    newest term's Frobenius norm at the endpoint drops below ``tol``.
    """
    if s < s0:
        raise PreconditionError("peano_baker requires s >= s0")
    if s == s0:
        return _identity_result(A, "peano_baker")
    p = A.shape[0]
    max_h = 0.02 / _norm_estimate(A, s0, s)
    pieces = _quad_pieces(A, s0, s, max_h)
    node_vals = [A.eval_array(ev) for _, ev in pieces]
    steps = [nodes[1] - nodes[0] for nodes, _ in pieces]

    terms = [np.broadcast_to(np.eye(p), v.shape).copy() for v in node_vals]
    total = np.eye(p)
    term_norms = []
    for n in range(1, max_terms + 1):
        carry = np.zeros((p, p))
        nxt = []
        for vals, term, h in zip(node_vals, terms, steps):
            integ = cumulative_simpson(np.matmul(vals, term), h) + carry
            carry = integ[-1]
            nxt.append(integ)
        terms = nxt
        total = total + carry
        norm = float(np.linalg.norm(carry))
        term_norms.append(norm)
        if norm < tol:
            return TransitionMatrix(total, "peano_baker", norm, n)
    raise DivergenceError(
        f"iterated-integral series did not converge in {max_terms} terms "
        f"(last term norm {term_norms[-1]:.3e})", term_norms)


# ---------------------------------------------------------------------------
# Runge-Kutta integration

def _rk4_run(A, s0, s, steps):
    breaks = set(A.breakpoints)
    pieces = split_interval(s0, s, breaks)
    total = s - s0
    alloc = [max(1, int(round(steps * (hi - lo) / total))) for lo, hi in pieces]
    psi = np.eye(A.shape[0])
    used = 0
    for (lo, hi), n in zip(pieces, alloc):
        pts = np.linspace(lo, hi, 2 * n + 1)
        ev = pts.copy()
        if lo in breaks:
            ev[0] = nudge_off_break(lo)
        vals = A.eval_array(ev)
        h = (hi - lo) / n
        for k in range(n):
            a0, am, a1 = vals[2 * k], vals[2 * k + 1], vals[2 * k + 2]
            k1 = a0 @ psi
            k2 = am @ (psi + 0.5 * h * k1)
            k3 = am @ (psi + 0.5 * h * k2)
            k4 = a1 @ (psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        used += n
    return psi, used


def ode_transition(A, s0, s, steps=256):
    """Transition matrix by classical fixed-step fourth-order Runge-Kutta.

    The error estimate compares against a run at half the step count
    (embedded halving).  Interior breakpoints split the integration so
    piecewise-constant coefficients are integrated exactly on each side.
    """
    steps = int(steps)
    if steps < 1:
        raise PreconditionError("steps must be >= 1")
    if s < s0:
        raise PreconditionError("ode_transition requires s >= s0")
    if s == s0:
        return _identity_result(A, "ode")
    psi, used = _rk4_run(A, s0, s, steps)
    coarse, _ = _rk4_run(A, s0, s, max(1, steps // 2)) if steps >= 2 else _rk4_run(A, s0, s, 2 * steps)
    err = float(np.linalg.norm(psi - coarse))
    return TransitionMatrix(psi, "ode", err, used)


# ---------------------------------------------------------------------------
# Commutative route

def check_commutativity(A, interval, grid_points=33, tol=1e-8):
    """Sample commutators [A(t_i), A(t_j)] and [A(t_i), int A] on a grid.

    Passing means the family can safely use the exact exponential-of-
    integral transition route.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi < lo:
        raise PreconditionError("interval must satisfy lo <= hi")
    grid_points = max(3, int(grid_points))
    ts = np.linspace(lo, hi, grid_points)
    vals = A.eval_array(ts)
    prod = np.einsum("aij,bjk->abik", vals, vals)
    comm = prod - prod.transpose(1, 0, 2, 3)
    max_violation = float(np.sqrt((comm**2).sum(axis=(2, 3))).max())
    if grid_points >= 3 and hi > lo:
        cum = cumulative_simpson(vals, ts[1] - ts[0])
        comm2 = np.matmul(vals, cum) - np.matmul(cum, vals)
        max_violation = max(max_violation, float(np.sqrt((comm2**2).sum(axis=(1, 2))).max()))
    return CommutativityReport(max_violation <= tol, max_violation,
                               (lo, hi), grid_points, tol)


def commutative_transition(A, s0, s, tol=1e-8):
    """Exact transition matrix exp(int_{s0}^{s} A) for commuting families.

    Commutativity is re-verified at eight random time pairs before use;
    the integral is evaluated by composite Simpson and the error estimate
    compares exponentials at two quadrature resolutions.
    """
    if s < s0:
        raise PreconditionError("commutative_transition requires s >= s0")
    if s == s0:
        return _identity_result(A, "commutative_exp")
    rng = np.random.default_rng(20130528)
    pairs = rng.uniform(s0, s, size=(8, 2))
    pvals = A.eval_array(pairs.ravel()).reshape(8, 2, A.shape[0], A.shape[0])
    comm = np.matmul(pvals[:, 0], pvals[:, 1]) - np.matmul(pvals[:, 1], pvals[:, 0])
    worst = float(np.sqrt((comm**2).sum(axis=(1, 2))).max())
    if worst > tol:
        raise PreconditionError(
            f"matrix family does not commute (violation {worst:.3e} > {tol:g}); "
            "use the series or Runge-Kutta route")

    def integral(max_h):
        total = np.zeros(A.shape)
        count = 0
        for nodes, ev in _quad_pieces(A, s0, s, max_h):
            vals = A.eval_array(ev)
            total = total + cumulative_simpson(vals, nodes[1] - nodes[0])[-1]
            count += len(nodes)
        return total, count

    max_h = 0.05 / _norm_estimate(A, s0, s)
    coarse, _ = integral(max_h)
    fine, n_nodes = integral(max_h / 2.0)
    value = matrix_exp(fine)
    err = float(np.linalg.norm(value - matrix_exp(coarse)))
    return TransitionMatrix(value, "commutative_exp", err, n_nodes)

"""Quasi-static assembly, constrained solves, energies and contact ramping.

The linear operator over the 2N displacement degrees of freedom follows from
the pairwise force

    F_i = sum_j (c_ij / xi) [e x e] (u_j - u_i) V_i V_j

so K is symmetric positive semi-definite with a rigid-translation null space
before constraints. Degrees of freedom are interleaved: dof = 2*node + axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BondTable, NodeSet
from .material import CorrectionField


class SolverFailure(RuntimeError):
    """The constrained linear solve did not reach the requested residual."""


@dataclass
class BCSet:
    """Prescribed displacements (per axis) and applied nodal forces.

    A node/axis pair may be prescribed or loaded, never both; virtual nodes
    must always be fully prescribed by the caller.
    """

    n: int
    prescribed_mask: np.ndarray = None   # (N, 2) bool
    prescribed_value: np.ndarray = None  # (N, 2) mm
    loads: np.ndarray = None             # (N, 2) N

    def __post_init__(self):
        if self.prescribed_mask is None:
            self.prescribed_mask = np.zeros((self.n, 2), dtype=bool)
        if self.prescribed_value is None:
            self.prescribed_value = np.zeros((self.n, 2))
        if self.loads is None:
            self.loads = np.zeros((self.n, 2))

    def prescribe(self, ids, ux: float | np.ndarray | None = None,
                  uy: float | np.ndarray | None = None) -> "BCSet":
        ids = np.asarray(ids, dtype=int)
        for axis, val in ((0, ux), (1, uy)):
            if val is not None:
                self.prescribed_mask[ids, axis] = True
                self.prescribed_value[ids, axis] = val
        return self

    def add_load(self, ids, fx=0.0, fy=0.0) -> "BCSet":
        ids = np.asarray(ids, dtype=int)
        self.loads[ids, 0] += fx
        self.loads[ids, 1] += fy
        return self

    def validate(self) -> None:
        clash = self.prescribed_mask & (self.loads != 0.0)
        if np.any(clash):
            raise ValueError("a node/axis pair is both prescribed and loaded")

    def copy(self) -> "BCSet":
        return BCSet(self.n, self.prescribed_mask.copy(),
                     self.prescribed_value.copy(), self.loads.copy())


@dataclass
class SolveDiagnostics:
    method: str
    iterations: int
    residual: float
    converged: bool


@dataclass
class FieldResult:
    """Converged displacements with derived per-node quantities."""

    u: np.ndarray                    # (N, 2) mm
    energy_density: np.ndarray       # (N,) MPa
    diagnostics: SolveDiagnostics
    reactions: np.ndarray | None = None   # (2,) force sum over the pulled surface
    inverted_bonds: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def assemble(nodes: NodeSet, bonds: BondTable,
             correction: CorrectionField) -> sp.csr_matrix:
    """Stiffness operator from per-bond coefficients (2N x 2N CSR).

    Diagonal blocks are accumulated once per node and mirrored entries share
    the same summed values, so K equals its transpose exactly.
    """
    n = nodes.n
    w = (correction.coeff / bonds.length
         * nodes.volumes[bonds.i] * nodes.volumes[bonds.j])
    ex, ey = bonds.unit[:, 0], bonds.unit[:, 1]
    bxx, bxy, byy = w * ex * ex, w * ex * ey, w * ey * ey
    i2, j2 = 2 * bonds.i.astype(np.int64), 2 * bonds.j.astype(np.int64)
    # coupling blocks: one bond per unordered pair, so no duplicate entries
    rows = np.concatenate([i2, i2, i2 + 1, i2 + 1])
    cols = np.concatenate([j2, j2 + 1, j2, j2 + 1])
    data = np.concatenate([-bxx, -bxy, -bxy, -byy])
    coupling = sp.coo_matrix((data, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
    # node-diagonal blocks from both bond endpoints
    dxx = np.bincount(bonds.i, bxx, n) + np.bincount(bonds.j, bxx, n)
    dxy = np.bincount(bonds.i, bxy, n) + np.bincount(bonds.j, bxy, n)
    dyy = np.bincount(bonds.i, byy, n) + np.bincount(bonds.j, byy, n)
    idx = 2 * np.arange(n, dtype=np.int64)
    drows = np.concatenate([idx, idx, idx + 1, idx + 1])
    dcols = np.concatenate([idx, idx + 1, idx, idx + 1])
    ddata = np.concatenate([dxx, dxy, dxy, dyy])
    diag = sp.coo_matrix((ddata, (drows, dcols)), shape=(2 * n, 2 * n)).tocsr()
    return (coupling + coupling.T + diag).tocsr()


def _pcg(matvec, rhs: np.ndarray, diag: np.ndarray, tol: float,
         max_iter: int) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned conjugate gradients for SPD systems."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    ref = np.linalg.norm(rhs)
    if ref == 0.0:
        return x, 0, 0.0
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        q = matvec(p)
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        res = np.linalg.norm(r) / ref
        if res <= tol:
            return x, it, res
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, np.linalg.norm(r) / ref


def _factorize(kff: sp.spmatrix):
    # symmetric-mode ordering is several times faster than the default on
    # these wide-stencil operators
    return spla.splu(kff.tocsc(), permc_spec="MMD_AT_PLUS_A",
                     diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))


def _direct(kff: sp.csr_matrix, rhs: np.ndarray, tol: float) -> tuple[np.ndarray, int, float]:
    """Sparse LU with iterative refinement down to the requested residual."""
    ref = np.linalg.norm(rhs)
    if ref == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    lu = _factorize(kff)
    x = lu.solve(rhs)
    res = np.linalg.norm(rhs - kff @ x) / ref
    rounds = 0
    while res > tol and rounds < 4:
        x += lu.solve(rhs - kff @ x)
        res = np.linalg.norm(rhs - kff @ x) / ref
        rounds += 1
    return x, rounds, res


# below this many free dofs the iterative path is the cheaper default
_PCG_AUTO_LIMIT = 3000


def solve_static(k: sp.csr_matrix, bcs: BCSet, tol: float = 1e-10,
                 max_iter: int | None = None,
                 method: str = "auto") -> tuple[np.ndarray, SolveDiagnostics]:
    """Solve K u = b with prescribed dofs eliminated.

    The residual contract is ||K_ff u_f - (b_f - K_fp u_p)|| / ||rhs|| <= tol;
    failure to converge raises SolverFailure. ``method`` is "pcg", "direct",
    or "auto" (direct factorization above a size threshold).
    """
    bcs.validate()
    ndof = k.shape[0]
    pres = bcs.prescribed_mask.ravel()
    free = ~pres
    u = np.zeros(ndof)
    u[pres] = bcs.prescribed_value.ravel()[pres]
    b = bcs.loads.ravel()
    nfree = int(free.sum())
    if nfree == 0:
        return u.reshape(-1, 2), SolveDiagnostics("none", 0, 0.0, True)
    rhs = (b - k @ u)[free]
    kff = k[free][:, free]
    if method == "auto":
        method = "pcg" if nfree <= _PCG_AUTO_LIMIT else "direct"
    if method == "pcg":
        if max_iter is None:
            max_iter = int(np.ceil(50 * np.sqrt(nfree)))
        diag = kff.diagonal()
        uf, iters, res = _pcg(lambda v: kff @ v, rhs, diag, tol, max_iter)
    elif method == "direct":
        uf, iters, res = _direct(kff, rhs, tol)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    converged = res <= tol
    if not converged:
        raise SolverFailure(
            f"{method} solve stalled at relative residual {res:.3e} (tol {tol:.1e})")
    u[free] = uf
    return u.reshape(-1, 2), SolveDiagnostics(method, iters, float(res), converged)


def strain_energy_density(nodes: NodeSet, bonds: BondTable,
                          correction: CorrectionField, u: np.ndarray) -> np.ndarray:
    """Per-node stored energy density (MPa).

    Each bond's energy splits between its endpoints with the endpoint's own
    stiffened amplitude c_b(xi) * phi(x, e), not the symmetric bond
    coefficient; summed against the partner volume. Virtual nodes receive
    their share too, so callers can report energy residing outside the body
    separately.
    """
    w = np.zeros(nodes.n)
    if bonds.m == 0:
        return w
    du = u[bonds.j] - u[bonds.i]
    stretch_sq = (bonds.unit[:, 0] * du[:, 0] + bonds.unit[:, 1] * du[:, 1]) ** 2
    base = 0.25 * correction.bulk * stretch_sq / bonds.length
    w += np.bincount(bonds.i, weights=base * correction.phi_i * nodes.volumes[bonds.j],
                     minlength=nodes.n)
    w += np.bincount(bonds.j, weights=base * correction.phi_j * nodes.volumes[bonds.i],
                     minlength=nodes.n)
    return w


def reaction_force(k: sp.csr_matrix, u: np.ndarray, bcs: BCSet,
                   node_ids: np.ndarray) -> np.ndarray:
    """Sum of constraint residual forces (N) over the given nodes."""
    r = (k @ u.ravel() - bcs.loads.ravel()).reshape(-1, 2)
    ids = np.asarray(node_ids, dtype=int)
    return r[ids].sum(axis=0)


def mean_tensile_stress(force_axial: float, width: float, thickness: float) -> float:
    """|F| divided by the undeformed cross-section (MPa)."""
    return abs(force_axial) / (width * thickness)


def check_bond_inversion(bonds: BondTable, u: np.ndarray) -> np.ndarray:
    """Bond indices whose deformed vector reversed against the reference.

    A non-empty result means the deformed configuration maps material points
    past each other, so a static continuation is no longer meaningful.
    """
    if bonds.m == 0:
        return np.empty(0, dtype=int)
    deformed = bonds.xi + u[bonds.j] - u[bonds.i]
    proj = deformed[:, 0] * bonds.xi[:, 0] + deformed[:, 1] * bonds.xi[:, 1]
    return np.where(proj <= 0.0)[0]


class RampSolver:
    """Repeated solves of one operator under a growing set of point constraints.

    The stiffness is factorized once over the base free set; later constraints
    (the stick-contact set) are enforced through a bordered Schur complement,
    so each added constrained dof costs one triangular backsolve and each step
    a small dense solve. Residuals are verified against the same contract as
    :func:`solve_static` and polished by iterative refinement when needed.
    """

    def __init__(self, k: sp.csr_matrix, base_bcs: BCSet, tol: float = 1e-10):
        base_bcs.validate()
        self.k = k
        self.tol = tol
        ndof = k.shape[0]
        pres = base_bcs.prescribed_mask.ravel()
        self.free = np.where(~pres)[0]
        self.local = np.full(ndof, -1, dtype=np.int64)
        self.local[self.free] = np.arange(len(self.free))
        self.u_base = np.zeros(ndof)
        self.u_base[pres] = base_bcs.prescribed_value.ravel()[pres]
        self.b = base_bcs.loads.ravel()
        rhs_full = self.b - k @ self.u_base
        self.rhs = rhs_full[self.free]
        kff = k[self.free][:, self.free]
        self.lu = _factorize(kff)
        self.y = self.lu.solve(self.rhs)       # unconstrained solution, cached
        self.cols = np.empty((len(self.free), 0))   # A^{-1} e_c per constraint
        self.cdofs: list[int] = []                  # free-local constrained dofs
        self.gram = np.empty((0, 0))                # S^T A^{-1} S

    @property
    def constrained_dofs(self) -> np.ndarray:
        return self.free[np.array(self.cdofs, dtype=int)] if self.cdofs else \
            np.empty(0, dtype=int)

    def add_constraints(self, dofs) -> None:
        """Register additional constrained dofs (must be base-free)."""
        for dof in np.asarray(dofs, dtype=int):
            c = int(self.local[dof])
            if c < 0:
                raise ValueError("cannot constrain a dof prescribed in the base set")
            if c in self.cdofs:
                continue
            e = np.zeros(len(self.free))
            e[c] = 1.0
            col = self.lu.solve(e)
            n = len(self.cdofs)
            gram = np.empty((n + 1, n + 1))
            gram[:n, :n] = self.gram
            gram[:n, n] = col[self.cdofs]
            gram[n, :n] = self.cols[c, :]
            gram[n, n] = col[c]
            self.gram = gram
            self.cols = np.hstack([self.cols, col[:, None]])
            self.cdofs.append(c)

    def solve(self, values: np.ndarray) -> tuple[np.ndarray, SolveDiagnostics]:
        """Solve with the registered dofs held at ``values`` (attach order)."""
        uf = self.y.copy()
        if self.cdofs:
            g = np.asarray(values, dtype=float)
            lam = np.linalg.solve(self.gram, uf[self.cdofs] - g)
            uf -= self.cols @ lam
        rounds = 0
        while True:
            r = self.rhs - self._kff_mul(uf)
            r[self.cdofs] = 0.0  # constrained rows carry reaction, not residual
            ref = np.linalg.norm(self.rhs) or 1.0
            res = np.linalg.norm(r) / ref
            if res <= self.tol or rounds >= 3:
                break
            d = self.lu.solve(r)
            if self.cdofs:
                lam = np.linalg.solve(self.gram, d[self.cdofs])
                d -= self.cols @ lam
            uf += d
            rounds += 1
        if res > self.tol:
            raise SolverFailure(
                f"ramp solve stalled at relative residual {res:.3e} (tol {self.tol:.1e})")
        u = self.u_base.copy()
        u[self.free] = uf
        return u.reshape(-1, 2), SolveDiagnostics("direct", rounds, float(res), True)

    def _kff_mul(self, v: np.ndarray) -> np.ndarray:
        full = np.zeros(self.k.shape[0])
        full[self.free] = v
        return (self.k @ full)[self.free]


@dataclass
class IndenterState:
    """Rigid circular indenter with a no-slip (stick) contact set."""

    center_x: float
    radius: float
    top_y: float
    depth: float = 0.0
    stuck_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    attach_offsets: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_x, self.top_y + self.radius - self.depth])


@dataclass
class IndentationResult:
    depths: np.ndarray               # converged depths (mm)
    forces: np.ndarray               # indenter force per converged depth (N)
    failed: bool
    failure_depth: float | None
    inverted_bonds: np.ndarray
    u_final: np.ndarray              # last converged displacement field
    indenter: IndenterState
    stuck_counts: np.ndarray
    iterations: list


def run_indentation(positions: np.ndarray, k: sp.csr_matrix, base_bcs: BCSet,
                    surface_ids: np.ndarray, radius: float, depths: np.ndarray,
                    center_x: float = 0.0, bonds: BondTable | None = None,
                    tol: float = 1e-10) -> IndentationResult:
    """Displacement-controlled stick contact against a rigid circular punch.

    Per depth increment: surface nodes whose current position penetrates the
    disk are projected radially onto it and recorded in the indenter frame;
    all stuck nodes then move rigidly with the indenter; the static problem
    is solved and the bond-inversion scan (when bonds are supplied) either
    passes or aborts the ramp. The indenter force is the sum of the vertical
    reactions on the stuck set. The stuck set only ever grows, so the
    operator is factorized once and contacts are appended incrementally.
    """
    surface_ids = np.asarray(surface_ids, dtype=int)
    top_y = positions[surface_ids, 1].max()
    state = IndenterState(center_x=center_x, radius=radius, top_y=top_y)
    solver = RampSolver(k, base_bcs, tol=tol)
    u = np.zeros_like(positions)
    out_depths, out_forces, out_stuck, iters = [], [], [], []
    failed = False
    failure_depth = None
    inverted = np.empty(0, dtype=int)
    for depth in np.asarray(depths, dtype=float):
        state.depth = float(depth)
        center = state.center
        # detect new contacts from the previously converged configuration
        candidates = np.setdiff1d(surface_ids, state.stuck_ids, assume_unique=False)
        cur = positions[candidates] + u[candidates]
        dist = np.linalg.norm(cur - center, axis=1)
        newly = np.sort(candidates[dist < radius * (1 - 1e-12)])
        if len(newly) > 0:
            rel_new = (positions[newly] + u[newly]) - center
            d_new = np.linalg.norm(rel_new, axis=1)
            offsets = rel_new * (radius / d_new)[:, None]
            state.stuck_ids = np.concatenate([state.stuck_ids, newly])
            state.attach_offsets = np.vstack([state.attach_offsets, offsets])
            solver.add_constraints(
                np.stack([2 * newly, 2 * newly + 1], axis=1).ravel())
        target = center[None, :] + state.attach_offsets - positions[state.stuck_ids]
        u_new, diag = solver.solve(target.ravel())
        if bonds is not None:
            inverted = check_bond_inversion(bonds, u_new)
            if len(inverted) > 0:
                failed = True
                failure_depth = float(depth)
                break
        u = u_new
        if len(state.stuck_ids) > 0:
            bcs = base_bcs.copy()
            bcs.prescribe(state.stuck_ids, ux=target[:, 0], uy=target[:, 1])
            force = reaction_force(k, u, bcs, state.stuck_ids)[1]
        else:
            force = 0.0
        out_depths.append(float(depth))
        out_forces.append(abs(float(force)))
        out_stuck.append(len(state.stuck_ids))
        iters.append(diag.iterations)
    return IndentationResult(
        depths=np.array(out_depths), forces=np.array(out_forces),
        failed=failed, failure_depth=failure_depth, inverted_bonds=inverted,
        u_final=u, indenter=state, stuck_counts=np.array(out_stuck, dtype=int),
        iterations=iters)

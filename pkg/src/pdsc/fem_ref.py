"""Plane-stress finite-element reference on a regular grid of square elements.

Bilinear 4-node quadrilaterals with 2x2 Gauss quadrature; since every element
is the same axis-aligned square, one element matrix is scattered over the
grid. Node numbering matches the peridynamic grid builder (x fastest), so
fields from both solvers are node-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import Domain, GridSpec
from .material import POISSON_BY_DIMENSION


@dataclass(frozen=True)
class PlaneStressLaw:
    """Isotropic plane-stress constitutive law."""

    youngs_modulus: float
    poisson: float = POISSON_BY_DIMENSION[2]
    thickness: float = 1.0

    def matrix(self) -> np.ndarray:
        e, nu = self.youngs_modulus, self.poisson
        return e / (1 - nu**2) * np.array([
            [1.0, nu, 0.0],
            [nu, 1.0, 0.0],
            [0.0, 0.0, (1 - nu) / 2.0],
        ])


@dataclass(frozen=True)
class FEMesh:
    """Structured quad mesh; nodes (N, 2), elements (E, 4) counterclockwise."""

    nodes: np.ndarray
    elements: np.ndarray
    spacing: float
    counts: tuple[int, int]

    @classmethod
    def from_grid(cls, domain: Domain, spec: GridSpec) -> "FEMesh":
        nx, ny = spec.counts
        pts = spec.points()
        if not np.all(domain.contains(pts, tol=1e-9 * spec.spacing)):
            raise ValueError("grid extends outside the domain")
        quads = []
        for iy in range(ny - 1):
            for ix in range(nx - 1):
                n0 = iy * nx + ix
                quads.append([n0, n0 + 1, n0 + nx + 1, n0 + nx])
        return cls(pts, np.array(quads, dtype=np.int64), spec.spacing, (nx, ny))


_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def element_stiffness(spacing: float, law: PlaneStressLaw) -> np.ndarray:
    """8x8 stiffness of one square bilinear element."""
    d = law.matrix()
    half = spacing / 2.0
    ke = np.zeros((8, 8))
    for gx in _GAUSS:
        for gy in _GAUSS:
            # shape-function gradients wrt (xi, eta), corners CCW from (-1,-1)
            dn = 0.25 * np.array([
                [-(1 - gy), -(1 - gx)],
                [(1 - gy), -(1 + gx)],
                [(1 + gy), (1 + gx)],
                [-(1 + gy), (1 - gx)],
            ])
            dndx = dn / half  # constant Jacobian: x = half * xi
            b = np.zeros((3, 8))
            b[0, 0::2] = dndx[:, 0]
            b[1, 1::2] = dndx[:, 1]
            b[2, 0::2] = dndx[:, 1]
            b[2, 1::2] = dndx[:, 0]
            ke += b.T @ d @ b * half * half * law.thickness
    return ke


def fem_assemble(mesh: FEMesh, law: PlaneStressLaw) -> sp.csr_matrix:
    """Global stiffness (2N x 2N CSR); passes the constant-strain patch test."""
    ke = element_stiffness(mesh.spacing, law)
    dofs = np.empty((len(mesh.elements), 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.elements
    dofs[:, 1::2] = 2 * mesh.elements + 1
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    data = np.tile(ke.ravel(), len(mesh.elements))
    n = 2 * len(mesh.nodes)
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def fem_energy_density(mesh: FEMesh, law: PlaneStressLaw, u: np.ndarray) -> np.ndarray:
    """Nodal energy density (MPa): adjacent element densities averaged.

    The element total is 1/2 u_e^T k_e u_e, so summing the element energies
    reproduces 1/2 u^T K u identically.
    """
    ke = element_stiffness(mesh.spacing, law)
    dofs = np.empty((len(mesh.elements), 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.elements
    dofs[:, 1::2] = 2 * mesh.elements + 1
    ue = u.ravel()[dofs]
    elem_energy = 0.5 * np.einsum("ea,ab,eb->e", ue, ke, ue)
    vol = mesh.spacing**2 * law.thickness
    density = elem_energy / vol
    w = np.zeros(len(mesh.nodes))
    count = np.zeros(len(mesh.nodes))
    for corner in range(4):
        np.add.at(w, mesh.elements[:, corner], density)
        np.add.at(count, mesh.elements[:, corner], 1.0)
    return w / np.maximum(count, 1.0)

"""Assembly of the example systems on uniform 1D grids.

All builders produce :class:`~coupledforms.forms.FormMatrix` instances
with piecewise-linear hat bases.  Coefficients are piecewise constant
per cell, which makes every element integral exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .forms import DiscreteSpace, FormBlock, FormMatrix


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on the interval (0, length) with n_cells cells."""

    n_cells: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValidationError("need at least 2 cells")
        if not self.length > 0:
            raise ValidationError("length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)


@dataclass(frozen=True)
class CoefficientField:
    """Cell-wise diffusion coefficients ``c_ij`` of an m-fibre system.

    ``values[i, j, k]`` is the coefficient of coupling block (i, j) on
    cell k.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] != v.shape[1]:
            raise DimensionError(f"values must have shape (m, m, n_cells), got {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError("coefficients must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[2]

    @classmethod
    def constant(cls, matrix, n_cells: int) -> "CoefficientField":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"coupling matrix must be square, got {matrix.shape}")
        return cls(np.repeat(matrix[:, :, None], n_cells, axis=2))

    def perturbed(self, i: int, j: int, delta: float) -> "CoefficientField":
        v = np.array(self.values)
        v[i, j, :] += delta
        return CoefficientField(v)


def two_fibre_coupling(kind: str, diffusion: float = 2.0, coupling: float = 0.5) -> np.ndarray:
    """The three classical 2-fibre coupling matrices.

    ``difference``: diagonal ``diffusion - coupling``, off-diagonal
    ``-coupling``; ``sum``: diagonal ``diffusion + coupling``, same
    off-diagonal; ``shared``: all four entries equal to ``diffusion``.
    All three have equal row and column sums.
    """
    d, b = float(diffusion), float(coupling)
    if kind == "difference":
        return np.array([[d - b, -b], [-b, d - b]])
    if kind == "sum":
        return np.array([[d + b, -b], [-b, d + b]])
    if kind == "shared":
        return np.array([[d, d], [d, d]])
    raise ValidationError(f"unknown coupling pattern {kind!r}")


def p1_mass(grid: Grid1D) -> np.ndarray:
    """Consistent mass matrix of the hat basis."""
    n = grid.n_nodes
    h = grid.h
    mass = np.zeros((n, n))
    element = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    for k in range(grid.n_cells):
        mass[k : k + 2, k : k + 2] += element
    return mass


def p1_stiffness(grid: Grid1D, cell_values=1.0) -> np.ndarray:
    """Stiffness matrix with a piecewise-constant coefficient.

    ``cell_values`` may be a scalar or a length-``n_cells`` array of the
    coefficient evaluated at cell midpoints.
    """
    c = np.broadcast_to(np.asarray(cell_values, dtype=float), (grid.n_cells,))
    n = grid.n_nodes
    stiff = np.zeros((n, n))
    element = np.array([[1.0, -1.0], [-1.0, 1.0]]) / grid.h
    for k in range(grid.n_cells):
        stiff[k : k + 2, k : k + 2] += c[k] * element
    return stiff


def _h1_space(grid: Grid1D, label: str) -> DiscreteSpace:
    mass = p1_mass(grid)
    return DiscreteSpace(grid.n_nodes, mass, mass + p1_stiffness(grid), label)


def build_ephaptic(grid: Grid1D, coeffs: CoefficientField) -> FormMatrix:
    """Coupled-diffusion form ``a_ij(f,g) = int c_ij f' g'``.

    Each component lives in the same hat-function space with the plain
    L2 ambient Gram and the H1 domain Gram.  The unbounded line of the
    original problem is truncated to (0, length) with natural boundary
    conditions; the truncation is recorded in the metadata.
    """
    if coeffs.n_cells != grid.n_cells:
        raise DimensionError(
            f"coefficient field has {coeffs.n_cells} cells, grid has {grid.n_cells}"
        )
    m = coeffs.m
    space = _h1_space(grid, "h1")
    blocks = [
        [FormBlock(i, j, p1_stiffness(grid, coeffs.values[i, j])) for j in range(m)]
        for i in range(m)
    ]
    metadata = {
        "model": "ephaptic",
        "m": m,
        "grid": {"n_cells": grid.n_cells, "length": grid.length},
        "boundary": "natural (Neumann) on a truncated interval",
        "coefficients": coeffs.values.tolist(),
    }
    return FormMatrix([space] * m, blocks, metadata)


def build_damped_wave(grid: Grid1D, alpha: complex = 1.0) -> FormMatrix:
    """First-order form of the strongly damped wave equation.

    Component 1 (the phase) carries the H1 Gram as both ambient and
    domain inner product; component 2 (the velocity) is an L2 component
    with H1 domain.  With real ``alpha`` the sampled numerical range
    satisfies the parabola bound with the constant stored under
    ``metadata["parabola_constant"]``.
    """
    mass = p1_mass(grid)
    stiff = p1_stiffness(grid)
    w = mass + stiff
    n = grid.n_nodes
    spaces = [
        DiscreteSpace(n, w, w, "h1_phase"),
        DiscreteSpace(n, mass, w, "l2_velocity"),
    ]
    alpha = complex(alpha)
    s21 = -alpha * stiff
    if alpha.imag == 0.0:
        s21 = s21.real
        alpha_meta = alpha.real
    else:
        alpha_meta = [alpha.real, alpha.imag]
    blocks = [
        [FormBlock(0, 0, np.zeros((n, n))), FormBlock(0, 1, -w)],
        [FormBlock(1, 0, s21), FormBlock(1, 1, stiff)],
    ]
    metadata = {
        "model": "damped_wave",
        "m": 2,
        "grid": {"n_cells": grid.n_cells, "length": grid.length},
        "alpha": alpha_meta,
        "parabola_constant": 1.0 + abs(alpha - 1.0),
    }
    return FormMatrix(spaces, blocks, metadata)


def build_dynamic_bc_heat(grid: Grid1D) -> FormMatrix:
    """Heat equation coupled to an evolving boundary value.

    Component 1 is the interior hat space, component 2 the two endpoint
    values with identity Grams.  The couplings carry the boundary trace
    with a negative sign; the boundary diffusion block is zero because a
    two-point boundary has no tangential direction, which the metadata
    records.
    """
    n = grid.n_nodes
    space1 = _h1_space(grid, "h1_interior")
    space2 = DiscreteSpace(2, np.eye(2), np.eye(2), "boundary_values")
    trace = np.zeros((n, 2))
    trace[0, 0] = 1.0
    trace[-1, 1] = 1.0
    blocks = [
        [FormBlock(0, 0, p1_stiffness(grid)), FormBlock(0, 1, -trace)],
        [FormBlock(1, 0, -trace.T), FormBlock(1, 1, np.zeros((2, 2)))],
    ]
    metadata = {
        "model": "dynamic_bc_heat",
        "m": 2,
        "grid": {"n_cells": grid.n_cells, "length": grid.length},
        "boundary_diffusion": "zero (two-point boundary has no tangential Laplacian)",
    }
    return FormMatrix([space1, space2], blocks, metadata)


def build_constant_coupled(grid: Grid1D, coupling) -> FormMatrix:
    """Coupled diffusion with constant coefficients ``c_ij = coupling[i, j]``.

    Bridges the scalar certificates and the discrete estimates: the
    assembled blocks are exactly ``coupling[i, j]`` times the unit
    stiffness matrix.
    """
    coupling = np.asarray(coupling, dtype=float)
    form = build_ephaptic(grid, CoefficientField.constant(coupling, grid.n_cells))
    form.metadata["model"] = "constant_coupled"
    form.metadata["coupling"] = coupling.tolist()
    return form

"""Implicit time integration of the assembled evolution problems.

The continuous problem is ``u' = A u`` with ``A = -Mass^{-1} S``; the
two schemes below solve

    implicit Euler:   (Mass + dt*S) u+ = Mass u
    Crank-Nicolson:   (Mass + dt/2*S) u+ = (Mass - dt/2*S) u

with one factorization per (form, dt) reused across all steps.  Both
schemes are unconditionally stable for accretive forms, which is what
makes the downstream invariance tests meaningful.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SolverError, ValidationError
from .forms import FormMatrix

SCHEMES = ("implicit-euler", "crank-nicolson")


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping parameters."""

    dt: float
    t_end: float
    scheme: str = "implicit-euler"
    record_every: int = 1
    solver_tolerance: float = 1e-9

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.t_end > 0:
            raise ValidationError("t_end must be positive")
        if self.dt > self.t_end:
            raise ValidationError("dt must not exceed t_end")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if not 0 < self.solver_tolerance <= 1e-6:
            raise ValidationError("solver_tolerance must lie in (0, 1e-6]")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))


@dataclass
class TrajectoryRecord:
    """Recorded states and derived observables of one evolution run.

    ``states[k]`` is the list of per-component coordinate vectors at
    ``times[k]``.  Observables always include the ambient norm, the
    per-component norms, the nodal extremes and the domain norm; the
    strip observables appear when a projection was supplied.
    """

    times: np.ndarray
    states: list
    observables: dict
    n_components: int

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]

    @property
    def final_state(self) -> list:
        return self.states[-1]


class Stepper:
    """One factorized time-step operator for a fixed form and config."""

    def __init__(self, form: FormMatrix, cfg: EvolutionConfig):
        self.form = form
        self.cfg = cfg
        mass = form.mass_matrix
        s = form.full_matrix
        if cfg.scheme == "implicit-euler":
            lhs = mass + cfg.dt * s
            self._rhs = mass
        else:
            lhs = mass + (cfg.dt / 2.0) * s
            self._rhs = mass - (cfg.dt / 2.0) * s
        self._lhs = lhs
        try:
            with warnings.catch_warnings():
                # singularity is detected explicitly below via the pivots
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                self._lu = scipy.linalg.lu_factor(lhs)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(
                f"{cfg.scheme} system factorization failed at dt={cfg.dt}: {exc}"
            ) from exc
        diag = np.abs(np.diag(self._lu[0]))
        scale = max(float(np.linalg.norm(lhs, np.inf)), 1e-300)
        if diag.size and diag.min() <= 1e-14 * scale:
            raise SolverError(
                f"{cfg.scheme} system is numerically singular at dt={cfg.dt} "
                f"(pivot ratio {diag.min() / scale:.3e})"
            )

    def step(self, u: np.ndarray, step_index: int = 0) -> np.ndarray:
        rhs = self._rhs @ u
        u_next = scipy.linalg.lu_solve(self._lu, rhs)
        residual = np.linalg.norm(self._lhs @ u_next - rhs)
        if not residual <= self.cfg.solver_tolerance * max(1.0, float(np.linalg.norm(rhs))):
            raise SolverError(
                f"{self.cfg.scheme} solve lost accuracy at step {step_index} "
                f"(dt={self.cfg.dt}, residual {residual:.3e})"
            )
        return u_next


def step(form: FormMatrix, u, cfg: EvolutionConfig) -> list:
    """Advance a block vector by a single time step."""
    stepper = Stepper(form, cfg)
    return form.split(stepper.step(form.flatten(u)))


def h_norm(form: FormMatrix, u) -> float:
    """Ambient norm ``sqrt(sum_i u_i^H h_gram_i u_i)`` of a block vector."""
    total = 0.0
    for i, sl in enumerate(form.block_slices):
        ui = np.asarray(u[i]).reshape(-1)
        if ui.shape[0] != form.spaces[i].dim:
            raise DimensionError(f"component {i} has wrong length {ui.shape[0]}")
        total += float(np.vdot(ui, form.spaces[i].h_gram @ ui).real)
    return float(np.sqrt(max(total, 0.0)))


def _projection_matrix(proj) -> np.ndarray:
    matrix = getattr(proj, "matrix", proj)
    return np.asarray(matrix)


def _apply_projection(k: np.ndarray, blocks: list) -> list:
    return [sum(k[i, j] * blocks[j] for j in range(len(blocks))) for i in range(k.shape[0])]


def _require_identical_spaces(form: FormMatrix, why: str) -> None:
    first = form.spaces[0]
    if not all(s.same_geometry(first) for s in form.spaces[1:]):
        raise ValidationError(f"{why} requires all component spaces to be identical")


def evolve(form: FormMatrix, u0, cfg: EvolutionConfig, proj=None) -> TrajectoryRecord:
    """Run the configured scheme from ``u0`` and record observables.

    When ``proj`` (an object with an m-by-m ``matrix`` attribute, or the
    matrix itself) is given, all component spaces must be identical and
    the strip observables ``strip_distance = |u - Pu|`` and
    ``projection_norm = |Pu|`` are recorded for the lifted projection.
    """
    u = form.flatten(u0).astype(complex if not form.is_real else float)
    if not np.isfinite(u).all():
        raise ValidationError("initial data contains non-finite entries")
    k_mat = None
    if proj is not None:
        _require_identical_spaces(form, "a lifted projection")
        k_mat = _projection_matrix(proj)
        if k_mat.shape != (form.m, form.m):
            raise DimensionError(f"projection matrix must be {form.m}x{form.m}")
        if np.iscomplexobj(k_mat):
            u = u.astype(complex)

    stepper = Stepper(form, cfg)
    n_steps = cfg.n_steps

    times = []
    states = []
    obs: dict = {name: [] for name in ["h_norm", "v_norm", "min_value", "sup_norm"]}
    for i in range(form.m):
        obs[f"comp_norm_{i + 1}"] = []
    if k_mat is not None:
        obs["strip_distance"] = []
        obs["projection_norm"] = []

    def record(k: int) -> None:
        blocks = form.split(u.copy())
        times.append(k * cfg.dt)
        states.append(blocks)
        obs["h_norm"].append(h_norm(form, blocks))
        vg = form.vgram_matrix
        obs["v_norm"].append(float(np.sqrt(max(np.vdot(u, vg @ u).real, 0.0))))
        for i, b in enumerate(blocks):
            hi = form.spaces[i].h_gram
            obs[f"comp_norm_{i + 1}"].append(float(np.sqrt(max(np.vdot(b, hi @ b).real, 0.0))))
        obs["min_value"].append(float(min(np.min(b.real) for b in blocks)))
        obs["sup_norm"].append(float(max(np.max(np.abs(b)) for b in blocks)))
        if k_mat is not None:
            pu = _apply_projection(k_mat, blocks)
            diff = [b - p for b, p in zip(blocks, pu)]
            obs["strip_distance"].append(h_norm(form, diff))
            obs["projection_norm"].append(h_norm(form, pu))

    record(0)
    for k in range(1, n_steps + 1):
        u = stepper.step(u, step_index=k)
        if k % cfg.record_every == 0 or k == n_steps:
            record(k)

    observables = {name: np.array(vals) for name, vals in obs.items()}
    for name, vals in observables.items():
        if not np.isfinite(vals).all():
            raise SolverError(f"observable {name!r} became non-finite during the run")
    return TrajectoryRecord(np.array(times), states, observables, form.m)

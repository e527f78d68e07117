"""Twin-experiment dynamical models.

Two toy models drive the experiments:

* a 40-variable cyclic chaotic model advanced with classical RK4
  (truth forcing F=8, perturbed forecast forcing F=8.1), and
* a 1-d linear subsurface solute transport model (100 cells, first-order
  upwind advection, Dirichlet inflow of contaminated water at the west face,
  zero-gradient outflow at the east face), with truth and perturbed-forecast
  parameter sets and optional stochastic noise on the source and velocity in
  the forecast role.

All stepping functions accept either a single state vector ``(n,)`` or an
ensemble ``(n, N)`` and are pure given an explicit Generator.
"""

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "L40Params",
    "LSSTParams",
    "ModelRole",
    "L40_TRUTH",
    "L40_FORECAST",
    "LSST_TRUTH",
    "LSST_FORECAST",
    "l40_tendency",
    "rk4_step",
    "l40_initial_condition",
    "lsst_initial_condition",
    "lsst_step",
    "generate_truth",
    "save_trajectory",
    "load_trajectory",
]

SECONDS_PER_YEAR = 365 * 24 * 3600.0


class ModelRole(Enum):
    TRUTH = "truth"
    FORECAST = "forecast"


@dataclass(frozen=True)
class L40Params:
    """Cyclic 40-variable chaotic model parameters."""

    forcing: float = 8.0
    dt: float = 0.05
    n: int = 40


@dataclass(frozen=True)
class LSSTParams:
    """1-d linear subsurface transport parameters.

    ``source`` is the concentration added per cell per step (ppm);
    ``noise_std`` is the std of the per-step Gaussian noise added to the
    source (ppm) and, scaled by the reference velocity, to the velocity.
    """

    n_cells: int = 100
    dx: float = 10.0
    dt: float = 36000.0
    darcy_velocity: float = 1.18e-4
    porosity: float = 0.334
    retardation: float = 5.19
    source: float = 3e-6
    inflow_conc: float = 5.0
    noise_std: float = 0.01

    @property
    def effective_velocity(self):
        return self.darcy_velocity / (self.retardation * self.porosity)

    @property
    def courant(self):
        return self.effective_velocity * self.dt / self.dx


L40_TRUTH = L40Params(forcing=8.0)
L40_FORECAST = L40Params(forcing=8.1)
LSST_TRUTH = LSSTParams()
LSST_FORECAST = LSSTParams(porosity=0.30, retardation=6.87)


def l40_tendency(z, forcing):
    """Time derivative dz_i/dt = (z_{i+1} - z_{i-2}) z_{i-1} - z_i + F.

    Cyclic boundary conditions; ``z`` may be ``(n,)`` or ``(n, N)``.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("state contains non-finite entries")
    zp1 = np.roll(z, -1, axis=0)
    zm1 = np.roll(z, 1, axis=0)
    zm2 = np.roll(z, 2, axis=0)
    # finiteness is contracted on input; a blown-up product surfaces as a
    # non-finite state at the next call instead of a warning here
    with np.errstate(over="ignore", invalid="ignore"):
        return (zp1 - zm2) * zm1 - z + forcing


def rk4_step(z, params):
    """One classical fourth-order Runge-Kutta step of the cyclic model."""
    dt = params.dt
    if dt <= 0:
        raise ValueError("time step must be positive")
    f = params.forcing
    k1 = l40_tendency(z, f)
    k2 = l40_tendency(z + 0.5 * dt * k1, f)
    k3 = l40_tendency(z + 0.5 * dt * k2, f)
    k4 = l40_tendency(z + dt * k3, f)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def l40_initial_condition(params=L40_TRUTH):
    """Reference start: z_i = F everywhere except a 0.001 bump on variable 20."""
    z = np.full(params.n, params.forcing)
    z[19] += 0.001
    return z


def lsst_initial_condition(params=LSST_TRUTH, coord="index"):
    """Initial concentration 3 + sin(5 x_i).

    ``coord`` selects the x_i convention: ``"index"`` uses the cell index,
    ``"meters"`` uses cell-center coordinates in meters.
    """
    i = np.arange(params.n_cells, dtype=float)
    if coord == "index":
        x = i
    elif coord == "meters":
        x = (i + 0.5) * params.dx
    else:
        raise ValueError(f"unknown coordinate convention {coord!r}")
    return 3.0 + np.sin(5.0 * x)


def lsst_step(c, params, role=ModelRole.TRUTH, rng=None):
    """One explicit first-order upwind step of the transport model.

    Flow is west to east; the west face carries Dirichlet inflow at
    ``inflow_conc`` and the east face is zero-gradient outflow. In the
    FORECAST role a per-step Gaussian perturbation is added to the source
    (std ``noise_std`` ppm) and to the velocity (std ``noise_std`` relative
    to the reference velocity); per-member draws are taken column-wise when
    ``c`` is an ensemble.
    """
    c = np.asarray(c, dtype=float)
    onedim = c.ndim == 1
    work = c[:, None] if onedim else c
    n_members = work.shape[1]

    u = np.full(n_members, params.darcy_velocity)
    q = np.full(n_members, params.source)
    if role is ModelRole.FORECAST:
        if rng is None:
            raise ValueError("forecast stepping needs an rng for model noise")
        eps = rng.standard_normal((2, n_members))
        q = q + params.noise_std * eps[0]
        u = u + params.noise_std * params.darcy_velocity * eps[1]

    lam = u * params.dt / (params.retardation * params.porosity * params.dx)
    if np.any(lam >= 1.0) or np.any(lam < 0.0):
        raise ValueError(
            f"Courant number out of [0, 1) after noise (max {lam.max():.3f}); "
            "reduce dt or noise_std"
        )

    upwind = np.empty_like(work)
    upwind[0] = work[0] - params.inflow_conc
    upwind[1:] = work[1:] - work[:-1]
    out = work - lam[None, :] * upwind + q[None, :]
    return out[:, 0] if onedim else out


def generate_truth(params, steps, role=ModelRole.TRUTH, rng=None, coord="index"):
    """Integrate a reference trajectory; row k is the state after k steps.

    Returns an ``(steps, n)`` array whose first row is the initial condition,
    so ``steps=1`` returns the initial condition alone.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if isinstance(params, L40Params):
        state = l40_initial_condition(params)
        advance = lambda z: rk4_step(z, params)
    elif isinstance(params, LSSTParams):
        state = lsst_initial_condition(params, coord=coord)
        advance = lambda c: lsst_step(c, params, role=role, rng=rng)
    else:
        raise TypeError(f"unknown model parameters {type(params).__name__}")
    traj = np.empty((steps, state.size))
    traj[0] = state
    for k in range(1, steps):
        state = advance(state)
        traj[k] = state
    return traj


def save_trajectory(path, trajectory):
    """Dump a trajectory as CSV with header ``step,var_0,...,var_{n-1}``."""
    trajectory = np.asarray(trajectory)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"var_{i}" for i in range(trajectory.shape[1])])
        for k, row in enumerate(trajectory):
            writer.writerow([k] + [repr(float(v)) for v in row])


def load_trajectory(path):
    """Read a trajectory written by :func:`save_trajectory`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "step":
            raise ValueError(f"{path}: not a trajectory file")
        rows = [[float(v) for v in row[1:]] for row in reader]
    return np.asarray(rows)

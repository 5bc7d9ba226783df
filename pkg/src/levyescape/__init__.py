"""Escape probability and mean exit time of the Morris-Lecar neuron under
symmetric alpha-stable noise: nonlocal PDE solver, Monte Carlo cross-check,
and basin-stability sweeps."""

__version__ = "0.1.0"

from .errors import (ConfigError, GeometryError, HorizonTooShort, InsufficientData,  # noqa: E402
                     LevyEscapeError, LinearSolveFailure, NoConvergence, NonFiniteSolution,
                     OutOfDomain, OutOfRegion, Singular)
from .model import (I_HOPF, MLParams, MorrisLecarDrift, ScalingMap, ZeroDrift, drift,  # noqa: E402
                    find_equilibrium, jacobian, nullclines)
from .noise import (NoiseSpec, StableParams, Stream, c_alpha, increment, jump_intensity,  # noqa: E402
                    sample, sample_standard, tail_constant, tail_exponent)
from .solver import (S_STAR, Grid, Region, ScalarField, SolverConfig, TargetStrip,  # noqa: E402
                     assemble, convergence_study, solve_fep, solve_mfet)
from .montecarlo import SimConfig, estimate_fep, estimate_mfet, simulate  # noqa: E402
from .metrics import SweepSpec, ThresholdSpec, r_fep, r_mfet, sweep  # noqa: E402
from .kernels import BACKEND  # noqa: E402

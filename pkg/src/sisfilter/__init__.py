"""Distributed recursive filtering for one-dimensional chains of spatially
interconnected subsystems with randomly missing measurements."""

__version__ = "0.1.0"

from .errors import (IllPosedChainError, IndexRangeError, ShapeError, SimulationError,
                     SingularBlockError, SISError, ValidationError)
from .model import (ChainModel, SignalDims, SubsystemBlock, ValidationReport, block_at,
                    partition_g, validate_chain)
from .interconnect import (ChainTransfer, InterconnectSolution, KnownPart, PhiBeta,
                           chain_transfer, known_part, monolithic_solve, phi_beta,
                           propagate_chain, solve_boundary, solve_interconnect)
from .nahi import (DropoutSchedule, FilterState, GainPair, gains, init_filter, step_all,
                   update)
from .sim import InitialCondition, Scenario, Trace, mse, sample_gamma, simulate
from .runner import FilterRun, run_filter, run_predictor

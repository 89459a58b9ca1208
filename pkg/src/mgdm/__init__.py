"""Mode-group-division-multiplexed GI-MMF link simulator (OOK, direct detection)."""

from .config import RunConfig
from .experiments import run_four_channel, run_single_channel, sweep_crosstalk

__all__ = ["RunConfig", "run_single_channel", "run_four_channel", "sweep_crosstalk"]
__version__ = "0.1.0"

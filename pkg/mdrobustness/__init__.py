__version__ = "0.1.0"

from .evaluation.config import ExperimentConfig  # noqa: E402
from .evaluation.experiment import EvalReport, Experiment  # noqa: E402
from .main import run_experiment  # noqa: E402

__all__ = ["EvalReport", "Experiment", "ExperimentConfig", "__version__", "run_experiment"]

class MdRobustnessError(Exception):
    """Base class for every error raised by the toolkit."""


class ContainerError(MdRobustnessError, ValueError):
    """Measurement container is missing, malformed or inconsistent."""


class SynthesisError(MdRobustnessError, ValueError):
    """Synthetic target parameters would alias or are otherwise invalid."""


class DegenerateSpectrogramError(MdRobustnessError, ValueError):
    """Spectrogram carries no energy at all."""


class NoiseSpecError(MdRobustnessError, ValueError):
    """Noise specification is malformed or lacks a parameter its mode needs."""


class NoiseInjectionError(MdRobustnessError, ValueError):
    """Noise cannot be calibrated, e.g. a segment has zero signal power."""


class FeatureError(MdRobustnessError, ValueError):
    """Feature extraction input is invalid (all columns padded, bad pmf)."""


class SvmConvergenceError(MdRobustnessError, RuntimeError):
    """SMO did not reach the KKT tolerance within its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class SplitError(MdRobustnessError, ValueError):
    """Stratified split cannot be formed."""


class LeakageError(MdRobustnessError, AssertionError):
    """Training and evaluation measurement ids intersect."""


class DegenerateFoldError(MdRobustnessError, ValueError):
    """A fold's training data contains a single class."""


class ConfigError(MdRobustnessError, ValueError):
    """Experiment configuration failed validation.

    Parameters
    ----------
    problems : list of str
        Every problem found, in the order they were checked.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__(
            f"{len(self.problems)} configuration problem(s): " + "; ".join(self.problems)
        )


class HardCheckError(MdRobustnessError, ValueError):
    """Run log contains failed error entries and hard checking is on."""


class OutputExistsError(MdRobustnessError, FileExistsError):
    """Output directory already holds files and overwriting was not requested."""


class UsageError(MdRobustnessError, ValueError):
    """Command line arguments could not be parsed."""

"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, parameters or incompatible inputs."""


class NumericError(ArithmeticError):
    """A non-finite or otherwise unusable numerical value was produced."""


class DomainExit(Exception):
    """A particle position lies outside the simulation domain."""


class ParticleCapExceeded(RuntimeError):
    """The ensemble grew beyond the configured particle cap.

    The partial run result collected up to the breach is kept on ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result

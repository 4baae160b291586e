"""Exception hierarchy shared by all freqhom modules."""


class FreqHomError(Exception):
    """Base class for simulator errors."""


class InvalidArgument(FreqHomError, ValueError):
    pass


class IncompatibleGrids(FreqHomError, ValueError):
    pass


class ResolutionError(FreqHomError, ValueError):
    pass


class DegenerateMask(FreqHomError, ValueError):
    pass


class DegenerateSplit(FreqHomError, ValueError):
    pass


class DependentModes(FreqHomError, ValueError):
    pass


class EmptyJSA(FreqHomError, ValueError):
    pass


class NumericError(FreqHomError, ArithmeticError):
    pass


class InvalidBasis(FreqHomError, ValueError):
    pass


class UnknownMode(FreqHomError, KeyError):
    pass


class RegistryMismatch(FreqHomError, ValueError):
    pass


class PerturbativeValidity(FreqHomError, ValueError):
    pass


class InvalidOrder(FreqHomError, ValueError):
    pass


class InvalidUnitary(FreqHomError, ValueError):
    pass


class CannotNormalize(FreqHomError, ValueError):
    pass


class UndefinedG2(FreqHomError, ArithmeticError):
    pass


class ConfigError(FreqHomError, ValueError):
    """Configuration problem; ``line``/``column`` point into the source file when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)

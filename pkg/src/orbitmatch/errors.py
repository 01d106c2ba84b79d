"""Exception types shared across the package."""


class OrbitmatchError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(OrbitmatchError):
    """A point, orbit or observation has an incompatible dimension."""


class GaussAtZero(OrbitmatchError):
    """The Gauss map is undefined at x = 0; callers should resample."""


class SelectorGap(OrbitmatchError):
    """A skew-product driving value fell outside the selector partition."""


class KTooSmall(OrbitmatchError):
    """Tuple statistics need at least two orbits/sequences."""


class NTooLarge(OrbitmatchError):
    """Requested window exceeds the available data (or a hard size guard)."""


class TooFewPoints(OrbitmatchError):
    """A correlation sum needs at least k sample points."""


class NoUsableRadii(OrbitmatchError):
    """Every radius was degenerate (saturated, empty, or below the noise floor)."""


class NotIrreducible(OrbitmatchError):
    """The transition matrix's support graph is not strongly connected."""


class NotAperiodic(OrbitmatchError):
    """The chain is periodic; stationary sampling would not be mixing."""


class NoConvergence(OrbitmatchError):
    """Power iteration failed to converge within the iteration budget."""


class InvalidDistribution(OrbitmatchError):
    """A probability vector was negative or did not sum to one."""


class CylinderTooLong(OrbitmatchError):
    """Cylinder length exceeds the sequence length."""


class EmptyTable(OrbitmatchError):
    """A cylinder table with zero total count cannot yield an entropy."""


class AlphabetMismatch(OrbitmatchError):
    """Sequence symbols do not fit the encoder's input alphabet."""


class EncodedTooShort(OrbitmatchError):
    """An encoded sequence is shorter than the requested window."""


class GcdNotOne(OrbitmatchError):
    """Scrabble weights must be coprime for the expanded-matrix constant."""


class ConfigInvalid(OrbitmatchError):
    """An experiment configuration failed validation."""

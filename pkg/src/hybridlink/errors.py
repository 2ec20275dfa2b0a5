"""Exception hierarchy shared by every hybridlink module."""


class HybridLinkError(Exception):
    """Base class; ``category`` is the machine-readable tag the CLI reports."""

    category = "error"


class InvalidDimensionError(HybridLinkError, ValueError):
    category = "invalid-dimension"


class OutOfRangeError(HybridLinkError, ValueError):
    category = "out-of-range"


class DomainError(HybridLinkError, ValueError):
    category = "domain"


class LabelError(HybridLinkError, KeyError):
    category = "label"

    def __str__(self):
        # KeyError quotes its argument; keep plain messages
        return str(self.args[0]) if self.args else ""


class LabelCollisionError(LabelError):
    category = "label-collision"


class InvalidPOVMError(HybridLinkError, ValueError):
    category = "invalid-povm"


class NormalizationError(HybridLinkError, ValueError):
    category = "normalization"


class DegenerateStateError(HybridLinkError, ValueError):
    category = "degenerate-state"


class TruncationError(HybridLinkError, ValueError):
    category = "truncation"


class NoSolutionError(HybridLinkError, ValueError):
    category = "no-solution"


class NonMonotoneError(HybridLinkError, RuntimeError):
    category = "non-monotone"


class ScenarioError(HybridLinkError, ValueError):
    category = "scenario"


class ScenarioParseError(ScenarioError):
    category = "parse"


class TruncationWarning(UserWarning):
    """Emitted when a truncated Fock expansion leaves a non-negligible tail."""

"""Exception hierarchy for the torus computation pipeline.

Every failure mode that the algorithms can report deliberately gets its own
class so callers (and the CLI exit-code mapping) can tell configuration
problems, violated analytic conditions and numerical breakdowns apart.
"""


class KamError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class UsageError(KamError):
    """Bad invocation: missing files, malformed config, invalid arguments."""

    exit_code = 1


class ConditionError(KamError):
    """A smallness/arithmetic condition required by the scheme is violated."""

    exit_code = 2


class NumericalError(KamError):
    """Numerical failure during an otherwise well-posed computation."""

    exit_code = 3


# -- arithmetic / frequency analysis ----------------------------------------

class ResonanceError(ConditionError):
    """The frequency vector admits an exact integer relation."""


class BudgetError(UsageError):
    """An enumeration or search exceeded its configured budget."""


class NeedsLargerTableError(UsageError):
    """A query lies beyond the sampled range of an arithmetic profile."""


class ConditionUnsatisfiableError(ConditionError):
    """No admissible parameter (e.g. Q0) satisfies the requested inequality."""


class BasisSearchError(BudgetError):
    """No unimodular rational basis was found within the search budget."""


# -- function algebra --------------------------------------------------------

class DomainError(UsageError):
    """Invalid analyticity domain parameters."""


class TruncationBudgetError(NumericalError):
    """Truncation discards exceeded the configured accounting budget."""


class RealityError(NumericalError):
    """Imaginary parts above tolerance appeared in a real quantity."""


class HomologicalError(UsageError):
    """Right-hand side of the homological equation has averaged modes."""


# -- step / iteration --------------------------------------------------------

class StepConditionError(ConditionError):
    """A per-step precondition inequality failed in strict mode."""


class StepContractError(NumericalError):
    """The measured step output violates the guaranteed remainder bound."""


class InversionError(ConditionError):
    """Frequency-map inversion precondition or convergence failure."""


class FlowDomainError(ConditionError):
    """Generator derivative bounds for a time-one flow are violated."""


class CompositionDomainError(NumericalError):
    """Range of the inner map escapes the domain of the outer map."""


class DivergenceError(NumericalError):
    """The iteration stopped improving before reaching the target norm."""


class ScheduleError(ConditionError):
    """Schedule construction failed (width budget, table range, ...)."""


# -- reduction / verification -------------------------------------------------

class NondegeneracyError(ConditionError):
    """The integrable Hessian is singular or too ill-conditioned."""


class EpsilonTooLargeError(ConditionError):
    """The perturbation exceeds the admissible smallness threshold."""


class PlacementError(NumericalError):
    """Newton solve for the torus action placement failed."""

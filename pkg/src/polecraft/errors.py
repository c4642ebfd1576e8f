"""Exception hierarchy shared by every polecraft module."""


class PolecraftError(Exception):
    """Base class for all errors raised by polecraft."""


class RankDeficientInput(PolecraftError):
    """A matrix that must have full column rank does not."""


class RankDeficientB(RankDeficientInput):
    """The input matrix B is not of full column rank."""


class NotControllable(PolecraftError):
    """The pair (A, B) fails the controllability rank test."""


class UnmatchedConjugate(PolecraftError):
    """A non-real pole was supplied without its complex conjugate."""

    def __init__(self, pole):
        self.pole = pole
        super().__init__(f"pole {pole!r} has no conjugate partner")


class StepError(PolecraftError):
    """A failure tied to a particular assignment step.

    ``step`` is the number of columns already assigned when the failure
    happened (``None`` if unknown).
    """

    step = None

    def at_step(self, step):
        self.step = step
        return self

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            return f"step {self.step}: {msg}"
        return msg


class EmptyNullSpace(StepError):
    """The constraint matrix of a step has a trivial null space."""


class DegenerateDirection(StepError):
    """The best direction of a real step has numerically zero x-part."""


class OrthogonalityLoss(StepError):
    """Appending columns destroyed orthonormality of X beyond tolerance."""


class LinearlyDependentParts(StepError):
    """Real and imaginary parts of a complex vector are parallel."""


class SubspaceTooSmall(StepError):
    """The balanced pair strategy needs a null space of dimension >= 2."""


class InfeasibleBalancing(StepError):
    """No real orthonormal pair exists for a leading conjugate pair."""


class NoViableCandidate(StepError):
    """Both conjugate-pair strategies were rejected."""


class AllStartsFailed(PolecraftError):
    """Every start of the multi-start solver raised."""

"""Exception hierarchy shared by every layer of the planner."""


class DMGError(Exception):
    """Base class for all planner errors."""


# geometry
class ParseError(DMGError):
    pass


class DegenerateGeometry(DMGError):
    pass


class ResolutionTooCoarse(DMGError):
    pass


class InvalidFrame(DMGError):
    pass


# graph construction and lookup
class EmptyGraph(DMGError):
    pass


class DegenerateFrame(DMGError):
    pass


class NoNode(DMGError):
    pass


class NoAngularComponent(DMGError):
    pass


# planning
class NoOpposition(DMGError):
    pass


class NoPath(DMGError):
    pass


class InfeasibleTransition(DMGError):
    pass


class NoRegrasp(DMGError):
    pass


class NoSupportGrasp(DMGError):
    pass


class NoRelease(DMGError):
    pass


class PlanInfeasible(DMGError):
    """Raised by the top-level planner; ``reason`` names the failing sub-planner."""

    def __init__(self, reason, message=""):
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


# execution
class NoPushPoint(DMGError):
    pass


class SimDivergence(DMGError):
    pass

#!/usr/bin/env python3

class HitchinError(Exception):
    """Base error. `details` is serialised into the failure report."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


class ConfigError(HitchinError):
    pass


class InvalidMetric(ConfigError):
    pass


class NotOnSphere(ConfigError):
    pass


class GradeError(ConfigError):
    pass


class NotAntiSelfDual(ConfigError):
    pass


class ReportWriteError(ConfigError):
    """The report path cannot be written."""


class NumericalFailure(HitchinError):
    pass


class NotStable(NumericalFailure):
    def __init__(self, message, hitchin_lambda=None, cell=None, **details):
        super().__init__(message, hitchin_lambda=hitchin_lambda, cell=cell, **details)
        self.hitchin_lambda = hitchin_lambda
        self.cell = cell


class DegenerateContact(NumericalFailure):
    pass


class NotPseudoconvexFrame(NumericalFailure):
    pass


class TorsionTypeError(NumericalFailure):
    pass


class GapNotResolved(NumericalFailure):
    pass


class StabilityBreakdown(NumericalFailure):
    pass


class Stalled(NumericalFailure):
    pass

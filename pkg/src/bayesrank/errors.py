"""Exception types raised across the package.

Data errors (bad files, bad shapes) derive from DataError; oracle transport
failures derive from OracleError so the CLI can map them to distinct exit
codes.
"""


class BayesRankError(Exception):
    pass


class DataError(BayesRankError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingField(ParseError):
    pass


class DimensionMismatch(DataError):
    pass


class ZeroNorm(DataError):
    pass


class NonFinite(DataError):
    pass


class MissingScores(DataError):
    pass


class DegenerateInstance(DataError):
    pass


class EmptyCandidateList(DataError):
    pass


class UnknownScorer(DataError):
    pass


class NotPositiveDefinite(BayesRankError):
    pass


class ShapeMismatch(BayesRankError):
    pass


class NegativeSigma(BayesRankError):
    pass


class LengthMismatch(BayesRankError):
    pass


class TooFewPoints(BayesRankError):
    pass


class EmptyInput(BayesRankError):
    pass


class Degenerate(BayesRankError):
    pass


class OracleError(BayesRankError):
    pass


class MissingPrecomputedScore(OracleError):
    pass


class OracleProtocolError(OracleError):
    pass


class OracleTimeout(OracleError):
    pass

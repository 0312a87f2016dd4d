"""Exception types used across the package.

All errors derive from :class:`AdaRecError` so callers (and the CLI) can
catch one base class. Errors that point at a location in an input carry
that location as attributes.
"""

from __future__ import annotations


class AdaRecError(Exception):
    """Base class for every error raised by this package."""


# --- dataset ---------------------------------------------------------------

class UnknownColumn(AdaRecError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"unknown column {column!r} not in schema")


class MissingColumn(AdaRecError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"required column {column!r} missing from header")


class TypeMismatch(AdaRecError):
    def __init__(self, row: int, column: str, detail: str = ""):
        self.row = row
        self.column = column
        msg = f"row {row}, column {column!r}: value does not match declared kind"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DuplicateUserId(AdaRecError):
    def __init__(self, user_id: str, row: int | None = None):
        self.user_id = user_id
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"duplicate user_id {user_id!r}{where}")


class EmptyDataset(AdaRecError):
    pass


# --- profiling -------------------------------------------------------------

class ParseError(AdaRecError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        msg = f"line {line}: cannot parse"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptyCompletion(AdaRecError):
    pass


class BackendError(AdaRecError):
    pass


# --- retrieval -------------------------------------------------------------

class DimensionMismatch(AdaRecError):
    def __init__(self, got: int, want: int):
        self.got = got
        self.want = want
        super().__init__(f"vector dimension {got} != {want}")


class PoolTooSmall(AdaRecError):
    pass


class NotEnoughCases(AdaRecError):
    pass


# --- importance ------------------------------------------------------------

class LengthMismatch(AdaRecError):
    def __init__(self, got: int, want: int):
        self.got = got
        self.want = want
        super().__init__(f"sequence length {got} != {want}")


class UnlabeledRow(AdaRecError):
    def __init__(self, user_id: str):
        self.user_id = user_id
        super().__init__(f"record {user_id!r} has no label")


# --- causal ----------------------------------------------------------------

class InsufficientSamples(AdaRecError):
    def __init__(self, n: int, cond_size: int):
        self.n = n
        self.cond_size = cond_size
        super().__init__(
            f"{n} rows is too few for a conditioning set of size {cond_size}"
        )


class TargetNotInGraph(AdaRecError):
    def __init__(self, target: str):
        self.target = target
        super().__init__(f"target {target!r} is not a node of the graph")


# --- reasoning -------------------------------------------------------------

class RecommendationParseError(AdaRecError):
    """Base for errors while parsing an LLM completion; carries the raw text."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class NoJsonFound(RecommendationParseError):
    def __init__(self, raw: str):
        super().__init__("no parseable JSON object in completion", raw)


class UnknownBrand(RecommendationParseError):
    def __init__(self, token: str, raw: str):
        self.token = token
        super().__init__(f"brand {token!r} is not in the catalog", raw)


class WrongBrandCount(RecommendationParseError):
    def __init__(self, got: int, want: int, raw: str = ""):
        self.got = got
        self.want = want
        super().__init__(f"expected {want} distinct brands, got {got}", raw)


class BadLabel(RecommendationParseError):
    def __init__(self, value: object, raw: str):
        self.value = value
        super().__init__(f"cannot interpret label value {value!r}", raw)


class MissingCaseProfile(AdaRecError):
    def __init__(self, user_id: str):
        self.user_id = user_id
        super().__init__(f"case {user_id!r} has no profile text")


class ExhaustedRetries(AdaRecError):
    def __init__(self, attempts: int, last_error: Exception):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"no parseable completion after {attempts} attempts: {last_error}")


# --- llm_client ------------------------------------------------------------

class Timeout(AdaRecError):
    pass


class HttpStatus(AdaRecError):
    def __init__(self, code: int, body: str):
        self.code = code
        self.body = body[:500]
        super().__init__(f"HTTP {code}: {self.body}")


class CassetteMiss(AdaRecError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no cassette entry for request hash {digest}")


class ScriptExhausted(AdaRecError):
    pass


# --- synth -----------------------------------------------------------------

class CyclicSpec(AdaRecError):
    pass


class BadMechanism(AdaRecError):
    def __init__(self, variable: str, detail: str):
        self.variable = variable
        super().__init__(f"mechanism for {variable!r}: {detail}")


# --- evaluation ------------------------------------------------------------

class KeyMismatch(AdaRecError):
    pass


# --- cli -------------------------------------------------------------------

class ConfigError(AdaRecError):
    pass

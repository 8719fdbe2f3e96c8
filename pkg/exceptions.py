import logging

logger = logging.getLogger(__name__)

PRECONDITION_EXIT = 3
IO_EXIT = 4


class AppException(Exception):
    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail


class PreconditionError(AppException):
    def __init__(self, detail: str):
        super().__init__(PRECONDITION_EXIT, detail)


# ========= SYMBOLIC DYNAMICS =========

class EmptyRowOrColumn(PreconditionError):
    def __init__(self, index: int, axis: str = "row"):
        self.index = index
        self.axis = axis
        super().__init__(f"{axis} {index} of the adjacency matrix has no admissible transition")


class NonSquare(PreconditionError):
    def __init__(self, shape):
        super().__init__(f"matrix must be square, got shape {tuple(shape)}")


class AlphabetMismatch(PreconditionError):
    def __init__(self, detail: str = "points belong to different symbol spaces"):
        super().__init__(detail)


class NotMixing(PreconditionError):
    def __init__(self):
        super().__init__("subshift is not topologically mixing")


class GapTooSmall(PreconditionError):
    def __init__(self, index: int, gap: int, required: int):
        self.index = index
        super().__init__(f"segment {index}: gap {gap} is below the required {required}")


# ========= CHAINS & WITNESSES =========

class NotChainTransitive(PreconditionError):
    def __init__(self, components: int):
        self.components = components
        super().__init__(f"chain graph splits into {components} strongly connected components")


class WitnessInequalityViolated(PreconditionError):
    def __init__(self, index: int, detail: str):
        self.index = index
        super().__init__(f"hypothesis {index} violated: {detail}")


class ChainStepViolated(PreconditionError):
    def __init__(self, index: int, error: float, delta: float):
        self.index = index
        super().__init__(f"step {index}: d(T(x_i), x_(i+1)) = {error:.3e} is not below delta = {delta:.3e}")


class ChainNotFound(PreconditionError):
    def __init__(self, detail: str):
        super().__init__(detail)


# ========= HYPERBOLIC MODELS =========

class NotUnimodular(PreconditionError):
    def __init__(self, det):
        super().__init__(f"integer matrix must have |det| = 1, got det = {det}")


class EigenvalueOnUnitCircle(PreconditionError):
    def __init__(self, modulus: float):
        self.modulus = modulus
        super().__init__(f"eigenvalue of modulus {modulus:.12f} lies on the unit circle")


class LiftAmbiguous(PreconditionError):
    def __init__(self, index: int, norm: float):
        self.index = index
        super().__init__(f"step {index}: wrapped error {norm:.3e} >= 1/4, delta too large for the nearest lift")


# ========= PROPERTY SUITE =========

class RelationOracleUnavailable(PreconditionError):
    def __init__(self, system: str):
        super().__init__(f"{system} provides no decidable stable/unstable relation")


class NotShadowingCapable(PreconditionError):
    def __init__(self, system: str):
        super().__init__(f"{system} has no shadowing construction")


# ========= CONFIG & I/O =========

class InvalidSpec(PreconditionError):
    def __init__(self, detail: str):
        super().__init__(detail)


class ParseError(PreconditionError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class UnknownKind(PreconditionError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"unknown system kind '{kind}'")


class ParamOutOfRange(PreconditionError):
    def __init__(self, name: str, value, expected: str):
        self.name = name
        super().__init__(f"parameter {name} = {value!r} out of range ({expected})")


class IoError(AppException):
    def __init__(self, detail: str):
        super().__init__(IO_EXIT, detail)


def app_exception_handler(exc: AppException) -> int:
    logger.error("[Error] %s", exc.detail)
    return exc.exit_code

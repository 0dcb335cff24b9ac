"""Exception hierarchy shared by every compiler stage.

Each class carries a stable ``code`` (used in machine-readable CLI errors)
and an ``exit_status`` matching the CLI contract: 1 user error,
2 compilation failure, 3 verification failure.
"""


class OverlayError(Exception):
    code = "overlay_error"
    exit_status = 2

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


# -- frontend -----------------------------------------------------------------

class KernelSyntaxError(OverlayError):
    code = "syntax_error"
    exit_status = 1

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")

    def to_dict(self):
        d = super().to_dict()
        d.update(line=self.line, col=self.col)
        return d


class UnsupportedConstruct(OverlayError):
    code = "unsupported_construct"
    exit_status = 1

    def __init__(self, construct, detail=""):
        self.construct = construct
        msg = f"unsupported construct: {construct}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MultipleAssignment(OverlayError):
    code = "multiple_assignment"
    exit_status = 1


class DotParseError(OverlayError):
    code = "dot_parse_error"
    exit_status = 1


class UnknownNtype(DotParseError):
    code = "unknown_ntype"


# -- mapping / PAR --------------------------------------------------------------

class InvalidParameter(OverlayError):
    code = "invalid_parameter"
    exit_status = 1


class DoesNotFit(OverlayError):
    code = "does_not_fit"


class Unroutable(OverlayError):
    code = "unroutable"


class DelayOverflow(OverlayError):
    code = "delay_overflow"

    def __init__(self, block, port, required, limit):
        self.block = block
        self.port = port
        self.required = required
        self.limit = limit
        super().__init__(
            f"input port {port} of {block} needs a delay of {required} cycles "
            f"but the delay chain holds at most {limit}"
        )


# -- configuration / simulation -------------------------------------------------

class FingerprintMismatch(OverlayError):
    code = "fingerprint_mismatch"
    exit_status = 1


class MalformedBlob(OverlayError):
    code = "malformed_blob"
    exit_status = 1


class ConfigMismatch(OverlayError):
    code = "config_mismatch"
    exit_status = 3


class NotSteadyState(OverlayError):
    code = "not_steady_state"
    exit_status = 3


class VerificationFailed(OverlayError):
    code = "verification_failed"
    exit_status = 3

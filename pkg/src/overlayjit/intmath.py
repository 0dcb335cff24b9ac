"""Two's-complement helpers used by every evaluator."""

DEFAULT_WIDTH = 32


def wrap(value: int, width: int = DEFAULT_WIDTH) -> int:
    """Reduce ``value`` to a signed ``width``-bit integer."""
    mask = (1 << width) - 1
    value &= mask
    if value >> (width - 1):
        value -= 1 << width
    return value


def apply(opcode: str, a: int, b: int, width: int = DEFAULT_WIDTH) -> int:
    if opcode == "add":
        return wrap(a + b, width)
    if opcode == "sub":
        return wrap(a - b, width)
    if opcode == "mul":
        return wrap(a * b, width)
    raise ValueError(f"unknown opcode {opcode!r}")

"""Exception hierarchy.

Each error carries the CLI exit code it maps to.
"""


class SpecterError(Exception):
    exit_code = 1


class EmptyPayload(SpecterError, ValueError):
    exit_code = 64


class LengthError(SpecterError, ValueError):
    exit_code = 64


class IntegrityError(SpecterError):
    exit_code = 2


class CapacityError(SpecterError):
    exit_code = 3

    def __init__(self, capacity_bits, required_bits):
        self.capacity_bits = capacity_bits
        self.required_bits = required_bits
        super().__init__(
            f"host capacity is {capacity_bits} bits, {required_bits} bits required"
        )


class SignalNotFound(SpecterError):
    exit_code = 3


class ConstructionError(SpecterError, ValueError):
    exit_code = 64


class FormatError(SpecterError):
    exit_code = 4


class EmptySelection(SpecterError):
    exit_code = 4


class ShapeMismatch(SpecterError, ValueError):
    exit_code = 4


class TooFewSamples(SpecterError, ValueError):
    exit_code = 64

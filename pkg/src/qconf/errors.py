"""Shared exception types."""


class ContractError(ValueError):
    """An argument or configuration violates a documented precondition."""


class ResourceLimitError(ContractError):
    """A request exceeds one of the simulator's hard resource guards."""


class ProtocolCorruptionError(RuntimeError):
    """A decode step hit data that honest protocol execution can never produce."""

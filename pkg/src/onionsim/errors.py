class ConfigError(ValueError):
    """Invalid or inconsistent parameters, raised before any round runs."""


class OnionError(RuntimeError):
    """Misuse of the onion registry (unknown handle, double processing, bad plan)."""


class AdversaryPowerError(RuntimeError):
    """A strategy tried to drop an onion it has no access to."""

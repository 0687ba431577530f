"""Exception types shared across the package."""


class SizingError(ValueError):
    """A requested object (lattice, state space, kernel) exceeds a configured cap."""


class GeometryError(ValueError):
    """Block or halo geometry does not fit the lattice."""


class NonReversibleError(ValueError):
    """A kernel fails detailed balance where reversibility is required."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""

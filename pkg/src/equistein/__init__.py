"""Group-equivariant Stein variational inference and energy-model training."""

__version__ = "0.1.0"

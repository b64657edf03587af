from . import tensor, layers, adam, checkpoint  # noqa: F401

"""RNN-T speech recognition with on-the-fly intent conditioning, desk scale."""

__version__ = "0.1.0"

from intent_rnnt.kernels import BACKEND  # noqa: F401

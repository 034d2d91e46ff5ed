"""Anchor-based residual encoding of object coordinates and classical pose recovery."""

from ._anchorpose import *  # noqa: F401,F403
from ._anchorpose import AnchorposeError, __doc__  # noqa: F401

"""Leaf peeling on metric trees."""

from ._leafpeel import (
    LeafpeelError,
    Response,
    Tree,
    __version__,
    fixtures,
    reconstruct,
    response_matrix,
    tw_matrix,
    verify,
)

__all__ = [
    "LeafpeelError",
    "Response",
    "Tree",
    "__version__",
    "fixtures",
    "reconstruct",
    "response_matrix",
    "tw_matrix",
    "verify",
]

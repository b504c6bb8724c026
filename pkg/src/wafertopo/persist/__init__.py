from .backend import BACKEND
from .filtration import (
    CubicalFiltration,
    PersistenceDiagram,
    build_filtration,
    compute_persistence,
    distance_filtration,
    tda_signature,
)

__all__ = [
    "BACKEND",
    "CubicalFiltration",
    "PersistenceDiagram",
    "build_filtration",
    "compute_persistence",
    "distance_filtration",
    "tda_signature",
]

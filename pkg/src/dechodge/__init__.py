"""Discrete Hodge decomposition and harmonic cohomology on simplicial meshes."""

from .decomposition import basis, betti_numbers, dimensions, hodge_split, relative_betti_numbers
from .errors import DecError
from .harmonic import echo_backward, echo_forward, lemma1_solve, verify
from .mesh import SimplicialComplex, generate, load_mesh, save_mesh, validate
from .operators import Cochain, assemble, de_rham_map

__version__ = "0.1.0"

__all__ = [
    "Cochain",
    "DecError",
    "SimplicialComplex",
    "assemble",
    "basis",
    "betti_numbers",
    "de_rham_map",
    "dimensions",
    "echo_backward",
    "echo_forward",
    "generate",
    "hodge_split",
    "lemma1_solve",
    "load_mesh",
    "relative_betti_numbers",
    "save_mesh",
    "validate",
    "verify",
]

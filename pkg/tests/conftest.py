import functools

import pytest

from dechodge import mesh, operators


@functools.lru_cache(maxsize=None)
def _mesh(shape, items):
    return mesh.generate(shape, **dict(items))


@functools.lru_cache(maxsize=None)
def _ops(shape, items):
    return operators.assemble(_mesh(shape, items))


def get_mesh(shape, **params):
    return _mesh(shape, tuple(sorted(params.items())))


def get_ops(shape, **params):
    """Assembled operators, shared across tests (bases are cached on them)."""
    return _ops(shape, tuple(sorted(params.items())))


@pytest.fixture
def annulus16():
    return get_ops("annulus", n_theta=16, n_r=4)


@pytest.fixture
def annulus32():
    return get_ops("annulus", n_theta=32)


@pytest.fixture
def disk16():
    return get_ops("disk", n=16)


@pytest.fixture
def torus():
    return get_ops("torus")


@pytest.fixture
def circle():
    return get_ops("circle", n=8)

import pytest

from leukopipe import tensor as T


@pytest.fixture(autouse=True)
def fresh_tape():
    """Every test starts and ends with an empty tape."""
    T.tape().reset()
    yield
    T.tape().reset()

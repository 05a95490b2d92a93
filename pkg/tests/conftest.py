import numpy as np
import pytest

from lssbalred import LssModel


@pytest.fixture
def example1():
    """Single-mode 3-state continuous system that is balanced with
    P = Q = diag(2, 1, 0.5)."""
    A = np.array([[-2.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -3.0]])
    B = np.array([[1.0], [0.0], [1.0]])
    C = np.array([[1.0, 1.0, 0.0]])
    return LssModel("continuous", (A,), (B,), (C,))


@pytest.fixture
def example1_lambda():
    return np.diag([2.0, 1.0, 0.5])


@pytest.fixture
def example1_truncated():
    """The order-2 truncation of example1; reachable only on its first state."""
    A = np.array([[-2.0, 0.0], [0.0, -1.0]])
    B = np.array([[1.0], [0.0]])
    C = np.array([[1.0, 1.0]])
    return LssModel("continuous", (A,), (B,), (C,))


def scalar_model(time_domain, a, b=1.0, c=1.0):
    return LssModel(
        time_domain,
        (np.array([[float(a)]]),),
        (np.array([[float(b)]]),),
        (np.array([[float(c)]]),),
    )


def scalar_two_mode(time_domain, a1, a2, b=1.0, c=1.0):
    return LssModel(
        time_domain,
        (np.array([[float(a1)]]), np.array([[float(a2)]])),
        (np.array([[float(b)]]),) * 2,
        (np.array([[float(c)]]),) * 2,
    )


@pytest.fixture
def ct_scalar():
    """A = -1, B = C = 1: L2 gain 1, equality grammians 0.5."""
    return scalar_model("continuous", -1.0)


@pytest.fixture
def dt_scalar():
    """A = 0.5, B = C = 1: l2 gain 2, nice grammians 4/3."""
    return scalar_model("discrete", 0.5)


@pytest.fixture
def dt_two_mode():
    """A1 = 0.3, A2 = 0.4: strongly stable, Kronecker radius 0.25."""
    return scalar_two_mode("discrete", 0.3, 0.4)

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(a, b, floor=1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def kink_free_cloud(rng, n, N, margin=1e-3, lim=0.9):
    """Random normalized cloud whose grid coordinates stay ``margin`` away from integers."""
    q = rng.uniform(-lim, lim, size=(n, 3)) * (N / 2)
    frac = q - np.floor(q)
    frac = np.clip(frac, margin * 2, 1 - margin * 2)
    return (np.floor(q) + frac) / (N / 2)


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d} {'PASS' if passed else 'FAIL'} {title}: {detail}")

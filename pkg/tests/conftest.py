import numpy as np
import pytest

from mvqtok.numerics import make_rng
from mvqtok.quantiser import Quantiser


def random_quantiser(rng: np.random.Generator, n: int, k: int, d: int,
                     refine_steps: int = 5) -> Quantiser:
    """Generic random quantiser with random classifiers."""
    return Quantiser(rng.normal(size=(n, k, d)),
                     rng.normal(size=(n, k, d)),
                     rng.normal(size=(n, k)),
                     refine_steps=refine_steps)


def subspace_quantiser(rng: np.random.Generator, dims: list[int], k: int,
                       leak: float = 0.1, refine_steps: int = 5) -> Quantiser:
    """Codebooks occupying near-orthogonal random subspaces (one per codebook).

    `dims` gives the subspace dimension per codebook; `leak` adds cross-subspace
    noise so coordinate refinement is actually exercised.
    """
    d = sum(dims)
    basis = np.linalg.qr(rng.normal(size=(d, d)))[0]
    codebooks = []
    lo = 0
    for nd in dims:
        sub = basis[:, lo:lo + nd]
        lo += nd
        codebooks.append(rng.normal(size=(k, nd)) @ sub.T + leak * rng.normal(size=(k, d)))
    c = np.stack(codebooks)
    return Quantiser(c, rng.normal(size=c.shape), rng.normal(size=c.shape[:2]),
                     refine_steps=refine_steps)


def model_param_vector(model) -> tuple[list[str], np.ndarray]:
    names = sorted(model.parameters().keys())
    return names, np.concatenate([model.parameters()[k].ravel() for k in names])


def set_model_params(model, names: list[str], vec: np.ndarray) -> None:
    params = model.parameters()
    off = 0
    for name in names:
        p = params[name]
        p[...] = vec[off:off + p.size].reshape(p.shape)
        off += p.size


def grads_to_vector(grads: dict, names: list[str]) -> np.ndarray:
    return np.concatenate([np.asarray(grads[k]).ravel() for k in names])


@pytest.fixture
def rng():
    return make_rng(12345)

"""Central finite-difference oracle for the MLP gradients.

Central differences are only a valid derivative oracle on smooth
neighborhoods, so coordinates whose perturbation flips any ReLU
activation are skipped (the analytic gradient is one-sided there).
"""

import numpy as np

from uavirl.dqn import MlpParams, backward, mlp_forward_batch, mse_loss

FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")


def _loss(params: MlpParams, X, actions, targets) -> float:
    out, _ = mlp_forward_batch(params, X)
    return mse_loss(out[np.arange(len(X)), actions], targets)


def _pattern(params: MlpParams, X):
    _, (_, z1, _, z2, _) = mlp_forward_batch(params, X)
    return (z1 > 0).tobytes() + (z2 > 0).tobytes()


def finite_difference_check(
    params: MlpParams,
    X: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    rng: np.random.Generator,
    coords_per_field: int = 6,
    step: float = 1e-5,
    tol: float = 1e-4,
) -> tuple[int, float]:
    """Compare analytic gradients to central differences on randomly sampled
    coordinates; returns (number checked, worst relative error).

    Raises AssertionError when any smooth coordinate disagrees beyond tol.
    """
    grads = backward(params, X, actions, targets)
    base_pattern = _pattern(params, X)
    checked = 0
    worst = 0.0
    for name in FIELDS:
        arr = getattr(params, name)
        grad = getattr(grads, name).ravel()
        for k in rng.choice(arr.size, size=min(coords_per_field, arr.size), replace=False):
            arrays = {n: getattr(params, n).copy() for n in FIELDS}
            arrays[name].ravel()[k] += step
            plus = MlpParams(**arrays)
            arrays[name].ravel()[k] -= 2 * step
            minus = MlpParams(**arrays)
            if _pattern(plus, X) != base_pattern or _pattern(minus, X) != base_pattern:
                continue  # kink inside the stencil: oracle invalid here
            fd = (_loss(plus, X, actions, targets) - _loss(minus, X, actions, targets)) / (
                2 * step
            )
            denom = max(abs(fd), abs(grad[k]), 1e-8)
            rel = abs(fd - grad[k]) / denom
            worst = max(worst, rel)
            assert rel <= tol, f"{name}[{k}]: fd={fd} analytic={grad[k]} rel={rel}"
            checked += 1
    return checked, worst

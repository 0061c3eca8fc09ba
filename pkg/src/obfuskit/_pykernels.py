"""Pure-numpy SGD epoch; fallback when the compiled extension is unavailable."""

from functools import lru_cache


@lru_cache(maxsize=32)
def _spec(d, h, c, act, reg):
    from obfuskit.models import ModelSpec

    activation = "relu" if act == 0 else "sigmoid"
    if h > 0:
        return ModelSpec.mlp(d, c, h, activation=activation, reg_weight=reg)
    return ModelSpec.softmax(d, c, activation=activation, reg_weight=reg)


def sgd_epoch(theta, Z, y, order, d, h, c, act, lr, reg, batch_size, sign_targets, sign_weight):
    """One pass of mini-batch SGD over ``order``, updating ``theta`` in place."""
    from obfuskit.models import flat_loss_and_gradient

    spec = _spec(d, h, c, act, reg)
    targets = sign_targets if len(sign_targets) else None
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        _, grad = flat_loss_and_gradient(spec, theta, Z[idx], y[idx], targets, sign_weight)
        theta -= lr * grad

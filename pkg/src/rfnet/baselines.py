"""Comparison methods sharing the base network and episodic data pipeline.

* ``ft``: plain supervised training of the base network on support sets, then
  fine-tuning of the classifier weights on each test support set.
* ``pn``: prototypical network on ``h_fuse``; logits are negative squared
  Euclidean distances to per-class mean embeddings.
* ``rfnet-star``: the full model with the metric weights frozen at one (the
  meta step never runs), so the head is an unweighted distance sum.
* ``rfnet``: the full method.
"""
from __future__ import annotations

import enum

import numpy as np

from .meta import (
    RFNetModel,
    TrainConfig,
    episode_forward,
    predict,
    test_adapt_and_predict,
    train,
)
from .numerics import AdamState, Param, adam_step, no_grad, ops


class BaselineKind(str, enum.Enum):
    RFNET = "rfnet"
    RFNET_STAR = "rfnet-star"
    FT = "ft"
    PN = "pn"


METHODS = tuple(k.value for k in BaselineKind)


# -- prototypical network ------------------------------------------------------------

def prototypes(support, support_y, n_classes):
    """Per-class mean embeddings (N_c, d) of support rows (n, d)."""
    support_y = np.asarray(support_y)
    onehot = np.eye(n_classes)[support_y]
    counts = onehot.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError(f"no support rows for classes {np.flatnonzero(counts == 0).tolist()}")
    avg = (onehot / counts).T.astype(ops.as_tensor(support).dtype)
    return ops.matmul(avg, support)


def protonet_logits(support, support_y, query, n_classes):
    """Negative squared Euclidean distance from each query row to each prototype."""
    protos = prototypes(support, support_y, n_classes)
    q = ops.as_tensor(query)
    diff = q.reshape(q.shape[0], 1, q.shape[-1]) - protos.reshape(1, *protos.shape)
    return ops.sum(ops.square(diff), axis=-1) * -1.0


def protonet_predict(support, support_y, query, n_classes):
    """Nearest-prototype labels; ties go to the lowest class index."""
    with no_grad():
        return predict(protonet_logits(support, support_y, query, n_classes))


def protonet_train_step(model: RFNetModel, episode, state: AdamState):
    """One Adam step on the base parameters using the prototype cross-entropy."""
    params = model.base_parameters()
    for p in params:
        p.grad = None
    n_s = len(episode.support_x)
    _, feats = model.net(np.concatenate([episode.support_x, episode.query_x]))
    h = feats.h_fuse
    logits = protonet_logits(h[:n_s], episode.support_y, h[n_s:], episode.n_classes)
    loss = ops.cross_entropy(logits, episode.query_y)
    loss.backward()
    adam_step(params, state)
    return float(loss.data)


# -- fine-tuning -----------------------------------------------------------------------

def finetune_weights(h, labels, w0, steps=50, lr=1e-2):
    """Classifier weights fitted to fixed features ``h`` by ``steps`` Adam steps on cross-entropy.

    Starts from ``w0`` and returns a new Param; ``w0`` is not modified.
    """
    w = Param(np.array(w0, dtype=ops.as_tensor(h).dtype, copy=True), id="net.classifier")
    state = AdamState(lr=lr)
    for _ in range(steps):
        w.grad = None
        loss = ops.cross_entropy(ops.matmul(h, w), labels)
        loss.backward()
        adam_step([w], state)
    return w


def finetune_head(model: RFNetModel, support_x, support_y, steps=50, lr=1e-2):
    """Classifier weights refit on a support set; the base network is left untouched.

    Features are computed once (the backbone is frozen), then the classifier
    is fitted with :func:`finetune_weights`. Returns the new weight Param.
    """
    with no_grad():
        _, feats = model.net(support_x)
    return finetune_weights(feats.h_fuse, support_y, model.net.classifier.data, steps, lr)


def finetune_adapt(model: RFNetModel, support_x, support_y, steps=50, lr=1e-2):
    """A copy of ``model`` whose classifier has been fine-tuned on the support set."""
    adapted = model.clone()
    adapted.net.classifier.data[...] = finetune_head(model, support_x, support_y, steps, lr).data
    return adapted


# -- frozen-metric ablation ----------------------------------------------------------------

def rfnet_star_predict(model: RFNetModel, episode):
    """Final logits with every metric weight fixed at one, whatever ``model.eta`` holds."""
    ones = np.ones(model.eta.shape, dtype=model.eta.dtype)
    with no_grad():
        return episode_forward(model, episode, eta=ones, grad=False)


# -- dispatch ---------------------------------------------------------------------------

def train_method(method, dataset, net_cfg, cfg: TrainConfig, seed=0):
    """Train ``method`` on the environments in ``dataset``; returns a TrainResult."""
    method = BaselineKind(method).value
    return train(dataset, net_cfg, cfg, seed=seed, method=method)


def evaluate_episode(method, model: RFNetModel, episode, cfg: TrainConfig):
    """Predicted query labels and accuracy of ``method`` on one test episode."""
    method = BaselineKind(method)
    if method in (BaselineKind.RFNET, BaselineKind.RFNET_STAR):
        if method is BaselineKind.RFNET_STAR and cfg.test_adapt != "none":
            cfg = TrainConfig(**{**cfg.__dict__, "test_adapt": "none"})
        return test_adapt_and_predict(model, episode, cfg)
    if method is BaselineKind.FT:
        w = finetune_head(model, episode.support_x, episode.support_y, cfg.ft_steps, cfg.ft_lr)
        with no_grad():
            _, feats = model.net(episode.query_x)
            pred = predict(ops.matmul(feats.h_fuse, w))
    else:
        with no_grad():
            n_s = len(episode.support_x)
            _, feats = model.net(np.concatenate([episode.support_x, episode.query_x]))
            h = feats.h_fuse
            pred = protonet_predict(h[:n_s], episode.support_y, h[n_s:], episode.n_classes)
    return pred, float(np.mean(pred == episode.query_y))

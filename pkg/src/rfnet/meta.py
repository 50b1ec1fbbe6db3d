"""Metric-based meta-learning head and the episodic train/test procedure.

The head compares the three base-network features of a query with those of
each class's support shots by cosine distance, giving a distance matrix
``Lambda`` (N_c x M). Learnable weights ``eta`` (M x N_c) turn distances into
class logits ``z_j = -Lambda_j . eta[:, j]``; the base network's own logits are
added before the softmax (residual classification).

Training alternates, per environment, an inner step on the base network's
support-set classification loss and a meta step that only moves ``eta``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .base_network import BaseNetConfig, BaseNetwork, FeatureSet
from .numerics import AdamState, Module, Param, Tensor, adam_step, no_grad, ops

N_FEATURES = 3
TEST_ADAPT_MODES = ("none", "self_episode")


class EpisodeError(ValueError):
    """An episode cannot be sampled or is malformed."""


@dataclass
class TrainConfig:
    lr_inner: float = 1e-3
    lr_meta: float = 1e-2
    batch_size: int = 3
    epochs: int = 20
    n_query: int = 5
    shots: int = 1
    test_adapt: str = "none"
    adapt_steps: int = 1
    ft_steps: int = 50
    ft_lr: float = 1e-2

    def __post_init__(self):
        if self.lr_inner < 0 or self.lr_meta < 0:
            raise ValueError("learning rates must be non-negative")
        if self.test_adapt not in TEST_ADAPT_MODES:
            raise ValueError(f"test_adapt must be one of {TEST_ADAPT_MODES}")
        if self.test_adapt == "self_episode" and self.shots < 2:
            raise ValueError("test_adapt=self_episode needs at least two shots")
        if self.batch_size < 1 or self.epochs < 0 or self.n_query < 1 or self.shots < 1:
            raise ValueError("batch_size, n_query and shots must be >= 1 and epochs >= 0")


class RFNetModel(Module):
    """Base network plus metric weights; ``eta`` is the only meta parameter."""

    def __init__(self, net_cfg: BaseNetConfig, seed=0, eta_init=1.0):
        self.net = BaseNetwork(net_cfg, seed=seed)
        self.eta = Param(np.full((N_FEATURES, net_cfg.n_classes), eta_init), partition="meta")
        self._name_params()

    @property
    def cfg(self):
        return self.net.cfg

    def base_parameters(self):
        return [p for p in self.parameters() if p.partition == "base"]

    def meta_parameters(self):
        return [p for p in self.parameters() if p.partition == "meta"]

    def clone(self):
        return copy.deepcopy(self)

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        for name, p in self.named_parameters():
            if name not in state:
                raise KeyError(f"missing parameter {name}")
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.data[...] = state[name]


def chance_model(net_cfg, seed=0):
    """Untrained model whose metric weights and classifier are zero: every logit is 0."""
    model = RFNetModel(net_cfg, seed=seed, eta_init=0.0)
    model.net.classifier.data[...] = 0
    return model


# -- episodes ------------------------------------------------------------------

@dataclass
class Episode:
    """Support set (class-major, ``shots`` per class) and disjoint query set from one environment."""

    env_id: int
    support_x: np.ndarray
    support_y: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray
    support_ids: np.ndarray
    query_ids: np.ndarray
    shots: int
    n_classes: int

    def __post_init__(self):
        if set(self.support_ids.tolist()) & set(self.query_ids.tolist()):
            raise EpisodeError("support and query observations overlap")
        counts = np.bincount(self.support_y, minlength=self.n_classes)
        if np.any(counts != self.shots):
            raise EpisodeError(f"support must hold exactly {self.shots} shots per class, got {counts.tolist()}")

    @property
    def support_onehot(self):
        return np.eye(self.n_classes)[self.support_y]


def sample_episode(dataset, env_id, n_classes, shots, n_query, rng):
    """Draw ``shots`` support observations per class and ``n_query`` disjoint queries."""
    env = dataset.env(env_id)
    if n_classes > dataset.n_classes:
        raise EpisodeError(f"episode asks for {n_classes} classes, dataset has {dataset.n_classes}")
    need = shots + math.ceil(n_query / n_classes)
    support_ids = []
    for c in range(n_classes):
        idx = env.class_indices(c)
        if len(idx) < need:
            raise EpisodeError(f"environment {env_id} class {c}: {len(idx)} observations, need {need}")
        support_ids.extend(rng.choice(idx, shots, replace=False).tolist())
    support_ids = np.asarray(support_ids)
    pool = np.setdiff1d(np.flatnonzero(env.labels < n_classes), support_ids)
    query_ids = rng.choice(pool, n_query, replace=False)
    return Episode(env_id, env.values[support_ids], env.labels[support_ids], env.values[query_ids],
                   env.labels[query_ids], support_ids, query_ids, shots, n_classes)


# -- metric head -----------------------------------------------------------------

def cosine_distance(a, b):
    """``-a.b / (|a||b|)`` along the last axis; 0 (with a warning) for a zero vector."""
    return ops.cosine_similarity(a, b, axis=-1) * -1.0


def metric_distances(support_feats, support_y, query_feats, n_classes):
    """Distance tensor Lambda of shape (Q, N_c, M).

    ``Lambda[q, j, m]`` is the mean over class-j shots of the cosine distance
    between feature m of the shot and of query q. Feature order is
    (h_time, h_freq, h_fuse).
    """
    support_y = np.asarray(support_y)
    order = np.argsort(support_y, kind="stable")
    counts = np.bincount(support_y, minlength=n_classes)
    if np.any(counts == 0):
        raise EpisodeError(f"support is missing classes {np.flatnonzero(counts == 0).tolist()}")
    if np.any(counts != counts[0]):
        raise EpisodeError("every class needs the same number of shots")
    shots = int(counts[0])
    cols = []
    for s, q in zip(support_feats.as_list(), query_feats.as_list()):
        s = ops.getitem(s, order).reshape(n_classes, shots, s.shape[-1])
        q = q.reshape(q.shape[0], 1, 1, q.shape[-1])
        cols.append(ops.mean(cosine_distance(q, s), axis=-1))   # (Q, N_c)
    return ops.stack(cols, axis=-1)


def metric_logits(distances, eta):
    """``z[q, j] = -sum_m Lambda[q, j, m] * eta[m, j]``; works for (N_c, M) or (Q, N_c, M)."""
    return ops.sum(ops.mul(distances, ops.transpose(eta)), axis=-1) * -1.0


def residual_combine(z, base_logits):
    return ops.add(z, base_logits)


def predict(logits):
    """Argmax over classes; ties go to the lowest class index."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(data, axis=-1)


def loss_hessian(distances, beta):
    """Hessians of the class-wise cross-entropy of the metric logits.

    ``distances`` is Lambda (N_c x M), ``beta`` a length-M weight vector. With
    ``gamma_k = exp(-Lambda_k . beta)`` returns ``(H_u, H_beta)`` where
    ``H_u = diag(gamma)/sum(gamma) - gamma gamma^T / sum(gamma)^2`` is the
    Hessian w.r.t. the logits and ``H_beta = Lambda^T H_u Lambda`` the
    Hessian w.r.t. beta.
    """
    lam = np.asarray(distances, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    u = -lam @ beta
    gamma = np.exp(u - u.max())
    p = gamma / gamma.sum()
    h_u = np.diag(p) - np.outer(p, p)
    return h_u, lam.T @ h_u @ lam


# -- forward through the whole model ----------------------------------------------

def _split_features(feats, n_support):
    s = FeatureSet(*(f[:n_support] for f in feats.as_list()))
    q = FeatureSet(*(f[n_support:] for f in feats.as_list()))
    return s, q


def episode_forward(model, episode, eta=None, grad=True):
    """Final logits (Q, N_c) of the full model on ``episode``."""
    x = np.concatenate([episode.support_x, episode.query_x])
    n_s = len(episode.support_x)
    if grad:
        logits, feats = model.net(x)
    else:
        with no_grad():
            logits, feats = model.net(x)
    s_feats, q_feats = _split_features(feats, n_s)
    lam = metric_distances(s_feats, episode.support_y, q_feats, episode.n_classes)
    z = metric_logits(lam, model.eta if eta is None else eta)
    return residual_combine(z, logits[n_s:])


def episode_loss(model, episode):
    """Mean query cross-entropy of softmax(z + base logits)."""
    return ops.cross_entropy(episode_forward(model, episode), episode.query_y)


def _frozen_head_inputs(model, episode):
    x = np.concatenate([episode.support_x, episode.query_x])
    n_s = len(episode.support_x)
    with no_grad():
        logits, feats = model.net(x)
        s_feats, q_feats = _split_features(feats, n_s)
        lam = metric_distances(s_feats, episode.support_y, q_feats, episode.n_classes)
    return lam, logits[n_s:]


def meta_loss_from_inputs(lam, base_logits, eta, query_y):
    return ops.cross_entropy(residual_combine(metric_logits(lam, eta), base_logits), query_y)


# -- training steps -------------------------------------------------------------------

def inner_train_step(model, support_x, support_y, state: AdamState):
    """One Adam step on every parameter using the base network's support cross-entropy.

    The metric weights are not on this loss path, so their gradient is zero
    and they do not move.
    """
    params = model.parameters()
    for p in params:
        p.grad = None
    logits, _ = model.net(support_x)
    loss = ops.cross_entropy(logits, support_y)
    loss.backward()
    adam_step(params, state)
    return float(loss.data)


def meta_train_step(model, episode, state: AdamState):
    """One Adam step on ``eta`` using the full episode loss; the base network is frozen."""
    lam, base_logits = _frozen_head_inputs(model, episode)
    return meta_step_on_inputs(model.eta, lam, base_logits, episode.query_y, state)


def meta_step_on_inputs(eta, lam, base_logits, query_y, state):
    eta.grad = None
    loss = meta_loss_from_inputs(lam, base_logits, eta, query_y)
    loss.backward()
    adam_step([eta], state)
    return float(loss.data)


@dataclass
class TrainResult:
    model: RFNetModel
    losses: list = field(default_factory=list)        # one entry per episode
    env_ids: list = field(default_factory=list)
    seen_obs: set = field(default_factory=set)         # (env_id, index) pairs used in training


def train(dataset, net_cfg, cfg: TrainConfig, seed=0, method="rfnet"):
    """Episodic training over the environments of ``dataset``.

    Each epoch shuffles the environments into minibatches of
    ``cfg.batch_size``; every environment in a minibatch contributes one
    episode. ``method`` selects which steps run:

    ========== =========== ================================
    method     inner step  second step
    ========== =========== ================================
    rfnet      yes         meta step on eta
    rfnet-star yes         none (eta frozen at 1)
    ft         yes         none
    pn         no          prototype loss on base params
    ========== =========== ================================
    """
    from .baselines import protonet_train_step

    if len(dataset.environments) < 1:
        raise ValueError("need at least one training environment")
    init_ss, episode_ss = np.random.SeedSequence(seed).spawn(2)
    model = RFNetModel(net_cfg, seed=int(init_ss.generate_state(1)[0]))
    rng = np.random.default_rng(episode_ss)
    inner_state = AdamState(lr=cfg.lr_inner)
    meta_state = AdamState(lr=cfg.lr_meta)
    result = TrainResult(model)
    env_ids = dataset.env_ids
    for _ in range(cfg.epochs):
        order = rng.permutation(len(env_ids))
        for start in range(0, len(order), cfg.batch_size):
            for k in order[start:start + cfg.batch_size]:
                ep = sample_episode(dataset, env_ids[k], dataset.n_classes, cfg.shots, cfg.n_query, rng)
                result.seen_obs.update((ep.env_id, int(i)) for i in np.concatenate([ep.support_ids, ep.query_ids]))
                if method == "pn":
                    loss = protonet_train_step(model, ep, inner_state)
                else:
                    inner = inner_train_step(model, ep.support_x, ep.support_y, inner_state)
                    if method == "rfnet":
                        loss = meta_train_step(model, ep, meta_state)
                    elif method == "rfnet-star":
                        with no_grad():
                            loss = float(episode_loss(model, ep).data)
                    elif method == "ft":
                        loss = inner
                    else:
                        raise ValueError(f"unknown method {method!r}")
                result.losses.append(loss)
                result.env_ids.append(ep.env_id)
    return result


# -- testing ------------------------------------------------------------------------------

def adapt_eta(model, episode, cfg: TrainConfig):
    """Metric weights refined on the support set alone.

    The last shot of each class plays query, the rest play support; returns
    a new Param and leaves ``model`` untouched.
    """
    if episode.shots < 2:
        raise EpisodeError("self-episode adaptation needs at least two shots")
    last = np.zeros(len(episode.support_y), dtype=bool)
    for c in range(episode.n_classes):
        last[np.flatnonzero(episode.support_y == c)[-1]] = True
    pseudo = Episode(episode.env_id, episode.support_x[~last], episode.support_y[~last],
                     episode.support_x[last], episode.support_y[last], episode.support_ids[~last],
                     episode.support_ids[last], episode.shots - 1, episode.n_classes)
    eta = Param(model.eta.data.copy(), id="eta", partition="meta")
    lam, base_logits = _frozen_head_inputs(model, pseudo)
    state = AdamState(lr=cfg.lr_meta)
    for _ in range(cfg.adapt_steps):
        meta_step_on_inputs(eta, lam, base_logits, pseudo.query_y, state)
    return eta


def test_adapt_and_predict(model, episode, cfg: TrainConfig):
    """Predicted query labels and accuracy for one test episode."""
    eta = None
    if cfg.test_adapt == "self_episode" and episode.shots >= 2:
        eta = adapt_eta(model, episode, cfg)
    with no_grad():
        logits = episode_forward(model, episode, eta=eta, grad=False)
    pred = predict(logits)
    return pred, float(np.mean(pred == episode.query_y))

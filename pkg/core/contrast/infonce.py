"""
Patchwise InfoNCE over spatially-correlative maps.

For query row v with positive v+ and negatives v-_1..v-_K:

    loss_i = -log( exp(s+ / tau) / (exp(s+ / tau) + sum_k exp(s-_k / tau)) )

where s = cos(v, .) on the flattened map rows. The batch loss is the mean
over queries. A zero-norm row has similarity 0 to everything.
"""

from typing import NamedTuple, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import ConfigError, ShapeMismatchError


class InfoNCEGrads(NamedTuple):
    v: np.ndarray
    v_pos: np.ndarray
    v_neg: np.ndarray


def cosine_sim(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Cosine similarity along the last axis with broadcasting.

    Returns:
        tuple: (similarity, d sim / d a, d sim / d b), gradients broadcast to the operand shape
    """
    norm_a = np.sqrt(np.sum(a * a, axis=-1, keepdims=True))
    norm_b = np.sqrt(np.sum(b * b, axis=-1, keepdims=True))
    valid = (norm_a > 0) & (norm_b > 0)
    safe_a = np.where(valid, norm_a, 1)
    safe_b = np.where(valid, norm_b, 1)

    sim = np.where(valid, np.sum(a * b, axis=-1, keepdims=True) / (safe_a * safe_b), 0)
    grad_a = np.where(valid, b / (safe_a * safe_b) - sim * a / safe_a ** 2, 0)
    grad_b = np.where(valid, a / (safe_a * safe_b) - sim * b / safe_b ** 2, 0)
    return sim[..., 0], grad_a, grad_b


def similarity_logits(v: np.ndarray, v_pos: np.ndarray, v_neg: np.ndarray) -> np.ndarray:
    """(N_s, 1 + K) cosine similarities, positive first."""
    pos, _, _ = cosine_sim(v, v_pos)
    neg, _, _ = cosine_sim(v[:, None, :], v_neg)
    return np.concatenate([pos[:, None], neg], axis=1)


def _check(v, v_pos, v_neg, tau):
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if v.ndim != 2 or v_pos.shape != v.shape:
        raise ShapeMismatchError(f"query and positive maps must both be (N_s, N_p), got {v.shape} and {v_pos.shape}")
    if v_neg.ndim != 3 or v_neg.shape[0] != v.shape[0] or v_neg.shape[2] != v.shape[1]:
        raise ShapeMismatchError(f"negative maps must be (N_s, K, N_p), got {v_neg.shape}")


def infonce_maps(v: np.ndarray, v_pos: np.ndarray, v_neg: np.ndarray, tau: float, return_hits: bool = False):
    """
    InfoNCE loss on raw map rows and its gradients.

    Args:
        v: (N_s, N_p) query maps
        v_pos: (N_s, N_p) positive maps
        v_neg: (N_s, K, N_p) negative maps
        tau: Temperature, must be positive
        return_hits: Also return, per query, whether the positive beat every negative

    Returns:
        tuple: (loss, InfoNCEGrads) or (loss, InfoNCEGrads, hits)

    Raises:
        ConfigError: tau <= 0
        ShapeMismatchError: inconsistent map shapes
    """
    _check(v, v_pos, v_neg, tau)
    n_queries = v.shape[0]

    sim_pos, dpos_dv, dpos_dvpos = cosine_sim(v, v_pos)
    sim_neg, dneg_dv, dneg_dvneg = cosine_sim(v[:, None, :], v_neg)
    logits = np.concatenate([sim_pos[:, None], sim_neg], axis=1) / tau

    loss = float(np.mean(logsumexp(logits, axis=1) - logits[:, 0]))

    weights = softmax(logits, axis=1)
    weights[:, 0] -= 1.0
    weights /= n_queries * tau

    w_pos = weights[:, :1]
    w_neg = weights[:, 1:, None]
    grads = InfoNCEGrads(
        v=w_pos * dpos_dv + np.sum(w_neg * dneg_dv, axis=1),
        v_pos=w_pos * dpos_dvpos,
        v_neg=w_neg * dneg_dvneg,
    )
    if return_hits:
        hits = sim_pos > np.max(sim_neg, axis=1)
        return loss, grads, hits
    return loss, grads


def infonce(batch, tau: float, return_hits: bool = False):
    """
    InfoNCE loss of a ContrastBatch.

    Example:
        >>> loss, grads = infonce(batch, tau=0.07)
        >>> gfx, gfaug, gfy = batch_backward(batch, *grads)
    """
    return infonce_maps(batch.v, batch.v_pos, batch.v_neg, tau, return_hits)

"""Numpy encoder / projector / predictor with hand-written backward passes.

Shapes used throughout: ``B`` batch, ``L`` padded length, ``d`` embed_dim,
``h`` hidden_dim, ``p`` proj_dim, ``V`` vocab_size.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..event_log import PAD

EMBED_POOL_MLP = "embed-pool-mlp"
ATTENTION = "single-attention-block"
VARIANTS = (EMBED_POOL_MLP, ATTENTION)

NORM_EPS = 1e-12
FORMAT_VERSION = 1

ENCODER_KEYS = ("emb", "pos", "att_q", "att_k", "att_v", "enc_W1", "enc_b1", "enc_W2", "enc_b2")
PROJECTOR_KEYS = ("proj_W1", "proj_b1", "proj_W2", "proj_b2")
PREDICTOR_KEYS = ("pred_W1", "pred_b1", "pred_W2", "pred_b2")


class ContractError(ValueError):
    pass


class NumericalError(FloatingPointError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    embed_dim: int = 16
    hidden_dim: int = 32
    max_len: int = 32
    encoder_variant: str = EMBED_POOL_MLP
    proj_dim: int | None = None

    def __post_init__(self):
        if min(self.vocab_size, self.embed_dim, self.hidden_dim, self.max_len) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.encoder_variant not in VARIANTS:
            raise ValueError(f"unknown encoder variant {self.encoder_variant!r}")

    @property
    def out_dim(self) -> int:
        return self.proj_dim or self.embed_dim


class NetworkParams:
    """Named parameter arrays. Target networks carry no predictor."""

    def __init__(self, config: EncoderConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        self.arrays = arrays

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def __contains__(self, key: str) -> bool:
        return key in self.arrays

    @property
    def has_predictor(self) -> bool:
        return "pred_W1" in self.arrays

    @property
    def has_projector(self) -> bool:
        return "proj_W1" in self.arrays

    def copy(self, keys=None) -> "NetworkParams":
        keys = self.arrays.keys() if keys is None else [k for k in keys if k in self.arrays]
        return NetworkParams(self.config, {k: self.arrays[k].copy() for k in keys})

    def without_predictor(self) -> "NetworkParams":
        return self.copy([k for k in self.arrays if k not in PREDICTOR_KEYS])

    def encoder_only(self) -> "NetworkParams":
        return self.copy(ENCODER_KEYS)

    def num_parameters(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def to_dict(self) -> dict:
        return {
            "format": "siamaug.params",
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "arrays": {
                k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(self.arrays.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkParams":
        if doc.get("format") != "siamaug.params" or doc.get("version") != FORMAT_VERSION:
            raise ValueError("not a siamaug parameter document of a supported version")
        arrays = {
            k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["arrays"].items()
        }
        return cls(EncoderConfig(**doc["config"]), arrays)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NetworkParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _dense(rng, fan_in, fan_out):
    return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))


def init_params(config: EncoderConfig, rng: np.random.Generator, predictor: bool = True) -> NetworkParams:
    d, h, p = config.embed_dim, config.hidden_dim, config.out_dim
    a = {
        "emb": rng.normal(0.0, 1.0, size=(config.vocab_size, d)),
        "pos": rng.normal(0.0, 0.5, size=(config.max_len, d)),
    }
    if config.encoder_variant == ATTENTION:
        a["att_q"], a["att_k"], a["att_v"] = (_dense(rng, d, d) for _ in range(3))
    a |= {
        "enc_W1": _dense(rng, d, h), "enc_b1": np.zeros(h),
        "enc_W2": _dense(rng, h, h), "enc_b2": np.zeros(h),
        "proj_W1": _dense(rng, h, h), "proj_b1": np.zeros(h),
        "proj_W2": _dense(rng, h, p), "proj_b2": np.zeros(p),
    }
    if predictor:
        a |= {
            "pred_W1": _dense(rng, p, h), "pred_b1": np.zeros(h),
            "pred_W2": _dense(rng, h, p), "pred_b2": np.zeros(p),
        }
    return NetworkParams(config, a)


# -- building blocks -------------------------------------------------------------------


def mlp_forward(W1, b1, W2, b2, x):
    a = np.tanh(x @ W1 + b1)
    return a @ W2 + b2, (x, a)


def mlp_backward(W1, W2, cache, dout):
    x, a = cache
    dpre = (dout @ W2.T) * (1.0 - a * a)
    grads = (x.T @ dpre, dpre.sum(0), a.T @ dout, dout.sum(0))
    return dpre @ W1.T, grads


def _as_batch(seqs) -> np.ndarray:
    x = np.asarray(seqs, dtype=np.int64)
    return x[None, :] if x.ndim == 1 else x


def encoder_forward(params: NetworkParams, x: np.ndarray):
    """Representation ``y`` for a padded batch ``x`` (B, L) plus a backward cache."""
    cfg = params.config
    x = _as_batch(x)
    B, L = x.shape
    if L > cfg.max_len:
        raise ContractError(f"sequence length {L} exceeds max_len {cfg.max_len}")
    if x.min(initial=0) < 0 or x.max(initial=0) >= cfg.vocab_size:
        raise ContractError("activity index outside the vocabulary")
    mask = (x != PAD).astype(np.float64)
    count = mask.sum(1)
    if np.any(count == 0):
        raise ContractError("a sequence contains only padding")
    # right-aligned positions: the last token always sits at max_len - 1
    pos_rows = np.arange(cfg.max_len - L, cfg.max_len)
    h0 = params["emb"][x] + params["pos"][pos_rows][None]
    cache = {"x": x, "mask": mask, "count": count, "pos_rows": pos_rows, "h0": h0}
    if cfg.encoder_variant == ATTENTION:
        q, k, v = h0 @ params["att_q"], h0 @ params["att_k"], h0 @ params["att_v"]
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(cfg.embed_dim)
        scores = np.where(mask[:, None, :] > 0, scores, -np.inf)
        scores -= scores.max(-1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(-1, keepdims=True)
        hidden = h0 + att @ v
        cache |= {"q": q, "k": k, "v": v, "att": att}
    else:
        hidden = h0
    pooled = (mask[..., None] * hidden).sum(1) / count[:, None]
    y, mlp_cache = mlp_forward(params["enc_W1"], params["enc_b1"], params["enc_W2"], params["enc_b2"], pooled)
    cache["mlp"] = mlp_cache
    return y, cache


def encoder_backward(params: NetworkParams, cache, dy) -> dict[str, np.ndarray]:
    cfg = params.config
    dpooled, (dW1, db1, dW2, db2) = mlp_backward(params["enc_W1"], params["enc_W2"], cache["mlp"], dy)
    grads = {"enc_W1": dW1, "enc_b1": db1, "enc_W2": dW2, "enc_b2": db2}
    mask, h0 = cache["mask"], cache["h0"]
    dhidden = mask[..., None] * (dpooled / cache["count"][:, None])[:, None, :]
    dh0 = dhidden
    if cfg.encoder_variant == ATTENTION:
        q, k, v, att = cache["q"], cache["k"], cache["v"], cache["att"]
        datt = dhidden @ v.transpose(0, 2, 1)
        dv = att.transpose(0, 2, 1) @ dhidden
        dscores = att * (datt - (datt * att).sum(-1, keepdims=True)) / np.sqrt(cfg.embed_dim)
        dq = dscores @ k
        dk = dscores.transpose(0, 2, 1) @ q
        grads["att_q"] = np.einsum("bld,ble->de", h0, dq)
        grads["att_k"] = np.einsum("bld,ble->de", h0, dk)
        grads["att_v"] = np.einsum("bld,ble->de", h0, dv)
        dh0 = dhidden + dq @ params["att_q"].T + dk @ params["att_k"].T + dv @ params["att_v"].T
    demb = np.zeros_like(params["emb"])
    np.add.at(demb, cache["x"], dh0)
    dpos = np.zeros_like(params["pos"])
    dpos[cache["pos_rows"]] = dh0.sum(0)
    grads["emb"], grads["pos"] = demb, dpos
    return grads


def encode(params: NetworkParams, seq) -> np.ndarray:
    """Representation of one padded sequence (1-D input) or a padded batch (2-D)."""
    y, _ = encoder_forward(params, seq)
    return y[0] if np.ndim(seq) == 1 else y


def project(params: NetworkParams, y) -> np.ndarray:
    if not params.has_projector:
        raise ContractError("these parameters carry no projector")
    out, _ = mlp_forward(params["proj_W1"], params["proj_b1"], params["proj_W2"], params["proj_b2"], y)
    return out


def predict(params: NetworkParams, z) -> np.ndarray:
    if not params.has_predictor:
        raise ContractError("the predictor exists only on the online network")
    out, _ = mlp_forward(params["pred_W1"], params["pred_b1"], params["pred_W2"], params["pred_b2"], z)
    return out


# -- BYOL objective ----------------------------------------------------------------------


def _norms(a: np.ndarray, eps: float) -> np.ndarray:
    n = np.linalg.norm(a, axis=-1)
    if np.any(n < eps):
        raise NumericalError("zero-norm vector in cosine loss")
    return n


def byol_loss(prediction, target, eps: float = NORM_EPS):
    """``2 - 2 cos(prediction, target)``; rows are treated independently for 2-D input."""
    p, z = np.asarray(prediction, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if p.shape != z.shape:
        raise ContractError(f"shape mismatch {p.shape} vs {z.shape}")
    cos = (p * z).sum(-1) / (_norms(p, eps) * _norms(z, eps))
    out = 2.0 - 2.0 * cos
    return float(out) if out.ndim == 0 else out


def byol_loss_grad(p: np.ndarray, z: np.ndarray, eps: float = NORM_EPS):
    """Per-row losses and d(loss)/dp; ``z`` is a constant (stop-gradient)."""
    pn, zn = _norms(p, eps)[:, None], _norms(z, eps)[:, None]
    cos = (p * z).sum(-1, keepdims=True) / (pn * zn)
    dp = -2.0 * (z / (zn * pn) - cos * p / (pn * pn))
    return (2.0 - 2.0 * cos[:, 0]), dp


def online_forward(params: NetworkParams, x):
    y, enc_cache = encoder_forward(params, x)
    z, proj_cache = mlp_forward(params["proj_W1"], params["proj_b1"], params["proj_W2"], params["proj_b2"], y)
    pred, pred_cache = mlp_forward(params["pred_W1"], params["pred_b1"], params["pred_W2"], params["pred_b2"], z)
    return pred, (enc_cache, proj_cache, pred_cache)


def target_forward(params: NetworkParams, x) -> np.ndarray:
    return project(params, encode(params, _as_batch(x)))


def symmetric_loss(online: NetworkParams, target: NetworkParams, v, v_prime) -> float:
    """Online prediction of each view against the target projection of the other, summed."""
    if not online.has_predictor:
        raise ContractError("online parameters need a predictor")
    v, vp = _as_batch(v), _as_batch(v_prime)
    total = byol_loss(predict(online, project(online, encode(online, v))), target_forward(target, vp))
    total = total + byol_loss(predict(online, project(online, encode(online, vp))), target_forward(target, v))
    return float(total) if np.ndim(total) == 0 else total


def loss_and_grads(online: NetworkParams, target: NetworkParams, v: np.ndarray, v_prime: np.ndarray):
    """Mean symmetric loss over a padded pair batch and its gradient w.r.t. the online parameters.

    The target branch is evaluated as a constant; no gradient is produced for it.
    """
    if not online.has_predictor:
        raise ContractError("online parameters need a predictor")
    v, vp = _as_batch(v), _as_batch(v_prime)
    if v.shape != vp.shape:
        raise ContractError("views must be padded to a common length")
    B = v.shape[0]
    pred, (enc_c, proj_c, pred_c) = online_forward(online, np.vstack([v, vp]))
    tgt = target_forward(target, np.vstack([vp, v]))
    losses, dpred = byol_loss_grad(pred, tgt)
    dpred /= B
    dz, (gW1, gb1, gW2, gb2) = mlp_backward(online["pred_W1"], online["pred_W2"], pred_c, dpred)
    grads = {"pred_W1": gW1, "pred_b1": gb1, "pred_W2": gW2, "pred_b2": gb2}
    dy, (gW1, gb1, gW2, gb2) = mlp_backward(online["proj_W1"], online["proj_W2"], proj_c, dz)
    grads |= {"proj_W1": gW1, "proj_b1": gb1, "proj_W2": gW2, "proj_b2": gb2}
    grads |= encoder_backward(online, enc_c, dy)
    return float(losses.sum() / B), grads


def ema_update(xi: NetworkParams, theta: NetworkParams, tau: float) -> NetworkParams:
    """Target update ``xi <- tau * xi + (1 - tau) * theta`` over the target's own parameters."""
    if not 0.0 <= tau < 1.0:
        raise ContractError(f"tau must lie in [0, 1), got {tau}")
    out = {}
    for k, a in xi.arrays.items():
        if k not in theta.arrays or theta[k].shape != a.shape:
            raise ContractError(f"parameter {k!r} missing or shaped differently in the online network")
        out[k] = theta[k].copy() if tau == 0.0 else tau * a + (1.0 - tau) * theta[k]
    return NetworkParams(xi.config, out)


def collapse_metric(params: NetworkParams, probe) -> float:
    """Mean per-dimension std of L2-normalised projections over a probe batch."""
    z = project(params, encode(params, _as_batch(probe)))
    z = z / np.maximum(np.linalg.norm(z, axis=1, keepdims=True), NORM_EPS)
    return float(z.std(axis=0).mean())


# -- classifier head -----------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


def classifier_loss_and_grads(params: NetworkParams, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy of a linear softmax head on the encoder, with gradients for all parameters."""
    y, enc_cache = encoder_forward(params, x)
    logits = y @ params["head_W"] + params["head_b"]
    probs = softmax(logits)
    n = len(labels)
    log_probs = logits - logits.max(-1, keepdims=True)
    log_probs -= np.log(np.exp(log_probs).sum(-1, keepdims=True))
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    grads = {"head_W": y.T @ dlogits, "head_b": dlogits.sum(0)}
    grads |= encoder_backward(params, enc_cache, dlogits @ params["head_W"].T)
    return float(loss), grads


def classifier_logits(params: NetworkParams, x) -> np.ndarray:
    y, _ = encoder_forward(params, x)
    return y @ params["head_W"] + params["head_b"]

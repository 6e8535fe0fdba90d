"""Pointer network in numpy: LSTM encoder/decoder with bilinear attention.

The encoder reads a permutation element by element through a learned index
embedding. At every decoder step the hidden state ``h`` attends over the
encoder states with the bilinear score ``h @ W_a @ hs``; the context and
``h`` are mixed into ``tanh(W_c @ [ctx; h])`` and the same bilinear form,
applied to that output, yields pointer logits over source positions.
Positions already emitted are masked, so every decode is a permutation of
its input.

All arrays are batch-first. Gradients are hand-derived; see
``tests/test_neuralnet.py`` for the finite-difference checks.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("emb", "start", "enc_W", "enc_b", "dec_W", "dec_b", "W_a", "W_c")


class TrainingDivergence(FloatingPointError):
    """Raised when the training loss stops being finite."""


@dataclass
class TrainConfig:
    batch_size: int = 128
    learn_rate: float = 1e-3
    epochs: int = 200
    hidden_units: int = 200
    embedding_dim: int = 64
    dropout: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0

    def __post_init__(self):
        for name in ("batch_size", "epochs", "hidden_units", "embedding_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learn_rate <= 0:
            raise ValueError("learn_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def sigmoid(x):
    # tanh form: no overflow for large |x|
    return 0.5 + 0.5 * np.tanh(0.5 * x)


# -- cell-level operations ------------------------------------------------------

def lstm_step(x, state, W, b):
    """One LSTM step for a batch.

    ``x`` is (B, D), ``state`` is ``(h, c)`` each (B, H), ``W`` is
    (D + H, 4H) with gate blocks ordered input, forget, output, candidate.
    Returns ``(h, c, cache)``.
    """
    h, c = state
    H = h.shape[-1]
    if W.shape != (x.shape[-1] + H, 4 * H) or b.shape != (4 * H,):
        raise ValueError(
            f"LSTM weight shape {W.shape} / bias {b.shape} incompatible with input {x.shape[-1]}, hidden {H}"
        )
    xh = np.concatenate([x, h], axis=-1)
    z = xh @ W + b
    gates = sigmoid(z[:, :3 * H])
    i, f, o = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:]
    g = np.tanh(z[:, 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (xh, c, i, f, o, g, tc)


def lstm_step_backward(dh, dc, cache, W):
    """Backward of :func:`lstm_step`; returns ``(dx, dh_prev, dc_prev, dW, db)``."""
    xh, c_prev, i, f, o, g, tc = cache
    H = dh.shape[-1]
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * c_prev * f * (1.0 - f),
        dh * tc * o * (1.0 - o),
        dc * i * (1.0 - g * g),
    ], axis=-1)
    dW = xh.T @ dz
    db = dz.sum(axis=0)
    dxh = dz @ W.T
    D = xh.shape[-1] - H
    return dxh[:, :D], dxh[:, D:], dc * f, dW, db


def softmax(scores, mask=None):
    """Softmax over the last axis; ``mask`` marks excluded entries."""
    s = np.array(scores, dtype=float, copy=True)
    if mask is not None:
        if np.any(np.all(mask, axis=-1)):
            raise ValueError("every position is masked")
        s[mask] = -np.inf
    s -= s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def bilinear_scores(h, enc, W_a):
    """``score[b, s] = h[b] @ W_a @ enc[b, s]``."""
    return np.einsum("bh,bsh->bs", h @ W_a, enc)


def attention_scores(h_t, enc, W_a):
    """Attention weights over source positions for decoder states ``h_t``."""
    return softmax(bilinear_scores(h_t, enc, W_a))


def context_and_output(kappa, enc, h_t, W_c):
    """Context vector and attentional output ``tanh(W_c [ctx; h_t])``."""
    H = h_t.shape[-1]
    if enc.shape[-1] != H or W_c.shape != (H, 2 * H):
        raise ValueError(f"W_c shape {W_c.shape} incompatible with hidden size {H}")
    ctx = np.einsum("bs,bsh->bh", kappa, enc)
    return ctx, np.tanh(np.concatenate([ctx, h_t], axis=-1) @ W_c.T)


def pointer_logits(h_out, enc, W_a, visited):
    """Log-probabilities over unvisited source positions.

    Visited positions get ``-inf``.
    """
    logits = bilinear_scores(h_out, enc, W_a)
    if np.any(np.all(visited, axis=-1)):
        raise ValueError("every position is masked")
    logits = np.where(visited, -np.inf, logits)
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


# -- network --------------------------------------------------------------------

def init_params(n_max: int, hidden: int, emb_dim: int, rng: np.random.Generator) -> dict:
    bound = 1.0 / math.sqrt(hidden)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    return {
        "emb": rng.normal(0.0, 1.0, size=(n_max, emb_dim)),
        "start": rng.normal(0.0, 1.0, size=emb_dim),
        "enc_W": u(emb_dim + hidden, 4 * hidden),
        "enc_b": u(4 * hidden),
        "dec_W": u(emb_dim + hidden, 4 * hidden),
        "dec_b": u(4 * hidden),
        "W_a": u(hidden, hidden),
        "W_c": u(hidden, 2 * hidden),
    }


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * math.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for k, g in grads.items():
            self.m[k] *= b1
            self.m[k] += (1.0 - b1) * g
            self.v[k] *= b2
            self.v[k] += (1.0 - b2) * g * g
            params[k] -= lr_t * self.m[k] / (np.sqrt(self.v[k]) + self.eps)


def target_positions(X, Y) -> np.ndarray:
    """``pos[b, t]``: the source position holding label element ``Y[b, t]``."""
    B, N = X.shape
    where = np.empty_like(X)
    where[np.arange(B)[:, None], X] = np.arange(N)[None, :]
    return where[np.arange(B)[:, None], Y]


class PointerNet:
    def __init__(self, n_max: int, hidden: int = 200, emb_dim: int = 64,
                 rng: np.random.Generator | None = None, params: dict | None = None):
        self.n_max = n_max
        self.hidden = hidden
        self.emb_dim = emb_dim
        if params is None:
            params = init_params(n_max, hidden, emb_dim, rng or np.random.default_rng(0))
        self.params = params
        self.optimizer: Adam | None = None

    @classmethod
    def from_config(cls, n_max: int, cfg: TrainConfig, rng: np.random.Generator) -> "PointerNet":
        return cls(n_max, cfg.hidden_units, cfg.embedding_dim, rng)

    # forward/backward ----------------------------------------------------------

    def _encode(self, X, drop_masks=None):
        p = self.params
        B, N = X.shape
        h = np.zeros((B, self.hidden))
        c = np.zeros((B, self.hidden))
        enc = np.empty((B, N, self.hidden))
        caches = []
        for s in range(N):
            x = p["emb"][X[:, s]]
            if drop_masks is not None:
                x = x * drop_masks[s]
            h, c, cache = lstm_step(x, (h, c), p["enc_W"], p["enc_b"])
            enc[:, s] = h
            caches.append(cache)
        return enc, (h, c), caches

    def loss_and_grads(self, X, Y, dropout: float = 0.0, rng: np.random.Generator | None = None,
                       need_grads: bool = True):
        """Teacher-forced cross-entropy and its gradient.

        ``X`` holds the input permutations and ``Y`` the target permutations,
        both (B, N) 0-based. The loss is the per-sequence sum of pointer
        cross-entropies averaged over the batch.
        """
        p = self.params
        X = np.asarray(X, dtype=np.int64)
        Y = np.asarray(Y, dtype=np.int64)
        B, N = X.shape
        H, E = self.hidden, self.emb_dim
        rows = np.arange(B)
        pos = target_positions(X, Y)

        enc_masks = dec_masks = None
        if dropout > 0.0:
            keep = 1.0 - dropout
            enc_masks = (rng.random((N, B, E)) < keep) / keep
            dec_masks = (rng.random((N, B, E)) < keep) / keep

        enc, (h, c), enc_caches = self._encode(X, enc_masks)

        visited = np.zeros((B, N), dtype=bool)
        loss = 0.0
        steps = []
        for t in range(N):
            x_raw = np.broadcast_to(p["start"], (B, E)) if t == 0 else p["emb"][Y[:, t - 1]]
            x = x_raw * dec_masks[t] if dec_masks is not None else x_raw
            h, c, lcache = lstm_step(x, (h, c), p["dec_W"], p["dec_b"])
            q = h @ p["W_a"]
            kappa = softmax(np.einsum("bh,bsh->bs", q, enc))
            ctx, hh = context_and_output(kappa, enc, h, p["W_c"])
            q2 = hh @ p["W_a"]
            logp = pointer_logits(hh, enc, p["W_a"], visited)
            tgt = pos[:, t]
            loss -= logp[rows, tgt].sum()
            steps.append((lcache, h, q, kappa, ctx, hh, q2, np.exp(logp), tgt))
            visited[rows, tgt] = True
        loss /= B
        if not need_grads:
            return loss, None

        g = {k: np.zeros_like(v) for k, v in p.items()}
        d_enc = np.zeros_like(enc)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in reversed(range(N)):
            lcache, h, q, kappa, ctx, hh, q2, prob, tgt = steps[t]
            dlog = prob.copy()
            dlog[rows, tgt] -= 1.0
            dlog /= B
            # pointer logits
            dq2 = np.einsum("bs,bsh->bh", dlog, enc)
            d_enc += dlog[:, :, None] * q2[:, None, :]
            g["W_a"] += hh.T @ dq2
            dhh = dq2 @ p["W_a"].T
            # attentional output
            cat = np.concatenate([ctx, h], axis=-1)
            dpre = dhh * (1.0 - hh * hh)
            g["W_c"] += dpre.T @ cat
            dcat = dpre @ p["W_c"]
            dctx = dcat[:, :H]
            dh = dcat[:, H:] + dh_next
            # context and attention weights
            dkappa = np.einsum("bh,bsh->bs", dctx, enc)
            d_enc += kappa[:, :, None] * dctx[:, None, :]
            dscores = kappa * (dkappa - (dkappa * kappa).sum(axis=1, keepdims=True))
            dq = np.einsum("bs,bsh->bh", dscores, enc)
            d_enc += dscores[:, :, None] * q[:, None, :]
            g["W_a"] += h.T @ dq
            dh += dq @ p["W_a"].T
            # decoder cell
            dx, dh_next, dc_next, dW, db = lstm_step_backward(dh, dc_next, lcache, p["dec_W"])
            g["dec_W"] += dW
            g["dec_b"] += db
            if dec_masks is not None:
                dx = dx * dec_masks[t]
            if t == 0:
                g["start"] += dx.sum(axis=0)
            else:
                np.add.at(g["emb"], Y[:, t - 1], dx)

        for s in reversed(range(N)):
            dh = d_enc[:, s] + dh_next
            dx, dh_next, dc_next, dW, db = lstm_step_backward(dh, dc_next, enc_caches[s], p["enc_W"])
            g["enc_W"] += dW
            g["enc_b"] += db
            if enc_masks is not None:
                dx = dx * enc_masks[s]
            np.add.at(g["emb"], X[:, s], dx)
        return loss, g

    # decoding ------------------------------------------------------------------

    def decode(self, X, greedy: bool = True, rng: np.random.Generator | None = None) -> np.ndarray:
        """Masked decode of each input row; returns (B, N) output permutations."""
        p = self.params
        X = np.asarray(X, dtype=np.int64)
        if X.ndim == 1:
            X = X[None, :]
        B, N = X.shape
        rows = np.arange(B)
        enc, (h, c), _ = self._encode(X)
        visited = np.zeros((B, N), dtype=bool)
        out = np.empty((B, N), dtype=np.int64)
        x = np.broadcast_to(p["start"], (B, self.emb_dim))
        for t in range(N):
            h, c, _ = lstm_step(x, (h, c), p["dec_W"], p["dec_b"])
            kappa = attention_scores(h, enc, p["W_a"])
            _, hh = context_and_output(kappa, enc, h, p["W_c"])
            logp = pointer_logits(hh, enc, p["W_a"], visited)
            if greedy:
                choice = np.argmax(logp, axis=1)
            else:
                prob = np.exp(logp)
                cdf = np.cumsum(prob, axis=1)
                r = rng.random((B, 1)) * cdf[:, -1:]
                choice = np.minimum((cdf <= r).sum(axis=1), N - 1)
                # guard against landing on a zero-probability tail slot
                bad = visited[rows, choice]
                if bad.any():
                    choice[bad] = np.argmax(np.where(visited[bad], -np.inf, logp[bad]), axis=1)
            visited[rows, choice] = True
            out[:, t] = X[rows, choice]
            x = p["emb"][out[:, t]]
        return out


# -- training / prediction -----------------------------------------------------------

def _stack(perms) -> np.ndarray:
    arr = np.array([np.asarray(q, dtype=np.int64) for q in perms])
    if arr.ndim != 2:
        raise ValueError("all permutations must share one length")
    return arr


def clip_by_global_norm(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def train(pairs, cfg: TrainConfig, net: PointerNet, rng: np.random.Generator,
          epochs: int | None = None) -> tuple[PointerNet, list[float]]:
    """Fit ``net`` to the pairs' data -> label mapping with Adam.

    ``pairs`` is any object with ``data`` and ``labels`` permutation lists.
    Optimizer state lives on ``net`` so repeated calls warm-start. Returns the
    network and the per-epoch mean training loss.
    """
    X = _stack(pairs.data)
    Y = _stack(pairs.labels)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty pair set")
    if X.shape != Y.shape:
        raise ValueError("data and labels must have the same shape")
    if X.shape[1] > net.n_max:
        raise ValueError(f"sequence length {X.shape[1]} exceeds network capacity {net.n_max}")
    if net.optimizer is None:
        net.optimizer = Adam(net.params, cfg.learn_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    n = X.shape[0]
    trace = []
    for _ in range(cfg.epochs if epochs is None else epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = net.loss_and_grads(X[idx], Y[idx], cfg.dropout, rng)
            if not np.isfinite(loss):
                raise TrainingDivergence(f"non-finite training loss {loss}")
            clip_by_global_norm(grads, cfg.clip_norm)
            net.optimizer.step(net.params, grads)
            total += loss * idx.size
        trace.append(total / n)
    return net, trace


def predict(data, net: PointerNet) -> list[np.ndarray]:
    """Greedy decode of every input permutation, order-aligned with ``data``."""
    if len(data) == 0:
        return []
    return list(net.decode(_stack(data), greedy=True))


def token_accuracy(net: PointerNet, X, Y) -> float:
    return float(np.mean(net.decode(np.asarray(X)) == np.asarray(Y)))


# -- checkpoints -------------------------------------------------------------------

def save_checkpoint(net: PointerNet, path, cfg: TrainConfig | None = None) -> None:
    """Versioned ``.npz``: header fields plus one named array per parameter."""
    blobs = {f"param/{k}": v for k, v in net.params.items()}
    if net.optimizer is not None:
        blobs.update({f"adam_m/{k}": v for k, v in net.optimizer.m.items()})
        blobs.update({f"adam_v/{k}": v for k, v in net.optimizer.v.items()})
        blobs["adam_t"] = np.array(net.optimizer.t)
    header = {"version": CHECKPOINT_VERSION, "n_max": net.n_max, "hidden": net.hidden,
              "emb_dim": net.emb_dim, "config": asdict(cfg) if cfg else None}
    import json
    blobs["header"] = np.array(json.dumps(header))
    with open(path, "wb") as fh:
        np.savez(fh, **blobs)


def load_checkpoint(path) -> PointerNet:
    import json

    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        params = {k: z[f"param/{k}"].copy() for k in PARAM_NAMES}
        net = PointerNet(header["n_max"], header["hidden"], header["emb_dim"], params=params)
        if "adam_t" in z.files:
            cfg = header.get("config") or {}
            opt = Adam(params, cfg.get("learn_rate", 1e-3), cfg.get("beta1", 0.9),
                       cfg.get("beta2", 0.999), cfg.get("adam_eps", 1e-8))
            opt.m = {k: z[f"adam_m/{k}"].copy() for k in PARAM_NAMES}
            opt.v = {k: z[f"adam_v/{k}"].copy() for k in PARAM_NAMES}
            opt.t = int(z["adam_t"])
            net.optimizer = opt
    return net

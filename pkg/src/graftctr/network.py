"""Forward and backward passes of the feature-transfer CTR network.

Architecture, per impression with target video t and pre-sampled
neighbor bundle:

    h_t   = item_proj(raw(t))                      raw = id embeddings
                                                   + title mean + stats
    E2    = item_proj restricted to the video-id block, over the
            deduplicated union of all neighbor lists
    h2    = attention(h_t, E2)                     id-representation transfer
    E3_r  = item_proj(raw(neighbor)) per metapath r in {a, p, s}
    h3    = concat_r attention_r(h_t, E3_r)        full-feature transfer
    h_t'  = gelu(W_f [h_t ; h2 ; h3] + b_f)
    h_u   = attention(h_t', behavior rows)         user interest
    p     = sigmoid(MLP([h_u ; h_t' ; user demographics]))

Attention is scaled dot-product with temperature sqrt(d) and softmax
restricted to unmasked slots; a fully masked head yields a zero vector.
All gradients are exact analytic derivatives; there is no autodiff.
Activations use the exact (Gaussian CDF) GELU so the network is smooth
enough for central finite-difference verification.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .features import AblationMask, Batch, FeatureTables, NeighborLookup, assemble
from .params import METAPATH_KEYS, ModelParams
from .validation import check_probability_open, require

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return x * ndtr(x)


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood; rejects probabilities outside (0, 1)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    require(probs.shape == labels.shape, "probs/labels shape mismatch")
    check_probability_open(probs, "probs")
    return float(-np.mean(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs)))


def _loss_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    # same function as bce_loss(sigmoid(logits), y), stable for large logits
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


# -- attention ---------------------------------------------------------


def _attention(Q, Kp, Vp, mask):
    """Masked scaled dot-product; rows with no valid slot give zeros."""
    d = Q.shape[-1]
    scores = np.matmul(Kp, Q[:, :, None])[:, :, 0] / np.sqrt(d)
    scores = np.where(mask, scores, -np.inf)
    smax = scores.max(axis=1, keepdims=True)
    smax = np.where(np.isfinite(smax), smax, 0.0)
    ex = np.exp(scores - smax)
    denom = ex.sum(axis=1, keepdims=True)
    attn = ex / np.where(denom == 0.0, 1.0, denom)
    out = np.matmul(attn[:, None, :], Vp)[:, 0, :]
    return out, attn


def target_attention(q, keys, values, mask=None):
    """Single-query attention: softmax over q.k_i / sqrt(d), blended values.

    Matches the batched internal path; an all-masked (or empty) key set
    returns the zero vector.
    """
    q = np.asarray(q, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64).reshape(-1, q.shape[0])
    values = np.asarray(values, dtype=np.float64).reshape(-1, q.shape[0])
    require(keys.shape == values.shape, "keys/values shape mismatch")
    if mask is None:
        mask = np.ones(len(keys), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    require(mask.shape == (len(keys),), "mask shape mismatch")
    if len(keys) == 0:
        return np.zeros_like(q)
    out, _ = _attention(q[None, :], keys[None, :, :], values[None, :, :], mask[None, :])
    return out[0]


def _head_forward(params: ModelParams, head: str, x_q, X, mask):
    d = params.cfg.hidden_dim
    WQ = params[f"attn/{head}/WQ"]
    WK = params[f"attn/{head}/WK"]
    WV = params[f"attn/{head}/WV"]
    B, M, _ = X.shape
    flat = X.reshape(B * M, d)
    Q = x_q @ WQ
    Kp = (flat @ WK).reshape(B, M, d)
    Vp = (flat @ WV).reshape(B, M, d)
    out, attn = _attention(Q, Kp, Vp, mask)
    return out, {"head": head, "x_q": x_q, "X": X, "mask": mask, "Q": Q, "Kp": Kp, "Vp": Vp, "attn": attn}


def _head_backward(params: ModelParams, grads, cache, dout):
    d = params.cfg.hidden_dim
    head, X, Q = cache["head"], cache["X"], cache["Q"]
    Kp, Vp, attn = cache["Kp"], cache["Vp"], cache["attn"]
    B, M, _ = X.shape
    dVp = attn[:, :, None] * dout[:, None, :]
    da = np.matmul(Vp, dout[:, :, None])[:, :, 0]
    inner = (attn * da).sum(axis=1, keepdims=True)
    ds = attn * (da - inner) / np.sqrt(d)
    dQ = np.matmul(ds[:, None, :], Kp)[:, 0, :]
    dKp = ds[:, :, None] * Q[:, None, :]
    flat = X.reshape(B * M, d)
    grads[f"attn/{head}/WQ"] += cache["x_q"].T @ dQ
    grads[f"attn/{head}/WK"] += flat.T @ dKp.reshape(B * M, d)
    grads[f"attn/{head}/WV"] += flat.T @ dVp.reshape(B * M, d)
    dx_q = dQ @ params[f"attn/{head}/WQ"].T
    dX = (
        dKp.reshape(B * M, d) @ params[f"attn/{head}/WK"].T
        + dVp.reshape(B * M, d) @ params[f"attn/{head}/WV"].T
    ).reshape(B, M, d)
    return dx_q, dX


# -- featurized gathers ------------------------------------------------


def _scatter_add(dest: np.ndarray, idx: np.ndarray, values: np.ndarray) -> None:
    """dest[idx] += values with repeated indices, via bincount per column."""
    n_rows = dest.shape[0]
    idx = idx.ravel()
    values = values.reshape(len(idx), -1)
    for j in range(values.shape[1]):
        dest[:, j] += np.bincount(idx, weights=values[:, j], minlength=n_rows)


def _gather_full(params: ModelParams, tables: FeatureTables, rows, zero_repr, zero_stats):
    """Raw feature matrix for a flat row-index array (full featurization)."""
    cfg = params.cfg
    sl = cfg.block_slices()
    rows = rows.ravel()
    n = len(rows)
    prod = tables.product_idx[rows]
    auth = tables.author_idx[rows]
    cat = tables.category_idx[rows]
    toks = tables.tokens[rows]
    cnt = tables.token_cnt[rows]
    tok_mask = np.arange(cfg.title_cap)[None, :] < cnt[:, None]
    denom = np.maximum(cnt, 1).astype(np.float64)[:, None]
    raw = np.zeros((n, cfg.raw_dim), dtype=np.float64)
    if not zero_repr:
        raw[:, sl["video"]] = params["emb/video"][rows]
        raw[:, sl["product"]] = params["emb/product"][prod]
        raw[:, sl["author"]] = params["emb/author"][auth]
        raw[:, sl["category"]] = params["emb/category"][cat]
        tok_e = params["emb/token"][toks]
        raw[:, sl["token"]] = (tok_e * tok_mask[:, :, None]).sum(axis=1) / denom
    if not zero_stats:
        raw[:, sl["stats"]] = tables.stats_norm[rows]
    cache = {
        "rows": rows,
        "prod": prod,
        "auth": auth,
        "cat": cat,
        "toks": toks,
        "tok_mask": tok_mask,
        "denom": denom,
        "zero_repr": zero_repr,
    }
    return raw, cache


def _scatter_full(params: ModelParams, grads, draw, cache) -> None:
    if cache["zero_repr"]:
        return  # zeroed inputs pass no gradient to the embedding tables
    sl = params.cfg.block_slices()
    _scatter_add(grads["emb/video"], cache["rows"], draw[:, sl["video"]])
    _scatter_add(grads["emb/product"], cache["prod"], draw[:, sl["product"]])
    _scatter_add(grads["emb/author"], cache["auth"], draw[:, sl["author"]])
    _scatter_add(grads["emb/category"], cache["cat"], draw[:, sl["category"]])
    dmean = draw[:, sl["token"]] / cache["denom"]
    dtok = dmean[:, None, :] * cache["tok_mask"][:, :, None]
    _scatter_add(grads["emb/token"], cache["toks"], dtok)


def _item_proj_backward(params, grads, raw_flat, dh_flat, cache) -> None:
    grads["item_proj/W"] += raw_flat.T @ dh_flat
    grads["item_proj/b"] += dh_flat.sum(axis=0)
    draw = dh_flat @ params["item_proj/W"].T
    _scatter_full(params, grads, draw, cache)


# -- forward -----------------------------------------------------------


def forward(params: ModelParams, tables: FeatureTables, batch: Batch, keep_cache: bool = False):
    """Batched forward pass; returns (logits, probs, cache)."""
    cfg = params.cfg
    d = cfg.hidden_dim
    sl = cfg.block_slices()
    Wi, bi = params["item_proj/W"], params["item_proj/b"]
    B = len(batch)
    cache: dict = {}

    raw_t, gc_t = _gather_full(params, tables, batch.tgt, False, False)
    h_t = raw_t @ Wi + bi

    # transferred id representations: video-id block through the shared
    # projection; a head whose mask is entirely empty contributes exact
    # zeros, so its compute (and backward) is skipped outright
    vid_e2, hc2 = None, None
    h2 = np.zeros((B, d))
    if batch.e2_mask.any():
        vid_e2 = params["emb/video"][batch.e2.ravel()]
        e2_h = (vid_e2 @ Wi[sl["video"]] + bi).reshape(B, cfg.e2_slots, d)
        h2, hc2 = _head_forward(params, "h2", h_t, e2_h, batch.e2_mask)

    # transferred full features, one attention head per metapath
    h3_parts, hc3, gc3, raw3 = [], {}, {}, {}
    for key in METAPATH_KEYS:
        if not batch.e3_mask[key].any():
            h3_parts.append(np.zeros((B, d)))
            hc3[key] = None
            continue
        raw_r, gc_r = _gather_full(
            params, tables, batch.e3[key], batch.zero_repr, batch.zero_stats
        )
        e3_h = (raw_r @ Wi + bi).reshape(B, cfg.neighbor_cap, d)
        part, hc = _head_forward(params, f"h3_{key}", h_t, e3_h, batch.e3_mask[key])
        h3_parts.append(part)
        hc3[key], gc3[key], raw3[key] = hc, gc_r, raw_r
    h3 = np.concatenate(h3_parts, axis=1)

    zf = np.concatenate([h_t, h2, h3], axis=1)
    af = zf @ params["fuse/W"] + params["fuse/b"]
    htp = gelu(af)

    raw_b, gc_b = _gather_full(params, tables, batch.beh, False, False)
    beh_h = (raw_b @ Wi + bi).reshape(B, cfg.behavior_cap, d)
    hu, hcu = _head_forward(params, "user", htp, beh_h, batch.beh_mask)

    demo = np.concatenate([params["emb/user"][batch.user], batch.user_num], axis=1)
    zp = np.concatenate([hu, htp, demo], axis=1)
    acts, pre = [zp], []
    m = zp
    for i in range(len(cfg.mlp_hidden)):
        a = m @ params[f"mlp/W{i}"] + params[f"mlp/b{i}"]
        m = gelu(a)
        pre.append(a)
        acts.append(m)
    logits = m @ params["out/W"] + params["out/b"]
    probs = sigmoid(logits)

    if keep_cache:
        cache = {
            "raw_t": raw_t,
            "gc_t": gc_t,
            "vid_e2": vid_e2,
            "hc2": hc2,
            "raw3": raw3,
            "gc3": gc3,
            "hc3": hc3,
            "af": af,
            "zf": zf,
            "htp": htp,
            "raw_b": raw_b,
            "gc_b": gc_b,
            "hcu": hcu,
            "demo": demo,
            "acts": acts,
            "pre": pre,
            "probs": probs,
        }
    return logits, probs, cache


def loss_and_grads(params: ModelParams, tables: FeatureTables, batch: Batch):
    """Mean binary cross-entropy over the batch plus exact gradients."""
    cfg = params.cfg
    d = cfg.hidden_dim
    sl = cfg.block_slices()
    B = len(batch)
    logits, probs, cache = forward(params, tables, batch, keep_cache=True)
    loss = _loss_from_logits(logits, batch.y)
    grads = params.zero_grads()

    dlogit = (probs - batch.y) / B
    m_last = cache["acts"][-1]
    grads["out/W"] += m_last.T @ dlogit
    grads["out/b"] += dlogit.sum()
    dm = dlogit[:, None] * params["out/W"][None, :]
    for i in reversed(range(len(cfg.mlp_hidden))):
        da = dm * gelu_grad(cache["pre"][i])
        grads[f"mlp/W{i}"] += cache["acts"][i].T @ da
        grads[f"mlp/b{i}"] += da.sum(axis=0)
        dm = da @ params[f"mlp/W{i}"].T
    dzp = dm

    dhu = dzp[:, :d]
    dhtp = dzp[:, d : 2 * d].copy()
    ddemo = dzp[:, 2 * d :]
    _scatter_add(grads["emb/user"], batch.user, ddemo[:, : cfg.user_dim])

    dx_q, dbeh_h = _head_backward(params, grads, cache["hcu"], dhu)
    dhtp += dx_q
    _item_proj_backward(
        params, grads, cache["raw_b"], dbeh_h.reshape(-1, d), cache["gc_b"]
    )

    daf = dhtp * gelu_grad(cache["af"])
    grads["fuse/W"] += cache["zf"].T @ daf
    grads["fuse/b"] += daf.sum(axis=0)
    dzf = daf @ params["fuse/W"].T
    dh_t = dzf[:, :d].copy()
    dh2 = dzf[:, d : 2 * d]

    for k, key in enumerate(METAPATH_KEYS):
        if cache["hc3"][key] is None:
            continue
        dpart = dzf[:, (2 + k) * d : (3 + k) * d]
        dx_q, dX = _head_backward(params, grads, cache["hc3"][key], dpart)
        dh_t += dx_q
        _item_proj_backward(
            params, grads, cache["raw3"][key], dX.reshape(-1, d), cache["gc3"][key]
        )

    if cache["hc2"] is not None:
        dx_q, de2_h = _head_backward(params, grads, cache["hc2"], dh2)
        dh_t += dx_q
        de2_flat = de2_h.reshape(-1, d)
        grads["item_proj/W"][sl["video"]] += cache["vid_e2"].T @ de2_flat
        grads["item_proj/b"] += de2_flat.sum(axis=0)
        dvid = de2_flat @ params["item_proj/W"][sl["video"]].T
        _scatter_add(grads["emb/video"], batch.e2.ravel(), dvid)

    _item_proj_backward(params, grads, cache["raw_t"], dh_t, cache["gc_t"])
    return loss, grads, probs


# -- single-record convenience ops ------------------------------------


def _single_batch(
    tables: FeatureTables, impression, lookup: NeighborLookup, ablation: AblationMask | None
) -> Batch:
    return assemble(tables, [impression], lookup, ablation)


def embed_target(params: ModelParams, tables: FeatureTables, video_row: int) -> np.ndarray:
    """Representation h_t of one video through the item projection."""
    raw, _ = _gather_full(params, tables, np.array([video_row]), False, False)
    return (raw @ params["item_proj/W"] + params["item_proj/b"])[0]


def _cg_slots(params, tables, cg, ablation=None):
    from .data import ImpressionLog

    probe = ImpressionLog(
        impression_id="probe",
        user_id="",
        behaviors=(),
        video_id=tables.vocab.external("video", cg.target),
        label=0,
        ts=1,
    )
    return _single_batch(tables, probe, lambda _: cg, ablation)


def transfer_h2(params: ModelParams, tables: FeatureTables, cg) -> np.ndarray:
    """Id-representation transfer vector for one computation graph."""
    batch = _cg_slots(params, tables, cg)
    cfg = params.cfg
    sl = cfg.block_slices()
    h_t = embed_target(params, tables, cg.target)[None, :]
    vid = params["emb/video"][batch.e2.ravel()]
    e2_h = (vid @ params["item_proj/W"][sl["video"]] + params["item_proj/b"]).reshape(
        1, cfg.e2_slots, cfg.hidden_dim
    )
    out, _ = _head_forward(params, "h2", h_t, e2_h, batch.e2_mask)
    return out[0]


def transfer_h3(params: ModelParams, tables: FeatureTables, cg) -> np.ndarray:
    """Concatenated per-metapath full-feature transfer vector (length 3d)."""
    batch = _cg_slots(params, tables, cg)
    cfg = params.cfg
    h_t = embed_target(params, tables, cg.target)[None, :]
    parts = []
    for key in METAPATH_KEYS:
        raw, _ = _gather_full(params, tables, batch.e3[key], False, False)
        e3_h = (raw @ params["item_proj/W"] + params["item_proj/b"]).reshape(
            1, cfg.neighbor_cap, cfg.hidden_dim
        )
        part, _ = _head_forward(params, f"h3_{key}", h_t, e3_h, batch.e3_mask[key])
        parts.append(part[0])
    return np.concatenate(parts)


def fuse(params: ModelParams, h_t: np.ndarray, h2: np.ndarray, h3: np.ndarray) -> np.ndarray:
    """Fused target representation h_t' = gelu(W_f [h_t ; h2 ; h3] + b_f)."""
    zf = np.concatenate([h_t, h2, h3])
    return gelu(zf @ params["fuse/W"] + params["fuse/b"])


def predict_ctr(
    params: ModelParams,
    tables: FeatureTables,
    impression,
    lookup: NeighborLookup,
    ablation: AblationMask | None = None,
) -> float:
    """Click probability for a single impression (the serving path)."""
    batch = _single_batch(tables, impression, lookup, ablation)
    _, probs, _ = forward(params, tables, batch)
    return float(probs[0])


def predict_proba(
    params: ModelParams, tables: FeatureTables, batch: Batch
) -> np.ndarray:
    _, probs, _ = forward(params, tables, batch)
    return probs

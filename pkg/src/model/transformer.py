"""
Декодерный трансформер с произвольной булевой маской и точным обратным проходом

Блоки с пред-нормализацией: x + Attn(LN(x)), затем x + FFN(LN(x)).
Маска применяется как -inf перед нормализацией с вычитанием максимума.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.exceptions import NonFiniteError, ShapeMismatchError, TapeReuseError
from src.layout.masks import AttentionMask
from src.layout.sequences import LayoutSequence
from src.model.params import ModelParams

LN_EPS = 1e-5
_GELU_C = float(np.sqrt(2.0 / np.pi))


def layer_norm(x: np.ndarray, gain: np.ndarray, offset: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Нормализация по последней оси; возвращает (y, x_hat, 1/std)"""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + LN_EPS)
    x_hat = centered * inv_std
    return x_hat * gain + offset, x_hat, inv_std


def layer_norm_backward(
    grad: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray, gain: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Градиенты (dx, dgain, doffset)"""
    d_gain = (grad * x_hat).sum(axis=0)
    d_offset = grad.sum(axis=0)
    d_hat = grad * gain
    dx = inv_std * (
        d_hat
        - d_hat.mean(axis=-1, keepdims=True)
        - x_hat * (d_hat * x_hat).mean(axis=-1, keepdims=True)
    )
    return dx, d_gain, d_offset


def gelu(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """GELU (tanh-аппроксимация); возвращает (y, tanh-часть)"""
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))
    return 0.5 * x * (1.0 + t), t


def gelu_backward(grad: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return grad * (0.5 * (1.0 + t) + 0.5 * x * dt)


def masked_softmax(scores: np.ndarray, visible: np.ndarray) -> np.ndarray:
    """Softmax по последней оси; невидимые ключи получают ровно нулевой вес"""
    scores = np.where(visible, scores, -np.inf)
    scores = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    return weights / weights.sum(axis=-1, keepdims=True)


def split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    """(n, d) -> (H, n, d_head)"""
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def merge_heads(x: np.ndarray) -> np.ndarray:
    """(H, n, d_head) -> (n, d)"""
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


@dataclass
class LayerTape:
    """Промежуточные значения одного блока"""
    ln1_hat: np.ndarray
    ln1_inv: np.ndarray
    h1: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    ctx: np.ndarray
    attn_drop: Optional[np.ndarray]
    ln2_hat: np.ndarray
    ln2_inv: np.ndarray
    h2: np.ndarray
    f1: np.ndarray
    gelu_t: np.ndarray
    g: np.ndarray
    ffn_drop: Optional[np.ndarray]


@dataclass
class Tape:
    """Лента прямого прохода для обратного прохода; используется один раз"""
    inputs: np.ndarray
    positions: np.ndarray
    modality: np.ndarray
    emb_drop: Optional[np.ndarray]
    layers: List[LayerTape] = field(default_factory=list)
    lnf_hat: Optional[np.ndarray] = None
    lnf_inv: Optional[np.ndarray] = None
    hf: Optional[np.ndarray] = None
    used: bool = False


def _dropout_mask(rng: Optional[np.random.Generator], shape: Tuple[int, ...], p: float, dtype) -> Optional[np.ndarray]:
    if rng is None or p <= 0.0:
        return None
    keep = rng.random(shape) >= p
    return (keep / (1.0 - p)).astype(dtype)


def _check_finite(x: np.ndarray, layer: int, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"нечисловые значения: {what}", layer=layer)


def embed(params: ModelParams, inputs: np.ndarray, positions: np.ndarray, modality: np.ndarray) -> np.ndarray:
    """Сумма эмбеддингов токена, позиции и модальности"""
    return params["tok_emb"][inputs] + params["pos_emb"][positions] + params["mod_emb"][modality]


def forward(
    params: ModelParams,
    layout: LayoutSequence,
    mask: AttentionMask,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, Optional[Tape]]:
    """
    Прямой проход по всей раскладке

    Args:
        params: Параметры модели
        layout: Раскладка
        mask: Маска внимания
        train_mode: Записывать ленту и применять dropout (если передан rng)
        rng: Генератор для dropout

    Returns:
        Tuple[np.ndarray, Optional[Tape]]: Логиты (n, total_vocab) и лента в режиме обучения

    Raises:
        ShapeMismatchError: Длина раскладки превышает max_positions или не совпадает с маской
        NonFiniteError: Нечисловые активации (с номером слоя)
    """
    config = params.config
    n = len(layout)
    if mask.n != n:
        raise ShapeMismatchError(f"размер маски {mask.n} не совпадает с длиной раскладки {n}")
    if n == 0 or int(layout.positions.max()) >= config.max_positions:
        raise ShapeMismatchError(
            f"раскладка '{layout.utt_id}' не помещается в max_positions={config.max_positions}"
        )

    dtype = config.dtype
    p_drop = config.dropout_p if train_mode else 0.0
    drop_rng = rng if train_mode else None
    scale = float(1.0 / np.sqrt(config.d_head))
    visible = mask.bits[None, :, :]

    x = embed(params, layout.inputs, layout.positions, layout.modality)
    emb_drop = _dropout_mask(drop_rng, x.shape, p_drop, dtype)
    if emb_drop is not None:
        x = x * emb_drop

    tape = Tape(layout.inputs, layout.positions, layout.modality, emb_drop) if train_mode else None

    for index in range(config.n_layers):
        p = f"layers.{index}."
        h1, ln1_hat, ln1_inv = layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        q = split_heads(h1 @ params[p + "wq"] + params[p + "bq"], config.n_heads)
        k = split_heads(h1 @ params[p + "wk"] + params[p + "bk"], config.n_heads)
        v = split_heads(h1 @ params[p + "wv"] + params[p + "bv"], config.n_heads)
        weights = masked_softmax((q @ k.transpose(0, 2, 1)) * scale, visible)
        ctx = merge_heads(weights @ v)
        attn_out = ctx @ params[p + "wo"] + params[p + "bo"]
        attn_drop = _dropout_mask(drop_rng, attn_out.shape, p_drop, dtype)
        if attn_drop is not None:
            attn_out = attn_out * attn_drop
        x_mid = x + attn_out

        h2, ln2_hat, ln2_inv = layer_norm(x_mid, params[p + "ln2_g"], params[p + "ln2_b"])
        f1 = h2 @ params[p + "w1"] + params[p + "b1"]
        g, gelu_t = gelu(f1)
        ffn_out = g @ params[p + "w2"] + params[p + "b2"]
        ffn_drop = _dropout_mask(drop_rng, ffn_out.shape, p_drop, dtype)
        if ffn_drop is not None:
            ffn_out = ffn_out * ffn_drop
        x = x_mid + ffn_out
        _check_finite(x, index, "выход блока")

        if tape is not None:
            tape.layers.append(LayerTape(
                ln1_hat=ln1_hat, ln1_inv=ln1_inv, h1=h1, q=q, k=k, v=v,
                weights=weights, ctx=ctx, attn_drop=attn_drop,
                ln2_hat=ln2_hat, ln2_inv=ln2_inv, h2=h2, f1=f1, gelu_t=gelu_t, g=g,
                ffn_drop=ffn_drop,
            ))

    hf, lnf_hat, lnf_inv = layer_norm(x, params["lnf_g"], params["lnf_b"])
    logits = hf @ params["w_out"] + params["b_out"]
    _check_finite(logits, config.n_layers, "логиты")

    if tape is not None:
        tape.lnf_hat, tape.lnf_inv, tape.hf = lnf_hat, lnf_inv, hf
    return logits, tape


def backward(params: ModelParams, tape: Tape, grad_logits: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Обратный проход по записанной ленте

    Args:
        params: Параметры, использованные в прямом проходе
        tape: Лента прямого прохода в режиме обучения
        grad_logits: Градиент потерь по логитам (n, total_vocab)

    Returns:
        Dict[str, np.ndarray]: Градиенты той же формы, что и параметры

    Raises:
        TapeReuseError: Лента уже использована
    """
    if tape.used:
        raise TapeReuseError("лента прямого прохода уже использована")
    tape.used = True

    config = params.config
    grads = params.zeros_like()
    scale = float(1.0 / np.sqrt(config.d_head))
    grad_logits = grad_logits.astype(config.dtype, copy=False)

    grads["w_out"] = tape.hf.T @ grad_logits
    grads["b_out"] = grad_logits.sum(axis=0)
    dx, grads["lnf_g"], grads["lnf_b"] = layer_norm_backward(
        grad_logits @ params["w_out"].T, tape.lnf_hat, tape.lnf_inv, params["lnf_g"]
    )

    for index in reversed(range(config.n_layers)):
        lt = tape.layers[index]
        p = f"layers.{index}."

        # FFN
        d_ffn = dx if lt.ffn_drop is None else dx * lt.ffn_drop
        grads[p + "w2"] = lt.g.T @ d_ffn
        grads[p + "b2"] = d_ffn.sum(axis=0)
        d_f1 = gelu_backward(d_ffn @ params[p + "w2"].T, lt.f1, lt.gelu_t)
        grads[p + "w1"] = lt.h2.T @ d_f1
        grads[p + "b1"] = d_f1.sum(axis=0)
        d_mid, grads[p + "ln2_g"], grads[p + "ln2_b"] = layer_norm_backward(
            d_f1 @ params[p + "w1"].T, lt.ln2_hat, lt.ln2_inv, params[p + "ln2_g"]
        )
        dx = dx + d_mid

        # Внимание
        d_attn = dx if lt.attn_drop is None else dx * lt.attn_drop
        grads[p + "wo"] = lt.ctx.T @ d_attn
        grads[p + "bo"] = d_attn.sum(axis=0)
        d_ctx = split_heads(d_attn @ params[p + "wo"].T, config.n_heads)
        d_weights = d_ctx @ lt.v.transpose(0, 2, 1)
        d_v = lt.weights.transpose(0, 2, 1) @ d_ctx
        d_scores = lt.weights * (d_weights - (d_weights * lt.weights).sum(axis=-1, keepdims=True))
        d_scores = d_scores * scale
        d_q = merge_heads(d_scores @ lt.k)
        d_k = merge_heads(d_scores.transpose(0, 2, 1) @ lt.q)
        d_v = merge_heads(d_v)

        grads[p + "wq"] = lt.h1.T @ d_q
        grads[p + "bq"] = d_q.sum(axis=0)
        grads[p + "wk"] = lt.h1.T @ d_k
        grads[p + "bk"] = d_k.sum(axis=0)
        grads[p + "wv"] = lt.h1.T @ d_v
        grads[p + "bv"] = d_v.sum(axis=0)
        d_h1 = d_q @ params[p + "wq"].T + d_k @ params[p + "wk"].T + d_v @ params[p + "wv"].T
        d_in, grads[p + "ln1_g"], grads[p + "ln1_b"] = layer_norm_backward(
            d_h1, lt.ln1_hat, lt.ln1_inv, params[p + "ln1_g"]
        )
        dx = dx + d_in

    if tape.emb_drop is not None:
        dx = dx * tape.emb_drop
    np.add.at(grads["tok_emb"], tape.inputs, dx)
    np.add.at(grads["pos_emb"], tape.positions, dx)
    np.add.at(grads["mod_emb"], tape.modality, dx)
    return grads

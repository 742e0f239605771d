"""Closed-form parameter counts and multiply-accumulate estimates."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .nn import CAE_PRESETS


class CountError(ValueError):
    pass


def ffnn_count(layer_sizes) -> int:
    """Weights plus biases of a fully-connected stack."""
    if len(layer_sizes) < 2:
        raise CountError("need at least two layers")
    weights = sum(a * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))
    return weights + sum(layer_sizes[1:])


def rnn_count(layer_sizes, g: int = 4) -> int:
    """Parameters of a recurrent stack with ``g`` weight blocks per cell (4 for LSTM)."""
    if len(layer_sizes) < 2:
        raise CountError("need at least two layers")
    if g not in (1, 3, 4):
        raise CountError(f"g must be 1 (RNN), 3 (GRU) or 4 (LSTM), got {g}")
    return g * sum(b * (b + a) + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def rnn_flex_extra(layer_sizes, s_per_layer, params_per_act: int = 2) -> int:
    """Extra parameters when ``s`` activations per hidden layer become trainable."""
    hidden = list(layer_sizes[1:])
    if isinstance(s_per_layer, int):
        s_per_layer = [s_per_layer] * len(hidden)
    if len(s_per_layer) != len(hidden):
        raise CountError(f"{len(s_per_layer)} replacement counts for {len(hidden)} hidden layers")
    return params_per_act * sum(s * n for s, n in zip(s_per_layer, hidden))


def conv_count(conv_specs) -> int:
    """Sum of ``(n * n * l + 1) * k`` over ``(k_out, n_kernel, l_in)`` triples."""
    total = 0
    for k, n, l in conv_specs:
        if min(k, n, l) < 1:
            raise CountError(f"non-positive dimension in conv layer {(k, n, l)}")
        total += (n * n * l + 1) * k
    return total


def conv_flex_extra(channel_placements, p: int) -> int:
    if p not in (1, 2):
        raise CountError(f"p must be 1 or 2, got {p}")
    return p * sum(channel_placements)


def conv_specs_for(preset: str) -> list[tuple[int, int, int]]:
    """``(out, kernel, in)`` triples of a named autoencoder stack."""
    (c, _, _), layers = CAE_PRESETS[preset]
    specs = []
    for layer in layers:
        if layer.op == "pool":
            continue
        specs.append((layer.channels, layer.kernel, c))
        c = layer.channels
    return specs


# Channel lists that reproduce the printed extra-parameter totals.
CAE_PLACEMENTS = {"cae1": [16, 8, 1], "cae2": [16, 8, 8, 1], "cae3": [12, 24, 48]}

LSTM_TABLES = {
    "lstm-brics": [[5, 8], [5, 8, 8], [5, 8, 8, 8], [5, 16, 8]],
    "lstm-g7": [[7, 10], [7, 10, 10], [7, 10, 10, 10], [7, 20, 10]],
}


@dataclass(frozen=True)
class TimeEstimate:
    per_pass: int
    baseline: int
    flexible_extra: int


def conv_time_estimate(layers, m: int, iterations: int) -> TimeEstimate:
    """Multiply-accumulate totals for a conv stack.

    ``layers`` holds ``(n_in, kernel, n_out, feature_map)`` tuples, where
    ``feature_map`` is the output spatial size. ``per_pass`` is
    ``sum n_in * s^2 * n_out * m_l^2``; ``baseline`` scales it by the input
    length ``m`` and ``iterations``. The trainable-activation overhead counts
    ``n_in * s^2`` from the second layer on, because the first activation
    follows the first convolution.
    """
    per_pass = 0
    extra = 0
    for j, layer in enumerate(layers):
        if len(layer) != 4 or any(v is None for v in layer):
            raise CountError(f"layer {j} needs (n_in, kernel, n_out, feature_map), got {layer}")
        n_in, s, n_out, fmap = layer
        per_pass += n_in * s * s * n_out * fmap * fmap
        if j >= 1:
            extra += n_in * s * s
    return TimeEstimate(per_pass, m * iterations * per_pass, m * iterations * extra)


def truncated_percent(extra: int, basic: int, decimals: int) -> str:
    """Percentage cut (not rounded) to ``decimals`` places, as printed in the tables."""
    scale = 10**decimals
    value = math.floor(Fraction(extra * 100 * scale, basic))
    if not decimals:
        return f"{value}%"
    return f"{value // scale}.{value % scale:0{decimals}d}%"


@dataclass(frozen=True)
class CountRow:
    table: str
    model: str
    basic: int
    extra: int
    ratio: str


def count_report() -> list[CountRow]:
    rows = []
    for table, sizes in LSTM_TABLES.items():
        for ls in sizes:
            basic = rnn_count(ls, 4)
            extra = rnn_flex_extra(ls, 3)
            rows.append(CountRow(table, str(ls), basic, extra, truncated_percent(extra, basic, 1)))
    for table, p in (("cae-p-e2-relu", 2), ("cae-p-e2-relu-1", 1)):
        for name, placements in CAE_PLACEMENTS.items():
            basic = conv_count(conv_specs_for(name))
            extra = conv_flex_extra(placements, p)
            rows.append(CountRow(table, name.upper().replace("CAE", "CAE "), basic, extra, truncated_percent(extra, basic, 2)))
    return rows


HEADER = ("table", "model", "basic", "flexible_extra", "ratio")


def render_text(rows: list[CountRow]) -> str:
    cells = [HEADER] + [(r.table, r.model, str(r.basic), str(r.extra), r.ratio) for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(HEADER))]
    lines = ["  ".join(c[i].ljust(widths[i]) if i < 2 else c[i].rjust(widths[i]) for i in range(len(c))) for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(rows: list[CountRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([r.table, r.model, r.basic, r.extra, r.ratio])
    return buf.getvalue()

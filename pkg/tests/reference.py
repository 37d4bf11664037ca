"""Independent scalar-loop reference implementations used as test oracles.

Nothing here imports the engine; everything is plain Python floats or
element-by-element numpy indexing so it cannot share a bug with the
vectorised code.
"""

import math


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def matvec(W, x):
    return [sum(W[i][j] * x[j] for j in range(len(x))) for i in range(len(W))]


def lstm_cell(x, h, c, w_ih, w_hh, b):
    """Gate blocks ordered input, forget, candidate, output."""
    H = len(h)
    a = [u + v + w for u, v, w in zip(matvec(w_ih, x), matvec(w_hh, h), b)]
    i = [sig(a[k]) for k in range(H)]
    f = [sig(a[H + k]) for k in range(H)]
    g = [math.tanh(a[2 * H + k]) for k in range(H)]
    o = [sig(a[3 * H + k]) for k in range(H)]
    c_new = [f[k] * c[k] + i[k] * g[k] for k in range(H)]
    h_new = [o[k] * math.tanh(c_new[k]) for k in range(H)]
    return h_new, c_new


def gru_cell(x, h, w_ih, w_hh, b):
    """Blocks update, reset, candidate; reset multiplies the recurrent candidate term."""
    H = len(h)
    xw = [u + v for u, v in zip(matvec(w_ih, x), b)]
    hw = matvec(w_hh, h)
    z = [sig(xw[k] + hw[k]) for k in range(H)]
    r = [sig(xw[H + k] + hw[H + k]) for k in range(H)]
    n = [math.tanh(xw[2 * H + k] + r[k] * hw[2 * H + k]) for k in range(H)]
    return [(1 - z[k]) * h[k] + z[k] * n[k] for k in range(H)]


def softmax(scores):
    m = max(scores)
    e = [math.exp(s - m) for s in scores]
    total = sum(e)
    return [v / total for v in e]


def spatial_scores(window, h, c, v, W, U, b):
    """window[k] is feature k's T-step history; returns one score per feature."""
    hc = list(h) + list(c)
    state = matvec(W, hc)
    out = []
    for row in window:
        proj = matvec(U, row)
        out.append(sum(v[j] * math.tanh(state[j] + proj[j] + b[j]) for j in range(len(v))))
    return out


def temporal_scores(enc, h_dec, v, W):
    return [sum(v[j] * math.tanh(x) for j, x in enumerate(matvec(W, list(h_t) + list(h_dec)))) for h_t in enc]


def temporal_context(enc, h_dec, scores):
    """Weighted sum of the concatenations [h_t; h_dec]."""
    gamma = softmax(scores)
    width = len(enc[0]) + len(h_dec)
    d = [0.0] * width
    for g, h_t in zip(gamma, enc):
        cat = list(h_t) + list(h_dec)
        for j in range(width):
            d[j] += g * cat[j]
    return d, gamma


def model_forward(params, config, x):
    """Scalar forward pass of one sequence ``x`` (T lists of N*s floats).

    ``params`` maps checkpoint names to numpy arrays. Returns tau lists of N
    predictions. Only the LSTM/GRU step functions above and plain loops are used.
    """
    P = {k: v.tolist() for k, v in params.items()}
    H, L = config.hidden, config.layers
    lstm = config.cell == "lstm"

    def step(prefix, inp, states):
        out = []
        for layer in range(L):
            w = [P[f"{prefix}.l{layer}.{n}"] for n in ("w_ih", "w_hh", "b")]
            h, c = states[layer]
            if lstm:
                h, c = lstm_cell(inp, h, c, *w)
            else:
                h, c = gru_cell(inp, h, *w), None
            out.append((h, c))
            inp = h
        return out

    states = [([0.0] * H, [0.0] * H if lstm else None) for _ in range(L)]
    T = len(x)
    window = [[x[t][k] for t in range(T)] for k in range(len(x[0]))]
    tops = []
    for t in range(T):
        inp = x[t]
        if config.attention:
            h, c = states[-1]
            scores = spatial_scores(window, h, c if lstm else [0.0] * H, P["attn.spatial.v"],
                                    P["attn.spatial.W"], P["attn.spatial.U"], P["attn.spatial.b"])
            alpha = softmax(scores)
            inp = [a * f for a, f in zip(alpha, inp)]
        states = step("enc", inp, states)
        tops.append(states[-1][0])
    preds = []
    inp = P["dec.start"]
    for _ in range(config.horizon):
        states = step("dec", inp, states)
        h_dec = states[-1][0]
        if config.attention:
            scores = temporal_scores(tops, h_dec, P["attn.temporal.v"], P["attn.temporal.W"])
            d, _ = temporal_context(tops, h_dec, scores)
            if config.context_mode == "prose":
                d = d[:H]
            head_in = d + h_dec
        else:
            head_in = h_dec
        y = [u + b for u, b in zip(matvec(P["head.W"], head_in), P["head.b"])]
        preds.append(y)
        inp = matvec(P["dec.feedback"], y)
    return preds

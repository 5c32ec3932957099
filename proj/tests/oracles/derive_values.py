"""Independent reference computations for the hand-set cases in the C++ tests.

Uses mpmath at 50 digits so the printed values do not share rounding with the
C++ implementation. Run: python3 tests/oracles/derive_values.py
"""
import itertools

from mpmath import mp, mpf, exp, log, sqrt, tanh

mp.dps = 50


def sig(x):
    return 1 / (1 + exp(-x))


def lstm(x_sum, h, c, w_h, b):
    # Scalar LSTM with every input weight folded into x_sum.
    p = x_sum + w_h * h + b
    i, f, g, o = sig(p), sig(p), tanh(p), sig(p)
    c2 = f * c + i * g
    return o * tanh(c2), c2


def softmax(v):
    m = max(v)
    e = [exp(x - m) for x in v]
    s = sum(e)
    return [x / s for x in e]


def show(name, vals):
    print(name, ", ".join(mp.nstr(v, 20) for v in vals))


# Scalar LSTM cell: all weights and biases 1, x = [1], zero state.
h, c = lstm(1, 0, 0, 1, 1)
show("lstm_scalar h,c", [h, c])

# Two-token phrase, h = 1, one-hot input with all-ones weights, biases 1,
# readout all ones with zero bias: readout = h_f + c_f + h_b + c_b.
h1, c1 = lstm(1, 0, 0, 1, 1)
h2, c2 = lstm(1, h1, c1, 1, 1)
show("encode_two_token", [2 * (h2 + c2)])

# Attention: d = 2, one head, identity projections.
q = [mpf(1), mpf(0)]
embs = [[mpf(0), mpf(0)], [mpf(1), mpf(1)], [mpf(2), mpf(-1)]]
scores = [(q[0] * e[0] + q[1] * e[1]) / sqrt(2) for e in embs]
a = softmax(scores)
ctx = [sum(a[i] * embs[i][k] for i in range(3)) for k in range(2)]
show("attention weights", a)
show("attention context", ctx)

# Combiner: LN(h) and LN(c) with unit gain, zero bias, eps 1e-5.
eps = mpf("1e-5")


def ln(v):
    m = sum(v) / len(v)
    var = sum((x - m) ** 2 for x in v) / len(v)
    return [(x - m) / sqrt(var + eps) for x in v]


hv, cv = [mpf(1), mpf(3)], [mpf(2), mpf(-2)]
z = ln(hv) + ln(cv)
W = [[1, 2, 0, -1], [0, 1, 1, 1]]
bias = [mpf("0.5"), mpf(-1)]
show("combine", [sum(W[r][k] * z[k] for k in range(4)) + bias[r] for r in range(2)])

# CPP: hidden W1 = [[1, 0], [0, -1]], b1 = [0.5, 0]; tanh; CTC linear
# W2 = [[1, 1], [2, 0], [0, -1]], b2 = [0, 0.1, 0.2]; log-softmax.
x = [mpf("0.3"), mpf("0.7")]
hid = [tanh(x[0] + mpf("0.5")), tanh(-x[1])]
W2 = [[1, 1], [2, 0], [0, -1]]
b2 = [mpf(0), mpf("0.1"), mpf("0.2")]
logits = [sum(W2[r][k] * hid[k] for k in range(2)) + b2[r] for r in range(3)]
lse = log(sum(exp(v) for v in logits))
show("cpp row", [v - lse for v in logits])
logits = [sum(W2[r][k] * x[k] for k in range(2)) + b2[r] for r in range(3)]
lse = log(sum(exp(v) for v in logits))
show("ctc_head row", [v - lse for v in logits])


# CTC by enumeration on uniform posteriors.
def collapse(path):
    out, prev = [], None
    for s in path:
        if s != prev and s != 0:
            out.append(s)
        prev = s
    return out


def ctc(T, V, label):
    tot = sum(mpf(1) / V**T for p in itertools.product(range(V), repeat=T) if collapse(p) == label)
    return -log(tot)


show("ctc uniform", [ctc(2, 3, [1]), ctc(2, 3, []), ctc(3, 3, [1, 1]), log(3), 2 * log(3), log(27)])

"""Independent reference implementation used to cross-check the library.

Scalar Python only: plain lists, ``math``, sequential loops, and no reuse
of library code.  Softmax here is the textbook e^s / sum(e^s) without the
max-subtraction trick, which keeps the two implementations honestly
different while agreeing far below the 1e-6 comparison tolerance (inputs
in the test instances are small enough not to overflow).
"""

import math


def normalize(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def inner(a, b):
    return sum(x * y for x, y in zip(a, b))


def tukey(v, lam):
    if lam == 0:
        return [math.log(x) for x in v]
    return [x ** lam for x in v]


def top_m(xt, protos, m):
    """Indices of the m largest inner products, descending, ties to the
    smaller index."""
    sims = [inner(xt, p) for p in protos]
    order = sorted(range(len(protos)), key=lambda j: (-sims[j], j))
    return order[: min(m, len(protos))]


def softmax(vals):
    exps = [math.exp(v) for v in vals]
    total = sum(exps)
    return [e / total for e in exps]


def endpoint(xt, protos, indices):
    """xt plus the softmax-weighted sum of the indexed prototypes."""
    weights = softmax([inner(xt, protos[j]) for j in indices])
    out = list(xt)
    for w, j in zip(weights, indices):
        for c in range(len(out)):
            out[c] += w * protos[j][c]
    return out


def calibrate_support(support, protos, lam, m, alpha, beta):
    """Full calibration of a support set.

    ``support`` is a list of (vector, label); ``protos`` a list of base
    prototype vectors in canonical (class-sorted) order.  Returns a list of
    per-sample dicts with every intermediate, plus the task union.
    """
    xbar = [normalize(list(map(float, x))) for x, _ in support]
    xt = [tukey(list(map(float, x)), lam) for x, _ in support]
    tops = [top_m(t, protos, m) for t in xt]
    union = sorted(set().union(*[set(t) for t in tops]))

    out = []
    for i, (_, label) in enumerate(support):
        s = endpoint(xt[i], protos, tops[i])
        t = endpoint(xt[i], protos, union)
        sbar = normalize(s)
        tbar = normalize(t)
        combo = [
            (1.0 - alpha - beta) * xbar[i][c] + alpha * sbar[c] + beta * tbar[c]
            for c in range(len(sbar))
        ]
        out.append(
            {
                "label": label,
                "xbar": xbar[i],
                "xt": xt[i],
                "top": tops[i],
                "sbar": sbar,
                "tbar": tbar,
                "calibrated": normalize(combo),
            }
        )
    return out, union


def attention_weights(q, class_support):
    return softmax([inner(list(map(float, q)), s) for s in class_support])


def attentive_proto(q, class_support):
    a = attention_weights(q, class_support)
    dim = len(class_support[0])
    out = [0.0] * dim
    for w, s in zip(a, class_support):
        for c in range(dim):
            out[c] += w * s[c]
    return out


def average_proto(class_support):
    dim = len(class_support[0])
    out = [0.0] * dim
    for s in class_support:
        for c in range(dim):
            out[c] += s[c]
    return [x / len(class_support) for x in out]


def cosine(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return inner(a, b) / (na * nb)


def classify(q, protos_by_class):
    """(winner, scores) with ties going to the smaller class id."""
    qbar = normalize(list(map(float, q)))
    scores = {cid: cosine(qbar, p) for cid, p in protos_by_class.items()}
    winner = min(scores, key=lambda cid: (-scores[cid], cid))
    return winner, scores


def predict_episode(support, queries, protos, lam, m, alpha, beta, attentive):
    """End-to-end prediction for every query of one episode.

    Returns (predictions, calibrated, attention) where ``attention`` maps
    (query index, label) to that query's attention weights (attentive mode
    only).
    """
    calibrated, _ = calibrate_support(support, protos, lam, m, alpha, beta)
    by_class = {}
    for entry in calibrated:
        by_class.setdefault(entry["label"], []).append(entry["calibrated"])

    predictions = []
    attention = {}
    for qi, q in enumerate(queries):
        class_protos = {}
        for label, feats in by_class.items():
            if attentive:
                class_protos[label] = attentive_proto(q, feats)
                attention[(qi, label)] = attention_weights(q, feats)
            else:
                class_protos[label] = average_proto(feats)
        predictions.append(classify(q, class_protos)[0])
    return predictions, calibrated, attention

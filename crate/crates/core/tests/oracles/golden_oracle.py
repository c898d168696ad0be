"""Independent evaluation of tests/fixtures/golden.log.

Re-derives every snapshot quantity from the raw log with plain Python and
writes tests/fixtures/golden_expected.json. Run from crates/core:

    python3 tests/oracles/golden_oracle.py
"""
import json
import math
import re
from urllib.parse import parse_qsl

LOG = "tests/fixtures/golden.log"
LEXICON = "data/mini_lexicon.tsv"
OUT = "tests/fixtures/golden_expected.json"

ALPHA, BETA, GAMMA, LAMBDA = 0.01, 0.5, 0.5, 0.5
EPS_GROUND, TOL = 0.1, 1e-9
LEADER_IMPACT = 1.5
CONTEXT = 5
RECORD_EVERY_MS = 30_000


def load_lexicon(path):
    val, inten, neg, section = {}, {}, set(), "valence"
    for line in open(path, encoding="utf-8"):
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("@"):
            continue
        if line.startswith("["):
            section = line[1:-1]
            continue
        parts = line.split("\t")
        if section == "negations":
            neg.add(parts[0].lower())
        elif section == "intensifiers":
            inten[parts[0].lower()] = float(parts[1])
        else:
            val[parts[0].lower()] = float(parts[1])
    return val, inten, neg


VAL, INTEN, NEG = load_lexicon(LEXICON)


def tokens(text):
    return [t.lower() for t in re.split(r"[^0-9A-Za-z']+", text) if t]


def sentiment(text):
    tok = tokens(text)
    x = 0.0
    for i, t in enumerate(tok):
        if t not in VAL:
            continue
        v = VAL[t]
        if i > 0 and tok[i - 1] in INTEN:
            v *= INTEN[tok[i - 1]]
        if any(p in NEG for p in tok[max(0, i - 3):i]):
            v = -v
        x += v
    return 0.0 if x == 0 else x / math.sqrt(x * x + 15)


def recipients(sender, text, context, nick):
    tok = tokens(text)
    hits = []
    for m, n in nick.items():
        nt = tokens(n)
        if m != sender and any(tok[i:i + len(nt)] == nt for i in range(len(tok) - len(nt) + 1)):
            hits.append(m)
    if hits:
        return {m: 1 / len(hits) for m in hits}
    for prev in reversed(context):
        if prev != sender and prev in nick:
            return {prev: 1.0}
    others = [m for m in nick if m != sender]
    return {m: 1 / len(others) for m in others}


def pcc(R, u, v):
    s = sorted(set(R[u]) & set(R[v]))
    if len(s) < 2:
        return 0.0
    a = [R[u][k] for k in s]
    b = [R[v][k] for k in s]
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    da = math.sqrt(sum((x - ma) ** 2 for x in a))
    db = math.sqrt(sum((y - mb) ** 2 for y in b))
    return 0.0 if da == 0 or db == 0 else max(-1.0, min(1.0, num / (da * db)))


def save_trust(R, u, v, n):
    s = sorted(set(R[u]) & set(R[v]))
    if not s:
        return 0.0
    vals = list(R[u].values())
    mu = sum(vals) / len(vals)
    sd = math.sqrt(sum((x - mu) ** 2 for x in vals) / len(vals))
    num = den = 0.0
    for k in s:
        w = 1.0 if len(vals) < 2 or sd == 0 else 1 + abs(R[u][k] - mu) / sd
        num += w * (1 - abs(R[u][k] - R[v][k]) / n)
        den += w
    return num / den


def chat_trust(msgs, u, v, now):
    def mass(a, b):
        return sum(w * math.exp(-ALPHA * (now - t) / 1000) for (s, r, t, w, _) in msgs if s == a and r == b)

    out, back = mass(u, v), mass(v, u)
    freq = 0.0 if out + back == 0 else out / (out + back)
    num = den = 0.0
    for s, r, t, w, sc in msgs:
        if (s, r) in ((u, v), (v, u)):
            d = w * math.exp(-ALPHA * (now - t) / 1000)
            num += d * sc
            den += d
    sent = 0.0 if den == 0 else num / den
    return BETA * freq + (1 - BETA) * sent


def leaderrank(M, members):
    n = len(members)
    w = [[0.0 if i == j else max(0.0, M[i][j]) for j in range(n)] for i in range(n)]
    top = max(max(r) for r in w)
    if top > 0:
        w = [[x / top for x in r] for r in w]
    # explicit (n+1)x(n+1) row-stochastic transition matrix, node n is ground
    P = [[0.0] * (n + 1) for _ in range(n + 1)]
    for i in range(n):
        deg = sum(w[i]) + 1
        for j in range(n):
            P[i][j] = w[i][j] / deg
        P[i][n] = 1 / deg
    for j in range(n):
        P[n][j] = 1 / n
    x = [1.0] * (n + 1)
    for _ in range(1000):
        nxt = [sum(x[i] * P[i][j] for i in range(n + 1)) for j in range(n + 1)]
        for j in range(n):
            nxt[j] += EPS_GROUND * x[n]
        tot = sum(nxt)
        nxt = [y * (n + 1) / tot for y in nxt]
        d = max(abs(a - b) for a, b in zip(nxt, x))
        x = nxt
        if d < TOL:
            break
    return [x[i] + x[n] / n for i in range(n)]


def top3(g):
    return [r for r, _ in sorted(g.items(), key=lambda kv: (-round(kv[1] / 1e-9), kv[0]))[:3]]


def ibgr(R, members, cands):
    def part(u, v):
        return len(set(R[u]) & set(R[v])) / len(R[u]) if R[u] else 0.0

    def dist(u, v):
        s = set(R[u]) & set(R[v])
        return 1 / (1 + math.sqrt(sum((R[u][k] - R[v][k]) ** 2 for k in s)))

    def hm(a, b):
        return 0.0 if a <= 0 or b <= 0 else 2 * a * b / (a + b)

    T = {(u, v): hm(part(u, v), dist(u, v)) for u in members for v in members if u != v}
    S = {(u, v): pcc(R, u, v) for u in members for v in members if u != v}
    lead = {u: sum(T[(v, u)] + S[(v, u)] for v in members if v != u) for u in members}
    best = max(lead.values())
    leader = next(u for u in members if lead[u] >= best - 1e-9 * max(abs(best), 1))
    g = {}
    for r in cands:
        tot = 0.0
        for u in members:
            ws = {v: hm(T[(u, v)], S[(u, v)]) * (LEADER_IMPACT if v == leader else 1) for v in members if v != u}
            num = R[u].get(r, 0) + sum(w * R[v].get(r, 0) for v, w in ws.items())
            tot += num / (1 + sum(ws.values()))
        g[r] = tot / len(members)
    return leader, lead, g


def entropy(M, n):
    off = [M[i][j] for i in range(n) for j in range(n) if i != j]
    lo = min(off)
    vals = [x - lo if lo < 0 else x for x in off]
    tot = math.fsum(vals)
    if tot == 0:
        return 0.0
    return -math.fsum(v / tot * math.log(v / tot) for v in vals if v > 0)


def matrices(R, msgs, members, now):
    # diagonals carry no meaning and are 0
    n = len(members)
    S = [[0.0 if u == v else pcc(R, u, v) for v in members] for u in members]
    T = [
        [0.0 if u == v else GAMMA * chat_trust(msgs, u, v, now) + (1 - GAMMA) * save_trust(R, u, v, n) for v in members]
        for u in members
    ]
    return S, T


def main():
    nick, R, cands, msgs, ctx = {}, {}, set(), [], []
    phase, phase_start, entropy_ticks = "lobby", 0, []
    final_at = None
    for line in open(LOG, encoding="utf-8"):
        seq, at, kind, payload = line.rstrip("\n").split("\t")
        at = int(at)
        p = dict(parse_qsl(payload))
        if kind == "join":
            nick[p["member"]] = p["nickname"]
            R[p["member"]] = {}
        elif kind in ("rate", "negative"):
            R[p["member"]][p["restaurant"]] = int(p["value"])
            if kind == "rate":
                cands.add(p["restaurant"])
        elif kind == "save":
            R[p["saver"]][p["restaurant"]] = int(p["value"])
            cands.add(p["restaurant"])
        elif kind == "chat":
            sc = sentiment(p["text"])
            for r, w in recipients(p["sender"], p["text"], ctx, nick).items():
                msgs.append((p["sender"], r, at, w, sc))
            ctx = (ctx + [p["sender"]])[-CONTEXT:]
        elif kind == "phase":
            phase, phase_start = p["phase"], at
        if kind in ("phase", "tick") and phase == "discussion":
            el = at - phase_start
            if not entropy_ticks or el >= entropy_ticks[-1]["elapsed_ms"] + RECORD_EVERY_MS:
                members = sorted(nick)
                S, T = matrices(R, msgs, members, at)
                entropy_ticks.append({
                    "elapsed_ms": el,
                    "entropy_trust": entropy(T, len(members)),
                    "entropy_similarity": entropy(S, len(members)),
                })
        final_at = at

    members = sorted(nick)
    n = len(members)
    S, T = matrices(R, msgs, members, final_at)
    C = [[0.0 if i == j else LAMBDA * S[i][j] + (1 - LAMBDA) * T[i][j] for j in range(n)] for i in range(n)]
    scores = leaderrank(C, members)
    best = max(scores)
    leader = members[next(i for i in range(n) if scores[i] >= best - 1e-9 * max(abs(best), 1))]
    wts = [s / sum(scores) for s in scores]
    cand = sorted(cands)
    g = {r: sum(wts[i] * R[m].get(r, 0) for i, m in enumerate(members)) for r in cand}
    b_leader, b_lead, bg = ibgr(R, members, cand)
    out = {
        "generator": "tests/oracles/golden_oracle.py from tests/fixtures/golden.log",
        "at": final_at,
        "members": members,
        "candidates": cand,
        "similarity": S,
        "trust": T,
        "entropy": entropy_ticks,
        "proposed": {
            "leader": leader,
            "member_scores": dict(zip(members, scores)),
            "group_ratings": g,
            "top": top3(g),
        },
        "baseline": {
            "leader": b_leader,
            "member_scores": b_lead,
            "group_ratings": bg,
            "top": top3(bg),
        },
    }
    with open(OUT, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps({k: out[k] for k in ("proposed", "baseline", "entropy")}, indent=1))


if __name__ == "__main__":
    main()

"""Direct evaluation of the scalar formulas used in the unit-test fixtures.

Run with `python3 scalar_oracles.py`; the printed values are frozen into the
Rust unit tests.
"""
import math


def pcc(u, v):
    mu, mv = sum(u) / len(u), sum(v) / len(v)
    num = sum((a - mu) * (b - mv) for a, b in zip(u, v))
    den = math.sqrt(sum((a - mu) ** 2 for a in u)) * math.sqrt(sum((b - mv) ** 2 for b in v))
    return num / den


def decay(elapsed_s, alpha=0.01):
    return math.exp(-alpha * elapsed_s)


print("pcc [4,2,5] [3,3,4] =", repr(pcc([4, 2, 5], [3, 3, 4])))
print("decay 100s =", repr(decay(100)))

# frequency: u->v at elapsed 10, 20; v->u at elapsed 30
uv = decay(10) + decay(20)
vu = decay(30)
print("freq(u,v) =", repr(uv / (uv + vu)), " freq(v,u) =", repr(vu / (uv + vu)))

# sentiment: 0.8 at elapsed 10, -0.4 at elapsed 300
w1, w2 = decay(10), decay(300)
print("sentiment =", repr((w1 * 0.8 + w2 * -0.4) / (w1 + w2)))

# save trust: u {5,1,3}, v {4,2,3}, n_member 5, population std
u, v = [5, 1, 3], [4, 2, 3]
mu = sum(u) / 3
sigma = math.sqrt(sum((x - mu) ** 2 for x in u) / 3)
w = [1 + abs(x - mu) / sigma for x in u]
s = [1 - abs(a - b) / 5 for a, b in zip(u, v)]
print("save_trust(u,v) =", repr(sum(a * b for a, b in zip(w, s)) / sum(w)))
mv = sum(v) / 3
sv = math.sqrt(sum((x - mv) ** 2 for x in v) / 3)
wv = [1 + abs(x - mv) / sv for x in v]
print("save_trust(v,u) =", repr(sum(a * b for a, b in zip(wv, s)) / sum(wv)))

# ibgr
print("hm(0.5,0.2) =", repr(2 * 0.5 * 0.2 / 0.7))
t = 2 * 0.5 * 0.2 / 0.7
print("hm(2/7,0.5) =", repr(2 * t * 0.5 / (t + 0.5)))

# sentiment "not good" with valence(good)=1.9, flip, x/sqrt(x^2+15)
x = -1.9
print("not good =", repr(x / math.sqrt(x * x + 15)))

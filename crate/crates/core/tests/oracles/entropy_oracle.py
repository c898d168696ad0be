"""Direct sum -p log p over shifted off-diagonal entries."""
import math

M = [
    [0.0, 0.42, -0.17, 0.9, 0.05],
    [0.33, 0.0, 0.61, -0.48, 0.27],
    [0.12, 0.88, 0.0, 0.02, -0.09],
    [0.71, -0.36, 0.44, 0.0, 0.58],
    [0.19, 0.07, 0.95, 0.31, 0.0],
]
off = [M[i][j] for i in range(5) for j in range(5) if i != j]
lo = min(off)
shift = -lo if lo < 0 else 0.0
vals = [x + shift for x in off]
tot = math.fsum(vals)
print(repr(-math.fsum((v / tot) * math.log(v / tot) for v in vals if v > 0)))

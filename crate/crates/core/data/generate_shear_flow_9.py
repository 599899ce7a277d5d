"""Writes shear_flow_9.json: the nine-mode sinusoidally forced shear flow
model of Moehlis, Faisst and Eckhardt (New J. Phys. 6, 56, 2004), shifted
to the laminar state a = e1.

Domain Lx = 4*pi, Lz = 2*pi. The shifted system is

    z' = (A0 + A1 / Re) z + H (z kron z)

with A0 and H independent of Re. Run from this directory:

    python3 generate_shear_flow_9.py
"""

import json
import math

import numpy as np

LX, LZ = 4.0 * math.pi, 2.0 * math.pi
al, be, ga = 2.0 * math.pi / LX, math.pi / 2.0, 2.0 * math.pi / LZ
k_ag = math.hypot(al, ga)
k_bg = math.hypot(be, ga)
k_abg = math.sqrt(al**2 + be**2 + ga**2)
s6, s32 = math.sqrt(6.0), math.sqrt(1.5)

# Viscous decay rates: a_i' contains -nu[i] * a_i / Re.
nu = np.array([
    be**2,
    4.0 * be**2 / 3.0 + ga**2,
    be**2 + ga**2,
    (3.0 * al**2 + 4.0 * be**2) / 3.0,
    al**2 + be**2,
    (3.0 * al**2 + 4.0 * be**2 + 3.0 * ga**2) / 3.0,
    al**2 + be**2 + ga**2,
    al**2 + be**2 + ga**2,
    9.0 * be**2,
])

# Quadratic terms as (row, i, j, coefficient) of a_i a_j, 1-based modes.
T = [
    (1, 6, 8, -s32 * be * ga / k_abg),
    (1, 2, 3, s32 * be * ga / k_bg),

    (2, 4, 6, 5.0 * math.sqrt(2.0) * ga**2 / (3.0 * math.sqrt(3.0) * k_ag)),
    (2, 5, 7, -ga**2 / (s6 * k_ag)),
    (2, 5, 8, -al * be * ga / (s6 * k_ag * k_abg)),
    (2, 1, 3, -s32 * be * ga / k_bg),
    (2, 3, 9, -s32 * be * ga / k_bg),

    (3, 4, 7, 2.0 * al * be * ga / (s6 * k_ag * k_bg)),
    (3, 5, 6, 2.0 * al * be * ga / (s6 * k_ag * k_bg)),
    (3, 4, 8, (be**2 * (3.0 * al**2 + ga**2) - 3.0 * ga**2 * (al**2 + ga**2)) / (s6 * k_ag * k_bg * k_abg)),

    (4, 1, 5, -al / s6),
    (4, 2, 6, -10.0 * al**2 / (3.0 * s6 * k_ag)),
    (4, 3, 7, -s32 * al * be * ga / (k_ag * k_bg)),
    (4, 3, 8, -s32 * al**2 * be**2 / (k_ag * k_bg * k_abg)),
    (4, 5, 9, -al / s6),

    (5, 1, 4, al / s6),
    (5, 2, 7, al**2 / (s6 * k_ag)),
    (5, 2, 8, -al * be * ga / (s6 * k_ag * k_abg)),
    (5, 4, 9, al / s6),
    (5, 3, 6, 2.0 * al * be * ga / (s6 * k_ag * k_bg)),

    (6, 1, 7, al / s6),
    (6, 1, 8, s32 * be * ga / k_abg),
    (6, 2, 4, 10.0 * (al**2 - ga**2) / (3.0 * s6 * k_ag)),
    (6, 3, 5, -2.0 * math.sqrt(2.0 / 3.0) * al * be * ga / (k_ag * k_bg)),
    (6, 7, 9, al / s6),
    (6, 8, 9, s32 * be * ga / k_abg),

    (7, 1, 6, -al / s6),
    (7, 6, 9, -al / s6),
    (7, 2, 5, (ga**2 - al**2) / (s6 * k_ag)),
    (7, 3, 4, al * be * ga / (s6 * k_ag * k_bg)),

    (8, 2, 5, 2.0 * al * be * ga / (s6 * k_ag * k_abg)),
    (8, 3, 4, ga**2 * (3.0 * al**2 - be**2 + 3.0 * ga**2) / (s6 * k_ag * k_bg * k_abg)),

    (9, 2, 3, s32 * be * ga / k_bg),
    (9, 6, 8, -s32 * be * ga / k_abg),
]

n = 9
H = np.zeros((n, n * n))
for r, i, j, v in T:
    H[r - 1, (i - 1) * n + (j - 1)] += v
# Symmetric form: average the (i, j) and (j, i) columns.
Hs = H.copy()
for i in range(n):
    for j in range(n):
        Hs[:, i * n + j] = 0.5 * (H[:, i * n + j] + H[:, j * n + i])


def quad(x, y):
    return Hs @ np.kron(x, y)


e1 = np.eye(n)[0]
# Forcing beta^2/Re and viscous -nu*a/Re cancel at a = e1; quadratic terms vanish.
assert np.max(np.abs(quad(e1, e1))) == 0.0
# Quadratic terms conserve energy.
rng = np.random.default_rng(0)
for _ in range(100):
    a = rng.standard_normal(n)
    assert abs(a @ quad(a, a)) < 1e-12 * (1.0 + np.linalg.norm(a) ** 3)

A0 = np.column_stack([quad(e1, e) + quad(e, e1) for e in np.eye(n)])
A1 = -np.diag(nu)
for re in (120.0, 160.0):
    assert np.max(np.linalg.eigvals(A0 + A1 / re).real) < 0.0

doc = {
    "name": "shear-flow-9",
    "provenance": (
        "Nine-mode model of sinusoidally forced shear flow, Moehlis, Faisst and "
        "Eckhardt, New J. Phys. 6 (2004) 56; domain Lx = 4 pi, Lz = 2 pi; shifted "
        "to the laminar state a = e1. The quadratic terms conserve the energy "
        "|a|^2/2, A(Re) = A + A_coefficient/Re. Generated by generate_shear_flow_9.py."
    ),
    "n": n,
    "m": 0,
    "A": A0.tolist(),
    "H": {"triplets": [[r - 1, i - 1, j - 1, v] for r, i, j, v in T]},
    "B": [],
    "D": [],
    "parameters": {"Re": {"A_coefficient": A1.tolist()}},
}
with open("shear_flow_9.json", "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
print("wrote shear_flow_9.json")

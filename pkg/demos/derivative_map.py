"""A 1-Lipschitz-scale map whose Jacobian equals a fixed operator on a
neighborhood of a purely unrectifiable set.

The four-corner Cantor set is purely 1-unrectifiable, yet the map built
here is differentiable with derivative close to T = c e1 (x) e1 on an open
set H containing it, while its global Lipschitz constant stays near the
cylindrical constant of T (well below 1 + ||T||).
"""

import numpy as np

from lipforge import LinOp, box_region, gen_four_corner, lp_space
from lipforge.steep import build_pu_map, pu_map_certificate

space = lp_space(2, 2)
E = gen_four_corner(2)  # level 3 is the acceptance setting; 2 is faster
U = box_region([-2.0, -2.0], [3.0, 3.0], open_=True)
T = LinOp.build(np.array([[0.15, 0.0], [0.0, 0.0]]), space, space)
theta = 0.25

g, H = build_pu_map(E, U, T, theta, cover_budget=2)
print("cyl(T) =", g.cyl_value, " reported gap =", g.gap)
for part in g.parts:
    print("  row: eps %.3g (formal %.3g), cover level %d, xi %.4g"
          % (part["eps"], part["eps_formal"], part["cover_level"],
             part["xi_value"]))

cert = pu_map_certificate(g, H, U, T, theta, n_points=60)
for k in sorted(cert):
    print("  %-14s %s" % (k, cert[k]))

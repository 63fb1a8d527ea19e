"""Regenerate ``src/hrvem/_case_b.py`` (closed-form Test b fields).

Differentiates the nearly-incompressible displacement symbolically and writes
the gradient and the body force ``f = -div(C eps(u))`` as numpy code.

    python scripts/generate_case_b.py
"""

from pathlib import Path

import sympy as sp
from sympy.printing.numpy import NumPyPrinter

x, y, z, lam, mu = sp.symbols("x y z lam mu")
X = (x, y, z)
s = [sp.sin(2 * sp.pi * v) for v in X]
c = [sp.cos(2 * sp.pi * v) for v in X]

u = [
    s[0] ** 2 * (c[1] * s[1] * s[2] ** 2 - c[2] * s[2] * s[1] ** 2),
    s[1] ** 2 * (c[2] * s[2] * s[0] ** 2 - c[0] * s[0] * s[2] ** 2),
    s[2] ** 2 * (c[0] * s[0] * s[1] ** 2 - c[1] * s[1] * s[0] ** 2),
]
grad = [[sp.diff(u[i], X[j]) for j in range(3)] for i in range(3)]
eps = [[(grad[i][j] + grad[j][i]) / 2 for j in range(3)] for i in range(3)]
tr = eps[0][0] + eps[1][1] + eps[2][2]
sigma = [[2 * mu * eps[i][j] + (lam * tr if i == j else 0) for j in range(3)] for i in range(3)]
load = [sp.expand(-sum(sp.diff(sigma[i][j], X[j]) for j in range(3))) for i in range(3)]
load = [sp.collect(f, [lam, mu]) for f in load]

printer = NumPyPrinter({"fully_qualified_modules": False, "inline": True})


def emit(name, args, exprs):
    subs, reduced = sp.cse(exprs, symbols=sp.numbered_symbols("t"))
    lines = [f"def {name}({', '.join(args)}):"]
    for sym, ex in subs:
        lines.append(f"    {sym} = {printer.doprint(ex)}")
    body = ", ".join(printer.doprint(e) for e in reduced)
    lines.append(f"    return ({body},)")
    return "\n".join(lines)


header = '''"""Closed-form fields of the nearly-incompressible manufactured solution.

Generated by scripts/generate_case_b.py; do not edit by hand.
"""

from numpy import cos, pi, sin


'''
code = header + "\n\n\n".join(
    [
        emit("displacement", ["x", "y", "z"], u),
        emit("displacement_gradient", ["x", "y", "z"], [g for row in grad for g in row]),
        emit("load", ["x", "y", "z", "lam", "mu"], load),
    ]
)
target = Path(__file__).resolve().parents[1] / "src" / "hrvem" / "_case_b.py"
target.write_text(code + "\n")
print(f"wrote {target}")

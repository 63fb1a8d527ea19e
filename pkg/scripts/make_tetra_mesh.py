"""Write a perturbed Kuhn tetrahedral mesh of the unit cube in the text format.

Interior vertices are jittered so the mesh is unstructured-looking while the
boundary stays on the unit cube.  Used as the imported mesh of the tests.

    python scripts/make_tetra_mesh.py [n] [out] [--seed S] [--jitter J]
"""

import argparse
from pathlib import Path

import numpy as np

from hrvem.mesh import PolyMesh, generate, write_mesh


def perturbed_tetra(n, jitter=0.2, seed=7):
    base = generate("tetra", n)
    rng = np.random.default_rng(seed)
    V = base.vertices.copy()
    interior = np.all((V > 1e-12) & (V < 1 - 1e-12), axis=1)
    V[interior] += jitter / n * (rng.random((interior.sum(), 3)) - 0.5)
    return PolyMesh.build(V, base.faces, base.cells, base.cell_signs)


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("n", type=int, nargs="?", default=2)
    p.add_argument("out", nargs="?", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "tetra_n2.poly"))
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jitter", type=float, default=0.2)
    a = p.parse_args()
    mesh = perturbed_tetra(a.n, a.jitter, a.seed)
    write_mesh(mesh, a.out)
    print(f"wrote {a.out}: {mesh.n_cells} cells, {mesh.n_faces} faces")


if __name__ == "__main__":
    main()

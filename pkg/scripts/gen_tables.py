"""Generate the shipped standard bounding tables under data/tables/.

Published reference tables are copied verbatim where they exist (p2..p6,
M in {N, N+1, N+2}); every other configuration is optimized here. The
order puts the acceptance-critical tables first so a truncated run still
leaves a usable set. Rerunning is deterministic.
"""

import shutil
import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from polybound.basis import make_basis  # noqa: E402
from polybound.boxopt import (  # noqa: E402
    load_table,
    optimize_nodes,
    reference_table_paths,
    save_table,
    verify_table,
)

OUT = ROOT / "src" / "polybound" / "data" / "tables"
FAMILY = "lobatto-nodal"


def ship_reference_copies():
    for src in reference_table_paths():
        dst = OUT / src.name
        shutil.copyfile(src, dst)
        t = load_table(dst)
        q = verify_table(t)
        print(f"copied {src.name}: eps2 {q.eps2:.6f} margin {q.max_violation:+.2e}",
              flush=True)


def generate(p, M, restarts, maxiter, warm=()):
    dst = OUT / f"{FAMILY}-p{p}-M{M}.txt"
    if dst.exists():
        t = load_table(dst)
        print(f"kept {dst.name}: eps2 {verify_table(t).eps2:.6f}", flush=True)
        return t.eta()
    basis = make_basis(FAMILY, p)
    t0 = time.time()
    table = optimize_nodes(basis, M, restarts=restarts, maxiter=maxiter,
                           warm_starts=warm)
    save_table(table, dst)
    q = verify_table(load_table(dst))
    print(f"wrote {dst.name}: eps2 {q.eps2:.6f} margin {q.max_violation:+.2e} "
          f"({time.time()-t0:.0f}s)", flush=True)
    return table.eta()


def insert_node(eta):
    """Warm start for M+1: split the widest gap in the left half, mirrored."""
    eta = np.asarray(eta, dtype=float)
    gaps = np.diff(eta)
    half = gaps[: gaps.size // 2 + 1]
    j = int(np.argmax(half))
    new = np.sort(np.concatenate([eta, [0.5 * (eta[j] + eta[j + 1])]]))
    sym = 0.5 * (new - new[::-1])
    sym[0], sym[-1] = -1.0, 1.0
    return sym


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    ship_reference_copies()

    # small orders not covered by the published set
    for M in (2, 3, 4):
        generate(1, M, restarts=8, maxiter=60)

    # the M=N table for the highest supported interpolation order
    generate(7, 8, restarts=36, maxiter=80)

    # M ladder for p=3 (convergence study); warm start from the previous M
    prev = load_table(OUT / f"{FAMILY}-p3-M6.txt").eta()
    for M in range(7, 21):
        prev = generate(3, M, restarts=6, maxiter=50, warm=(insert_node(prev),))

    for M in (9, 10):
        generate(7, M, restarts=12, maxiter=60)

    print("all tables done", flush=True)


if __name__ == "__main__":
    main()

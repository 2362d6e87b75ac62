"""
Strong scaling harness: the same periodic Cahn-Hilliard problem advanced
with a fixed iteration budget (Newton iterations per step, GMRES iterations
per Newton iteration, one ILU(0) block per worker) for several worker
counts.
"""

from pathlib import Path

import numpy as np
from beartype.typing import Dict, List, Literal, Optional, Sequence, Union

from ..assembly import assembly_backend
from ..errors import ParameterError
from ..logger import red, table_printer, whi
from ..solvers import SolverConfig
from ..typechecker import Int, Real, optional_typecheck
from .base import output_dir
from .cahn_hilliard import CahnHilliardProblem, cahn_hilliard_run

# parallel efficiency expected at every worker count
EFFICIENCY_TARGET = 0.7


@optional_typecheck
def scaling_bench(
    N: Int = 64,
    p: Int = 2,
    dim: Int = 2,
    workers: Sequence[Int] = (1, 2, 4, 8),
    steps: Int = 10,
    newton: Int = 2,
    gmres: Int = 30,
    dt: Real = 1e-4,
    rho_inf: Real = 0.5,
    seed: Int = 0,
    backend: Literal["threading", "loky"] = "loky",
    out: Optional[Union[str, Path]] = None,
) -> List[Dict[str, Union[Real, bool]]]:
    """
    Wall time of the time stepping per worker count and the parallel
    efficiency T_1 / (W T_W) relative to the smallest count. The element
    loops run in processes by default, threads serialise them on the GIL.
    """
    counts = sorted({int(w) for w in workers})
    if not counts or counts[0] < 1:
        raise ParameterError(f"Invalid worker counts {workers}")
    config = SolverConfig.fixed_protocol(newton=newton, gmres=gmres)
    problem = CahnHilliardProblem(seed=int(seed))
    rows = []
    with assembly_backend(backend):
        for W in counts:
            whi(f"Benchmark with {W} workers on the {backend} backend")
            res = cahn_hilliard_run(
                problem, N=N, p=p, dim=dim, dt=dt, steps=steps, rho_inf=rho_inf,
                workers=W, config=config,
            )
            rows.append(
                {
                    "workers": W,
                    "elements": res.system.disc.element_count,
                    "dofs": res.system.disc.dof_count,
                    "seconds": res.timings["time_stepping"],
                    "per_step": res.timings["time_stepping"] / int(steps),
                }
            )
    base = rows[0]["seconds"] * rows[0]["workers"]
    for r in rows:
        r["speedup"] = rows[0]["seconds"] / r["seconds"]
        r["efficiency"] = base / (r["workers"] * r["seconds"])
        r["target_met"] = bool(r["efficiency"] >= EFFICIENCY_TARGET)

    table_printer(
        f"Fixed budget scaling: {steps} steps x {newton} Newton x {gmres} GMRES, "
        f"N={N} p={p} dim={dim}, {backend}",
        ["workers", "dofs", "time (s)", "per step (s)", "speedup", "efficiency", "target"],
        [
            [
                str(r["workers"]), str(r["dofs"]), f"{r['seconds']:.3f}",
                f"{r['per_step']:.3f}", f"{r['speedup']:.2f}", f"{100 * r['efficiency']:.1f}%",
                "met" if r["target_met"] else "below",
            ]
            for r in rows
        ],
    )
    below = [r["workers"] for r in rows if not r["target_met"]]
    if below:
        red(f"Parallel efficiency under {100 * EFFICIENCY_TARGET:.0f}% with {below} workers")
    dest = output_dir(out)
    if dest is not None:
        table = np.array(
            [
                [r["workers"], r["dofs"], r["seconds"], r["per_step"], r["speedup"], r["efficiency"], r["target_met"]]
                for r in rows
            ]
        )
        np.savetxt(
            dest / "bench.csv", table, delimiter=",",
            header="workers,dofs,seconds,per_step,speedup,efficiency,target_met", comments="",
            fmt=["%d", "%d", "%.6f", "%.6f", "%.4f", "%.4f", "%d"],
        )
    return rows

"""Compare FMG, V-cycles, single-grid smoothing and lagged-diffusivity CG on EED inpainting.

Writes one residual-versus-work CSV per solver.
"""
import argparse
import time
from pathlib import Path

from diffnets import InpaintingProblem, cg_reference_solve, fmg_solve
from diffnets.inpainting import benchmark_image, iterate_solve, random_mask


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/inpainting")
    args = p.parse_args()

    n = args.size
    prob = InpaintingProblem(benchmark_image(n, args.seed), random_mask((n, n), args.density, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {
        "fmg": lambda: fmg_solve(prob, 1e-6),
        "vcycle": lambda: iterate_solve(prob, 1e-6, "vcycle"),
        "singlegrid": lambda: iterate_solve(prob, 1e-4, "singlegrid", max_iter=100_000),
        "cg": lambda: cg_reference_solve(prob, 1e-8),
    }
    print("solver,residual,work_to_1e-4,seconds")
    for name, run in runs.items():
        t0 = time.perf_counter()
        res = run()
        secs = time.perf_counter() - t0
        with open(out / f"{name}.csv", "w", encoding="utf-8") as fh:
            fh.write("visit,level,residual,work\n")
            fh.writelines(f"{v},{lv},{r!r},{w!r}\n" for (v, lv, r), w in zip(res.log, res.work or [float("nan")] * len(res.log)))
        # CG does no smoothing, so it has no sweep count
        work = f"{res.work_to_reach(1e-4):.1f}" if res.work else "n/a"
        print(f"{name},{res.residual:.3e},{work},{secs:.1f}")


if __name__ == "__main__":
    main()

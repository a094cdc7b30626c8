"""Command-line entry point: ``diffnets {gen-data,denoise,train,inpaint,stability-check}``."""
from __future__ import annotations

import argparse
import hashlib
import logging
import math
import shlex
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import inpainting as ip
from .errors import (
    ConfigurationError,
    FormatError,
    NumericalError,
    UnsupportedKindError,
)
from .flux import FluxFunction, FluxKind
from .io import fmt, read_pgm, read_signals_csv, write_pgm, write_signals_csv
from .networks import Arch, NetworkSpec, load_model, save_model
from .schemes import (
    SchemeConfig,
    StabilityMode,
    gershgorin_rescale,
    run_scheme,
    stability_bound,
)
from .signal import KernelBank
from .training import (
    Dataset,
    DatasetConfig,
    TrainConfig,
    classical_baselines,
    generate_dataset,
    predict,
    psnr,
    train,
    write_metric_log,
)

log = logging.getLogger("diffnets")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SPLIT_FILES = ("train", "val", "test")


def _write_run(out: Path, args: argparse.Namespace, argv: list[str]):
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"argv = {shlex.join(argv)}"]
    for key, val in sorted(vars(args).items()):
        if key != "func":
            lines.append(f"{key} = {val}")
    (out / "run.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _kernel(text: str) -> np.ndarray:
    try:
        taps = np.array([float(v) for v in text.replace(" ", ",").split(",") if v])
    except ValueError as exc:
        raise ConfigurationError(f"kernel must be comma-separated numbers: {text!r}") from exc
    c = int(round(math.sqrt(taps.size / 3)))
    if 3 * c * c != taps.size:
        raise ConfigurationError("kernel needs 3*C*C taps (C_out, C_in, 3 in row-major order)")
    return taps.reshape(c, c, 3)


def load_dataset(folder: Path) -> Dataset:
    arrays = []
    for split in SPLIT_FILES:
        for suffix in ("", "_clean"):
            path = folder / f"{split}{suffix}.csv"
            if not path.exists():
                raise FileNotFoundError(f"dataset file missing: {path}")
            arrays.append(read_signals_csv(path))
    return Dataset(*arrays)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    cfg = DatasetConfig(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test,
                        length=args.length, noise_sigma=args.sigma, seed=args.seed)
    data = generate_dataset(cfg)
    out = Path(args.out)
    for split in SPLIT_FILES:
        write_signals_csv(out / f"{split}.csv", getattr(data, split))
        write_signals_csv(out / f"{split}_clean.csv", getattr(data, f"{split}_clean"))
    text = repr(sorted(asdict(cfg).items()))
    manifest = [f"seed = {cfg.seed}", f"config = {text}",
                f"config_sha256 = {hashlib.sha256(text.encode()).hexdigest()}"]
    manifest += [f"files = {', '.join(f'{s}{x}.csv' for s in SPLIT_FILES for x in ('', '_clean'))}"]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    print(f"wrote {cfg.n_train}/{cfg.n_val}/{cfg.n_test} signals of length {cfg.length} to {out}")
    return EXIT_OK


def _stability_limit(scheme: str, report) -> tuple[str, float]:
    if scheme == "dff":
        return "alpha", report.alpha_min
    if scheme == "implicit":
        # the fixed-point map is a contraction for tau * L * |K|^2 < 1
        return "tau", report.tau_max / 2.0
    return "tau", report.tau_max


def cmd_denoise(args) -> int:
    data_dir = Path(args.data)
    out = Path(args.out)
    if args.grid_search:
        data = load_dataset(data_dir)
        res = classical_baselines(data, args.flux)
        print(f"flux = {res.kind.value}")
        print(f"lambda = {fmt(res.lam)}\ntau = {fmt(res.tau)}\nsteps = {res.steps}")
        print(f"val_psnr = {fmt(res.val_psnr)}\ntest_psnr = {fmt(res.test_psnr)}")
        return EXIT_OK

    noisy = read_signals_csv(data_dir / f"{args.split}.csv")
    clean_path = data_dir / f"{args.split}_clean.csv"
    clean = read_signals_csv(clean_path) if clean_path.exists() else None
    taps = _kernel(args.kernel)
    if taps.shape[0] != 1:
        raise ConfigurationError("denoise works on single-channel signals")
    f = FluxFunction(args.flux, args.lam)
    report = stability_bound(KernelBank(taps), noisy.shape[1], f, StabilityMode(args.stability))
    which, limit = _stability_limit(args.scheme, report)
    value = args.alpha if which == "alpha" else args.tau
    violated = value < limit if which == "alpha" else value > limit
    if violated and not args.allow_unstable:
        print(f"refusing: {which} = {fmt(value)} violates the stability bound "
              f"{'>=' if which == 'alpha' else '<='} {fmt(limit)} "
              f"(|K|^2 = {fmt(report.spectral_norm_sq)}, L = {fmt(report.lipschitz)}); "
              "pass --allow-unstable to run anyway", file=sys.stderr)
        return EXIT_CONFIG
    cfg = SchemeConfig(args.tau, f, args.alpha, args.cycle_length)
    u = run_scheme(noisy[:, None, :], taps, cfg, args.scheme, args.steps)[:, 0]
    write_signals_csv(out / "denoised.csv", u)
    if clean is not None:
        scores = [psnr(a, b) for a, b in zip(u, clean)]
        with open(out / "psnr.csv", "w", encoding="utf-8") as fh:
            fh.write("signal,psnr\n")
            fh.writelines(f"{i},{fmt(p)}\n" for i, p in enumerate(scores))
        print(f"mean_psnr = {fmt(psnr(u, clean))}")
    return EXIT_OK


def cmd_train(args) -> int:
    data = load_dataset(Path(args.data))
    if args.n_train:
        data = data.subset(args.n_train)
    spec = NetworkSpec(arch=args.arch, blocks=args.blocks, channels=args.channels,
                       sharing=args.sharing, flux=args.flux,
                       stability_mode=args.stability, length=data.train.shape[1])
    beta = args.beta if args.beta is not None else (5.0 if spec.arch is Arch.RESNET else 10.0)
    cfg = TrainConfig(lr=args.lr, max_epochs=args.epochs, beta=beta, batch_size=args.batch_size,
                      restarts=args.restarts, patience=args.patience, seed=args.seed,
                      threads=args.threads)
    out = Path(args.out)
    rows_by_restart: dict[int, list] = {}

    def on_epoch(restart, epoch, m, p):
        rows_by_restart.setdefault(restart, []).append((epoch, m, p))
        log.info("restart %d epoch %d train_mse %.6g val_psnr %.4f", restart, epoch, m, p)

    try:
        result = train(spec, data, cfg, on_epoch)
    except NumericalError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for r in result.failed:
        print(f"restart {r} aborted on a non-finite loss", file=sys.stderr)
    save_model(out / "model.txt", spec, result.params)
    write_metric_log(out / "metrics.csv", rows_by_restart.get(result.restart, []))
    test = psnr(predict(spec, result.params, data.test), data.test_clean)
    print(f"best_restart = {result.restart}")
    print(f"val_psnr = {fmt(result.val_psnr)}")
    print(f"test_psnr = {fmt(test)}")
    return EXIT_OK


def cmd_inpaint(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.benchmark:
        f = np.rint(ip.benchmark_image(args.size, args.seed))
        mask = ip.random_mask(f.shape, args.density, args.seed)
        write_pgm(out / "image.pgm", f)
        write_pgm(out / "mask.pgm", 255 * mask)
    else:
        if not (args.image and args.mask):
            raise ConfigurationError("--image and --mask are required unless --benchmark is given")
        f = read_pgm(args.image)
        mask = (read_pgm(args.mask) > 0).astype(float)
    prob = ip.InpaintingProblem(f, mask, args.lam, args.sigma)
    t0 = time.perf_counter()
    if args.solver == "fmg":
        res = ip.fmg_solve(prob, args.tol, sweeps=args.sweeps, max_cycles=args.max_iter)
    elif args.solver == "cg":
        res = ip.cg_reference_solve(prob, args.tol, max_outer=args.max_iter)
    else:
        res = ip.iterate_solve(prob, args.tol, args.solver, levels=args.levels,
                               sweeps=args.sweeps, max_iter=args.max_iter)
    wall = time.perf_counter() - t0
    write_pgm(out / "reconstruction.pgm", res.u)
    np.save(out / "reconstruction.npy", res.u)
    with open(out / "residual.csv", "w", encoding="utf-8") as fh:
        fh.write("visit,level,residual\n")
        fh.writelines(f"{v},{lv},{fmt(r)}\n" for v, lv, r in res.log)
    print("residual_convention = mean absolute")
    print(f"residual = {fmt(res.residual)}")
    print(f"converged = {res.converged}")
    print(f"wall_time_s = {wall:.3f}")
    if not res.converged:
        print(f"warning: tolerance {args.tol} not reached", file=sys.stderr)
    return EXIT_OK


def cmd_stability_check(args) -> int:
    stored_tau = args.tau
    stored_alpha = args.alpha
    if args.model:
        spec, params = load_model(args.model)
        banks = [(i, bp.kernel, bp.tau, bp.alpha) for i, bp in enumerate(params.blocks)]
        flux, n, mode, arch = spec.flux, spec.length, spec.stability_mode, spec.arch
    elif args.kernel:
        banks = [(0, _kernel(args.kernel), stored_tau, stored_alpha)]
        flux, n, mode = FluxKind(args.flux), args.length, StabilityMode(args.stability)
        arch = Arch.DFNET if stored_alpha is not None else Arch.SYMRESNET
    else:
        raise ConfigurationError("give --model or --kernel")
    ok = True
    for i, taps, tau, alpha in banks:
        k = KernelBank(taps)
        if args.rescale:
            k = gershgorin_rescale(k)
        rep = stability_bound(k, n, FluxFunction(flux, 1.0), mode)
        print(f"block {i}: norm_sq = {fmt(rep.spectral_norm_sq)} L = {fmt(rep.lipschitz)} "
              f"tau_max = {fmt(rep.tau_max)} alpha_min = {fmt(rep.alpha_min)}")
        if tau is not None and arch.symmetric:
            good = tau <= rep.tau_max * (1 + 1e-12)
            ok &= good
            print(f"block {i}: tau = {fmt(tau)} {'PASS' if good else 'FAIL'}"
                  + ("" if good else f" (requires tau <= {fmt(rep.tau_max)})"))
        if alpha is not None and arch is Arch.DFNET:
            good = alpha >= rep.alpha_min * (1 - 1e-12)
            ok &= good
            print(f"block {i}: alpha = {fmt(alpha)} {'PASS' if good else 'FAIL'}"
                  + ("" if good else f" (requires alpha >= {fmt(rep.alpha_min)})"))
    print(f"overall = {'PASS' if ok else 'FAIL'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffnets", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--threads", type=int, default=1)

    g = sub.add_parser("gen-data", help="synthesise the piecewise-affine denoising benchmark")
    common(g, "data")
    g.add_argument("--n-train", type=int, default=10000)
    g.add_argument("--n-val", type=int, default=1000)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--length", type=int, default=256)
    g.add_argument("--sigma", type=float, default=10.0)
    g.set_defaults(func=cmd_gen_data)

    fluxes = [k.value for k in FluxKind]
    d = sub.add_parser("denoise", help="run a diffusion scheme on a dataset split")
    common(d, "denoise-out")
    d.add_argument("--data", default="data")
    d.add_argument("--split", default="test", choices=SPLIT_FILES)
    d.add_argument("--scheme", default="explicit", choices=["explicit", "dff", "fsi", "implicit"])
    d.add_argument("--flux", default="pm", choices=fluxes)
    d.add_argument("--lam", type=float, default=1.0)
    d.add_argument("--tau", type=float, default=0.25)
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--cycle-length", type=int, default=1)
    d.add_argument("--steps", type=int, default=10)
    d.add_argument("--kernel", default="0,-1,1")
    d.add_argument("--stability", default="spectral", choices=[m.value for m in StabilityMode])
    d.add_argument("--allow-unstable", action="store_true")
    d.add_argument("--grid-search", action="store_true",
                   help="grid-search lambda and diffusion time on validation, score on test")
    d.set_defaults(func=cmd_denoise)

    t = sub.add_parser("train", help="train a diffusion network")
    common(t, "train-out")
    t.add_argument("--data", default="data")
    t.add_argument("--arch", default="symresnet", choices=[a.value for a in Arch])
    t.add_argument("--blocks", type=int, default=1)
    t.add_argument("--channels", type=int, default=1)
    t.add_argument("--flux", default="pm", choices=fluxes)
    sh = t.add_mutually_exclusive_group()
    sh.add_argument("--shared", dest="sharing", action="store_const", const="shared")
    sh.add_argument("--time-dynamic", dest="sharing", action="store_const", const="time-dynamic")
    t.set_defaults(sharing="shared")
    t.add_argument("--beta", type=float, default=None,
                   help="temporal smoothness weight (default 5 for resnet, 10 otherwise)")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--restarts", type=int, default=3)
    t.add_argument("--patience", type=int, default=100)
    t.add_argument("--n-train", type=int, default=0, help="use only the first n training pairs")
    t.add_argument("--stability", default="spectral", choices=[m.value for m in StabilityMode])
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("inpaint", help="EED inpainting with multigrid or CG")
    common(i, "inpaint-out")
    i.add_argument("--image")
    i.add_argument("--mask")
    i.add_argument("--benchmark", action="store_true",
                   help="use the built-in test scene and a random mask (written to --out)")
    i.add_argument("--size", type=int, default=256)
    i.add_argument("--density", type=float, default=0.2)
    i.add_argument("--solver", default="fmg", choices=["fmg", "vcycle", "twogrid", "singlegrid", "cg"])
    i.add_argument("--lam", type=float, default=0.93)
    i.add_argument("--sigma", type=float, default=0.97)
    i.add_argument("--tol", type=float, default=1e-6)
    i.add_argument("--levels", type=int, default=3)
    i.add_argument("--sweeps", type=int, default=3)
    i.add_argument("--max-iter", type=int, default=1000)
    i.set_defaults(func=cmd_inpaint)

    s = sub.add_parser("stability-check", help="report stability bounds of a model or kernel")
    common(s, "stability-out")
    s.add_argument("--model")
    s.add_argument("--kernel")
    s.add_argument("--length", type=int, default=256)
    s.add_argument("--flux", default="pm", choices=fluxes)
    s.add_argument("--tau", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--stability", default="spectral", choices=[m.value for m in StabilityMode])
    s.add_argument("--rescale", action="store_true", help="apply the Gershgorin rescaling first")
    s.set_defaults(func=cmd_stability_check)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        _write_run(Path(args.out), args, argv)
        return args.func(args)
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, UnsupportedKindError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

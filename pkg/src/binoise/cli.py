"""Command-line surface: gen-data, train, sample, eval, compare.

The only module with filesystem side effects. Every command is reproducible:
identical config and seed give byte-identical canonical artifacts
(checkpoints, PPM/PGM images, CSVs); wall-clock measurements go to sidecar
files that are excluded from that contract. Options can come from a JSON
config file (--config); explicit flags win on conflict.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
BINOISE_THREADS caps sampling parallelism (0 = serial, the default).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import metrics, nets, tasks, training
from .denoiser import Denoiser
from .diffusion import DEFAULT_VALUE_RANGE
from .guidance import (
    MODES,
    SamplerSpec,
    TraceRecord,
    sample_binoising,
    sample_binoising_null,
    sample_cdp,
    sample_conditional,
    sample_plain,
)
from .imageio import read_image, write_image
from .schedule import build_linear_schedule

VALUE_RANGE = DEFAULT_VALUE_RANGE
PEAK = VALUE_RANGE[1] - VALUE_RANGE[0]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _thread_count() -> int:
    try:
        return max(0, int(os.environ.get("BINOISE_THREADS", "0")))
    except ValueError:
        return 0


def _ensure_outdir(path: Path, force: bool) -> Path:
    if path.exists() and any(path.iterdir()) and not force:
        raise UsageError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_manifest(data_dir: str) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise UsageError(f"no manifest.json in {data_dir}; run gen-data first")
    return json.loads(path.read_text())


def _load_pairs(data_dir: str, ids) -> tasks.PairedDataset:
    root = Path(data_dir)
    xs, ys = [], []
    for i in ids:
        xs.append(read_image(root / "images" / f"x_{i:04d}.ppm", VALUE_RANGE))
        ys.append(read_image(root / "images" / f"y_{i:04d}.ppm", VALUE_RANGE))
    return tasks.PairedDataset(np.stack(xs), np.stack(ys))


def _export(path: Path, img: np.ndarray) -> None:
    write_image(path, np.clip(img, *VALUE_RANGE), VALUE_RANGE)


def _load_model(path: str | None, role: str) -> tuple[nets.TinyNet, ckpt_io.Checkpoint]:
    if path is None:
        raise UsageError(f"this mode requires --{role} CHECKPOINT")
    ckpt = ckpt_io.load_checkpoint(path)
    return ckpt.build_model(), ckpt


def _run_samples(fn, n: int, threads: int):
    """Deterministic fan-out: fn(i) -> image, merged in index order."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def _sample_one(mode: str, cond: Denoiser | None, uncond: Denoiser | None, x0, spec: SamplerSpec, shape, trace=None):
    if mode == "plain":
        return sample_plain(uncond, spec, shape, trace=trace)
    if mode == "conditional":
        return sample_conditional(cond, x0, spec, shape, trace=trace)
    if mode == "cdp":
        return sample_cdp(uncond, x0, spec, shape, trace=trace)
    if mode == "binoising":
        return sample_binoising(cond, uncond, x0, spec, shape, trace=trace)
    if mode == "binoising_null":
        return sample_binoising_null(cond, x0, spec, shape, trace=trace)
    raise UsageError(f"unknown mode {mode!r}")


def _mode_models(mode: str, cond_path, uncond_path):
    """Load the checkpoints a mode needs; returns (cond, uncond, schedule, n_params)."""
    cond = uncond = None
    cond_ckpt = uncond_ckpt = None
    if mode in ("conditional", "binoising", "binoising_null"):
        cond, cond_ckpt = _load_model(cond_path, "cond")
        if not cond.is_conditional:
            raise UsageError(f"--cond checkpoint is unconditional; {mode} needs a conditional model")
    if mode in ("plain", "cdp", "binoising"):
        uncond, uncond_ckpt = _load_model(uncond_path, "uncond")
        if uncond.is_conditional:
            raise UsageError(f"--uncond checkpoint is conditional; {mode} needs an unconditional model")
    ref = cond_ckpt or uncond_ckpt
    schedule = ref.build_schedule()
    n_params = (cond.n_params if cond else 0) + (uncond.n_params if uncond else 0)
    return cond, uncond, schedule, n_params


# ---------------------------------------------------------------------------
# gen-data


def cmd_gen_data(args) -> int:
    if args.count < 1:
        raise UsageError(f"--count must be positive, got {args.count}")
    test_count = args.test_count if args.test_count is not None else max(1, args.count // 10)
    if not 0 < test_count < args.count:
        raise UsageError(f"--test-count must be in (0, {args.count}), got {test_count}")
    op = tasks.op_for_task(args.task, seed=args.seed)
    spec = tasks.ToyDatasetSpec(count=args.count, seed=args.seed, size=args.size)
    ds = tasks.gen_dataset(spec, op)

    out = _ensure_outdir(Path(args.out), args.force)
    (out / "images").mkdir(exist_ok=True)
    for i in range(args.count):
        _export(out / "images" / f"x_{i:04d}.ppm", ds.x0[i])
        _export(out / "images" / f"y_{i:04d}.ppm", ds.y0[i])
    train_ids = list(range(args.count - test_count))
    test_ids = list(range(args.count - test_count, args.count))
    manifest = {
        "task": args.task,
        "count": args.count,
        "size": args.size,
        "seed": args.seed,
        "degradation": op.to_dict(),
        "value_range": list(VALUE_RANGE),
        "train_ids": train_ids,
        "test_ids": test_ids,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {args.count} pairs ({len(train_ids)} train / {len(test_ids)} test) to {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    manifest = _load_manifest(args.data)
    train_ds = _load_pairs(args.data, manifest["train_ids"])
    size = manifest["size"]

    T = args.T
    beta_start = args.beta_start if args.beta_start is not None else 1e-4 * 1000.0 / T
    beta_end = args.beta_end if args.beta_end is not None else 0.02 * 1000.0 / T
    schedule = build_linear_schedule(T, beta_start, beta_end)

    conditional = not args.unconditional
    if args.arch == "mlp":
        net = nets.make_mlp([3, size, size], conditional, hidden=args.hidden, seed=args.init_seed)
    else:
        net = nets.make_conv((3, size, size), conditional, channels=args.channels, seed=args.init_seed)

    cfg = training.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
        lambda_corr=args.lambda_corr,
        corr_enabled=args.lambda_corr > 0 and conditional,
        ema_alpha=args.ema_alpha,
        null_token_prob=args.null_token_prob if conditional else 0.0,
    )
    pretrained = None
    if args.pretrained:
        pre = ckpt_io.load_checkpoint(args.pretrained)
        if pre.fingerprint != net.fingerprint:
            raise UsageError("--pretrained checkpoint architecture does not match the model")
        pretrained = pre.weight_vector()

    result = training.train(net, train_ds, cfg, schedule, pretrained=pretrained)

    out = _ensure_outdir(Path(args.out), args.force)
    sched_params = ckpt_io.schedule_params(T, beta_start, beta_end)
    cfg_dict = {
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "lambda_corr": cfg.lambda_corr,
        "corr_enabled": cfg.corr_enabled,
        "ema_alpha": cfg.ema_alpha,
        "null_token_prob": cfg.null_token_prob,
        "ema_fused": bool(pretrained is not None),
    }
    ckpt_io.save_checkpoint(
        out / "model.ckpt",
        ckpt_io.Checkpoint(
            arch=net.arch,
            weights=result.weights.values,
            schedule_params=sched_params,
            train_config=cfg_dict,
            step_count=cfg.steps,
        ),
    )
    with open(out / "losses.csv", "w") as f:
        f.write("step,L_simple,L_corr,L_final\n")
        for step, ls, lc, lf in result.loss_curve:
            f.write(f"{step},{ls:.10g},{lc:.10g},{lf:.10g}\n")
    _write_json(out / "config.json", {**cfg_dict, "schedule": sched_params, "arch": net.arch, "data": str(args.data)})
    final = result.loss_curve[-1]
    print(f"trained {cfg.steps} steps; final L_simple={final[1]:.4f} L_final={final[3]:.4f}; checkpoint at {out / 'model.ckpt'}")
    return 0


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args) -> int:
    if args.mode not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    cond, uncond, schedule, _ = _mode_models(args.mode, args.cond, args.uncond)
    needs_condition = args.mode != "plain"

    if needs_condition:
        manifest = _load_manifest(args.data)
        test_ids = manifest["test_ids"]
        if args.count is not None:
            test_ids = test_ids[: args.count]
        pairs = _load_pairs(args.data, test_ids)
        n = len(test_ids)
        shape = pairs.x0.shape[1:]
    else:
        if args.count is None:
            raise UsageError("plain mode requires --count")
        n = args.count
        size = args.size
        shape = (3, size, size)

    factor = args.cdp_factor
    out = _ensure_outdir(Path(args.out), args.force)

    def run(i: int):
        spec = SamplerSpec(
            mode=args.mode,
            schedule=schedule,
            seed=args.seed,
            stream_id=i,
            clamp_x0=not args.no_clamp,
            cdp_downsample_factor=factor if args.mode == "cdp" else None,
        )
        trace = TraceRecord() if args.trace else None
        x0 = pairs.x0[i] if needs_condition else None
        img = _sample_one(args.mode, cond, uncond, x0, spec, shape, trace=trace)
        return img, trace

    results = _run_samples(run, n, _thread_count())
    for i, (img, trace) in enumerate(results):
        _export(out / f"out_{i:04d}.ppm", img)
        if trace is not None:
            for step in trace.steps:
                frame = step.x0_pred if step.x0_pred is not None else step.y_t
                _export(out / f"trace_{i:04d}_t{step.t:04d}.ppm", frame)
    _write_json(
        out / "config.json",
        {
            "mode": args.mode,
            "seed": args.seed,
            "count": n,
            "cond": args.cond,
            "uncond": args.uncond,
            "cdp_factor": factor,
            "clamp_x0": not args.no_clamp,
            "trace": bool(args.trace),
        },
    )
    print(f"wrote {n} samples to {out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _eval_outputs(out_dir: Path, gt: np.ndarray, ids) -> list[dict]:
    rows = []
    for k, i in enumerate(ids):
        path = out_dir / f"out_{k:04d}.ppm"
        if not path.exists():
            raise FileNotFoundError(f"missing output for id {i}: {path}")
        img = read_image(path, VALUE_RANGE)
        rows.append(
            {
                "id": i,
                "mse": metrics.mse(img, gt[k]),
                "psnr": metrics.psnr(img, gt[k], peak=PEAK),
                "ssim": metrics.ssim(img, gt[k], data_range=PEAK),
            }
        )
    return rows


def _format_report(rows: list[dict]) -> str:
    lines = [f"{'id':>6}  {'MSE':>10}  {'PSNR(dB)':>10}  {'SSIM':>8}"]
    for r in rows:
        lines.append(f"{r['id']:>6}  {r['mse']:>10.4f}  {r['psnr']:>10.4f}  {r['ssim']:>8.4f}")
    n = len(rows)
    lines.append(
        f"{'mean':>6}  {sum(r['mse'] for r in rows) / n:>10.4f}  "
        f"{sum(r['psnr'] for r in rows) / n:>10.4f}  {sum(r['ssim'] for r in rows) / n:>8.4f}"
    )
    return "\n".join(lines)


def cmd_eval(args) -> int:
    manifest = _load_manifest(args.data)
    test_ids = manifest["test_ids"]
    out_dir = Path(args.outputs)
    n_outputs = len(list(out_dir.glob("out_*.ppm")))
    if args.count is not None:
        test_ids = test_ids[: args.count]
    if n_outputs != len(test_ids):
        raise RuntimeError(f"output/ground-truth count mismatch: {n_outputs} outputs vs {len(test_ids)} test images")
    pairs = _load_pairs(args.data, test_ids)
    rows = _eval_outputs(out_dir, pairs.y0, test_ids)

    out = _ensure_outdir(Path(args.out), args.force)
    with open(out / "metrics.csv", "w") as f:
        f.write("id,mse,psnr,ssim\n")
        for r in rows:
            f.write(f"{r['id']},{r['mse']:.4f},{r['psnr']:.4f},{r['ssim']:.4f}\n")
        n = len(rows)
        f.write(
            f"mean,{sum(r['mse'] for r in rows) / n:.4f},"
            f"{sum(r['psnr'] for r in rows) / n:.4f},{sum(r['ssim'] for r in rows) / n:.4f}\n"
        )
    report = _format_report(rows)
    (out / "report.txt").write_text(report + "\n")
    print(report)
    return 0


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    manifest = _load_manifest(args.data)
    test_ids = manifest["test_ids"]
    if args.count is not None:
        test_ids = test_ids[: args.count]
    pairs = _load_pairs(args.data, test_ids)
    n = len(test_ids)
    shape = pairs.x0.shape[1:]
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]

    columns = {}
    timings = {}
    failures = []
    for mode in modes:
        try:
            cond, uncond, schedule, n_params = _mode_models(mode, args.cond, args.uncond)
        except (UsageError, ckpt_io.CheckpointError) as e:
            failures.append((mode, str(e)))
            if args.best_effort:
                continue
            raise UsageError(f"mode {mode!r} unavailable: {e}") from None

        def run(i: int, mode=mode, cond=cond, uncond=uncond, schedule=schedule):
            spec = SamplerSpec(
                mode=mode,
                schedule=schedule,
                seed=args.seed,
                stream_id=i,
                cdp_downsample_factor=args.cdp_factor if mode == "cdp" else None,
            )
            return _sample_one(mode, cond, uncond, pairs.x0[i], spec, shape)

        start = time.perf_counter()
        outputs = _run_samples(run, n, _thread_count())
        elapsed = time.perf_counter() - start
        timings[mode] = elapsed / n
        columns[mode] = {
            "psnr": float(np.mean([metrics.psnr(o, g, peak=PEAK) for o, g in zip(outputs, pairs.y0)])),
            "ssim": float(np.mean([metrics.ssim(o, g, data_range=PEAK) for o, g in zip(outputs, pairs.y0)])),
            "mse": float(np.mean([metrics.mse(o, g) for o, g in zip(outputs, pairs.y0)])),
            "params": n_params,
        }

    if not columns:
        raise RuntimeError("no mode could be run: " + "; ".join(f"{m}: {e}" for m, e in failures))

    out = _ensure_outdir(Path(args.out), args.force)
    run_modes = [m for m in modes if m in columns]
    with open(out / "compare.csv", "w") as f:
        f.write("metric," + ",".join(run_modes) + "\n")
        for key, fmt in (("psnr", "{:.4f}"), ("ssim", "{:.4f}"), ("mse", "{:.4f}"), ("params", "{:d}")):
            f.write(key + "," + ",".join(fmt.format(columns[m][key]) for m in run_modes) + "\n")
    # wall-clock is machine-dependent; keep it out of the canonical CSV
    with open(out / "compare_timings.txt", "w") as f:
        for m in run_modes:
            f.write(f"{m}: {timings[m]:.3f} s/sample\n")

    width = max(len(m) for m in run_modes) + 2
    header = f"{'metric':>12}" + "".join(f"{m:>{max(width, 16)}}" for m in run_modes)
    lines = [header]
    for key, fmt in (("psnr", "{:.4f}"), ("ssim", "{:.4f}"), ("mse", "{:.4f}"), ("params", "{:d}")):
        lines.append(f"{key:>12}" + "".join(f"{fmt.format(columns[m][key]):>{max(width, 16)}}" for m in run_modes))
    lines.append(f"{'s/sample':>12}" + "".join(f"{timings[m]:>{max(width, 16)}.3f}" for m in run_modes))
    table = "\n".join(lines)
    print(table)
    for mode, err in failures:
        print(f"skipped {mode}: {err}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def _int_list(text: str):
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binoise", description="Bi-noising diffusion toy engine")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--force", action="store_true", help="allow writing into a non-empty directory")
        sp.add_argument("--config", help="JSON config file; explicit flags override its keys")

    g = sub.add_parser("gen-data", help="generate a paired toy dataset")
    g.add_argument("--task", required=True, choices=["colorize", "superres", "derain"])
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--test-count", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=16)
    common(g)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train a denoising network")
    t.add_argument("--data", required=True, help="dataset directory from gen-data")
    t.add_argument("--arch", choices=["mlp", "conv"], default="mlp")
    t.add_argument("--unconditional", action="store_true", help="train without the condition input")
    t.add_argument("--hidden", type=_int_list, default=[256, 256], help="mlp hidden widths, comma-separated")
    t.add_argument("--channels", type=_int_list, default=[16, 16], help="conv hidden channels, comma-separated")
    t.add_argument("--steps", type=int, default=5000)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--lambda-corr", type=float, default=0.001)
    t.add_argument("--null-token-prob", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--init-seed", type=int, default=0)
    t.add_argument("--T", type=int, default=100)
    t.add_argument("--beta-start", type=float, default=None)
    t.add_argument("--beta-end", type=float, default=None)
    t.add_argument("--pretrained", help="checkpoint for EMA weight fusion")
    t.add_argument("--ema-alpha", type=float, default=0.999)
    common(t)
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("sample", help="run a sampler over the test split")
    s.add_argument("--mode", required=True, choices=list(MODES))
    s.add_argument("--cond", help="conditional model checkpoint")
    s.add_argument("--uncond", help="unconditional model checkpoint")
    s.add_argument("--data", help="dataset directory (conditions come from its test split)")
    s.add_argument("--count", type=int, default=None)
    s.add_argument("--size", type=int, default=16, help="image size for plain mode")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cdp-factor", type=int, default=4)
    s.add_argument("--no-clamp", action="store_true", help="disable clean-prediction clamping")
    s.add_argument("--trace", action="store_true", help="write per-step clean-prediction frames")
    common(s)
    s.set_defaults(fn=cmd_sample)

    e = sub.add_parser("eval", help="score sampler outputs against ground truth")
    e.add_argument("--outputs", required=True, help="directory with out_*.ppm files")
    e.add_argument("--data", required=True)
    e.add_argument("--count", type=int, default=None)
    common(e)
    e.set_defaults(fn=cmd_eval)

    c = sub.add_parser("compare", help="run several samplers and tabulate metrics")
    c.add_argument("--data", required=True)
    c.add_argument("--cond")
    c.add_argument("--uncond")
    c.add_argument("--modes", default="conditional,cdp,binoising,binoising_null")
    c.add_argument("--count", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--cdp-factor", type=int, default=4)
    c.add_argument("--best-effort", action="store_true", help="skip unavailable modes instead of failing")
    common(c)
    c.set_defaults(fn=cmd_compare)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        if getattr(args, "config", None):
            _apply_config_file(args, argv)
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill args from the JSON config file; flags given on the command line win."""
    try:
        file_cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {args.config}: {e}") from None
    for raw_key, val in file_cfg.items():
        key = raw_key.replace("-", "_")
        if not hasattr(args, key):
            raise UsageError(f"unknown config key {raw_key!r}")
        if f"--{raw_key.replace('_', '-')}" in argv or f"--{raw_key}" in argv:
            continue
        setattr(args, key, val)


if __name__ == "__main__":
    sys.exit(main())

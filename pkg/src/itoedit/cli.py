"""Command-line interface: demo, single edits, masks, sweeps and manifest re-runs.

Every run writes into a fresh directory under the output root and records a
``manifest.json`` holding the full configuration, seeds, artifact paths,
metrics, tool version and wall-clock duration. ``itoedit rerun MANIFEST``
replays a run from that file alone.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import CALIBRATED_BOUNDS
from .config import ConfigError, RunConfig, dump_config, load_config
from .corpus import EDIT_KINDS, build_corpus
from .ito import PRESETS, EditParams, diffedit_baseline, run_edit
from .mask import EditMask, estimate_mask
from .metrics import CsvAppender, EditTruth, evaluate, l1, metrics_row
from .pnm import contact_sheet, read_pbm, read_pnm, write_pbm, write_pnm
from .scene import Condition, render_scene, sample_scene

ENV_OUTPUT_ROOT = "ITOEDIT_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "itoedit-runs"
MANIFEST_NAME = "manifest.json"
# Keys that legitimately differ between otherwise identical runs.
VOLATILE_KEYS = ("created", "duration_s", "run_dir")
SWEEP_AXES = ("lambda", "t_u", "k", "tau")
SHEET_MAX_ROWS = 8

log = logging.getLogger("itoedit")


class CommandError(RuntimeError):
    """User-facing failure with a one-line diagnostic."""


# ---------------------------------------------------------------- helpers


def parse_condition(text: str) -> Condition:
    """Parse ``CLASS@ROW,COL``, ``CLASS``, ``@ROW,COL`` or ``null``."""
    s = text.strip()
    if s.lower() in ("null", "none", ""):
        return Condition.null()
    cls_part, _, pos_part = s.partition("@")
    try:
        class_id = int(cls_part) if cls_part else None
        layout = None
        if pos_part:
            r, c = pos_part.split(",")
            layout = (int(r), int(c))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid condition {text!r}; expected CLASS@ROW,COL") from None
    return Condition(class_id, layout)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def latent_digest(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=np.float64).tobytes()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_image(path: str | Path, cfg: RunConfig) -> np.ndarray:
    """Read a ``.npy`` latent or a PGM/PPM image and check it against the canvas."""
    path = Path(path)
    if not path.is_file():
        raise CommandError(f"input image not found: {path}")
    try:
        if path.suffix == ".npy":
            x = np.load(path, allow_pickle=False)
        else:
            x = read_pnm(path, *cfg.output.image_range)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read input image {path}: {exc}") from exc
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape != cfg.scene.shape:
        raise CommandError(f"input image {path} has shape {x.shape}, expected {cfg.scene.shape}")
    return x


def output_root(cli_root: str | None, cfg: RunConfig) -> Path:
    return Path(cli_root or os.environ.get(ENV_OUTPUT_ROOT) or cfg.output.root or DEFAULT_OUTPUT_ROOT)


def make_run_dir(command: str, root: Path, explicit: str | None) -> Path:
    if explicit:
        run_dir = Path(explicit)
        if run_dir.exists() and any(run_dir.iterdir()):
            raise CommandError(f"output directory is not empty: {run_dir}")
    else:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        run_dir = root / f"{command}-{stamp}-{uuid.uuid4().hex[:6]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


class Run:
    """Collects artifacts and metrics for one command and writes the manifest."""

    def __init__(self, command: str, cfg: RunConfig, invocation: dict, run_dir: Path):
        self.command = command
        self.cfg = cfg
        self.invocation = invocation
        self.dir = run_dir
        self.artifacts: dict[str, str] = {}
        self.latents: dict[str, str] = {}
        self.metrics: dict = {}
        self.extra: dict = {}
        self.seeds: dict = {}
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def image(self, key: str, name: str, img: np.ndarray) -> None:
        write_pnm(self.path(name), img, *self.cfg.output.image_range)
        self.artifacts[key] = name
        self.latents[key] = latent_digest(img)

    def soft_mask(self, key: str, name: str, soft: np.ndarray) -> None:
        write_pnm(self.path(name), soft, 0.0, 1.0)
        self.artifacts[key] = name

    def bitmap(self, key: str, name: str, bits: np.ndarray) -> None:
        write_pbm(self.path(name), bits)
        self.artifacts[key] = name

    def array(self, key: str, name: str, x: np.ndarray) -> None:
        np.save(self.path(name), x, allow_pickle=False)
        self.artifacts[key] = name
        self.latents[key] = latent_digest(x)

    def json(self, key: str, name: str, doc) -> None:
        self.path(name).write_text(json.dumps(doc, indent=2) + "\n")
        self.artifacts[key] = name

    def manifest(self) -> dict:
        return {
            "tool": "itoedit",
            "version": __version__,
            "command": self.command,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "duration_s": round(time.perf_counter() - self.t0, 3),
            "run_dir": str(self.dir.resolve()),
            "config": self.cfg.to_dict(),
            "invocation": self.invocation,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "latent_sha256": self.latents,
            "metrics": self.metrics,
            "calibrated_bounds": CALIBRATED_BOUNDS,
            **self.extra,
        }

    def finish(self) -> Path:
        path = self.dir / MANIFEST_NAME
        path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=False) + "\n")
        return path


def strip_volatile(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}


def _truth(cond_o: Condition, cond_edit: Condition) -> EditTruth | None:
    if None in (cond_o.class_id, cond_o.layout, cond_edit.class_id, cond_edit.layout):
        return None
    return EditTruth(cond_o.class_id, cond_o.layout, cond_edit.class_id, cond_edit.layout)


def _metrics(x0, result, truth, mix) -> dict:
    if truth is None:
        return {"l1_full": l1(result.edited, x0)}
    rec = evaluate(x0, result, truth, mix)
    return {
        "l1_full": rec.l1_full,
        "l1_background": rec.l1_background,
        "edit_success": rec.edit_success,
        "original_retained": rec.original_retained,
        "mask_iou": rec.mask_iou,
    }


def _write_mask(run: Run, mask: EditMask, prefix: str = "mask") -> None:
    run.soft_mask("mask_soft", f"{prefix}_soft.pgm", mask.soft)
    run.bitmap("mask_binary", f"{prefix}_binary.pbm", mask.binary)
    sidecar = {
        **mask.sidecar(),
        "soft_image_range": [0.0, 1.0],
        "binary_encoding": "P4, 1 = edit region",
        "raw": mask.raw.tolist() if mask.raw is not None else None,
        "soft": mask.soft.tolist(),
    }
    run.json("mask_sidecar", f"{prefix}.json", sidecar)


# ---------------------------------------------------------------- commands


def execute_demo(run: Run) -> None:
    cfg, inv = run.cfg, run.invocation
    mix, sched = cfg.mixture(), cfg.schedule()
    cond_o, cond_edit = parse_condition(inv["orig"]), parse_condition(inv["target"])
    seed = inv["seed"]
    params = replace(cfg.edit, guidance_seed=seed)
    run.cfg = replace(cfg, edit=params)
    if cfg.output.sample_inputs:
        x0 = sample_scene(cond_o.class_id, cond_o.layout, mix, np.random.default_rng(seed))
    else:
        x0 = render_scene(cond_o.class_id, cond_o.layout, mix.canvas)
    result = run_edit(x0, cond_o, cond_edit, params, mix, sched)
    run.seeds = {"input": seed, "guidance": params.guidance_seed, "mask": list(params.seeds)}
    run.image("input", "input.ppm", x0)
    run.image("target", "target.ppm", render_scene(cond_edit.class_id, cond_edit.layout, mix.canvas))
    run.soft_mask("mask_soft", "mask_soft.pgm", result.mask.soft)
    run.bitmap("mask_binary", "mask_binary.pbm", result.mask.binary)
    run.image("guidance", "guidance.ppm", result.guidance)
    run.image("edited", "edited.ppm", result.edited)
    run.metrics = _metrics(x0, result, _truth(cond_o, cond_edit), mix)
    run.extra["guidance_skipped"] = result.guidance_skipped


def execute_edit(run: Run) -> None:
    cfg, inv = run.cfg, run.invocation
    mix, sched = cfg.mixture(), cfg.schedule()
    cond_o, cond_edit = parse_condition(inv["orig"]), parse_condition(inv["target"])
    input_path = Path(inv["input"])
    x0 = load_image(input_path, cfg)
    if inv.get("input_sha256") and file_digest(input_path) != inv["input_sha256"]:
        raise CommandError(f"input image {input_path} changed since the manifest was written")
    try:
        mix.conditional_weights(cond_o)
        mix.conditional_weights(cond_edit)
    except ValueError as exc:
        raise CommandError(f"invalid condition: {exc}") from exc
    mask = None
    if inv.get("mask"):
        bits = read_pbm(inv["mask"])
        if bits.shape != cfg.scene.shape[:2]:
            raise CommandError(f"mask {inv['mask']} has shape {bits.shape}, expected {cfg.scene.shape[:2]}")
        mask = EditMask.from_binary(bits)
    params = cfg.edit
    run.seeds = {"guidance": params.guidance_seed, "mask": list(params.seeds)}
    truth = _truth(cond_o, cond_edit)

    result = run_edit(x0, cond_o, cond_edit, params, mix, sched, mask=mask)
    run.image("input", "input.ppm", x0)
    run.image("edited", "edited.ppm", result.edited)
    run.array("edited_latent", "latents/edited.npy", result.edited)
    if result.guidance is not None:
        run.image("guidance", "guidance.ppm", result.guidance)
        run.array("guidance_latent", "latents/guidance.npy", result.guidance)
    _write_mask(run, result.mask)
    run.array("mask_latent", "latents/mask_soft.npy", result.mask.soft)
    run.metrics = {"ours": _metrics(x0, result, truth, mix)}
    run.extra["guidance_skipped"] = result.guidance_skipped

    results = [("ours", result)]
    if inv.get("baseline"):
        base = diffedit_baseline(x0, cond_o, cond_edit, params, mix, sched, mask=result.mask)
        run.image("baseline", "baseline.ppm", base.edited)
        run.array("baseline_latent", "latents/baseline.npy", base.edited)
        run.metrics["diffedit"] = _metrics(x0, base, truth, mix)
        results.append(("diffedit", base))

    if truth is not None:
        csv_path = run.path("metrics.csv")
        appender = CsvAppender(csv_path)
        for method, res in results:
            rec = evaluate(x0, res, truth, mix)
            appender.append(metrics_row(0, method, params, truth, rec, guidance_skipped=res.guidance_skipped))
        run.artifacts["metrics_csv"] = "metrics.csv"


def execute_mask(run: Run) -> None:
    cfg, inv = run.cfg, run.invocation
    mix, sched = cfg.mixture(), cfg.schedule()
    cond_o, cond_edit = parse_condition(inv["orig"]), parse_condition(inv["target"])
    x0 = load_image(inv["input"], cfg)
    try:
        mix.conditional_weights(cond_o)
        mix.conditional_weights(cond_edit)
    except ValueError as exc:
        raise CommandError(f"invalid condition: {exc}") from exc
    p = cfg.edit
    mask = estimate_mask(x0, cond_o, cond_edit, mix, sched,
                         t_E=p.t_E, seeds=p.seeds, tau=p.tau, sigma_blur=p.sigma_blur)
    run.seeds = {"mask": list(p.seeds)}
    _write_mask(run, mask)
    run.array("mask_latent", "latents/mask_soft.npy", mask.soft)
    run.metrics = {"area": int(mask.binary.sum())}


def _cell_params(base: EditParams, cell: dict) -> EditParams:
    return replace(base, lam=cell["lambda"], t_u=cell["t_u"], k=cell["k"], tau=cell["tau"])


def sweep_item(cfg_doc: dict, item_doc: dict, cells: list[dict], baseline: bool) -> list[dict]:
    """Run every grid cell on one corpus item; failures are caught per cell.

    Returns one record per (cell, method) with the CSV row and the edited latent.
    """
    cfg = RunConfig.from_dict(cfg_doc)
    mix, sched = cfg.mixture(), cfg.schedule()
    truth = EditTruth(item_doc["orig_class"], tuple(item_doc["orig_pos"]),
                      item_doc["target_class"], tuple(item_doc["target_pos"]))
    index = item_doc["index"]
    cond_o = Condition(truth.orig_class, truth.orig_pos)
    cond_edit = Condition(truth.target_class, truth.target_pos)
    if cfg.output.sample_inputs:
        x0 = sample_scene(truth.orig_class, truth.orig_pos, mix, np.random.default_rng(item_doc["image_seed"]))
    else:
        x0 = render_scene(truth.orig_class, truth.orig_pos, mix.canvas)
    out = [{"cell": None, "method": "input", "row": None, "edited": x0}]

    base_mask = None
    try:
        p = cfg.edit
        base_mask = estimate_mask(x0, cond_o, cond_edit, mix, sched,
                                  t_E=p.t_E, seeds=p.seeds, tau=cells[0]["tau"], sigma_blur=p.sigma_blur)
    except (MemoryError, ValueError, FloatingPointError) as exc:
        mask_error = f"error: {type(exc).__name__}: {exc}"
    baselines_done = set()
    for cell in cells:
        params = _cell_params(cfg.edit, cell)
        methods = [("ours", run_edit)]
        if baseline and cell["tau"] not in baselines_done:
            methods.append(("diffedit", diffedit_baseline))
            baselines_done.add(cell["tau"])
        for method, fn in methods:
            if base_mask is None:
                row = metrics_row(index, method, params, truth, None, status=mask_error)
                out.append({"cell": cell, "method": method, "row": row, "edited": None})
                continue
            try:
                mask = base_mask.with_tau(cell["tau"])
                res = fn(x0, cond_o, cond_edit, params.validate(sched.T), mix, sched, mask=mask)
                rec = evaluate(x0, res, truth, mix)
                row = metrics_row(index, method, params, truth, rec, guidance_skipped=res.guidance_skipped)
                edited = res.edited
            except (MemoryError, ValueError, FloatingPointError, ArithmeticError) as exc:
                row = metrics_row(index, method, params, truth, None, status=f"error: {type(exc).__name__}: {exc}")
                edited = None
            out.append({"cell": cell, "method": method, "row": row, "edited": edited})
    return out


def _grid_cells(grid: dict) -> list[dict]:
    return [dict(zip(SWEEP_AXES, combo)) for combo in itertools.product(*(grid[a] for a in SWEEP_AXES))]


def _summarise(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        key = (r["method"], r["lambda"], r["t_u"], r["k"], r["tau"])
        groups.setdefault(key, []).append(r)
    summary = []
    for (method, lam, t_u, k, tau), rs in groups.items():
        summary.append({
            "method": method, "lambda": lam, "t_u": t_u, "k": k, "tau": tau, "n": len(rs),
            "mean_l1_background": float(np.mean([r["l1_background"] for r in rs])),
            "edit_success_rate": float(np.mean([r["edit_success"] for r in rs])),
            "retention_rate": float(np.mean([r["original_retained"] for r in rs])),
            "mean_mask_iou": float(np.mean([r["mask_iou"] for r in rs])),
        })
    return summary


def execute_sweep(run: Run) -> None:
    cfg, inv = run.cfg, run.invocation
    grid, corpus_spec = inv["grid"], inv["corpus"]
    for axis in SWEEP_AXES:
        if not grid.get(axis):
            raise CommandError(f"sweep axis {axis!r} is empty")
    cells = _grid_cells(grid)
    for cell in cells:
        try:
            _cell_params(cfg.edit, cell).validate(cfg.T)
        except ValueError as exc:
            raise CommandError(f"invalid grid cell {cell}: {exc}") from exc
    mix = cfg.mixture()
    try:
        items = build_corpus(mix, corpus_spec["size"], corpus_spec["kind"], corpus_spec["seed"])
    except ValueError as exc:
        raise CommandError(f"invalid corpus: {exc}") from exc
    item_docs = [{
        "index": it.index, "image_seed": it.image_seed,
        "orig_class": it.truth.orig_class, "orig_pos": list(it.truth.orig_pos),
        "target_class": it.truth.target_class, "target_pos": list(it.truth.target_pos),
    } for it in items]
    run.seeds = {"corpus": corpus_spec["seed"], "images": [d["image_seed"] for d in item_docs],
                 "guidance": cfg.edit.guidance_seed, "mask": list(cfg.edit.seeds)}
    cfg_doc = cfg.to_dict()
    workers = max(1, int(inv.get("workers", 1)))
    baseline = bool(inv.get("baseline"))

    appender = CsvAppender(run.path("sweep.csv"))
    run.artifacts["csv"] = "sweep.csv"
    all_rows: list[dict] = []
    edited: dict[tuple, np.ndarray] = {}
    digest = hashlib.sha256()

    def consume(doc: dict, records: list[dict]) -> None:
        rows = [r["row"] for r in records if r["row"] is not None]
        appender.append(rows)
        all_rows.extend(rows)
        for r in records:
            key = (doc["index"], r["method"], tuple(r["cell"].values()) if r["cell"] else None)
            if r["edited"] is not None:
                edited[key] = r["edited"]
                digest.update(np.ascontiguousarray(r["edited"]).tobytes())

    def failed(doc: dict, exc: BaseException) -> list[dict]:
        truth = EditTruth(doc["orig_class"], tuple(doc["orig_pos"]), doc["target_class"], tuple(doc["target_pos"]))
        status = f"error: {type(exc).__name__}: {exc}"
        return [{"cell": c, "method": "ours", "edited": None,
                 "row": metrics_row(doc["index"], "ours", _cell_params(cfg.edit, c), truth, None, status=status)}
                for c in cells]

    if workers == 1:
        for doc in item_docs:
            try:
                consume(doc, sweep_item(cfg_doc, doc, cells, baseline))
            except MemoryError as exc:
                consume(doc, failed(doc, exc))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_item, cfg_doc, doc, cells, baseline) for doc in item_docs]
            # Results are consumed in submission order so the CSV is deterministic.
            for doc, fut in zip(item_docs, futures):
                try:
                    consume(doc, fut.result())
                except (MemoryError, BrokenProcessPool) as exc:
                    consume(doc, failed(doc, exc))

    for axis in SWEEP_AXES:
        values = grid[axis]
        if len(values) < 2:
            continue
        tiles = []
        for doc in item_docs[:SHEET_MAX_ROWS]:
            row = [edited[(doc["index"], "input", None)]]
            for v in values:
                cell = {a: (v if a == axis else grid[a][0]) for a in SWEEP_AXES}
                img = edited.get((doc["index"], "ours", tuple(cell.values())))
                row.append(img if img is not None else np.zeros(cfg.scene.shape))
            tiles.append(row)
        run.image(f"contact_{axis}", f"contact_{axis}.ppm", contact_sheet(tiles))
    run.latents["sweep_edited"] = digest.hexdigest()
    n_err = sum(r["status"] != "ok" for r in all_rows)
    run.metrics = {"rows": len(all_rows), "errors": n_err, "summary": _summarise(all_rows)}


EXECUTORS = {"demo": execute_demo, "edit": execute_edit, "mask": execute_mask, "sweep": execute_sweep}


def execute(command: str, cfg: RunConfig, invocation: dict, run_dir: Path) -> Path:
    run = Run(command, cfg, invocation, run_dir)
    EXECUTORS[command](run)
    return run.finish()


# ---------------------------------------------------------------- argparse


def _apply_edit_flags(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "preset", None):
        preset = PRESETS[args.preset]
        changes.update(lam=preset.lam, t_u=preset.t_u, k=preset.k, tau=preset.tau)
    for flag, key in (("lam", "lam"), ("gamma", "gamma"), ("t_u", "t_u"), ("k", "k"), ("t_e", "t_E"),
                      ("tau", "tau"), ("sigma_blur", "sigma_blur"), ("guidance_seed", "guidance_seed")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[key] = v
    if getattr(args, "seeds", None) is not None:
        changes["seeds"] = tuple(args.seeds)
    elif getattr(args, "n_seeds", None) is not None:
        changes["seeds"] = tuple(range(args.n_seeds))
    if not changes:
        return cfg
    cfg = replace(cfg, edit=replace(cfg.edit, **changes))
    try:
        cfg.edit.validate(cfg.T)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    p.add_argument("--out", help="run directory (default: a fresh directory under the output root)")


def _add_conditions(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="input image (.npy latent or 16-bit PGM/PPM)")
    p.add_argument("--orig", required=True, help="original condition, CLASS@ROW,COL")
    p.add_argument("--target", required=True, help="edit condition, CLASS@ROW,COL")


def _add_mask_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, help="binary mask threshold")
    p.add_argument("--n-seeds", type=int, help="number of mask noise seeds (0..n-1)")
    p.add_argument("--seeds", type=_int_list, help="explicit comma-separated mask seeds")
    p.add_argument("--sigma-blur", type=float, help="mask smoothing width in pixels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itoedit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"itoedit {__version__}")
    parser.add_argument("--output-root", help=f"parent of run directories (env {ENV_OUTPUT_ROOT})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config", help="write the default configuration document")
    p.add_argument("path", nargs="?", help="destination (stdout when omitted)")

    p = sub.add_parser("demo", help="render a scene and run one position edit")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0, help="input sample and guidance noise seed")
    p.add_argument("--orig", default="0@4,4")
    p.add_argument("--target", default="0@10,10")

    p = sub.add_parser("edit", help="edit one image")
    _add_common(p)
    _add_conditions(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--lambda", dest="lam", type=float, help="preservation weight in [0, 1]")
    p.add_argument("--gamma", type=float, help="Adam learning rate")
    p.add_argument("--t-u", type=int, help="number of optimised decode timesteps")
    p.add_argument("--k", type=int, help="gradient steps per timestep")
    p.add_argument("--t-e", type=int, help="encoding depth")
    p.add_argument("--guidance-seed", type=int)
    p.add_argument("--mask", help="binary PBM overriding mask estimation")
    p.add_argument("--baseline", action="store_true", help="also run the hard-blend baseline")
    _add_mask_flags(p)

    p = sub.add_parser("mask", help="estimate the edit mask only")
    _add_common(p)
    _add_conditions(p)
    p.add_argument("--t-e", type=int, help="encoding depth")
    _add_mask_flags(p)

    p = sub.add_parser("sweep", help="factorial parameter sweep over a generated corpus")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=_float_list, help="comma-separated lambda values")
    p.add_argument("--t-u", type=_int_list)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--tau", type=_float_list)
    p.add_argument("--corpus-size", type=int, default=10)
    p.add_argument("--corpus-kind", choices=EDIT_KINDS, default="any")
    p.add_argument("--corpus-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--baseline", action="store_true", help="add one baseline row per item and tau")

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="run directory for the replay")
    return parser


def _invocation(args, cfg: RunConfig) -> tuple[RunConfig, dict]:
    if args.command == "demo":
        for text in (args.orig, args.target):
            parse_condition(text)
        return cfg, {"seed": args.seed, "orig": args.orig, "target": args.target}
    if args.command in ("edit", "mask"):
        cfg = _apply_edit_flags(cfg, args)
        input_path = Path(args.input).resolve()
        if not input_path.is_file():
            raise CommandError(f"input image not found: {args.input}")
        inv = {"input": str(input_path), "input_sha256": file_digest(input_path),
               "orig": args.orig, "target": args.target}
        for text in (args.orig, args.target):
            parse_condition(text)
        if args.command == "edit":
            inv["baseline"] = args.baseline
            inv["mask"] = str(Path(args.mask).resolve()) if args.mask else None
        return cfg, inv
    if args.command == "sweep":
        e = cfg.edit
        grid = {
            "lambda": args.lam if args.lam is not None else [e.lam],
            "t_u": args.t_u if args.t_u is not None else [e.t_u],
            "k": args.k if args.k is not None else [e.k],
            "tau": args.tau if args.tau is not None else [e.tau],
        }
        corpus = {"size": args.corpus_size, "kind": args.corpus_kind, "seed": args.corpus_seed}
        return cfg, {"grid": grid, "corpus": corpus, "workers": args.workers, "baseline": args.baseline}
    raise CommandError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "config":
            cfg = RunConfig()
            if args.path:
                dump_config(cfg, args.path)
            else:
                print(json.dumps(cfg.to_dict(), indent=2))
            return 0
        if args.command == "rerun":
            mpath = Path(args.manifest)
            if not mpath.is_file():
                raise CommandError(f"manifest not found: {mpath}")
            doc = json.loads(mpath.read_text())
            cfg = RunConfig.from_dict(doc["config"])
            command, inv = doc["command"], doc["invocation"]
            run_dir = make_run_dir(command, output_root(args.output_root, cfg), args.out)
        else:
            cfg = load_config(args.config)
            cfg, inv = _invocation(args, cfg)
            command = args.command
            run_dir = make_run_dir(command, output_root(args.output_root, cfg), args.out)
        log.info("running %s into %s", command, run_dir)
        try:
            manifest = execute(command, cfg, inv, run_dir)
        except BaseException:
            if not any(run_dir.iterdir()):
                run_dir.rmdir()
            raise
        print(manifest)
        return 0
    except (ConfigError, CommandError, argparse.ArgumentTypeError) as exc:
        print(f"itoedit: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"itoedit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

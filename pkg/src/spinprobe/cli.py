"""Command-line driver.

Inputs are SI. At the output boundary angles are written in microradians,
lengths in angstrom, and CFI as the dimensionless mu_B^2 * CFI.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import estimate_mu_b, optimize_mask, pixelate, sample_poisson, snr_px
from .backaction import purity_loss
from .core import (ANGSTROM, DK_Z_200KEV, K_Z0_200KEV, A0_HYDROGEN, MEV, MICRORAD, PRESETS, ZEEMAN_ENERGY_MEV,
                   BeamParams, PhysConsts, SpinParams, overlap_conditions)
from .diffraction import AngularGrid, differential_map, p_diff_map
from .imaging import NO_MASK, MaskFunction, SpatialGrid, coherent_wavefunction, p_img_map
from .kernel import KernelContext
from .metrology import N_ELECTRONS_DEFAULT, cfi, defocus_region_sweep, snr_bound
from .output import Manifest, output_dir, write_csv, write_pgm
from .spin import (DEFAULT_RABI_RATIO, TABLE_DETUNINGS, BlochState, detuning_sweep, reference_state)

EXIT_CONFIG = 2
EXIT_INVALID = 3

MODES = ("diffraction", "image", "zernike", "coherent", "cfi-sweep", "mask-opt", "backaction", "bloch-sweep")

# Config file schema: section -> key -> converter.
CONFIG_KEYS = {
    "beam": {"preset": str, "dk_perp": float, "k_z0": float, "dk_z": float},
    "spin": {"a0": float, "zeeman_mev": float, "rabi_ratio": float},
    "grid": {"n": int, "theta_max": float, "x_max": float, "z_d": float, "k_max": float, "mask": str},
    "run": {"seed": int, "out": str, "threads": int, "complex_format": str, "detuning_sweep": str,
            "pixel": float, "n_electrons": float, "target": str, "q_cut": float},
    "sweep": {"zd_list": str, "xmax_list": str, "mode": str},
}

MODE_HELP = {
    "diffraction": "columns: theta_x_urad, theta_y_urad, p0, cx, cy (per sr) or theta_x_urad, theta_y_urad, dP",
    "image": "columns: x_A, y_A, p0, cx, cy (per m^2) or x_A, y_A, dP",
    "zernike": "as image, with a pi/2 phase on the unscattered amplitude",
    "coherent": "columns: x_A, y_A, re, im (or abs, arg with --complex-format absarg)",
    "cfi-sweep": "columns: z_d_A, x_max_A, mu_b2_cfi",
    "mask-opt": "pixels: ix, iy, n0, n1, snr_px, selected; trace: threshold, total_snr, n_pixels",
    "backaction": "JSON only: delta_p and quadrature diagnostics",
    "bloch-sweep": "columns: delta_over_omega0, s_x, s_y, s_z",
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    mode: str
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v


def load_config(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            conv = CONFIG_KEYS[section].get(key)
            if conv is None:
                raise ConfigError(f"{path}: unknown key '{key}' in section [{section}]")
            try:
                out[key] = conv(raw)
            except ValueError:
                raise ConfigError(f"{path}: bad value for '{key}' in [{section}]: {raw!r}") from None
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def build_context(cfg: RunConfig) -> KernelContext:
    preset = cfg.get("preset", "200keV-broad")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
    consts = PhysConsts()
    try:
        beam = BeamParams(k_z0=cfg.get("k_z0", K_Z0_200KEV), dk_perp=cfg.get("dk_perp", PRESETS[preset]),
                          dk_z=cfg.get("dk_z", DK_Z_200KEV))
        omega0 = cfg.get("zeeman_mev", ZEEMAN_ENERGY_MEV) * MEV / consts.hbar
        spin = SpinParams(a0=cfg.get("a0", A0_HYDROGEN), omega0=omega0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return KernelContext(beam=beam, spin=spin, consts=consts)


def resolved_params(cfg: RunConfig, ctx: KernelContext) -> dict:
    p = {k: v for k, v in sorted(cfg.values.items()) if v is not None and k not in ("out", "threads")}
    p.update({"mode": cfg.mode, "k_z0": ctx.k, "dk_perp": ctx.dk, "dk_z": ctx.beam.dk_z,
              "a0": ctx.spin.a0, "omega0": ctx.spin.omega0, "r_e": ctx.r_e})
    return p


def _limit_threads(n: int | None) -> None:
    if not n:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(n)


def _complex_columns(z: np.ndarray, form: str):
    if form == "absarg":
        return ("abs", "arg"), (np.abs(z), np.angle(z))
    return ("re", "im"), (z.real, z.imag)


def _grid_rows(x, y, *arrays):
    xx, yy = np.meshgrid(x, y, indexing="xy")
    cols = [xx.ravel(), yy.ravel()] + [np.asarray(a).ravel() for a in arrays]
    return zip(*cols)


def _map_outputs(cfg, man, out, pmap, scale, axis_name, ref):
    """Coefficient map, or one differential map per prepared state."""
    x, y = pmap.x / scale, pmap.y / scale
    if cfg.get("detuning_sweep") == "table-b1":
        states = detuning_sweep([d * ref[1] for d in TABLE_DETUNINGS], cfg.get("rabi_ratio", DEFAULT_RABI_RATIO)
                                * ref[1], ref[1])
        for d, s in zip(TABLE_DETUNINGS, states):
            dp = np.where(pmap.region, differential_map(pmap, s, ref[0]), 0.0)
            tag = f"{d:.3f}".replace(".", "p")
            path = write_csv(out / f"{cfg.mode}_diff_{tag}.csv", (f"{axis_name}_x", f"{axis_name}_y", "dP"),
                             _grid_rows(x, y, dp))
            man.add(path, "csv", detuning_over_omega0=d, bloch=list(s.s))
            pgm = out / f"{cfg.mode}_diff_{tag}.pgm"
            lim = float(np.max(np.abs(dp))) or 1.0
            window = write_pgm(pgm, dp, (-lim, lim))
            man.add(pgm, "pgm", window=list(window))
        return
    path = write_csv(out / f"{cfg.mode}_map.csv", (f"{axis_name}_x", f"{axis_name}_y", "p0", "cx", "cy"),
                     _grid_rows(x, y, np.where(pmap.region, pmap.p0, 0.0), np.where(pmap.region, pmap.cx, 0.0),
                                np.where(pmap.region, pmap.cy, 0.0)))
    man.add(path, "csv")
    pgm = out / f"{cfg.mode}_p0.pgm"
    man.add(pgm, "pgm", window=list(write_pgm(pgm, np.where(pmap.region, pmap.p0, 0.0))))


def _image_mask(cfg) -> MaskFunction:
    if cfg.get("mask", "hard_cutoff") == "none":
        return NO_MASK
    return MaskFunction("hard_cutoff", cfg.get("k_max", MaskFunction().k_max))


def _make_map(cfg, ctx, kind):
    n = cfg.get("n", 512)
    if kind == "diffraction":
        grid = AngularGrid.validity_region(ctx, n) if cfg.get("theta_max") is None else AngularGrid(
            cfg.get("theta_max"), n)
        grid.check(ctx)
        return p_diff_map(grid, ctx), MICRORAD, "theta_urad"
    zd = cfg.get("z_d", 800e-10 if kind == "image" else 0.0)
    grid = SpatialGrid(cfg.get("x_max", 10e-10), n, zd)
    return p_img_map(grid, ctx, _image_mask(cfg), zernike=(kind == "zernike")), ANGSTROM, "x_A"


def run(cfg: RunConfig) -> int:
    ctx = build_context(cfg)
    validity = overlap_conditions(ctx.beam, ctx.spin, ctx.consts)
    if not validity.ok and not cfg.get("allow_invalid", False):
        print(f"error: longitudinal-overlap conditions violated ({validity.details}); "
              "pass --allow-invalid to run anyway", file=sys.stderr)
        return EXIT_INVALID
    _limit_threads(cfg.get("threads"))
    out = output_dir(cfg.get("out"))
    man = Manifest(cfg.mode, __version__, resolved_params(cfg, ctx))
    man.results["overlap_conditions"] = {"ok": validity.ok, **validity.details}
    if not validity.ok:
        man.warnings.append("longitudinal-overlap conditions violated (overridden)")
    ref = (reference_state(ctx.spin.omega0, cfg.get("rabi_ratio", DEFAULT_RABI_RATIO)), ctx.spin.omega0)
    mode = cfg.mode

    if mode in ("diffraction", "image", "zernike"):
        pmap, scale, axis = _make_map(cfg, ctx, mode)
        _map_outputs(cfg, man, out, pmap, scale, axis, ref)
        rep = cfi(pmap, label=mode)
        man.results.update({"mu_b2_cfi": rep.mu_b2_cfi, "negative_pixels": pmap.negative_pixels})
        if pmap.negative_pixels:
            man.warnings.append(f"{pmap.negative_pixels} pixels clipped at zero density")
    elif mode == "coherent":
        grid = SpatialGrid(cfg.get("x_max", 10e-10), cfg.get("n", 256), cfg.get("z_d", 0.0))
        psi, norm = coherent_wavefunction(grid, grid.z_d, ctx, _image_mask(cfg))
        names, cols = _complex_columns(psi, cfg.get("complex_format", "reim"))
        ax = grid.axis / ANGSTROM
        path = write_csv(out / "coherent.csv", ("x_A", "y_A") + names, _grid_rows(ax, ax, *cols))
        man.add(path, "csv")
        man.results["norm_constant"] = norm
    elif mode == "cfi-sweep":
        zds = _floats(cfg.get("zd_list", "0,400e-10,800e-10"))
        xms = _floats(cfg.get("xmax_list", "2.5e-10,5e-10,10e-10,20e-10"))
        table = defocus_region_sweep(ctx, zds, xms, cfg.get("sweep_mode", "image"), mask=_image_mask(cfg))
        rows = ((zd / ANGSTROM, xm / ANGSTROM, v) for zd, xm, v in table.rows())
        man.add(write_csv(out / "cfi_sweep.csv", ("z_d_A", "x_max_A", "mu_b2_cfi"), rows), "csv")
    elif mode == "mask-opt":
        target = cfg.get("target", "diffraction")
        if target not in ("diffraction", "image", "zernike"):
            raise ConfigError(f"unknown mask-opt target {target!r}")
        pmap, scale, _ = _make_map(cfg, ctx, target)
        step = float(pmap.x[1] - pmap.x[0])
        pixel = cfg.get("pixel", 16 * step)
        n_e = cfg.get("n_electrons", N_ELECTRONS_DEFAULT)
        try:
            img = pixelate(pmap, BlochState((0.0, 1.0, 0.0)), ref[0], n_e, pixel)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        sel = optimize_mask(img)
        s = snr_px(img)
        m = img.n0.shape[0]
        rows = ((i, j, img.n0[j, i], img.n1[j, i], s[j, i], int(sel.selected[j, i]))
                for j in range(m) for i in range(m))
        man.add(write_csv(out / "mask_pixels.csv", ("ix", "iy", "n0", "n1", "snr_px", "selected"), rows), "csv")
        man.add(write_csv(out / "mask_trace.csv", ("threshold", "total_snr", "n_pixels"), sel.trace), "csv")
        rng = np.random.default_rng(cfg.get("seed", 0))
        driven = sample_poisson(img, rng, driven=True)
        reference = sample_poisson(img, rng, driven=False)
        est = estimate_mu_b(driven, img, sel, reference=reference)
        man.results.update({"target": target, "pixel_size": pixel, "pixel_size_display": pixel / scale,
                            "threshold": sel.threshold, "total_snr": sel.total_snr,
                            "cramer_rao_snr": snr_bound(cfi(pmap), n_e).snr,
                            "tie_break": "larger mask", "estimate_ratio": est.ratio, "estimate_std": est.std,
                            "first_order_violations": img.first_order_violations})
    elif mode == "backaction":
        rep = purity_loss(ctx, q_cut=cfg.get("q_cut", 16.0))
        man.results.update({"delta_p": rep.delta_p, "diagnostics": rep.diagnostics})
        if not rep.converged:
            man.warnings.append("backaction quadrature not converged")
    elif mode == "bloch-sweep":
        ratio = cfg.get("rabi_ratio", DEFAULT_RABI_RATIO)
        states = detuning_sweep([d * ctx.spin.omega0 for d in TABLE_DETUNINGS], ratio * ctx.spin.omega0,
                                ctx.spin.omega0)
        rows = [(d,) + s.s for d, s in zip(TABLE_DETUNINGS, states)]
        rows.append((10.0,) + ref[0].s)
        man.add(write_csv(out / "bloch_sweep.csv", ("delta_over_omega0", "s_x", "s_y", "s_z"), rows), "csv")
    man.write(out)
    print(json.dumps(man.results, sort_keys=True, default=float))
    return 0


def run_cfi(cfg: RunConfig) -> int:
    ctx = build_context(cfg)
    kind = cfg.get("cfi_mode", "diffraction")
    pmap, _, _ = _make_map(cfg, ctx, kind)
    rep = cfi(pmap, label=kind)
    bound = snr_bound(rep, cfg.get("n_electrons", N_ELECTRONS_DEFAULT))
    result = {"mode": kind, "mu_b2_cfi": rep.mu_b2_cfi, "snr_bound": bound.snr,
              "snr_rate_per_sqrt_s": bound.rate_per_sqrt_s, "n_pixels": rep.n_pixels,
              "negative_pixels": pmap.negative_pixels}
    if cfg.get("out") or os.environ.get("SPINPROBE_OUTPUT_DIR"):
        man = Manifest("cfi", __version__, resolved_params(cfg, ctx), results=result)
        man.write(output_dir(cfg.get("out")))
    print(json.dumps(result, sort_keys=True))
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [beam] [spin] [grid] [run] [sweep] sections")
    p.add_argument("--preset", choices=sorted(PRESETS), help="beam preset (default 200keV-broad)")
    p.add_argument("--dk-perp", type=float, help="transverse momentum spread, 1/m")
    p.add_argument("--n", type=int, help="samples per grid side")
    p.add_argument("--zd", type=float, dest="z_d", help="defocus, m")
    p.add_argument("--xmax", type=float, dest="x_max", help="half-width of the image region, m")
    p.add_argument("--theta-max", type=float, help="half-width of the angular grid, rad")
    p.add_argument("--mask", choices=("hard_cutoff", "none"), help="objective aperture")
    p.add_argument("--k-max", type=float, help="aperture cutoff, 1/m")
    p.add_argument("--out", help="output directory (default $SPINPROBE_OUTPUT_DIR or ./spinprobe_out)")
    p.add_argument("--seed", type=int, help="random seed for Poisson draws")
    p.add_argument("--threads", type=int, help="cap on BLAS threads")
    p.add_argument("--n-electrons", type=float, help="electron count, default 1e10")
    p.add_argument("--allow-invalid", action="store_true", default=None,
                   help="run even when the longitudinal-overlap conditions fail")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinprobe", description="Single-spin detection by electron scattering")
    parser.add_argument("--version", action="version", version=f"spinprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="produce maps, sweeps and reports",
                         formatter_class=argparse.RawDescriptionHelpFormatter,
                         epilog="CSV columns per mode:\n" + "\n".join(f"  {k}: {v}" for k, v in MODE_HELP.items()))
    sim.add_argument("mode", choices=MODES)
    _common(sim)
    sim.add_argument("--detuning-sweep", choices=("table-b1",),
                     help="write one differential map per representative detuning")
    sim.add_argument("--complex-format", choices=("reim", "absarg"))
    sim.add_argument("--target", choices=("diffraction", "image", "zernike"), help="map used by mask-opt")
    sim.add_argument("--pixel", type=float, help="detector pixel side (rad or m) for mask-opt")
    sim.add_argument("--q-cut", type=float, help="backaction momentum cutoff in units of 2 dk_perp")
    sim.add_argument("--zd-list", help="comma-separated defocus values for cfi-sweep, m")
    sim.add_argument("--xmax-list", help="comma-separated region half-widths for cfi-sweep, m")
    sim.add_argument("--sweep-mode", choices=("image", "zernike"))
    c = sub.add_parser("cfi", help="print mu_B^2 CFI and the SNR bound as JSON")
    c.add_argument("--mode", dest="cfi_mode", choices=("diffraction", "image", "zernike"), default="diffraction")
    _common(c)
    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(args.config) if getattr(args, "config", None) else {}
    if "mode" in values:
        values["sweep_mode"] = values.pop("mode")
    if "preset" in values and values["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {values['preset']!r}")
    for key, val in vars(args).items():
        if key in ("command", "mode", "config") or val is None:
            continue
        values[key] = val
    if "dk_perp" in values and args.preset and args.dk_perp is None:
        # An explicit preset flag overrides a config-file dk_perp.
        values.pop("dk_perp")
    mode = getattr(args, "mode", None) or "cfi"
    return RunConfig(mode=mode, values=values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _to_config(args)
        return run(cfg) if args.command == "simulate" else run_cfi(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())

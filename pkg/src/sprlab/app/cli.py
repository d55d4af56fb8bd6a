# src/sprlab/app/cli.py
from __future__ import annotations
import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from sprlab import __version__
from sprlab.core.config import ExperimentConfig, cli_overrides, load_config
from sprlab.core.errors import InsufficientData, SprLabError, exit_code_for
from sprlab.core.log import configure_logging, log, warn
from sprlab.core.paths import ensure_out_dir, orbits_dir
from sprlab.domain.catalog import build_group
from sprlab.domain.group import (
    GroupPresentation, closed_geodesics, collision_audit, enumerate_orbit,
    estimate_exponent, format_word, measure_arc, patterson_atoms,
)
from sprlab.domain.hyperbolic import HPoint, UnitTangent, shadow_arc, visual_angle
from sprlab.domain.infinity import (
    CompactWindow, excursion_mass, spr_verdict, tail_records,
)
from sprlab.domain.metric import Bump, BumpField, ConformalMetric, metric_norm
from sprlab.domain.records import OrbitPoint, SprReport
from sprlab.domain.stretch import (
    DerivativeSettings, asymptotic_stretch, current_average_I, derivative_experiment,
    instantaneous_stretch, morse_psi, perturbed_lengths, thurston_ratio,
)
from sprlab.infrastructure import reports
from sprlab.infrastructure.manifest import RunManifest, write_error
from sprlab.infrastructure.orbit_cache import OrbitCache


# ──────────────────────────────────────────────────────────────────────────────
# Ayudantes
# ──────────────────────────────────────────────────────────────────────────────

def _load(args) -> ExperimentConfig:
    ov = cli_overrides(threads=args.threads, budget=args.budget, out=args.out,
                       cache=args.cache, seed=args.seed)
    cfg = load_config(args.config, ov)
    configure_logging(cfg.run.log_level, json=cfg.run.log_json)
    return cfg


def _orbit_key(cfg: ExperimentConfig, R_max: float) -> str:
    payload = {"group": cfg.group.model_dump(mode="json"), "R_max": R_max,
               "slack": cfg.enumeration.slack, "version": __version__}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _orbit(cfg: ExperimentConfig, group: GroupPresentation,
           manifest: RunManifest) -> List[OrbitPoint]:
    """Órbita hasta R_max, reutilizando la caché si la clave coincide."""
    R = cfg.enumeration.R_max
    key = _orbit_key(cfg, R)
    path = Path(cfg.run.cache) if cfg.run.cache else orbits_dir() / f"{key[:24]}.orbit"
    cache = OrbitCache(path)
    if cache.exists and cache.read_key() == key:
        _, orbit = cache.load()
        manifest.cache_hits.append(path.name)
        return orbit
    if cache.exists:
        log("clave de caché distinta, se reenumera:", path, stage="cache")
    with manifest.stage("enumerate"):
        orbit = enumerate_orbit(group, R, word_cap=cfg.enumeration.word_cap,
                                slack=cfg.enumeration.slack, threads=cfg.run.threads)
    cache.store(orbit, key)
    return orbit


def _phi(cfg: ExperimentConfig, group: GroupPresentation) -> BumpField:
    sec = cfg.perturbation
    bumps = [Bump(HPoint(b.cx, b.cy), b.radius, b.amplitude) for b in sec.bumps]
    return BumpField(bumps, group=group, periodize=sec.periodize,
                     cover_radius=sec.cover_radius)


def _metric(cfg: ExperimentConfig, phi: BumpField, eps: float) -> ConformalMetric:
    tol = cfg.tolerances
    return ConformalMetric(phi, eps, step=tol.certificate_step,
                           safety=tol.certificate_safety, rtol=tol.ode_rtol,
                           atol=tol.ode_atol)


def _largest_eps(cfg: ExperimentConfig) -> float:
    pos = [e for e in cfg.perturbation.eps_ladder if e > 0.0]
    return max(pos) if pos else 0.0


def _ladder(cfg: ExperimentConfig, group: GroupPresentation) -> List[CompactWindow]:
    return [CompactWindow.for_group(group, r) for r in cfg.infinity.ladder]


def _spr(cfg: ExperimentConfig, group: GroupPresentation,
         orbit: List[OrbitPoint]) -> SprReport:
    inf = cfg.infinity
    return spr_verdict(group, orbit, _ladder(cfg, group), cfg.exponent.window,
                       floor=inf.verdict_floor, grid_step=cfg.exponent.grid_step,
                       min_points=cfg.exponent.min_points, step=inf.step,
                       min_excursions=inf.min_excursions, threads=cfg.run.threads)


def _out(cfg: ExperimentConfig) -> Path:
    return ensure_out_dir(cfg.run.out)


# ──────────────────────────────────────────────────────────────────────────────
# Comandos
# ──────────────────────────────────────────────────────────────────────────────

def cmd_group_validate(args) -> int:
    cfg = _load(args)
    m = RunManifest("group-validate", cfg)
    with m.stage("validate"):
        group = build_group(cfg.group)
    out = _out(cfg)
    o = group.basepoint
    rows = []
    for x in group.letters():
        g = group.letter_map(x)
        arc = group.domain(x)
        label = format_word((x,), group.labels)
        rows.append([label, g.kind(), abs(g.trace), g.translation_length(),
                     group.displacement(x), visual_angle(o, arc.start),
                     visual_angle(o, arc.end), arc.visual_width(o)])
        print(f"[group] {label}: {g.kind()}, desplazamiento {group.displacement(x):.6f}")
    print(f"[group] {group.kind}, rango {group.rank}, ping-pong ok")
    m.add_output(reports.write_csv(
        out / "group.csv",
        ["letter", "kind", "abs_trace", "translation_length", "displacement",
         "domain_start", "domain_end", "domain_width"], rows))
    m.write(out)
    return 0


def cmd_exponent(args) -> int:
    cfg = _load(args)
    m = RunManifest("exponent", cfg)
    group = build_group(cfg.group)
    orbit = _orbit(cfg, group, m)
    ex = cfg.exponent
    with m.stage("exponent"):
        est = estimate_exponent(orbit, ex.window, grid_step=ex.grid_step,
                                min_points=ex.min_points)
        hits = collision_audit(group, orbit, cfg.tolerances.collision)
    if hits:
        warn(f"{len(hits)} colisiones de matrices en la órbita", stage="exponent")
    out = _out(cfg)
    dists = np.array([p.dist for p in orbit])
    m.add_output(reports.write_csv(out / "exponent.csv", ["R", "N", "log_N"],
                                   reports.exponent_rows(dists, est, ex.grid_step)))
    summary = reports.exponent_summary(est)
    summary["collisions"] = len(hits)
    m.add_output(reports.write_record(out / "exponent_summary.csv", summary))
    print(f"[exponent] delta_hat = {est.value:.6f} (residual {est.residual:.3g})")
    m.write(out)
    return 0


def cmd_spr(args) -> int:
    cfg = _load(args)
    m = RunManifest("spr", cfg)
    group = build_group(cfg.group)
    orbit = _orbit(cfg, group, m)
    with m.stage("spr"):
        report = _spr(cfg, group, orbit)
    out = _out(cfg)
    m.add_output(reports.write_csv(out / "spr.csv", ["R_W", "delta_out", "residual", "count"],
                                   reports.spr_rows(report)))
    m.add_output(reports.write_record(out / "spr_verdict.csv", reports.spr_summary(report)))

    inf = cfg.infinity
    if inf.mass_T and report.delta_full.value > 0.0:
        with m.stage("mass"):
            s = report.delta_full.value + cfg.exponent.margin
            atoms = patterson_atoms(group, orbit, s, delta_hat=report.delta_full.value,
                                    margin=cfg.exponent.margin)
            window = _ladder(cfg, group)[0]
            R_far = cfg.exponent.window[0]
            recs = tail_records(group, atoms, window, R_far=R_far, step=inf.step,
                                threads=cfg.run.threads)
            rows = [[T, excursion_mass(group, atoms, window, T, R_far=R_far, records=recs)]
                    for T in inf.mass_T]
        m.add_output(reports.write_csv(out / "excursion_mass.csv", ["T", "mass"], rows))
    print(f"[spr] {report.verdict}: delta = {report.delta_full.value:.4f}, "
          f"delta_inf = {report.delta_infinity:.4f}, gap = {report.gap:.4f}")
    m.write(out)
    return 0


def cmd_stretch(args) -> int:
    cfg = _load(args)
    m = RunManifest("stretch", cfg)
    group = build_group(cfg.group)
    eps = _largest_eps(cfg)
    g2 = _metric(cfg, _phi(cfg, group), eps)
    st = cfg.stretch
    rng = np.random.default_rng(cfg.run.seed)
    o = group.basepoint
    samples, norms = [], []
    with m.stage("stretch"):
        for _ in range(st.samples):
            base = HPoint(o.x + o.y * float(rng.uniform(-1.0, 1.0)),
                          o.y * float(np.exp(rng.uniform(-1.0, 1.0))))
            v = UnitTangent(base, float(rng.uniform(0.0, 2.0 * math.pi)))
            samples.append(instantaneous_stretch(v, g2, st.fd_step, st.horizon))
            norms.append(metric_norm(g2, v))
    with m.stage("morse"):
        v0 = samples[0].v
        asym = asymptotic_stretch(v0, g2, st.T)
        psi = morse_psi(v0, g2)
    out = _out(cfg)
    m.add_output(reports.write_csv(out / "stretch.csv", reports.STRETCH_HEADER,
                                   reports.stretch_rows(samples, norms)))
    excess = max(s.value - n for s, n in zip(samples, norms))
    m.add_output(reports.write_record(out / "stretch_summary.csv", {
        "metric": g2.metric_id, "pinching": g2.pinching, "a_eps": g2.a_eps,
        "max_excess": excess, "asymptotic_stretch": asym, "T": st.T,
        "morse_displacement": psi.displacement, "morse_bound": psi.bound,
    }))
    print(f"[stretch] {g2.metric_id}: max(E - |v|) = {excess:.3g}, "
          f"d(v, Psi v) = {psi.displacement:.4f} <= {psi.bound:.4f}")
    m.write(out)
    return 0


def cmd_lengths(args) -> int:
    cfg = _load(args)
    m = RunManifest("lengths", cfg)
    group = build_group(cfg.group)
    b = cfg.bands
    L_max = b.L_max if b.L_max is not None else b.L
    with m.stage("closed"):
        geos = closed_geodesics(group, L_max, invert_dedup=b.invert_dedup,
                                word_cap=cfg.enumeration.word_cap, threads=cfg.run.threads)
    phi = _phi(cfg, group)
    ids: List[str] = []
    summary_rows = []
    band = (b.L - b.width, b.L)
    if not phi.is_zero:
        for e in sorted(cfg.perturbation.eps_ladder):
            metric = _metric(cfg, phi, e)
            with m.stage(f"relax{e:+.3f}"):
                geos = perturbed_lengths(geos, metric, group,
                                         spacing=cfg.tolerances.relax_spacing,
                                         threads=cfg.run.threads)
            mid = metric.metric_id
            ids.append(mid)
            try:
                fwd = current_average_I(geos, "g0", mid, band, min_classes=b.min_classes)
                bwd = current_average_I(geos, mid, "g0", band, min_classes=b.min_classes)
            except InsufficientData as err:
                warn(f"{mid}: {err}", stage="lengths")
                continue
            summary_rows.append([mid, e, fwd.value, bwd.value, fwd.value * bwd.value,
                                 fwd.spread, fwd.geodesic_count,
                                 thurston_ratio(geos, "g0", mid)])
    out = _out(cfg)
    m.add_output(reports.write_csv(out / "lengths.csv", ["rep", "length0"] + ids,
                                   reports.length_rows(geos, ids, group.labels)))
    if summary_rows:
        m.add_output(reports.write_csv(
            out / "lengths_summary.csv",
            ["metric", "eps", "I_forward", "I_backward", "reciprocity", "spread",
             "classes", "thurston"], summary_rows))
    print(f"[lengths] {len(geos)} clases primitivas con l0 <= {L_max:g}")
    m.write(out)
    return 0


def _shadow_pool(orbit: Sequence[OrbitPoint], lo: float, hi: float, want: int,
                 floor: float) -> List[OrbitPoint]:
    """Puntos con lo ≤ d ≤ hi; baja lo hasta `floor` si no alcanzan `want`."""
    pool = [p for p in orbit if lo <= p.dist <= hi]
    while len(pool) < want and lo > floor:
        lo = max(floor, lo - 0.5)
        pool = [p for p in orbit if lo <= p.dist <= hi]
    if lo < hi and len(pool) < want:
        warn(f"sólo {len(pool)} puntos para sombras en [{lo:g}, {hi:g}]", stage="shadows")
    return pool


def cmd_shadows(args) -> int:
    cfg = _load(args)
    m = RunManifest("shadows", cfg)
    group = build_group(cfg.group)
    orbit = _orbit(cfg, group, m)
    ex, inf = cfg.exponent, cfg.infinity
    with m.stage("shadows"):
        est = estimate_exponent(orbit, ex.window, grid_step=ex.grid_step,
                                min_points=ex.min_points, secondary=False)
        atoms = patterson_atoms(group, orbit, est.value + ex.margin, delta_hat=est.value,
                                margin=ex.margin)
        R_max = cfg.enumeration.R_max
        R_far = R_max - 4.0
        pool = _shadow_pool(orbit, inf.shadow_min_dist, R_far, inf.shadow_samples,
                            floor=inf.shadow_radius + 1.0)
        if not pool:
            raise InsufficientData("no hay puntos de órbita en el rango de sombras",
                                   lo=inf.shadow_radius + 1.0, hi=R_far)
        rng = np.random.default_rng(cfg.run.seed)
        k = min(inf.shadow_samples, len(pool))
        picks = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
        rows = []
        for i in picks:
            p = pool[i]
            arc = shadow_arc(group.basepoint, p.image, inf.shadow_radius)
            mass = measure_arc(atoms, arc, R_far)
            rows.append([format_word(p.word, group.labels), p.dist, mass,
                         mass / math.exp(-est.value * p.dist)])
    ratios = np.array([r[3] for r in rows if r[3] > 0.0])
    c = float(np.exp(np.max(np.abs(np.log(ratios) - np.log(ratios).mean())))) if ratios.size \
        else float("inf")
    out = _out(cfg)
    m.add_output(reports.write_csv(out / "shadows.csv", ["word", "dist", "measure", "ratio"],
                                   rows))
    m.add_output(reports.write_record(out / "shadows_summary.csv", {
        "delta_hat": est.value, "s": atoms.s, "radius": inf.shadow_radius,
        "samples": len(rows), "empty": len(rows) - int(ratios.size), "band_constant": c,
    }))
    print(f"[shadows] {len(rows)} sombras, constante de banda c = {c:.3f}")
    m.write(out)
    return 0


def cmd_derivative(args) -> int:
    cfg = _load(args)
    m = RunManifest("derivative", cfg)
    group = build_group(cfg.group)
    phi = _phi(cfg, group)
    spr: Optional[SprReport] = None
    if not args.skip_spr:
        orbit = _orbit(cfg, group, m)
        try:
            with m.stage("spr"):
                spr = _spr(cfg, group, orbit)
        except InsufficientData as err:
            warn(f"veredicto SPR no disponible: {err}", stage="derivative")
    b, tol = cfg.bands, cfg.tolerances
    settings = DerivativeSettings(
        L=b.L, width=b.width, spectrum_window=b.spectrum_window, smooth=b.smooth,
        min_classes=b.min_classes, spacing=tol.relax_spacing,
        orbit_check=cfg.perturbation.orbit_check,
        certificate_step=tol.certificate_step, certificate_safety=tol.certificate_safety,
        threads=cfg.run.threads)
    with m.stage("derivative"):
        exp = derivative_experiment(group, phi, cfg.perturbation.eps_ladder, settings,
                                    spr=spr)
    out = _out(cfg)
    m.add_output(reports.write_csv(out / "derivative.csv", reports.DERIVATIVE_HEADER,
                                   reports.derivative_rows(exp)))
    m.add_output(reports.write_csv(
        out / "derivative_bounds.csv",
        ["eps", "h_estimate", "katok_lower", "katok_upper", "katok_ok", "thurston", "h_orbit"],
        reports.derivative_bounds_rows(exp)))
    m.add_output(reports.write_record(out / "derivative_summary.csv",
                                      reports.derivative_summary(exp)))
    print(f"[derivative] fd_slope = {exp.fd_slope:.5f}, predicted = "
          f"{exp.predicted_slope:.5f}, relative_error = {exp.relative_error:.4f}")
    m.write(out)
    return 0


# ──────────────────────────────────────────────────────────────────────────────
# CLI
# ──────────────────────────────────────────────────────────────────────────────

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="Archivo TOML del experimento")
    p.add_argument("--threads", type=int, default=None, help="Hilos de trabajo")
    p.add_argument("--budget", type=int, default=None,
                   help="Tope de palabras de la enumeración")
    p.add_argument("--out", default=None, help="Directorio de salida")
    p.add_argument("--cache", default=None, help="Archivo de caché de órbita")
    p.add_argument("--seed", type=int, default=None, help="Semilla del muestreo")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spr-lab", description="Experimentos de entropía en el infinito y SPR")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    commands = [
        ("group-validate", cmd_group_validate, "Valida el ping-pong y lista desplazamientos"),
        ("exponent", cmd_exponent, "Exponente crítico por conteo orbital"),
        ("spr", cmd_spr, "Entropía fuera de W, en el infinito y veredicto SPR"),
        ("stretch", cmd_stretch, "Estiramiento geodésico y correspondencia de Morse"),
        ("lengths", cmd_lengths, "Espectro de longitudes y promedios I"),
        ("shadows", cmd_shadows, "Lema de la sombra con átomos de Patterson"),
        ("derivative", cmd_derivative, "Derivada de la entropía respecto de ε"),
    ]
    for name, func, help_text in commands:
        sp = sub.add_parser(name, help=help_text)
        _common(sp)
        sp.set_defaults(func=func)
        if name == "derivative":
            sp.add_argument("--skip-spr", action="store_true",
                            help="No calcular el veredicto SPR previo")
    return p


def _error_dir(args) -> Optional[Path]:
    if getattr(args, "out", None):
        return Path(args.out)
    try:
        return Path(load_config(args.config).run.out)
    except SprLabError:
        return None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SprLabError as e:
        record = e.record()
    except Exception as e:  # fallo inesperado de un solver externo
        record = {"error": type(e).__name__, "message": str(e),
                  "exit": exit_code_for(e), "details": {}}
    print(json.dumps(record, sort_keys=True, ensure_ascii=False), file=sys.stderr)
    out = _error_dir(args)
    if out is not None:
        try:
            write_error(out, record)
        except OSError:
            pass
    return int(record["exit"])


if __name__ == "__main__":
    raise SystemExit(main())

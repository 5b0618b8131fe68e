"""Config-driven experiment runs with deterministic, checksummed output.

Each run writes ``<out>/<name>/<config-hash>/`` containing ``config.json``,
``data/*.csv``, ``figures/*.png``, ``report.json`` and a ``MANIFEST`` of
sha256 checksums.  Data files start with one ``#`` header line carrying the
tool version and config hash; nothing in them depends on wall-clock time.
"""

from __future__ import annotations

import hashlib
import json
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import plotting
from .config import ExperimentConfig, sweep_rows
from .operators import Op, evolve, verify_assumption
from .scattering import (convergence_study, duality_defect, intertwining_check, apply_waveop,
                         apply_waveop_adjoint)
from .spectral import (KGrid, band_decompose, commutator_identity_check, spectrum_arcs, velocity_distribution,
                       velocity_fd_gap)
from .state import LatticeState, norm
from .weaklimit import predicted_limit_law, weak_limit_comparison

__all__ = ["RunResult", "run", "execute", "run_sweep", "select_T_wave", "finite_identities", "V_GRID"]

# plot-ready velocity grid for CDF exports
V_GRID = np.linspace(-1.0, 1.0, 2001)


@dataclass
class RunResult:
    kind: str
    passed: bool
    run_dir: Path
    report: dict = field(repr=False)


class _Writer:
    """Writes files under a run directory and remembers them for the manifest."""

    def __init__(self, run_dir: Path, config_hash: str):
        self.dir = Path(run_dir)
        self.hash = config_hash
        self.header = f"# lrwalk {__version__} config={config_hash}"
        (self.dir / "data").mkdir(parents=True, exist_ok=True)
        (self.dir / "figures").mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, columns, rows) -> Path:
        path = self.dir / "data" / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.header + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.dir / "data" / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.header + "\n")
            fh.write(body)
        return path

    def figure(self, name: str) -> Path:
        return self.dir / "figures" / name

    def finish(self, cfg: ExperimentConfig, report: dict) -> None:
        with open(self.dir / "config.json", "w", encoding="utf-8") as fh:
            fh.write(cfg.to_json())
        with open(self.dir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        lines = []
        for path in sorted(p for p in self.dir.rglob("*") if p.is_file() and p.name != "MANIFEST"):
            rel = path.relative_to(self.dir).as_posix()
            if rel.startswith("rows/"):
                continue
            lines.append(f"{_sha256(path)}  {rel}")
        with open(self.dir / "MANIFEST", "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


# ---------------------------------------------------------------- kinds


def _run_evolve(cfg: ExperimentConfig, w: _Writer) -> dict:
    model, psi0 = cfg.model(), cfg.initial_state()
    T = int(cfg.params["T"])
    tol = cfg.tolerances["norm"]
    psi = evolve(model, psi0, T, Op.U)
    n = norm(psi)
    expected = psi0.width + 2 * T
    probs = psi.probabilities()
    w.text("final-state.csv", psi.to_csv())
    w.csv("position-distribution.csv", ("x", "prob"), zip(psi.positions, probs))
    plotting.plot_position_distribution(psi.positions, probs, T, w.figure("position-distribution.png"))
    metrics = {"norm": n, "norm_defect": abs(n - 1.0), "width_initial": psi0.width,
               "width_final": psi.width, "width_expected": expected}
    passed = metrics["norm_defect"] <= tol and psi.width == expected
    return {"T": T, "metrics": metrics, "pass": passed}


def _eigen_gap(band) -> float:
    """Max over nodes of the matched gap between closed-form and numerical eigenvalues."""
    num = np.linalg.eigvals(band.symbol())
    lam = band.lam
    same = np.maximum(np.abs(num[:, 0] - lam[:, 0]), np.abs(num[:, 1] - lam[:, 1]))
    swap = np.maximum(np.abs(num[:, 0] - lam[:, 1]), np.abs(num[:, 1] - lam[:, 0]))
    return float(np.max(np.minimum(same, swap)))


def _run_spectrum(cfg: ExperimentConfig, w: _Writer) -> dict:
    model, psi0 = cfg.model(), cfg.initial_state()
    p, tol = cfg.params, cfg.tolerances
    coin = model.coin
    band = band_decompose(coin, KGrid(int(p["kgrid"])))
    arcs = spectrum_arcs(coin)
    eig_gap = _eigen_gap(band)
    arc_dist = float(np.max(arcs.distance(band.lam)))
    fd_gap = velocity_fd_gap(band)
    nc, deg = int(p["commutator_kgrid"]), int(p["commutator_degree"])
    comm = [commutator_identity_check(band_decompose(coin, KGrid(n)), deg) for n in (nc, 2 * nc)]
    r1, r2 = comm[0].max_residual, comm[1].max_residual
    cdf = velocity_distribution(band, psi0)

    w.csv("band-structure.csv", ("k", "re_lambda1", "im_lambda1", "v1", "re_lambda2", "im_lambda2", "v2"),
          band.to_rows())
    w.csv("spectrum-arcs.csv", ("arc", "start", "stop"),
          [(i + 1, s, e) for i, (s, e) in enumerate(arcs.arcs)])
    w.csv("spectrum-thresholds.csv", ("angle",), [(t,) for t in arcs.thresholds])
    w.csv("velocity-cdf.csv", ("v", "cdf"), zip(V_GRID, cdf(V_GRID)))
    w.csv("commutator-identity.csv", ("n", "degree", "max_residual"),
          [(c.n, c.degree, c.max_residual) for c in comm])
    plotting.plot_bands(band.grid.nodes, band.lam, band.velocity, w.figure("bands.png"))
    plotting.plot_cdfs(V_GRID, {"velocity law": cdf(V_GRID)}, w.figure("velocity-cdf.png"))

    metrics = {"eigen_gap": eig_gap, "arc_distance": arc_dist, "velocity_fd_gap": fd_gap,
               "max_abs_velocity": float(np.max(np.abs(band.velocity))),
               "commutator_residual": r1, "commutator_residual_refined": r2,
               "arc_total_length": arcs.total_length}
    # refinement must not make the residual worse unless it is already below tolerance
    comm_ok = r1 <= tol["commutator"] and (r2 <= r1 or r2 <= tol["commutator"])
    passed = (eig_gap <= tol["eigen"] and arc_dist <= tol["arcs"]
              and fd_gap <= tol["velocity_fd"] and comm_ok)
    return {"metrics": metrics, "arcs": arcs.to_dict(), "pass": passed}


def _run_assumption(cfg: ExperimentConfig, w: _Writer) -> dict:
    model = cfg.model()
    radius = int(cfg.params["radius"])
    rep = verify_assumption(model.profile, radius, model.coin)
    w.csv("assumption-residuals.csv", ("x", "residual_fwd", "residual_bwd", "bound", "coin_gap"),
          zip(rep.xs, rep.residual_fwd, rep.residual_bwd, rep.bound, rep.coin_gap))
    plotting.plot_assumption(rep.xs, rep.residual_fwd, rep.residual_bwd, rep.eps0,
                             w.figure("assumption-residuals.png"))
    summary = rep.summary()
    drift = abs(rep.kappa_min_doubled - rep.kappa_min) / rep.kappa_min if rep.kappa_min > 0 else 0.0
    passed = rep.passed and drift <= cfg.tolerances["kappa_drift"]
    metrics = {"kappa_min": rep.kappa_min, "kappa_min_doubled": rep.kappa_min_doubled, "kappa_drift": drift}
    return {"metrics": metrics, "summary": summary, "pass": passed}


def _random_state(rng, width: int) -> LatticeState:
    amps = rng.standard_normal((width, 2)) + 1j * rng.standard_normal((width, 2))
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return LatticeState(int(rng.integers(-width, width)), amps)


def finite_identities(model, trials: int, T_max: int, seed: int, direction="+") -> list:
    """Isometry, duality and intertwining defects for random states and times ``T <= T_max``."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(trials):
        T = int(rng.integers(0, T_max + 1))
        phi, psi = _random_state(rng, 12), _random_state(rng, 12)
        iso = abs(norm(apply_waveop(model, T, psi, direction)) - 1.0)
        iso = max(iso, abs(norm(apply_waveop_adjoint(model, T, psi, direction)) - 1.0))
        dual = duality_defect(model, T, phi, psi, direction)
        inter = intertwining_check(model, T, psi, direction)
        rows.append((i, T, iso, dual, inter))
    return rows


def _run_waveop(cfg: ExperimentConfig, w: _Writer) -> dict:
    model, psi0 = cfg.model(), cfg.initial_state()
    p, tol = cfg.params, cfg.tolerances
    tel = convergence_study(model, psi0, p["checkpoints"], tol["increment"], p["direction"],
                            int(p["escape_radius"]))
    ids = finite_identities(model, int(p["identity_trials"]), int(p["identity_T"]), int(p["seed"]),
                            p["direction"])
    worst = max((max(r[2:]) for r in ids), default=0.0)
    w.csv("waveop-convergence.csv", ("t", "increment_norm", "tail_proxy"), tel.rows())
    w.csv("waveop-identities.csv", ("trial", "T", "isometry", "duality", "intertwining"), ids)
    plotting.plot_convergence(tel.times, tel.increments, tel.tail_proxy, w.figure("waveop-convergence.png"))
    metrics = {"final_increment": tel.final_increment, "isometry_defect": tel.isometry_defect,
               "identity_max_defect": worst}
    passed = tel.passed and worst <= tol["identity"]
    return {"metrics": metrics, "telemetry": tel.summary(), "pass": passed}


def select_T_wave(model, psi0, checkpoints, tolerance) -> tuple:
    """Largest checkpoint certified by a convergence study, and whether one was.

    A prefix of the checkpoints is certified when its increments decrease
    strictly and the last one is within ``tolerance``.
    """
    cps = list(checkpoints)
    if model.homogeneous:
        return cps[-1], True, None
    tel = convergence_study(model, psi0, cps, tolerance)
    d = tel.increments
    best = None
    for end in range(len(d)):
        prefix = d[:end + 1]
        if np.all(np.diff(prefix) < 0) and prefix[-1] <= tolerance:
            best = cps[end + 1]
    if best is None:
        return cps[-1], False, tel
    return best, True, tel


def _run_weaklimit(cfg: ExperimentConfig, w: _Writer) -> dict:
    model, psi0 = cfg.model(), cfg.initial_state()
    p, tol = cfg.params, cfg.tolerances
    T_list = [int(t) for t in p["T_list"]]
    lo, hi, num = p["xi_grid"]
    xi = np.linspace(float(lo), float(hi), int(num))
    if p["T_wave"] is None:
        T_wave, certified, tel = select_T_wave(model, psi0, p["checkpoints"], tol["increment"])
    else:
        T_wave, certified, tel = int(p["T_wave"]), None, None
    law = predicted_limit_law(model, psi0, T_wave, KGrid(int(p["kgrid"])), R=int(p["R"]),
                              T_avg=int(p["T_avg"]), certified=certified)
    rep = weak_limit_comparison(model, psi0, T_list, law, xi, tol["kolmogorov"], tol["cf"])
    a = model.coin.a
    outside = [e.mass_outside(a + 5.0 / e.T) for e in rep.laws]
    law_cdf = law.cdf()
    grid_eps = 2 * np.pi / law.diagnostics["kgrid"]
    law_outside = law_cdf.mass_outside(-a - grid_eps, a + grid_eps)

    rows = [(r["T"], r["kolmogorov"], r["cf_gap_max"], r["point_mass"], r["empirical_total"], o)
            for r, o in zip(rep.rows(), outside)]
    w.csv("weaklimit-distances.csv",
          ("T", "kolmogorov", "cf_gap_max", "point_mass", "empirical_total", "outside_mass"), rows)
    for e in rep.laws:
        w.csv(f"position-distribution-T{e.T}.csv", ("x", "prob"), zip(e.xs, e.probs))
        w.csv(f"velocity-cdf-T{e.T}.csv", ("v", "cdf_empirical", "cdf_predicted"),
              zip(V_GRID, e.cdf_of_v(V_GRID), law_cdf(V_GRID)))
    last = rep.laws[-1].cdf_of_v
    cf_e, cf_l = last.characteristic(xi), law_cdf.characteristic(xi)
    w.csv("characteristic-functions.csv", ("xi", "re_empirical", "im_empirical", "re_predicted", "im_predicted"),
          zip(xi, cf_e.real, cf_e.imag, cf_l.real, cf_l.imag))
    if tel is not None:
        w.csv("waveop-convergence.csv", ("t", "increment_norm", "tail_proxy"), tel.rows())
    plotting.plot_cdfs(V_GRID, {f"X_T/T, T={T_list[-1]}": last(V_GRID), "predicted": law_cdf(V_GRID)},
                       w.figure("velocity-cdf.png"))
    plotting.plot_distances(rep.times, rep.kolmogorov, rep.cf_gap, w.figure("weaklimit-distances.png"))

    mass_ok = (abs(law.total - 1.0) <= 1e-6 and np.all(np.abs(rep.empirical_total - 1.0) <= 1e-10))
    metrics = {"kolmogorov_final": float(rep.kolmogorov[-1]), "cf_gap_final": float(rep.cf_gap[-1]),
               "point_mass": law.point_mass, "law_total": law.total,
               "outside_mass_final": outside[-1], "law_outside_mass": law_outside, "T_wave": T_wave}
    return {
        "rows": [{"T": r["T"], "kolmogorov": r["kolmogorov"], "cf_gap_max": r["cf_gap_max"],
                  "point_mass": r["point_mass"], "pass": r["kolmogorov"] <= tol["kolmogorov"]
                  and r["cf_gap_max"] <= tol["cf"]} for r in rep.rows()],
        "metrics": metrics,
        "law": {k: v for k, v in law.diagnostics.items()},
        "certified": certified,
        "warning": law.warning,
        "kolmogorov_decreasing": rep.kolmogorov_decreasing,
        "cf_decreasing": rep.cf_decreasing,
        "pass": bool(rep.passed and mass_ok),
    }


_KINDS = {
    "evolve": _run_evolve,
    "spectrum": _run_spectrum,
    "assumption": _run_assumption,
    "waveop": _run_waveop,
    "weaklimit": _run_weaklimit,
}


# ---------------------------------------------------------------- drivers


def execute(cfg: ExperimentConfig, run_dir) -> RunResult:
    """Run one non-sweep experiment into ``run_dir`` (replacing earlier contents)."""
    run_dir = Path(run_dir)
    if run_dir.exists():
        shutil.rmtree(run_dir)
    w = _Writer(run_dir, cfg.hash)
    if cfg.kind == "sweep":
        body = _run_sweep_body(cfg, w)
    else:
        body = _KINDS[cfg.kind](cfg, w)
    report = {"tool": "lrwalk", "version": __version__, "config_hash": cfg.hash,
              "experiment": cfg.kind, **body}
    report["pass"] = bool(body["pass"])
    w.finish(cfg, report)
    return RunResult(cfg.kind, report["pass"], run_dir, _jsonable(report))


def run(cfg: ExperimentConfig, out: Optional[str] = None) -> RunResult:
    """Run ``cfg`` into ``<out>/<name>/<config-hash>/``."""
    out = Path(out if out is not None else cfg.output_dir)
    return execute(cfg, out / cfg.name / cfg.hash)


def _sweep_row(args):
    raw, row_dir = args
    try:
        cfg = ExperimentConfig.from_dict(raw)
        res = execute(cfg, row_dir)
        return {"status": "pass" if res.passed else "fail", "hash": cfg.hash,
                "metrics": res.report.get("metrics", {}), "error": ""}
    except Exception as e:  # recorded per row; the sweep continues
        return {"status": "error", "hash": "", "metrics": {}, "error": f"{type(e).__name__}: {e}"}


def _run_sweep_body(cfg: ExperimentConfig, w: _Writer) -> dict:
    rows = sweep_rows(cfg.raw)
    jobs = []
    for r in rows:
        row_cfg = ExperimentConfig(r["config"])
        jobs.append((r["config"], w.dir / "rows" / row_cfg.hash))
    threads = cfg.threads
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(j) for j in jobs]

    keys = sorted({k for res in results for k, v in res["metrics"].items() if isinstance(v, (int, float))})
    table = []
    for r, res in zip(rows, results):
        table.append([r["p"] if r["p"] is not None else "", r["a"] if r["a"] is not None else "",
                      res["hash"], res["status"]] + [res["metrics"].get(k, "") for k in keys] + [res["error"]])
    w.csv("sweep-table.csv", ["p", "a", "config_hash", "status"] + keys + ["error"], table)

    metric = "final_increment" if "final_increment" in keys else (keys[0] if keys else None)
    ps = sorted({r["p"] for r in rows if r["p"] is not None})
    if metric and ps:
        series = {}
        for a in sorted({r["a"] for r in rows}, key=lambda v: (v is None, v)):
            ys = []
            for pv in ps:
                hit = [res for r, res in zip(rows, results) if r["p"] == pv and r["a"] == a]
                val = hit[0]["metrics"].get(metric) if hit else None
                ys.append(np.nan if val is None else float(val))
            series["default coin" if a is None else f"a={a:.4g}"] = ys
        plotting.plot_sweep(ps, series, metric, w.figure("sweep.png"))

    return {
        "rows": [{"p": r["p"], "a": r["a"], "config_hash": res["hash"], "status": res["status"],
                  "metrics": res["metrics"], "error": res["error"]} for r, res in zip(rows, results)],
        "failed_rows": sum(res["status"] != "pass" for res in results),
        "pass": all(res["status"] == "pass" for res in results),
    }


def run_sweep(cfg: ExperimentConfig, out: Optional[str] = None) -> RunResult:
    if cfg.kind != "sweep":
        raise ValueError("run_sweep needs a sweep config")
    return run(cfg, out)

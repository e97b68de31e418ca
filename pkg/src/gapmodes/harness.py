"""End-to-end runs: band structure, effective model, prediction, direct
validation over an epsilon grid, and the invariant suites.

Every CSV starts with a ``# config_hash=<hash>`` line followed by a header
row. Runtimes never enter the CSVs (they would break bitwise determinism);
they go to a ``*_timings.csv`` sidecar.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bloch, direct, effective, floquet
from .potentials import ConfigError, PeriodicPotential

DEFAULT_EPS_GRID = (0.2, 0.14, 0.1, 0.07, 0.05)

DEFAULT_SOLVER = {
    "M": None,
    "h_k": 1e-3,
    "n_bands": 8,
    "k_points": 64,
    "method": "auto",  # auto | fd | floquet
    "fd_inner_factor": 80,  # inner step eps / factor (graded mesh, Q = 0)
    "fd_step_factor": 20,  # uniform step min(eps / factor, 1/64) (Q != 0)
    "fd_grading": 1.02,
    "periods": 30,  # minimum half-width in periods
    "floquet_factor": 100,  # steps per period = ceil(factor / eps)
    "edge_exclusion": None,
    "convergence_rtol": 1e-2,
    "convergence_check": True,
}


@dataclass(frozen=True)
class RunConfig:
    potential: PeriodicPotential
    perturbation: effective.OscillatorySpec
    b_star: int
    k_star: float
    epsilon_grid: tuple
    solver: dict = field(default_factory=lambda: dict(DEFAULT_SOLVER))

    def to_json(self) -> dict:
        return {
            "potential": self.potential.to_json(),
            "perturbation": self.perturbation.to_json(),
            "band": {"b_star": self.b_star, "k_star": self.k_star},
            "epsilon_grid": list(self.epsilon_grid),
            "solver": dict(sorted(self.solver.items())),
        }

    @property
    def hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def with_grid(self, grid) -> "RunConfig":
        return RunConfig(self.potential, self.perturbation, self.b_star, self.k_star,
                         _check_grid(grid), dict(self.solver))

    def spec(self, eps: float) -> effective.OscillatorySpec:
        return self.perturbation.with_epsilon(eps)

    @property
    def method(self) -> str:
        m = self.solver["method"]
        if m == "auto":
            return "fd" if self.potential.is_zero else "floquet"
        return m


def _check_grid(grid) -> tuple:
    try:
        g = tuple(float(e) for e in grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"epsilon grid must be a list of numbers: {exc}") from exc
    if not g:
        raise ConfigError("epsilon grid is empty")
    if any(not 0 < e < 0.5 for e in g):
        raise ConfigError("every epsilon must lie in (0, 0.5)")
    if any(a <= b for a, b in zip(g, g[1:])):
        raise ConfigError("epsilon grid must be strictly descending")
    return g


def default_config_doc() -> dict:
    """Mathieu background 2 cos(2 pi x), edge b=2 at k=0, perturbation cos(2 pi x / eps) e^{-x^2}."""
    return {
        "potential": {"fourier": [[-1, 1.0, 0.0], [1, 1.0, 0.0]]},
        "perturbation": effective.cosine_spec(0.1).to_json(),
        "band": {"b_star": 2, "k_star": 0.0},
        "epsilon_grid": list(DEFAULT_EPS_GRID),
        "solver": {},
    }


def load_config(doc) -> RunConfig:
    """RunConfig from a dict, a JSON string or a path-like to a JSON file."""
    if not isinstance(doc, dict):
        text = doc
        if not str(doc).lstrip().startswith("{"):
            try:
                with open(doc) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - {"potential", "perturbation", "band", "epsilon_grid", "solver"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = default_config_doc()
    try:
        pot = PeriodicPotential.from_json(doc.get("potential", base["potential"]))
        pert = effective.OscillatorySpec.from_json(doc.get("perturbation", base["perturbation"]))
        band = doc.get("band", base["band"])
        b_star = int(band["b_star"])
        k_star = float(band["k_star"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    if b_star < 0:
        raise ConfigError("b_star must be nonnegative")
    if k_star not in (0.0, 0.5):
        raise ConfigError("k_star must be 0 or 0.5")
    solver = dict(DEFAULT_SOLVER)
    extra = doc.get("solver", {}) or {}
    if not isinstance(extra, dict):
        raise ConfigError("solver must be an object")
    bad = set(extra) - set(DEFAULT_SOLVER)
    if bad:
        raise ConfigError(f"unknown solver knobs: {sorted(bad)}")
    solver.update(extra)
    if solver["method"] not in ("auto", "fd", "floquet"):
        raise ConfigError("solver.method must be auto, fd or floquet")
    return RunConfig(pot, pert, b_star, k_star, _check_grid(doc.get("epsilon_grid", base["epsilon_grid"])),
                     solver)


# ---------------------------------------------------------------- CSV helpers

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(columns, rows, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- bands

def run_bands(cfg: RunConfig):
    """Band structure and gap inventory. Returns (BandStructure, band rows, gap rows)."""
    s = cfg.solver
    bs = bloch.band_scan(cfg.potential, bloch.default_k_grid(s["k_points"]), s["n_bands"], s["M"])
    rows = []
    for b in range(bs.n_bands):
        for j, k in enumerate(bs.k_grid):
            rows.append({"k": float(k), "b": b, "E": float(bs.energies[j, b]), "gap_id": bs.gap_id(b)})
    gaps = [{"gap_id": b, "lower_band": b, "lo": lo, "hi": hi, "width": hi - lo}
            for b, lo, hi in bs.gaps]
    return bs, rows, gaps


BAND_COLUMNS = ["k", "b", "E", "gap_id"]
GAP_COLUMNS = ["gap_id", "lower_band", "lo", "hi", "width"]


# ---------------------------------------------------------------- predict

def band_edge(cfg: RunConfig) -> bloch.BandEdge:
    s = cfg.solver
    return bloch.band_edge_analysis(cfg.potential, cfg.b_star, cfg.k_star, s["M"], s["h_k"])


def coupling(cfg: RunConfig, edge: bloch.BandEdge) -> float:
    spec = cfg.perturbation
    dens = effective.edge_density(edge)
    if spec.mode == "two-scale":
        return effective.b_eff_two_scale(spec, dens)[0]
    if spec.mode == "rescaled":
        u0 = float(np.interp(0.0, edge.x_grid, edge.u_star))
        return effective.b_eff_rescaled(spec.profile, u0 * u0)
    return effective.b_eff_general(spec.samples, dens, spec.epsilon)


def run_predict(cfg: RunConfig):
    """Effective model at the configured edge. Returns (model or None, rows)."""
    edge = band_edge(cfg)
    if edge.edge_kind != "lower" or edge.d2E <= 0:
        raise effective.UpperEdgeError(
            f"edge b={cfg.b_star}, k={cfg.k_star} is an upper edge (d2E={edge.d2E:.6g}); "
            "a defect mode bifurcates only from edges with positive effective mass")
    B = coupling(cfg, edge)
    try:
        model = effective.effective_model(edge, B)
    except effective.NoBifurcationError:
        model = None
    rows = []
    for eps in cfg.epsilon_grid:
        r = {"epsilon": eps, "b_star": cfg.b_star, "k_star": cfg.k_star, "E_star": edge.E_star,
             "d2E": edge.d2E, "A_eff": edge.A_eff, "B_eff": B, "bifurcates": model is not None}
        if model is not None:
            r.update(E2=model.E2, alpha0=model.alpha0, shift_pred=model.predicted_shift(eps),
                     E_pred=model.predicted_E(eps), localization_length=model.localization_length(eps))
        else:
            r.update(E2=0.0, alpha0=0.0, shift_pred=0.0, E_pred=edge.E_star, localization_length=math.inf)
        rows.append(r)
    return model, rows


PREDICT_COLUMNS = ["epsilon", "b_star", "k_star", "E_star", "d2E", "A_eff", "B_eff", "E2", "alpha0",
                   "shift_pred", "E_pred", "localization_length", "bifurcates"]


# ---------------------------------------------------------------- validate

def _fd_solve(cfg: RunConfig, edge, model, eps, refine: int = 1):
    """Finite-difference defect mode; refine=2 halves the step and stretches L by 1.25."""
    s = cfg.solver
    spec = cfg.spec(eps)
    L = direct.domain_half_width(model.alpha0, eps, s["periods"]) * (1.25 if refine > 1 else 1.0)
    if cfg.potential.is_zero:
        R = max(1.0, math.ceil(spec.radius(1e-10)))
        kap = abs(model.alpha0) * eps * eps
        h = eps / (s["fd_inner_factor"] * refine)
        H = direct.assemble_graded(spec.q_eps, R, h, L, 0.02 / kap, s["fd_grading"])
        hi = edge.E_star
        lo = edge.gap[0]
        core = R
        periodic = False
    else:
        h = min(eps / s["fd_step_factor"], 1.0 / 64) / refine
        h = 1.0 / math.ceil(1.0 / h)
        L = math.ceil(L)
        H = direct.assemble(cfg.potential, spec.q_eps, L, h)
        hi = direct.discrete_band_edge(cfg.potential, h, cfg.k_star, cfg.b_star)
        # the band below a lower edge at k* peaks at the same k*
        lo = (direct.discrete_band_edge(cfg.potential, h, cfg.k_star, cfg.b_star - 1)
              if np.isfinite(edge.gap[0]) else -np.inf)
        core = max(1.0, math.ceil(spec.radius(1e-10)))
        periodic = True
    E, _ = direct.gap_eigenvalue(H, (lo, hi), s["edge_exclusion"])
    mode = direct.eigenvector(H, E, periodic=periodic, core=core)
    return mode, E - hi, hi


def _floquet_solve(cfg: RunConfig, edge, eps, refine: int = 1):
    s = cfg.solver
    n_per = int(math.ceil(s["floquet_factor"] / eps)) * refine
    width = edge.gap[1] - edge.gap[0] if np.isfinite(edge.gap[0]) else 1.0
    return floquet.solve_defect(cfg.potential, cfg.spec(eps).q_eps, edge.E_star, cfg.k_star,
                                side=-1, gap_width=width, n_per=n_per)


def _u_star(cfg, edge):
    if cfg.potential.is_zero and cfg.k_star == 0.0 and cfg.b_star == 0:
        return lambda x: np.ones_like(np.asarray(x, float))
    return floquet.u_star_callable(edge)


def validate_one(cfg: RunConfig, edge, model, eps: float) -> dict:
    """One ScanRow. Numerical failures are recorded in the row, not raised."""
    t0 = time.perf_counter()
    method = cfg.method
    row = {"epsilon": eps, "method": method, "E_star": edge.E_star, "gap_lo": edge.gap[0],
           "gap_hi": edge.gap[1], "shift_pred": model.predicted_shift(eps),
           "E_pred": model.predicted_E(eps), "loc_length_pred": model.localization_length(eps)}
    u = _u_star(cfg, edge)
    try:
        if method == "fd":
            mode, shift, E_ref = _fd_solve(cfg, edge, model, eps)
            pred = lambda x: u(x) * model.g0(eps * eps * x)  # noqa: E731
            cand = np.linspace(-0.5, 0.5, 2001)
            x_n = float(cand[np.argmax(np.abs(pred(cand)))])
            psi = mode.normalized_to(float(pred(np.array([x_n]))[0]), x_n)
            perr = float(np.max(np.abs(psi - pred(mode.x))))
            row.update(E_eps=edge.E_star + shift, shift=shift, residual=mode.residual,
                       loc_length=mode.localization_length, profile_error=perr)
            if cfg.solver["convergence_check"]:
                _, shift2, _ = _fd_solve(cfg, edge, model, eps, refine=2)
                row["shift_refined"] = shift2
        else:
            mode = _floquet_solve(cfg, edge, eps)
            perr, _ = floquet.profile_error(mode, u, model.g0, eps)
            row.update(E_eps=edge.E_star + mode.shift, shift=mode.shift, residual=mode.residual,
                       loc_length=mode.localization_length, profile_error=perr)
            if cfg.solver["convergence_check"]:
                row["shift_refined"] = _floquet_solve(cfg, edge, eps, refine=2).shift
        row["found"] = True
        row["inside_gap"] = bool(row["shift"] < 0 and row["E_eps"] > edge.gap[0])
        row["ratio"] = row["shift"] / row["shift_pred"]
        row["loc_length_ratio"] = row["loc_length"] / row["loc_length_pred"]
        if "shift_refined" in row:
            rel = abs(row["shift_refined"] - row["shift"]) / abs(row["shift"])
            row["convergence_rel"] = rel
            row["converged"] = bool(rel <= cfg.solver["convergence_rtol"])
        else:
            row["converged"] = True
    except (direct.NoDefectModeError, floquet.NoDefectModeError, direct.AmbiguityError,
            direct.StagnationError, floquet.MatchingError) as exc:
        row.update(found=False, converged=False, inside_gap=False, flag=f"{type(exc).__name__}: {exc}")
    row["runtime_s"] = time.perf_counter() - t0
    return row


VALIDATE_COLUMNS = ["epsilon", "method", "E_star", "E_eps", "shift", "E_pred", "shift_pred", "ratio",
                    "gap_lo", "gap_hi", "inside_gap", "residual", "profile_error", "loc_length",
                    "loc_length_pred", "loc_length_ratio", "shift_refined", "convergence_rel",
                    "found", "converged", "flag"]


def _job(args):
    return validate_one(*args)


def run_validate(cfg: RunConfig, workers: int = 1):
    """ScanRows in epsilon order and the fit summary."""
    edge = band_edge(cfg)
    if edge.edge_kind != "lower":
        raise effective.UpperEdgeError("validation needs a lower band edge")
    model = effective.effective_model(edge, coupling(cfg, edge))
    jobs = [(cfg, edge, model, eps) for eps in cfg.epsilon_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    return rows, summarize(rows, model)


def summarize(rows, model) -> dict:
    ok = [r for r in rows if r.get("found") and r.get("converged")]
    out = {"n_rows": len(rows), "n_fit": len(ok), "A_eff": model.A_eff, "B_eff": model.B_eff,
           "E2": model.E2, "alpha0": model.alpha0}
    if len(ok) >= 2:
        eps = np.array([r["epsilon"] for r in ok])
        sh = np.array([abs(r["shift"]) for r in ok])
        out["slope"] = float(np.polyfit(np.log(eps), np.log(sh), 1)[0])
        dev = [abs(r["ratio"] - 1) for r in ok]
        out["ratio_smallest_eps"] = ok[-1]["ratio"]
        out["ratio_monotone"] = bool(all(a > b for a, b in zip(dev, dev[1:])))
        pe = [r["profile_error"] for r in ok]
        out["profile_error_smallest_eps"] = pe[-1]
        out["profile_error_monotone"] = bool(all(a > b for a, b in zip(pe, pe[1:])))
        out["loc_length_max_dev"] = float(max(abs(r["loc_length_ratio"] - 1) for r in ok))
        out["all_inside_gap"] = bool(all(r["inside_gap"] for r in ok))
    return out


# ---------------------------------------------------------------- verify

def run_verify(cfg: RunConfig):
    """Invariant suites; rows of (group, check, value, threshold, passed)."""
    from . import suites

    return suites.run_all(cfg)


VERIFY_COLUMNS = ["group", "check", "value", "threshold", "passed"]

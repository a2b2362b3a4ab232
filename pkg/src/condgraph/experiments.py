"""Experiment commands behind the ``condgraph`` CLI.

Each ``cmd_*`` takes an :class:`ExperimentConfig` and returns a
:class:`Report`: tabular rows, extra artifacts (JSON overlays), and the list
of invariant violations it detected. Reports render to CSV with a trailing
``#`` metadata block; rendering is deterministic for a given config.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import ConditionKind, EstimationGrid, estimate_all, estimate_constant
from .implication import builtin_edges, closure, edges_json, flags, verify_graph
from .objective import (
    LogisticDataset,
    make_f_eps,
    make_logistic,
    make_quadratic,
    objective_from_label,
    square,
)
from .optimize import adaptive_gd, estimate_rate, first_hit, gd, heavy_ball, heavy_ball_batch
from .starnorm import diff_as_perturbation, make_omega_eps, perturb, star_norm
from .tuning import NoGuaranteeError, TABLE, best_guarantee, gd_rules, hb_quadratic_rule


class ConfigError(ValueError):
    pass


_NON_RESULT_KEYS = ("out", "workers")


@dataclass
class ExperimentConfig:
    """Flat experiment parameters; empty values mean "use the command's default"."""

    objective: tuple[str, ...] = ()
    grid: str = ""
    seed: int = 0
    iters: int = 0
    x0: tuple[float, ...] = ()
    alpha: float = 0.0
    pairs: str = "all"
    eps_ladder: tuple[float, ...] = ()
    radius: float = 0.1
    alpha_max: float = 0.12
    alpha_points: int = 200
    beta_points: int = 200
    hb_L: float = 25.0
    hb_mus: tuple[float, ...] = (1.0, 7.0, 169.0 / 19.0, 13.0, 19.0)
    workers: int = 1
    tail_fraction: float = 0.5
    out: str = ""

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def update(self, key: str, raw: str) -> ExperimentConfig:
        key = key.strip().replace("-", "_")
        if key not in self.field_names():
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(self, key)
        raw = raw.strip()
        try:
            if key == "objective":
                value = tuple(s.strip() for s in raw.split(";") if s.strip())
            elif isinstance(current, tuple):
                value = tuple(float(eval_number(s)) for s in raw.split(",") if s.strip())
            elif isinstance(current, bool):
                value = raw.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(eval_number(raw))
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return dataclasses.replace(self, **{key: value})

    @classmethod
    def from_text(cls, text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
        cfg = base or cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            k, v = line.split("=", 1)
            cfg = cfg.update(k, v)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text(), base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def result_dict(self) -> dict:
        """Config minus the fields that cannot change results (output path, parallelism)."""
        d = self.to_dict()
        for k in _NON_RESULT_KEYS:
            d.pop(k)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.result_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def eval_number(s: str) -> float:
    """Parse a float or a simple fraction such as ``169/19``."""
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


@dataclass
class Report:
    header: list[str]
    rows: list[list]
    config: ExperimentConfig
    grid: str = "default"
    violations: list[str] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(_cell(v) for v in row))
        lines.append(f"# config_hash={self.config.digest()}")
        lines.append(f"# grid={self.grid}")
        lines.append(f"# version={__version__}")
        lines.append("# config=" + json.dumps(self.config.result_dict(), sort_keys=True, default=str))
        for v in self.violations:
            lines.append(f"# violation={v}")
        return "\n".join(lines) + "\n"

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def write(self, path: str | Path) -> list[Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        written = [path]
        for suffix, text in self.artifacts.items():
            p = path.with_name(path.stem + suffix)
            p.write_text(text)
            written.append(p)
        return written


def _cell(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (np.floating,)):
        return _cell(float(v))
    if isinstance(v, (tuple, list)):
        return ";".join(_cell(x) for x in v)
    s = "" if v is None else str(v)
    if "," in s or '"' in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


def parse_grid(spec: str, obj) -> EstimationGrid:
    """``lo:hi:n`` on every axis (optionally ``:excl``), or empty for the default."""
    if not spec or spec == "default":
        return EstimationGrid.default(obj)
    parts = spec.split(":")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        excl = float(parts[3]) if len(parts) > 3 else 1e-4
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"grid spec must be lo:hi:n[:exclusion], got {spec!r}") from exc
    d = obj.dimension
    return EstimationGrid(np.full(d, lo), np.full(d, hi), points_per_axis=n, exclusion_radius=excl, seed=0)


def _objectives(cfg: ExperimentConfig, default: tuple[str, ...]):
    labels = cfg.objective or default
    return [objective_from_label(lbl) for lbl in labels]


def _default_x0(obj, cfg: ExperimentConfig) -> np.ndarray:
    if cfg.x0:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.size == 1:
            x0 = np.full(obj.dimension, x0[0])
        return x0
    return obj.minimizers.project(np.zeros(obj.dimension)) + 3.0


def _pt(p) -> str:
    return "" if p is None else ";".join(f"{float(v):.10g}" for v in p)


# ------------------------------------------------------------------ constants


def cmd_constants(cfg: ExperimentConfig) -> Report:
    rows, violations, grids = [], [], []
    for obj in _objectives(cfg, ("f_lrp",)):
        grid = parse_grid(cfg.grid, obj)
        grids.append(f"{obj.label}:{grid.describe()}")
        for kind, est in estimate_all(obj, grid).items():
            analytic = obj.analytic_constants.get(kind.value)
            rows.append([obj.label, kind.value, est.value, _pt(est.point), _pt(est.partner),
                         "" if analytic is None else analytic])
            if analytic is not None and abs(est.value - analytic) > 1e-3 * max(1.0, abs(analytic)):
                violations.append(f"{obj.label} {kind.value}: estimate {est.value:.6g} vs {analytic:.6g}")
    header = ["label", "kind", "value", "achieving_point", "partner_point", "analytic"]
    return Report(header, rows, cfg, " | ".join(grids), violations)


# ------------------------------------------------------------------ graph

GRAPH_CORPUS = ("quadratic:1,10", "f_lrp", "f_eps:0.1", "quadratic:2+smooth_abs")


def cmd_verify_graph(cfg: ExperimentConfig) -> Report:
    objs = _objectives(cfg, GRAPH_CORPUS)
    grids = {o.label: parse_grid(cfg.grid, o) for o in objs}
    reports = verify_graph(objs, grids=grids)
    rows, violations = [], []
    for r in reports:
        srcs = " & ".join(f"{e.kind}({e.value:.10g})" for e in r.sources)
        conv = "" if r.converted is None else str(r.converted)
        verdict = r.status if r.verdict is None else ("holds" if r.holds else "violated")
        rows.append([r.edge_id, r.objective, srcs, conv, verdict, r.margin])
        if r.status == "verified" and not r.holds:
            violations.append(f"{r.edge_id} on {r.objective}: margin {r.margin:.3g}")
    header = ["edge_id", "objective_label", "source_constants", "converted", "verdict", "margin"]
    grid_desc = " | ".join(f"{k}:{g.describe()}" for k, g in grids.items())
    return Report(header, rows, cfg, grid_desc, violations, {".edges.json": edges_json()})


# ------------------------------------------------------------------ rates


def estimated_constants(obj, grid):
    ests = estimate_all(obj, grid)
    consts = [e.constant() for e in ests.values() if e.satisfied]
    return closure(consts)


def lyapunov_ratio(traj, lyapunov: str, atol: float = 1e-10) -> float:
    """Largest one-step ratio of the tracked quantity while it exceeds atol."""
    s = traj.subopt if lyapunov == "value_gap" else traj.dist_sq
    active = s[:-1] > atol
    if not np.any(active):
        return 0.0
    return float(np.max(s[1:][active] / s[:-1][active]))


def cmd_rates(cfg: ExperimentConfig) -> Report:
    rows, violations, grids = [], [], []
    n = cfg.iters or 500
    for obj in _objectives(cfg, ("quadratic:1,10", "f_lrp")):
        grid = parse_grid(cfg.grid, obj)
        grids.append(f"{obj.label}:{grid.describe()}")
        consts = estimated_constants(obj, grid)
        known = {c.kind: c.value for c in consts}
        extras = flags(consts)
        x0 = _default_x0(obj, cfg)
        if cfg.pairs == "all":
            cells = list(TABLE)
        else:
            cells = [tuple(ConditionKind.parse(k) for k in p.split("/")) for p in cfg.pairs.split(";")]
        for cell in cells:
            u, lo = cell
            if u not in known or lo not in known or not known[lo] > 0 or known[u] < known[lo]:
                continue
            for rule in gd_rules(cell, extras):
                L, mu = known[u], known[lo]
                alpha, q = rule.alpha(L, mu), rule.q(L, mu)
                traj = gd(obj, x0, alpha, n)
                measured = lyapunov_ratio(traj, rule.lyapunov)
                ok = measured <= q + 1e-9
                rows.append([obj.label, rule.name, rule.extra or "", L, mu, alpha, q, rule.lyapunov,
                             measured, "ok" if ok else "exceeds", estimate_rate(traj).cls])
                if not ok:
                    violations.append(f"{obj.label} {rule.name}: measured {measured:.6g} > q {q:.6g}")
        if cfg.alpha > 0:
            traj = gd(obj, x0, cfg.alpha, n)
            est = estimate_rate(traj)
            rows.append([obj.label, "fixed-step", "", "", "", cfg.alpha, "", "value_gap",
                         lyapunov_ratio(traj, "value_gap"), "", est.cls])
    header = ["objective", "rule", "extra", "L", "mu", "alpha", "q", "lyapunov", "measured", "status", "class"]
    return Report(header, rows, cfg, " | ".join(grids), violations)


# ------------------------------------------------------------------ heavy ball sweep


def _sweep_chunk(args):
    label, x0, alphas, betas, n, tail = args
    obj = objective_from_label(label)
    subopt = heavy_ball_batch(obj, x0, alphas, betas, n)
    out = []
    for s in subopt:
        est = estimate_rate(s, tail_fraction=tail) if np.all(np.isfinite(s)) else None
        if est is None:
            out.append((float("inf"), "diverged"))
        elif est.cls == "converged_linear":
            out.append((est.fit_rate, est.cls))
        else:
            out.append((float("inf"), est.cls))
    return out


def sweep_axes(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    a = np.linspace(cfg.alpha_max / cfg.alpha_points, cfg.alpha_max, cfg.alpha_points)
    b = np.linspace(0.0, 1.0, cfg.beta_points, endpoint=False)
    return a, b


def nearest_cell(alphas, betas, alpha, beta) -> tuple[int, int]:
    return int(np.argmin(np.abs(alphas - alpha))), int(np.argmin(np.abs(betas - beta)))


def cmd_hb_sweep(cfg: ExperimentConfig) -> Report:
    label = (cfg.objective or ("f_lrp",))[0]
    obj = objective_from_label(label)
    x0 = np.asarray(cfg.x0 or (3.3,), dtype=float)
    n = cfg.iters or 2000
    alphas, betas = sweep_axes(cfg)
    A, B = np.meshgrid(alphas, betas, indexing="ij")
    a_flat, b_flat = A.ravel(), B.ravel()
    chunk = max(1, math.ceil(a_flat.size / max(4 * cfg.workers, 8)))
    jobs = [
        (label, x0, a_flat[i:i + chunk], b_flat[i:i + chunk], n, cfg.tail_fraction)
        for i in range(0, a_flat.size, chunk)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_sweep_chunk, jobs))
    else:
        parts = [_sweep_chunk(j) for j in jobs]
    cells = [c for part in parts for c in part]
    rates = np.array([c[0] for c in cells]).reshape(A.shape)
    classes = np.array([c[1] for c in cells]).reshape(A.shape)

    tunings, violations = [], []
    for mu in cfg.hb_mus:
        alpha, beta = hb_quadratic_rule(cfg.hb_L, mu)
        traj = heavy_ball(obj, x0, alpha, beta, n)
        est = estimate_rate(traj, tail_fraction=cfg.tail_fraction)
        i, j = nearest_cell(alphas, betas, alpha, beta)
        tunings.append({
            "mu": mu, "L": cfg.hb_L, "alpha": alpha, "beta": beta,
            "class": est.cls, "fit_rate": est.fit_rate if np.isfinite(est.fit_rate) else None,
            "first_hit_0.1": first_hit(traj, 0.1),
            "cell": [i, j], "cell_alpha": float(alphas[i]), "cell_beta": float(betas[j]),
            "cell_class": str(classes[i, j]),
            "cell_rate": None if not np.isfinite(rates[i, j]) else float(rates[i, j]),
        })
    if rates.shape != (alphas.size, betas.size):
        violations.append("rate matrix shape does not match the grids")
    header = ["alpha"] + [f"{b:.6g}" for b in betas]
    rows = [[float(a)] + [float(v) for v in rates[i]] for i, a in enumerate(alphas)]
    grid_desc = (f"alpha=linspace({alphas[0]:g},{alphas[-1]:g},{alphas.size});"
                 f"beta=linspace(0,1,{betas.size},endpoint=False);n={n};x0={x0.tolist()}")
    rep = Report(header, rows, cfg, grid_desc, violations,
                 {".tunings.json": json.dumps(tunings, indent=2)})
    rep.tunings = tunings
    rep.classes = classes
    return rep


# ------------------------------------------------------------------ perturbation study

DEFAULT_LADDER = (0.4, 0.2, 0.1, 0.05, 0.01, 0.002, 0.0005)


def cmd_perturb_study(cfg: ExperimentConfig) -> Report:
    base = objective_from_label((cfg.objective or ("quadratic:2",))[0])
    alpha = cfg.alpha or 0.4
    n = cfg.iters or 20
    ladder = cfg.eps_ladder or DEFAULT_LADDER
    x0s = [np.array([v]) for v in (cfg.x0 or (-2.0, -1.0, 1.0, 2.0))]
    ref = [gd(base, x0, alpha, n) for x0 in x0s]
    ref_hits = [first_hit(t, cfg.radius) for t in ref]
    rows, violations = [], []
    prev = math.inf
    for eps in ladder:
        h = make_omega_eps(eps, x_star=base.minimizers.low)
        f = perturb(base, h)
        runs = [gd(f, x0, alpha, n) for x0 in x0s]
        dev = max(float(np.max(np.abs(r.iterates - t.iterates))) for r, t in zip(runs, ref))
        hits = [first_hit(t, cfg.radius) for t in runs]
        shift = max(abs((a if a is not None else n + 1) - (b if b is not None else n + 1))
                    for a, b in zip(hits, ref_hits))
        rows.append([eps, star_norm(h).value, dev, ref_hits, hits, shift])
        if dev > prev + 1e-12:
            violations.append(f"deviation increased at eps={eps:g}")
        prev = dev
    header = ["eps", "star_norm", "max_deviation", "first_hit_unperturbed", "first_hit_perturbed", "first_hit_shift"]
    return Report(header, rows, cfg, f"alpha={alpha};iters={n};radius={cfg.radius}", violations)


# ------------------------------------------------------------------ discontinuity


def cmd_discontinuity(cfg: ExperimentConfig) -> Report:
    ladder = cfg.eps_ladder or (0.4, 0.2, 0.1, 0.05)
    n = cfg.iters or 400
    x0 = np.asarray(cfg.x0 or (3.0,), dtype=float)
    f0 = make_quadratic([2.0])
    rows, violations = [], []
    for family in ("f_eps", "omega"):
        prev_norm = math.inf
        for eps in ladder:
            if family == "f_eps":
                f = make_f_eps(eps)
                h = diff_as_perturbation(f0, f)
            else:
                h = make_omega_eps(eps)
                f = perturb(f0, h)
            grid = parse_grid(cfg.grid, f)
            L = estimate_constant("SC+", f, grid).value
            mu = estimate_constant("SC-", f, grid).value
            norm = star_norm(h).value
            naive = 2.0 / (L + mu)
            naive_rate = estimate_rate(gd(f, x0, naive, n)).linear_rate
            fixed_rate = estimate_rate(gd(f, x0, 0.5, n)).linear_rate
            rows.append([family, eps, norm, L, mu, naive, naive_rate, fixed_rate])
            if not norm < prev_norm:
                violations.append(f"{family}: star norm not decreasing at eps={eps:g}")
            if family == "f_eps" and fixed_rate > eps + 1e-12:
                violations.append(f"f_eps({eps:g}): rate {fixed_rate:.3g} with alpha=1/2 exceeds eps")
            prev_norm = norm
    header = ["family", "eps", "star_norm", "L_sc", "mu_sc", "naive_alpha", "naive_rate", "fixed_rate"]
    grid_desc = cfg.grid or "default"
    return Report(header, rows, cfg, grid_desc, violations)


# ------------------------------------------------------------------ logistic


def _logistic_label(cfg) -> str:
    return (cfg.objective or ("logistic:seed=42,d=3,m=200",))[0]


def cmd_logistic(cfg: ExperimentConfig) -> Report:
    f = objective_from_label(_logistic_label(cfg))
    f2 = square(f)
    x_star = f.minimizers.low
    n = cfg.iters or 2000
    grid = (parse_grid(cfg.grid, f2) if cfg.grid
            else EstimationGrid.around(x_star, 3.0, points_per_axis=41, seed=cfg.seed))
    consts = estimated_constants(f2, grid)
    known = {c.kind.value: c.value for c in consts}
    qg_lo = estimate_constant("QG-", f2, grid)
    qg_up = estimate_constant("QG+", f2, grid)
    rows = [
        ["dataset", "label", f.label],
        ["dataset", "f_star", f.f_star],
        ["dataset", "reference_minimizer", _pt(x_star)],
        ["constants", "QG-(f^2)", qg_lo.value],
        ["constants", "QG+(f^2)", qg_up.value],
        ["constants", "SC-(f^2)", known.get("SC-", "")],
        ["constants", "SC+(f^2)", known.get("SC+", "")],
    ]
    violations = []
    if not (0 < qg_lo.value < math.inf and 0 < qg_up.value < math.inf):
        violations.append("QG constants of f^2 not positive and finite on the grid")
    try:
        g = best_guarantee(consts)
        alpha = g.alpha
        rows += [["guarantee", "rule", g.rule.name], ["guarantee", "q", g.q], ["guarantee", "alpha", alpha]]
    except NoGuaranteeError:
        alpha = 1.0 / known["SC+"]
        rows += [["guarantee", "rule", "none"], ["guarantee", "alpha", alpha]]
    x0 = np.asarray(cfg.x0, dtype=float) if cfg.x0 else x_star + 2.0
    z = np.asarray(LogisticDataset.synthetic(**_dataset_args(f.label)).samples)
    l_hat = float(np.sum(z * z) / (4 * z.shape[0]))
    plain = gd(f, x0, 1.0 / l_hat, n)
    adaptive = adaptive_gd(f, x0, alpha, lambda t: 2.0 * t, n)
    composed = gd(f2, x0, alpha, n)
    gap = float(np.max(np.abs(adaptive.iterates - composed.iterates)))
    adaptive_f2 = adaptive.values**2 - f2.f_star
    est_plain = estimate_rate(plain)
    est_adapt = estimate_rate(adaptive_f2)
    est_comp = estimate_rate(composed)
    rows += [
        ["gd_f", "alpha", 1.0 / l_hat],
        ["gd_f", "class", est_plain.cls],
        ["gd_f", "fit_rate", est_plain.fit_rate],
        ["adaptive_f2", "class", est_adapt.cls],
        ["adaptive_f2", "fit_rate", est_adapt.fit_rate],
        ["adaptive_f2", "final_gap", float(adaptive_f2[-1])],
        ["gd_f2", "class", est_comp.cls],
        ["oracle", "max_iterate_difference", gap],
    ]
    if gap > 1e-12:
        violations.append(f"adaptive GD differs from GD on f^2 by {gap:.3g}")
    return Report(["section", "name", "value"], rows, cfg, grid.describe(), violations)


def _dataset_args(label: str) -> dict:
    _, _, arg = label.partition(":")
    kv = dict(item.split("=") for item in arg.split(",") if "=" in item)
    return {"seed": int(kv.get("seed", 42)), "d": int(kv.get("d", 3)), "m": int(kv.get("m", 200))}


COMMANDS = {
    "constants": cmd_constants,
    "verify-graph": cmd_verify_graph,
    "rates": cmd_rates,
    "hb-sweep": cmd_hb_sweep,
    "perturb-study": cmd_perturb_study,
    "discontinuity": cmd_discontinuity,
    "logistic": cmd_logistic,
}

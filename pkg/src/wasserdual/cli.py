"""Batch front-end: config-driven experiments writing CSV tables and figures.

Configs are INI-style key = value sections; command-line flags only
override config keys. Every run writes a manifest (config echo, resolved
tolerances, versions, timestamp), a summary.csv whose numbers all appear
in a detail table, per-command detail CSVs, and rendered figures next to
them. Exit status: 0 all asserted invariants hold, 1 malformed input
(one-line diagnostic naming the field), 2 assertion failure (naming the
failing table).
"""

import argparse
import configparser
import datetime
import math
import os
import sys

import numpy as np

from . import __version__
from ._csvio import fmt, write_csv, write_text_atomic
from .duality import (
    build_corpus,
    default_pairs,
    duality_gap_report,
    g_infty_prime_margins,
    gluing_consistency,
    monotonicity_audit,
    pair_distance_ratio,
    parallel_map,
)
from .heisenberg import SDEConfig, Step2Point, sample_diffusion, thin_cloud
from .hopf_lax import (
    PowerLagrangian,
    hj_residual,
    hopf_lax,
    hopf_lax_lipschitz_bound,
    semigroup_defect,
)
from .kernels import (
    collapse_kernel,
    identity_kernel,
    random_walk_kernel,
    torus_heat_kernel,
)
from .metric import cycle_graph_space, load_edge_list, path_graph_space
from .slope import ScalarField, field_from_csv
from .transport import (
    DiscreteMeasure,
    dirac,
    measure_from_csv,
    wasserstein_inf,
    wasserstein_p,
)

COMMANDS = ("wasserstein", "hopf-lax", "check-duality", "simulate-heisenberg", "audit")

DEFAULT_TOLERANCES = {
    "duality_gap": 0.05,
    "monotonicity": 1e-10,
    "margin": 1e-6,
    "gluing": 1e-8,
}


class ConfigError(Exception):
    """Malformed input; the message names the offending field."""


class CheckFailure(Exception):
    """An asserted invariant failed; the message names the failing table."""


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


class Config:
    def __init__(self, parser: configparser.ConfigParser):
        self._cp = parser

    def get(self, section: str, key: str, default=None) -> str | None:
        if self._cp.has_option(section, key):
            return self._cp.get(section, key)
        return default

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None or value.strip() == "":
            raise ConfigError(f"[{section}] {key}: missing")
        return value

    def number(self, section: str, key: str, default=None, kind=float):
        raw = self.get(section, key)
        if raw is None or raw.strip() == "":
            if default is None:
                raise ConfigError(f"[{section}] {key}: missing")
            return default
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: malformed number {raw!r}") from None

    def set(self, section: str, key: str, value: str) -> None:
        if not self._cp.has_section(section):
            self._cp.add_section(section)
        self._cp.set(section, key, value)

    def sections(self):
        return self._cp.sections()

    def items(self, section: str):
        return self._cp.items(section)


def load_config(path: str, overrides, seed: int | None, out: str | None) -> Config:
    if not os.path.exists(path):
        raise ConfigError(f"config: file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config: parse error: {exc}") from None
    cfg = Config(parser)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--override: expected section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"--override: expected section.key=value, got {item!r}")
        section, name = key.split(".", 1)
        cfg.set(section.strip(), name.strip(), value.strip())
    if seed is not None:
        cfg.set("experiment", "seed", str(seed))
    if out is not None:
        cfg.set("experiment", "out", out)
    return cfg


def parse_p_list(raw: str, field: str):
    entries = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not entries:
        raise ConfigError(f"{field}: p_list empty")
    p_list = []
    for tok in entries:
        if tok.lower() in ("inf", "infinity"):
            p_list.append(math.inf)
            continue
        try:
            p = float(tok)
        except ValueError:
            raise ConfigError(f"{field}: malformed exponent {tok!r}") from None
        if p < 1.0:
            raise ConfigError(f"{field}: exponents must be >= 1, got {tok}")
        p_list.append(p)
    return p_list


def build_space(cfg: Config):
    source = cfg.get("space", "source", "torus").strip().lower()
    if source == "torus":
        n = cfg.number("space", "n", 64, int)
        return cycle_graph_space(n, circumference=1.0)
    if source == "path":
        n = cfg.number("space", "n", 100, int)
        length = cfg.number("space", "length", 1.0)
        return path_graph_space(n, length=length)
    if source == "edges":
        path = cfg.require("space", "edges")
        if not os.path.exists(path):
            raise ConfigError(f"[space] edges: file not found: {path}")
        return load_edge_list(path)
    raise ConfigError(f"[space] source: unknown value {source!r}")


def build_kernel(cfg: Config, space):
    kind = cfg.get("kernel", "type", "heat").strip().lower()
    if kind == "heat":
        n = space.size
        t = cfg.number("kernel", "t", 0.05)
        return torus_heat_kernel(n, t, method=cfg.get("kernel", "method", "gaussian"))
    if kind == "walk":
        steps = cfg.number("kernel", "steps", 1, int)
        laziness = cfg.number("kernel", "laziness", 0.5)
        return random_walk_kernel(space, steps=steps, laziness=laziness)
    if kind == "identity":
        return identity_kernel(space)
    if kind == "collapse":
        return collapse_kernel(space, cfg.number("kernel", "target", 0, int))
    raise ConfigError(f"[kernel] type: unknown value {kind!r}")


def build_measure(cfg: Config, space, key: str) -> DiscreteMeasure:
    raw = cfg.require("measures", key).strip()
    if raw.startswith("dirac:"):
        try:
            idx = int(raw.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"[measures] {key}: malformed dirac index {raw!r}") from None
        return dirac(space, idx)
    if "," in raw:
        try:
            weights = np.array([float(tok) for tok in raw.split(",")])
        except ValueError:
            raise ConfigError(f"[measures] {key}: malformed inline weights") from None
        try:
            return DiscreteMeasure(space, weights)
        except ValueError as exc:
            raise ConfigError(f"[measures] {key}: {exc}") from None
    if not os.path.exists(raw):
        raise ConfigError(f"[measures] {key}: file not found: {raw}")
    return measure_from_csv(space, raw)


def build_field(cfg: Config, space, key: str = "field") -> ScalarField:
    raw = cfg.get("hopf-lax", key, "sample:sin").strip()
    positions = _positions(space)
    if raw == "sample:sin":
        return ScalarField(space, 0.3 * np.sin(2 * math.pi * positions) + 0.2 * positions)
    if raw == "sample:coords":
        return ScalarField(space, positions)
    if not os.path.exists(raw):
        raise ConfigError(f"[hopf-lax] {key}: file not found: {raw}")
    return field_from_csv(space, raw)


def _positions(space) -> np.ndarray:
    """Arc-length coordinates for path/cycle spaces, raw index otherwise."""
    n = space.size
    if space.adjacency is not None and all(len(v) <= 2 for v in space.adjacency.values()):
        # path graph: cumulative length from vertex 0
        return space.dist[0].copy() if n > 1 else np.zeros(1)
    return np.arange(n, dtype=float)


def resolved_tolerances(cfg: Config) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for key in tol:
        raw = cfg.get("tolerances", key)
        if raw is not None:
            try:
                tol[key] = float(raw)
            except ValueError:
                raise ConfigError(f"[tolerances] {key}: malformed number {raw!r}") from None
    return tol


def write_manifest(cfg: Config, outdir: str, command: str, tolerances: dict) -> None:
    lines = [
        f"command = {command}",
        f"wasserdual_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"python_version = {sys.version.split()[0]}",
        f"timestamp = {datetime.datetime.now().isoformat()}",
        "",
    ]
    for name, value in sorted(tolerances.items()):
        lines.append(f"tolerance.{name} = {fmt(value)}")
    lines.append("")
    for section in cfg.sections():
        lines.append(f"[{section}]")
        for key, value in cfg.items(section):
            lines.append(f"{key} = {value}")
        lines.append("")
    write_text_atomic(os.path.join(outdir, "manifest.txt"), "\n".join(lines))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def emit_plot_data(reports, path: str) -> None:
    """constants.csv with columns p,K_C,K_G,ci_halfwidth,mesh; inf sorted last."""
    rows = []
    for rep in sorted(reports, key=lambda r: (math.isinf(r.p), r.p)):
        p_txt = "inf" if math.isinf(rep.p) else fmt(rep.p)
        rows.append([p_txt, rep.K_C, rep.K_G, rep.mc_ci or 0.0, rep.mesh])
    write_csv(path, ["p", "K_C", "K_G", "ci_halfwidth", "mesh"], rows)


def run_wasserstein(cfg: Config, outdir: str, tol: dict):
    space = build_space(cfg)
    mu = build_measure(cfg, space, "mu")
    nu = build_measure(cfg, space, "nu")
    p_list = parse_p_list(cfg.get("wasserstein", "p_list", "") or "", "[wasserstein] p_list")

    rows = []
    summary = []
    finite_ps = []
    finite_vs = []
    for p in p_list:
        if math.isinf(p) or p > 300:
            value, plan = wasserstein_inf(mu, nu)
            label = "inf"
        else:
            value, plan = wasserstein_p(mu, nu, p)
            label = fmt(p)
            finite_ps.append(p)
            finite_vs.append(value)
        rows.append([label, value])
        plan.to_csv(os.path.join(outdir, f"plan_p{label}.csv"))
        summary.append([f"W_{label}", value])
    v_inf, _ = wasserstein_inf(mu, nu)
    if "inf" not in [r[0] for r in rows]:
        rows.append(["inf", v_inf])
    write_csv(os.path.join(outdir, "wp_values.csv"), ["p", "value"], rows)
    write_csv(os.path.join(outdir, "summary.csv"), ["metric", "value"], summary)

    from .figures import save_wp_curve_figure

    if finite_ps:
        save_wp_curve_figure(finite_ps, finite_vs, v_inf, os.path.join(outdir, "fig_wp_curve.png"))

    values = [r[1] for r in rows]
    if any(b < a - tol["monotonicity"] for a, b in zip(values, values[1:])):
        raise CheckFailure("wp_values.csv (W_p not nondecreasing in p)")


def run_hopf_lax(cfg: Config, outdir: str, tol: dict):
    space = build_space(cfg)
    f = build_field(cfg, space)
    p = cfg.number("hopf-lax", "p", 2.0)
    if not p > 1:
        raise ConfigError("[hopf-lax] p: must be > 1")
    L = PowerLagrangian(p)
    t_list = [float(tok) for tok in cfg.get("hopf-lax", "t_list", "0.05,0.1,0.2").split(",")]
    sigma = cfg.number("hopf-lax", "sigma", 1e-3)

    fields = {"f": f.values}
    evol = [f.values]
    labels = ["f"]
    for t in t_list:
        if t <= 0:
            raise ConfigError("[hopf-lax] t_list: entries must be positive")
        q = hopf_lax(f, t, L)
        fields[f"Q_{fmt(t)}"] = q.values
        evol.append(q.values)
        labels.append(f"Q_{fmt(t)}")
    table = np.column_stack([np.arange(space.size)] + evol)
    write_csv(os.path.join(outdir, "hopf_lax_fields.csv"), ["index"] + labels, table)

    s, t2 = (t_list[0], t_list[-1]) if len(t_list) > 1 else (t_list[0], t_list[0])
    defect = semigroup_defect(f, s, t2, L)
    residual = hj_residual(f, t_list[0], L, sigma)
    interior = slice(space.size // 5, space.size)  # clamp region excluded
    res_max = float(np.abs(residual.values[interior]).max())
    measured, bound = hopf_lax_lipschitz_bound(f, L, t_grid=t_list)
    h = space.mesh()

    write_csv(
        os.path.join(outdir, "hopf_lax_diagnostics.csv"),
        ["quantity", "value"],
        [
            ["semigroup_defect", defect],
            ["residual_interior_max", res_max],
            ["lipschitz_measured", measured],
            ["lipschitz_bound", bound],
            ["mesh", h],
            ["sigma", sigma],
        ],
    )
    write_csv(
        os.path.join(outdir, "summary.csv"),
        ["metric", "value"],
        [
            ["semigroup_defect", defect],
            ["residual_interior_max", res_max],
            ["lipschitz_measured", measured],
            ["lipschitz_bound", bound],
        ],
    )

    from .figures import save_field_evolution_figure

    save_field_evolution_figure(_positions(space), fields, os.path.join(outdir, "fig_hopf_lax.png"))

    # Exact sandwich and monotonicity invariants.
    lo = f.values.min()
    for t, q in zip(t_list, evol[1:]):
        if np.any(q > f.values + 1e-12) or np.any(q < lo - 1e-12):
            raise CheckFailure("hopf_lax_fields.csv (sandwich min f <= Q_t f <= f violated)")
    for qa, qb in zip(evol[1:], evol[2:]):
        if np.any(qb > qa + 1e-12):
            raise CheckFailure("hopf_lax_fields.csv (Q_t f not nonincreasing in t)")


def run_check_duality(cfg: Config, outdir: str, tol: dict):
    space = build_space(cfg)
    kernel = build_kernel(cfg, space)
    p_list = parse_p_list(cfg.get("duality", "p_list", "1,2,inf"), "[duality] p_list")
    max_pairs = cfg.number("duality", "max_pairs", 16, int)
    corpus_seed = cfg.number("duality", "corpus_seed", 3, int)
    gap_tol = tol["duality_gap"]

    pairs = default_pairs(space, max_pairs=max_pairs, seed=corpus_seed)
    corpus = build_corpus(space, seed=corpus_seed)
    diagnostic = corpus[0]

    reports = []
    pair_rows = []
    fn_rows = []
    for p in p_list:
        rep = duality_gap_report(
            kernel, p, pairs, corpus, gap_tol=gap_tol, diagnostic_field=diagnostic
        )
        reports.append(rep)
        label = "inf" if math.isinf(p) else fmt(p)
        for (x, y), margin in zip(rep.pairs, rep.pair_margins):
            pair_rows.append([label, x, y, space.dist[x, y], margin])
        fn_rows.append([label, rep.fn_margin_min, rep.reconstruction_error])

    emit_plot_data(reports, os.path.join(outdir, "constants.csv"))
    write_csv(os.path.join(outdir, "pair_margins.csv"), ["p", "x", "y", "d", "margin"], pair_rows)
    write_csv(
        os.path.join(outdir, "fn_margins.csv"),
        ["p", "min_margin", "reconstruction_error"],
        fn_rows,
    )
    summary = []
    for rep in reports:
        label = "inf" if math.isinf(rep.p) else fmt(rep.p)
        summary.append([f"K_C_p{label}", rep.K_C])
        summary.append([f"K_G_p{label}", rep.K_G])
        summary.append([f"gap_p{label}", rep.gap])
    write_csv(os.path.join(outdir, "summary.csv"), ["metric", "value"], summary)

    from .figures import save_constants_figure

    save_constants_figure(
        [{"p": r.p, "K_C": r.K_C, "K_G": r.K_G} for r in reports],
        os.path.join(outdir, "fig_constants.png"),
    )

    for rep in reports:
        if not rep.gap_ok:
            raise CheckFailure(
                f"constants.csv (|K_C-K_G| = {rep.gap:.4g} > {gap_tol} at p = {rep.p})"
            )


def run_simulate_heisenberg(cfg: Config, outdir: str, tol: dict):
    seed_raw = cfg.get("sde", "seed") or cfg.get("experiment", "seed")
    if seed_raw is None:
        raise ConfigError("[sde] seed: missing (sampled kernels need an explicit seed)")
    try:
        seed = int(seed_raw)
    except ValueError:
        raise ConfigError(f"[sde] seed: malformed integer {seed_raw!r}") from None
    start_raw = cfg.get("sde", "start", "0,0,0")
    try:
        coords = [float(tok) for tok in start_raw.split(",")]
    except ValueError:
        raise ConfigError(f"[sde] start: malformed coordinates {start_raw!r}") from None
    from .heisenberg import point

    try:
        start = point(*coords)
    except ValueError as exc:
        raise ConfigError(f"[sde] start: {exc}") from None

    sde = SDEConfig(
        t=cfg.number("sde", "t", 1.0),
        steps=cfg.number("sde", "steps", 1000, int),
        samples=cfg.number("sde", "samples", 10000, int),
        seed=seed,
        start=start,
    )
    cloud = sample_diffusion(sde)
    cap = cfg.number("sde", "export_cap", 100000, int)
    export = thin_cloud(cloud, cap) if cloud.size > cap else cloud
    export.to_csv(os.path.join(outdir, "cloud.csv"))

    mean_x = cloud.x.mean(axis=0)
    var_x = cloud.x.var(axis=0)
    mean_z = cloud.z.mean(axis=0)
    sem_z = cloud.z.std(axis=0) / math.sqrt(cloud.size)
    stats_rows = []
    for i in range(cloud.n):
        stats_rows.append([f"mean_x{i+1}", mean_x[i]])
        stats_rows.append([f"var_x{i+1}", var_x[i]])
    for col in range(cloud.z.shape[1]):
        stats_rows.append([f"mean_z{col}", mean_z[col]])
        stats_rows.append([f"sem_z{col}", sem_z[col]])
    write_csv(os.path.join(outdir, "stats.csv"), ["metric", "value"], stats_rows)
    write_csv(os.path.join(outdir, "summary.csv"), ["metric", "value"], stats_rows)

    from .figures import save_cloud_figure

    save_cloud_figure(cloud, os.path.join(outdir, "fig_cloud.png"))

    mean_tol = 4.0 * math.sqrt(sde.t / sde.samples)
    if np.any(np.abs(mean_x - start.x) > mean_tol):
        raise CheckFailure("stats.csv (horizontal mean outside 4 sigma of the start)")
    # 5% at large sample counts; widened to 4 standard errors of the
    # variance estimate when the run is small.
    var_tol = sde.t * max(0.05, 4.0 * math.sqrt(2.0 / sde.samples))
    if np.any(np.abs(var_x - sde.t) > var_tol):
        raise CheckFailure("stats.csv (horizontal variance outside tolerance)")
    if np.any(np.abs(mean_z - start.z) > 4.0 * sem_z + 1e-12):
        raise CheckFailure("stats.csv (area mean outside its confidence interval)")


def run_audit(cfg: Config, outdir: str, tol: dict):
    space = build_space(cfg)
    kernel = build_kernel(cfg, space)
    p_list = parse_p_list(cfg.get("duality", "p_list", "1,2,4,8,16,32"), "[duality] p_list")
    finite = [p for p in p_list if math.isfinite(p)]
    max_pairs = cfg.number("duality", "max_pairs", 10, int)
    corpus_seed = cfg.number("duality", "corpus_seed", 3, int)
    pairs = default_pairs(space, max_pairs=max_pairs, seed=corpus_seed)
    corpus = build_corpus(space, seed=corpus_seed)

    rows, K_C = monotonicity_audit(kernel, pairs, finite)
    header = ["x", "y", "d"] + [f"W_{fmt(p)}" for p in finite] + ["W_inf"]
    write_csv(os.path.join(outdir, "monotonicity.csv"), header, rows)

    ratios = parallel_map(lambda xy: pair_distance_ratio(kernel, xy[0], xy[1], 2.0), pairs)
    K2 = max(max(ratios), 1e-12)
    margins = g_infty_prime_margins(kernel, corpus, K2)
    write_csv(
        os.path.join(outdir, "g_infty_margins.csv"),
        ["index", "margin"],
        list(enumerate(margins)),
    )

    gluing_rows = []
    rng = np.random.default_rng(corpus_seed)
    for trial in range(3):
        mu = DiscreteMeasure(space, rng.dirichlet(np.ones(space.size)))
        nu = DiscreteMeasure(space, rng.dirichlet(np.ones(space.size)))
        lhs, glued, rhs = gluing_consistency(kernel, mu, nu, 2.0)
        gluing_rows.append([trial, lhs, glued, rhs])
    write_csv(os.path.join(outdir, "gluing.csv"), ["trial", "lhs", "glued_cost", "rhs"], gluing_rows)

    summary = [[f"K_C_p{fmt(p)}", k] for p, k in zip(finite, K_C)]
    summary.append(["g_infty_min_margin", float(margins.min())])
    write_csv(os.path.join(outdir, "summary.csv"), ["metric", "value"], summary)

    from .figures import save_monotonicity_figure

    save_monotonicity_figure(finite, rows, os.path.join(outdir, "fig_monotonicity.png"))

    for row in rows:
        values = row[3:]
        if any(b < a - tol["monotonicity"] for a, b in zip(values[:-1], values[1:-1])):
            raise CheckFailure("monotonicity.csv (W_p not nondecreasing in p)")
        if values[-2] > values[-1] + tol["monotonicity"]:
            raise CheckFailure("monotonicity.csv (largest W_p exceeds W_inf)")
    if float(margins.min()) < -tol["margin"]:
        # Candidate counterexample to the support-restricted estimate: flag it.
        raise CheckFailure("g_infty_margins.csv (support-restricted gradient margin negative)")
    for _, lhs, glued, rhs in gluing_rows:
        if abs(glued - rhs) > tol["gluing"] or lhs > glued + tol["gluing"]:
            raise CheckFailure("gluing.csv (gluing cost identity violated)")


RUNNERS = {
    "wasserstein": run_wasserstein,
    "hopf-lax": run_hopf_lax,
    "check-duality": run_check_duality,
    "simulate-heisenberg": run_simulate_heisenberg,
    "audit": run_audit,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wasser-dual",
        description="Transport-control vs gradient-estimate duality experiments",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI config path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.override, args.seed, args.out)
        declared = cfg.get("experiment", "command")
        if declared is not None and declared.strip() != args.command:
            raise ConfigError(
                f"[experiment] command: config says {declared!r}, invoked as {args.command!r}"
            )
        tolerances = resolved_tolerances(cfg)
        outdir = cfg.get("experiment", "out") or f"run-{args.command}"
        os.makedirs(outdir, exist_ok=True)
        write_manifest(cfg, outdir, args.command, tolerances)
        RUNNERS[args.command](cfg, outdir, tolerances)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CheckFailure as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

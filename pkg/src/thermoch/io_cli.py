"""Configuration parsing, experiment orchestration, deterministic output.

Config files are INI-style text (bracketed sections, ``key = value``, '#'
comments, UTF-8).  Data functions are restricted to a closed vocabulary:
constants, finite cosine-mode sums ``c0 + a*cos(k)`` (``cos(k1,k2)`` in 2-D),
and piecewise-constant-in-time schedules ``expr ; t1: expr ; ...``.

Validation failures carry exactly one assumption tag from {(2.5), (2.11),
(2.12), (2.13), (2.14)}; a-priori monitors name (4.31).  All floating-point
output is serialized with 17 significant digits so repeated runs are
byte-identical (summary.json additionally records wall time).

Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, elliptic, galerkin, potentials, spectral
from .errors import (
    CompatibilityError,
    ConfigurationError,
    MeanDomainError,
    NumericFailure,
    RunFailure,
)
from .galerkin import PhysicalParams, ProblemData, SourceTerm
from .potentials import PotentialSpec
from .spectral import BoxDomain, Coeffs, Field, SpectralBasis

DEFAULTS: dict[str, dict[str, str]] = {
    "domain": {"dim": "1", "lengths": "1.0", "grid": "64", "n_modes": "16"},
    "physics": {
        "gamma": "1.0",
        "a": "0.0",
        "b": "1.0",
        "kappa1": "1.0",
        "kappa2": "1.0",
        "lambda": "1.0",
    },
    "potential": {"kind": "regular", "c1": "2.0", "c2": "1.0", "eps": "0.1"},
    "data": {"phi0": "0.0", "w0": "0.0", "w1": "0.0", "f": "0.0", "g": "0.0"},
    "time": {"t_final": "1.0", "dt": "0.01", "scheme": "semi_implicit"},
    "experiment": {"kind": "simulate", "schedule": "", "trials": "20", "samples": "10000"},
    "output": {"directory": "out", "formats": "csv,json"},
}

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ConfigParseError(ValueError):
    """Malformed config text or expression (distinct from tagged validation)."""


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# data-expression vocabulary


_TERM_RE = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?:
            (?P<coef>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*
            (?:\*\s*cos\(\s*(?P<modes1>\d+(?:\s*,\s*\d+)*)\s*\))?
          | cos\(\s*(?P<modes2>\d+(?:\s*,\s*\d+)*)\s*\)
        )\s*""",
    re.VERBOSE,
)


def parse_field_expr(text: str, domain: BoxDomain) -> Field:
    """Parse ``c0 + a1*cos(k) + ...`` into a grid field."""
    text = text.strip()
    if not text:
        raise ConfigParseError("empty field expression")
    pos = 0
    constant = 0.0
    terms: list[tuple[tuple[int, ...], float]] = []
    first = True
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ConfigParseError(f"cannot parse field expression at '...{text[pos:]}'")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        if m.group("sign") is None and not first:
            raise ConfigParseError(f"missing '+'/'-' between terms in '{text}'")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        modes_txt = m.group("modes1") or m.group("modes2")
        if modes_txt is None:
            constant += sign * coef
        else:
            mode = tuple(int(k) for k in modes_txt.split(","))
            if len(mode) != domain.dim:
                raise ConfigParseError(
                    f"cos{mode} has {len(mode)} indices for a {domain.dim}-d domain"
                )
            terms.append((mode, sign * coef))
        pos = m.end()
        first = False
    return spectral.cosine_sum_field(domain, constant, terms)


def parse_source_expr(text: str, domain: BoxDomain) -> SourceTerm:
    """Parse a piecewise-constant-in-time schedule of field expressions."""
    times: list[float] = []
    fields: list[Field] = []
    for raw in text.split(";"):
        seg = raw.strip()
        if not seg:
            raise ConfigParseError(f"empty schedule segment in '{text}'")
        if ":" in seg:
            t_txt, expr = seg.split(":", 1)
            try:
                t0 = float(t_txt)
            except ValueError as exc:
                raise ConfigParseError(f"bad segment time '{t_txt.strip()}'") from exc
        else:
            t0, expr = 0.0, seg
        times.append(t0)
        fields.append(parse_field_expr(expr, domain))
    try:
        return SourceTerm(times=tuple(times), fields=tuple(fields))
    except ValueError as exc:
        raise ConfigParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; equality compares the canonical key-values."""

    sections: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]

    def get(self, section: str, key: str) -> str:
        for name, items in self.sections:
            if name == section:
                for k, v in items:
                    if k == key:
                        return v
        raise KeyError(f"[{section}] {key}")

    def as_dict(self) -> dict[str, dict[str, str]]:
        return {name: dict(items) for name, items in self.sections}

    # -- builders ----------------------------------------------------------

    def domain(self) -> BoxDomain:
        lengths = tuple(float(x) for x in self.get("domain", "lengths").split(","))
        return BoxDomain(lengths=lengths, grid_points_per_axis=int(self.get("domain", "grid")))

    def n_modes(self) -> int:
        return int(self.get("domain", "n_modes"))

    def basis(self) -> SpectralBasis:
        return spectral.build_basis(self.domain(), self.n_modes())

    def params(self) -> PhysicalParams:
        g = lambda k: float(self.get("physics", k))
        return PhysicalParams(
            gamma=g("gamma"), a=g("a"), b=g("b"),
            kappa1=g("kappa1"), kappa2=g("kappa2"), lambda_latent=g("lambda"),
        )

    def potential(self) -> PotentialSpec:
        kind = self.get("potential", "kind")
        if kind == "regular":
            return potentials.regular_potential()
        if kind == "logarithmic":
            return potentials.logarithmic_potential(float(self.get("potential", "c1")))
        if kind == "double_obstacle":
            return potentials.double_obstacle_potential(float(self.get("potential", "c2")))
        raise ConfigurationError(f"(2.11) unknown potential kind '{kind}'")

    def eps(self) -> float:
        return float(self.get("potential", "eps"))

    def problem_data(self) -> ProblemData:
        domain = self.domain()
        return ProblemData(
            params=self.params(),
            potential=self.potential(),
            eps=self.eps(),
            f=parse_source_expr(self.get("data", "f"), domain),
            g=parse_source_expr(self.get("data", "g"), domain),
            phi0=parse_field_expr(self.get("data", "phi0"), domain),
            w0=parse_field_expr(self.get("data", "w0"), domain),
            w1=parse_field_expr(self.get("data", "w1"), domain),
            t_final=float(self.get("time", "t_final")),
        )

    def dt(self) -> float:
        return float(self.get("time", "dt"))

    def scheme(self) -> str:
        return self.get("time", "scheme")

    def schedule(self) -> list[float]:
        text = self.get("experiment", "schedule").strip()
        return [float(x) for x in text.split(",")] if text else []

    def warnings(self) -> list[str]:
        out = []
        if float(self.get("physics", "a")) <= 0.0:
            out.append(
                "warning: a <= 0 accepted although the positivity assumption lists it"
            )
        return out


def _canonical_sections(raw: dict[str, dict[str, str]]) -> tuple:
    merged: dict[str, dict[str, str]] = {}
    for section, defaults in DEFAULTS.items():
        merged[section] = dict(defaults)
    for section, items in raw.items():
        name = section.strip().lower()
        if name not in merged:
            raise ConfigParseError(f"unknown section [{section}]")
        for key, value in items.items():
            k = key.strip().lower()
            if k not in merged[name]:
                raise ConfigParseError(f"unknown key '{key}' in section [{section}]")
            merged[name][k] = value.strip()
    return tuple(
        (name, tuple(sorted(merged[name].items()))) for name in sorted(merged)
    )


def _float_or_msg(text: str, messages: list[str], label: str, tag: str) -> Optional[float]:
    try:
        return float(text)
    except ValueError:
        messages.append(f"{tag} {label} must be a number, got '{text}'")
        return None


def validate_config(cfg: RunConfig) -> list[str]:
    """Collect every violated assumption, one tagged message per violation."""
    messages: list[str] = []

    for name in ("gamma", "b", "kappa1", "kappa2", "lambda"):
        value = _float_or_msg(cfg.get("physics", name), messages, f"physics.{name}", "(2.5)")
        if value is not None and not value > 0.0:
            messages.append(f"(2.5) {name} must be a positive constant, got {value}")
    _float_or_msg(cfg.get("physics", "a"), messages, "physics.a", "(2.5)")

    dim_txt = cfg.get("domain", "dim")
    try:
        dim = int(dim_txt)
    except ValueError:
        dim = -1
        messages.append(f"(2.12) dim must be an integer, got '{dim_txt}'")
    if dim != -1 and dim not in (1, 2):
        messages.append(f"(2.12) dim must be 1 or 2, got {dim}")
    try:
        lengths = [float(x) for x in cfg.get("domain", "lengths").split(",")]
    except ValueError:
        lengths = []
        messages.append(f"(2.12) cannot parse lengths '{cfg.get('domain', 'lengths')}'")
    if lengths and dim > 0 and len(lengths) != dim:
        messages.append(f"(2.12) dim = {dim} but {len(lengths)} lengths given")
    if any(L <= 0.0 for L in lengths):
        messages.append(f"(2.12) domain lengths must be positive, got {lengths}")
    try:
        grid = int(cfg.get("domain", "grid"))
        n_modes = int(cfg.get("domain", "n_modes"))
    except ValueError:
        grid, n_modes = 0, 0
        messages.append("(2.11) grid and n_modes must be integers")
    if grid and grid < 4:
        messages.append(f"(2.11) grid must be >= 4, got {grid}")
    if grid >= 4 and dim in (1, 2) and n_modes > (grid // 2 + 1) ** dim:
        messages.append(
            f"(2.11) n_modes = {n_modes} exceeds the capacity of a {grid}-point grid"
        )
    if n_modes < 1:
        messages.append(f"(2.11) n_modes must be >= 1, got {n_modes}")

    kind = cfg.get("potential", "kind")
    if kind not in ("regular", "logarithmic", "double_obstacle"):
        messages.append(f"(2.11) unknown potential kind '{kind}'")
    c1 = _float_or_msg(cfg.get("potential", "c1"), messages, "potential.c1", "(2.11)")
    c2 = _float_or_msg(cfg.get("potential", "c2"), messages, "potential.c2", "(2.11)")
    if kind == "logarithmic" and c1 is not None and not c1 > 1.0:
        messages.append(f"(2.11) logarithmic potential requires c1 > 1, got {c1}")
    if kind == "double_obstacle" and c2 is not None and not c2 > 0.0:
        messages.append(f"(2.11) double obstacle potential requires c2 > 0, got {c2}")
    eps = _float_or_msg(cfg.get("potential", "eps"), messages, "potential.eps", "(2.11)")
    if eps is not None and not 0.0 < eps < 1.0:
        messages.append(f"(2.11) eps must lie in (0, 1), got {eps}")

    t_final = _float_or_msg(cfg.get("time", "t_final"), messages, "time.t_final", "(2.11)")
    if t_final is not None and t_final < 0.0:
        messages.append(f"(2.11) t_final must be >= 0, got {t_final}")
    dt = _float_or_msg(cfg.get("time", "dt"), messages, "time.dt", "(2.11)")
    if dt is not None and not dt > 0.0:
        messages.append(f"(2.11) dt must be positive, got {dt}")
    if cfg.get("time", "scheme") not in galerkin.SCHEMES:
        messages.append(
            f"(2.11) scheme must be one of {galerkin.SCHEMES}, got '{cfg.get('time', 'scheme')}'"
        )

    if messages:
        return messages

    # Data expressions and the compatibility band need the parsed pieces.
    domain = cfg.domain()
    for key in ("phi0", "w0", "w1"):
        parse_field_expr(cfg.get("data", key), domain)
    f = parse_source_expr(cfg.get("data", "f"), domain)
    parse_source_expr(cfg.get("data", "g"), domain)
    if not math.isfinite(f.sup_norm()):
        messages.append("(2.13) source amplitude sup|f| must be finite")
        return messages
    try:
        data = cfg.problem_data()
    except ConfigurationError as exc:
        messages.extend(str(exc).splitlines())
        return messages
    try:
        galerkin.check_compatibility(data)
    except CompatibilityError as exc:
        messages.extend(str(exc).splitlines())
    return messages


def config_from_sections(raw: dict[str, dict[str, str]]) -> RunConfig:
    cfg = RunConfig(sections=_canonical_sections(raw))
    problems = validate_config(cfg)
    if problems:
        raise ConfigurationError("\n".join(problems))
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    """Read, canonicalize and validate a config file.

    Raises ConfigParseError (syntax, with line information where available)
    or ConfigurationError (tagged validation diagnostics).
    """
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), strict=True
    )
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from exc
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return config_from_sections(raw)


# ---------------------------------------------------------------------------
# verification suites (randomized sweeps; seeded and deterministic)


def bisection_resolvent(spec: PotentialSpec, eps: float, r, iters: int = 120):
    """Independent pure-bisection oracle for the resolvent equation."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    lo = np.minimum(r_arr, 0.0)
    hi = np.maximum(r_arr, 0.0)
    d_lo, d_hi = spec.domain
    if np.isfinite(d_lo):
        lo = np.maximum(lo, d_lo + 1e-15)
        hi = np.maximum(hi, d_lo + 1e-15)
    if np.isfinite(d_hi):
        lo = np.minimum(lo, d_hi - 1e-15)
        hi = np.minimum(hi, d_hi - 1e-15)

    def g(y):
        return y + eps * spec.beta_min_section(y) - r_arr

    g_lo, g_hi = g(lo), g(hi)
    y = np.where(g_lo >= 0.0, lo, np.where(g_hi <= 0.0, hi, 0.5 * (lo + hi)))
    active = (g_lo < 0.0) & (g_hi > 0.0)
    for _ in range(iters):
        gy = g(y)
        lo = np.where(active & (gy < 0.0), y, lo)
        hi = np.where(active & (gy > 0.0), y, hi)
        y = np.where(active, 0.5 * (lo + hi), y)
    return y[0] if np.ndim(r) == 0 else y.reshape(np.shape(r))


def potentials_suite(
    spec: PotentialSpec,
    eps_values: Sequence[float],
    n_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-10,
) -> tuple[list[str], dict[str, float]]:
    """Sampled regularization properties: monotone, 1/eps-Lipschitz, zero at 0,
    dominated by the minimal section, envelope sandwich, oracle agreement."""
    violations: list[str] = []
    d_lo, d_hi = spec.domain
    lo = d_lo - 1.5 if math.isfinite(d_lo) else -3.0
    hi = d_hi + 1.5 if math.isfinite(d_hi) else 3.0
    r = np.sort(np.concatenate([rng.uniform(lo, hi, n_samples), [0.0]]))
    interior = (r > d_lo + 1e-9) & (r < d_hi - 1e-9) if math.isfinite(d_hi) else np.ones(r.shape, bool)

    metrics = {"monotone_defect": 0.0, "lipschitz_excess": 0.0, "zero_at_zero": 0.0,
               "domination_excess": 0.0, "envelope_defect": 0.0, "oracle_gap": 0.0}
    for eps in eps_values:
        y = potentials.yosida(spec, eps, r)
        dy, dr = np.diff(y), np.diff(r)
        metrics["monotone_defect"] = max(metrics["monotone_defect"], float((-dy).max(initial=0.0)))
        metrics["lipschitz_excess"] = max(
            metrics["lipschitz_excess"], float((np.abs(dy) - dr / eps).max(initial=0.0))
        )
        metrics["zero_at_zero"] = max(
            metrics["zero_at_zero"], abs(float(potentials.yosida(spec, eps, 0.0)))
        )
        beta0 = spec.beta_min_section(r[interior])
        metrics["domination_excess"] = max(
            metrics["domination_excess"],
            float((np.abs(y[interior]) - np.abs(beta0)).max(initial=0.0)),
        )
        prim = potentials.yosida_primitive(spec, eps, r)
        bh = spec.beta_hat(r)
        defect = max(
            float((-prim).max(initial=0.0)),
            float(np.where(np.isfinite(bh), prim - bh, -np.inf).max(initial=0.0)),
        )
        metrics["envelope_defect"] = max(metrics["envelope_defect"], defect)
        gap = np.abs(
            potentials.resolvent(spec, eps, r) - bisection_resolvent(spec, eps, r)
        )
        metrics["oracle_gap"] = max(metrics["oracle_gap"], float(gap.max()))

    checks = {
        "monotone_defect": "yosida not monotone",
        "lipschitz_excess": "yosida exceeds the 1/eps Lipschitz bound",
        "zero_at_zero": "yosida(0) != 0",
        "domination_excess": "|yosida| exceeds |beta_min_section| on the interior",
        "envelope_defect": "primitive leaves [0, beta_hat]",
        "oracle_gap": "resolvent disagrees with the bisection oracle",
    }
    for key, text in checks.items():
        if metrics[key] > tol:
            violations.append(f"{text} (defect {metrics[key]:.3e})")

    # empirical offset constant of the interior lower bound around r0 = 0
    metrics["interior_bound_C0"] = potentials.interior_bound_constants(
        spec, 0.0, 0.0, 0.25, eps_values, r
    ).C0
    return violations, metrics


def spectral_suite(
    basis: SpectralBasis, rng: np.random.Generator, n_vectors: int = 8
) -> tuple[list[str], dict[str, float]]:
    """Orthonormality of the sampled basis and the inverse-Laplacian identities."""
    violations: list[str] = []
    E, w = basis.eigenfunction_values, basis.quadrature_weight
    gram = (E * w) @ E.T - np.eye(basis.n)
    metrics = {"orthonormality": float(np.abs(gram).max()),
               "symmetry": 0.0, "energy_identity": 0.0, "time_identity": 0.0}

    def random_zero_mean():
        vals = rng.standard_normal(basis.n)
        vals[0] = 0.0
        norm = np.linalg.norm(vals)
        return Coeffs(vals / norm if norm > 0 else vals, basis)

    for _ in range(n_vectors):
        psi, zeta = random_zero_mean(), random_zero_mean()
        n_psi, n_zeta = spectral.solve_poisson(psi), spectral.solve_poisson(zeta)
        metrics["symmetry"] = max(
            metrics["symmetry"],
            abs(spectral.inner(psi, n_zeta) - spectral.inner(zeta, n_psi)),
        )
        metrics["energy_identity"] = max(
            metrics["energy_identity"],
            abs(spectral.inner(psi, n_psi) - spectral.norm_Hm1(psi) ** 2),
        )

    # discrete path: telescoping midpoint quadrature of <v', N v> is exact
    path = [random_zero_mean() for _ in range(9)]
    acc = 0.0
    for a, b in zip(path, path[1:]):
        mid = 0.5 * (a + b)
        acc += spectral.inner(b - a, spectral.solve_poisson(mid))
    metrics["time_identity"] = abs(
        acc - 0.5 * (spectral.norm_Hm1(path[-1]) ** 2 - spectral.norm_Hm1(path[0]) ** 2)
    )

    try:
        spectral.solve_poisson(Coeffs(np.ones(basis.n), basis))
        violations.append("nonzero-mean operand was not rejected")
    except MeanDomainError:
        pass

    if metrics["orthonormality"] > 1e-10:
        violations.append(f"orthonormality residual {metrics['orthonormality']:.3e}")
    for key in ("symmetry", "energy_identity", "time_identity"):
        if metrics[key] > 1e-12:
            violations.append(f"{key} residual {metrics[key]:.3e}")
    return violations, metrics


def elliptic_suite(
    basis: SpectralBasis,
    spec: PotentialSpec,
    eps: float,
    rng: np.random.Generator,
    trials: int = 20,
) -> tuple[list[str], dict[str, float]]:
    """Constant-data equality, randomized 6-norm bound, two-start agreement."""
    violations: list[str] = []
    domain = basis.domain
    metrics = {"const_gap": 0.0, "l6_excess": 0.0, "start_gap": 0.0, "residual": 0.0}

    problem = elliptic.EllipticProblem(basis, spec, eps, spectral.constant_field(2.0, domain))
    u, res = elliptic.solve_elliptic(problem)
    lhs, rhs, _ = elliptic.check_L6_bound(problem, u)
    metrics["const_gap"] = abs(lhs - rhs)
    metrics["residual"] = res
    if metrics["const_gap"] > 1e-12 * max(1.0, rhs):
        violations.append(f"constant-data 6-norms differ by {metrics['const_gap']:.3e}")

    n_active = min(basis.n, 8)
    for _ in range(trials):
        vals = np.zeros(basis.n)
        vals[:n_active] = rng.standard_normal(n_active)
        h = spectral.to_field(Coeffs(vals, basis))
        problem = elliptic.EllipticProblem(basis, spec, eps, h)
        u, res = elliptic.solve_elliptic(problem)
        metrics["residual"] = max(metrics["residual"], res)
        lhs, rhs, ok = elliptic.check_L6_bound(problem, u)
        metrics["l6_excess"] = max(metrics["l6_excess"], lhs - rhs * (1.0 + 1e-6))
        if not ok:
            violations.append(f"6-norm bound violated: {lhs:.12g} > {rhs:.12g}")
        u_alt, _ = elliptic.solve_elliptic(problem, start=spectral.to_coeffs(h, basis))
        gap = spectral.norm_L2(u - u_alt)
        metrics["start_gap"] = max(metrics["start_gap"], gap)
        if gap > 1e-8:
            violations.append(f"Newton starts disagree by {gap:.3e}")
    return violations, metrics


# ---------------------------------------------------------------------------
# artifact writers


def write_trajectory_csv(path: Path, trajectory: analysis.Trajectory) -> None:
    norm_keys = galerkin.DiagnosticsRecord.NORM_KEYS
    header = (
        "t,mean_phi,mean_phi_exact,energy,dissipation_mu,dissipation_w,source_power,"
        + ",".join(norm_keys)
    )
    lines = [header]
    for _, rec in trajectory:
        cells = [
            rec.t, rec.mean_phi, rec.mean_phi_exact, rec.energy,
            rec.dissipation_mu, rec.dissipation_w, rec.source_power,
        ] + [rec.norms[k] for k in norm_keys]
        lines.append(",".join(format_float(x) for x in cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_table_csv(path: Path, rows: list[dict[str, float]]) -> None:
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    lines = [",".join(keys)]
    for row in rows:
        lines.append(
            ",".join(format_float(row[k]) if k in row else "" for k in keys)
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_summary_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


# ---------------------------------------------------------------------------
# experiment drivers


def _prepare_outdir(cfg: Optional[RunConfig], override: Optional[str]) -> Path:
    directory = override or (cfg.get("output", "directory") if cfg else "out")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulate(cfg: RunConfig, outdir: Path, quiet: bool) -> int:
    started = time.perf_counter()
    data = cfg.problem_data()
    basis = cfg.basis()
    failure = None
    try:
        trajectory = galerkin.simulate(data, basis, cfg.dt(), cfg.scheme())
    except RunFailure as exc:
        # preserve partial artifacts before reporting the numeric failure
        trajectory = exc.trajectory
        failure = str(exc)
    report = analysis.apriori_monitor(trajectory, data)
    mean_report = analysis.mean_law_check(trajectory, data)
    write_trajectory_csv(outdir / "trajectory.csv", trajectory)
    write_summary_json(
        outdir / "summary.json",
        {
            "config": cfg.as_dict(),
            "experiment": "simulate",
            "n_records": len(trajectory),
            "violations": report.violations + ([failure] if failure else []),
            "realized_norms": report.realized,
            "mean_law": {
                "max_error_discrete": mean_report.max_error_discrete,
                "max_error_continuum": mean_report.max_error_continuum,
            },
            "energy_residual": analysis.energy_identity_residual(trajectory, data),
            "warnings": cfg.warnings(),
            "wall_time_s": time.perf_counter() - started,
        },
    )
    if failure is not None:
        print(f"numeric failure: {failure}", file=sys.stderr)
        return EXIT_NUMERIC
    if not quiet:
        print(f"simulate: {len(trajectory)} records -> {outdir}")
    return EXIT_OK


def run_verify(cfg: RunConfig, target: str, outdir: Path, quiet: bool, seed: int) -> int:
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    trials = int(cfg.get("experiment", "trials"))
    samples = int(cfg.get("experiment", "samples"))
    if target == "potentials":
        eps_values = cfg.schedule() or [0.5, 0.1, 0.02]
        violations, metrics = potentials_suite(
            cfg.potential(), eps_values, samples, rng
        )
    elif target == "spectral":
        violations, metrics = spectral_suite(cfg.basis(), rng)
    elif target == "elliptic":
        violations, metrics = elliptic_suite(
            cfg.basis(), cfg.potential(), cfg.eps(), rng, trials
        )
    else:
        raise ConfigurationError(f"(2.11) unknown verify target '{target}'")
    write_summary_json(
        outdir / "summary.json",
        {
            "config": cfg.as_dict(),
            "experiment": f"verify {target}",
            "violations": violations,
            "metrics": metrics,
            "seed": seed,
            "wall_time_s": time.perf_counter() - started,
        },
    )
    if not quiet:
        status = "ok" if not violations else f"{len(violations)} violations"
        print(f"verify {target}: {status} -> {outdir}")
    return EXIT_OK if not violations else EXIT_NUMERIC


def run_converge(cfg: RunConfig, vary: str, outdir: Path, quiet: bool) -> int:
    started = time.perf_counter()
    kind = {"modes": analysis.MODE_COUNT, "eps": analysis.EPSILON, "dt": analysis.TIME_STEP}[vary]
    schedule = cfg.schedule()
    if not schedule:
        defaults = {
            "modes": [4.0, 8.0, 16.0, 32.0],
            "eps": [0.2, 0.1, 0.05, 0.025],
            "dt": [1e-2, 5e-3, 2.5e-3],
        }
        schedule = defaults[vary]
    rows = analysis.convergence_study(
        kind, schedule, cfg.problem_data(), cfg.basis(), cfg.dt(), cfg.scheme()
    )
    write_table_csv(outdir / "convergence.csv", rows)
    write_summary_json(
        outdir / "summary.json",
        {
            "config": cfg.as_dict(),
            "experiment": f"converge {vary}",
            "schedule": schedule,
            "rows": rows,
            "wall_time_s": time.perf_counter() - started,
        },
    )
    if not quiet:
        print(f"converge {vary}: {len(rows)} rows -> {outdir}")
    return EXIT_OK


def run_depend(cfg1: RunConfig, cfg2: RunConfig, outdir: Path, quiet: bool) -> int:
    started = time.perf_counter()
    d1, d2 = cfg1.as_dict(), cfg2.as_dict()
    for section, keys in (
        ("domain", None), ("physics", None), ("potential", None), ("time", None),
        ("data", ("phi0", "w0", "w1")),
    ):
        for key in keys or d1[section]:
            if d1[section][key] != d2[section][key]:
                raise ConfigurationError(
                    f"(2.11) dependence pair must share [{section}] {key}: "
                    f"'{d1[section][key]}' vs '{d2[section][key]}'"
                )
    data1 = cfg1.problem_data()
    # Re-anchor on the first config's potential object so identity comparison
    # reflects the required shared structure.
    data2 = dataclasses.replace(cfg2.problem_data(), potential=data1.potential)
    report = analysis.dependence_experiment(
        data1, data2, cfg1.basis(), cfg1.dt(), cfg1.scheme()
    )
    rows = [
        {"lhs": report.lhs, "empirical_K2": report.empirical_K2,
         **{f"lhs_{k}": v for k, v in report.lhs_components.items()},
         **{f"rhs_{k}": v for k, v in report.rhs_components.items()}}
    ]
    write_table_csv(outdir / "dependence.csv", rows)
    write_summary_json(
        outdir / "summary.json",
        {
            "config": cfg1.as_dict(),
            "config_pair": cfg2.as_dict(),
            "experiment": "depend",
            "lhs": report.lhs,
            "lhs_components": report.lhs_components,
            "rhs_components": report.rhs_components,
            "empirical_K2": report.empirical_K2,
            "xi_L1_runs": list(report.xi_L1_runs),
            "wall_time_s": time.perf_counter() - started,
        },
    )
    if not quiet:
        print(f"depend: lhs = {report.lhs:.6g} -> {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# command line


def _unsigned(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit value, got {text}")
    return value


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common.add_argument(
        "--output-dir", dest="output_dir",
        **(kw or {"default": None}), help="override [output] directory",
    )
    common.add_argument(
        "--quiet", action="store_true",
        **(kw or {"default": False}), help="suppress progress output",
    )
    common.add_argument(
        "--seed", type=_unsigned, **(kw or {"default": 0}), help="seed for randomized sweeps"
    )
    return common


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermoch",
        description="Spectral simulator and verification harness for a "
        "conserved phase-field system with mass source and thermal memory.",
        parents=[_global_flags(suppress=False)],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    flags = [_global_flags(suppress=True)]

    p = sub.add_parser("simulate", help="run a single simulation", parents=flags)
    p.add_argument("config")

    p = sub.add_parser("verify", help="run a randomized verification suite", parents=flags)
    p.add_argument("target", choices=["potentials", "spectral", "elliptic"])
    p.add_argument("config")

    p = sub.add_parser("converge", help="refinement study", parents=flags)
    p.add_argument("vary", choices=["modes", "eps", "dt"])
    p.add_argument("config")

    p = sub.add_parser("depend", help="two-run continuous-dependence experiment", parents=flags)
    p.add_argument("config")
    p.add_argument("config2")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        outdir = _prepare_outdir(cfg, args.output_dir)
        if args.command == "simulate":
            return run_simulate(cfg, outdir, args.quiet)
        if args.command == "verify":
            return run_verify(cfg, args.target, outdir, args.quiet, args.seed)
        if args.command == "converge":
            return run_converge(cfg, args.vary, outdir, args.quiet)
        cfg2 = parse_config(args.config2)
        return run_depend(cfg, cfg2, outdir, args.quiet)
    except (ConfigParseError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

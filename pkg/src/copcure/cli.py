"""Command-line front end: fit / simulate / mc / tau / lrt / bootstrap.

Data come in as CSV with a ``time,status`` header (status 1 = event,
0 = censored, times strictly positive).  Reports are JSON by default and
round-trip losslessly through their own parser; ``--format table`` prints
a compact human-readable layout instead.  Exit codes: 0 ok, 1 usage,
2 data, 3 numerical failure.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass

import click
import numpy as np

from .copulas import CopulaFamily, CopulaSpec, kendall_tau, theta_from_tau
from .cure_model import Dataset, ModelSpec
from .errors import CopcureError, DataError, DomainError, ParameterError, UsageError
from .estimation import FitOptions, FitResult, StdErrors, fit, standard_errors
from .inference import aic, bootstrap_median_diff, lrt_vs_independence
from .marginals import PARAM_NAMES, MarginalFamily, MarginalParams, MarginalSpec, median
from .simulation import Scenario, censoring_rate, generate_dataset, make_scenario, run_mc

PARAM_ORDER_NOTES = {
    "lognormal": "lognormal parameters are reported as (sigma, mu) of log(t), in that order",
    "gamma": "gamma parameters are reported as (shape, scale), shape first",
}


# ---------------------------------------------------------------------------
# input handling
# ---------------------------------------------------------------------------

def read_dataset_csv(path: str, scale: float = 1.0) -> Dataset:
    """Parse a time,status CSV; malformed rows are reported by line number."""
    times = []
    status = []
    with open(path, "r", encoding="utf-8-sig") as fh:
        header = fh.readline()
        cols = [c.strip().lower() for c in header.strip().split(",")]
        if cols[:2] != ["time", "status"]:
            raise DataError(f"{path}: expected header 'time,status', got {header.strip()!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DataError(f"{path}: line {lineno}: expected 'time,status'")
            try:
                t = float(parts[0])
                d = int(parts[1])
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: could not parse {line!r} as time,status"
                ) from None
            if d not in (0, 1):
                raise DataError(f"{path}: line {lineno}: status must be 0 or 1, got {d}")
            if not math.isfinite(t) or t <= 0.0:
                raise DataError(f"{path}: line {lineno}: time must be finite and > 0, got {t}")
            times.append(t)
            status.append(d)
    if not times:
        raise DataError(f"{path}: no data rows")
    data = Dataset(np.asarray(times), np.asarray(status))
    if scale != 1.0:
        data = data.scaled(scale)
    return data


def parse_flat_toml(path: str) -> dict:
    """Minimal parser for flat key = value scenario files.

    Supports numbers, strings, booleans and two-element number arrays;
    this is the full scenario schema, so a TOML dependency is not needed.
    """
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if not key:
                raise DataError(f"{path}: line {lineno}: empty key")
            out[key] = _parse_toml_value(val, path, lineno)
    return out


def _parse_toml_value(val: str, path: str, lineno: int):
    if val.startswith("[") and val.endswith("]"):
        items = [v.strip() for v in val[1:-1].split(",") if v.strip()]
        return [_parse_toml_value(v, path, lineno) for v in items]
    if val.startswith('"') and val.endswith('"') and len(val) >= 2:
        return val[1:-1]
    if val.startswith("'") and val.endswith("'") and len(val) >= 2:
        return val[1:-1]
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        raise DataError(f"{path}: line {lineno}: cannot parse value {val!r}") from None


def scenario_from_config(cfg: dict, seed_override: int | None = None) -> Scenario:
    required = ["copula", "latency_family", "latency_params",
                "censoring_family", "censoring_params", "p", "n"]
    missing = [k for k in required if k not in cfg]
    if missing:
        raise UsageError(f"scenario config missing keys: {', '.join(missing)}")
    if "theta" in cfg and "tau" in cfg:
        raise UsageError("scenario config: give exactly one of 'theta' or 'tau'")
    lat = MarginalSpec(MarginalFamily.parse(cfg["latency_family"]))
    cen = MarginalSpec(MarginalFamily.parse(cfg["censoring_family"]))
    lp = cfg["latency_params"]
    cp = cfg["censoring_params"]
    for name, val in (("latency_params", lp), ("censoring_params", cp)):
        if not isinstance(val, list) or len(val) != 2:
            raise UsageError(f"scenario config: {name} must be a two-element array")
    n = int(cfg["n"])
    if n < 2:
        raise UsageError("scenario config: n must be at least 2")
    copula = CopulaFamily.parse(cfg["copula"])
    kwargs = {}
    if copula is not CopulaFamily.INDEPENDENCE:
        if "theta" not in cfg and "tau" not in cfg:
            raise UsageError("scenario config: give one of 'theta' or 'tau'")
        kwargs["theta"] = cfg.get("theta")
        kwargs["tau"] = cfg.get("tau")
    return make_scenario(
        copula,
        lat,
        cen,
        MarginalParams(float(lp[0]), float(lp[1])),
        MarginalParams(float(cp[0]), float(cp[1])),
        p=float(cfg["p"]),
        n=n,
        seed=int(cfg.get("seed", 0)) if seed_override is None else seed_override,
        truncate_upper_tail=cfg.get("truncate_upper_tail"),
        **kwargs,
    )


def resolve_truncation(arg: str, data: Dataset) -> float | None:
    if arg == "none":
        return None
    if arg == "last-uncensored":
        return data.largest_uncensored()
    try:
        val = float(arg)
    except ValueError:
        raise UsageError(
            f"--truncate must be 'none', 'last-uncensored' or a number, got {arg!r}"
        ) from None
    if val <= 0:
        raise UsageError("--truncate value must be > 0")
    return val


# ---------------------------------------------------------------------------
# fit report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Serializable summary of one model fit; round-trips through JSON."""

    copula: str
    latency_family: str
    latency_truncation: float | None
    censoring_family: str
    scale: float
    seed: int
    n_records: int
    data_checksum: str
    converged: bool
    n_starts: int
    n_converged: int
    best_start_index: int
    underflow_count: int
    k: int
    theta_hat: float | None
    tau_hat: float | None
    p_hat: float | None
    latency_params: list | None
    censoring_params: list | None
    se: dict | None
    med_u: float | None
    neg_loglik: float
    aic: float | None
    param_names: dict
    notes: list

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FitReport":
        raw = json.loads(text)
        return cls(**raw)

    def to_fit_result(self) -> FitResult:
        """Rebuild the minimal FitResult needed by the inference helpers."""
        model = ModelSpec(
            CopulaFamily.parse(self.copula),
            MarginalSpec(MarginalFamily.parse(self.latency_family), self.latency_truncation),
            MarginalSpec(MarginalFamily.parse(self.censoring_family)),
        )
        from .cure_model import ParamVector

        alpha = None
        if self.p_hat is not None:
            alpha = ParamVector(
                theta=self.theta_hat,
                latency_params=MarginalParams(*self.latency_params),
                censoring_params=MarginalParams(*self.censoring_params),
                p=self.p_hat,
            )
        return FitResult(
            alpha_hat=alpha,
            tau_hat=self.tau_hat,
            loglik=-self.neg_loglik,
            converged=self.converged,
            n_starts=self.n_starts,
            n_converged=self.n_converged,
            best_start_index=self.best_start_index,
            underflow_count=self.underflow_count,
            model=model,
            data_fingerprint=(self.n_records, self.data_checksum),
        )


def build_fit_report(
    result: FitResult, se: StdErrors | None, scale: float, seed: int
) -> FitReport:
    model = result.model
    n, checksum = result.data_fingerprint
    notes = [
        note
        for fam, note in PARAM_ORDER_NOTES.items()
        if fam in (model.latency.family.value, model.censoring.family.value)
    ]
    alpha = result.alpha_hat
    se_dict = None
    if se is not None:
        se_dict = {
            "available": se.available,
            "theta": se.theta,
            "tau": se.tau,
            "p": se.p,
            "latency": list(se.latency) if se.latency else None,
            "censoring": list(se.censoring) if se.censoring else None,
            "min_eigenvalue": se.min_eigenvalue,
        }
    return FitReport(
        copula=model.copula.value,
        latency_family=model.latency.family.value,
        latency_truncation=model.latency.truncation,
        censoring_family=model.censoring.family.value,
        scale=scale,
        seed=seed,
        n_records=n,
        data_checksum=checksum,
        converged=result.converged,
        n_starts=result.n_starts,
        n_converged=result.n_converged,
        best_start_index=result.best_start_index,
        underflow_count=result.underflow_count,
        k=model.n_free_params,
        theta_hat=None if alpha is None else alpha.theta,
        tau_hat=result.tau_hat,
        p_hat=None if alpha is None else alpha.p,
        latency_params=None if alpha is None else [alpha.latency_params.a, alpha.latency_params.b],
        censoring_params=None
        if alpha is None
        else [alpha.censoring_params.a, alpha.censoring_params.b],
        se=se_dict,
        med_u=None if alpha is None else median(model.latency, alpha.latency_params),
        neg_loglik=-result.loglik,
        aic=aic(result) if result.converged else None,
        param_names={
            "latency": list(PARAM_NAMES[model.latency.family]),
            "censoring": list(PARAM_NAMES[model.censoring.family]),
        },
        notes=notes,
    )


def _fmt(x, width=9, prec=4):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return " " * (width - 1) + "-"
    return f"{x:{width}.{prec}f}"


def render_fit_table(r: FitReport) -> str:
    cols = ["tau_K", "p", "theta_U1", "theta_U2", "theta_C1", "theta_C2",
            "Med_U", "-logLik", "AIC"]
    vals = [
        r.tau_hat,
        r.p_hat,
        r.latency_params[0] if r.latency_params else None,
        r.latency_params[1] if r.latency_params else None,
        r.censoring_params[0] if r.censoring_params else None,
        r.censoring_params[1] if r.censoring_params else None,
        r.med_u,
        r.neg_loglik,
        r.aic,
    ]
    se_row = [None] * 9
    if r.se and r.se["available"]:
        se_row[0] = r.se["tau"]
        se_row[1] = r.se["p"]
        se_row[2], se_row[3] = r.se["latency"]
        se_row[4], se_row[5] = r.se["censoring"]
    lines = [
        f"model: {r.copula} copula, {r.latency_family} latency"
        + (f" (truncated at {r.latency_truncation:g})" if r.latency_truncation else "")
        + f", {r.censoring_family} censoring",
        f"data: n={r.n_records} checksum={r.data_checksum} scale={r.scale:g} seed={r.seed}",
        f"converged: {r.converged} ({r.n_converged}/{r.n_starts} starts, best index "
        f"{r.best_start_index}, underflow count {r.underflow_count})",
        "  ".join(f"{c:>9s}" for c in cols),
        "  ".join(_fmt(v) for v in vals),
        "  ".join(f"({_fmt(s, 7)})" if s is not None else " " * 9 for s in se_row),
    ]
    lines.extend(f"note: {n}" for n in r.notes)
    return "\n".join(lines)


def render_mc_table(summary) -> str:
    keys = ["tau", "p", "theta_u1", "theta_u2", "theta_c1", "theta_c2"]
    head = "        " + "  ".join(f"{k:>9s}" for k in keys)
    rows = []
    for stat in ("bias", "sd", "sd_hat", "rmse"):
        vals = [getattr(summary.params[k], stat) for k in keys]
        label = {"bias": "Bias", "sd": "SD", "sd_hat": "SD_hat", "rmse": "RMSE"}[stat]
        rows.append(f"{label:<8s}" + "  ".join(_fmt(v) for v in vals))
    tail = (
        f"replications: total={summary.n_total} converged={summary.n_converged} "
        f"trimmed={summary.n_trimmed} retained={summary.n_retained}"
    )
    cens = f"mean censoring rate: {summary.censoring_rate_mean:.4f}"
    out = [head, *rows, tail, cens]
    if summary.unreliable:
        out.append("WARNING: more than half of the replications failed to converge")
    return "\n".join(out)


def _mc_summary_dict(summary) -> dict:
    return {
        "params": {
            k: dataclasses.asdict(v) for k, v in summary.params.items()
        },
        "n_total": summary.n_total,
        "n_converged": summary.n_converged,
        "n_trimmed": summary.n_trimmed,
        "n_retained": summary.n_retained,
        "censoring_rate_mean": summary.censoring_rate_mean,
        "unreliable": summary.unreliable,
        "true_values": summary.true_values,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group(name="copcure")
def cli():
    """Mixture cure models under copula-dependent censoring."""


def _write_out(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


_COPULA_CHOICES = [c.value for c in CopulaFamily]
_MARGINAL_CHOICES = [m.value for m in MarginalFamily]


@cli.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--copula", required=True)
@click.option("--latency", required=True)
@click.option("--censoring", required=True)
@click.option("--truncate", default="none", show_default=True,
              help="none | last-uncensored | <positive number>")
@click.option("--scale", default=1.0, show_default=True,
              help="divide all times by this factor before fitting")
@click.option("--seed", default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json")
@click.option("--out", default=None, type=click.Path())
def cmd_fit(data_path, copula, latency, censoring, truncate, scale, seed, fmt, out):
    """Fit the cure model to a time,status CSV and emit a report."""
    data = read_dataset_csv(data_path, scale=scale)
    model = ModelSpec(
        CopulaFamily.parse(copula),
        MarginalSpec(MarginalFamily.parse(latency), resolve_truncation(truncate, data)),
        MarginalSpec(MarginalFamily.parse(censoring)),
    )
    data.validate_for_model(model)
    opts = FitOptions(seed=seed)
    result = fit(data, model, opts)
    se = standard_errors(result, data, opts) if result.converged else None
    report = build_fit_report(result, se, scale, seed)
    _write_out(report.to_json() if fmt == "json" else render_fit_table(report), out)


@cli.command("simulate")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int, help="override the scenario seed")
@click.option("--emit-latent", is_flag=True, default=False)
def cmd_simulate(scenario_path, out, seed, emit_latent):
    """Generate a dataset from a scenario config; writes CSV plus a sidecar
    echo of the resolved scenario."""
    cfg = parse_flat_toml(scenario_path)
    scn = scenario_from_config(cfg, seed_override=seed)
    if emit_latent:
        data, latent = generate_dataset(scn, return_latent=True)
    else:
        data, latent = generate_dataset(scn), None
    with open(out, "w", encoding="utf-8") as fh:
        if latent is None:
            fh.write("time,status\n")
            for t, d in zip(data.y, data.delta):
                fh.write(f"{float(t)!r},{int(d)}\n")
        else:
            fh.write("time,status,t_latent,c_latent,u_latent,v_latent\n")
            for i in range(len(data)):
                tl = "inf" if math.isinf(latent.t[i]) else repr(float(latent.t[i]))
                fh.write(
                    f"{float(data.y[i])!r},{int(data.delta[i])},{tl},"
                    f"{float(latent.c[i])!r},{float(latent.u[i])!r},{float(latent.v[i])!r}\n"
                )
    sidecar = {
        "copula": scn.model.copula.value,
        "theta": scn.true_alpha.theta,
        "tau": scn.tau_true,
        "latency_family": scn.model.latency.family.value,
        "latency_truncation": scn.model.latency.truncation,
        "latency_params": [scn.true_alpha.latency_params.a, scn.true_alpha.latency_params.b],
        "censoring_family": scn.model.censoring.family.value,
        "censoring_params": [scn.true_alpha.censoring_params.a, scn.true_alpha.censoring_params.b],
        "p": scn.true_alpha.p,
        "n": scn.n,
        "seed": scn.seed,
    }
    with open(out + ".scenario.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {len(data)} records to {out}")


@cli.command("mc")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--reps", required=True, type=int)
@click.option("--fit-copula", default=None, help="fit a different copula than the generator")
@click.option("--threads", default=1, show_default=True)
@click.option("--seed", default=None, type=int, help="override the scenario seed")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
@click.option("--out", default=None, type=click.Path())
def cmd_mc(scenario_path, reps, fit_copula, threads, seed, fmt, out):
    """Run the replication study for a scenario and print the
    Bias/SD/SD_hat/RMSE table."""
    cfg = parse_flat_toml(scenario_path)
    scn = scenario_from_config(cfg, seed_override=seed)
    fit_model = None
    if fit_copula is not None:
        fit_model = ModelSpec(
            CopulaFamily.parse(fit_copula), scn.model.latency, scn.model.censoring
        )
    summary = run_mc(scn, reps, FitOptions(seed=scn.seed), fit_model=fit_model, threads=threads)
    if fmt == "json":
        _write_out(json.dumps(_mc_summary_dict(summary), indent=2, sort_keys=True), out)
    else:
        _write_out(render_mc_table(summary), out)


@cli.command("tau")
@click.option("--family", required=True)
@click.option("--theta", default=None, type=float)
@click.option("--tau", "tau_val", default=None, type=float)
def cmd_tau(family, theta, tau_val):
    """Convert between the association parameter and Kendall's tau."""
    fam = CopulaFamily.parse(family)
    if (theta is None) == (tau_val is None):
        raise UsageError("give exactly one of --theta or --tau")
    if theta is not None:
        out = {"family": fam.value, "theta": theta, "tau": kendall_tau(CopulaSpec(fam, theta))}
    else:
        th = theta_from_tau(fam, tau_val)
        out = {"family": fam.value, "theta": th, "tau": tau_val}
    click.echo(json.dumps(out, sort_keys=True))


@cli.command("lrt")
@click.option("--fit-indep", "indep_path", required=True, type=click.Path(exists=True))
@click.option("--fit-copula", "copula_path", required=True, type=click.Path(exists=True))
def cmd_lrt(indep_path, copula_path):
    """Likelihood-ratio test from two fit reports on the same data."""
    with open(indep_path, encoding="utf-8") as fh:
        rep_i = FitReport.from_json(fh.read())
    with open(copula_path, encoding="utf-8") as fh:
        rep_c = FitReport.from_json(fh.read())
    res = lrt_vs_independence(rep_i.to_fit_result(), rep_c.to_fit_result())
    click.echo(
        json.dumps(
            {
                "lambda": res.lam,
                "df": res.df,
                "critical_value_95": res.critical_value_95,
                "reject": res.reject,
                "boundary_caveat": res.boundary_caveat,
                "nesting_violation": res.nesting_violation,
            },
            sort_keys=True,
        )
    )


@cli.command("bootstrap")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--copula-a", default="independence", show_default=True)
@click.option("--copula-b", required=True)
@click.option("--latency", required=True)
@click.option("--censoring", required=True)
@click.option("--truncate", default="none", show_default=True)
@click.option("--scale", default=1.0, show_default=True)
@click.option("--n-boot", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--fixed-truncation", is_flag=True, default=False,
              help="keep the original truncation point in every resample")
def cmd_bootstrap(
    data_path, copula_a, copula_b, latency, censoring, truncate, scale, n_boot, seed,
    fixed_truncation,
):
    """Bootstrap CI for the latency-median difference between two copulas."""
    data = read_dataset_csv(data_path, scale=scale)
    trunc = resolve_truncation(truncate, data)
    lat = MarginalSpec(MarginalFamily.parse(latency), trunc)
    cen = MarginalSpec(MarginalFamily.parse(censoring))
    spec_a = ModelSpec(CopulaFamily.parse(copula_a), lat, cen)
    spec_b = ModelSpec(CopulaFamily.parse(copula_b), lat, cen)
    res = bootstrap_median_diff(
        data,
        spec_a,
        spec_b,
        n_boot=n_boot,
        seed=seed,
        recompute_truncation=not fixed_truncation,
    )
    click.echo(
        json.dumps(
            {
                "diff": res.diff,
                "sd_hat": res.sd_hat,
                "ci95": [res.ci_low, res.ci_high],
                "n_boot": res.n_boot,
                "n_failed": res.n_failed,
                "unreliable": res.unreliable,
            },
            sort_keys=True,
        )
    )


def main(argv=None):
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except (click.UsageError, UsageError, ParameterError, DomainError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (CopcureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes separate mathematical findings from operational failures:
  0  success / scan certified / run converged
  1  operational error (bad input, I/O)
  2  finding: Dolgopyat scan failed, or verification mismatch
  3  finding: obstruction exceeded its schedule bound (hypothesis violated)
  4  finding: iteration diverged or failed to converge

All floats in reports are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import kam, plots
from .actions import system_from_json
from .errors import (Diverged, IsokamError, ObstructionTooLarge)
from .groups import block_matrix, decompose_block, diophantine_scan
from .models import (certify_periodic_facts, certify_sphere_facts,
                     cyclic_coefficients, resolve_model)
from .spectral import Cochain, VectorFieldSpectrum
from .torusmaps import verify_conjugacy

CSV_COLUMNS = ["m", "eps_m", "N_m", "sup_before", "sup_after", "sobolev2",
               "tail", "obstruction", "solver_residual", "hardy_r_m",
               "wall_ms"]


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")


def _load_system(model=None, config=None):
    """Returns (action, presentation) from a model name or a JSON file."""
    if model:
        return resolve_model(model)
    if config:
        with open(config) as fh:
            doc = json.load(fh)
        if "model" in doc:
            return resolve_model(doc["model"])
        pres, action = system_from_json(doc)
        return action, pres
    raise IsokamError("need --model or --config")


# ---------------------------------------------------------------------------
# diophantine
# ---------------------------------------------------------------------------

def cmd_diophantine(args):
    action, pres = _load_system(model=args.model, config=args.config)
    report = diophantine_scan(action, pres, args.flavor, args.max_sqnorm)
    doc = report.to_json_dict()
    if args.out:
        _write_json(args.out, doc)
        if not args.no_plots:
            base = os.path.splitext(args.out)[0]
            plots.diophantine_figure(base + ".png", report)
    print(f"flavor={report.flavor} blocks={len(report.per_block)} "
          f"sigma={_fmt(report.sigma)} tau={_fmt(report.tau)} "
          f"residual={_fmt(report.residual)} certified={report.certified}")
    if report.failed:
        w = max(report.witnesses, key=lambda k: sum(x * x for x in k))
        print(f"FINDING: Dolgopyat condition fails; resonant witness mode "
              f"{tuple(w)} at |k| = {math.sqrt(sum(x * x for x in w)):.3f}")
        return 2
    return 0


# ---------------------------------------------------------------------------
# kam
# ---------------------------------------------------------------------------

def _config_from_doc(doc, action, pres):
    sigma = doc.get("sigma")
    tau = doc.get("tau")
    if sigma is None or tau is None:
        scan = diophantine_scan(action, pres, "d0",
                                doc.get("scan_sqnorm", 4096))
        sigma = scan.sigma if sigma is None else sigma
        tau = scan.tau if tau is None else tau
    fields = dict(
        sigma=sigma, tau=tau,
        n=doc.get("n", action.manifold_dim),
        eps0=doc.get("eps0"),
        mode=doc.get("mode", "smooth"),
        hypothesis=doc.get("hypothesis", "almost-conjugate"),
        r0=doc.get("r0", 0.5),
        max_steps=doc.get("max_steps", 30),
        target_residual=doc.get("target_residual", 1e-9),
        max_freq=doc.get("max_freq", 64),
        grid_factor=doc.get("grid_factor", 4),
        obstruction_policy=doc.get("obstruction_policy", "abort"),
        safety_factor=doc.get("safety_factor", 10.0),
        min_truncation=doc.get("min_truncation", 8.0),
        track_defect=doc.get("track_defect", True),
    )
    if "analytic_band" in doc:
        fields["analytic_band"] = doc["analytic_band"]
    return kam.KamConfig(**fields)


def _initial_perturbation(doc, action, config, grid):
    if "witness" in doc:
        y = VectorFieldSpectrum.from_json_dict(doc["witness"])
        return kam.perturbation_from_witness(action, y, grid,
                                             band=config.max_freq)
    if "P0" in doc:
        entries = [VectorFieldSpectrum.from_json_dict(e) for e in doc["P0"]]
        return Cochain(entries)
    raise IsokamError("config needs 'witness' or 'P0'")


def cmd_kam(args):
    with open(args.config) as fh:
        doc = json.load(fh)
    action, pres = _load_system(model=doc.get("model"),
                                config=None if "model" in doc
                                else args.config)
    config = _config_from_doc(doc, action, pres)
    os.makedirs(args.out_dir, exist_ok=True)
    grid = config.grid(action.space.dim)
    P0 = _initial_perturbation(doc, action, config, grid)
    _write_json(os.path.join(args.out_dir, "p0.json"),
                [e.to_json_dict() for e in P0.entries])
    _write_json(os.path.join(args.out_dir, "run_config.json"), doc)
    exit_code = 0
    result = None
    try:
        result = kam.run(config, action, pres, P0)
        if not result.converged:
            exit_code = 4
    except ObstructionTooLarge as err:
        print(f"FINDING: {err}")
        _write_partial(args.out_dir, err.log, config)
        return 3
    except Diverged as err:
        print(f"FINDING: {err}")
        _write_partial(args.out_dir, err.log, config)
        return 4

    _write_steps_csv(os.path.join(args.out_dir, "steps.csv"),
                     result.log.reports)
    final = {
        "converged": result.converged,
        "residual": result.residual,
        "verify_residual": result.verify_residual,
        "eps0": result.eps0,
        "steps": len(result.log.reports),
        "initial_defect": result.initial_defect,
        "W": result.state.W.to_json_dict(),
        "theoretical_R_hat": config.r_hat,
        "theoretical_R_star": config.r_star,
        "theoretical_log10_eps0_max": config.theoretical_log10_eps0(
            pres.num_generators, pres.p),
    }
    analytic = None
    if config.mode == "analytic":
        analytic = kam.analytic_track(result, config)
        final["analytic"] = {
            "band": analytic.band,
            "passed": analytic.passed,
            "w_weighted_half_r0": analytic.w_weighted_half_r0,
            "entries": [
                {"m": e.m, "step": e.step, "radius": e.radius,
                 "weighted": e.weighted, "eps_m": e.eps_m, "ok": e.ok}
                for e in analytic.entries],
        }
    _write_json(os.path.join(args.out_dir, "final.json"), final)
    if not args.no_plots:
        plots.kam_decay_figure(args.out_dir, result)
        plots.kam_diagnostics_figure(args.out_dir, result)
        if analytic is not None:
            plots.analytic_figure(args.out_dir, analytic)
    print(f"converged={result.converged} residual={_fmt(result.residual)} "
          f"steps={len(result.log.reports)} "
          f"verify={_fmt(result.verify_residual)}")
    return exit_code


def _write_steps_csv(path, reports):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in reports:
            row = [r.m, r.eps_m, r.n_m, r.sup_before, r.sup_after,
                   r.sobolev2, r.tail, r.obstruction, r.solver_residual,
                   r.hardy_r_m, r.wall_ms]
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_partial(out_dir, log, config):
    if log is not None:
        _write_steps_csv(os.path.join(out_dir, "steps.csv"), log.reports)
    _write_json(os.path.join(out_dir, "final.json"),
                {"converged": False, "residual": None,
                 "theoretical_R_hat": config.r_hat,
                 "theoretical_R_star": config.r_star})


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args):
    cfg_path = os.path.join(args.run, "run_config.json")
    with open(cfg_path) as fh:
        doc = json.load(fh)
    action, pres = _load_system(model=doc.get("model"),
                                config=None if "model" in doc else cfg_path)
    config = _config_from_doc(doc, action, pres)
    with open(os.path.join(args.run, "p0.json")) as fh:
        P0 = Cochain([VectorFieldSpectrum.from_json_dict(e)
                      for e in json.load(fh)])
    with open(os.path.join(args.run, "final.json")) as fh:
        final = json.load(fh)
    W = VectorFieldSpectrum.from_json_dict(final["W"])
    grid = config.grid(action.space.dim)
    residual = verify_conjugacy(action, pres, P0, W, grid)
    tol = args.tol if args.tol is not None \
        else 10.0 * config.target_residual
    print(f"recomputed conjugacy residual = {_fmt(residual)} "
          f"(tolerance {_fmt(tol)})")
    if residual <= tol:
        print("PASS")
        return 0
    print("FAIL: stored conjugacy does not reproduce the perturbation")
    return 2


# ---------------------------------------------------------------------------
# cyclic / spectrum / model
# ---------------------------------------------------------------------------

def cmd_cyclic(args):
    cc = cyclic_coefficients(args.order)
    print(f"order n = {cc.order}")
    print(f"y = {cc.y}")
    J = cc.order // 2
    for j in range(1, J + 1):
        row = [cc.c(j, l) for l in range(j + 1)]
        print(f"c^{j} = {row}   sum = {sum(row)}   c_{j}^{j} = {row[-1]}")
    print(f"alpha_0 = n + 2 sum_l c_0^l y_l = {cc.alpha0} = n^2 "
          f"= {cc.order ** 2}")
    cc.check_invariants()
    print("invariants: exact")
    return 0


def cmd_spectrum(args):
    action, pres = _load_system(model=args.model, config=args.config)
    rows = []
    printable = []
    for which in ("d0d0*", "d1*d1", "box"):
        if which == "d1*d1" and pres.p == 0:
            continue
        op = block_matrix(action, pres, which, args.sqnorm)
        evals, _ = op.spectrum()
        thresh = op.kernel_threshold()
        kdim = int(np.sum(np.abs(evals) <= thresh))
        lam = op.lam
        for ev in evals:
            rows.append((lam, float(ev), which))
        printable.append((which, evals, kdim))
        print(f"{which:6s} |k|^2={args.sqnorm}: eigenvalues "
              f"{[float(f'{v:.12g}') for v in evals]}  kernel dim {kdim}")
    dec = decompose_block(action, pres, args.sqnorm)
    print(f"decomposition dims: ker box = {dec.dims[0]}, "
          f"im d0 = {dec.dims[1]}, im d1* = {dec.dims[2]}")
    if args.out:
        _write_json(args.out, {
            "sqnorm": args.sqnorm,
            "spectra": [{"which": w, "eigenvalues": [float(v) for v in ev],
                         "kernel_dim": kd} for w, ev, kd in printable],
            "decomposition": {"ker_box": dec.dims[0], "im_d0": dec.dims[1],
                              "im_d1_star": dec.dims[2]}})
        if not args.no_plots:
            plots.spectrum_figure(os.path.splitext(args.out)[0] + ".png",
                                  rows)
    return 0


def cmd_model(args):
    action, pres = _load_system(model=args.model)
    print(f"model {args.model}: kind={action.kind} "
          f"generators={pres.num_generators} relations={pres.p}")
    head = args.model.split(":")[0]
    if head in ("periodic", "cyclic"):
        facts = certify_periodic_facts(action, pres, args.max_sqnorm)
        print(f"cyclic order {facts.order}; distinct Box eigenvalues "
              f"{facts.distinct_box_eigenvalues} (allowed "
              f"{[float(f'{v:.6g}') for v in facts.allowed_values]})")
        print(f"certified: {facts.eigenvalues_certified}; Dolgopyat fails "
              f"with witness {facts.resonant_witness}")
        return 0 if facts.eigenvalues_certified else 2
    if head == "sphere-z":
        j_max = int(math.isqrt(args.max_sqnorm))
        facts = certify_sphere_facts(action, pres, max(j_max, 4))
        print(f"bands J <= {facts.j_max}; spectra certified: "
              f"{facts.eigenvalues_certified}; Dolgopyat fails: "
              f"{facts.dolgopyat_report.failed}")
        return 0 if facts.eigenvalues_certified else 2
    rep = diophantine_scan(action, pres, "d0", args.max_sqnorm)
    print(f"d0 scan: sigma={_fmt(rep.sigma)} tau={_fmt(rep.tau)} "
          f"certified={rep.certified}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="isokam",
        description="Spectral engine for conjugating perturbed isometry "
                    "actions on the circle, flat tori and the sphere's "
                    "z-rotation sector.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diophantine", help="scan block spectra and fit "
                       "(sigma, tau)")
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--flavor", default="d0",
                   choices=["d0", "box", "relations", "dolgopyat"])
    p.add_argument("--max-sqnorm", type=int, default=4096)
    p.add_argument("--out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_diophantine)

    p = sub.add_parser("kam", help="run the KAM iteration from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_kam)

    p = sub.add_parser("verify", help="independently re-check a stored run")
    p.add_argument("--run", required=True)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cyclic", help="integer decomposition data for the "
                       "cyclic group")
    p.add_argument("--order", type=int, required=True)
    p.set_defaults(func=cmd_cyclic)

    p = sub.add_parser("spectrum", help="blockwise eigenvalues of d0d0*, "
                       "d1*d1 and Box")
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--sqnorm", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("model", help="summarize a named model and certify "
                       "its closed-form facts")
    p.add_argument("--model", required=True)
    p.add_argument("--max-sqnorm", type=int, default=400)
    p.set_defaults(func=cmd_model)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IsokamError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

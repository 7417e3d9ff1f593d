"""Command-line surface: every operation on JSON instance files.

Exit codes: 0 decided-positive / success, 1 decided-negative, 2 undecided,
3 input or schema errors.  Reports are reproducible byte-for-byte given the
same inputs, seed, and version."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .cohomology import (
    Cocycle1,
    DeformationContext,
    FormulaViolation,
    cone_membership_prp,
    cone_membership_relative,
    tangent_prp,
    tangent_relative,
)
from .io import (
    InstanceError,
    decode_instance,
    decode_weights,
    digest,
    encode_matrix,
    encode_metric,
    encode_rational,
    encode_residue_data,
)
from .linalg import MEMBERSHIP_TOL, RANK_RTOL, LinalgError
from .metric import DivergenceCertificate, SolverOptions, solve_metric
from .pairs import (
    RELATOR_TOL,
    PairError,
    SearchBudget,
    WeightedPair,
    deligne_simpson_certificate,
)
from .quiver import QuiverError
from .quiver import encode as quiver_encode
from .quiver import encode_weighted, induced_weight, king_semistable
from .residue import ResidueError, deligne_residue, extension_degree, rhd_twist, verify_monodromy
from .stability import StabilityError, polystable, semistable
from .surface import WordError

COMMANDS = (
    "validate",
    "tangent",
    "cone",
    "stability",
    "quiver-export",
    "king",
    "metric-solve",
    "rhd",
    "deligne-simpson",
)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_UNDECIDED = 2
EXIT_INPUT = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="parrep",
        description="validation, deformation, stability, metric, and residue "
        "computations for parabolic representation pairs",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--weights", help="optional weight-system JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--variant", choices=("relative", "prp"), default="relative",
                   help="which cone to test (cone command)")
    p.add_argument("--shifts", help="JSON list of per-puncture integer block shifts (rhd)")
    p.add_argument("--json", action="store_true", help="machine-readable output (the default)")
    p.add_argument("--pretty", action="store_true", help="indented output")
    p.add_argument("--basis", action="store_true", help="include basis records (tangent)")
    return p


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _emit(report: dict, pretty: bool):
    if pretty:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print(json.dumps(report, sort_keys=True, separators=(",", ":")))


def _new_report(command: str, docs, args) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": args.seed,
        "inputs_digest": digest(docs),
        "tolerances": {
            "rank_rtol": RANK_RTOL,
            "membership_tol": MEMBERSHIP_TOL,
            "relator_tol": RELATOR_TOL,
        },
    }


def _require_weights(pair, doc_weights, args, docs):
    if args.weights:
        wdoc = _load_json(args.weights)
        if not isinstance(wdoc, dict) or "weights" not in wdoc:
            raise InstanceError('weights file must be {"weights": [...]}', "$")
        docs.append(wdoc)
        return decode_weights(wdoc["weights"], pair)
    if doc_weights is None:
        raise InstanceError("this command needs a weight system", "$.weights")
    return doc_weights


def _cleared_integer_weights(qweights: dict) -> dict:
    """Clear rational vertex weights to integers by the common denominator."""
    from math import lcm

    denom = 1
    for v in qweights.values():
        denom = lcm(denom, Fraction(v).denominator)
    return {k: int(Fraction(v) * denom) for k, v in qweights.items()}


def _fraction_json(q: Fraction):
    return encode_rational(q)


def run_command(argv) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = _load_json(args.instance)
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": f"cannot read instance: {exc}"}), file=sys.stderr)
        return EXIT_INPUT
    docs = [doc]
    try:
        pair, weights, solver_doc = decode_instance(doc)
        report = _new_report(args.command, docs, args)
        budget = SearchBudget(seed=args.seed)

        if args.command == "validate":
            v = pair.validate()
            report.update(
                valid=v.valid,
                relator_residual=v.relator_residual,
                memberships=v.memberships,
                membership_residuals=v.membership_residuals,
            )
            _emit(report, args.pretty)
            return EXIT_OK if v.valid else EXIT_NEGATIVE

        if args.command == "tangent":
            ctx = DeformationContext(pair)
            code = EXIT_OK
            try:
                res = tangent_prp(ctx)
                report["pair_variety"] = {
                    "dimension": res.dimension,
                    "predicted": res.predicted,
                    "matches_formula": True,
                }
                if args.basis:
                    report["pair_variety"]["basis"] = [
                        {
                            "cocycle": {n: encode_matrix(m) for n, m in v.cocycle.values.items()},
                            "displacements": [encode_matrix(y) for y in v.flag_displacements],
                        }
                        for v in res.basis
                    ]
            except FormulaViolation as exc:
                report["pair_variety"] = {
                    "dimension": exc.computed,
                    "predicted": exc.predicted,
                    "matches_formula": False,
                }
                code = EXIT_NEGATIVE
            rel = tangent_relative(ctx)
            report["relative_variety"] = {
                "dimension": rel.dimension,
                "predicted": rel.predicted,
                "f_halved": [_fraction_json(x) for x in rel.f_halved],
                "matches_formula": rel.matches_formula,
            }
            if args.basis:
                report["relative_variety"]["basis"] = [
                    {n: encode_matrix(m) for n, m in x.values.items()} for x in rel.basis
                ]
            _emit(report, args.pretty)
            return code

        if args.command == "cone":
            ctx = DeformationContext(pair)
            rng = np.random.default_rng(args.seed)
            if args.variant == "relative":
                basis = tangent_relative(ctx).basis
                if not basis:
                    report.update(feasible=True, note="zero tangent space")
                    _emit(report, args.pretty)
                    return EXIT_OK
                coeff = rng.standard_normal(len(basis))
                vals = {
                    n: sum(c * b.values[n] for c, b in zip(coeff, basis))
                    for n in pair.presentation.generator_names()
                }
                ok = cone_membership_relative(Cocycle1(vals), ctx)
            else:
                try:
                    res = tangent_prp(ctx)
                except FormulaViolation as exc:
                    report.update(
                        feasible=None,
                        note=f"tangent dimension {exc.computed} != formula {exc.predicted}",
                    )
                    _emit(report, args.pretty)
                    return EXIT_UNDECIDED
                if not res.basis:
                    report.update(feasible=True, note="zero tangent space")
                    _emit(report, args.pretty)
                    return EXIT_OK
                idx = int(rng.integers(0, len(res.basis)))
                ok = cone_membership_prp(res.basis[idx], ctx, seed=args.seed)
            report.update(feasible=bool(ok), variant=args.variant)
            _emit(report, args.pretty)
            return EXIT_OK if ok else EXIT_NEGATIVE

        if args.command == "stability":
            wlist = _require_weights(pair, weights, args, docs)
            report["inputs_digest"] = digest(docs)
            wp = WeightedPair(pair, wlist)
            s = semistable(wp, budget)
            p = polystable(wp, budget)
            report.update(
                degree=_fraction_json(wp.degree()),
                slope=_fraction_json(wp.slope()),
                status=s.status,
                polystable_status=p.status,
                lattice_status=s.lattice_status,
            )
            if s.witness is not None:
                report["witness"] = encode_matrix(s.witness)
                report["witness_slope"] = _fraction_json(s.witness_slope)
            if p.decomposition is not None:
                report["decomposition"] = [encode_matrix(b) for b in p.decomposition]
                report["summand_slopes"] = [_fraction_json(x) for x in p.summand_slopes]
            _emit(report, args.pretty)
            if not s.decided:
                return EXIT_UNDECIDED
            return EXIT_OK if s.semistable else EXIT_NEGATIVE

        if args.command == "quiver-export":
            x = quiver_encode(pair)
            q = x.quiver
            report["quiver"] = {
                "vertices": list(q.vertices),
                "arrows": [{"name": a.name, "src": a.src, "tgt": a.tgt} for a in q.arrows],
                "dims": q.dimension_vector(),
                "maps": {name: encode_matrix(m) for name, m in x.maps.items()},
            }
            if weights is not None:
                w = induced_weight(
                    [wv.weights for wv in weights], [f.type for f in pair.flags]
                )
                report["quiver"]["weights"] = {v: _fraction_json(x) for v, x in w.items()}
                report["quiver"]["weights_cleared"] = _cleared_integer_weights(w)
            _emit(report, args.pretty)
            return EXIT_OK

        if args.command == "king":
            wlist = _require_weights(pair, weights, args, docs)
            report["inputs_digest"] = digest(docs)
            wp = WeightedPair(pair, wlist)
            x, w = encode_weighted(wp)
            verdict = king_semistable(x, w, budget)
            report.update(
                status=verdict.status,
                lattice_status=verdict.lattice_status,
                subreps_checked=verdict.checked,
            )
            if verdict.pairing is not None:
                report["pairing"] = _fraction_json(verdict.pairing)
            if verdict.witness is not None:
                report["witness"] = {v: encode_matrix(b) for v, b in verdict.witness.items()}
            _emit(report, args.pretty)
            if verdict.status == "undecided":
                return EXIT_UNDECIDED
            return EXIT_NEGATIVE if verdict.status == "unstable" else EXIT_OK

        if args.command == "metric-solve":
            wlist = _require_weights(pair, weights, args, docs)
            report["inputs_digest"] = digest(docs)
            wp = WeightedPair(pair, wlist)
            opts = SolverOptions()
            if "tol" in solver_doc:
                opts.tol = float(solver_doc["tol"])
            if "max_steps" in solver_doc:
                opts.max_steps = int(solver_doc["max_steps"])
            if "eta" in solver_doc:
                opts.eta = float(solver_doc["eta"])
            if "initial_metric" in solver_doc:
                from .io import decode_matrix
                from .linalg import HermitianMetric

                opts.initial_h = HermitianMetric(
                    decode_matrix(solver_doc["initial_metric"], "$.solver.initial_metric")
                )
            if args.tol is not None:
                opts.tol = args.tol
            if args.max_steps is not None:
                opts.max_steps = args.max_steps
            out = solve_metric(wp, opts)
            if isinstance(out, DivergenceCertificate):
                report.update(
                    converged=False,
                    reason=out.reason,
                    best_total_norm=out.best_total_norm,
                    condition_number=out.condition_number,
                    steps=out.steps,
                )
                _emit(report, args.pretty)
                return EXIT_NEGATIVE
            report.update(
                converged=True,
                steps=out.step_count,
                total_norm=out.total_norm,
                max_trace_defect=out.max_trace_defect,
                metric=encode_metric(out.h),
            )
            if len(out.residual_history) <= 2000:
                report["residual_history"] = out.residual_history
            else:
                report["residual_history_tail"] = out.residual_history[-5:]
            _emit(report, args.pretty)
            return EXIT_OK

        if args.command == "rhd":
            shifts = json.loads(args.shifts) if args.shifts else None
            punctures = []
            ok = True
            degrees = []
            datas = []
            for i in range(1, pair.presentation.punctures + 1):
                m = pair.puncture_image(i)
                data = deligne_residue(m)
                if shifts is not None:
                    data = rhd_twist(data, shifts[i - 1])
                datas.append(data)
                roundtrip = verify_monodromy(data, m)
                ok = ok and roundtrip
                punctures.append(
                    {
                        "residue": encode_residue_data(data),
                        "monodromy_roundtrip": roundtrip,
                        "eigenvalue_real_parts": [float(x) for x in data.eigenvalue_real_parts()],
                    }
                )
            report.update(punctures=punctures, extension_degree=extension_degree(datas))
            _emit(report, args.pretty)
            return EXIT_OK if ok else EXIT_NEGATIVE

        if args.command == "deligne-simpson":
            if pair.presentation.genus != 0:
                raise InstanceError("deligne-simpson needs a genus-zero instance", "$.genus")
            mats = [pair.puncture_image(i) for i in range(1, pair.presentation.punctures + 1)]
            cert = deligne_simpson_certificate(mats, pair.flags, budget)
            report.update(
                solution=cert.is_solution,
                memberships=cert.memberships,
                product_residual=cert.product_residual,
                lattice_status=cert.invariant_report.lattice_status,
                reasons=cert.reasons,
            )
            _emit(report, args.pretty)
            return EXIT_OK if cert.is_solution else EXIT_NEGATIVE

        raise InstanceError(f"unhandled command {args.command}")
    except InstanceError as exc:
        print(json.dumps({"error": str(exc), "path": exc.path}), file=sys.stderr)
        return EXIT_INPUT
    except (LinalgError, PairError, QuiverError, StabilityError, ResidueError, WordError) as exc:
        # instance data violates an operation's preconditions
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())

"""
Command-line surface: ``simulate``, ``fit``, ``path``, ``tune`` and ``eval``.

Every command writes its files (plus a ``manifest.json``) into ``--out-dir`` and prints the
written paths on stdout, one per line. Logging goes to stderr.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

from repgraph import __version__
from repgraph.config import PROJECT_ROOT
from repgraph.config import default_settings
from repgraph.config import load_env_variables
from repgraph.core import dataset_io
from repgraph.core.families import NodeFamily
from repgraph.core.families import family_for
from repgraph.core.families import family_poisson
from repgraph.core.model import Family
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import Rule
from repgraph.errors import EXIT_NUMERICAL
from repgraph.errors import EXIT_OK
from repgraph.errors import RepgraphError
from repgraph.errors import UsageError
from repgraph.evaluation import evaluation
from repgraph.graphs import graph_assembly
from repgraph.logging_setup import configure_logging
from repgraph.simulation import scenarios
from repgraph.simulation import simgen
from repgraph.solvers import fused_basis
from repgraph.solvers.gaussian_solver import BcdSettings
from repgraph.solvers.glm_solver import GgdSettings
from repgraph.solvers.node_problem import H_UPDATES
from repgraph.tuning import tuning

logger = logging.getLogger(__name__)

# Arguments that change where or how fast a command runs, never what it writes.
RUNTIME_ONLY = ("threads", "out_dir", "log_config", "log_level", "command")


def parse_grid(text: str) -> List[float]:
    """
    A comma separated list (``0.1,0.2,0.4``) or a log-spaced range ``log:low:high:count``
    (descending).
    """
    try:
        if text.startswith("log:"):
            _, low, high, count = text.split(":")
            return tuning.log_grid(float(low), float(high), int(count))
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"Cannot parse grid '{text}': {exc}") from exc
    if not values:
        raise UsageError(f"Grid '{text}' is empty")
    return values


def _grid_argument(text: str) -> List[float]:
    try:
        return parse_grid(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


class RepgraphRunner:
    """Command-line tool to simulate data, fit graphs and select tuning parameters."""

    def __init__(self, argv: Optional[Sequence[str]] = None):
        """Resolve environment defaults and parse ``argv`` (``sys.argv[1:]`` when None)."""
        self.root_dir = PROJECT_ROOT
        load_env_variables(self.root_dir)
        self.args: Dict[str, Any] = default_settings()
        self.args.update(self.parse_args(argv))
        self.written: List[str] = []

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="repgraph",
            description="Graph estimation from replicated data with latent confounders.",
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        parser.add_argument("--version", action="version", version=f"repgraph {__version__}")
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--out-dir", type=str, default=self.args["out_dir"], help="Directory for output files")
        common.add_argument(
            "--threads", type=int, default=self.args["threads"], help="Worker threads for per-node fits"
        )
        common.add_argument("--seed", type=int, default=0, help="Seed of every random choice")
        common.add_argument("--log-config", type=str, default=self.args["log_config"], help="Logging JSON file")
        common.add_argument("--log-level", type=str, default=self.args["log_level"], help="Root log level override")

        commands = parser.add_subparsers(dest="command", required=True)
        formatter = parser.formatter_class
        simulate = commands.add_parser(
            "simulate", parents=[common], help="Generate a scenario", formatter_class=formatter
        )
        simulate.add_argument("--scenario", required=True, choices=scenarios.SCENARIOS, help="Scenario name")
        simulate.add_argument("--n", type=int, default=50, help="Number of subjects")
        simulate.add_argument("--T", type=int, default=20, help="Replicates per subject")
        simulate.add_argument("--p", type=int, default=100, help="Observed variables")
        simulate.add_argument("--q", type=int, default=5, help="Latent confounders")
        simulate.add_argument("--burn-in", type=int, default=10_000, help="Gibbs burn-in sweeps (ising)")
        simulate.add_argument("--thin", type=int, default=1_000, help="Gibbs sweeps between replicates (ising)")

        fit = commands.add_parser("fit", parents=[common], help="Fit one graph", formatter_class=formatter)
        self._add_model_arguments(fit)
        fit.add_argument("--lambda", dest="lam", type=float, default=None, help="Penalty on theta")
        fit.add_argument("--theory-defaults", action="store_true", help="Use the closed-form reference penalties")
        fit.add_argument("--theory-mode", choices=tuning.THEORY_MODES, default="generic", help="Gamma formula")
        fit.add_argument("--no-confounders", action="store_true", help="Reference penalties without confounders")
        fit.add_argument("--sigma-m", type=float, default=1.0, help="Noise scale constant")
        fit.add_argument("--delta-max", type=float, default=1.0, help="Largest latent jump constant")
        fit.add_argument("--tau", type=int, default=1, help="Largest number of latent jumps")
        fit.add_argument("--c1", type=float, default=1.0, help="Generic constant of the gamma formula")
        fit.add_argument("--target-edges", type=int, default=None, help="Search lambda for this many edges")

        path = commands.add_parser(
            "path", parents=[common], help="Edge counts and ROC over a lambda grid", formatter_class=formatter
        )
        self._add_model_arguments(path)
        path.add_argument("--grid-lambda", required=True, type=_grid_argument, help="'a,b,c' or 'log:low:high:count'")
        path.add_argument("--truth", type=str, default=None, help="True edge-list CSV for TPR/FPR")
        path.add_argument("--cold-start", action="store_true", help="Fit every grid point from zero")

        tune = commands.add_parser(
            "tune", parents=[common], help="Estimation-stability selection", formatter_class=formatter
        )
        self._add_model_arguments(tune)
        tune.add_argument("--grid-lambda", required=True, type=_grid_argument, help="'a,b,c' or 'log:low:high:count'")
        tune.add_argument("--grid-beta", type=_grid_argument, default=None, help="Beta values; unset ties beta")
        tune.add_argument("--grid-gamma", type=_grid_argument, default=None, help="Gamma values; omitted uses --gamma")
        tune.add_argument("--folds", type=int, default=5, help="Subject folds")
        tune.add_argument("--evaluate-on", choices=tuning.EVALUATE_ON, default="full", help="Rows scored per fold")

        score = commands.add_parser(
            "eval", parents=[common], help="Score graphs against the truth", formatter_class=formatter
        )
        score.add_argument("--estimate", type=str, default=None, help="Graph JSON to score")
        score.add_argument("--truth", type=str, default=None, help="True edge-list CSV")
        score.add_argument("--reference", type=str, default=None, help="Second graph JSON to compare against")
        score.add_argument("--roc", type=str, default=None, help="ROC CSV to summarize by its AUC")
        return parser

    @staticmethod
    def _add_model_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--dataset", required=True, type=str, help="Dataset CSV")
        parser.add_argument("--family", choices=[member.value for member in Family], default="gaussian")
        parser.add_argument("--beta", type=float, default=None, help="Penalty on the lag coefficients alpha")
        parser.add_argument("--gamma", type=float, default=None, help="Fusion penalty on the latent effects")
        parser.add_argument("--tie-beta", action="store_true", help="Set beta equal to lambda")
        parser.add_argument("--drop-alpha", action="store_true", help="Fit without the lag block")
        parser.add_argument("--drop-delta", action="store_true", help="Fit without the latent block")
        parser.add_argument("--rule", choices=[member.value for member in Rule], default=Rule.INTERSECTION.value)
        parser.add_argument("--h-update", choices=H_UPDATES, default="fused", help="Solver of the latent block")
        parser.add_argument("--tol", type=float, default=1e-8, help="Outer stopping tolerance")
        parser.add_argument("--max-outer", type=int, default=5000, help="Outer iteration budget")
        parser.add_argument("--lipschitz", type=float, default=None, help="Majorization constant L")
        parser.add_argument("--intercept", action="store_true", help="Poisson intercept")
        parser.add_argument("--eta-cap", type=float, default=None, help="Poisson linear-predictor cap")

    def parse_args(self, argv: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Parses command-line arguments for configuration."""
        args = self.build_parser().parse_args(argv)
        return vars(args)

    def run(self) -> int:
        """Run the selected command and return the process exit code."""
        configure_logging(self.args["log_config"], self.args["log_level"] or None)
        command = self.args["command"]
        try:
            os.makedirs(self.args["out_dir"], exist_ok=True)
            code = getattr(self, f"cmd_{command}")()
        except RepgraphError as exc:
            logger.error("%s failed: %s", command, exc)
            code = exc.exit_code
        for path in self.written:
            print(path)
        return code

    # Helpers

    def _out(self, name: str) -> str:
        return os.path.join(self.args["out_dir"], name)

    def _wrote(self, path: str):
        self.written.append(path)

    def _write_manifest(self, extra: Dict[str, Any]):
        config = {key: value for key, value in sorted(self.args.items()) if key not in RUNTIME_ONLY}
        manifest = {
            "tool": "repgraph",
            "version": __version__,
            "command": self.args["command"],
            "seed": self.args["seed"],
            "config": config,
        }
        manifest.update(extra)
        path = self._out("manifest.json")
        with open(path, "w", encoding="utf-8") as manifest_file:
            json.dump(manifest, manifest_file, indent=2, default=str)
            manifest_file.write("\n")
        self._wrote(path)

    def _dataset(self) -> ReplicateDataset:
        return graph_assembly.prepare_dataset(dataset_io.read_dataset_csv(self.args["dataset"], self.args["family"]))

    def _family(self, d: ReplicateDataset) -> NodeFamily:
        if d.family is Family.POISSON and self.args["eta_cap"] is not None:
            return family_poisson(eta_cap=self.args["eta_cap"])
        return family_for(d.family)

    def _settings(self, d: ReplicateDataset) -> graph_assembly.SolverSettings:
        if d.family is Family.GAUSSIAN and self.args["lipschitz"] is None:
            return BcdSettings(tol=self.args["tol"], max_outer=self.args["max_outer"], h_update=self.args["h_update"])
        return GgdSettings(
            lipschitz_L=self.args["lipschitz"],
            tol=self.args["tol"],
            max_outer=self.args["max_outer"],
            intercept=self.args["intercept"],
            h_update=self.args["h_update"],
        )

    def _penalty(self, lam: Optional[float]) -> PenaltyConfig:
        """The configuration given by --lambda/--beta/--gamma and the drop flags."""
        drop_alpha, drop_delta = self.args["drop_alpha"], self.args["drop_delta"]
        if lam is None:
            raise UsageError("--lambda is required")
        beta = lam if self.args["tie_beta"] else self.args["beta"]
        gamma = self.args["gamma"]
        if beta is None and not drop_alpha:
            raise UsageError("--beta (or --tie-beta) is required unless --drop-alpha is given")
        if gamma is None and not drop_delta:
            raise UsageError("--gamma is required unless --drop-delta is given")
        return PenaltyConfig(
            lam=lam, beta=beta or 0.0, gamma=gamma or 0.0, drop_alpha=drop_alpha, drop_delta=drop_delta
        )

    # Commands

    def cmd_simulate(self) -> int:
        """Write a scenario's dataset and truth files."""
        options = scenarios.ScenarioOptions(q=self.args["q"], burn_in=self.args["burn_in"], thin=self.args["thin"])
        d, truth = scenarios.build_scenario(
            self.args["scenario"], self.args["n"], self.args["T"], self.args["p"], self.args["seed"], options
        )
        self._wrote(dataset_io.write_dataset_csv(d, self._out("dataset.csv")))
        self._wrote(dataset_io.write_edge_list_csv(truth.edges, self._out("truth_edges.csv")))
        self._wrote(simgen.write_matrix_csv(truth.theta, self._out("truth_precision.csv")))
        self._wrote(simgen.write_matrix_csv(truth.A, self._out("truth_transition.csv")))
        if truth.latent is not None and truth.q > 0:
            self._wrote(simgen.write_latent_csv(truth.latent, self._out("truth_latent.csv")))
        self._write_manifest(
            {
                "dataset": {"family": d.family.value, "n": d.n, "T": d.T, "p": d.p, "q": truth.q},
                "options": options.as_dict(),
                "true_edges": len(truth.edges),
            }
        )
        return EXIT_OK

    def cmd_fit(self) -> int:
        """Fit every node, symmetrize and write the graph, coefficients and latent effects."""
        d = self._dataset()
        family = self._family(d)
        settings = self._settings(d)
        basis = fused_basis.build(d.n, d.T)
        extra: Dict[str, Any] = {}
        if self.args["theory_defaults"]:
            inputs = tuning.TheoryInputs(
                n=d.n,
                T=d.T,
                p=d.p,
                sigma_m=self.args["sigma_m"],
                delta_max=self.args["delta_max"],
                tau_knots=self.args["tau"],
                c1_const=self.args["c1"],
            )
            values = tuning.theory_values(inputs, self.args["theory_mode"], self.args["no_confounders"])
            extra["theory"] = values._asdict()
            cfg = tuning.theory_defaults(inputs, self.args["theory_mode"], self.args["no_confounders"])
            cfg = dataclasses.replace(cfg, drop_alpha=self.args["drop_alpha"], drop_delta=self.args["drop_delta"])
        elif self.args["target_edges"] is not None:
            cfg = self._penalty(self.args["lam"] if self.args["lam"] is not None else 0.0)
        else:
            cfg = self._penalty(self.args["lam"])

        if self.args["target_edges"] is not None:
            selection = graph_assembly.select_lambda_for_edges(
                d,
                cfg,
                self.args["target_edges"],
                self.args["rule"],
                family,
                basis,
                settings,
                self.args["threads"],
                tie_beta=self.args["tie_beta"],
            )
            cfg, fits, graph = selection.config, selection.fits, selection.graph
            extra["target_hit"] = selection.hit
        else:
            fits = graph_assembly.fit_graph(d, cfg, family, basis, settings, self.args["threads"])
            graph = graph_assembly.symmetrize(fits, self.args["rule"])

        self._wrote(graph_assembly.write_graph_json(graph, self._out("graph.json")))
        self._wrote(graph_assembly.write_coefficients_csv(fits, self._out("coefficients.csv")))
        self._wrote(graph_assembly.write_delta_csv(fits, d.n, d.T, self._out("delta.csv")))
        unconverged = [fit.j + 1 for fit in fits if not fit.converged]
        extra.update(
            {
                "dataset": {"family": d.family.value, "n": d.n, "T": d.T, "p": d.p},
                "penalty": cfg.as_dict(),
                "edges": graph.edge_count,
                "unconverged_nodes": unconverged,
            }
        )
        self._write_manifest(extra)
        if unconverged:
            logger.warning("Nodes %s did not converge; outputs are partial", unconverged)
            return EXIT_NUMERICAL
        return EXIT_OK

    def cmd_path(self) -> int:
        """Edge counts (and TPR/FPR against a truth file) for every lambda of the grid."""
        d = self._dataset()
        base = self._penalty(self.args["grid_lambda"][0])
        grid = tuning.lambda_grid(self.args["grid_lambda"], base, self.args["tie_beta"])
        kwargs = {
            "rule": self.args["rule"],
            "family": self._family(d),
            "settings": self._settings(d),
            "threads": self.args["threads"],
            "warm_starts": not self.args["cold_start"],
        }
        extra: Dict[str, Any] = {"grid": [cfg.as_dict() for cfg in grid]}
        if self.args["truth"]:
            truth = dataset_io.read_edge_list_csv(self.args["truth"], d.p)
            rows = evaluation.roc_path(d, grid, truth, **kwargs)
        else:
            points = graph_assembly.edge_count_path(d, grid, **kwargs)
            rows = [
                evaluation.RocRow(pt.config.lam, pt.config.beta, pt.config.gamma, pt.edge_count, None, None)
                for pt in points
            ]
        self._wrote(evaluation.write_roc_csv(rows, self._out("roc.csv")))
        if self.args["truth"]:
            self._wrote(evaluation.write_json(evaluation.auc_document(rows), self._out("auc.json")))
        self._write_manifest(extra)
        return EXIT_OK

    def cmd_tune(self) -> int:
        """Estimation-stability selection over the lambda x beta x gamma grid."""
        d = self._dataset()
        gammas = self.args["grid_gamma"] or [self.args["gamma"] if self.args["gamma"] is not None else 0.0]
        if self.args["grid_gamma"] is None and self.args["gamma"] is None and not self.args["drop_delta"]:
            raise UsageError("--grid-gamma or --gamma is required unless --drop-delta is given")
        flags = {"drop_alpha": self.args["drop_alpha"], "drop_delta": self.args["drop_delta"]}
        if self.args["grid_beta"] is None:
            grid = [dataclasses.replace(cfg, **flags) for cfg in tuning.tied_grid(self.args["grid_lambda"], gammas)]
        else:
            grid = [
                PenaltyConfig(lam=lam, beta=beta, gamma=gamma, **flags)
                for gamma in gammas
                for beta in self.args["grid_beta"]
                for lam in self.args["grid_lambda"]
            ]
        result = tuning.es_select(
            d,
            grid,
            self._family(d),
            folds=self.args["folds"],
            seed=self.args["seed"],
            settings=self._settings(d),
            threads=self.args["threads"],
            evaluate_on=self.args["evaluate_on"],
        )
        self._wrote(tuning.write_es_report(result, self._out("es_report.json")))
        self._write_manifest({"selected": result.selected.as_dict(), "grid_size": len(grid)})
        return EXIT_OK

    def cmd_eval(self) -> int:
        """Score a graph against a truth edge list, compare two graphs, or summarize a ROC file."""
        if not (self.args["estimate"] or self.args["roc"]):
            raise UsageError("eval needs --estimate or --roc")
        extra: Dict[str, Any] = {}
        if self.args["estimate"]:
            estimate = graph_assembly.read_graph_json(self.args["estimate"])
            if self.args["truth"]:
                truth = dataset_io.read_edge_list_csv(self.args["truth"], estimate.p)
                score = evaluation.score_document(estimate, truth)
                extra["score"] = score
                self._wrote(evaluation.write_json(score, self._out("score.json")))
            if self.args["reference"]:
                reference = graph_assembly.read_graph_json(self.args["reference"])
                only_estimate, only_reference = graph_assembly.graph_difference(estimate, reference)
                difference = {
                    "only_in_estimate": [[j + 1, k + 1] for j, k in sorted(only_estimate)],
                    "only_in_reference": [[j + 1, k + 1] for j, k in sorted(only_reference)],
                }
                self._wrote(evaluation.write_json(difference, self._out("difference.json")))
            if not (self.args["truth"] or self.args["reference"]):
                raise UsageError("eval --estimate needs --truth or --reference")
        if self.args["roc"]:
            summary = evaluation.auc_document(evaluation.read_roc_csv(self.args["roc"]))
            extra["auc"] = summary["auc"]
            self._wrote(evaluation.write_json(summary, self._out("auc.json")))
        self._write_manifest(extra)
        return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    return RepgraphRunner(argv).run()


if __name__ == "__main__":
    sys.exit(main())

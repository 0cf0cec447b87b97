"""audit_structure.py - Layout and public-surface audit of the Interchange Workshop.

Parses each module with ast (nothing is imported) and fails the audit when a
required file, class method or module-level operation has gone missing.
"""

import ast
import sys
from pathlib import Path

PACKAGE = Path("interchange_workshop")

REQUIRED_PATHS = [
    Path("main.py"),
    PACKAGE / "specs" / "data_models.py",
    PACKAGE / "constructions" / "__init__.py",
    PACKAGE / "tests" / "features" / "acceptance.feature",
    PACKAGE / "tests" / "step_definitions" / "test_acceptance_steps.py",
]

REQUIRED_CLASS_METHODS = {
    "experiment_manager.py": {
        "ExperimentManager": [
            "run",
            "run_experiment",
            "write_csv",
            "_run_truncate_sweep",
            "_run_stationary",
            "_run_interchange",
            "_run_fte",
            "_run_ctmc",
            "_run_counterexample",
            "_run_lindley",
            "_run_ifs",
        ],
    },
    "settings_manager.py": {"SettingsManager": ["build", "read_config_file", "log_level"]},
}

REQUIRED_FUNCTIONS = {
    "chain_core.py": ["propagate", "marginal", "tv_distance", "weighted_tv_distance"],
    "truncation.py": ["truncate", "embed", "extend_to", "truncation_sweep"],
    "stationary.py": ["gth", "power_iteration", "ctmc_stationary"],
    "interchange.py": [
        "sup_tv_horizon",
        "certified_uniform_bound",
        "monotone_tv_profile",
        "weighted_uniform_bound",
        "diagonal_probe",
    ],
    "fte.py": [
        "minimal_solution",
        "linear_solve_fte",
        "regenerative_ratio",
        "mean_hitting_time",
        "discounted_reward",
        "stationary_weighted_mean",
    ],
    "jump.py": ["embedded_chain", "transient", "ctmc_certified_uniform_bound", "ctmc_fte"],
    "validators.py": ["validate_stochastic", "validate_rate_matrix"],
}


def _tree(module: str) -> ast.Module:
    return ast.parse((PACKAGE / module).read_text())


def missing_paths() -> list:
    return [str(path) for path in REQUIRED_PATHS if not path.exists()]


def missing_methods() -> list:
    problems = []
    for module, classes in REQUIRED_CLASS_METHODS.items():
        found = {
            node.name: {n.name for n in node.body if isinstance(n, ast.FunctionDef)}
            for node in ast.walk(_tree(module))
            if isinstance(node, ast.ClassDef)
        }
        for class_name, methods in classes.items():
            if class_name not in found:
                problems.append(f"{module}: class {class_name}")
                continue
            problems.extend(
                f"{module}: {class_name}.{m}" for m in methods if m not in found[class_name]
            )
    return problems


def missing_functions() -> list:
    problems = []
    for module, functions in REQUIRED_FUNCTIONS.items():
        defined = {n.name for n in _tree(module).body if isinstance(n, ast.FunctionDef)}
        problems.extend(f"{module}: {name}" for name in functions if name not in defined)
    return problems


def main() -> int:
    for label, check in (
        ("file layout", missing_paths),
        ("manager classes", missing_methods),
        ("module operations", missing_functions),
    ):
        print(f"  - Verifying {label}...")
        problems = check()
        if problems:
            for problem in problems:
                print(f"❌ Structural Integrity Error: missing {problem}")
            return 1
        print(f"    ✅ {label.capitalize()} complete.")
    return 0


if __name__ == "__main__":
    sys.exit(main())

import itertools
import sys
from argparse import ArgumentParser
from pathlib import Path

sys.path.append(Path().parent.as_posix())

from skylink.config import Config
from skylink.harness.runner import run_tracking
from skylink.harness.scenarios import load_scenario
from skylink.tools.typer import Typer
from skylink.tracking.models import PidGains

KP_GRID = [0.1, 0.2, 0.3, 0.5]
KI_GRID = [0.1, 0.2, 0.3, 0.5]
KD_GRID = [0.0, 0.1, 0.2]


def tune_gains(name: str, shown: int):
    """Ranks gain triples by closed-loop mean error on the scenario."""
    scenario = load_scenario(name)
    Typer.header(f"Tuning tracking gains on {scenario.name}")
    results = []
    for kp, ki, kd in itertools.product(KP_GRID, KI_GRID, KD_GRID):
        tracking = scenario.tracking.model_copy(
            update={"gains": PidGains(kp=kp, ki=ki, kd=kd)}
        )
        _, loop = run_tracking(
            scenario.model_copy(update={"tracking": tracking})
        )
        summary = loop.summary()
        if not summary.unstable:
            results.append((summary.mean_error_m, summary, kp, ki, kd))
    results.sort(key=lambda result: result[0])
    Typer.table(
        [
            (
                kp,
                ki,
                kd,
                f"{summary.mean_error_m * 1e6:.1f}",
                f"{summary.std_error_m * 1e6:.1f}",
                summary.saturations,
            )
            for _, summary, kp, ki, kd in results[:shown]
        ],
        headers=["kp", "ki", "kd", "mean_um", "std_um", "saturated"],
    )


if __name__ == "__main__":
    parser = ArgumentParser(prog="tune_gains")
    parser.add_argument("scenario", nargs="?", default="link500")
    parser.add_argument("--shown", type=int, default=10)
    namespace = parser.parse_args()
    Config.make(debug=True)
    tune_gains(namespace.scenario, namespace.shown)

"""
Self-checks runnable from the command line.

Each suite returns a list of ``CheckResult`` with the measured quantity and
the tolerance it was held to. Suites never raise on a failed check; only
configuration problems propagate.
"""

from typing import Callable, Dict, List

import numpy as np
import structlog
from pydantic import BaseModel

from app.analysis.complexity import count_weights
from app.blocks.builder import build_model
from app.blocks.hierarchy import channel_ladder
from app.core.seeding import substream
from app.engine.matrix import conv_as_matrix, flatten
from app.engine.operators import ConvOperator
from app.engine.ops import conv2d, softmax_cross_entropy
from app.engine.tape import Tape, backward
from app.engine.tensor import Precision, Tensor
from app.models.schemas import Activation, LadderMode, ModelConfig, SharingPolicy, Variant
from app.oracle.correspondence import (
    build_linear_model,
    channel_cycle_check,
    correspondence_check,
    sic_matrix_check,
)
from app.oracle.multigrid import GridHierarchy, measure_contraction
from app.oracle.poisson import PoissonProblem

logger = structlog.get_logger("mgiad.verification")

GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_FLOOR = 1e-3
MATRIX_TOLERANCE = 1e-12
CORRESPONDENCE_TOLERANCE = 1e-12


class CheckResult(BaseModel):
    """Outcome of one check."""

    name: str
    measured: float
    tolerance: float
    passed: bool

    @classmethod
    def below(cls, name: str, measured: float, tolerance: float) -> "CheckResult":
        return cls(name=name, measured=float(measured), tolerance=tolerance, passed=bool(measured < tolerance))

    @classmethod
    def at_least(cls, name: str, measured: float, minimum: float) -> "CheckResult":
        return cls(name=name, measured=float(measured), tolerance=minimum, passed=bool(measured >= minimum))

    @classmethod
    def equal(cls, name: str, measured: float, expected: float) -> "CheckResult":
        return cls(name=name, measured=float(measured), tolerance=0.0, passed=bool(measured == expected))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.3e} tolerance={self.tolerance:.1e}"


# Gradient check


def toy_config(activation: Activation = Activation.IDENTITY) -> ModelConfig:
    """Two resolution levels, two channel levels each, a few hundred weights."""
    return ModelConfig(
        variant=Variant.MGIAD,
        levels=2,
        channels=[4, 4],
        g_s=2,
        c_K=2,
        num_classes=3,
        input_channels=1,
        input_size=4,
        activation=activation,
    )


def gradient_error(model, images: np.ndarray, labels: np.ndarray, step: float = GRADCHECK_STEP) -> float:
    """Largest relative error between reverse-mode and central-difference gradients.

    Errors are relative to ``max(|analytic|, |numeric|, GRADCHECK_FLOOR)``.
    """

    def loss() -> float:
        return softmax_cross_entropy(model(images, mode="train"), labels).item()

    with Tape(model.registry) as tape:
        out = softmax_cross_entropy(model(images, mode="train"), labels)
    analytic = backward(tape, out)

    worst = 0.0
    for name, param in model.registry.items():
        flat = param.data.reshape(-1)
        grad = analytic[name].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            upper = loss()
            flat[i] = saved - step
            lower = loss()
            flat[i] = saved
            numeric = (upper - lower) / (2 * step)
            scale = max(abs(grad[i]), abs(numeric), GRADCHECK_FLOOR)
            worst = max(worst, abs(grad[i] - numeric) / scale)
    return worst


def dead_parameters(model, images: np.ndarray, labels: np.ndarray) -> List[str]:
    """Trainable parameters whose gradient is identically zero on one batch."""
    with Tape(model.registry) as tape:
        out = softmax_cross_entropy(model(images, mode="train"), labels)
    grads = backward(tape, out)
    return [name for name, param in model.registry.items() if not param.frozen and not np.any(grads[name])]


def gradcheck_suite(seed: int = 0) -> List[CheckResult]:
    results = []
    for activation in (Activation.IDENTITY, Activation.RELU):
        config = toy_config(activation)
        model = build_model(config, seed=seed, precision=Precision.VERIFICATION)
        rng = substream(seed, "data", 1)
        images = rng.standard_normal((2, config.input_size, config.input_size, config.input_channels))
        labels = rng.integers(0, config.num_classes, size=2)
        tag = f"gradcheck.{activation.value}"
        if not results:
            results.append(CheckResult.below("gradcheck.parameters", model.parameter_count(), 5000))
        results += [
            CheckResult.equal(f"{tag}.dead_parameters", len(dead_parameters(model, images, labels)), 0),
            CheckResult.below(f"{tag}.max_rel_err", gradient_error(model, images, labels), GRADCHECK_TOLERANCE),
        ]
    return results


# Matrix oracle


def random_operators(seed: int = 0, count: int = 60) -> List[tuple]:
    """Small dense, grouped, depthwise and strided operators with matching inputs."""
    rng = substream(seed, "init", 2)
    cases = []
    kinds = ("dense", "grouped", "depthwise", "strided")
    for index in range(count):
        kind = kinds[index % len(kinds)]
        c = int(rng.choice([2, 4, 6]))
        stencil = int(rng.choice([1, 3]))
        if kind == "dense":
            groups, out = 1, int(rng.choice([1, 2, 4]))
        elif kind == "grouped":
            groups, out = 2, 2 * int(rng.choice([1, 2]))
        else:
            groups, out = c, c * int(rng.choice([1, 2]))
        stride = 2 if kind == "strided" else 1
        op = ConvOperator.create(
            f"op{index}", c, out, stencil=stencil, groups=groups, stride=stride,
            dtype=np.float64, rng=rng,
        )
        m, n = int(rng.integers(3, 7)), int(rng.integers(3, 7))
        cases.append((kind, op, rng.standard_normal((1, m, n, c))))
    return cases


def block_pattern_violations(op: ConvOperator, shape) -> int:
    """Nonzeros coupling different channel groups."""
    matrix = conv_as_matrix(op, shape).tocoo()
    out_group = (matrix.row % op.out_channels) // (op.out_channels // op.groups)
    in_group = (matrix.col % op.in_channels) // op.group_size
    return int(np.count_nonzero(out_group != in_group))


def matrix_suite(seed: int = 0) -> List[CheckResult]:
    worst = 0.0
    violations = 0
    cases = random_operators(seed)
    for kind, op, x in cases:
        direct = conv2d(Tensor(x), op).data.reshape(-1)
        via_matrix = conv_as_matrix(op, x.shape) @ flatten(x)
        worst = max(worst, float(np.abs(direct - via_matrix).max()))
        if op.groups > 1:
            violations += block_pattern_violations(op, x.shape)
    return [
        CheckResult.at_least("matrix.cases", len(cases), 50),
        CheckResult.below("matrix.max_abs_diff", worst, MATRIX_TOLERANCE),
        CheckResult.equal("matrix.group_pattern_violations", violations, 0),
    ]


# Weight sharing


def _conv_total(config: ModelConfig, roles=("A", "B")) -> int:
    return sum(op.count for op in count_weights(config).operators if op.role in roles)


def sharing_suite(width: int = 16) -> List[CheckResult]:
    """Conv counts of one isolated level with two blocks."""
    resnet = ModelConfig(variant=Variant.RESNET, levels=1, channels=[width], nu=2)
    shared = ModelConfig(variant=Variant.MGNET, levels=1, channels=[width], nu=2)
    share_a = ModelConfig(
        variant=Variant.MGNET, levels=1, channels=[width], nu=2,
        sharing=SharingPolicy(share_A=True, share_B=False),
    )
    base = _conv_total(resnet)
    shared_model = build_model(shared)
    conv_ids = [p.shared_id for p in shared_model.registry if p.role in ("A", "B")]
    return [
        CheckResult.equal("sharing.mgnet_ab_over_resnet", _conv_total(shared) / base, 0.5),
        CheckResult.equal("sharing.mgnet_a_over_resnet", _conv_total(share_a) / base, 0.75),
        CheckResult.equal("sharing.shared_conv_ids", len(conv_ids), 2),
    ]


# Hierarchies and the multigrid oracle


def degenerate_mismatch(width: int = 16, eta_pre: int = 1, eta_post: int = 1) -> int:
    """``|count(MGiaD with g_s = c = c_K) - count(MgNet^{A,B}, nu = eta_pre + eta_post)|``."""
    mgiad = ModelConfig(
        variant=Variant.MGIAD, levels=2, channels=[width, width], g_s=width, c_K=width,
        eta_pre=eta_pre, eta_post=eta_post, ladder=LadderMode.FLOOR, input_size=8,
    )
    mgnet = ModelConfig(
        variant=Variant.MGNET, levels=2, channels=[width, width], nu=eta_pre + eta_post, input_size=8,
    )
    difference = abs(count_weights(mgiad).total - count_weights(mgnet).total)
    images = substream(0, "data", 3).standard_normal((2, 8, 8, 3))
    a = build_model(mgiad)(images, mode="eval").shape
    b = build_model(mgnet)(images, mode="eval").shape
    return difference + (0 if a == b else 1)


def hierarchy_suite(seed: int = 0) -> List[CheckResult]:
    omega = 2.0 / 3.0
    results = [
        CheckResult.equal("hierarchy.ladder_256_64", float(channel_ladder(256, 64) == [256, 128, 64]), 1.0),
        CheckResult.equal("hierarchy.degenerate_equivalence", degenerate_mismatch(), 0),
    ]

    problem = PoissonProblem(1, 63, seed=seed)
    grids = GridHierarchy.build(problem, 5)
    for fas in (False, True):
        report = correspondence_check(build_linear_model(grids, omega, nu=2, fas=fas), problem, grids, omega)
        name = "fas_leg" if fas else "coarsening_leg"
        results.append(CheckResult.below(f"hierarchy.{name}", report.max_abs_diff, CORRESPONDENCE_TOLERANCE))
    results.append(
        CheckResult.below(
            "hierarchy.sic_two_grid", channel_cycle_check(seed=seed).max_abs_diff, CORRESPONDENCE_TOLERANCE
        )
    )
    results.append(CheckResult.below("hierarchy.sic_matrix", sic_matrix_check(seed=seed).max_abs_diff, 1e-12))
    contraction = measure_contraction(problem, grids, omega)
    results.append(CheckResult.below("hierarchy.vcycle_contraction", contraction.mean_factor, 0.2))
    return results


SUITES: Dict[str, Callable[[], List[CheckResult]]] = {
    "gradcheck": gradcheck_suite,
    "matrix": matrix_suite,
    "sharing": sharing_suite,
    "hierarchy": hierarchy_suite,
}


def run_suite(name: str) -> List[CheckResult]:
    results = SUITES[name]()
    failed = [r.name for r in results if not r.passed]
    logger.info("suite finished", suite=name, checks=len(results), failed=failed)
    return results

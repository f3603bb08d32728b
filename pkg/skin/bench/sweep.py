"""
SkIn - Cost Sweep
Times one full training step per method and length, counts live tensor
elements, and extrapolates lengths a method is not allowed to run.
"""

import gc
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..baselines import BaselineKind, BaselineParams, BaselineTrace
from ..encoder import EncoderConfig, preset_config
from ..errors import BenchError, DomainError, SingularFitError
from ..model import IntensiveTrace, SkimTrace, SkinParams, select_key_segment
from ..ndtensor import Adam, Tensor, allocation_counter
from ..ndtensor.ops import cross_entropy, cross_entropy_backward
from ..textio import SegmentedDoc
from ..textio.vocab import RESERVED_TOKENS
from ..training.losses import smooth_labels
from ..utils import MemoryMonitor
from .config import BenchConfig
from .fitting import QuadFit, quad_fit, scaling_exponent
from .methods import Layout, Method, layout_for, modeled_cost, validate_lengths

logger = logging.getLogger(__name__)

SMOOTHING = 0.2


@dataclass
class CostSample:
    """One (method, L) point: median step time, element counts and per-trial times."""
    method: str
    length: int
    n: int
    l: int
    wall_time: float
    modeled_quadratic_elems: int
    modeled_linear_elems: int
    skim_quadratic_elems: int
    measured_peak_elems: int
    trial_times: List[float] = field(default_factory=list)
    rss_mb: Optional[float] = None
    extrapolated: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SavingsReport:
    """Modeled quadratic memory saved by a SkIn method over full attention at L."""
    method: str
    length: int
    skin_elems: float
    bert_elems: float
    percent: float
    extrapolated: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# =============================================================================
# Training steps
# =============================================================================

def _random_docs(
    rng: np.random.Generator, count: int, layout: Layout, config: BenchConfig
) -> List[SegmentedDoc]:
    length = layout.n * layout.l
    docs = []
    for i in range(count):
        tokens = rng.integers(len(RESERVED_TOKENS), config.vocab_size, size=length)
        label = int(rng.integers(0, config.num_classes))
        docs.append(SegmentedDoc(tokens, layout.n, layout.l, label, length, doc_id=f"bench-{i:05d}"))
    return docs


def _targets(docs: Sequence[SegmentedDoc], num_classes: int) -> Tensor:
    return Tensor(np.stack([smooth_labels(d.label, num_classes, SMOOTHING).data for d in docs]))


def _chunks(docs: Sequence[SegmentedDoc], size: int) -> List[Sequence[SegmentedDoc]]:
    return [docs[i:i + size] for i in range(0, len(docs), size)]


def build_step(
    method: Method,
    layout: Layout,
    lite: EncoderConfig,
    strong: EncoderConfig,
    config: BenchConfig,
    rng: np.random.Generator,
) -> Callable[[], float]:
    """
    Set up parameters, optimizer and a batch for one method at one length.

    Returns a closure running forward + backward over the batch in
    micro-batches (gradients accumulate) followed by one Adam update.
    """
    docs = _random_docs(rng, config.batch_size, layout, config)
    U = config.num_classes

    if method is Method.BERT or method is Method.SLIDE_WINDOW:
        kind = BaselineKind.TRUNCATE if method is Method.BERT else BaselineKind.SLIDE_WINDOW
        params = BaselineParams.initialize(
            kind, strong, U, rng,
            truncate_cap=layout.n * layout.l, head_tail_len=1, segment_len=layout.l,
        )
        trainable = params.named()

        def forward_backward(batch, step_rng):
            trace = BaselineTrace(batch, params, train_mode=True, rng=step_rng)
            targets = _targets(batch, U)
            loss = cross_entropy(trace.o, targets)
            trace.backward(cross_entropy_backward(trace.o, targets))
            return loss
    else:
        params = SkinParams.initialize(lite, strong, U, rng)
        trainable = params.stage3_params()

        def forward_backward(batch, step_rng):
            skim = SkimTrace(batch, params, train_mode=True, rng=step_rng)
            keys = [select_key_segment(g, doc) for g, doc in zip(skim.g.data, batch)]
            intensive = IntensiveTrace(keys, skim.r_g, params, train_mode=True, rng=step_rng)
            targets = _targets(batch, U)
            loss = cross_entropy(intensive.o, targets)
            skim.backward(d_r_g=intensive.backward(cross_entropy_backward(intensive.o, targets)))
            return loss

    optimizer = Adam(trainable, config.lr)
    step_rng = np.random.default_rng(rng.integers(2 ** 32))

    def step() -> float:
        optimizer.zero_grad()
        total = 0.0
        for batch in _chunks(docs, config.micro_batch):
            total += forward_backward(batch, step_rng) * len(batch)
        optimizer.step()
        return total / len(docs)

    return step


def time_step(step: Callable[[], float], trials: int, warmup: int = 1):
    """
    Run `warmup` untimed steps, then `trials` timed ones.

    Returns (per-trial seconds, peak live elements over all trials).
    """
    for _ in range(warmup):
        step()
    counter = allocation_counter()
    times, peak = [], 0
    for _ in range(trials):
        gc.collect()
        counter.reset()
        start = time.perf_counter()
        step()
        times.append(time.perf_counter() - start)
        peak = max(peak, counter.peak)
    return times, peak


# =============================================================================
# Sweep
# =============================================================================

def _guarded(method: Method, layout: Layout, modeled_quadratic: int, config: BenchConfig) -> Optional[str]:
    if layout.longest_input(method) > config.encoder_length_limit:
        return (
            f"encoder input {layout.longest_input(method)} exceeds limit "
            f"{config.encoder_length_limit}"
        )
    if config.element_budget is not None and modeled_quadratic * config.batch_size > config.element_budget:
        return f"modeled elements {modeled_quadratic * config.batch_size} exceed budget {config.element_budget}"
    return None


def _extrapolate(method: Method, measured: List[CostSample], pending: List[CostSample], trials: int) -> None:
    if not pending:
        return
    try:
        time_fit = quad_fit([(s.length, s.wall_time) for s in measured])
        peak_fit = quad_fit([(s.length, s.measured_peak_elems) for s in measured])
    except SingularFitError as e:
        raise BenchError(
            f"{method.value}: lengths {[s.length for s in pending]} cannot run and only "
            f"{len(measured)} lengths were measured; extrapolation needs 3 ({e})"
        )
    for sample in pending:
        wall = time_fit.predict(sample.length)
        peak = peak_fit.predict(sample.length)
        if wall <= 0 or peak <= 0:
            raise BenchError(
                f"{method.value}: extrapolation to L={sample.length} is not positive "
                f"(time {wall:.3g}, peak {peak:.3g})"
            )
        sample.wall_time = float(wall)
        sample.trial_times = [float(wall)] * trials
        sample.measured_peak_elems = int(round(peak))


def run_cost_sweep(
    methods: Sequence[str],
    lengths: Sequence[int],
    trials: int,
    seed: int,
    config: Optional[BenchConfig] = None,
    lite: Optional[EncoderConfig] = None,
    strong: Optional[EncoderConfig] = None,
    progress: bool = False,
    on_sample: Optional[Callable[[CostSample], None]] = None,
) -> List[CostSample]:
    """
    Measure training-step cost for each method over ascending lengths.

    Args:
        methods: Method ids (bert, slidewindow, skin-invariable, skin-variable).
        lengths: Ascending total token lengths L.
        trials: Timed steps per point (median reported).
        seed: Seed for parameters, documents and dropout.
        config: Remaining sweep settings; `methods`, `lengths`, `trials`
            and `seed` override its fields.
        lite: Lite encoder config (desk preset when omitted).
        strong: Strong encoder config (desk preset when omitted).
        progress: Show a tqdm bar.
        on_sample: Called with each finished sample.

    Returns:
        Samples ordered by method then length. Points a method may not run
        are predicted from its measured points and flagged `extrapolated`.
    """
    base = config or BenchConfig()
    config = BenchConfig.from_dict({
        **base.to_dict(), "methods": list(methods), "lengths": list(lengths),
        "trials": trials, "seed": seed,
    })
    max_len = config.encoder_length_limit + 2
    lite = lite or preset_config("desk", "lite", config.vocab_size, max_len)
    strong = strong or preset_config("desk", "strong", config.vocab_size, max_len)

    parsed = [Method.parse(name) for name in config.methods]
    for method in parsed:
        validate_lengths(method, config.lengths, config.segment_count, config.segment_length)

    monitor = MemoryMonitor()
    samples: List[CostSample] = []
    jobs = [(i, m, L) for i, m in enumerate(parsed) for L in config.lengths]
    bar = tqdm(total=len(jobs), desc="bench", disable=not progress, leave=False)

    for index, method in enumerate(parsed):
        measured: List[CostSample] = []
        pending: List[CostSample] = []
        for length in config.lengths:
            layout = layout_for(method, length, config.segment_count, config.segment_length)
            cost = modeled_cost(method, length, lite, strong, config.segment_count, config.segment_length)
            sample = CostSample(
                method=method.value, length=length, n=layout.n, l=layout.l, wall_time=0.0,
                modeled_quadratic_elems=cost.quadratic, modeled_linear_elems=cost.linear,
                skim_quadratic_elems=cost.skim_quadratic, measured_peak_elems=0,
            )
            reason = _guarded(method, layout, cost.quadratic, config)
            if reason is not None:
                logger.info("%s L=%d not run (%s); extrapolating", method.value, length, reason)
                sample.extrapolated = True
                pending.append(sample)
            else:
                rng = np.random.default_rng([config.seed, index, length])
                step = build_step(method, layout, lite, strong, config, rng)
                times, peak = time_step(step, config.trials, config.warmup)
                del step
                gc.collect()
                sample.trial_times = [float(t) for t in times]
                sample.wall_time = float(np.median(times))
                sample.measured_peak_elems = int(peak)
                sample.rss_mb = round(monitor.get_rss_mb(), 1)
                for warning in monitor.warnings():
                    logger.warning("%s L=%d: %s", method.value, length, warning)
                measured.append(sample)
                logger.info(
                    "%s L=%d: %.4fs median, peak %d elems",
                    method.value, length, sample.wall_time, sample.measured_peak_elems,
                )
            samples.append(sample)
            bar.update(1)
            if on_sample is not None and not sample.extrapolated:
                on_sample(sample)
        _extrapolate(method, measured, pending, config.trials)
        if on_sample is not None:
            for sample in pending:
                on_sample(sample)
    bar.close()
    return samples


# =============================================================================
# Analysis
# =============================================================================

def savings_percent(skin: float, bert: float) -> float:
    """100·(1 − skin/bert)."""
    if bert <= 0:
        raise DomainError(f"reference cost must be positive, got {bert}")
    return 100.0 * (1.0 - skin / bert)


def _modeled_at(samples: Sequence[CostSample], length: int):
    for sample in samples:
        if sample.length == length:
            return float(sample.modeled_quadratic_elems), sample.extrapolated
    try:
        fit = quad_fit([(s.length, s.modeled_quadratic_elems) for s in samples])
    except SingularFitError as e:
        method = samples[0].method if samples else "?"
        raise BenchError(f"{method}: no value at L={length} and no fit to extrapolate from ({e})")
    return fit.predict(length), True


def savings_report(
    skin_samples: Sequence[CostSample], bert_samples: Sequence[CostSample], length: int
) -> SavingsReport:
    """
    Percentage of modeled quadratic memory a SkIn method saves over BERT at L.

    A side without a sample at L is predicted by quad_fit over its
    samples; the report is flagged `extrapolated` if either value is.
    """
    skin, skin_extra = _modeled_at(skin_samples, length)
    bert, bert_extra = _modeled_at(bert_samples, length)
    return SavingsReport(
        method=skin_samples[0].method if skin_samples else "skin",
        length=length,
        skin_elems=skin,
        bert_elems=bert,
        percent=savings_percent(skin, bert),
        extrapolated=skin_extra or bert_extra,
    )


def by_method(samples: Sequence[CostSample]) -> Dict[str, List[CostSample]]:
    grouped: Dict[str, List[CostSample]] = {}
    for sample in samples:
        grouped.setdefault(sample.method, []).append(sample)
    return grouped


def _maybe_fit(points) -> Optional[QuadFit]:
    try:
        return quad_fit(points)
    except SingularFitError:
        return None


def _maybe_exponent(points) -> Optional[float]:
    try:
        return scaling_exponent(points)
    except DomainError:
        return None


def summarize_sweep(samples: Sequence[CostSample]) -> Dict[str, Any]:
    """
    Fits, scaling exponents and savings for a finished sweep.

    Time and peak fits use measured points only; modeled exponents use
    every length since the model is exact.
    """
    grouped = by_method(samples)
    methods: Dict[str, Any] = {}
    for name, group in grouped.items():
        measured = [s for s in group if not s.extrapolated]
        time_fit = _maybe_fit([(s.length, s.wall_time) for s in measured])
        peak_fit = _maybe_fit([(s.length, s.measured_peak_elems) for s in measured])
        methods[name] = {
            "lengths": [s.length for s in group],
            "extrapolated_lengths": [s.length for s in group if s.extrapolated],
            "time_fit": time_fit.to_dict() if time_fit else None,
            "peak_fit": peak_fit.to_dict() if peak_fit else None,
            "exponents": {
                "wall_time": _maybe_exponent([(s.length, s.wall_time) for s in measured]),
                "peak_elems": _maybe_exponent([(s.length, s.measured_peak_elems) for s in measured]),
                "modeled_quadratic": _maybe_exponent(
                    [(s.length, s.modeled_quadratic_elems) for s in group]
                ),
                "skim_quadratic": _maybe_exponent(
                    [(s.length, s.skim_quadratic_elems) for s in group if s.skim_quadratic_elems > 0]
                ),
            },
        }

    savings: List[Dict[str, Any]] = []
    bert = grouped.get(Method.BERT.value)
    if bert:
        for name in (Method.SKIN_INVARIABLE.value, Method.SKIN_VARIABLE.value):
            if name not in grouped:
                continue
            for sample in grouped[name]:
                savings.append(savings_report(grouped[name], bert, sample.length).to_dict())
    return {"methods": methods, "savings": savings}
